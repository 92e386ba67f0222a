//! One time step: convection, coupling rebuild, coupled solve, solid
//! update and optional mesh re-adaptation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::convection::{convect_step, ConvectionConfig};
use crate::coupling::CouplingMap;
use crate::error::{Error, Result};
use crate::fluid::OpsCache;
use crate::mesh::FluidMesh;
use crate::solid::SolidMesh;
use crate::sparse::norm;
use crate::system::{assemble_system, divergence_residual, SolidTerms, SolverSettings};
use crate::types::{PhysicalParams, SystemState};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepperConfig {
    pub convection: ConvectionConfig,
    pub solver_tolerance: f64,
    pub solver_refinements: usize,
    /// Extra coupled solves re-linearized at the newest iterate.
    pub inner_iterations: usize,
    /// Rebuild the fluid mesh when the solid reaches coarse cells.
    pub readapt: bool,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            convection: ConvectionConfig::default(),
            solver_tolerance: 1e-10,
            solver_refinements: 5,
            inner_iterations: 0,
            readapt: true,
        }
    }
}

impl StepperConfig {
    fn solver(&self) -> SolverSettings {
        SolverSettings { tolerance: self.solver_tolerance, max_refinements: self.solver_refinements }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub time: f64,
    pub convection_residual: f64,
    pub solve_residual: f64,
    /// `max |Bᵀu| / ||u||` over free pressure rows.
    pub divergence: f64,
    pub solid_area: f64,
    /// `|A - A₀| / A₀` for the total solid area.
    pub area_drift: f64,
    pub det_f_drift: f64,
    pub min_quality: f64,
    pub max_cfl: f64,
    pub remeshed: bool,
}

/// Quantity sampled after every step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Probe {
    /// Displacement and velocity of the solid node nearest `point` at t = 0.
    SolidPoint { label: String, point: [f64; 2] },
    /// Centroid and mean velocity of one solid body.
    BodyCentroid { label: String, body: usize },
    /// Fluid velocity at a fixed point.
    FluidVelocity { label: String, point: [f64; 2] },
    /// Largest horizontal fluid velocity over the velocity nodes.
    MaxHorizontalVelocity { label: String },
}

impl Probe {
    pub fn label(&self) -> &str {
        match self {
            Probe::SolidPoint { label, .. }
            | Probe::BodyCentroid { label, .. }
            | Probe::FluidVelocity { label, .. }
            | Probe::MaxHorizontalVelocity { label } => label,
        }
    }

    pub fn columns(&self) -> Vec<String> {
        let l = self.label();
        match self {
            Probe::SolidPoint { .. } => ["dx", "dy", "vx", "vy"].iter().map(|s| format!("{l}_{s}")).collect(),
            Probe::BodyCentroid { .. } => ["x", "y", "vx", "vy"].iter().map(|s| format!("{l}_{s}")).collect(),
            Probe::FluidVelocity { .. } => ["u", "v"].iter().map(|s| format!("{l}_{s}")).collect(),
            Probe::MaxHorizontalVelocity { .. } => vec![l.to_string()],
        }
    }
}

/// Meshes, parameters and state of a running simulation.
#[derive(Debug)]
pub struct Simulation {
    pub fluid: FluidMesh,
    pub solid: SolidMesh,
    pub params: PhysicalParams,
    pub config: StepperConfig,
    pub state: SystemState,
    pub probes: Vec<Probe>,
    probe_nodes: Vec<Option<usize>>,
    initial_area: f64,
    cache: OpsCache,
}

/// Sampled probe values at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSample {
    pub time: f64,
    pub values: Vec<f64>,
}

impl Simulation {
    /// Starts from rest with Dirichlet data at t = 0 applied.
    pub fn new(
        fluid: FluidMesh,
        solid: SolidMesh,
        params: PhysicalParams,
        config: StepperConfig,
        probes: Vec<Probe>,
    ) -> Result<Self> {
        params.validate()?;
        config.convection.validate()?;
        if solid.num_nodes() > 0 {
            CouplingMap::new(&fluid, &solid.coords)?;
        }
        let mut state = SystemState::zeros(fluid.num_velocity_nodes(), fluid.num_pressure_nodes(), solid.coords.clone());
        fluid.apply_dirichlet(&mut state.velocity, 0.0);
        fluid.apply_constraints(&mut state.velocity, &mut state.pressure);
        let probe_nodes = probes
            .iter()
            .map(|p| match p {
                Probe::SolidPoint { point, .. } => nearest_node(&solid.coords, *point),
                _ => None,
            })
            .collect();
        let initial_area = solid.total_area();
        Ok(Self { fluid, solid, params, config, state, probes, probe_nodes, initial_area, cache: OpsCache::new() })
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    /// Advances by one time step. On error the simulation is left at the
    /// start of the failed step.
    pub fn advance(&mut self) -> Result<StepReport> {
        let dt = self.params.time_step;
        let fm = &self.fluid;
        let t_new = self.state.time + dt;
        let conv = convect_step(fm, &self.state.velocity, dt, &self.config.convection)?;
        let mut solid = self.solid.clone();
        let has_solid = solid.num_triangles() > 0;
        let coupling = if has_solid { Some(CouplingMap::new(fm, &solid.coords)?) } else { None };
        let (us_n, grad_n) = match &coupling {
            Some(cm) => {
                let us = cm.interpolate(&self.state.velocity)?;
                let g = solid.velocity_gradients(&us)?;
                (us, g)
            }
            None => (Vec::new(), Vec::new()),
        };
        let solver = self.config.solver();
        let terms = coupling.as_ref().map(|cm| SolidTerms { mesh: &solid, coupling: cm, grad_un: &grad_n, velocity: &us_n });
        let sys = assemble_system(fm, &self.params, &conv.velocity, terms, t_new, &mut self.cache)?;
        let mut sol = sys.solve(fm, &solver)?;
        if let Some(cm) = &coupling {
            for _ in 0..self.config.inner_iterations {
                let g = solid.velocity_gradients(&cm.interpolate(&sol.velocity)?)?;
                let terms = SolidTerms { mesh: &solid, coupling: cm, grad_un: &g, velocity: &us_n };
                let sys = assemble_system(fm, &self.params, &conv.velocity, Some(terms), t_new, &mut self.cache)?;
                sol = sys.solve(fm, &solver)?;
            }
        }
        check_finite(&sol.velocity, &sol.pressure)?;
        let us_new = match &coupling {
            Some(cm) => {
                let us = cm.interpolate(&sol.velocity)?;
                let g = solid.velocity_gradients(&us)?;
                solid.update_stresses(&g, dt);
                solid.move_nodes(&us, dt)?;
                us
            }
            None => Vec::new(),
        };
        let div = divergence_residual(fm, &sol.velocity, &mut self.cache);
        let unorm = norm(&sol.velocity.iter().flatten().copied().collect::<Vec<_>>());
        let divergence = div.iter().fold(0.0f64, |m, v| m.max(v.abs())) / if unorm > 0.0 { unorm } else { 1.0 };

        let mut remeshed = false;
        let (mut velocity, mut pressure) = (sol.velocity, sol.pressure);
        if self.config.readapt && has_solid && self.fluid.solid_left_refined_region(&solid) {
            let level = self.fluid.solid_level.expect("refined mesh has a solid level");
            let new = self.fluid.refine_solid_to_level(&solid, level)?;
            let (v, p) = new.transfer_fields(&self.fluid, &velocity, &pressure, t_new)?;
            velocity = v;
            pressure = p;
            self.fluid = new;
            remeshed = true;
        }
        self.solid = solid;
        self.state.velocity = velocity;
        self.state.pressure = pressure;
        self.state.solid_velocity = us_new;
        self.state.solid_coords = self.solid.coords.clone();
        self.state.time = t_new;
        self.state.step += 1;
        let area = self.solid.total_area();
        Ok(StepReport {
            step: self.state.step,
            time: t_new,
            convection_residual: conv.relative_residual,
            solve_residual: sol.relative_residual,
            divergence,
            solid_area: area,
            area_drift: if self.initial_area > 0.0 { (area - self.initial_area).abs() / self.initial_area } else { 0.0 },
            det_f_drift: self.solid.det_f_drift(),
            min_quality: if has_solid { self.solid.min_quality() } else { 1.0 },
            max_cfl: conv.max_cfl,
            remeshed,
        })
    }

    /// Current probe values in the column order of `Probe::columns`.
    pub fn sample(&self) -> ProbeSample {
        let mut values = Vec::new();
        for (p, node) in self.probes.iter().zip(&self.probe_nodes) {
            match p {
                Probe::SolidPoint { .. } => match node {
                    Some(n) => {
                        let x = self.solid.coords[*n];
                        let x0 = self.solid.reference[*n];
                        let v = self.state.solid_velocity.get(*n).copied().unwrap_or([0.0; 2]);
                        values.extend([x[0] - x0[0], x[1] - x0[1], v[0], v[1]]);
                    }
                    None => values.extend([f64::NAN; 4]),
                },
                Probe::BodyCentroid { body, .. } => {
                    let c = self.solid.body_centroid(*body);
                    let v = if self.state.solid_velocity.len() == self.solid.num_nodes() {
                        self.solid.body_velocity(*body, &self.state.solid_velocity)
                    } else {
                        [0.0; 2]
                    };
                    values.extend([c[0], c[1], v[0], v[1]]);
                }
                Probe::FluidVelocity { point, .. } => {
                    let u = self.fluid.interpolate_velocity(&self.state.velocity, *point).unwrap_or([f64::NAN; 2]);
                    values.extend(u);
                }
                Probe::MaxHorizontalVelocity { .. } => {
                    values.push(self.state.velocity.iter().map(|u| u[0]).fold(f64::NEG_INFINITY, f64::max));
                }
            }
        }
        ProbeSample { time: self.state.time, values }
    }

    /// Steps until `t_end`, calling `observe` after each step. Fails when
    /// the wall-clock budget (seconds) is exhausted.
    pub fn run(
        &mut self,
        t_end: f64,
        budget: Option<f64>,
        mut observe: impl FnMut(&Simulation, &StepReport),
    ) -> Result<Vec<StepReport>> {
        let start = Instant::now();
        let mut reports = Vec::new();
        let dt = self.params.time_step;
        while self.state.time + 0.5 * dt <= t_end {
            let r = self.advance()?;
            observe(self, &r);
            reports.push(r);
            if let Some(b) = budget {
                if start.elapsed().as_secs_f64() > b {
                    return Err(Error::Budget(b));
                }
            }
        }
        Ok(reports)
    }
}

fn nearest_node(coords: &[[f64; 2]], p: [f64; 2]) -> Option<usize> {
    coords
        .iter()
        .enumerate()
        .map(|(i, x)| (i, (x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

fn check_finite(v: &[[f64; 2]], p: &[f64]) -> Result<()> {
    if let Some(n) = v.iter().position(|u| !u[0].is_finite() || !u[1].is_finite()) {
        return Err(Error::NonFinite(format!("velocity at node {n}")));
    }
    if let Some(n) = p.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("pressure at node {n}")));
    }
    Ok(())
}
