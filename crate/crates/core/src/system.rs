//! The coupled velocity–pressure system of one diffusion step.
//!
//! `[A B; Bᵀ 0] [u; p] = [b; 0]` with
//! `A = M/Δt + K + Dᵀ(Mˢ/Δt + Kˢ)D` and
//! `b = f + Dᵀfˢ + M u*/Δt + DᵀMˢD uⁿ/Δt`.
//! Solid terms enter element by element through the columns of `R`; the
//! product `DᵀKˢD` is never formed.

use crate::coupling::CouplingMap;
use crate::dofs::{Assembler, DofMap};
use crate::error::{Error, Result};
use crate::fluid::{apply_neumann, FluidElementOps, OpsCache};
use crate::hanging::{modify_element_matrix, modify_vector, BlockLayout};
use crate::mesh::FluidMesh;
use crate::solid::{Mat2, SolidMesh};
use crate::sparse::{norm, solve, CsrMatrix, Factorization};
use crate::types::PhysicalParams;

/// Solid data entering one assembly.
#[derive(Clone, Copy, Debug)]
pub struct SolidTerms<'a> {
    pub mesh: &'a SolidMesh,
    pub coupling: &'a CouplingMap,
    /// `∇uⁿ` per triangle on the current configuration.
    pub grad_un: &'a [Mat2],
    /// `D ũⁿ` at the solid nodes.
    pub velocity: &'a [[f64; 2]],
}

#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
    /// Pressure node held at zero to fix the gauge.
    pub pinned: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_refinements: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_refinements: 5 }
    }
}

#[derive(Clone, Debug)]
pub struct SystemSolution {
    pub velocity: Vec<[f64; 2]>,
    pub pressure: Vec<f64>,
    pub relative_residual: f64,
}

/// Assembles the coupled system for the step ending at `t_new`.
pub fn assemble_system(
    fm: &FluidMesh,
    params: &PhysicalParams,
    u_star: &[[f64; 2]],
    solid: Option<SolidTerms<'_>>,
    t_new: f64,
    cache: &mut OpsCache,
) -> Result<SaddleSystem> {
    if u_star.len() != fm.num_velocity_nodes() {
        return Err(Error::Dimension {
            what: "convected velocity".into(),
            expected: fm.num_velocity_nodes(),
            got: u_star.len(),
        });
    }
    let dt = params.time_step;
    let dofs = DofMap::new(fm, t_new);
    let mut asm = Assembler::new(dofs.len());
    for cell in &fm.cells {
        let ops = FluidElementOps::new(
            cache.get(cell.size()),
            params.fluid_density,
            params.fluid_viscosity,
            params.gravity,
        );
        let mut ke = ops.saddle(dt);
        let mut ul = vec![0.0; 18];
        for (a, &n) in cell.nodes.iter().enumerate() {
            ul[a] = u_star[n][0];
            ul[9 + a] = u_star[n][1];
        }
        let mu = ops.m.matvec(&ul);
        let mut fe: Vec<f64> = ops.f.iter().zip(&mu).map(|(f, m)| f + m / dt).collect();
        fe.extend([0.0; 4]);
        modify_element_matrix(&mut ke, &cell.constraints);
        modify_vector(&mut fe, &cell.constraints, &BlockLayout::TAYLOR_HOOD);
        asm.add(&dofs.cell_dofs(cell, true), Some(&ke), Some(&fe));
    }
    apply_neumann(fm, &dofs, &fm.boundary.traction, &mut asm.rhs)?;
    if let Some(s) = solid {
        add_solid_terms(&mut asm, &dofs, params, s)?;
    }
    Ok(SaddleSystem { matrix: CsrMatrix::from_triplets(asm.matrix), rhs: asm.rhs, dofs, pinned: fm.pinned })
}

fn add_solid_terms(asm: &mut Assembler, dofs: &DofMap, params: &PhysicalParams, s: SolidTerms<'_>) -> Result<()> {
    let sm = s.mesh;
    if s.coupling.num_solid_nodes() != sm.num_nodes() || s.velocity.len() != sm.num_nodes() {
        return Err(Error::Dimension {
            what: "solid coupling".into(),
            expected: sm.num_nodes(),
            got: s.coupling.num_solid_nodes().min(s.velocity.len()),
        });
    }
    if s.grad_un.len() != sm.num_triangles() {
        return Err(Error::Dimension { what: "solid gradients".into(), expected: sm.num_triangles(), got: s.grad_un.len() });
    }
    let dt = params.time_step;
    let ks = sm.assemble_stiffness(s.grad_un, dt)?;
    let ms = sm.assemble_mass(params.fluid_density)?;
    let fs = sm.assemble_load(s.grad_un, dt, params.fluid_density, params.gravity)?;
    for (t, nodes) in sm.triangles.iter().enumerate() {
        let mut ke = ks[t].clone();
        ke.add_scaled(1.0 / dt, &ms[t]);
        let mut un = vec![0.0; 6];
        for (a, &n) in nodes.iter().enumerate() {
            un[a] = s.velocity[n][0];
            un[3 + a] = s.velocity[n][1];
        }
        let mu = ms[t].matvec(&un);
        let mut fe = fs[t];
        for (f, m) in fe.iter_mut().zip(&mu) {
            *f += m / dt;
        }
        s.coupling.add_element(asm, dofs, nodes, Some(&ke), Some(&fe));
    }
    Ok(())
}

impl SaddleSystem {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    /// `||b - A x|| / ||b||`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.matrix.matvec(x);
        let r: Vec<f64> = ax.iter().zip(&self.rhs).map(|(a, b)| b - a).collect();
        let b = norm(&self.rhs);
        norm(&r) / if b > 0.0 { b } else { 1.0 }
    }

    /// Direct LU solve, then expansion to nodal fields with Dirichlet
    /// values and hanging slaves filled in.
    pub fn solve(&self, fm: &FluidMesh, settings: &SolverSettings) -> Result<SystemSolution> {
        let info = solve(&self.matrix, &self.rhs, Factorization::Lu, settings.tolerance, settings.max_refinements)?;
        if info.relative_residual > settings.tolerance {
            log::warn!(
                "saddle solve reached relative residual {:e} above the target {:e}",
                info.relative_residual,
                settings.tolerance
            );
            if info.relative_residual > 1e3 * settings.tolerance {
                return Err(Error::Solver(format!(
                    "saddle solve stalled at relative residual {:e}",
                    info.relative_residual
                )));
            }
        }
        let (velocity, pressure) = self.dofs.expand(fm, &info.solution);
        Ok(SystemSolution { velocity, pressure, relative_residual: info.relative_residual })
    }
}

/// `max |Bᵀu|` over free pressure rows of the fluid divergence, for a
/// nodal velocity field.
pub fn divergence_residual(fm: &FluidMesh, velocity: &[[f64; 2]], cache: &mut OpsCache) -> Vec<f64> {
    let mut out = vec![0.0; fm.num_pressure_nodes()];
    for cell in &fm.cells {
        let ops = FluidElementOps::new(cache.get(cell.size()), 1.0, 1.0, [0.0, 0.0]);
        let mut q = [0.0; 4];
        for j in 0..4 {
            for (a, &n) in cell.nodes.iter().enumerate() {
                q[j] += ops.b[(a, j)] * velocity[n][0] + ops.b[(9 + a, j)] * velocity[n][1];
            }
        }
        let mut fe = q.to_vec();
        modify_vector(&mut fe, &cell.constraints, &BlockLayout::SCALAR_Q1);
        for (j, &p) in cell.pslots.iter().enumerate() {
            out[p] += fe[j];
        }
    }
    for (n, v) in out.iter_mut().enumerate() {
        if fm.is_pressure_slave(n) || fm.pres_fixed[n] || fm.pinned == Some(n) {
            *v = 0.0;
        }
    }
    out
}
