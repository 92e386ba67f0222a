//! Scenario configuration, the built-in benchmarks and the empirical
//! terminal velocity of a falling disc.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::convection::ConvectionMethod;
use crate::error::{Error, Result};
use crate::mesh::{FluidMesh, GridSpec, RefinementRegion, AREA_RATIO_RANGE};
use crate::solid::{SolidMaterial, SolidMesh};
use crate::stepper::{Probe, Simulation, StepperConfig};
use crate::types::{
    BoundaryConditions, DirichletSpec, Obstacle, PhysicalParams, Side, Spatial, Temporal,
};

pub const BUILTIN_NAMES: [&str; 5] = ["leaflet_across", "leaflet_along", "cavity_disc", "falling_disc", "multi_solid"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum SolidShape {
    Rectangle { min: [f64; 2], max: [f64; 2] },
    Disc { center: [f64; 2], radius: f64 },
    /// Convex polygon, vertices in order.
    Polygon { vertices: Vec<[f64; 2]> },
    RegularPolygon { center: [f64; 2], radius: f64, sides: usize },
}

impl SolidShape {
    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        match self {
            SolidShape::Rectangle { min, max } => (*min, *max),
            SolidShape::Disc { center: c, radius: r } | SolidShape::RegularPolygon { center: c, radius: r, .. } => {
                ([c[0] - r, c[1] - r], [c[0] + r, c[1] + r])
            }
            SolidShape::Polygon { vertices } => vertices.iter().fold(
                ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
                |(lo, hi), v| ([lo[0].min(v[0]), lo[1].min(v[1])], [hi[0].max(v[0]), hi[1].max(v[1])]),
            ),
        }
    }

    fn area(&self) -> f64 {
        match self {
            SolidShape::Rectangle { min, max } => (max[0] - min[0]) * (max[1] - min[1]),
            SolidShape::Disc { radius, .. } => std::f64::consts::PI * radius * radius,
            SolidShape::RegularPolygon { radius, sides, .. } => {
                let n = *sides as f64;
                0.5 * n * radius * radius * (2.0 * std::f64::consts::PI / n).sin()
            }
            SolidShape::Polygon { vertices } => {
                let n = vertices.len();
                0.5 * (0..n)
                    .map(|i| {
                        let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                        a[0] * b[1] - b[0] * a[1]
                    })
                    .sum::<f64>()
                    .abs()
            }
        }
    }

    /// Meshes the shape with triangles of roughly `target_area`.
    pub fn mesh(&self, target_area: f64, material: SolidMaterial) -> Result<SolidMesh> {
        let count = |a: f64| -> usize { (a / target_area).sqrt().round().max(1.0) as usize };
        match self {
            SolidShape::Rectangle { min, max } => {
                let h = (2.0 * target_area).sqrt();
                let nx = ((max[0] - min[0]) / h).round().max(4.0) as usize;
                let ny = ((max[1] - min[1]) / h).round().max(4.0) as usize;
                SolidMesh::rectangle(*min, *max, nx, ny, material)
            }
            SolidShape::Disc { center, radius } => {
                SolidMesh::disc(*center, *radius, count(self.area() / 6.0), material)
            }
            SolidShape::Polygon { vertices } => {
                SolidMesh::polygon(vertices, count(self.area() / vertices.len() as f64), material)
            }
            SolidShape::RegularPolygon { center, radius, sides } => {
                SolidMesh::regular_polygon(*center, *radius, *sides, count(self.area() / *sides as f64), material)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolidSpec {
    #[serde(flatten)]
    pub shape: SolidShape,
    /// Overrides `params.solid_density`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density: Option<f64>,
    /// Overrides `params.solid_shear_modulus`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shear_modulus: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub origin: [f64; 2],
    pub extent: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub root_cells: [usize; 2],
    pub max_level: u32,
    /// Refinement level of the cells covering the solids.
    pub solid_level: u32,
    /// Target (fluid cell area) / (solid triangle area).
    #[serde(default = "default_ratio")]
    pub area_ratio: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub regions: Vec<RefinementRegion>,
}

fn default_ratio() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub t_end: f64,
    /// Write probes every this many steps.
    #[serde(default = "default_every")]
    pub output_every: usize,
    /// Write field files every this many steps; 0 writes only the final state.
    #[serde(default)]
    pub fields_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_seconds: Option<f64>,
}

fn default_every() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub domain: DomainSpec,
    pub params: PhysicalParams,
    pub mesh: MeshSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub stepper: StepperConfig,
    #[serde(default)]
    pub boundary: BoundaryConditions,
    #[serde(default)]
    pub solids: Vec<SolidSpec>,
    #[serde(default)]
    pub probes: Vec<Probe>,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// A built-in name, or else a path to a config file.
    pub fn load(name_or_path: &str) -> Result<Self> {
        if let Some(c) = builtin_scenario(name_or_path) {
            return Ok(c);
        }
        let p = Path::new(name_or_path);
        if p.exists() {
            Self::from_file(p)
        } else {
            Err(Error::Config(format!(
                "unknown scenario '{name_or_path}': not a file and not one of {}",
                BUILTIN_NAMES.join(", ")
            )))
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            origin: self.domain.origin,
            extent: self.domain.extent,
            root_cells: self.mesh.root_cells,
            max_level: self.mesh.max_level,
        }
    }

    fn material(&self, s: &SolidSpec) -> SolidMaterial {
        SolidMaterial {
            density: s.density.unwrap_or(self.params.solid_density),
            shear_modulus: s.shear_modulus.unwrap_or(self.params.solid_shear_modulus),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.boundary.validate()?;
        self.grid().validate()?;
        self.stepper.convection.validate()?;
        if self.mesh.solid_level > self.mesh.max_level {
            return Err(Error::Config(format!(
                "mesh.solid_level {} exceeds mesh.max_level {}",
                self.mesh.solid_level, self.mesh.max_level
            )));
        }
        let (lo, hi) = AREA_RATIO_RANGE;
        if !(lo..=hi).contains(&self.mesh.area_ratio) {
            return Err(Error::Config(format!(
                "mesh.area_ratio {} outside the stable range [{lo}, {hi}]",
                self.mesh.area_ratio
            )));
        }
        if !(self.run.t_end >= 0.0 && self.run.t_end.is_finite()) {
            return Err(Error::Config(format!("run.t_end must be non-negative, got {}", self.run.t_end)));
        }
        if self.run.output_every == 0 {
            return Err(Error::Config("run.output_every must be at least 1".into()));
        }
        let (o, e) = (self.domain.origin, self.domain.extent);
        let mut boxes: Vec<([f64; 2], [f64; 2])> = Vec::new();
        for (i, s) in self.solids.iter().enumerate() {
            let m = self.material(s);
            if !(m.density > 0.0) || !(m.shear_modulus >= 0.0) {
                return Err(Error::Config(format!("solid {i} needs positive density and non-negative shear modulus")));
            }
            if !(s.shape.area() > 0.0) {
                return Err(Error::Config(format!("solid {i} has no area")));
            }
            if let SolidShape::RegularPolygon { sides, .. } = s.shape {
                if sides < 3 {
                    return Err(Error::Config(format!("solid {i} needs at least 3 sides")));
                }
            }
            let (min, max) = s.shape.bounds();
            if min[0] < o[0] || min[1] < o[1] || max[0] > o[0] + e[0] || max[1] > o[1] + e[1] {
                return Err(Error::Config(format!("solid {i} extends outside the domain")));
            }
            for (j, (bmin, bmax)) in boxes.iter().enumerate() {
                let overlap = |a: f64, b: f64, c: f64, d: f64| a < d && c < b;
                if overlap(min[0], max[0], bmin[0], bmax[0]) && overlap(min[1], max[1], bmin[1], bmax[1]) {
                    return Err(Error::Config(format!("solids {j} and {i} overlap")));
                }
            }
            boxes.push((min, max));
        }
        for p in &self.probes {
            if let Probe::BodyCentroid { body, label } = p {
                if *body >= self.solids.len() {
                    return Err(Error::Config(format!("probe '{label}' refers to missing solid {body}")));
                }
            }
        }
        Ok(())
    }

    /// Solid meshes with triangle area `h²/area_ratio` for the fluid cell
    /// size `h` at the solid level.
    pub fn build_solid(&self) -> Result<SolidMesh> {
        let h = self.grid().cell_size(self.mesh.solid_level);
        let target = h[0] * h[1] / self.mesh.area_ratio;
        let mut sm = SolidMesh::empty();
        for s in &self.solids {
            sm.merge(s.shape.mesh(target, self.material(s))?);
        }
        Ok(sm)
    }

    pub fn build_fluid(&self, sm: &SolidMesh) -> Result<FluidMesh> {
        let fm = FluidMesh::with_regions(self.grid(), self.boundary.clone(), self.mesh.regions.clone())?;
        if sm.num_triangles() == 0 {
            Ok(fm)
        } else {
            fm.refine_solid_to_level(sm, self.mesh.solid_level)
        }
    }

    pub fn build(&self) -> Result<Simulation> {
        self.validate()?;
        let sm = self.build_solid()?;
        let fm = self.build_fluid(&sm)?;
        Simulation::new(fm, sm, self.params.clone(), self.stepper, self.probes.clone())
    }

    pub fn with_method(mut self, m: ConvectionMethod) -> Self {
        self.stepper.convection.method = m;
        self
    }
}

/// Inputs of the empirical terminal velocity of a rigid disc falling
/// between two walls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTerminalVelocity {
    pub solid_density: f64,
    pub fluid_density: f64,
    pub fluid_viscosity: f64,
    pub gravity: f64,
    pub radius: f64,
    /// Half the channel width.
    pub half_width: f64,
}

/// `(ρs−ρf) g r² / (4 μf) (ln(L/r) − 0.9157 + 1.7244 (r/L)² − 1.7302 (r/L)⁴)`
pub fn empirical_ut(e: &EmpiricalTerminalVelocity) -> Result<f64> {
    if !(e.fluid_viscosity > 0.0) {
        return Err(Error::Config(format!("fluid viscosity must be positive, got {}", e.fluid_viscosity)));
    }
    if !(e.radius > 0.0 && e.radius < e.half_width) {
        return Err(Error::Config(format!("need 0 < r < L, got r = {}, L = {}", e.radius, e.half_width)));
    }
    let k = e.radius / e.half_width;
    Ok((e.solid_density - e.fluid_density) * e.gravity * e.radius * e.radius / (4.0 * e.fluid_viscosity)
        * ((e.half_width / e.radius).ln() - 0.9157 + 1.7244 * k * k - 1.7302 * k.powi(4)))
}

fn walls(sides: &[Side]) -> Vec<DirichletSpec> {
    sides.iter().flat_map(|s| DirichletSpec::no_slip(*s)).collect()
}

fn params(rf: f64, mf: f64, rs: f64, ms: f64, g: [f64; 2], dt: f64) -> PhysicalParams {
    PhysicalParams {
        fluid_density: rf,
        fluid_viscosity: mf,
        solid_density: rs,
        solid_shear_modulus: ms,
        gravity: g,
        time_step: dt,
    }
}

fn rect(min: [f64; 2], max: [f64; 2]) -> SolidSpec {
    SolidSpec { shape: SolidShape::Rectangle { min, max }, density: None, shear_modulus: None }
}

/// Desk-scale versions of the benchmark set-ups.
pub fn builtin_scenario(name: &str) -> Option<ScenarioConfig> {
    let c = match name {
        "leaflet_across" => {
            let w = 0.0212;
            let mut dirichlet = vec![
                DirichletSpec {
                    side: Side::Left,
                    component: 0,
                    profile: Spatial::Parabolic { peak: 15.0, from: 0.0, to: 2.0 },
                    time: Temporal::Sine { frequency: 1.0 },
                },
                DirichletSpec::constant(Side::Left, 1, 0.0),
                DirichletSpec::constant(Side::Top, 1, 0.0),
            ];
            dirichlet.extend(walls(&[Side::Bottom]));
            ScenarioConfig {
                name: name.into(),
                description: "leaflet across a pulsating channel flow; symmetric half channel with a slip top".into(),
                domain: DomainSpec { origin: [0.0, 0.0], extent: [4.0, 1.0] },
                params: params(100.0, 10.0, 100.0, 1e7, [0.0, 0.0], 5e-4),
                mesh: MeshSpec { root_cells: [16, 4], max_level: 4, solid_level: 3, area_ratio: 3.0, regions: vec![] },
                run: RunSpec { t_end: 1.0, output_every: 10, fields_every: 0, budget_seconds: None },
                stepper: StepperConfig::default(),
                boundary: BoundaryConditions { dirichlet, ..Default::default() },
                solids: vec![rect([1.0 - 0.5 * w, 0.0], [1.0 + 0.5 * w, 0.8])],
                probes: vec![
                    Probe::SolidPoint { label: "tip".into(), point: [1.0 + 0.5 * w, 0.8] },
                    Probe::MaxHorizontalVelocity { label: "umax".into() },
                ],
            }
        }
        "leaflet_along" => {
            // a brief transverse inlet pulse seeds the wake instability
            let mut dirichlet = vec![
                DirichletSpec::constant(Side::Left, 0, 51.3),
                DirichletSpec {
                    side: Side::Left,
                    component: 1,
                    profile: Spatial::Constant { value: 2.0 },
                    time: Temporal::Pulse { duration: 0.1 },
                },
            ];
            dirichlet.push(DirichletSpec::constant(Side::Bottom, 1, 0.0));
            dirichlet.push(DirichletSpec::constant(Side::Top, 1, 0.0));
            ScenarioConfig {
                name: name.into(),
                description: "flap behind a square obstacle in a uniform channel flow, half resolution".into(),
                domain: DomainSpec { origin: [0.0, 0.0], extent: [19.5, 12.0] },
                params: params(1.18e-3, 1.82e-4, 0.1, 9.2593e5, [0.0, 0.0], 1e-3),
                mesh: MeshSpec {
                    root_cells: [39, 24],
                    max_level: 3,
                    solid_level: 3,
                    area_ratio: 3.0,
                    regions: vec![RefinementRegion { min: [4.0, 5.0], max: [11.0, 7.0], level: 2 }],
                },
                run: RunSpec { t_end: 4.0, output_every: 10, fields_every: 0, budget_seconds: None },
                stepper: StepperConfig::default(),
                boundary: BoundaryConditions {
                    dirichlet,
                    obstacles: vec![Obstacle { min: [4.5, 5.5], max: [5.5, 6.5] }],
                    ..Default::default()
                },
                solids: vec![rect([5.5, 5.97], [9.5, 6.03])],
                probes: vec![Probe::SolidPoint { label: "tip".into(), point: [9.5, 6.03] }],
            }
        }
        "cavity_disc" => {
            let mut dirichlet = walls(&[Side::Left, Side::Right, Side::Bottom]);
            dirichlet.push(DirichletSpec::constant(Side::Top, 0, 1.0));
            dirichlet.push(DirichletSpec::constant(Side::Top, 1, 0.0));
            ScenarioConfig {
                name: name.into(),
                description: "soft disc carried by a lid-driven cavity flow".into(),
                domain: DomainSpec { origin: [0.0, 0.0], extent: [1.0, 1.0] },
                params: params(1.0, 0.01, 1.0, 0.1, [0.0, 0.0], 0.01),
                mesh: MeshSpec { root_cells: [8, 8], max_level: 4, solid_level: 2, area_ratio: 3.0, regions: vec![] },
                run: RunSpec { t_end: 25.0, output_every: 10, fields_every: 0, budget_seconds: None },
                stepper: StepperConfig::default(),
                boundary: BoundaryConditions { dirichlet, ..Default::default() },
                solids: vec![SolidSpec {
                    shape: SolidShape::Disc { center: [0.6, 0.5], radius: 0.2 },
                    density: None,
                    shear_modulus: None,
                }],
                probes: vec![Probe::BodyCentroid { label: "disc".into(), body: 0 }],
            }
        }
        "falling_disc" => ScenarioConfig {
            name: name.into(),
            description: "rigid-like disc settling under gravity in a channel open at the top".into(),
            domain: DomainSpec { origin: [-1.0, -4.0], extent: [2.0, 4.0] },
            params: params(1.0, 1.0, 1.2, 1e8, [0.0, -980.0], 0.005),
            mesh: MeshSpec { root_cells: [8, 16], max_level: 6, solid_level: 4, area_ratio: 3.0, regions: vec![] },
            run: RunSpec { t_end: 1.0, output_every: 1, fields_every: 0, budget_seconds: None },
            stepper: StepperConfig::default(),
            boundary: BoundaryConditions { dirichlet: walls(&[Side::Left, Side::Right, Side::Bottom]), ..Default::default() },
            solids: vec![SolidSpec {
                shape: SolidShape::Disc { center: [0.0, -0.5], radius: 0.125 },
                density: None,
                shear_modulus: None,
            }],
            probes: vec![Probe::BodyCentroid { label: "disc".into(), body: 0 }],
        },
        "multi_solid" => {
            let solid = |shape, density, shear_modulus| SolidSpec {
                shape,
                density: Some(density),
                shear_modulus: Some(shear_modulus),
            };
            ScenarioConfig {
                name: name.into(),
                description: "five solids of different shape and material sinking or rising in a channel".into(),
                domain: DomainSpec { origin: [-1.0, -4.0], extent: [2.0, 4.0] },
                params: params(1.0, 1.0, 1.2, 1e4, [0.0, -980.0], 0.002),
                mesh: MeshSpec { root_cells: [8, 16], max_level: 6, solid_level: 4, area_ratio: 3.0, regions: vec![] },
                run: RunSpec { t_end: 1.0, output_every: 5, fields_every: 0, budget_seconds: None },
                stepper: StepperConfig::default(),
                boundary: BoundaryConditions {
                    dirichlet: walls(&[Side::Left, Side::Right, Side::Bottom]),
                    ..Default::default()
                },
                solids: vec![
                    solid(SolidShape::Rectangle { min: [0.0, -1.2], max: [0.2, -1.0] }, 1.3, 1e4),
                    solid(
                        SolidShape::Polygon { vertices: vec![[-0.5, -1.1], [-0.5, -1.5], [-0.2, -1.3]] },
                        1.2,
                        1e3,
                    ),
                    solid(SolidShape::Disc { center: [0.0, -2.0], radius: 0.2 }, 1.0, 10.0),
                    solid(SolidShape::RegularPolygon { center: [0.3, -2.7], radius: 0.2, sides: 8 }, 0.8, 1e6),
                    solid(SolidShape::Rectangle { min: [-0.7, -3.0], max: [0.0, -2.9] }, 0.7, 1e2),
                ],
                probes: (0..5).map(|b| Probe::BodyCentroid { label: format!("solid{}", b + 1), body: b }).collect(),
            }
        }
        _ => return None,
    };
    Some(c)
}

/// Empirical terminal velocity for the falling-disc builtin.
pub fn falling_disc_reference(c: &ScenarioConfig) -> Result<f64> {
    let Some(SolidShape::Disc { radius, .. }) = c.solids.first().map(|s| &s.shape) else {
        return Err(Error::Config("scenario has no disc".into()));
    };
    empirical_ut(&EmpiricalTerminalVelocity {
        solid_density: c.solids[0].density.unwrap_or(c.params.solid_density),
        fluid_density: c.params.fluid_density,
        fluid_viscosity: c.params.fluid_viscosity,
        gravity: c.params.gravity[1].abs(),
        radius: *radius,
        half_width: 0.5 * c.domain.extent[0],
    })
}
