//! Shared domain objects: parameters, boundary data and the step state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub fluid_density: f64,
    pub fluid_viscosity: f64,
    /// Default solid density; individual bodies may override it.
    pub solid_density: f64,
    /// Default solid shear modulus; individual bodies may override it.
    pub solid_shear_modulus: f64,
    pub gravity: [f64; 2],
    pub time_step: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("{what} must be positive and finite, got {v}")));
        if !(self.fluid_density > 0.0 && self.fluid_density.is_finite()) {
            return bad("fluid_density", self.fluid_density);
        }
        if !(self.fluid_viscosity > 0.0 && self.fluid_viscosity.is_finite()) {
            return bad("fluid_viscosity", self.fluid_viscosity);
        }
        if !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return bad("time_step", self.time_step);
        }
        if !(self.solid_density > 0.0 && self.solid_density.is_finite()) {
            return bad("solid_density", self.solid_density);
        }
        if !(self.solid_shear_modulus >= 0.0 && self.solid_shear_modulus.is_finite()) {
            return Err(Error::Config(format!(
                "solid_shear_modulus must be non-negative, got {}",
                self.solid_shear_modulus
            )));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return Err(Error::Config("gravity must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// Index of the velocity component normal to this side.
    pub fn normal_component(self) -> usize {
        match self {
            Side::Left | Side::Right => 0,
            Side::Bottom | Side::Top => 1,
        }
    }

    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }

    /// Coordinate running along the side.
    pub fn tangential_coordinate(self, x: [f64; 2]) -> f64 {
        match self {
            Side::Left | Side::Right => x[1],
            Side::Bottom | Side::Top => x[0],
        }
    }
}

/// Spatial shape of a Dirichlet profile along a side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spatial {
    Constant { value: f64 },
    /// `peak * 4 (s - from)(to - s) / (to - from)^2` in the coordinate `s`
    /// along the side.
    Parabolic { peak: f64, from: f64, to: f64 },
}

/// Time modulation of a Dirichlet profile.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Temporal {
    #[default]
    Steady,
    /// `sin(2 pi frequency t)`
    Sine { frequency: f64 },
    /// `(1 - cos(pi t / duration)) / 2` until `duration`, then 1.
    Ramp { duration: f64 },
    /// `sin²(pi t / duration)` until `duration`, then 0.
    Pulse { duration: f64 },
}

impl Temporal {
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            Temporal::Steady => 1.0,
            Temporal::Sine { frequency } => (2.0 * std::f64::consts::PI * frequency * t).sin(),
            Temporal::Ramp { duration } => {
                if t >= duration {
                    1.0
                } else {
                    0.5 * (1.0 - (std::f64::consts::PI * t / duration).cos())
                }
            }
            Temporal::Pulse { duration } => {
                if t >= duration {
                    0.0
                } else {
                    (std::f64::consts::PI * t / duration).sin().powi(2)
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirichletSpec {
    pub side: Side,
    pub component: usize,
    pub profile: Spatial,
    #[serde(default)]
    pub time: Temporal,
}

impl DirichletSpec {
    pub fn constant(side: Side, component: usize, value: f64) -> Self {
        Self { side, component, profile: Spatial::Constant { value }, time: Temporal::Steady }
    }

    pub fn no_slip(side: Side) -> [Self; 2] {
        [Self::constant(side, 0, 0.0), Self::constant(side, 1, 0.0)]
    }

    pub fn value(&self, x: [f64; 2], t: f64) -> f64 {
        let s = self.side.tangential_coordinate(x);
        let space = match self.profile {
            Spatial::Constant { value } => value,
            Spatial::Parabolic { peak, from, to } => peak * 4.0 * (s - from) * (to - s) / ((to - from) * (to - from)),
        };
        space * self.time.factor(t)
    }
}

/// Constant traction on a side without Dirichlet data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TractionSpec {
    pub side: Side,
    pub value: [f64; 2],
}

/// A fixed rigid rectangle with zero velocity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Obstacle {
    pub fn contains(&self, x: [f64; 2], tol: f64) -> bool {
        x[0] >= self.min[0] - tol && x[0] <= self.max[0] + tol && x[1] >= self.min[1] - tol && x[1] <= self.max[1] + tol
    }

    pub fn contains_strictly(&self, x: [f64; 2], tol: f64) -> bool {
        x[0] > self.min[0] + tol && x[0] < self.max[0] - tol && x[1] > self.min[1] + tol && x[1] < self.max[1] - tol
    }
}

/// Boundary data of the fluid box.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryConditions {
    /// Later entries override earlier ones on shared nodes.
    #[serde(default)]
    pub dirichlet: Vec<DirichletSpec>,
    #[serde(default)]
    pub traction: Vec<TractionSpec>,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    /// Location of the pinned pressure node. Without it the bottom-left
    /// node is pinned whenever no side leaves the normal velocity free.
    #[serde(default)]
    pub pressure_pin: Option<[f64; 2]>,
}

impl BoundaryConditions {
    /// True when every side prescribes the normal velocity, so the pressure
    /// is only determined up to a constant.
    pub fn encloses(&self) -> bool {
        Side::ALL
            .iter()
            .all(|s| self.dirichlet.iter().any(|d| d.side == *s && d.component == s.normal_component()))
    }

    pub fn validate(&self) -> Result<()> {
        for d in &self.dirichlet {
            if d.component > 1 {
                return Err(Error::Config(format!("dirichlet component must be 0 or 1, got {}", d.component)));
            }
            if let Spatial::Parabolic { from, to, .. } = d.profile {
                if from == to {
                    return Err(Error::Config("parabolic profile needs from != to".into()));
                }
            }
            if let Temporal::Ramp { duration } | Temporal::Pulse { duration } = d.time {
                if !(duration > 0.0) {
                    return Err(Error::Config("ramp and pulse durations must be positive".into()));
                }
            }
        }
        for o in &self.obstacles {
            if !(o.min[0] < o.max[0] && o.min[1] < o.max[1]) {
                return Err(Error::Config(format!("obstacle {:?}..{:?} is empty", o.min, o.max)));
            }
        }
        Ok(())
    }
}

/// Unknown fields carried from one step to the next.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    /// Per Q2 velocity node.
    pub velocity: Vec<[f64; 2]>,
    /// Per Q1 pressure node.
    pub pressure: Vec<f64>,
    /// Per solid node.
    pub solid_velocity: Vec<[f64; 2]>,
    /// Current solid node coordinates.
    pub solid_coords: Vec<[f64; 2]>,
    pub time: f64,
    pub step: u64,
}

impl SystemState {
    pub fn zeros(n_velocity: usize, n_pressure: usize, solid_coords: Vec<[f64; 2]>) -> Self {
        Self {
            velocity: vec![[0.0; 2]; n_velocity],
            pressure: vec![0.0; n_pressure],
            solid_velocity: vec![[0.0; 2]; solid_coords.len()],
            solid_coords,
            time: 0.0,
            step: 0,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))
    }
}
