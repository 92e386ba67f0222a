//! Unified finite element solver for 2D fluid–structure interaction.
//!
//! One velocity and pressure field covers fluid and solid on an adaptive
//! quadtree of Q2Q1 cells; the solid is a P1 updated-Lagrangian mesh whose
//! stiffness enters the fluid system through an interpolation operator.
//!
//! The element kernels (`basis`, `hanging`, `dense`) are generic over the
//! scalar type; assembly and time stepping run in `f64`.

pub mod basis;
pub mod convection;
pub mod coupling;
pub mod dense;
pub mod diagnostics;
pub mod dofs;
pub mod error;
pub mod fluid;
pub mod hanging;
pub mod io;
pub mod mesh;
pub mod scalar;
pub mod scenario;
pub mod solid;
pub mod stepper;
pub mod sparse;
pub mod system;
pub mod types;
pub mod validate;

/// Exact rational scalar for the element kernels.
pub type Rational = num_rational::Rational64;
pub type DenseMatrixF64 = dense::DenseMatrix<f64>;
pub type DenseMatrixF32 = dense::DenseMatrix<f32>;
pub type DenseMatrixRational = dense::DenseMatrix<Rational>;

pub use error::{Error, Result};
pub use scenario::{builtin_scenario, ScenarioConfig};
pub use stepper::Simulation;
pub use types::{PhysicalParams, SystemState};
