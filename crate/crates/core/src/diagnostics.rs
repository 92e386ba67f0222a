//! State consistency checks against the meshes.

use std::fmt;

use crate::error::{Error, Result};
use crate::hanging::FieldKind;
use crate::mesh::FluidMesh;
use crate::solid::SolidMesh;
use crate::types::SystemState;

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    NonFinite { what: String, index: usize },
    Dirichlet { node: usize, component: usize, expected: f64, got: f64 },
    FixedPressure { node: usize, got: f64 },
    VelocityHanging { node: usize, component: usize, expected: f64, got: f64 },
    PressureHanging { node: usize, expected: f64, got: f64 },
    SolidCoordinates { node: usize },
    InvertedTriangle { triangle: usize, area: f64 },
    AsymmetricStress { triangle: usize, gap: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { what, index } => write!(f, "non-finite {what} at {index}"),
            Violation::Dirichlet { node, component, expected, got } => {
                write!(f, "velocity node {node} component {component} holds {got}, boundary data is {expected}")
            }
            Violation::FixedPressure { node, got } => write!(f, "fixed pressure node {node} holds {got}"),
            Violation::VelocityHanging { node, component, expected, got } => {
                write!(f, "hanging velocity node {node} component {component} holds {got}, constraint gives {expected}")
            }
            Violation::PressureHanging { node, expected, got } => {
                write!(f, "hanging pressure node {node} holds {got}, constraint gives {expected}")
            }
            Violation::SolidCoordinates { node } => write!(f, "solid node {node} differs from the mesh coordinates"),
            Violation::InvertedTriangle { triangle, area } => write!(f, "triangle {triangle} has area {area}"),
            Violation::AsymmetricStress { triangle, gap } => write!(f, "stress of triangle {triangle} asymmetric by {gap}"),
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-10 * (1.0 + a.abs().max(b.abs()))
}

/// Lists the invariants `state` violates. Never mutates.
pub fn validate_state(state: &SystemState, fm: &FluidMesh, sm: &SolidMesh) -> Result<Vec<Violation>> {
    let dims = [
        ("velocity", fm.num_velocity_nodes(), state.velocity.len()),
        ("pressure", fm.num_pressure_nodes(), state.pressure.len()),
        ("solid velocity", sm.num_nodes(), state.solid_velocity.len()),
        ("solid coordinates", sm.num_nodes(), state.solid_coords.len()),
    ];
    for (what, expected, got) in dims {
        if expected != got {
            return Err(Error::Dimension { what: what.into(), expected, got });
        }
    }
    let mut out = Vec::new();
    for (i, u) in state.velocity.iter().enumerate() {
        if !u[0].is_finite() || !u[1].is_finite() {
            out.push(Violation::NonFinite { what: "velocity".into(), index: i });
        }
    }
    for (i, p) in state.pressure.iter().enumerate() {
        if !p.is_finite() {
            out.push(Violation::NonFinite { what: "pressure".into(), index: i });
        }
    }
    if !out.is_empty() {
        return Ok(out);
    }
    for n in 0..fm.num_velocity_nodes() {
        for c in 0..2 {
            if let Some(g) = fm.dirichlet_value(n, c, state.time) {
                let got = state.velocity[n][c];
                if !close(g, got) {
                    out.push(Violation::Dirichlet { node: n, component: c, expected: g, got });
                }
            }
        }
    }
    for (n, &p) in state.pressure.iter().enumerate() {
        if (fm.pres_fixed[n] || fm.pinned == Some(n)) && p != 0.0 {
            out.push(Violation::FixedPressure { node: n, got: p });
        }
    }
    for h in &fm.constraints {
        match h.kind {
            FieldKind::Velocity => {
                for c in 0..2 {
                    let expected = h.evaluate(|m| state.velocity[m][c]);
                    let got = state.velocity[h.slave][c];
                    if !close(expected, got) {
                        out.push(Violation::VelocityHanging { node: h.slave, component: c, expected, got });
                    }
                }
            }
            FieldKind::Pressure => {
                let expected = h.evaluate(|m| state.pressure[m]);
                let got = state.pressure[h.slave];
                if !close(expected, got) {
                    out.push(Violation::PressureHanging { node: h.slave, expected, got });
                }
            }
        }
    }
    for (n, (a, b)) in state.solid_coords.iter().zip(&sm.coords).enumerate() {
        if a != b {
            out.push(Violation::SolidCoordinates { node: n });
        }
    }
    for t in 0..sm.num_triangles() {
        let area = sm.area(t);
        if !(area > 0.0) {
            out.push(Violation::InvertedTriangle { triangle: t, area });
        }
        let gap = (sm.stress[t][0][1] - sm.stress[t][1][0]).abs();
        if gap != 0.0 {
            out.push(Violation::AsymmetricStress { triangle: t, gap });
        }
    }
    Ok(out)
}
