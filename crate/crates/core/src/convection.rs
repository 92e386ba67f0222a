//! Pure convection substep `∂u/∂t + u·∇u = 0` on the fluid mesh.

use serde::{Deserialize, Serialize};

use crate::basis::{gauss_rule, q2_ref_grads, q2_values, Family};
use crate::dense::DenseMatrix;
use crate::dofs::{Assembler, DofMap};
use crate::error::{Error, Result};
use crate::hanging::{modify_square, modify_vector, BlockLayout};
use crate::mesh::{Cell, FluidMesh};
use crate::sparse::{solve, CsrMatrix, Factorization};

/// Gauss points per direction for convection integrals; the integrands
/// are products of up to four Q2 factors.
pub const CONVECTION_QUADRATURE: usize = 4;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvectionMethod {
    #[default]
    LeastSquares,
    TaylorGalerkin,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvectionConfig {
    pub method: ConvectionMethod,
    /// Relative residual accepted from the linear solve.
    pub tolerance: f64,
    /// Iterative refinement steps allowed after the factorization.
    pub max_iterations: usize,
    /// Keeps the `Δt²/2` term of the Taylor–Galerkin scheme.
    pub second_order: bool,
}

impl Default for ConvectionConfig {
    fn default() -> Self {
        Self { method: ConvectionMethod::LeastSquares, tolerance: 1e-10, max_iterations: 5, second_order: true }
    }
}

impl ConvectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!("convection tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ConvectionResult {
    pub velocity: Vec<[f64; 2]>,
    pub relative_residual: f64,
    pub max_cfl: f64,
}

/// Values and physical gradients of the Q2 basis and of `u` at a
/// quadrature point.
struct PointData {
    phi: [f64; 9],
    grad: [[f64; 2]; 9],
    u: [f64; 2],
    /// `du[i][k] = ∂u_i/∂x_k`
    du: [[f64; 2]; 2],
    weight: f64,
}

fn point_data(cell: &Cell, velocity: &[[f64; 2]]) -> Vec<PointData> {
    let rule = gauss_rule::<f64>(Family::Q2, CONVECTION_QUADRATURE).expect("supported rule");
    let h = cell.size();
    let (sx, sy) = (2.0 / h[0], 2.0 / h[1]);
    let jac = 0.25 * h[0] * h[1];
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(p, w)| {
            let phi = q2_values(p.xi, p.eta);
            let rg = q2_ref_grads(p.xi, p.eta);
            let mut grad = [[0.0; 2]; 9];
            let mut u = [0.0; 2];
            let mut du = [[0.0; 2]; 2];
            for a in 0..9 {
                grad[a] = [rg[a][0] * sx, rg[a][1] * sy];
                let ua = velocity[cell.nodes[a]];
                for i in 0..2 {
                    u[i] += phi[a] * ua[i];
                    for k in 0..2 {
                        du[i][k] += grad[a][k] * ua[i];
                    }
                }
            }
            PointData { phi, grad, u, du, weight: w * jac }
        })
        .collect()
}

/// Largest cell CFL number `|u| Δt / h` over the velocity nodes.
pub fn max_cfl(fm: &FluidMesh, velocity: &[[f64; 2]], dt: f64) -> f64 {
    fm.cells
        .iter()
        .map(|c| {
            let h = c.size()[0].min(c.size()[1]);
            c.nodes.iter().map(|&n| velocity[n][0].hypot(velocity[n][1])).fold(0.0, f64::max) * dt / h
        })
        .fold(0.0, f64::max)
}

/// Implicit least-squares convection: `(L u*, L w) = (uⁿ + Δt uⁿ·∇uⁿ, L w)`
/// with `L w = w + Δt (w·∇uⁿ + uⁿ·∇w)`.
pub fn convect_least_squares(
    fm: &FluidMesh,
    velocity: &[[f64; 2]],
    dt: f64,
    cfg: &ConvectionConfig,
) -> Result<ConvectionResult> {
    convect(fm, velocity, dt, cfg, |pd, ke, fe| {
        for q in pd {
            // L(φ_a e_c)_i
            let mut l = [[0.0; 2]; 18];
            for a in 0..9 {
                let adv = q.phi[a] + dt * (q.u[0] * q.grad[a][0] + q.u[1] * q.grad[a][1]);
                for c in 0..2 {
                    for i in 0..2 {
                        l[c * 9 + a][i] = if i == c { adv } else { 0.0 } + dt * q.phi[a] * q.du[i][c];
                    }
                }
            }
            let mut g = [0.0; 2];
            for i in 0..2 {
                g[i] = q.u[i] + dt * (q.u[0] * q.du[i][0] + q.u[1] * q.du[i][1]);
            }
            for r in 0..18 {
                fe[r] += q.weight * (g[0] * l[r][0] + g[1] * l[r][1]);
                for s in 0..18 {
                    ke[(r, s)] += q.weight * (l[r][0] * l[s][0] + l[r][1] * l[s][1]);
                }
            }
        }
    })
}

/// Explicit Taylor–Galerkin convection:
/// `(u*, v) = (uⁿ − Δt uⁿ·∇uⁿ, v) − Δt²/2 (uⁿ·∇uⁿ, uⁿ·∇v)`.
pub fn convect_taylor_galerkin(
    fm: &FluidMesh,
    velocity: &[[f64; 2]],
    dt: f64,
    cfg: &ConvectionConfig,
) -> Result<ConvectionResult> {
    let cfl = max_cfl(fm, velocity, dt);
    if cfl > 1.0 {
        log::warn!("Taylor-Galerkin convection with cell CFL {cfl:.3} > 1 may be unstable");
    }
    let second = if cfg.second_order { 0.5 * dt * dt } else { 0.0 };
    convect(fm, velocity, dt, cfg, |pd, ke, fe| {
        for q in pd {
            let adv_u = [q.u[0] * q.du[0][0] + q.u[1] * q.du[0][1], q.u[0] * q.du[1][0] + q.u[1] * q.du[1][1]];
            for a in 0..9 {
                let adv_phi = q.u[0] * q.grad[a][0] + q.u[1] * q.grad[a][1];
                for i in 0..2 {
                    fe[i * 9 + a] +=
                        q.weight * ((q.u[i] - dt * adv_u[i]) * q.phi[a] - second * adv_u[i] * adv_phi);
                }
                for b in 0..9 {
                    let m = q.weight * q.phi[a] * q.phi[b];
                    ke[(a, b)] += m;
                    ke[(9 + a, 9 + b)] += m;
                }
            }
        }
    })
}

fn convect(
    fm: &FluidMesh,
    velocity: &[[f64; 2]],
    dt: f64,
    cfg: &ConvectionConfig,
    element: impl Fn(&[PointData], &mut DenseMatrix<f64>, &mut [f64]),
) -> Result<ConvectionResult> {
    cfg.validate()?;
    if velocity.len() != fm.num_velocity_nodes() {
        return Err(Error::Dimension {
            what: "velocity field".into(),
            expected: fm.num_velocity_nodes(),
            got: velocity.len(),
        });
    }
    let dofs = DofMap::velocity_only(fm, velocity);
    let mut asm = Assembler::new(dofs.len());
    for cell in &fm.cells {
        let pd = point_data(cell, velocity);
        let mut ke = DenseMatrix::zeros(18, 18);
        let mut fe = vec![0.0; 18];
        element(&pd, &mut ke, &mut fe);
        modify_square(&mut ke, &cell.constraints, &BlockLayout::VELOCITY);
        modify_vector(&mut fe, &cell.constraints, &BlockLayout::VELOCITY);
        asm.add(&dofs.cell_dofs(cell, false), Some(&ke), Some(&fe));
    }
    let a = CsrMatrix::from_triplets(asm.matrix);
    let info = solve(&a, &asm.rhs, Factorization::Cholesky, cfg.tolerance, cfg.max_iterations)
        .map_err(|e| Error::Solver(format!("convection solve failed: {e}")))?;
    if info.relative_residual > cfg.tolerance.max(1e-8) {
        return Err(Error::Solver(format!(
            "convection solve stalled at relative residual {:e}",
            info.relative_residual
        )));
    }
    let (v, _) = dofs.expand(fm, &info.solution);
    Ok(ConvectionResult { velocity: v, relative_residual: info.relative_residual, max_cfl: max_cfl(fm, velocity, dt) })
}

/// Dispatches on `cfg.method`.
pub fn convect_step(fm: &FluidMesh, velocity: &[[f64; 2]], dt: f64, cfg: &ConvectionConfig) -> Result<ConvectionResult> {
    match cfg.method {
        ConvectionMethod::LeastSquares => convect_least_squares(fm, velocity, dt, cfg),
        ConvectionMethod::TaylorGalerkin => convect_taylor_galerkin(fm, velocity, dt, cfg),
    }
}
