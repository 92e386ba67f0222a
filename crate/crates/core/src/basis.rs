//! Shape functions, Gauss rules and isoparametric maps.
//!
//! Local node orderings:
//!
//! ```text
//!  Q2 / Q1 quadrilateral          P1 triangle
//!
//!   3 ---- 6 ---- 2                 2
//!   |             |                 | \
//!   7      8      5                 |   \
//!   |             |                 0 --- 1
//!   0 ---- 4 ---- 1
//! ```
//!
//! Q1 uses the four corners 0..3. Reference quadrilateral is `[-1, 1]^2`,
//! reference triangle has vertices `(0,0)`, `(1,0)`, `(0,1)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Float;

/// Tolerance for accepting points on the boundary of a reference element.
pub const REFERENCE_TOLERANCE: f64 = 1e-10;

/// Maximum Newton iterations for [`inverse_map`].
pub const INVERSE_MAP_MAX_ITER: usize = 25;

/// Reference coordinates of the Q2 nodes in local order.
pub const Q2_NODES: [[i8; 2]; 9] =
    [[-1, -1], [1, -1], [1, 1], [-1, 1], [0, -1], [1, 0], [0, 1], [-1, 0], [0, 0]];

/// Local Q2 nodes on each edge as (start corner, mid node, end corner),
/// edges ordered bottom, right, top, left and traversed counter-clockwise.
pub const Q2_EDGES: [[usize; 3]; 4] = [[0, 4, 1], [1, 5, 2], [2, 6, 3], [3, 7, 0]];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Q2,
    Q1,
    P1,
}

impl Family {
    pub fn num_nodes(self) -> usize {
        match self {
            Family::Q2 => 9,
            Family::Q1 => 4,
            Family::P1 => 3,
        }
    }

    fn is_quad(self) -> bool {
        !matches!(self, Family::P1)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("reference point ({xi}, {eta}) lies outside the {family:?} reference element")]
    OutsideReference { family: Family, xi: f64, eta: f64 },
    #[error("non-positive Jacobian determinant {det} (inverted cell)")]
    NonPositiveJacobian { det: f64 },
    #[error("inverse map did not converge for point ({x}, {y}); residual {residual}")]
    InverseMapDiverged { x: f64, y: f64, residual: f64 },
    #[error("unsupported quadrature: {family:?} with order {order}")]
    UnsupportedRule { family: Family, order: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint<T> {
    pub xi: T,
    pub eta: T,
}

impl<T: Float> ReferencePoint<T> {
    pub fn new(xi: T, eta: T) -> Self {
        Self { xi, eta }
    }

    /// True when the point is inside the reference element of `family`
    /// within `tol`.
    pub fn is_inside(&self, family: Family, tol: T) -> bool {
        let one = T::one();
        if family.is_quad() {
            self.xi >= -one - tol && self.xi <= one + tol && self.eta >= -one - tol && self.eta <= one + tol
        } else {
            self.xi >= -tol && self.eta >= -tol && self.xi + self.eta <= one + tol
        }
    }
}

/// Values and reference gradients of all local basis functions at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisEval<T> {
    pub values: Vec<T>,
    pub d_xi: Vec<T>,
    pub d_eta: Vec<T>,
}

impl<T: Float> BasisEval<T> {
    /// Physical gradients given the inverse Jacobian `dξ/dx`.
    pub fn physical_gradients(&self, jac_inv: &[[T; 2]; 2]) -> Vec<[T; 2]> {
        self.d_xi
            .iter()
            .zip(&self.d_eta)
            .map(|(&a, &b)| {
                [a * jac_inv[0][0] + b * jac_inv[1][0], a * jac_inv[0][1] + b * jac_inv[1][1]]
            })
            .collect()
    }
}

// 1D quadratic Lagrange basis on nodes -1, 0, 1.
#[inline]
fn lagrange2<T: Float>(s: T) -> ([T; 3], [T; 3]) {
    let half = T::lit(0.5);
    let one = T::one();
    let two = T::lit(2.0);
    (
        [half * s * (s - one), one - s * s, half * s * (s + one)],
        [s - half, -two * s, s + half],
    )
}

#[inline]
fn slot(c: i8) -> usize {
    (c + 1) as usize
}

/// Q2 values at `(xi, eta)` in local order.
#[inline]
pub fn q2_values<T: Float>(xi: T, eta: T) -> [T; 9] {
    let (lx, _) = lagrange2(xi);
    let (ly, _) = lagrange2(eta);
    let mut out = [T::zero(); 9];
    for (k, n) in Q2_NODES.iter().enumerate() {
        out[k] = lx[slot(n[0])] * ly[slot(n[1])];
    }
    out
}

/// Q2 reference gradients `[d/dxi, d/deta]` at `(xi, eta)`.
#[inline]
pub fn q2_ref_grads<T: Float>(xi: T, eta: T) -> [[T; 2]; 9] {
    let (lx, dx) = lagrange2(xi);
    let (ly, dy) = lagrange2(eta);
    let mut out = [[T::zero(); 2]; 9];
    for (k, n) in Q2_NODES.iter().enumerate() {
        let (a, b) = (slot(n[0]), slot(n[1]));
        out[k] = [dx[a] * ly[b], lx[a] * dy[b]];
    }
    out
}

/// Q1 values at `(xi, eta)`.
#[inline]
pub fn q1_values<T: Float>(xi: T, eta: T) -> [T; 4] {
    let q = T::lit(0.25);
    let one = T::one();
    [
        q * (one - xi) * (one - eta),
        q * (one + xi) * (one - eta),
        q * (one + xi) * (one + eta),
        q * (one - xi) * (one + eta),
    ]
}

#[inline]
pub fn q1_ref_grads<T: Float>(xi: T, eta: T) -> [[T; 2]; 4] {
    let q = T::lit(0.25);
    let one = T::one();
    [
        [-q * (one - eta), -q * (one - xi)],
        [q * (one - eta), -q * (one + xi)],
        [q * (one + eta), q * (one + xi)],
        [-q * (one + eta), q * (one - xi)],
    ]
}

#[inline]
pub fn p1_values<T: Float>(xi: T, eta: T) -> [T; 3] {
    [T::one() - xi - eta, xi, eta]
}

#[inline]
pub fn p1_ref_grads<T: Float>() -> [[T; 2]; 3] {
    let one = T::one();
    let zero = T::zero();
    [[-one, -one], [one, zero], [zero, one]]
}

/// Evaluates every local basis function of `family` at `pt`.
pub fn eval_basis<T: Float>(family: Family, pt: ReferencePoint<T>) -> Result<BasisEval<T>, BasisError> {
    if !pt.is_inside(family, T::lit(REFERENCE_TOLERANCE)) {
        return Err(BasisError::OutsideReference {
            family,
            xi: pt.xi.to_f64().unwrap_or(f64::NAN),
            eta: pt.eta.to_f64().unwrap_or(f64::NAN),
        });
    }
    let (values, grads): (Vec<T>, Vec<[T; 2]>) = match family {
        Family::Q2 => (q2_values(pt.xi, pt.eta).to_vec(), q2_ref_grads(pt.xi, pt.eta).to_vec()),
        Family::Q1 => (q1_values(pt.xi, pt.eta).to_vec(), q1_ref_grads(pt.xi, pt.eta).to_vec()),
        Family::P1 => (p1_values(pt.xi, pt.eta).to_vec(), p1_ref_grads::<T>().to_vec()),
    };
    Ok(BasisEval {
        values,
        d_xi: grads.iter().map(|g| g[0]).collect(),
        d_eta: grads.iter().map(|g| g[1]).collect(),
    })
}

/// Straight-sided cell geometry. Quadrilaterals use the bilinear map
/// through their corners; triangles the affine map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CellGeometry<T> {
    Quad([[T; 2]; 4]),
    Triangle([[T; 2]; 3]),
}

impl<T: Float> CellGeometry<T> {
    pub fn family(&self) -> Family {
        match self {
            CellGeometry::Quad(_) => Family::Q1,
            CellGeometry::Triangle(_) => Family::P1,
        }
    }

    /// Longest vertex-to-vertex distance.
    pub fn diameter(&self) -> T {
        let pts: &[[T; 2]] = match self {
            CellGeometry::Quad(c) => c,
            CellGeometry::Triangle(c) => c,
        };
        let mut d = T::zero();
        for a in pts {
            for b in pts {
                let dx = a[0] - b[0];
                let dy = a[1] - b[1];
                d = d.max((dx * dx + dy * dy).sqrt());
            }
        }
        d
    }
}

/// Physical image of a reference point with the map's Jacobian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MappedPoint<T> {
    pub x: [T; 2],
    /// `jacobian[i][j] = d x_i / d ξ_j`
    pub jacobian: [[T; 2]; 2],
    pub det: T,
}

impl<T: Float> MappedPoint<T> {
    pub fn inverse_jacobian(&self) -> [[T; 2]; 2] {
        let j = &self.jacobian;
        let inv = T::one() / self.det;
        [[j[1][1] * inv, -j[0][1] * inv], [-j[1][0] * inv, j[0][0] * inv]]
    }
}

fn map_unchecked<T: Float>(geom: &CellGeometry<T>, pt: ReferencePoint<T>) -> MappedPoint<T> {
    let mut x = [T::zero(); 2];
    let mut jac = [[T::zero(); 2]; 2];
    match geom {
        CellGeometry::Quad(c) => {
            let v = q1_values(pt.xi, pt.eta);
            let g = q1_ref_grads(pt.xi, pt.eta);
            for k in 0..4 {
                for i in 0..2 {
                    x[i] += v[k] * c[k][i];
                    jac[i][0] += g[k][0] * c[k][i];
                    jac[i][1] += g[k][1] * c[k][i];
                }
            }
        }
        CellGeometry::Triangle(c) => {
            let v = p1_values(pt.xi, pt.eta);
            let g = p1_ref_grads::<T>();
            for k in 0..3 {
                for i in 0..2 {
                    x[i] += v[k] * c[k][i];
                    jac[i][0] += g[k][0] * c[k][i];
                    jac[i][1] += g[k][1] * c[k][i];
                }
            }
        }
    }
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    MappedPoint { x, jacobian: jac, det }
}

/// Maps a reference point to physical space.
pub fn map_to_physical<T: Float>(
    geom: &CellGeometry<T>,
    pt: ReferencePoint<T>,
) -> Result<MappedPoint<T>, BasisError> {
    let m = map_unchecked(geom, pt);
    if !(m.det > T::zero()) {
        return Err(BasisError::NonPositiveJacobian { det: m.det.to_f64().unwrap_or(f64::NAN) });
    }
    Ok(m)
}

/// Finds the reference coordinates of a physical point by damped Newton
/// iteration from the reference centroid.
pub fn inverse_map<T: Float>(geom: &CellGeometry<T>, x: [T; 2]) -> Result<ReferencePoint<T>, BasisError> {
    let scale = geom.diameter();
    let tol = T::lit(1e-12) * scale.max(T::min_positive_value());
    let mut pt = match geom {
        CellGeometry::Quad(_) => ReferencePoint::new(T::zero(), T::zero()),
        CellGeometry::Triangle(_) => ReferencePoint::new(T::lit(1.0 / 3.0), T::lit(1.0 / 3.0)),
    };
    let mut residual = T::infinity();
    for _ in 0..INVERSE_MAP_MAX_ITER {
        let m = map_to_physical(geom, pt)?;
        let r = [x[0] - m.x[0], x[1] - m.x[1]];
        residual = (r[0] * r[0] + r[1] * r[1]).sqrt();
        if residual <= tol {
            return Ok(pt);
        }
        let inv = m.inverse_jacobian();
        let mut d = [inv[0][0] * r[0] + inv[0][1] * r[1], inv[1][0] * r[0] + inv[1][1] * r[1]];
        // damp steps that would leave a generous neighbourhood of the element
        let step = d[0].abs().max(d[1].abs());
        let cap = T::lit(2.0);
        if step > cap {
            d = [d[0] * cap / step, d[1] * cap / step];
        }
        pt = ReferencePoint::new(pt.xi + d[0], pt.eta + d[1]);
    }
    // affine maps reach the fixed point in one step; allow a final check
    let m = map_to_physical(geom, pt)?;
    let r = [x[0] - m.x[0], x[1] - m.x[1]];
    let final_res = (r[0] * r[0] + r[1] * r[1]).sqrt();
    if final_res <= tol {
        return Ok(pt);
    }
    residual = residual.min(final_res);
    Err(BasisError::InverseMapDiverged {
        x: x[0].to_f64().unwrap_or(f64::NAN),
        y: x[1].to_f64().unwrap_or(f64::NAN),
        residual: residual.to_f64().unwrap_or(f64::NAN),
    })
}

/// Quadrature points and weights on a reference element.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<T> {
    pub points: Vec<ReferencePoint<T>>,
    pub weights: Vec<T>,
}

impl<T: Float> QuadratureRule<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre points and weights on `[-1, 1]` for `n = 1..=5`.
pub fn gauss_legendre_1d<T: Float>(n: usize) -> Option<(Vec<T>, Vec<T>)> {
    let (p, w): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (3.0f64 / 5.0).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        4 => {
            let s = (6.0f64 / 5.0).sqrt() * 2.0;
            let a = ((3.0 - s) / 7.0).sqrt();
            let b = ((3.0 + s) / 7.0).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (vec![-b, -a, a, b], vec![wb, wa, wa, wb])
        }
        5 => {
            let s = 2.0 * (10.0f64 / 7.0).sqrt();
            let a = (5.0 - s).sqrt() / 3.0;
            let b = (5.0 + s).sqrt() / 3.0;
            let w0 = 128.0 / 225.0;
            let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
            (vec![-b, -a, 0.0, a, b], vec![wb, wa, w0, wa, wb])
        }
        _ => return None,
    };
    Some((p.into_iter().map(T::lit).collect(), w.into_iter().map(T::lit).collect()))
}

/// Quadrature rule on the reference element of `family`.
///
/// For quadrilaterals `order` is the number of Gauss points per direction
/// (1 to 5). For triangles it is the number of points (1 or 3).
pub fn gauss_rule<T: Float>(family: Family, order: usize) -> Result<QuadratureRule<T>, BasisError> {
    match family {
        Family::Q1 | Family::Q2 => {
            let (p, w) = gauss_legendre_1d::<T>(order).ok_or(BasisError::UnsupportedRule { family, order })?;
            let mut points = Vec::with_capacity(order * order);
            let mut weights = Vec::with_capacity(order * order);
            for j in 0..order {
                for i in 0..order {
                    points.push(ReferencePoint::new(p[i], p[j]));
                    weights.push(w[i] * w[j]);
                }
            }
            Ok(QuadratureRule { points, weights })
        }
        Family::P1 => match order {
            1 => Ok(QuadratureRule {
                points: vec![ReferencePoint::new(T::lit(1.0 / 3.0), T::lit(1.0 / 3.0))],
                weights: vec![T::lit(0.5)],
            }),
            3 => {
                let a = T::lit(1.0 / 6.0);
                let b = T::lit(2.0 / 3.0);
                Ok(QuadratureRule {
                    points: vec![ReferencePoint::new(a, a), ReferencePoint::new(b, a), ReferencePoint::new(a, b)],
                    weights: vec![a, a, a],
                })
            }
            _ => Err(BasisError::UnsupportedRule { family, order }),
        },
    }
}
