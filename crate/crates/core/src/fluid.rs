//! Fluid element operators on axis-aligned Q2Q1 cells and their global
//! assembly.

use std::collections::HashMap;

use crate::basis::{gauss_legendre_1d, gauss_rule, q1_values, q2_ref_grads, q2_values, Family, Q2_EDGES};
use crate::dense::DenseMatrix;
use crate::dofs::{scatter_vector, Assembler, DofMap};
use crate::error::{Error, Result};
use crate::hanging::{modify_element_matrix, modify_vector, BlockLayout};
use crate::mesh::FluidMesh;
use crate::sparse::CsrMatrix;
use crate::types::TractionSpec;

/// Gauss points per direction for fluid cell integrals.
pub const FLUID_QUADRATURE: usize = 3;

/// Scalar integrals of one rectangular cell of size `h`, local Q2/Q1
/// ordering. `sxy[k][m] = (dφ_k/dx, dφ_m/dy)` and
/// `bx[k][j] = (ψ_j, dφ_k/dx)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceOps {
    pub size: [f64; 2],
    pub mass: [[f64; 9]; 9],
    pub sxx: [[f64; 9]; 9],
    pub syy: [[f64; 9]; 9],
    pub sxy: [[f64; 9]; 9],
    pub bx: [[f64; 4]; 9],
    pub by: [[f64; 4]; 9],
    pub load: [f64; 9],
}

impl ReferenceOps {
    pub fn new(size: [f64; 2]) -> Self {
        let rule = gauss_rule::<f64>(Family::Q2, FLUID_QUADRATURE).expect("supported rule");
        let jac = 0.25 * size[0] * size[1];
        let sx = 2.0 / size[0];
        let sy = 2.0 / size[1];
        let mut ops = Self {
            size,
            mass: [[0.0; 9]; 9],
            sxx: [[0.0; 9]; 9],
            syy: [[0.0; 9]; 9],
            sxy: [[0.0; 9]; 9],
            bx: [[0.0; 4]; 9],
            by: [[0.0; 4]; 9],
            load: [0.0; 9],
        };
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let phi = q2_values(p.xi, p.eta);
            let dphi = q2_ref_grads(p.xi, p.eta);
            let psi = q1_values(p.xi, p.eta);
            let wj = w * jac;
            for k in 0..9 {
                let gk = [dphi[k][0] * sx, dphi[k][1] * sy];
                ops.load[k] += wj * phi[k];
                for m in 0..9 {
                    let gm = [dphi[m][0] * sx, dphi[m][1] * sy];
                    ops.mass[k][m] += wj * phi[k] * phi[m];
                    ops.sxx[k][m] += wj * gk[0] * gm[0];
                    ops.syy[k][m] += wj * gk[1] * gm[1];
                    ops.sxy[k][m] += wj * gk[0] * gm[1];
                }
                for j in 0..4 {
                    ops.bx[k][j] += wj * psi[j] * gk[0];
                    ops.by[k][j] += wj * psi[j] * gk[1];
                }
            }
        }
        ops
    }
}

/// Per-cell blocks `M_e` (18x18), `K_e` (18x18), `B_e` (18x4), `f_e` (18),
/// velocity ordered `(u1 nodes, u2 nodes)`.
#[derive(Clone, Debug, PartialEq)]
pub struct FluidElementOps {
    pub m: DenseMatrix<f64>,
    pub k: DenseMatrix<f64>,
    pub b: DenseMatrix<f64>,
    pub f: Vec<f64>,
}

impl FluidElementOps {
    /// `B_e` carries `-(ψ, div φ)` so that the pressure unknown is the
    /// physical pressure in `[A B; Bᵀ 0]`.
    pub fn new(r: &ReferenceOps, density: f64, viscosity: f64, gravity: [f64; 2]) -> Self {
        let mut m = DenseMatrix::zeros(18, 18);
        let mut k = DenseMatrix::zeros(18, 18);
        let mut b = DenseMatrix::zeros(18, 4);
        let mut f = vec![0.0; 18];
        for a in 0..9 {
            f[a] = density * gravity[0] * r.load[a];
            f[9 + a] = density * gravity[1] * r.load[a];
            for c in 0..9 {
                m[(a, c)] = density * r.mass[a][c];
                m[(9 + a, 9 + c)] = density * r.mass[a][c];
                k[(a, c)] = viscosity * (2.0 * r.sxx[a][c] + r.syy[a][c]);
                k[(9 + a, 9 + c)] = viscosity * (r.sxx[a][c] + 2.0 * r.syy[a][c]);
                // test u1 / trial u2: (dφ_a/dy, dφ_c/dx)
                k[(a, 9 + c)] = viscosity * r.sxy[c][a];
                k[(9 + a, c)] = viscosity * r.sxy[a][c];
            }
            for j in 0..4 {
                b[(a, j)] = -r.bx[a][j];
                b[(9 + a, j)] = -r.by[a][j];
            }
        }
        Self { m, k, b, f }
    }

    /// 22x22 element matrix `[M/dt + K, B; Bᵀ, 0]`.
    pub fn saddle(&self, dt: f64) -> DenseMatrix<f64> {
        let mut e = DenseMatrix::zeros(22, 22);
        for i in 0..18 {
            for j in 0..18 {
                e[(i, j)] = self.m[(i, j)] / dt + self.k[(i, j)];
            }
            for j in 0..4 {
                e[(i, 18 + j)] = self.b[(i, j)];
                e[(18 + j, i)] = self.b[(i, j)];
            }
        }
        e
    }
}

/// Element operators memoized by cell size.
#[derive(Debug, Default)]
pub struct OpsCache {
    map: HashMap<(u64, u64), ReferenceOps>,
}

impl OpsCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, size: [f64; 2]) -> &ReferenceOps {
        self.map.entry((size[0].to_bits(), size[1].to_bits())).or_insert_with(|| ReferenceOps::new(size))
    }
}

/// Local load of a constant traction on edge `edge` of a cell of size
/// `size`, in the 18-entry velocity layout.
pub fn edge_traction(size: [f64; 2], edge: usize, traction: [f64; 2]) -> [f64; 18] {
    let len = if edge % 2 == 0 { size[0] } else { size[1] };
    let (pts, wts) = gauss_legendre_1d::<f64>(3).expect("3-point rule");
    let mut out = [0.0; 18];
    let [s, m, e] = Q2_EDGES[edge];
    for (t, w) in pts.iter().zip(&wts) {
        // 1D quadratic shape functions along the edge from s to e
        let n = [0.5 * t * (t - 1.0), 1.0 - t * t, 0.5 * t * (t + 1.0)];
        for (loc, v) in [s, m, e].iter().zip(n) {
            for c in 0..2 {
                out[c * 9 + loc] += 0.5 * len * w * v * traction[c];
            }
        }
    }
    out
}

/// Global fluid operators on a DOF numbering. `m`, `k` and `b` are square
/// over all unknowns; `b` only fills velocity rows and pressure columns.
#[derive(Clone, Debug)]
pub struct FluidOperators {
    pub m: CsrMatrix,
    pub k: CsrMatrix,
    pub b: CsrMatrix,
    pub f: Vec<f64>,
}

/// Assembles `M`, `K`, `B` and `f` with hanging-node modification; fixed
/// DOFs are eliminated (their lifting is discarded).
pub fn assemble_fluid(
    fm: &FluidMesh,
    dofs: &DofMap,
    density: f64,
    viscosity: f64,
    gravity: [f64; 2],
    cache: &mut OpsCache,
) -> Result<FluidOperators> {
    let n = dofs.len();
    let mut am = Assembler::new(n);
    let mut ak = Assembler::new(n);
    let mut ab = Assembler::new(n);
    let mut f = vec![0.0; n];
    for cell in &fm.cells {
        let ops = FluidElementOps::new(cache.get(cell.size()), density, viscosity, gravity);
        let d = dofs.cell_dofs(cell, true);
        let embed = |blk: &DenseMatrix<f64>| {
            let mut e = DenseMatrix::zeros(22, 22);
            e.set_block(0, 0, blk);
            e
        };
        let mut me = embed(&ops.m);
        let mut ke = embed(&ops.k);
        let mut be = DenseMatrix::zeros(22, 22);
        be.set_block(0, 18, &ops.b);
        let mut fe = ops.f.clone();
        fe.extend([0.0; 4]);
        modify_element_matrix(&mut me, &cell.constraints);
        modify_element_matrix(&mut ke, &cell.constraints);
        modify_element_matrix(&mut be, &cell.constraints);
        modify_vector(&mut fe, &cell.constraints, &BlockLayout::TAYLOR_HOOD);
        am.add(&d, Some(&me), None);
        ak.add(&d, Some(&ke), None);
        ab.add(&d, Some(&be), None);
        scatter_vector(&d, &fe, &mut f);
    }
    Ok(FluidOperators {
        m: CsrMatrix::from_triplets(am.matrix),
        k: CsrMatrix::from_triplets(ak.matrix),
        b: CsrMatrix::from_triplets(ab.matrix),
        f,
    })
}

/// Adds the boundary integrals of the traction data to `f`.
pub fn apply_neumann(fm: &FluidMesh, dofs: &DofMap, tractions: &[TractionSpec], f: &mut [f64]) -> Result<()> {
    if tractions.is_empty() {
        return Ok(());
    }
    for t in tractions {
        let fully_fixed = (0..2).all(|c| fm.boundary.dirichlet.iter().any(|d| d.side == t.side && d.component == c));
        if fully_fixed {
            return Err(Error::Config(format!("traction given on side {:?}, which has Dirichlet data", t.side)));
        }
    }
    for be in fm.boundary_edges() {
        for t in tractions.iter().filter(|t| t.side == be.side) {
            let cell = &fm.cells[be.cell];
            let mut fe = edge_traction(cell.size(), be.edge, t.value).to_vec();
            fe.extend([0.0; 4]);
            modify_vector(&mut fe, &cell.constraints, &BlockLayout::TAYLOR_HOOD);
            scatter_vector(&dofs.cell_dofs(cell, true), &fe, f);
        }
    }
    Ok(())
}
