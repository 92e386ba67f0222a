//! Interpolation operator from fluid velocity nodes to solid nodes.
//!
//! Column `k` of `R` holds the fluid basis values at solid node `k`,
//! expressed on non-slave nodes: the weight of a hanging slave is passed on
//! to its masters, so `R` acts on free fields only.

use crate::basis::q2_values;
use crate::dense::DenseMatrix;
use crate::dofs::{Assembler, DofMap};
use crate::error::{Error, Result};
use crate::hanging::{modify_vector, BlockLayout};
use crate::mesh::FluidMesh;

/// Host cell and reference coordinates of every solid node.
pub fn locate_solid_nodes(fm: &FluidMesh, coords: &[[f64; 2]]) -> Result<Vec<(usize, [f64; 2])>> {
    coords
        .iter()
        .enumerate()
        .map(|(k, &x)| fm.locate(x).ok_or(Error::OutsideDomain { node: k, x: x[0], y: x[1] }))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMap {
    pub host: Vec<usize>,
    pub reference: Vec<[f64; 2]>,
    /// `(velocity node, weight)` per solid node, sorted by node id.
    pub columns: Vec<Vec<(usize, f64)>>,
    num_fluid_nodes: usize,
}

impl CouplingMap {
    pub fn new(fm: &FluidMesh, coords: &[[f64; 2]]) -> Result<Self> {
        Ok(Self::from_assignment(fm, &locate_solid_nodes(fm, coords)?))
    }

    pub fn from_assignment(fm: &FluidMesh, assignment: &[(usize, [f64; 2])]) -> Self {
        let mut host = Vec::with_capacity(assignment.len());
        let mut reference = Vec::with_capacity(assignment.len());
        let mut columns = Vec::with_capacity(assignment.len());
        for &(c, r) in assignment {
            let cell = &fm.cells[c];
            let mut phi = q2_values(r[0], r[1]);
            modify_vector(&mut phi, &cell.constraints, &BlockLayout::SCALAR_Q2);
            let mut col: Vec<(usize, f64)> = Vec::with_capacity(9);
            for (slot, w) in cell.vslots.iter().zip(phi) {
                if w != 0.0 {
                    col.push((*slot, w));
                }
            }
            col.sort_by_key(|e| e.0);
            col.dedup_by(|b, a| {
                if a.0 == b.0 {
                    a.1 += b.1;
                    true
                } else {
                    false
                }
            });
            host.push(c);
            reference.push(r);
            columns.push(col);
        }
        Self { host, reference, columns, num_fluid_nodes: fm.num_velocity_nodes() }
    }

    pub fn num_solid_nodes(&self) -> usize {
        self.columns.len()
    }

    pub fn num_fluid_nodes(&self) -> usize {
        self.num_fluid_nodes
    }

    /// `ũˢ = D ũ`.
    pub fn interpolate(&self, fluid: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        if fluid.len() != self.num_fluid_nodes {
            return Err(Error::Dimension {
                what: "fluid velocity".into(),
                expected: self.num_fluid_nodes,
                got: fluid.len(),
            });
        }
        Ok(self
            .columns
            .iter()
            .map(|col| {
                col.iter().fold([0.0, 0.0], |acc, &(l, w)| [acc[0] + w * fluid[l][0], acc[1] + w * fluid[l][1]])
            })
            .collect())
    }

    /// `Dᵀ s`, the fluid-node image of solid nodal values.
    pub fn scatter(&self, solid: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        if solid.len() != self.num_solid_nodes() {
            return Err(Error::Dimension {
                what: "solid nodal vector".into(),
                expected: self.num_solid_nodes(),
                got: solid.len(),
            });
        }
        let mut out = vec![[0.0; 2]; self.num_fluid_nodes];
        for (col, s) in self.columns.iter().zip(solid) {
            for &(l, w) in col {
                out[l][0] += w * s[0];
                out[l][1] += w * s[1];
            }
        }
        Ok(out)
    }

    /// Dense `R` with fluid nodes as rows.
    pub fn to_dense(&self) -> DenseMatrix<f64> {
        let mut r = DenseMatrix::zeros(self.num_fluid_nodes, self.num_solid_nodes());
        for (k, col) in self.columns.iter().enumerate() {
            for &(l, w) in col {
                r[(l, k)] += w;
            }
        }
        r
    }

    /// Adds `Dᵀ K_e D` for a solid element matrix on `nodes` (local index
    /// `comp * 3 + node`, rows = test) and `Dᵀ f_e`.
    pub fn add_element(
        &self,
        asm: &mut Assembler,
        dofs: &DofMap,
        nodes: &[usize; 3],
        k: Option<&DenseMatrix<f64>>,
        f: Option<&[f64; 6]>,
    ) {
        for (m, &sm) in nodes.iter().enumerate() {
            for &(l, wl) in &self.columns[sm] {
                for d in 0..2 {
                    let row = dofs.vel[l][d];
                    if let Some(f) = f {
                        asm.add_rhs(row, wl * f[d * 3 + m]);
                    }
                    let Some(k) = k else { continue };
                    for (b, &sb) in nodes.iter().enumerate() {
                        for &(lp, wlp) in &self.columns[sb] {
                            for c in 0..2 {
                                let v = k[(d * 3 + m, c * 3 + b)];
                                if v != 0.0 {
                                    asm.add_entry(row, dofs.vel[lp][c], wl * wlp * v);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::GridSpec;
    use crate::types::BoundaryConditions;

    fn unit_mesh(n: usize) -> FluidMesh {
        let grid = GridSpec { origin: [0.0, 0.0], extent: [1.0, 1.0], root_cells: [n, n], max_level: 2 };
        FluidMesh::uniform(grid, BoundaryConditions::default()).unwrap()
    }

    #[test]
    fn centroid_and_node_hits() {
        let fm = unit_mesh(2);
        let cm = CouplingMap::new(&fm, &[[0.25, 0.25], [0.5, 0.5]]).unwrap();
        assert_eq!(cm.reference[0], [0.0, 0.0]);
        assert_eq!(cm.columns[0].len(), 1);
        assert!((cm.columns[0][0].1 - 1.0).abs() < 1e-15);
        assert_eq!(cm.columns[1].len(), 1);
    }

    #[test]
    fn outside_point_is_reported() {
        let fm = unit_mesh(2);
        match CouplingMap::new(&fm, &[[0.5, 0.5], [1.5, 0.2]]) {
            Err(Error::OutsideDomain { node, .. }) => assert_eq!(node, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scatter_is_transpose_of_interpolate() {
        let fm = unit_mesh(3);
        let pts = [[0.11, 0.83], [0.5, 0.2], [0.9, 0.9], [0.0, 0.4]];
        let cm = CouplingMap::new(&fm, &pts).unwrap();
        let w: Vec<[f64; 2]> = (0..fm.num_velocity_nodes()).map(|i| [(i as f64).sin(), (i as f64).cos()]).collect();
        let s = [[1.0, -2.0], [0.5, 0.25], [3.0, 1.0], [-1.0, 0.0]];
        let dw = cm.interpolate(&w).unwrap();
        let dts = cm.scatter(&s).unwrap();
        let lhs: f64 = dw.iter().zip(&s).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum();
        let rhs: f64 = dts.iter().zip(&w).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum();
        assert!((lhs - rhs).abs() < 1e-13);
    }
}
