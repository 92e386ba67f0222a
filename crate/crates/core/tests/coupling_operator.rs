use proptest::prelude::*;
use ufem::coupling::CouplingMap;
use ufem::dense::DenseMatrix;
use ufem::dofs::{Assembler, Dof, DofMap};
use ufem::mesh::{FluidMesh, GridSpec, RefinementRegion};
use ufem::solid::{element_stiffness, p1_gradients};
use ufem::sparse::CsrMatrix;
use ufem::types::BoundaryConditions;

fn two_cells() -> FluidMesh {
    let grid = GridSpec { origin: [0.0, 0.0], extent: [2.0, 1.0], root_cells: [2, 1], max_level: 0 };
    FluidMesh::uniform(grid, BoundaryConditions::default()).unwrap()
}

fn refined() -> FluidMesh {
    let grid = GridSpec { origin: [0.0, 0.0], extent: [1.0, 1.0], root_cells: [3, 3], max_level: 2 };
    let region = RefinementRegion { min: [0.4, 0.4], max: [0.55, 0.6], level: 2 };
    FluidMesh::with_regions(grid, BoundaryConditions::default(), vec![region]).unwrap()
}

fn free(d: Dof) -> usize {
    match d {
        Dof::Free(i) => i,
        other => panic!("expected a free dof, got {other:?}"),
    }
}

#[test]
fn element_assembly_matches_dense_product() {
    let fm = two_cells();
    let tri = [[0.3, 0.2], [1.7, 0.4], [0.9, 0.85]];
    let cm = CouplingMap::new(&fm, &tri).unwrap();
    let (grads, area) = p1_gradients(tri).unwrap();
    let tau = [[0.4, -0.3], [-0.3, 1.1]];
    let gn = [[0.2, 0.7], [-0.5, 0.1]];
    let ks = element_stiffness(&grads, area, &tau, &gn, 0.01, 250.0);

    let dofs = DofMap::unconstrained(&fm);
    let mut asm = Assembler::new(dofs.len());
    cm.add_element(&mut asm, &dofs, &[0, 1, 2], Some(&ks), None);
    let got = CsrMatrix::from_triplets(asm.matrix);

    // dense D = diag(Rᵀ, Rᵀ) over (component, fluid node) -> (component, solid node)
    let r = cm.to_dense();
    let nf = fm.num_velocity_nodes();
    let d = DenseMatrix::from_fn(6, 2 * nf, |i, j| if i / 3 == j / nf { r[(j % nf, i % 3)] } else { 0.0 });
    let expected = d.transpose().matmul(&ks).matmul(&d);
    let scale = ks.max_abs();
    for a in 0..nf {
        for c in 0..2 {
            for b in 0..nf {
                for e in 0..2 {
                    let want = expected[(c * nf + a, e * nf + b)];
                    let have = got.get(free(dofs.vel[a][c]), free(dofs.vel[b][e]));
                    assert!((want - have).abs() <= 1e-12 * scale, "({a},{c}) x ({b},{e}): {want} vs {have}");
                }
            }
        }
    }
}

#[test]
fn load_vector_is_transpose_applied() {
    let fm = two_cells();
    let tri = [[0.1, 0.1], [1.9, 0.1], [1.0, 0.9]];
    let cm = CouplingMap::new(&fm, &tri).unwrap();
    let f = [1.0, -2.0, 0.5, 3.0, 0.25, -1.0];
    let dofs = DofMap::unconstrained(&fm);
    let mut asm = Assembler::new(dofs.len());
    cm.add_element(&mut asm, &dofs, &[0, 1, 2], None, Some(&f));
    let s: Vec<[f64; 2]> = (0..3).map(|m| [f[m], f[3 + m]]).collect();
    let expected = cm.scatter(&s).unwrap();
    for (n, e) in expected.iter().enumerate() {
        for c in 0..2 {
            assert!((asm.rhs[free(dofs.vel[n][c])] - e[c]).abs() < 1e-13);
        }
    }
}

fn points_strategy() -> impl Strategy<Value = Vec<[f64; 2]>> {
    proptest::collection::vec((0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(x, y)| [x, y]), 1..40)
}

proptest! {
    #[test]
    fn columns_sum_to_one(points in points_strategy()) {
        for fm in [two_cells(), refined()] {
            let pts: Vec<[f64; 2]> = points.iter().map(|p| [p[0] * fm.grid.extent[0], p[1]]).collect();
            let cm = CouplingMap::new(&fm, &pts).unwrap();
            for col in &cm.columns {
                let s: f64 = col.iter().map(|(_, w)| w).sum();
                prop_assert!((s - 1.0).abs() < 1e-13, "column sum {}", s);
            }
        }
    }

    #[test]
    fn linear_fields_pass_through_exactly(
        points in points_strategy(),
        a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64,
    ) {
        let fm = refined();
        let cm = CouplingMap::new(&fm, &points).unwrap();
        let lin = |x: [f64; 2]| a + b * x[0] + c * x[1];
        let u: Vec<[f64; 2]> = fm.vnodes.iter().map(|&x| [lin(x), x[0] * x[1]]).collect();
        let us = cm.interpolate(&u).unwrap();
        for (p, v) in points.iter().zip(&us) {
            prop_assert!((v[0] - lin(*p)).abs() < 1e-12);
            // bilinear lies in the Q2 space as well
            prop_assert!((v[1] - p[0] * p[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn scatter_is_adjoint_of_interpolate(
        points in points_strategy(),
        seed in 0.0..10.0f64,
    ) {
        let fm = refined();
        let cm = CouplingMap::new(&fm, &points).unwrap();
        let w: Vec<[f64; 2]> = (0..fm.num_velocity_nodes()).map(|i| [(i as f64 + seed).sin(), (seed * i as f64).cos()]).collect();
        let s: Vec<[f64; 2]> = (0..points.len()).map(|k| [(k as f64 * seed).cos(), 1.0 - k as f64 * 0.1]).collect();
        let lhs: f64 = cm.interpolate(&w).unwrap().iter().zip(&s).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum();
        let rhs: f64 = cm.scatter(&s).unwrap().iter().zip(&w).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum();
        prop_assert!((lhs - rhs).abs() < 1e-11 * (1.0 + lhs.abs()));
    }
}
