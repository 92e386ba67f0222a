use proptest::prelude::*;
use ufem::dense::DenseMatrix;
use ufem::hanging::{
    modify_element_matrix, modify_vector, pressure_weights, velocity_weights, BlockLayout, ElementConstraints,
};
use ufem::mesh::{FluidMesh, GridSpec, RefinementRegion};
use ufem::types::BoundaryConditions;
use ufem::Rational;

fn block_diag(c: &ElementConstraints) -> DenseMatrix<f64> {
    let m = c.matrices::<f64>();
    let mut d = DenseMatrix::zeros(22, 22);
    d.set_block(0, 0, &m.dv);
    d.set_block(9, 9, &m.dv);
    d.set_block(18, 18, &m.dp);
    d
}

fn refined_mesh(level: u32) -> FluidMesh {
    let grid = GridSpec { origin: [0.0, 0.0], extent: [2.0, 1.0], root_cells: [4, 2], max_level: level };
    let region = RefinementRegion { min: [0.6, 0.3], max: [0.9, 0.6], level };
    FluidMesh::with_regions(grid, BoundaryConditions::default(), vec![region]).unwrap()
}

#[test]
fn weights_are_exact() {
    let w = velocity_weights::<Rational>();
    assert_eq!(w, [Rational::new(3, 8), Rational::new(-1, 8), Rational::new(3, 4)]);
    assert_eq!(pressure_weights::<Rational>(), [Rational::new(1, 2), Rational::new(1, 2)]);
}

#[test]
fn twelve_two_level_configurations() {
    assert_eq!(ElementConstraints::all_configurations().len(), 12);
}

#[test]
fn rational_matrices_match_triple_product_exactly() {
    for cons in ElementConstraints::all_configurations() {
        let m = cons.matrices::<Rational>();
        let mut d = DenseMatrix::zeros(22, 22);
        d.set_block(0, 0, &m.dv);
        d.set_block(9, 9, &m.dv);
        d.set_block(18, 18, &m.dp);
        let k = DenseMatrix::from_fn(22, 22, |i, j| Rational::new((i * 7 + j * 3) as i64 % 11 - 5, 1 + (i + j) as i64 % 4));
        let expected = d.transpose().matmul(&k).matmul(&d);
        let mut got = k.clone();
        modify_element_matrix(&mut got, &cons);
        assert_eq!(got, expected);
    }
}

#[test]
fn hanging_nodes_reproduce_linear_fields() {
    for level in 1..=3 {
        let fm = refined_mesh(level);
        assert!(!fm.constraints.is_empty());
        let lin = |x: [f64; 2]| 0.3 - 1.7 * x[0] + 2.2 * x[1];
        let mut vel: Vec<[f64; 2]> = fm.vnodes.iter().map(|&x| [lin(x), -lin(x)]).collect();
        let mut pres: Vec<f64> = fm.pnodes.iter().map(|&x| lin(x)).collect();
        // scramble the slaves, then rebuild them from the masters
        for h in &fm.constraints {
            match h.kind {
                ufem::hanging::FieldKind::Velocity => vel[h.slave] = [9.0, 9.0],
                ufem::hanging::FieldKind::Pressure => pres[h.slave] = 9.0,
            }
        }
        fm.apply_constraints(&mut vel, &mut pres);
        for (n, &x) in fm.vnodes.iter().enumerate() {
            assert!((vel[n][0] - lin(x)).abs() < 1e-13, "velocity node {n}");
            assert!((vel[n][1] + lin(x)).abs() < 1e-13, "velocity node {n}");
        }
        for (n, &x) in fm.pnodes.iter().enumerate() {
            assert!((pres[n] - lin(x)).abs() < 1e-13, "pressure node {n}");
        }
    }
}

#[test]
fn refined_mesh_is_balanced() {
    for level in 1..=4 {
        assert!(refined_mesh(level).max_neighbor_level_gap() <= 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn element_modification_equals_triple_product(
        entries in proptest::collection::vec(-1.0e3..1.0e3f64, 22 * 22),
        which in 0usize..12,
    ) {
        let cons = &ElementConstraints::all_configurations()[which];
        let k = DenseMatrix::from_fn(22, 22, |i, j| entries[i * 22 + j]);
        let d = block_diag(cons);
        let expected = d.transpose().matmul(&k).matmul(&d);
        let mut got = k.clone();
        modify_element_matrix(&mut got, cons);
        let scale = 1.0 + k.max_abs();
        prop_assert!(got.max_abs_diff(&expected) <= 1e-12 * scale);
    }

    #[test]
    fn vector_modification_equals_transpose_product(
        entries in proptest::collection::vec(-10.0..10.0f64, 22),
        which in 0usize..12,
    ) {
        let cons = &ElementConstraints::all_configurations()[which];
        let d = block_diag(cons);
        let expected = d.transpose().matvec(&entries);
        let mut got = entries.clone();
        modify_vector(&mut got, cons, &BlockLayout::TAYLOR_HOOD);
        for (a, b) in got.iter().zip(&expected) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constrained_interpolation_of_random_linear_fields(
        a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64,
    ) {
        let fm = refined_mesh(2);
        let lin = |x: [f64; 2]| a + b * x[0] + c * x[1];
        let mut vel: Vec<[f64; 2]> = fm.vnodes.iter().map(|&x| [lin(x), 2.0 * lin(x)]).collect();
        let mut pres: Vec<f64> = fm.pnodes.iter().map(|&x| lin(x)).collect();
        fm.apply_constraints(&mut vel, &mut pres);
        for (n, &x) in fm.vnodes.iter().enumerate() {
            prop_assert!((vel[n][0] - lin(x)).abs() < 1e-12);
        }
        for (n, &x) in fm.pnodes.iter().enumerate() {
            prop_assert!((pres[n] - lin(x)).abs() < 1e-12);
        }
    }
}
