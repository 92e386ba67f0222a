use proptest::prelude::*;
use ufem::solid::{element_stiffness, linearized_stress, p1_gradients, stress_remainder, update_stress, SolidMaterial, SolidMesh};

fn mat() -> impl Strategy<Value = [[f64; 2]; 2]> {
    proptest::array::uniform2(proptest::array::uniform2(-2.0..2.0f64))
}

fn sym() -> impl Strategy<Value = [[f64; 2]; 2]> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b, c)| [[a, b], [b, c]])
}

proptest! {
    #[test]
    fn zero_gradient_keeps_stress(tau in sym(), dt in 1e-4..1e-1f64, mu in 0.0..1e6f64) {
        prop_assert_eq!(update_stress(&tau, &[[0.0; 2]; 2], dt, mu), tau);
    }

    #[test]
    fn stress_update_stays_symmetric(tau in sym(), g in mat(), dt in 1e-4..1e-1f64, mu in 0.0..1e3f64) {
        let t = update_stress(&tau, &g, dt, mu);
        prop_assert_eq!(t[0][1], t[1][0]);
    }

    #[test]
    fn linearization_is_exact_at_the_old_gradient(tau in sym(), g in mat(), dt in 1e-4..1e-1f64, mu in 0.0..1e3f64) {
        // tau(G) = L(G; G) + R(G) when the linearization point is G itself
        let full = update_stress(&tau, &g, dt, mu);
        let lin = linearized_stress(&tau, &g, &g, dt, mu);
        let rem = stress_remainder(&tau, &g, dt, mu);
        for i in 0..2 {
            for j in 0..2 {
                prop_assert!((full[i][j] - lin[i][j] - rem[i][j]).abs() < 1e-9 * (1.0 + full[i][j].abs()));
            }
        }
    }

    #[test]
    fn stiffness_is_symmetric_without_prestress_or_motion(
        x in proptest::array::uniform3(proptest::array::uniform2(-1.0..1.0f64)),
        dt in 1e-4..1e-1f64,
    ) {
        let Ok((grads, area)) = p1_gradients(x) else { return Ok(()) };
        prop_assume!(area > 1e-3);
        let k = element_stiffness(&grads, area, &[[0.0; 2]; 2], &[[0.0; 2]; 2], dt, 3.0);
        prop_assert!(k.max_abs_diff(&k.transpose()) < 1e-12 * k.max_abs());
    }
}

#[test]
fn rigid_translation_leaves_areas_and_stress() {
    let material = SolidMaterial { density: 1.2, shear_modulus: 1e4 };
    let mut sm = SolidMesh::disc([0.0, 0.0], 0.3, 4, material).unwrap();
    let area = sm.total_area();
    let v = vec![[0.7, -0.4]; sm.num_nodes()];
    let g = sm.velocity_gradients(&v).unwrap();
    for _ in 0..10 {
        sm.update_stresses(&g, 0.01);
        sm.move_nodes(&v, 0.01).unwrap();
    }
    assert!((sm.total_area() - area).abs() < 1e-14);
    assert!(sm.stress.iter().all(|t| t.iter().flatten().all(|x| x.abs() < 1e-9)));
    let c = sm.body_centroid(0);
    assert!((c[0] - 0.07).abs() < 1e-13 && (c[1] + 0.04).abs() < 1e-13);
}

#[test]
fn inverted_triangle_is_rejected() {
    let material = SolidMaterial { density: 1.0, shear_modulus: 1.0 };
    let mut sm = SolidMesh::rectangle([0.0, 0.0], [1.0, 1.0], 1, 1, material).unwrap();
    // fold node 0 across the opposite edge
    let mut v = vec![[0.0; 2]; sm.num_nodes()];
    v[0] = [300.0, 300.0];
    assert!(sm.move_nodes(&v, 0.01).is_err());
}
