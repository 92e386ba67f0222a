use proptest::prelude::*;
use ufem::convection::{convect_step, ConvectionConfig, ConvectionMethod};
use ufem::dofs::{Dof, DofMap};
use ufem::fluid::{assemble_fluid, OpsCache};
use ufem::mesh::{FluidMesh, GridSpec, RefinementRegion};
use ufem::scenario::builtin_scenario;
use ufem::solid::SolidMesh;
use ufem::stepper::{Simulation, StepperConfig};
use ufem::system::{assemble_system, SolverSettings};
use ufem::types::{BoundaryConditions, DirichletSpec, PhysicalParams, Side};

fn cavity_bc() -> BoundaryConditions {
    let mut dirichlet: Vec<DirichletSpec> =
        [Side::Left, Side::Right, Side::Bottom].iter().flat_map(|s| DirichletSpec::no_slip(*s)).collect();
    dirichlet.push(DirichletSpec::constant(Side::Top, 0, 1.0));
    dirichlet.push(DirichletSpec::constant(Side::Top, 1, 0.0));
    BoundaryConditions { dirichlet, ..Default::default() }
}

fn walls() -> BoundaryConditions {
    let dirichlet = Side::ALL.iter().flat_map(|s| DirichletSpec::no_slip(*s)).collect();
    BoundaryConditions { dirichlet, ..Default::default() }
}

fn grid(n: usize, max_level: u32) -> GridSpec {
    GridSpec { origin: [0.0, 0.0], extent: [1.0, 1.0], root_cells: [n, n], max_level }
}

fn refined(bc: BoundaryConditions) -> FluidMesh {
    let region = RefinementRegion { min: [0.3, 0.3], max: [0.6, 0.55], level: 2 };
    FluidMesh::with_regions(grid(4, 2), bc, vec![region]).unwrap()
}

fn params(gravity: [f64; 2]) -> PhysicalParams {
    PhysicalParams {
        fluid_density: 1.0,
        fluid_viscosity: 0.1,
        solid_density: 1.0,
        solid_shear_modulus: 1.0,
        gravity,
        time_step: 0.01,
    }
}

#[test]
fn mass_and_stiffness_are_symmetric() {
    let fm = refined(BoundaryConditions::default());
    let dofs = DofMap::unconstrained(&fm);
    let ops = assemble_fluid(&fm, &dofs, 1.3, 0.7, [0.0, 0.0], &mut OpsCache::new()).unwrap();
    assert!(ops.m.max_asymmetry() < 1e-13);
    assert!(ops.k.max_asymmetry() < 1e-13);
}

#[test]
fn lid_driven_8x8_saddle_system_is_nonsingular() {
    let fm = FluidMesh::uniform(grid(8, 0), cavity_bc()).unwrap();
    assert!(fm.pinned.is_some());
    let u0 = vec![[0.0; 2]; fm.num_velocity_nodes()];
    let sys = assemble_system(&fm, &params([0.0, 0.0]), &u0, None, 0.01, &mut OpsCache::new()).unwrap();
    assert!(sys.matrix.empty_rows().is_empty());
    let sol = sys.solve(&fm, &SolverSettings::default()).unwrap();
    assert!(sol.relative_residual < 1e-10);
    assert!(sol.velocity.iter().flatten().all(|v| v.is_finite()));
}

#[test]
fn constant_pressure_is_in_the_kernel_of_the_gradient() {
    // (1, div φ) = 0 for every velocity function vanishing on the boundary
    for fm in [FluidMesh::uniform(grid(5, 0), walls()).unwrap(), refined(walls())] {
        let dofs = DofMap::unconstrained(&fm);
        let ops = assemble_fluid(&fm, &dofs, 1.0, 1.0, [0.0, 0.0], &mut OpsCache::new()).unwrap();
        let mut ones = vec![0.0; dofs.len()];
        for d in &dofs.pres {
            if let Dof::Free(i) = *d {
                ones[i] = 1.0;
            }
        }
        let bp = ops.b.matvec(&ones);
        for (n, d) in dofs.vel.iter().enumerate() {
            if fm.vel_bc[n][0].is_some() {
                continue;
            }
            for dof in d {
                if let Dof::Free(i) = *dof {
                    assert!(bp[i].abs() < 1e-12, "node {n}: {}", bp[i]);
                }
            }
        }
    }
}

#[test]
fn zero_state_stays_at_rest() {
    let fm = refined(walls());
    let mut sim = Simulation::new(fm, SolidMesh::empty(), params([0.0, 0.0]), StepperConfig::default(), vec![]).unwrap();
    for _ in 0..3 {
        sim.advance().unwrap();
    }
    assert!(sim.state.velocity.iter().flatten().all(|v| v.abs() < 1e-14));
    assert!(sim.state.pressure.iter().all(|p| p.abs() < 1e-14));
}

#[test]
fn closed_box_under_gravity_is_hydrostatic() {
    let fm = refined(walls());
    let g = [0.0, -9.81];
    let mut sim = Simulation::new(fm, SolidMesh::empty(), params(g), StepperConfig::default(), vec![]).unwrap();
    sim.advance().unwrap();
    assert!(sim.state.velocity.iter().flatten().all(|v| v.abs() < 1e-10));
    let pin = sim.fluid.pinned.unwrap();
    let y0 = sim.fluid.pnodes[pin][1];
    for (n, x) in sim.fluid.pnodes.iter().enumerate() {
        let expected = g[1] * (x[1] - y0);
        assert!((sim.state.pressure[n] - expected).abs() < 1e-9, "node {n}");
    }
}

#[test]
fn discrete_divergence_vanishes_in_a_coupled_run() {
    let mut c = builtin_scenario("cavity_disc").unwrap();
    c.mesh.root_cells = [4, 4];
    c.mesh.solid_level = 1;
    c.mesh.max_level = 2;
    let mut sim = c.build().unwrap();
    for _ in 0..3 {
        let r = sim.advance().unwrap();
        assert!(r.divergence < 1e-8, "divergence {}", r.divergence);
        assert!(r.solve_residual < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn constant_fields_convect_exactly(a in -3.0..3.0f64, b in -3.0..3.0f64, tg in any::<bool>()) {
        let fm = refined(BoundaryConditions::default());
        let u = vec![[a, b]; fm.num_velocity_nodes()];
        let cfg = ConvectionConfig {
            method: if tg { ConvectionMethod::TaylorGalerkin } else { ConvectionMethod::LeastSquares },
            ..Default::default()
        };
        let r = convect_step(&fm, &u, 0.01, &cfg).unwrap();
        for v in &r.velocity {
            prop_assert!((v[0] - a).abs() < 1e-12 && (v[1] - b).abs() < 1e-12);
        }
    }

    #[test]
    fn pressure_gauge_does_not_change_velocity(pin_x in 0usize..5, pin_y in 0usize..5) {
        let bc = BoundaryConditions { pressure_pin: Some([pin_x as f64 * 0.25, pin_y as f64 * 0.25]), ..cavity_bc() };
        let fm = FluidMesh::uniform(grid(4, 0), bc).unwrap();
        let fm0 = FluidMesh::uniform(grid(4, 0), cavity_bc()).unwrap();
        let u0 = vec![[0.0; 2]; fm.num_velocity_nodes()];
        let solve = |m: &FluidMesh| {
            let s = assemble_system(m, &params([0.0, -1.0]), &u0, None, 0.01, &mut OpsCache::new()).unwrap();
            s.solve(m, &SolverSettings::default()).unwrap()
        };
        let (a, b) = (solve(&fm), solve(&fm0));
        for (x, y) in a.velocity.iter().zip(&b.velocity) {
            prop_assert!((x[0] - y[0]).abs() < 1e-10 && (x[1] - y[1]).abs() < 1e-10);
        }
        let shift = a.pressure[0] - b.pressure[0];
        for (p, q) in a.pressure.iter().zip(&b.pressure) {
            prop_assert!((p - q - shift).abs() < 1e-9);
        }
    }
}
