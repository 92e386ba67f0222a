//! Acceptance criteria, one line per criterion.
//!
//! Criteria 5 to 8 run the coupled benchmarks and only run with `UFEM_ACCEPTANCE=full`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use ufem::basis::{gauss_rule, q2_values, Family};
use ufem::convection::{convect_step, ConvectionConfig, ConvectionMethod};
use ufem::coupling::CouplingMap;
use ufem::dense::DenseMatrix;
use ufem::dofs::{scatter_vector, Assembler, Dof, DofMap};
use ufem::fluid::OpsCache;
use ufem::hanging::{
    modify_element_matrix, modify_vector, pressure_weights, velocity_weights, BlockLayout, ElementConstraints, FieldKind,
};
use ufem::mesh::{FluidMesh, GridSpec, RefinementRegion};
use ufem::scenario::builtin_scenario;
use ufem::solid::{element_stiffness, p1_gradients, update_stress, SolidMesh};
use ufem::sparse::CsrMatrix;
use ufem::stepper::{Simulation, StepperConfig};
use ufem::system::{assemble_system, SolverSettings};
use ufem::types::{BoundaryConditions, DirichletSpec, PhysicalParams, Side};
use ufem::validate::{check_cavity_disc, check_falling_disc, check_leaflet_across, check_leaflet_along, Check};
use ufem::Rational;

struct Outcome {
    passed: bool,
    detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self { passed, detail: detail.into() }
    }

    fn from_checks(checks: ufem::Result<Vec<Check>>) -> Self {
        match checks {
            Ok(c) => {
                let passed = !c.is_empty() && c.iter().all(|c| c.passed);
                let detail = c.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("; ");
                Self::new(passed, detail)
            }
            Err(e) => Self::new(false, format!("error: {e}")),
        }
    }
}

fn block_diag<T: ufem::scalar::Scalar>(c: &ElementConstraints) -> DenseMatrix<T> {
    let m = c.matrices::<T>();
    let mut d = DenseMatrix::zeros(22, 22);
    d.set_block(0, 0, &m.dv);
    d.set_block(9, 9, &m.dv);
    d.set_block(18, 18, &m.dp);
    d
}

fn hanging_equivalence() -> Outcome {
    let start = Instant::now();
    let configs = ElementConstraints::all_configurations();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = DenseMatrix::from_fn(22, 22, |_, _| rng.random_range(-1e3..1e3));
        let scale = k.max_abs();
        for cons in &configs {
            let d = block_diag::<f64>(cons);
            let expected = d.transpose().matmul(&k).matmul(&d);
            let mut got = k.clone();
            modify_element_matrix(&mut got, cons);
            worst = worst.max(got.max_abs_diff(&expected) / scale);
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        configs.len() == 12 && worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!(
            "100 matrices x {} configurations, max relative deviation {worst:.2e}, {:.3} s",
            configs.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn refined_mesh(level: u32) -> FluidMesh {
    let grid = GridSpec { origin: [0.0, 0.0], extent: [2.0, 1.0], root_cells: [4, 2], max_level: level };
    let region = RefinementRegion { min: [0.6, 0.3], max: [0.9, 0.6], level };
    FluidMesh::with_regions(grid, BoundaryConditions::default(), vec![region]).unwrap()
}

fn constraint_weights() -> Outcome {
    let exact = velocity_weights::<Rational>() == [Rational::new(3, 8), Rational::new(-1, 8), Rational::new(3, 4)]
        && pressure_weights::<Rational>() == [Rational::new(1, 2), Rational::new(1, 2)];
    let mut worst = 0.0f64;
    let mut slaves = 0;
    for level in 1..=3 {
        let fm = refined_mesh(level);
        let lin = |x: [f64; 2]| 0.3 - 1.7 * x[0] + 2.2 * x[1];
        let mut vel: Vec<[f64; 2]> = fm.vnodes.iter().map(|_| [0.0; 2]).collect();
        let mut pres = vec![0.0; fm.num_pressure_nodes()];
        for (n, &x) in fm.vnodes.iter().enumerate() {
            if !fm.is_velocity_slave(n) {
                vel[n] = [lin(x), -2.0 * lin(x)];
            }
        }
        for (n, &x) in fm.pnodes.iter().enumerate() {
            if !fm.is_pressure_slave(n) {
                pres[n] = lin(x);
            }
        }
        fm.apply_constraints(&mut vel, &mut pres);
        for h in &fm.constraints {
            slaves += 1;
            let err = match h.kind {
                FieldKind::Velocity => {
                    let x = fm.vnodes[h.slave];
                    (vel[h.slave][0] - lin(x)).abs().max((vel[h.slave][1] + 2.0 * lin(x)).abs())
                }
                FieldKind::Pressure => (pres[h.slave] - lin(fm.pnodes[h.slave])).abs(),
            };
            worst = worst.max(err);
        }
    }
    Outcome::new(
        exact && slaves > 0 && worst <= 1e-13,
        format!("weights exact: {exact}; linear fields at {slaves} slave nodes, max error {worst:.2e}"),
    )
}

fn free(d: Dof) -> usize {
    match d {
        Dof::Free(i) => i,
        other => panic!("expected a free dof, got {other:?}"),
    }
}

fn coupling_operator() -> Outcome {
    let grid = GridSpec { origin: [0.0, 0.0], extent: [1.0, 1.0], root_cells: [3, 3], max_level: 2 };
    let region = RefinementRegion { min: [0.4, 0.4], max: [0.55, 0.6], level: 2 };
    let fm = FluidMesh::with_regions(grid, BoundaryConditions::default(), vec![region]).unwrap();
    let mut rng = StdRng::seed_from_u64(11);
    let points: Vec<[f64; 2]> = (0..500).map(|_| [rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0)]).collect();
    let cm = CouplingMap::new(&fm, &points).unwrap();
    let col_sum = cm.columns.iter().map(|c| (c.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    let lin = |x: [f64; 2]| 0.7 - 1.3 * x[0] + 2.1 * x[1];
    let u: Vec<[f64; 2]> = fm.vnodes.iter().map(|&x| [lin(x), -lin(x)]).collect();
    let us = cm.interpolate(&u).unwrap();
    let lin_err = points.iter().zip(&us).map(|(p, v)| (v[0] - lin(*p)).abs().max((v[1] + lin(*p)).abs())).fold(0.0, f64::max);

    // two cells, one triangle: element-local assembly against dense DᵀKˢD
    let two = FluidMesh::uniform(
        GridSpec { origin: [0.0, 0.0], extent: [2.0, 1.0], root_cells: [2, 1], max_level: 0 },
        BoundaryConditions::default(),
    )
    .unwrap();
    let tri = [[0.3, 0.2], [1.7, 0.4], [0.9, 0.85]];
    let cm2 = CouplingMap::new(&two, &tri).unwrap();
    let (grads, area) = p1_gradients(tri).unwrap();
    let ks = element_stiffness(&grads, area, &[[0.4, -0.3], [-0.3, 1.1]], &[[0.2, 0.7], [-0.5, 0.1]], 0.01, 250.0);
    let dofs = DofMap::unconstrained(&two);
    let mut asm = Assembler::new(dofs.len());
    cm2.add_element(&mut asm, &dofs, &[0, 1, 2], Some(&ks), None);
    let got = CsrMatrix::from_triplets(asm.matrix);
    let r = cm2.to_dense();
    let nf = two.num_velocity_nodes();
    let d = DenseMatrix::from_fn(6, 2 * nf, |i, j| if i / 3 == j / nf { r[(j % nf, i % 3)] } else { 0.0 });
    let expected = d.transpose().matmul(&ks).matmul(&d);
    let mut oracle = 0.0f64;
    for a in 0..nf {
        for c in 0..2 {
            for b in 0..nf {
                for e in 0..2 {
                    let diff = expected[(c * nf + a, e * nf + b)] - got.get(free(dofs.vel[a][c]), free(dofs.vel[b][e]));
                    oracle = oracle.max(diff.abs() / ks.max_abs());
                }
            }
        }
    }
    Outcome::new(
        col_sum <= 1e-13 && lin_err <= 1e-12 && oracle <= 1e-12,
        format!("column sums {col_sum:.1e}, linear reproduction {lin_err:.1e}, dense oracle {oracle:.1e}"),
    )
}

/// Stream function x²(1−x)² y²(1−y)²: X, X', X'', X'''.
fn stream_factor(x: f64) -> [f64; 4] {
    [
        x * x * (1.0 - x) * (1.0 - x),
        2.0 * x - 6.0 * x * x + 4.0 * x * x * x,
        2.0 - 12.0 * x + 12.0 * x * x,
        -12.0 + 24.0 * x,
    ]
}

fn exact_velocity(p: [f64; 2]) -> [f64; 2] {
    let (x, y) = (stream_factor(p[0]), stream_factor(p[1]));
    [x[0] * y[1], -x[1] * y[0]]
}

/// −Δu + ∇p with p = sin(πx) cos(πy).
fn manufactured_force(p: [f64; 2]) -> [f64; 2] {
    use std::f64::consts::PI;
    let (x, y) = (stream_factor(p[0]), stream_factor(p[1]));
    let lap = [x[2] * y[1] + x[0] * y[3], -(x[3] * y[0] + x[1] * y[2])];
    let grad_p = [PI * (PI * p[0]).cos() * (PI * p[1]).cos(), -PI * (PI * p[0]).sin() * (PI * p[1]).sin()];
    [-lap[0] + grad_p[0], -lap[1] + grad_p[1]]
}

fn manufactured_error(n: usize) -> f64 {
    let walls = BoundaryConditions { dirichlet: Side::ALL.iter().flat_map(|s| DirichletSpec::no_slip(*s)).collect(), ..Default::default() };
    let grid = GridSpec { origin: [0.0, 0.0], extent: [1.0, 1.0], root_cells: [n, n], max_level: 1 };
    let region = RefinementRegion { min: [0.25, 0.25], max: [0.5, 0.5], level: 1 };
    let fm = FluidMesh::with_regions(grid, walls, vec![region]).unwrap();
    let params = PhysicalParams {
        fluid_density: 1.0,
        fluid_viscosity: 1.0,
        solid_density: 1.0,
        solid_shear_modulus: 1.0,
        gravity: [0.0, 0.0],
        time_step: 1e12,
    };
    let zero = vec![[0.0; 2]; fm.num_velocity_nodes()];
    let mut sys = assemble_system(&fm, &params, &zero, None, 0.0, &mut OpsCache::new()).unwrap();
    let rule = gauss_rule::<f64>(Family::Q2, 4).unwrap();
    let at = |cell: &ufem::mesh::Cell, xi: f64, eta: f64| {
        let s = cell.size();
        [cell.min[0] + 0.5 * (xi + 1.0) * s[0], cell.min[1] + 0.5 * (eta + 1.0) * s[1]]
    };
    for cell in &fm.cells {
        let jac = 0.25 * cell.size()[0] * cell.size()[1];
        let mut fe = vec![0.0; 22];
        for (q, w) in rule.points.iter().zip(&rule.weights) {
            let f = manufactured_force(at(cell, q.xi, q.eta));
            for (a, phi) in q2_values(q.xi, q.eta).iter().enumerate() {
                fe[a] += w * jac * f[0] * phi;
                fe[9 + a] += w * jac * f[1] * phi;
            }
        }
        modify_vector(&mut fe, &cell.constraints, &BlockLayout::TAYLOR_HOOD);
        scatter_vector(&sys.dofs.cell_dofs(cell, true), &fe, &mut sys.rhs);
    }
    let sol = sys.solve(&fm, &SolverSettings::default()).unwrap();
    let mut err2 = 0.0;
    for cell in &fm.cells {
        let jac = 0.25 * cell.size()[0] * cell.size()[1];
        for (q, w) in rule.points.iter().zip(&rule.weights) {
            let phi = q2_values(q.xi, q.eta);
            let mut uh = [0.0; 2];
            for (a, &node) in cell.nodes.iter().enumerate() {
                uh[0] += phi[a] * sol.velocity[node][0];
                uh[1] += phi[a] * sol.velocity[node][1];
            }
            let u = exact_velocity(at(cell, q.xi, q.eta));
            err2 += w * jac * ((uh[0] - u[0]).powi(2) + (uh[1] - u[1]).powi(2));
        }
    }
    err2.sqrt()
}

fn manufactured_convergence() -> Outcome {
    let start = Instant::now();
    let errors: Vec<f64> = [4, 8, 16].iter().map(|&n| manufactured_error(n)).collect();
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    let elapsed = start.elapsed();
    Outcome::new(
        ratios.iter().all(|r| *r >= 6.0) && elapsed < Duration::from_secs(120),
        format!("L2 velocity errors {}, ratios {ratios:.2?}, {:.1} s", errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" "), elapsed.as_secs_f64()),
    )
}

fn falling_disc() -> Outcome {
    let mut c = builtin_scenario("falling_disc").unwrap();
    c.mesh.solid_level += 1;
    c.mesh.max_level += 1;
    Outcome::from_checks(check_falling_disc(&c, 2, Some(1e12)))
}

fn leaflet_along() -> Outcome {
    Outcome::from_checks(check_leaflet_along(&builtin_scenario("leaflet_along").unwrap(), None, 0.15))
}

fn leaflet_across() -> Outcome {
    Outcome::from_checks(check_leaflet_across(&builtin_scenario("leaflet_across").unwrap(), 0.5))
}

fn cavity_disc() -> Outcome {
    let c = builtin_scenario("cavity_disc").unwrap();
    let mut soft = c.clone();
    soft.params.solid_shear_modulus = 1.0;
    soft.run.t_end = 25.0;
    let mut stiff = c;
    stiff.params.solid_shear_modulus = 100.0;
    stiff.params.time_step = 1e-3;
    stiff.run.t_end = 1.0;
    Outcome::from_checks(check_cavity_disc(&soft).and_then(|mut a| {
        a.extend(check_cavity_disc(&stiff)?);
        Ok(a)
    }))
}

fn invariant_suite() -> Outcome {
    let mut failures = Vec::new();

    let mut c = builtin_scenario("cavity_disc").unwrap();
    c.mesh.root_cells = [4, 4];
    c.mesh.solid_level = 1;
    c.mesh.max_level = 2;
    let mut sim = c.build().unwrap();
    let mut div = 0.0f64;
    for _ in 0..10 {
        div = div.max(sim.advance().unwrap().divergence);
    }
    if div >= 1e-8 {
        failures.push(format!("divergence {div:.2e}"));
    }

    let walls = BoundaryConditions { dirichlet: Side::ALL.iter().flat_map(|s| DirichletSpec::no_slip(*s)).collect(), ..Default::default() };
    let mut lid = walls.clone();
    lid.dirichlet.retain(|d| d.side != Side::Top);
    lid.dirichlet.push(DirichletSpec::constant(Side::Top, 0, 1.0));
    lid.dirichlet.push(DirichletSpec::constant(Side::Top, 1, 0.0));
    let params = PhysicalParams {
        fluid_density: 1.0,
        fluid_viscosity: 0.1,
        solid_density: 1.0,
        solid_shear_modulus: 1.0,
        gravity: [0.0, -1.0],
        time_step: 0.01,
    };
    let grid = |n: usize, level: u32| GridSpec { origin: [0.0, 0.0], extent: [1.0, 1.0], root_cells: [n, n], max_level: level };
    let solve = |bc: BoundaryConditions| {
        let fm = FluidMesh::uniform(grid(4, 0), bc).unwrap();
        let u0 = vec![[0.0; 2]; fm.num_velocity_nodes()];
        let s = assemble_system(&fm, &params, &u0, None, 0.01, &mut OpsCache::new()).unwrap();
        s.solve(&fm, &SolverSettings::default()).unwrap()
    };
    let a = solve(lid.clone());
    let b = solve(BoundaryConditions { pressure_pin: Some([0.75, 0.5]), ..lid });
    let shift = a.pressure[0] - b.pressure[0];
    let gauge_u = a.velocity.iter().zip(&b.velocity).map(|(x, y)| (x[0] - y[0]).abs().max((x[1] - y[1]).abs())).fold(0.0, f64::max);
    let gauge_p = a.pressure.iter().zip(&b.pressure).map(|(p, q)| (p - q - shift).abs()).fold(0.0, f64::max);
    if gauge_u > 1e-10 || gauge_p > 1e-9 {
        failures.push(format!("gauge velocity {gauge_u:.1e}, pressure {gauge_p:.1e}"));
    }

    let region = RefinementRegion { min: [0.3, 0.3], max: [0.6, 0.55], level: 2 };
    let fm = FluidMesh::with_regions(grid(4, 2), walls, vec![region.clone()]).unwrap();
    let still = PhysicalParams { gravity: [0.0, 0.0], ..params.clone() };
    let mut rest = Simulation::new(fm, SolidMesh::empty(), still, StepperConfig::default(), vec![]).unwrap();
    for _ in 0..3 {
        rest.advance().unwrap();
    }
    let moved = rest.state.velocity.iter().flatten().chain(&rest.state.pressure).fold(0.0f64, |m, v| m.max(v.abs()));
    if moved > 1e-14 {
        failures.push(format!("zero state drifted by {moved:.1e}"));
    }

    let open = FluidMesh::with_regions(grid(4, 2), BoundaryConditions::default(), vec![region]).unwrap();
    let mut rng = StdRng::seed_from_u64(3);
    let mut convected = 0.0f64;
    for method in [ConvectionMethod::LeastSquares, ConvectionMethod::TaylorGalerkin] {
        let v = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let u = vec![v; open.num_velocity_nodes()];
        let r = convect_step(&open, &u, 0.01, &ConvectionConfig { method, ..Default::default() }).unwrap();
        convected = r.velocity.iter().map(|w| (w[0] - v[0]).abs().max((w[1] - v[1]).abs())).fold(convected, f64::max);
    }
    if convected > 1e-12 {
        failures.push(format!("constant convection error {convected:.1e}"));
    }

    let sym = |r: &mut StdRng| {
        let b = r.random_range(-2.0..2.0);
        [[r.random_range(-2.0..2.0), b], [b, r.random_range(-2.0..2.0)]]
    };
    let mut asym = 0.0f64;
    let mut identity = true;
    for _ in 0..1000 {
        let tau = sym(&mut rng);
        let g = [[rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)], [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]];
        let dt = rng.random_range(1e-4..1e-1);
        let mu = rng.random_range(0.0..1e3);
        let t = update_stress(&tau, &g, dt, mu);
        asym = asym.max((t[0][1] - t[1][0]).abs());
        identity &= update_stress(&tau, &[[0.0; 2]; 2], dt, mu) == tau;
    }
    if asym != 0.0 || !identity {
        failures.push(format!("stress asymmetry {asym:.1e}, zero-velocity identity {identity}"));
    }

    Outcome::new(
        failures.is_empty(),
        if failures.is_empty() {
            format!("divergence {div:.1e}, gauge {gauge_u:.1e}, rest {moved:.1e}, convection {convected:.1e}, stress symmetric")
        } else {
            failures.join("; ")
        },
    )
}

fn main() -> ExitCode {
    // the coupled benchmark runs take over an hour on one core
    let quick = std::env::var("UFEM_ACCEPTANCE").map_or(true, |v| v != "full");
    // comma-separated criterion ids, e.g. "6,7"
    let only: Option<Vec<u32>> = std::env::var("UFEM_ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let criteria: [(u32, &str, bool, fn() -> Outcome); 9] = [
        (1, "hanging-node modification equals triple product", false, hanging_equivalence),
        (2, "constraint weights and linear reproduction", false, constraint_weights),
        (3, "coupling operator", false, coupling_operator),
        (4, "manufactured-solution convergence", false, manufactured_convergence),
        (5, "falling disc terminal velocity", true, falling_disc),
        (6, "leaflet along the flow, half resolution", true, leaflet_along),
        (7, "leaflet across the flow, refinement trends", true, leaflet_across),
        (8, "cavity disc stability", true, cavity_disc),
        (9, "invariant suite", false, invariant_suite),
    ];
    let mut failed = Vec::new();
    for (id, name, long, run) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        if long && quick {
            println!("SKIP {id} {name} (set UFEM_ACCEPTANCE=full)");
            continue;
        }
        let start = Instant::now();
        let o = run();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{tag} {id} {name} [{:.1} s]: {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.passed {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
