//! Scaled benchmark checks for the built-in scenarios.

use std::fmt;

use crate::convection::ConvectionMethod;
use crate::error::{Error, Result};
use crate::io::oscillation;
use crate::scenario::{builtin_scenario, falling_disc_reference, ScenarioConfig};
use crate::stepper::{ProbeSample, Simulation, StepReport};

/// Outcome of one measured-versus-reference comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub reference: f64,
    /// Relative tolerance, or an absolute bound when `reference` is 0.
    pub tolerance: f64,
    pub passed: bool,
    pub note: String,
}

impl Check {
    /// `|measured - reference| <= tolerance |reference|`.
    pub fn relative(name: &str, measured: f64, reference: f64, tolerance: f64) -> Self {
        let passed = (measured - reference).abs() <= tolerance * reference.abs();
        Self { name: name.into(), measured, reference, tolerance, passed, note: String::new() }
    }

    /// `measured < bound`.
    pub fn below(name: &str, measured: f64, bound: f64) -> Self {
        Self { name: name.into(), measured, reference: bound, tolerance: 0.0, passed: measured < bound, note: String::new() }
    }

    pub fn flag(name: &str, passed: bool, note: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            measured: f64::from(u8::from(passed)),
            reference: 1.0,
            tolerance: 0.0,
            passed,
            note: note.into(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}: measured {:.6e}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.measured)?;
        if self.tolerance > 0.0 {
            write!(f, ", reference {:.6e} within {}%", self.reference, self.tolerance * 100.0)?;
        } else if self.reference != 1.0 || self.measured.fract() != 0.0 {
            write!(f, ", bound {:.6e}", self.reference)?;
        }
        if !self.note.is_empty() {
            write!(f, " ({})", self.note)?;
        }
        Ok(())
    }
}

/// Probe samples and step reports of one completed run.
#[derive(Clone, Debug)]
pub struct RunTrace {
    pub columns: Vec<String>,
    pub samples: Vec<ProbeSample>,
    pub reports: Vec<StepReport>,
}

impl RunTrace {
    pub fn column(&self, name: &str) -> Option<(Vec<f64>, Vec<f64>)> {
        let c = self.columns.iter().position(|n| n == name)?;
        Some(self.samples.iter().map(|s| (s.time, s.values[c])).unzip())
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        self.column(name).and_then(|(_, v)| v.last().copied())
    }

    pub fn max_area_drift(&self) -> f64 {
        self.reports.iter().map(|r| r.area_drift).fold(0.0, f64::max)
    }

    pub fn max_divergence(&self) -> f64 {
        self.reports.iter().map(|r| r.divergence).fold(0.0, f64::max)
    }
}

/// Runs `c` to its end time, sampling probes after every step.
pub fn run_trace(c: &ScenarioConfig) -> Result<RunTrace> {
    let mut sim = c.build()?;
    run_simulation(&mut sim, c.run.t_end, c.run.budget_seconds, &c.name)
}

pub fn run_simulation(sim: &mut Simulation, t_end: f64, budget: Option<f64>, label: &str) -> Result<RunTrace> {
    let columns: Vec<String> = sim.probes.iter().flat_map(|p| p.columns()).collect();
    let mut samples = vec![sim.sample()];
    let every = ((t_end / sim.params.time_step) / 10.0).ceil().max(1.0) as u64;
    let reports = sim.run(t_end, budget, |s, r| {
        samples.push(s.sample());
        if r.step % every == 0 {
            log::info!("{label}: t = {:.4}, solve residual {:.2e}", r.time, r.solve_residual);
        }
    })?;
    Ok(RunTrace { columns, samples, reports })
}

fn column(trace: &RunTrace, name: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    trace.column(name).ok_or_else(|| Error::Config(format!("scenario has no probe column '{name}'")))
}

/// Terminal velocity against the empirical law: the plateau on the
/// config's mesh lies within 5%, plateaus on `coarser` successively coarser
/// solid levels rise toward it from below, and (when `stiff_modulus` is
/// given) a run at that shear modulus agrees within 1%.
pub fn check_falling_disc(c: &ScenarioConfig, coarser: u32, stiff_modulus: Option<f64>) -> Result<Vec<Check>> {
    let ut = falling_disc_reference(c)?;
    let top = c.mesh.solid_level;
    if coarser > top {
        return Err(Error::Config(format!("cannot coarsen solid level {top} by {coarser}")));
    }
    let mut plateaus = Vec::new();
    for level in top - coarser..=top {
        let mut v = c.clone();
        v.mesh.max_level = c.mesh.max_level + level - top;
        v.mesh.solid_level = level;
        let trace = run_trace(&v)?;
        plateaus.push(-trace.last("disc_vy").unwrap_or(f64::NAN));
    }
    let v = *plateaus.last().expect("at least one level");
    let mut out = vec![Check::relative("terminal velocity vs empirical law", v, ut, 0.05)];
    if coarser > 0 {
        let rising = plateaus.windows(2).all(|w| w[0] < w[1]) && plateaus.iter().all(|p| *p <= ut);
        out.push(Check::flag(
            "plateau converges from below under refinement",
            rising,
            format!("plateaus {plateaus:.5?} against {ut:.5}"),
        ));
    }
    if let Some(ms) = stiff_modulus {
        let mut stiff = c.clone();
        stiff.params.solid_shear_modulus = ms;
        for s in &mut stiff.solids {
            s.shear_modulus = None;
        }
        let v2 = -run_trace(&stiff)?.last("disc_vy").unwrap_or(f64::NAN);
        out.push(
            Check::relative("terminal velocity independent of shear modulus", v, v2, 0.01)
                .with_note(format!("shear modulus {:.1e} vs {ms:.1e}", c.params.solid_shear_modulus)),
        );
    }
    Ok(out)
}

/// Reference tip amplitude and frequency for the flap behind the
/// obstacle.
pub fn leaflet_along_reference(method: ConvectionMethod) -> (f64, f64) {
    match method {
        ConvectionMethod::LeastSquares => (1.34, 2.94),
        ConvectionMethod::TaylorGalerkin => (1.24, 2.86),
    }
}

/// Self-sustained tip oscillation over the second half of the run: at least
/// three cycles, an amplitude above `min_amplitude` that does not decay
/// from the third to the last quarter, and the frequency within `freq_tol`.
/// The amplitude is compared within `amp_tol` when given.
pub fn check_leaflet_along(c: &ScenarioConfig, amp_tol: Option<f64>, freq_tol: f64) -> Result<Vec<Check>> {
    let (amp_ref, f_ref) = leaflet_along_reference(c.stepper.convection.method);
    let trace = run_trace(c)?;
    let (t, dy) = column(&trace, "tip_dy")?;
    let t_end = c.run.t_end;
    let cut = t.partition_point(|x| *x < 0.75 * t_end);
    let (Some(o), Some(early)) = (oscillation(&t, &dy, 0.5 * t_end), oscillation(&t[..cut], &dy[..cut], 0.5 * t_end))
    else {
        return Ok(vec![Check::flag("tip oscillation onset", false, "fewer than two mean crossings")]);
    };
    let late = oscillation(&t, &dy, 0.75 * t_end).map_or(0.0, |l| l.amplitude);
    let sustained = o.cycles >= 3 && o.amplitude > 1e-2 && late >= 0.9 * early.amplitude;
    let mut out = vec![
        Check::flag(
            "tip oscillation onset",
            sustained,
            format!("{} cycles, amplitude {:.4} then {:.4}", o.cycles, early.amplitude, late),
        ),
        Check::relative("tip frequency", o.frequency, f_ref, freq_tol),
    ];
    match amp_tol {
        Some(tol) => out.push(Check::relative("tip amplitude", o.amplitude, amp_ref, tol)),
        None => out[0].note.push_str(&format!("; mean amplitude {:.4} against {amp_ref}", o.amplitude)),
    }
    Ok(out)
}

/// Lid-driven cavity with a soft disc: stability and area conservation.
pub fn check_cavity_disc(c: &ScenarioConfig) -> Result<Vec<Check>> {
    let label = format!("shear modulus {:.1e}, time step {:.1e}, t = {}", c.params.solid_shear_modulus, c.params.time_step, c.run.t_end);
    match run_trace(c) {
        Ok(trace) => {
            let finite = trace.samples.iter().all(|s| s.values.iter().all(|v| v.is_finite()));
            Ok(vec![
                Check::flag("stable run", finite, label),
                Check::below("solid area drift", trace.max_area_drift(), 0.01),
            ])
        }
        Err(e @ (Error::Config(_) | Error::Budget(_))) => Err(e),
        Err(e) => Ok(vec![Check::flag("stable run", false, format!("{label}: {e}"))]),
    }
}

/// Largest horizontal fluid velocity at the end of each run.
pub fn max_horizontal_velocity(configs: &[ScenarioConfig]) -> Result<Vec<f64>> {
    configs
        .iter()
        .map(|c| {
            let trace = run_trace(c)?;
            trace.last("umax").ok_or_else(|| Error::Config("scenario has no 'umax' probe".into()))
        })
        .collect()
}

/// `|a₁−a₀|, |a₂−a₁|, ...`
pub fn successive_differences(values: &[f64]) -> Vec<f64> {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).collect()
}

/// True when every difference is smaller than the one before.
pub fn monotone_decrease(diffs: &[f64]) -> bool {
    diffs.len() >= 2 && diffs.windows(2).all(|w| w[1] < w[0])
}

/// Mesh and time-step refinement of the leaflet across the channel,
/// compared at `t_end`: three solid levels ending at the config's own,
/// then three time steps ending at the config's own.
pub fn check_leaflet_across(c: &ScenarioConfig, t_end: f64) -> Result<Vec<Check>> {
    let mut base = c.clone();
    base.run.t_end = t_end;
    let top = base.mesh.solid_level;
    if top < 2 {
        return Err(Error::Config("mesh refinement study needs a solid level of at least 2".into()));
    }
    let meshes: Vec<ScenarioConfig> = (top - 2..=top)
        .map(|l| {
            let mut v = base.clone();
            v.mesh.max_level = l + (base.mesh.max_level - top);
            v.mesh.solid_level = l;
            v
        })
        .collect();
    let steps: Vec<ScenarioConfig> = [4.0, 2.0, 1.0]
        .iter()
        .map(|k| {
            let mut v = base.clone();
            v.mesh.solid_level = top - 1;
            v.mesh.max_level = top - 1 + (base.mesh.max_level - top);
            v.params.time_step *= k;
            v
        })
        .collect();
    let mut out = Vec::new();
    for (what, set) in [("mesh", meshes), ("time step", steps)] {
        let m = max_horizontal_velocity(&set)?;
        let d = successive_differences(&m);
        out.push(Check::flag(
            &format!("{what} refinement differences decrease"),
            monotone_decrease(&d),
            format!("max u_x {m:.5?}, differences {d:.5?}"),
        ));
    }
    Ok(out)
}

/// Bodies denser than the fluid sink, lighter ones rise; area conserved.
pub fn check_multi_solid(c: &ScenarioConfig) -> Result<Vec<Check>> {
    let trace = run_trace(c)?;
    let mut out = Vec::new();
    for (b, s) in c.solids.iter().enumerate() {
        let rho = s.density.unwrap_or(c.params.solid_density);
        let vy = trace.last(&format!("solid{}_vy", b + 1)).unwrap_or(f64::NAN);
        let expect = (rho - c.params.fluid_density).signum() * c.params.gravity[1].signum();
        if expect == 0.0 {
            continue;
        }
        out.push(Check::flag(
            &format!("solid {} moves with its buoyancy", b + 1),
            vy * expect > 0.0,
            format!("density {rho}, vertical velocity {vy:.4e}"),
        ));
    }
    out.push(Check::below("solid area drift", trace.max_area_drift(), 0.01));
    Ok(out)
}

/// The checks `ufem validate <name>` runs.
pub fn validate_builtin(name: &str, method: Option<ConvectionMethod>) -> Result<Vec<Check>> {
    let mut c = builtin_scenario(name).ok_or_else(|| Error::Config(format!("unknown builtin scenario '{name}'")))?;
    if let Some(m) = method {
        c = c.with_method(m);
    }
    match name {
        "falling_disc" => check_falling_disc(&c, 1, Some(1e12)),
        "leaflet_along" => check_leaflet_along(&c, None, 0.15),
        "cavity_disc" => {
            let mut soft = c.clone();
            soft.params.solid_shear_modulus = 1.0;
            let mut stiff = c.clone();
            stiff.params.solid_shear_modulus = 100.0;
            stiff.params.time_step = 1e-3;
            stiff.run.t_end = 1.0;
            let mut out = check_cavity_disc(&soft)?;
            out.extend(check_cavity_disc(&stiff)?);
            Ok(out)
        }
        "leaflet_across" => check_leaflet_across(&c, 0.5),
        "multi_solid" => check_multi_solid(&c),
        _ => Err(Error::Config(format!("no checks for '{name}'"))),
    }
}
