use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ufem::convection::ConvectionMethod;
use ufem::io::{write_fluid_vtk, write_report, write_solid_vtk, ProbeWriter, StepWriter};
use ufem::scenario::{ScenarioConfig, BUILTIN_NAMES};
use ufem::validate::validate_builtin;
use ufem::{Error, Result, Simulation};

#[derive(Parser)]
#[command(name = "ufem", version, about = "Unified finite element fluid-structure solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// least-squares convection
    Ls,
    /// Taylor-Galerkin convection
    Tg,
}

impl From<Method> for ConvectionMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Ls => ConvectionMethod::LeastSquares,
            Method::Tg => ConvectionMethod::TaylorGalerkin,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a built-in scenario or a TOML config file.
    Run {
        scenario: String,
        #[arg(long, allow_negative_numbers = true)]
        dt: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        tend: Option<f64>,
        #[arg(long, value_enum)]
        method: Option<Method>,
        /// Output directory (default: out/<scenario name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the scaled benchmark checks of a built-in scenario.
    Validate {
        name: String,
        #[arg(long, value_enum)]
        method: Option<Method>,
    },
    /// Plot the probe traces in a run directory as SVG with a summary table.
    Report { dir: PathBuf },
    /// Print the TOML config of a built-in scenario.
    Config { name: String },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, dt, tend, method, out } => run(&scenario, dt, tend, method, out),
        Command::Validate { name, method } => validate(&name, method),
        Command::Report { dir } => report(&dir),
        Command::Config { name } => config(&name),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}

fn run(scenario: &str, dt: Option<f64>, tend: Option<f64>, method: Option<Method>, out: Option<PathBuf>) -> Result<ExitCode> {
    let mut c = ScenarioConfig::load(scenario)?;
    if let Some(dt) = dt {
        c.params.time_step = dt;
    }
    if let Some(t) = tend {
        c.run.t_end = t;
    }
    if let Some(m) = method {
        c = c.with_method(m.into());
    }
    c.validate()?;
    let out = out.unwrap_or_else(|| Path::new("out").join(&c.name));
    fs::create_dir_all(&out)?;
    fs::write(out.join("config.toml"), c.to_toml_string()?)?;

    let mut sim = c.build()?;
    log::info!(
        "{}: {} cells, {} velocity nodes, {} solid triangles, dt = {}, t_end = {}",
        c.name,
        sim.fluid.num_cells(),
        sim.fluid.num_velocity_nodes(),
        sim.solid.num_triangles(),
        c.params.time_step,
        c.run.t_end
    );
    let columns: Vec<String> = sim.probes.iter().flat_map(|p| p.columns()).collect();
    let mut probes = ProbeWriter::create(&out.join("probes.csv"), &columns)?;
    let mut steps = StepWriter::create(&out.join("steps.csv"))?;
    let s = sim.sample();
    probes.push(0, s.time, &s.values)?;

    let every = c.run.output_every.max(1) as u64;
    let fields_every = c.run.fields_every as u64;
    let mut failure: Option<Error> = None;
    let outcome = sim.run(c.run.t_end, c.run.budget_seconds, |sim, r| {
        if failure.is_some() {
            return;
        }
        let mut write = || -> Result<()> {
            steps.push(r)?;
            if r.step % every == 0 {
                let s = sim.sample();
                probes.push(r.step, s.time, &s.values)?;
                log::info!("step {} t = {:.5} divergence {:.2e} area drift {:.2e}", r.step, r.time, r.divergence, r.area_drift);
            }
            if fields_every > 0 && r.step % fields_every == 0 {
                write_fields(sim, &out, &format!("{:06}", r.step))?;
            }
            Ok(())
        };
        if let Err(e) = write() {
            failure = Some(e);
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let written = write_fields(&sim, &out, "final");
    outcome?;
    written?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn write_fields(sim: &Simulation, dir: &Path, tag: &str) -> Result<()> {
    write_fluid_vtk(&dir.join(format!("fluid_{tag}.vtk")), &sim.fluid, &sim.state.velocity, &sim.state.pressure)?;
    if sim.solid.num_nodes() > 0 {
        write_solid_vtk(&dir.join(format!("solid_{tag}.vtk")), &sim.solid, &sim.state.solid_velocity)?;
    }
    Ok(())
}

fn validate(name: &str, method: Option<Method>) -> Result<ExitCode> {
    if !BUILTIN_NAMES.contains(&name) {
        return Err(Error::Config(format!("unknown builtin '{name}'; expected one of {}", BUILTIN_NAMES.join(", "))));
    }
    let checks = validate_builtin(name, method.map(Into::into))?;
    for c in &checks {
        println!("{c}");
    }
    Ok(if checks.iter().all(|c| c.passed) { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn report(dir: &Path) -> Result<ExitCode> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("{} is not a directory", dir.display())));
    }
    for p in write_report(dir)? {
        println!("{}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn config(name: &str) -> Result<ExitCode> {
    print!("{}", ScenarioConfig::load(name)?.to_toml_string()?);
    Ok(ExitCode::SUCCESS)
}
