//! `pdq`: command-line front end for PDQ simulation and stability analysis.
//!
//! Exit status is 0 on success, 1 on domain errors (invalid scenarios,
//! simulation failures, I/O) and 2 on usage errors.

mod reproduce;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pdq_core::bundled;
use pdq_core::dynamics::{simulate_trajectory, IntegratorConfig};
use pdq_core::monte_carlo::{
    drift_check, estimate_drift_constant, random_states, run_ensemble, EnsembleConfig,
};
use pdq_core::scenario_file::{parse_scenario, ScenarioFile, SimulationConfig};
use pdq_core::stability::{classify, scan_region, BGrid, LimitsSource, VerdictBasis};

use crate::reproduce::Target;

#[derive(Parser)]
#[command(name = "pdq", version, about = "Piecewise-deterministic queueing: simulation and stability analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scenario file
    Validate { file: PathBuf },
    /// Print the steady-state distribution of the mode chain
    SteadyState { file: PathBuf },
    /// Simulate one trajectory and write it as CSV
    Simulate {
        file: PathBuf,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        sample_dt: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify the scenario and print margins and certificate
    Check {
        file: PathBuf,
        /// Also spot-check the drift inequality of the certificate
        #[arg(long)]
        drift: bool,
    },
    /// Classify every point of the scenario's [scan] grid
    Scan {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo ensemble and write per-seed statistics
    Ensemble {
        file: PathBuf,
        /// Use seeds 0..K instead of the file's seed list
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate the CSV artifacts for one of the example tables or figure
    Reproduce {
        target: Target,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

/// Caps the worker pool at `PDQ_THREADS` when set.
fn configure_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var("PDQ_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("PDQ_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// Reads a scenario from disk, falling back to a bundled file of that name.
fn load(path: &Path) -> Result<ScenarioFile> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => match path.to_str().and_then(bundled::text) {
            Some(t) if !path.exists() => t.to_string(),
            _ => return Err(e).with_context(|| format!("cannot read {}", path.display())),
        },
    };
    parse_scenario(&text).with_context(|| format!("invalid scenario {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Validate { file } => {
            let f = load(&file)?;
            let scn = &f.scenario;
            println!(
                "ok: {} modes, {} servers, {} policy, demand {}",
                scn.modes(),
                scn.servers(),
                scn.policy().family(),
                scn.demand()
            );
        }
        Command::SteadyState { file } => {
            let f = load(&file)?;
            let p = f.scenario.chain().steady_state()?;
            for (i, x) in p.probabilities().iter().enumerate() {
                println!("p_{} = {x}", i + 1);
            }
        }
        Command::Simulate {
            file,
            horizon,
            seed,
            sample_dt,
            out,
        } => {
            let f = load(&file)?;
            let scn = &f.scenario;
            let sim = f
                .simulation
                .clone()
                .unwrap_or_else(|| SimulationConfig::defaults(scn.servers()));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let traj = simulate_trajectory(
                scn,
                sim.initial_mode,
                &sim.initial_queue,
                horizon.unwrap_or(sim.horizon),
                sample_dt.unwrap_or(sim.sample_dt),
                &mut rng,
                &IntegratorConfig::default(),
            )?;
            let mut w = create(&out)?;
            traj.write_csv(&mut w)?;
            w.flush()?;
            println!("wrote {} events to {}", traj.events.len(), out.display());
        }
        Command::Check { file, drift } => check(&load(&file)?, drift)?,
        Command::Scan { file, out } => {
            let f = load(&file)?;
            let Some(spec) = &f.scan else {
                bail!("{} has no [scan] section", file.display());
            };
            let grid = scan_region(&f.scenario, spec, &BGrid::default());
            let mut w = create(&out)?;
            grid.write_csv(&mut w)?;
            w.flush()?;
            let failed = grid.cells.iter().filter(|c| c.outcome.is_err()).count();
            println!("wrote {} cells to {}", grid.cells.len(), out.display());
            if failed > 0 {
                eprintln!("warning: {failed} cells failed and are reported as Unknown");
            }
        }
        Command::Ensemble {
            file,
            seeds,
            horizon,
            out,
        } => {
            let f = load(&file)?;
            let sim = f
                .simulation
                .clone()
                .unwrap_or_else(|| SimulationConfig::defaults(f.scenario.servers()));
            let seeds: Vec<u64> = match seeds {
                Some(k) => (0..k).collect(),
                None => sim.seeds.clone(),
            };
            let cfg = EnsembleConfig {
                horizon: horizon.unwrap_or(sim.horizon),
                sample_dt: sim.sample_dt,
                initial_mode: sim.initial_mode,
                initial_queue: Some(sim.initial_queue.clone()),
                ..EnsembleConfig::default()
            };
            let stats = run_ensemble(&f.scenario, &seeds, &cfg)?;
            let mut w = create(&out)?;
            stats.write_csv(&mut w)?;
            w.flush()?;
            println!("occupancy: {}", join(&stats.occupancy));
            println!("growth rates: {}", join(&stats.growth_rates));
            match stats.stationarity {
                Some(s) => println!("stationarity: {s}"),
                None => println!("stationarity: n/a (horizon too short)"),
            }
            println!("wrote {} seeds to {}", seeds.len(), out.display());
        }
        Command::Reproduce { target, out } => {
            fs::create_dir_all(&out).with_context(|| format!("cannot create {}", out.display()))?;
            for path in reproduce::run(target, &out)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn check(f: &ScenarioFile, drift: bool) -> Result<()> {
    let scn = &f.scenario;
    let v = classify(scn)?;
    println!("{}", v.class);
    println!("necessary margins: {}", join(&v.necessary_margins));
    println!(
        "limiting inflows: {}",
        match v.limits_source {
            LimitsSource::Analytic => "analytic",
            LimitsSource::Numeric => "numeric",
        }
    );
    match v.nominal_mode {
        Some(i) => println!("nominal mode: {}", i + 1),
        None => println!("nominal mode: none"),
    }
    match v.basis {
        Some(VerdictBasis::Certificate) => println!("basis: Lyapunov certificate"),
        Some(VerdictBasis::TwoModeModeResponsive) => {
            println!("basis: exact two-mode band for queue-independent routing")
        }
        None => {}
    }
    if let Some(cert) = &v.certificate {
        println!("certificate: b = {}", cert.b);
        println!("certificate: a = {}", join(&cert.a));
        println!("certificate: c = {}", cert.c);
        if let Some((lo, hi)) = v.feasible_b {
            println!("feasible b: [{lo}, {hi}]");
        }
        if drift {
            let d = estimate_drift_constant(scn, cert, 10.0)?;
            let states = random_states(scn, 1000, 20.0, 0);
            let report = drift_check(scn, cert, &states, cert.c, d)?;
            println!(
                "drift check: {} of {} states violate L V <= -c V + d (d = {d})",
                report.violations.len(),
                report.checked
            );
        }
    }
    Ok(())
}
