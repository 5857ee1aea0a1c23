use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;

use pdq_core::bundled;
use pdq_core::routing::PolicySpec;
use pdq_core::stability::{scan_region, BGrid, ScanGrid, StabilityClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    /// Two modes, piecewise-affine routing
    Table1,
    /// Two modes, logit routing
    Table2,
    /// Three modes, piecewise-affine routing
    Table3,
    /// Three modes, logit routing
    Table4,
    /// Three modes, mode-responsive routing over (ψ_1^1, ψ_1^2)
    Fig2,
}

impl Target {
    fn name(self) -> &'static str {
        match self {
            Target::Table1 => "table1",
            Target::Table2 => "table2",
            Target::Table3 => "table3",
            Target::Table4 => "table4",
            Target::Fig2 => "fig2",
        }
    }
}

/// The four sign patterns of the queue-sensitivity parameters; "positive"
/// is represented by 1.
const SIGN_CASES: [(f64, f64); 4] = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)];

fn write_grid(grid: &ScanGrid, path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut w = BufWriter::new(f);
    grid.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn extent(grid: &ScanGrid, keep: impl Fn(StabilityClass) -> bool) -> (String, String) {
    let xs = grid.cells.iter().filter(|c| keep(c.class())).map(|c| c.x);
    let lo = xs.clone().reduce(f64::min);
    let hi = xs.reduce(f64::max);
    let show = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    (show(lo), show(hi))
}

/// One-axis table: a scan per sign case plus a summary of the extent of the
/// not-Unstable and Stable sets.
fn table(target: Target, out: &Path) -> Result<Vec<PathBuf>> {
    let (file, names, logit) = match target {
        Target::Table1 => ("twomode_pwa", ("alpha1", "alpha2"), false),
        Target::Table2 => ("twomode_logit", ("beta1", "beta2"), true),
        Target::Table3 => ("threemode_pwa", ("alpha1", "alpha2"), false),
        Target::Table4 => ("threemode_logit", ("beta1", "beta2"), true),
        Target::Fig2 => unreachable!("not a table"),
    };
    let base = bundled::load(file);
    let spec = base.scan.as_ref().expect("bundled table scenarios define a scan");
    let demand = base.scenario.demand();
    let mut written = Vec::new();
    let mut summary = format!(
        "case,{},{},scan_min,scan_max,necessary_min,necessary_max,sufficient_min,sufficient_max\n",
        names.0, names.1
    );
    for (idx, &(s1, s2)) in SIGN_CASES.iter().enumerate() {
        let policy = if logit {
            PolicySpec::Logit {
                gamma: vec![0.0, 0.0],
                beta: vec![s1, s2],
            }
        } else {
            PolicySpec::pwa_two_server(demand, 0.5, s1, s2)
        };
        let scn = base.scenario.with_policy(policy)?;
        let grid = scan_region(&scn, spec, &BGrid::default());
        let path = out.join(format!("{}_case{}.csv", target.name(), idx + 1));
        write_grid(&grid, &path)?;
        written.push(path);
        let (n_lo, n_hi) = extent(&grid, |c| c != StabilityClass::Unstable);
        let (s_lo, s_hi) = extent(&grid, |c| c == StabilityClass::Stable);
        summary.push_str(&format!(
            "{},{s1},{s2},{},{},{n_lo},{n_hi},{s_lo},{s_hi}\n",
            idx + 1,
            spec.x.lo,
            spec.x.hi
        ));
    }
    let path = out.join(format!("{}.csv", target.name()));
    std::fs::write(&path, summary).with_context(|| format!("cannot write {}", path.display()))?;
    written.push(path);
    Ok(written)
}

/// Runs one reproduction recipe and returns the files written, in order.
pub fn run(target: Target, out: &Path) -> Result<Vec<PathBuf>> {
    match target {
        Target::Fig2 => {
            let base = bundled::load("threemode_mode_responsive");
            let spec = base.scan.as_ref().expect("bundled fig2 scenario defines a scan");
            let grid = scan_region(&base.scenario, spec, &BGrid::default());
            let path = out.join("fig2.csv");
            write_grid(&grid, &path)?;
            Ok(vec![path])
        }
        t => table(t, out),
    }
}
