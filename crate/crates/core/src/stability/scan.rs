use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;

use super::{classify_with, BGrid, StabilityClass, StabilityError, Verdict};
use crate::dynamics::Scenario;
use crate::routing::PolicySpec;

/// A scalar policy parameter driven by a scan axis. Indices are 0-based; the
/// textual form is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamTarget {
    /// Two-server mode-responsive row `ψ^mode = (x, A − x)`.
    Split { mode: usize },
    /// A single entry `ψ_server^mode`.
    Psi { mode: usize, server: usize },
    /// Two-server piecewise-affine `θ = (x, A − x)`.
    ThetaSplit,
    /// Two-server logit `γ = (x, 0)`.
    GammaDiff,
    Theta { server: usize },
    Alpha { row: usize, col: usize },
    Gamma { server: usize },
    Beta { server: usize },
}

impl ParamTarget {
    pub fn apply(self, policy: &mut PolicySpec, demand: f64, x: f64) -> Result<(), StabilityError> {
        let wrong = |what: &str| {
            StabilityError::InvalidTarget(format!("{self} does not apply to {what}"))
        };
        fn slot<T>(v: &mut [T], i: usize, name: ParamTarget) -> Result<&mut T, StabilityError> {
            v.get_mut(i)
                .ok_or_else(|| StabilityError::InvalidTarget(format!("{name} is out of range")))
        }
        let family = policy.family();
        match (self, policy) {
            (ParamTarget::Split { mode }, PolicySpec::ModeResponsive { psi }) => {
                let row = slot(psi, mode, self)?;
                if row.len() != 2 {
                    return Err(wrong("more than two servers"));
                }
                *row = vec![x, demand - x];
            }
            (ParamTarget::Psi { mode, server }, PolicySpec::ModeResponsive { psi }) => {
                *slot(slot(psi, mode, self)?, server, self)? = x;
            }
            (ParamTarget::ThetaSplit, PolicySpec::PiecewiseAffine { theta, .. }) => {
                if theta.len() != 2 {
                    return Err(wrong("more than two servers"));
                }
                *theta = vec![x, demand - x];
            }
            (ParamTarget::GammaDiff, PolicySpec::Logit { gamma, .. }) => {
                if gamma.len() != 2 {
                    return Err(wrong("more than two servers"));
                }
                *gamma = vec![x, 0.0];
            }
            (ParamTarget::Theta { server }, PolicySpec::PiecewiseAffine { theta, .. }) => {
                *slot(theta, server, self)? = x;
            }
            (ParamTarget::Alpha { row, col }, PolicySpec::PiecewiseAffine { alpha, .. }) => {
                *slot(slot(alpha, row, self)?, col, self)? = x;
            }
            (ParamTarget::Gamma { server }, PolicySpec::Logit { gamma, .. }) => {
                *slot(gamma, server, self)? = x;
            }
            (ParamTarget::Beta { server }, PolicySpec::Logit { beta, .. }) => {
                *slot(beta, server, self)? = x;
            }
            _ => return Err(wrong(&format!("a {family} policy"))),
        }
        Ok(())
    }
}

impl fmt::Display for ParamTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ParamTarget::Split { mode } => write!(f, "split:{}", mode + 1),
            ParamTarget::Psi { mode, server } => write!(f, "psi:{}:{}", mode + 1, server + 1),
            ParamTarget::ThetaSplit => f.write_str("theta-split"),
            ParamTarget::GammaDiff => f.write_str("gamma-diff"),
            ParamTarget::Theta { server } => write!(f, "theta:{}", server + 1),
            ParamTarget::Alpha { row, col } => write!(f, "alpha:{}:{}", row + 1, col + 1),
            ParamTarget::Gamma { server } => write!(f, "gamma:{}", server + 1),
            ParamTarget::Beta { server } => write!(f, "beta:{}", server + 1),
        }
    }
}

impl FromStr for ParamTarget {
    type Err = StabilityError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || StabilityError::InvalidTarget(format!("unrecognized parameter `{s}`"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let idx = |p: &str| -> Result<usize, StabilityError> {
            match p.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(bad()),
            }
        };
        Ok(match parts.as_slice() {
            ["split", i] => ParamTarget::Split { mode: idx(i)? },
            ["psi", i, k] => ParamTarget::Psi {
                mode: idx(i)?,
                server: idx(k)?,
            },
            ["theta-split"] => ParamTarget::ThetaSplit,
            ["gamma-diff"] => ParamTarget::GammaDiff,
            ["theta", k] => ParamTarget::Theta { server: idx(k)? },
            ["alpha", k, h] => ParamTarget::Alpha {
                row: idx(k)?,
                col: idx(h)?,
            },
            ["gamma", k] => ParamTarget::Gamma { server: idx(k)? },
            ["beta", k] => ParamTarget::Beta { server: idx(k)? },
            _ => return Err(bad()),
        })
    }
}

/// One scan axis: every target is set to the same value at each point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanAxis {
    pub targets: Vec<ParamTarget>,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl ScanAxis {
    pub fn new(targets: Vec<ParamTarget>, lo: f64, hi: f64, points: usize) -> Result<Self, StabilityError> {
        if targets.is_empty() {
            return Err(StabilityError::InvalidTarget("axis has no parameters".into()));
        }
        if points == 0 || !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(StabilityError::InvalidTarget(format!(
                "axis range [{lo}, {hi}] with {points} points"
            )));
        }
        Ok(Self {
            targets,
            lo,
            hi,
            points,
        })
    }

    /// Evenly spaced values from `lo` to `hi` inclusive.
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points)
            .map(|j| {
                if j + 1 == self.points {
                    self.hi
                } else {
                    self.lo + step * j as f64
                }
            })
            .collect()
    }

    fn apply(&self, policy: &mut PolicySpec, demand: f64, x: f64) -> Result<(), StabilityError> {
        self.targets.iter().try_for_each(|t| t.apply(policy, demand, x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub x: ScanAxis,
    pub y: Option<ScanAxis>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanCell {
    pub x: f64,
    pub y: Option<f64>,
    /// The verdict, or the message of the error that stopped this cell.
    pub outcome: Result<Verdict, String>,
}

impl ScanCell {
    /// Error cells count as `Unknown`.
    pub fn class(&self) -> StabilityClass {
        match &self.outcome {
            Ok(v) => v.class,
            Err(_) => StabilityClass::Unknown,
        }
    }
}

/// Cells in row-major order: `y` outer, `x` inner.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    pub servers: usize,
    pub cells: Vec<ScanCell>,
}

impl ScanGrid {
    /// Columns `param1,param2,class,margin_1..margin_n,cert_b`. `param2` is
    /// empty for one-axis scans; margins are empty for error cells and
    /// `cert_b` is empty without a certificate.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "param1,param2,class")?;
        for k in 1..=self.servers {
            write!(w, ",margin_{k}")?;
        }
        writeln!(w, ",cert_b")?;
        for cell in &self.cells {
            write!(w, "{},", cell.x)?;
            if let Some(y) = cell.y {
                write!(w, "{y}")?;
            }
            write!(w, ",{}", cell.class())?;
            match &cell.outcome {
                Ok(v) => {
                    for m in &v.necessary_margins {
                        write!(w, ",{m}")?;
                    }
                    write!(w, ",")?;
                    if let Some(c) = &v.certificate {
                        write!(w, "{}", c.b)?;
                    }
                }
                Err(_) => {
                    for _ in 0..self.servers {
                        write!(w, ",")?;
                    }
                    write!(w, ",")?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn count(&self, class: StabilityClass) -> usize {
        self.cells.iter().filter(|c| c.class() == class).count()
    }
}

/// Classifies `template` with its policy parameters overridden at every grid
/// point. Rows are evaluated in parallel; per-cell failures are recorded and
/// the scan continues.
pub fn scan_region(template: &Scenario, spec: &ScanSpec, grid: &BGrid) -> ScanGrid {
    let xs = spec.x.values();
    let rows: Vec<Option<f64>> = match &spec.y {
        Some(axis) => axis.values().into_iter().map(Some).collect(),
        None => vec![None],
    };
    let cells = rows
        .par_iter()
        .flat_map_iter(|&y| {
            xs.iter()
                .map(move |&x| ScanCell {
                    x,
                    y,
                    outcome: evaluate_cell(template, spec, grid, x, y).map_err(|e| e.to_string()),
                })
                .collect::<Vec<_>>()
        })
        .collect();
    ScanGrid {
        servers: template.servers(),
        cells,
    }
}

fn evaluate_cell(
    template: &Scenario,
    spec: &ScanSpec,
    grid: &BGrid,
    x: f64,
    y: Option<f64>,
) -> Result<Verdict, String> {
    let mut policy = template.policy().clone();
    let demand = template.demand();
    spec.x.apply(&mut policy, demand, x).map_err(|e| e.to_string())?;
    if let (Some(axis), Some(y)) = (&spec.y, y) {
        axis.apply(&mut policy, demand, y).map_err(|e| e.to_string())?;
    }
    let scn = template.with_policy(policy).map_err(|e| e.to_string())?;
    classify_with(&scn, grid).map_err(|e| e.to_string())
}
