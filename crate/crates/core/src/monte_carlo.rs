//! Monte Carlo checks of analytic verdicts: ensemble statistics, time-average
//! identities, a windowed stationarity diagnostic and numeric drift checks of
//! Lyapunov certificates.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::{simulate_trajectory, DynamicsError, IntegratorConfig, Scenario, Trajectory};
use crate::routing::PolicyError;
use crate::stability::{limiting_inflows, StabilityCertificate, StabilityError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MonteCarloError {
    #[error("no seeds given")]
    NoSeeds,
    #[error("seed {seed}: {source}")]
    Simulation { seed: u64, source: DynamicsError },
    #[error("window {window} holds {samples} samples, need at least {needed}")]
    TooShort {
        window: usize,
        samples: usize,
        needed: usize,
    },
    #[error("need at least 2 windows, got {0}")]
    WindowCount(usize),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Minimum number of samples each diagnostic window must hold.
pub const MIN_WINDOW_SAMPLES: usize = 10;

/// Per-queue binning for the stationarity diagnostic: bins of `width` on
/// `[0, max)` and one overflow bin beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueBins {
    pub width: f64,
    pub max: f64,
}

impl Default for QueueBins {
    fn default() -> Self {
        Self {
            width: 0.5,
            max: 50.0,
        }
    }
}

impl QueueBins {
    fn bin(&self, q: f64) -> u32 {
        if q >= self.max {
            (self.max / self.width).ceil() as u32
        } else {
            (q / self.width).floor() as u32
        }
    }
}

type Histogram = BTreeMap<(usize, Vec<u32>), u64>;

/// Empirical distributions of `(mode, binned queue)` over equal windows of
/// the second half of the trajectory, built from the sample events.
fn window_histograms(
    traj: &Trajectory,
    window_count: usize,
    bins: &QueueBins,
) -> Result<Vec<Histogram>, MonteCarloError> {
    if window_count < 2 {
        return Err(MonteCarloError::WindowCount(window_count));
    }
    let start = traj.horizon / 2.0;
    let len = (traj.horizon - start) / window_count as f64;
    let mut hists = vec![Histogram::new(); window_count];
    for s in traj.samples().filter(|s| s.time >= start) {
        let w = (((s.time - start) / len) as usize).min(window_count - 1);
        let key = (s.mode, s.queue.iter().map(|q| bins.bin(*q)).collect());
        *hists[w].entry(key).or_insert(0) += 1;
    }
    Ok(hists)
}

fn check_window_sizes(hists: &[Histogram]) -> Result<(), MonteCarloError> {
    for (window, h) in hists.iter().enumerate() {
        let samples = h.values().sum::<u64>() as usize;
        if samples < MIN_WINDOW_SAMPLES {
            return Err(MonteCarloError::TooShort {
                window,
                samples,
                needed: MIN_WINDOW_SAMPLES,
            });
        }
    }
    Ok(())
}

fn total_variation(a: &Histogram, b: &Histogram) -> f64 {
    let na = a.values().sum::<u64>() as f64;
    let nb = b.values().sum::<u64>() as f64;
    let mut sum = 0.0;
    for (k, &ca) in a {
        let cb = b.get(k).copied().unwrap_or(0);
        sum += (ca as f64 / na - cb as f64 / nb).abs();
    }
    for (k, &cb) in b {
        if !a.contains_key(k) {
            sum += cb as f64 / nb;
        }
    }
    0.5 * sum
}

fn max_pairwise_tv(hists: &[Histogram]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..hists.len() {
        for j in i + 1..hists.len() {
            worst = worst.max(total_variation(&hists[i], &hists[j]));
        }
    }
    worst
}

/// Largest total-variation distance between the empirical distributions of
/// `(mode, binned queue)` on `window_count` equal windows of the second half
/// of the trajectory.
pub fn stationarity_diagnostic(
    traj: &Trajectory,
    window_count: usize,
    bins: &QueueBins,
) -> Result<f64, MonteCarloError> {
    let hists = window_histograms(traj, window_count, bins)?;
    check_window_sizes(&hists)?;
    Ok(max_pairwise_tv(&hists))
}

/// Least-squares slope of each queue over the samples in the second half of
/// the horizon.
pub fn growth_rates(traj: &Trajectory) -> Vec<f64> {
    let n = traj.servers();
    let start = traj.horizon / 2.0;
    let pts: Vec<_> = traj.samples().filter(|s| s.time >= start).collect();
    if pts.len() < 2 {
        return vec![0.0; n];
    }
    let len = pts.len() as f64;
    let t_mean = pts.iter().map(|s| s.time).sum::<f64>() / len;
    let stt: f64 = pts.iter().map(|s| (s.time - t_mean).powi(2)).sum();
    (0..n)
        .map(|k| {
            let q_mean = pts.iter().map(|s| s.queue[k]).sum::<f64>() / len;
            pts.iter()
                .map(|s| (s.time - t_mean) * (s.queue[k] - q_mean))
                .sum::<f64>()
                / stt
        })
        .collect()
}

/// Time averages along one trajectory, compared with the identities used in
/// the proof of the necessary condition.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAverageReport {
    /// Empirical mode occupancy `p̂`.
    pub occupancy: Vec<f64>,
    /// `(1/t)∫ U_k ds`, integrated over the mode path.
    pub mean_saturation: Vec<f64>,
    /// `Σ_i p̂_i u_k^i`.
    pub occupancy_saturation: Vec<f64>,
    /// `(1/t)∫ φ_k ds`.
    pub mean_inflow: Vec<f64>,
    /// `Σ_i p̂_i φ_kk^i`, the lower bound for `mean_inflow`.
    pub inflow_lower_bound: Vec<f64>,
    /// `mean_inflow − inflow_lower_bound`.
    pub slack: Vec<f64>,
    /// `(Q_k(t) − Q_k(0))/t`.
    pub queue_drift: Vec<f64>,
}

impl TimeAverageReport {
    pub fn saturation_gap(&self) -> f64 {
        self.mean_saturation
            .iter()
            .zip(&self.occupancy_saturation)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_slack(&self) -> f64 {
        self.slack.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn time_average_check(
    traj: &Trajectory,
    scn: &Scenario,
) -> Result<TimeAverageReport, MonteCarloError> {
    let n = scn.servers();
    let m = scn.modes();
    let t = traj.horizon;
    let path = traj.mode_path();
    let mut mean_saturation = vec![0.0; n];
    for (z, &mode) in path.modes.iter().enumerate() {
        let end = path.epochs.get(z + 1).copied().unwrap_or(t);
        let dt = end - path.epochs[z];
        for (acc, u) in mean_saturation.iter_mut().zip(scn.saturation(mode)) {
            *acc += u * dt / t;
        }
    }
    let occupancy: Vec<f64> = traj.occupancy_time.iter().map(|x| x / t).collect();
    let (lim, _) = limiting_inflows(scn)?;
    let occupancy_saturation = (0..n)
        .map(|k| (0..m).map(|i| occupancy[i] * scn.saturation(i)[k]).sum())
        .collect();
    let mean_inflow: Vec<f64> = traj.inflow_integral.iter().map(|x| x / t).collect();
    let inflow_lower_bound: Vec<f64> = (0..n)
        .map(|k| (0..m).map(|i| occupancy[i] * lim.get(i, k, k)).sum())
        .collect();
    let slack = mean_inflow
        .iter()
        .zip(&inflow_lower_bound)
        .map(|(a, b)| a - b)
        .collect();
    let queue_drift = traj
        .final_queue()
        .iter()
        .zip(traj.initial_queue())
        .map(|(a, b)| (a - b) / t)
        .collect();
    Ok(TimeAverageReport {
        occupancy,
        mean_saturation,
        occupancy_saturation,
        mean_inflow,
        inflow_lower_bound,
        slack,
        queue_drift,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub horizon: f64,
    pub sample_dt: f64,
    pub initial_mode: usize,
    /// Zero queues when `None`.
    pub initial_queue: Option<Vec<f64>>,
    pub window_count: usize,
    pub bins: QueueBins,
    pub integrator: IntegratorConfig,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            horizon: 1e4,
            sample_dt: 1.0,
            initial_mode: 0,
            initial_queue: None,
            window_count: 4,
            bins: QueueBins::default(),
            integrator: IntegratorConfig::default(),
        }
    }
}

/// Statistics of a single trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedStats {
    pub seed: u64,
    pub occupancy: Vec<f64>,
    pub mean_inflow: Vec<f64>,
    /// Time-average discharge, `mean_inflow − (Q(t) − Q(0))/t`.
    pub mean_discharge: Vec<f64>,
    pub growth_rates: Vec<f64>,
    pub max_queue: Vec<f64>,
    /// `None` when a window is too short.
    pub stationarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub seeds: Vec<u64>,
    pub horizon: f64,
    /// Means over seeds.
    pub occupancy: Vec<f64>,
    pub mean_inflow: Vec<f64>,
    pub mean_discharge: Vec<f64>,
    pub growth_rates: Vec<f64>,
    /// Maxima over seeds.
    pub max_queue: Vec<f64>,
    /// Standard error of the per-seed mean discharge.
    pub discharge_std_error: Vec<f64>,
    /// Diagnostic on window distributions pooled over all seeds.
    pub stationarity: Option<f64>,
    pub per_seed: Vec<SeedStats>,
}

impl EnsembleStats {
    /// `Σ_i p̂_i u_k^i` with the ensemble occupancy.
    pub fn mean_saturation(&self, scn: &Scenario) -> Vec<f64> {
        (0..scn.servers())
            .map(|k| {
                self.occupancy
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p * scn.saturation(i)[k])
                    .sum()
            })
            .collect()
    }

    /// Columns `seed,horizon,occupancy_1..m,mean_inflow_1..n,
    /// mean_discharge_1..n,growth_rate_1..n,max_queue_1..n,stationarity`;
    /// one row per seed, then a `summary` row with the ensemble values.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let m = self.occupancy.len();
        let n = self.mean_inflow.len();
        write!(w, "seed,horizon")?;
        for i in 1..=m {
            write!(w, ",occupancy_{i}")?;
        }
        for name in ["mean_inflow", "mean_discharge", "growth_rate", "max_queue"] {
            for k in 1..=n {
                write!(w, ",{name}_{k}")?;
            }
        }
        writeln!(w, ",stationarity")?;
        let row = |w: &mut W, label: &str, cols: [&[f64]; 5], stat: Option<f64>| -> io::Result<()> {
            write!(w, "{label},{}", self.horizon)?;
            for col in cols {
                for x in col {
                    write!(w, ",{x}")?;
                }
            }
            write!(w, ",")?;
            if let Some(s) = stat {
                write!(w, "{s}")?;
            }
            writeln!(w)
        };
        for s in &self.per_seed {
            let cols = [
                &s.occupancy[..],
                &s.mean_inflow,
                &s.mean_discharge,
                &s.growth_rates,
                &s.max_queue,
            ];
            row(&mut w, &s.seed.to_string(), cols, s.stationarity)?;
        }
        let cols = [
            &self.occupancy[..],
            &self.mean_inflow,
            &self.mean_discharge,
            &self.growth_rates,
            &self.max_queue,
        ];
        row(&mut w, "summary", cols, self.stationarity)
    }
}

fn seed_stats(
    scn: &Scenario,
    seed: u64,
    cfg: &EnsembleConfig,
) -> Result<(SeedStats, Vec<Histogram>), MonteCarloError> {
    let q0 = cfg
        .initial_queue
        .clone()
        .unwrap_or_else(|| vec![0.0; scn.servers()]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traj = simulate_trajectory(
        scn,
        cfg.initial_mode,
        &q0,
        cfg.horizon,
        cfg.sample_dt,
        &mut rng,
        &cfg.integrator,
    )
    .map_err(|source| MonteCarloError::Simulation { seed, source })?;
    let t = traj.horizon;
    let mean_inflow: Vec<f64> = traj.inflow_integral.iter().map(|x| x / t).collect();
    let mean_discharge = mean_inflow
        .iter()
        .zip(traj.final_queue().iter().zip(traj.initial_queue()))
        .map(|(f, (q1, q0))| f - (q1 - q0) / t)
        .collect();
    let mut max_queue = vec![0.0f64; scn.servers()];
    for e in &traj.events {
        for (mx, q) in max_queue.iter_mut().zip(&e.queue) {
            *mx = mx.max(*q);
        }
    }
    let hists = window_histograms(&traj, cfg.window_count, &cfg.bins)?;
    let stationarity = check_window_sizes(&hists)
        .ok()
        .map(|_| max_pairwise_tv(&hists));
    let stats = SeedStats {
        seed,
        occupancy: traj.occupancy_time.iter().map(|x| x / t).collect(),
        mean_inflow,
        mean_discharge,
        growth_rates: growth_rates(&traj),
        max_queue,
        stationarity,
    };
    Ok((stats, hists))
}

fn column_mean(rows: &[&[f64]]) -> Vec<f64> {
    let len = rows.len() as f64;
    (0..rows[0].len())
        .map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / len)
        .collect()
}

/// Simulates one trajectory per seed (in parallel) from the configured
/// initial state and aggregates in seed order.
pub fn run_ensemble(
    scn: &Scenario,
    seeds: &[u64],
    cfg: &EnsembleConfig,
) -> Result<EnsembleStats, MonteCarloError> {
    if seeds.is_empty() {
        return Err(MonteCarloError::NoSeeds);
    }
    let results: Vec<_> = seeds.par_iter().map(|&s| seed_stats(scn, s, cfg)).collect();
    let mut per_seed = Vec::with_capacity(seeds.len());
    let mut pooled: Vec<Histogram> = vec![Histogram::new(); cfg.window_count];
    for r in results {
        let (stats, hists) = r?;
        for (acc, h) in pooled.iter_mut().zip(hists) {
            for (k, c) in h {
                *acc.entry(k).or_insert(0) += c;
            }
        }
        per_seed.push(stats);
    }
    let pick = |f: fn(&SeedStats) -> &[f64]| -> Vec<&[f64]> { per_seed.iter().map(f).collect() };
    let mean_discharge = column_mean(&pick(|s| &s.mean_discharge));
    let discharge_std_error = (0..scn.servers())
        .map(|k| {
            let len = per_seed.len() as f64;
            if per_seed.len() < 2 {
                return 0.0;
            }
            let var = per_seed
                .iter()
                .map(|s| (s.mean_discharge[k] - mean_discharge[k]).powi(2))
                .sum::<f64>()
                / (len - 1.0);
            (var / len).sqrt()
        })
        .collect();
    let max_queue = (0..scn.servers())
        .map(|k| per_seed.iter().map(|s| s.max_queue[k]).fold(0.0, f64::max))
        .collect();
    let stationarity = check_window_sizes(&pooled)
        .ok()
        .map(|_| max_pairwise_tv(&pooled));
    Ok(EnsembleStats {
        seeds: seeds.to_vec(),
        horizon: cfg.horizon,
        occupancy: column_mean(&pick(|s| &s.occupancy)),
        mean_inflow: column_mean(&pick(|s| &s.mean_inflow)),
        mean_discharge,
        growth_rates: column_mean(&pick(|s| &s.growth_rates)),
        max_queue,
        discharge_std_error,
        stationarity,
        per_seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftViolation {
    pub mode: usize,
    pub queue: Vec<f64>,
    /// `L V(i, q)`.
    pub generator: f64,
    /// `−c V(i, q) + d`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftReport {
    pub checked: usize,
    pub c: f64,
    pub d: f64,
    pub violations: Vec<DriftViolation>,
}

impl DriftReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Grid resolution per axis for [`estimate_drift_constant`], chosen so the
/// box holds at most about `10⁵` points per mode.
fn box_points(servers: usize) -> usize {
    let per_axis = (1e5f64).powf(1.0 / servers as f64).floor() as usize;
    per_axis.clamp(2, 41)
}

/// `d = max_{i, q ∈ [0, q_box]^n} max(0, L V(i, q) + c V(i, q))` over a
/// regular grid of the box.
pub fn estimate_drift_constant(
    scn: &Scenario,
    cert: &StabilityCertificate,
    q_box: f64,
) -> Result<f64, MonteCarloError> {
    let n = scn.servers();
    let pts = box_points(n);
    let step = q_box / (pts - 1) as f64;
    let mut idx = vec![0usize; n];
    let mut q = vec![0.0; n];
    let mut d = 0.0f64;
    loop {
        for (x, i) in q.iter_mut().zip(&idx) {
            *x = *i as f64 * step;
        }
        for mode in 0..scn.modes() {
            let lv = scn.generator_apply(&cert.a, cert.b, mode, &q)?;
            let v = Scenario::lyapunov_value(&cert.a, cert.b, mode, &q);
            d = d.max(lv + cert.c * v);
        }
        let mut k = 0;
        while k < n {
            idx[k] += 1;
            if idx[k] < pts {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    Ok(d)
}

/// Random states for drift checks: each coordinate is zero with probability
/// 0.2 and otherwise uniform on `[0, q_max)`; modes are uniform.
pub fn random_states(
    scn: &Scenario,
    count: usize,
    q_max: f64,
    seed: u64,
) -> Vec<(usize, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mode = rng.gen_range(0..scn.modes());
            let q = (0..scn.servers())
                .map(|_| {
                    if rng.gen_bool(0.2) {
                        0.0
                    } else {
                        rng.gen_range(0.0..q_max)
                    }
                })
                .collect();
            (mode, q)
        })
        .collect()
}

/// Checks `L V ≤ −c V + d` at each state, with a relative slack of `1e-9`.
pub fn drift_check(
    scn: &Scenario,
    cert: &StabilityCertificate,
    states: &[(usize, Vec<f64>)],
    c: f64,
    d: f64,
) -> Result<DriftReport, MonteCarloError> {
    let mut violations = Vec::new();
    for (mode, q) in states {
        let lv = scn.generator_apply(&cert.a, cert.b, *mode, q)?;
        let v = Scenario::lyapunov_value(&cert.a, cert.b, *mode, q);
        let bound = -c * v + d;
        if lv > bound + 1e-9 * v.max(1.0) {
            violations.push(DriftViolation {
                mode: *mode,
                queue: q.clone(),
                generator: lv,
                bound,
            });
        }
    }
    Ok(DriftReport {
        checked: states.len(),
        c,
        d,
        violations,
    })
}
