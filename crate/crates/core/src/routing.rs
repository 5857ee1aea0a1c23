//! State-feedback routing policies `φ(i, q)`.
//!
//! Three built-in families are provided (mode-responsive, piecewise-affine and
//! logit) plus a [`CustomPolicy`] extension point. Admissible policies split
//! the demand `A` exactly, and the queue-monotonicity property (inflow to a
//! server is non-increasing in its own queue and non-decreasing in the others)
//! guarantees that the limiting inflows `φ_kh^i = lim_{q_h→∞} φ_k(i, q_h e_h)`
//! exist.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolicyError {
    #[error("queue vector has negative entry {value} at server {}", .server + 1)]
    InvalidQueue { server: usize, value: f64 },
    #[error("policy parameter {name} has wrong dimension: expected {expected}, got {got}")]
    Dimension {
        name: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("policy parameter {name} is invalid: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("closed-form limiting inflows are not available for custom policy `{0}`")]
    UnsupportedPolicy(String),
    #[error("limiting inflow in mode {}, direction {} did not converge", .mode + 1, .direction + 1)]
    NoConvergence { mode: usize, direction: usize },
}

type Evaluator = dyn Fn(usize, &[f64], &mut [f64]) + Send + Sync;

/// Externally supplied routing map `(mode, q) -> inflow`. The closure writes
/// into the output slice and must be a pure function of its inputs.
#[derive(Clone)]
pub struct CustomPolicy {
    name: String,
    eval: Arc<Evaluator>,
}

impl CustomPolicy {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(usize, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            eval: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for CustomPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPolicy").field("name", &self.name).finish()
    }
}

impl PartialEq for CustomPolicy {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.eval, &other.eval)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    /// `φ(i, q) = ψ^i`; `psi` is `m × n`.
    ModeResponsive { psi: Vec<Vec<f64>> },
    /// `φ_k = min{A, (θ_k − α_kk q_k + Σ_{h≠k} α_kh q_h)_+}`; `alpha` is `n × n`.
    PiecewiseAffine { theta: Vec<f64>, alpha: Vec<Vec<f64>> },
    /// `φ_k = A exp(γ_k − β_k q_k) / Σ_h exp(γ_h − β_h q_h)`.
    Logit { gamma: Vec<f64>, beta: Vec<f64> },
    Custom(CustomPolicy),
}

impl PolicySpec {
    /// Two-server piecewise-affine policy with `θ = (θ_1, A − θ_1)`.
    ///
    /// Admissibility forces both rows of `α` to share each column: `α_1` is the
    /// weight on `q_1` and `α_2` the weight on `q_2` in both inflows.
    pub fn pwa_two_server(demand: f64, theta1: f64, alpha1: f64, alpha2: f64) -> Self {
        PolicySpec::PiecewiseAffine {
            theta: vec![theta1, demand - theta1],
            alpha: vec![vec![alpha1, alpha2], vec![alpha1, alpha2]],
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            PolicySpec::ModeResponsive { .. } => "mode-responsive",
            PolicySpec::PiecewiseAffine { .. } => "piecewise-affine",
            PolicySpec::Logit { .. } => "logit",
            PolicySpec::Custom(_) => "custom",
        }
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self, PolicySpec::Custom(_))
    }

    /// Checks parameter dimensions against `m` modes and `n` servers and the
    /// sign constraints of each family.
    pub fn validate_shape(&self, m: usize, n: usize) -> Result<(), PolicyError> {
        fn dim(name: &'static str, expected: usize, got: usize) -> Result<(), PolicyError> {
            if expected != got {
                return Err(PolicyError::Dimension { name, expected, got });
            }
            Ok(())
        }
        fn finite(name: &'static str, xs: &[f64]) -> Result<(), PolicyError> {
            if xs.iter().any(|x| !x.is_finite()) {
                return Err(PolicyError::InvalidParameter {
                    name,
                    reason: "non-finite value".into(),
                });
            }
            Ok(())
        }
        fn nonneg(name: &'static str, xs: &[f64]) -> Result<(), PolicyError> {
            finite(name, xs)?;
            if let Some(x) = xs.iter().find(|x| **x < 0.0) {
                return Err(PolicyError::InvalidParameter {
                    name,
                    reason: format!("negative value {x}"),
                });
            }
            Ok(())
        }
        match self {
            PolicySpec::ModeResponsive { psi } => {
                dim("psi rows", m, psi.len())?;
                for row in psi {
                    dim("psi columns", n, row.len())?;
                    nonneg("psi", row)?;
                }
            }
            PolicySpec::PiecewiseAffine { theta, alpha } => {
                dim("theta", n, theta.len())?;
                finite("theta", theta)?;
                dim("alpha rows", n, alpha.len())?;
                for row in alpha {
                    dim("alpha columns", n, row.len())?;
                    nonneg("alpha", row)?;
                }
            }
            PolicySpec::Logit { gamma, beta } => {
                dim("gamma", n, gamma.len())?;
                finite("gamma", gamma)?;
                dim("beta", n, beta.len())?;
                nonneg("beta", beta)?;
            }
            PolicySpec::Custom(_) => {}
        }
        Ok(())
    }

    /// `φ(mode, q)` written into `out`, without validating `q`. Negative
    /// queue entries are treated as zero.
    pub(crate) fn eval_into(&self, demand: f64, mode: usize, q: &[f64], out: &mut [f64]) {
        match self {
            PolicySpec::ModeResponsive { psi } => out.copy_from_slice(&psi[mode]),
            PolicySpec::PiecewiseAffine { theta, alpha } => {
                for k in 0..out.len() {
                    let mut s = theta[k];
                    for (h, &qh) in q.iter().enumerate() {
                        let qh = qh.max(0.0);
                        if h == k {
                            s -= alpha[k][h] * qh;
                        } else {
                            s += alpha[k][h] * qh;
                        }
                    }
                    out[k] = s.max(0.0).min(demand);
                }
            }
            PolicySpec::Logit { gamma, beta } => {
                for k in 0..out.len() {
                    out[k] = gamma[k] - beta[k] * q[k].max(0.0);
                }
                let top = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for z in out.iter_mut() {
                    *z = if top == f64::NEG_INFINITY { 1.0 } else { (*z - top).exp() };
                    total += *z;
                }
                for z in out.iter_mut() {
                    *z *= demand / total;
                }
            }
            PolicySpec::Custom(c) => (c.eval)(mode, q, out),
        }
    }

    /// `evaluate_policy`: the inflow vector `φ(mode, q)`.
    pub fn evaluate(&self, demand: f64, mode: usize, q: &[f64]) -> Result<Vec<f64>, PolicyError> {
        if let Some((server, &value)) = q.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(PolicyError::InvalidQueue { server, value });
        }
        let mut out = vec![0.0; q.len()];
        self.eval_into(demand, mode, q, &mut out);
        Ok(out)
    }

    /// Closed-form limiting inflows for the built-in families.
    pub fn limiting_inflows(
        &self,
        demand: f64,
        modes: usize,
        servers: usize,
    ) -> Result<LimitingInflows, PolicyError> {
        let mut lim = LimitingInflows::zeros(modes, servers);
        match self {
            PolicySpec::ModeResponsive { psi } => {
                for i in 0..modes {
                    for k in 0..servers {
                        for h in 0..servers {
                            lim.set(i, k, h, psi[i][k]);
                        }
                    }
                }
            }
            PolicySpec::PiecewiseAffine { theta, alpha } => {
                // For n > 2 this is the coordinate-wise limit of the same
                // affine form; the two-server case split is the special case.
                for k in 0..servers {
                    let constant = theta[k].max(0.0).min(demand);
                    for h in 0..servers {
                        let v = if alpha[k][h] > 0.0 {
                            if h == k {
                                0.0
                            } else {
                                demand
                            }
                        } else {
                            constant
                        };
                        for i in 0..modes {
                            lim.set(i, k, h, v);
                        }
                    }
                }
            }
            PolicySpec::Logit { gamma, beta } => {
                let top = gamma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = gamma.iter().map(|g| (g - top).exp()).collect();
                let total: f64 = w.iter().sum();
                for k in 0..servers {
                    for h in 0..servers {
                        let v = if beta[h] > 0.0 {
                            if h == k {
                                0.0
                            } else {
                                // server h drops out of the normalization
                                demand * w[k] / (total - w[h])
                            }
                        } else {
                            demand * w[k] / total
                        };
                        for i in 0..modes {
                            lim.set(i, k, h, v);
                        }
                    }
                }
            }
            PolicySpec::Custom(c) => return Err(PolicyError::UnsupportedPolicy(c.name.clone())),
        }
        Ok(lim)
    }

    /// Estimates limiting inflows by evaluating along `q_h = q_max · 2^j`
    /// until successive values differ by less than `tol` (at most 60
    /// doublings). Works for any policy satisfying the monotonicity property.
    pub fn limiting_inflows_numeric(
        &self,
        demand: f64,
        modes: usize,
        servers: usize,
        q_max: f64,
        tol: f64,
    ) -> Result<LimitingInflows, PolicyError> {
        const MAX_DOUBLINGS: i32 = 60;
        let mut lim = LimitingInflows::zeros(modes, servers);
        let mut q = vec![0.0; servers];
        let mut prev = vec![0.0; servers];
        let mut cur = vec![0.0; servers];
        for i in 0..modes {
            for h in 0..servers {
                q.iter_mut().for_each(|x| *x = 0.0);
                q[h] = q_max;
                self.eval_into(demand, i, &q, &mut prev);
                let mut converged = false;
                for j in 1..=MAX_DOUBLINGS {
                    q[h] = q_max * 2f64.powi(j);
                    self.eval_into(demand, i, &q, &mut cur);
                    let diff = prev
                        .iter()
                        .zip(&cur)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    std::mem::swap(&mut prev, &mut cur);
                    if diff < tol {
                        converged = true;
                        break;
                    }
                }
                if !converged {
                    return Err(PolicyError::NoConvergence { mode: i, direction: h });
                }
                for k in 0..servers {
                    lim.set(i, k, h, prev[k]);
                }
            }
        }
        Ok(lim)
    }
}

/// `φ_kh^i` for all modes `i` and servers `k`, `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitingInflows {
    modes: usize,
    servers: usize,
    values: Vec<f64>,
}

impl LimitingInflows {
    fn zeros(modes: usize, servers: usize) -> Self {
        Self {
            modes,
            servers,
            values: vec![0.0; modes * servers * servers],
        }
    }

    fn idx(&self, mode: usize, k: usize, h: usize) -> usize {
        (mode * self.servers + k) * self.servers + h
    }

    fn set(&mut self, mode: usize, k: usize, h: usize, v: f64) {
        let i = self.idx(mode, k, h);
        self.values[i] = v;
    }

    /// `φ_kh^mode`: limit of the inflow to server `k` as queue `h` grows.
    pub fn get(&self, mode: usize, k: usize, h: usize) -> f64 {
        self.values[self.idx(mode, k, h)]
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn servers(&self) -> usize {
        self.servers
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityViolation {
    pub mode: usize,
    pub queue: Vec<f64>,
    pub total: f64,
    /// `Σ_k φ_k − A`.
    pub excess: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdmissibilityReport {
    pub checked: usize,
    pub violations: Vec<AdmissibilityViolation>,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const ADMISSIBILITY_TOL: f64 = 1e-9;

/// Verifies `Σ_k φ_k(i, q) = A` within `1e-9` at every mode and sample.
pub fn check_admissible(
    spec: &PolicySpec,
    demand: f64,
    modes: usize,
    samples: &[Vec<f64>],
) -> AdmissibilityReport {
    let mut report = AdmissibilityReport::default();
    let mut out = Vec::new();
    for i in 0..modes {
        for q in samples {
            out.resize(q.len(), 0.0);
            spec.eval_into(demand, i, q, &mut out);
            let total: f64 = out.iter().sum();
            report.checked += 1;
            if !((total - demand).abs() <= ADMISSIBILITY_TOL) {
                report.violations.push(AdmissibilityViolation {
                    mode: i,
                    queue: q.clone(),
                    total,
                    excess: total - demand,
                });
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotonicityKind {
    /// `φ_k` increased when `q_k` increased.
    OwnQueueIncrease,
    /// `φ_h` decreased when `q_k` (`h ≠ k`) increased.
    CrossQueueDecrease,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityViolation {
    pub mode: usize,
    pub pair: usize,
    pub varied: usize,
    pub server: usize,
    pub kind: MonotonicityKind,
    pub change: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonotonicityReport {
    pub checked: usize,
    /// Pairs that do not differ in exactly one coordinate.
    pub skipped: usize,
    pub violations: Vec<MonotonicityViolation>,
}

/// Checks the queue-monotonicity property on pairs differing in one coordinate.
pub fn check_monotone(
    spec: &PolicySpec,
    demand: f64,
    modes: usize,
    pairs: &[(Vec<f64>, Vec<f64>)],
) -> MonotonicityReport {
    const TOL: f64 = 1e-12;
    let mut report = MonotonicityReport::default();
    for (idx, (a, b)) in pairs.iter().enumerate() {
        let differing: Vec<usize> = (0..a.len()).filter(|&k| a[k] != b[k]).collect();
        if a.len() != b.len() || differing.len() != 1 {
            report.skipped += 1;
            continue;
        }
        let k = differing[0];
        let (lo, hi) = if a[k] < b[k] { (a, b) } else { (b, a) };
        let mut f_lo = vec![0.0; lo.len()];
        let mut f_hi = vec![0.0; hi.len()];
        for i in 0..modes {
            spec.eval_into(demand, i, lo, &mut f_lo);
            spec.eval_into(demand, i, hi, &mut f_hi);
            report.checked += 1;
            for h in 0..lo.len() {
                let change = f_hi[h] - f_lo[h];
                let kind = if h == k && change > TOL {
                    Some(MonotonicityKind::OwnQueueIncrease)
                } else if h != k && change < -TOL {
                    Some(MonotonicityKind::CrossQueueDecrease)
                } else {
                    None
                };
                if let Some(kind) = kind {
                    report.violations.push(MonotonicityViolation {
                        mode: i,
                        pair: idx,
                        varied: k,
                        server: h,
                        kind,
                        change,
                    });
                }
            }
        }
    }
    report
}

/// Deterministic queue samples used to screen admissibility: the origin,
/// scaled unit vectors, pairwise combinations, and a pseudo-random spread.
pub fn standard_samples(servers: usize) -> Vec<Vec<f64>> {
    let mut samples = vec![vec![0.0; servers]];
    for scale in [0.1, 1.0, 10.0, 1e3] {
        for h in 0..servers {
            let mut q = vec![0.0; servers];
            q[h] = scale;
            samples.push(q);
        }
        samples.push(vec![scale; servers]);
    }
    // xorshift spread over [0, 20)
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    for _ in 0..32 {
        let q = (0..servers)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 * 20.0
            })
            .collect();
        samples.push(q);
    }
    samples
}
