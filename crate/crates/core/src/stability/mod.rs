//! Stability analysis of PDQ systems.
//!
//! The necessary condition compares long-run average capacity with the
//! long-run inflow each server receives when its own queue is very large.
//! The sufficient condition needs a nominal mode that drains every queue and
//! a positive solution `(a, b)` of `(diag(A·1 − R_min)·b + Λ)·a ≤ −1`, which
//! yields the Lyapunov function `V(i, q) = a^i e^{b|q|}`.

mod metzler;
mod scan;

pub use metzler::{
    is_hurwitz_metzler, is_metzler, m_matrix_pivots, satisfies_drift, solve_unit_drift,
};
pub use scan::{scan_region, ParamTarget, ScanAxis, ScanCell, ScanGrid, ScanSpec};

use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::dynamics::Scenario;
use crate::mode_chain::ChainError;
use crate::routing::{LimitingInflows, PolicyError, PolicySpec};

/// Tolerance on the non-strict necessary inequality.
pub const NECESSARY_TOL: f64 = 1e-9;
/// Minimum slack `u_k − φ_k(i, 0)` for a nominal mode.
pub const NOMINAL_MARGIN: f64 = 1e-12;
/// Tolerance used when re-verifying `M(b)·a ≤ −1`.
pub const CERTIFICATE_TOL: f64 = 1e-9;

const NUMERIC_LIMIT_START: f64 = 1e3;
const NUMERIC_LIMIT_TOL: f64 = 1e-10;
const REFINE_STEPS: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error("wrong shape: {0}")]
    WrongShape(String),
    #[error("invalid b grid: {0}")]
    InvalidGrid(String),
    #[error("invalid scan parameter: {0}")]
    InvalidTarget(String),
    #[error("M(b) is numerically singular at b = {b}")]
    NumericalFailure { b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StabilityClass {
    Unstable,
    Stable,
    Unknown,
}

impl StabilityClass {
    pub fn as_str(self) -> &'static str {
        match self {
            StabilityClass::Unstable => "Unstable",
            StabilityClass::Stable => "Stable",
            StabilityClass::Unknown => "Unknown",
        }
    }
}

impl fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where the limiting inflows came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitsSource {
    Analytic,
    Numeric,
}

/// What a `Stable` verdict rests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictBasis {
    /// Nominal mode plus a Lyapunov certificate.
    Certificate,
    /// The exact band for two modes, two servers and mode-responsive routing,
    /// also used for piecewise-affine and logit policies that ignore queues.
    TwoModeModeResponsive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NecessaryCondition {
    pub holds: bool,
    /// `Σ_i p_i u_k^i − Σ_i p_i φ_kk^i` per server.
    pub margins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub nominal_mode: usize,
    pub a: Vec<f64>,
    pub b: f64,
    /// `min_i 1/(2 a^i)`.
    pub c: f64,
}

/// Result of re-checking a certificate from scratch.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateCheck {
    pub a_positive: bool,
    /// `max_i ((M(b)·a)_i + 1) / s_i`, with `s_i` the larger of 1 and the
    /// absolute size of the row's terms; must be `≤ CERTIFICATE_TOL`.
    pub max_residual: f64,
    pub nominal_ok: bool,
    pub rate_ok: bool,
}

impl CertificateCheck {
    pub fn is_valid(&self) -> bool {
        self.a_positive && self.max_residual <= CERTIFICATE_TOL && self.nominal_ok && self.rate_ok
    }
}

impl StabilityCertificate {
    /// Builds a certificate with `c = min_i 1/(2 a^i)`.
    pub fn new(nominal_mode: usize, a: Vec<f64>, b: f64) -> Self {
        let c = rate_constant(&a);
        Self {
            nominal_mode,
            a,
            b,
            c,
        }
    }

    /// Recomputes `R_min`, `M(b)` and the nominal-mode inequality directly
    /// from the scenario, without going through the solver.
    pub fn verify(&self, scn: &Scenario) -> Result<CertificateCheck, StabilityError> {
        let m = scn.modes();
        let rmin = r_min(scn)?;
        let chain = scn.chain();
        let a_positive = self.a.len() == m && self.a.iter().all(|x| *x > 0.0) && self.b > 0.0;
        let mut max_residual = f64::NEG_INFINITY;
        if a_positive {
            for i in 0..m {
                let own = (scn.demand() - rmin[i]) * self.b * self.a[i];
                let mut row = own;
                let mut scale = own.abs();
                for j in 0..m {
                    if j != i {
                        let q = chain.rate(i, j);
                        row += q * (self.a[j] - self.a[i]);
                        scale += q * (self.a[j] + self.a[i]);
                    }
                }
                max_residual = max_residual.max((row + 1.0) / scale.max(1.0));
            }
        }
        let nominal_ok = self.nominal_mode < m && {
            let phi = scn.inflow(self.nominal_mode, &vec![0.0; scn.servers()])?;
            let u = scn.saturation(self.nominal_mode);
            phi.iter().zip(u).all(|(f, u)| u - f >= NOMINAL_MARGIN)
        };
        let rate_ok = a_positive && self.c == rate_constant(&self.a);
        Ok(CertificateCheck {
            a_positive,
            max_residual,
            nominal_ok,
            rate_ok,
        })
    }
}

fn rate_constant(a: &[f64]) -> f64 {
    a.iter().map(|x| 1.0 / (2.0 * x)).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub class: StabilityClass,
    pub necessary_margins: Vec<f64>,
    pub certificate: Option<StabilityCertificate>,
    pub limits_source: LimitsSource,
    pub basis: Option<VerdictBasis>,
    pub nominal_mode: Option<usize>,
    /// Refined range of grid-feasible `b` around the certificate.
    pub feasible_b: Option<(f64, f64)>,
}

/// Limiting inflows in closed form when the family has one, otherwise by
/// the numeric doubling estimator.
pub fn limiting_inflows(scn: &Scenario) -> Result<(LimitingInflows, LimitsSource), StabilityError> {
    let policy = scn.policy();
    match policy.limiting_inflows(scn.demand(), scn.modes(), scn.servers()) {
        Ok(lim) => Ok((lim, LimitsSource::Analytic)),
        Err(PolicyError::UnsupportedPolicy(_)) => {
            let lim = policy.limiting_inflows_numeric(
                scn.demand(),
                scn.modes(),
                scn.servers(),
                NUMERIC_LIMIT_START,
                NUMERIC_LIMIT_TOL,
            )?;
            Ok((lim, LimitsSource::Numeric))
        }
        Err(e) => Err(e.into()),
    }
}

pub fn necessary_condition(scn: &Scenario) -> Result<NecessaryCondition, StabilityError> {
    let (lim, _) = limiting_inflows(scn)?;
    necessary_from(scn, &lim)
}

fn necessary_from(
    scn: &Scenario,
    lim: &LimitingInflows,
) -> Result<NecessaryCondition, StabilityError> {
    let p = scn.chain().steady_state()?;
    let margins: Vec<f64> = (0..scn.servers())
        .map(|k| {
            let capacity = p.expectation((0..scn.modes()).map(|i| scn.saturation(i)[k]));
            let inflow = p.expectation((0..scn.modes()).map(|i| lim.get(i, k, k)));
            capacity - inflow
        })
        .collect();
    let holds = margins.iter().all(|m| *m >= -NECESSARY_TOL);
    Ok(NecessaryCondition { holds, margins })
}

/// `R_min^i = min_k (u_k^i + Σ_{h≠k} min{u_h^i, φ_hk^i})`.
pub fn r_min(scn: &Scenario) -> Result<Vec<f64>, StabilityError> {
    let (lim, _) = limiting_inflows(scn)?;
    Ok(r_min_from(scn, &lim))
}

fn r_min_from(scn: &Scenario, lim: &LimitingInflows) -> Vec<f64> {
    let n = scn.servers();
    (0..scn.modes())
        .map(|i| {
            let u = scn.saturation(i);
            (0..n)
                .map(|k| {
                    u[k] + (0..n)
                        .filter(|h| *h != k)
                        .map(|h| u[h].min(lim.get(i, h, k)))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// First mode whose inflows at empty queues are strictly below saturation.
pub fn nominal_mode(scn: &Scenario) -> Result<Option<usize>, StabilityError> {
    let zero = vec![0.0; scn.servers()];
    for i in 0..scn.modes() {
        let phi = scn.inflow(i, &zero)?;
        if phi
            .iter()
            .zip(scn.saturation(i))
            .all(|(f, u)| u - f >= NOMINAL_MARGIN)
        {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// Candidate values of `b`, tried in order.
#[derive(Debug, Clone, PartialEq)]
pub struct BGrid(Vec<f64>);

impl BGrid {
    pub fn new(points: Vec<f64>) -> Result<Self, StabilityError> {
        if points.is_empty() {
            return Err(StabilityError::InvalidGrid("no points".into()));
        }
        if let Some(b) = points.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(StabilityError::InvalidGrid(format!("non-positive point {b}")));
        }
        Ok(Self(points))
    }

    pub fn log_spaced(lo: f64, hi: f64, points: usize) -> Result<Self, StabilityError> {
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) || points == 0 {
            return Err(StabilityError::InvalidGrid(format!(
                "need 0 < lo <= hi and points >= 1, got [{lo}, {hi}] with {points}"
            )));
        }
        if points == 1 {
            return Self::new(vec![lo]);
        }
        let (l0, l1) = (lo.log10(), hi.log10());
        let step = (l1 - l0) / (points - 1) as f64;
        Self::new(
            (0..points)
                .map(|j| 10f64.powf(l0 + step * j as f64))
                .collect(),
        )
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }
}

impl Default for BGrid {
    /// 201 points, logarithmically spaced over `[1e-4, 1e4]`.
    fn default() -> Self {
        Self::log_spaced(1e-4, 1e4, 201).expect("valid default grid")
    }
}

/// The matrix family `M(b) = diag(A·1 − R_min)·b + Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct BmiProblem {
    /// `A − R_min^i` per mode.
    pub excess: Vec<f64>,
    pub generator: DMatrix<f64>,
}

impl BmiProblem {
    pub fn from_scenario(scn: &Scenario) -> Result<Self, StabilityError> {
        Ok(Self::new(
            r_min(scn)?.iter().map(|r| scn.demand() - r).collect(),
            scn.chain().generator(),
        ))
    }

    pub fn new(excess: Vec<f64>, generator: DMatrix<f64>) -> Self {
        Self { excess, generator }
    }

    pub fn matrix(&self, b: f64) -> DMatrix<f64> {
        let mut m = self.generator.clone();
        for (i, x) in self.excess.iter().enumerate() {
            m[(i, i)] += b * x;
        }
        m
    }

    /// The weights `a = −M(b)⁻¹·1` when `M(b)` is Hurwitz.
    pub fn solve_at(&self, b: f64) -> Result<Option<Vec<f64>>, StabilityError> {
        let m = self.matrix(b);
        if !is_hurwitz_metzler(&m) {
            return Ok(None);
        }
        let a = match solve_unit_drift(&m) {
            Some(a) => a,
            None => {
                let bp = b * (1.0 + 1e-9);
                solve_unit_drift(&self.matrix(bp))
                    .ok_or(StabilityError::NumericalFailure { b })?
            }
        };
        Ok(satisfies_drift(&m, &a, CERTIFICATE_TOL).then_some(a))
    }

    /// First grid point at which the inequality is feasible.
    pub fn first_feasible(&self, grid: &BGrid) -> Result<Option<(Vec<f64>, f64)>, StabilityError> {
        for &b in grid.points() {
            if let Some(a) = self.solve_at(b)? {
                return Ok(Some((a, b)));
            }
        }
        Ok(None)
    }

    /// The contiguous run of feasible grid points containing the first
    /// feasible one, with both ends sharpened by bisection against their
    /// infeasible neighbours. Both returned ends are feasible.
    pub fn feasible_interval(&self, grid: &BGrid) -> Result<Option<(f64, f64)>, StabilityError> {
        let mut pts = grid.points().to_vec();
        pts.sort_by(f64::total_cmp);
        let mut feasible = Vec::with_capacity(pts.len());
        for &b in &pts {
            feasible.push(self.solve_at(b)?.is_some());
        }
        let Some(first) = feasible.iter().position(|f| *f) else {
            return Ok(None);
        };
        let last = first + feasible[first..].iter().take_while(|f| **f).count() - 1;
        let lo = match first {
            0 => pts[0],
            _ => self.refine(pts[first], pts[first - 1])?,
        };
        let hi = match pts.get(last + 1) {
            Some(&out) => self.refine(pts[last], out)?,
            None => pts[last],
        };
        Ok(Some((lo, hi)))
    }

    fn refine(&self, mut inside: f64, mut outside: f64) -> Result<f64, StabilityError> {
        for _ in 0..REFINE_STEPS {
            let mid = (inside * outside).sqrt();
            if self.solve_at(mid)?.is_some() {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(inside)
    }
}

/// Searches the grid for `(a, b)` with `a > 0` and `M(b)·a ≤ −1`.
pub fn bmi_feasible(scn: &Scenario, grid: &BGrid) -> Result<Option<(Vec<f64>, f64)>, StabilityError> {
    BmiProblem::from_scenario(scn)?.first_feasible(grid)
}

/// The exact stability band for two modes, two servers and mode-responsive
/// routing: `Σ_i p_i ψ_k^i < Σ_i p_i u_k^i` for every server.
pub fn two_mode_mode_responsive_iff(scn: &Scenario) -> Result<bool, StabilityError> {
    let PolicySpec::ModeResponsive { psi } = scn.policy() else {
        return Err(StabilityError::WrongShape(format!(
            "needs a mode-responsive policy, got {}",
            scn.policy().family()
        )));
    };
    if scn.modes() != 2 || scn.servers() != 2 {
        return Err(StabilityError::WrongShape(format!(
            "needs 2 modes and 2 servers, got {} and {}",
            scn.modes(),
            scn.servers()
        )));
    }
    two_mode_band(scn, psi)
}

fn two_mode_band(scn: &Scenario, psi: &[Vec<f64>]) -> Result<bool, StabilityError> {
    let p = scn.chain().steady_state()?;
    Ok((0..2).all(|k| {
        let inflow = p.expectation((0..2).map(|i| psi[i][k]));
        let capacity = p.expectation((0..2).map(|i| scn.saturation(i)[k]));
        inflow < capacity
    }))
}

/// Per-mode inflows of a policy that ignores the queues by construction:
/// mode-responsive, piecewise-affine with `α = 0`, or logit with `β = 0`.
fn queue_independent_inflows(scn: &Scenario) -> Result<Option<Vec<Vec<f64>>>, StabilityError> {
    let constant = match scn.policy() {
        PolicySpec::ModeResponsive { psi } => return Ok(Some(psi.clone())),
        PolicySpec::PiecewiseAffine { alpha, .. } => alpha.iter().flatten().all(|a| *a == 0.0),
        PolicySpec::Logit { beta, .. } => beta.iter().all(|b| *b == 0.0),
        PolicySpec::Custom(_) => false,
    };
    if !constant {
        return Ok(None);
    }
    let zero = vec![0.0; scn.servers()];
    let rows = (0..scn.modes())
        .map(|i| scn.inflow(i, &zero))
        .collect::<Result<_, _>>()?;
    Ok(Some(rows))
}

pub fn classify(scn: &Scenario) -> Result<Verdict, StabilityError> {
    classify_with(scn, &BGrid::default())
}

/// Unstable when the necessary condition fails; Stable with a certificate
/// when a nominal mode exists and the inequality is feasible on the grid, or
/// when the exact two-mode band applies to a policy that ignores the queues
/// (and so is mode-responsive); Unknown otherwise.
pub fn classify_with(scn: &Scenario, grid: &BGrid) -> Result<Verdict, StabilityError> {
    let (lim, limits_source) = limiting_inflows(scn)?;
    let necessary = necessary_from(scn, &lim)?;
    let nominal = nominal_mode(scn)?;
    let mut verdict = Verdict {
        class: StabilityClass::Unknown,
        necessary_margins: necessary.margins,
        certificate: None,
        limits_source,
        basis: None,
        nominal_mode: nominal,
        feasible_b: None,
    };
    if !necessary.holds {
        verdict.class = StabilityClass::Unstable;
        return Ok(verdict);
    }
    if let Some(i_star) = nominal {
        let excess = r_min_from(scn, &lim)
            .iter()
            .map(|r| scn.demand() - r)
            .collect();
        let bmi = BmiProblem::new(excess, scn.chain().generator());
        if let Some((a, b)) = bmi.first_feasible(grid)? {
            verdict.class = StabilityClass::Stable;
            verdict.basis = Some(VerdictBasis::Certificate);
            verdict.certificate = Some(StabilityCertificate::new(i_star, a, b));
            verdict.feasible_b = bmi.feasible_interval(grid)?;
            return Ok(verdict);
        }
    }
    if scn.modes() == 2 && scn.servers() == 2 {
        if let Some(psi) = queue_independent_inflows(scn)? {
            if two_mode_band(scn, &psi)? {
                verdict.class = StabilityClass::Stable;
                verdict.basis = Some(VerdictBasis::TwoModeModeResponsive);
            }
        }
    }
    Ok(verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::fixtures::*;
    use crate::mode_chain::ModeChain;
    use crate::routing::CustomPolicy;

    fn pwa3(theta1: f64) -> Scenario {
        three_mode(PolicySpec::pwa_two_server(1.0, theta1, 0.0, 0.0))
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn necessary_margins_two_mode() {
        let nc = necessary_condition(&two_mode(mode_responsive(&[[0.9, 0.1], [0.1, 0.9]]))).unwrap();
        assert!(nc.holds);
        assert!(close(&nc.margins, &[0.2, 0.2], 1e-12));

        let nc = necessary_condition(&two_mode(mode_responsive(&[[0.1, 0.9], [0.1, 0.9]]))).unwrap();
        assert!(!nc.holds);
        assert!((nc.margins[1] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn necessary_band_three_mode() {
        for (p1, p2) in [(0.3, 0.3), (0.9, 0.0), (0.0, 0.6), (0.95, 0.6), (0.0, 0.2)] {
            let scn = three_mode(mode_responsive(&[[p1, 1.0 - p1], [p2, 1.0 - p2], [p2, 1.0 - p2]]));
            let s = p1 / 3.0 + 2.0 * p2 / 3.0;
            let inside = (0.3..=0.7).contains(&s);
            assert_eq!(necessary_condition(&scn).unwrap().holds, inside, "{p1} {p2}");
        }
    }

    #[test]
    fn r_min_examples() {
        assert!(close(&r_min(&pwa3(0.5)).unwrap(), &[1.2, 1.2, 0.7], 1e-12));
        let scn = two_mode(mode_responsive(&[[0.9, 0.1], [0.1, 0.9]]));
        assert!(close(&r_min(&scn).unwrap(), &[1.3, 0.8], 1e-12));
        let single = Scenario::new(
            1.0,
            vec![vec![2.0], vec![0.5]],
            two_mode_chain(),
            PolicySpec::ModeResponsive {
                psi: vec![vec![1.0], vec![1.0]],
            },
        )
        .unwrap();
        assert_eq!(r_min(&single).unwrap(), vec![2.0, 0.5]);
    }

    #[test]
    fn nominal_mode_examples() {
        let scn = two_mode(mode_responsive(&[[0.9, 0.1], [0.1, 0.9]]));
        assert_eq!(nominal_mode(&scn).unwrap(), Some(0));
        assert_eq!(nominal_mode(&pwa3(0.8)).unwrap(), Some(0));
        // inflow equal to saturation is rejected
        let tight = Scenario::new(
            1.9,
            vec![vec![1.2, 0.7], vec![0.2, 0.7]],
            two_mode_chain(),
            mode_responsive(&[[1.2, 0.7], [1.2, 0.7]]),
        )
        .unwrap();
        assert_eq!(nominal_mode(&tight).unwrap(), None);
    }

    #[test]
    fn bmi_two_mode_hand_case() {
        let scn = two_mode(mode_responsive(&[[0.9, 0.1], [0.1, 0.9]]));
        let bmi = BmiProblem::from_scenario(&scn).unwrap();
        assert!(close(&bmi.excess, &[-0.3, 0.2], 1e-12));
        let a = bmi.solve_at(1.0).unwrap().unwrap();
        assert!(close(&a, &[45.0, 57.5], 1e-9));
        let (lo, hi) = bmi.feasible_interval(&BGrid::default()).unwrap().unwrap();
        assert_eq!(lo, 1e-4);
        assert!((hi - 5.0 / 3.0).abs() < 1e-4, "{hi}");
        assert!(bmi.solve_at(1.7).unwrap().is_none());
    }

    #[test]
    fn bmi_infeasible_when_excess_nonnegative() {
        let bmi = BmiProblem::new(vec![0.1, 0.0, 0.3], ModeChain::symmetric(3, 1.0).unwrap().generator());
        assert!(bmi.first_feasible(&BGrid::default()).unwrap().is_none());
    }

    #[test]
    fn bmi_three_mode_pwa() {
        let scn = pwa3(0.5);
        let bmi = BmiProblem::from_scenario(&scn).unwrap();
        assert!(close(&bmi.excess, &[-0.2, -0.2, 0.3], 1e-12));
        let (a, b) = bmi_feasible(&scn, &BGrid::default()).unwrap().unwrap();
        assert!(satisfies_drift(&bmi.matrix(b), &a, 1e-9));
    }

    #[test]
    fn classify_two_mode_examples() {
        let v = classify(&two_mode(mode_responsive(&[[0.9, 0.1], [0.1, 0.9]]))).unwrap();
        assert_eq!(v.class, StabilityClass::Stable);
        assert_eq!(v.basis, Some(VerdictBasis::Certificate));
        assert_eq!(v.limits_source, LimitsSource::Analytic);
        let cert = v.certificate.unwrap();
        assert_eq!(cert.nominal_mode, 0);
        assert_eq!(cert.c, cert.a.iter().map(|x| 0.5 / x).fold(f64::INFINITY, f64::min));

        let v = classify(&two_mode(mode_responsive(&[[0.1, 0.9], [0.1, 0.9]]))).unwrap();
        assert_eq!(v.class, StabilityClass::Unstable);
        assert!(v.certificate.is_none());

        // no nominal mode, but inside the exact band
        let v = classify(&two_mode(mode_responsive(&[[0.1, 0.9], [0.9, 0.1]]))).unwrap();
        assert_eq!(v.class, StabilityClass::Stable);
        assert_eq!(v.basis, Some(VerdictBasis::TwoModeModeResponsive));
    }

    #[test]
    fn queue_independent_two_mode_policies_use_the_band() {
        let v = classify(&two_mode(PolicySpec::pwa_two_server(1.0, 0.5, 0.0, 0.0))).unwrap();
        assert_eq!(v.class, StabilityClass::Stable);
        assert_eq!(v.basis, Some(VerdictBasis::TwoModeModeResponsive));
        let logit = |g: f64| {
            classify(&two_mode(PolicySpec::Logit {
                gamma: vec![g, 0.0],
                beta: vec![0.0, 0.0],
            }))
            .unwrap()
            .class
        };
        assert_eq!(logit(0.84), StabilityClass::Stable);
        assert_eq!(logit(-0.85), StabilityClass::Unstable);
        // queue-responsive policies get no shortcut
        let v = classify(&two_mode(PolicySpec::pwa_two_server(1.0, 0.35, 1.0, 0.0))).unwrap();
        assert_eq!(v.class, StabilityClass::Unknown);
    }

    #[test]
    fn iff_examples() {
        let iff = |a: f64, b: f64| {
            two_mode_mode_responsive_iff(&two_mode(mode_responsive(&[[a, 1.0 - a], [b, 1.0 - b]])))
                .unwrap()
        };
        assert!(iff(0.9, 0.1));
        assert!(!iff(0.7, 0.7));
        assert!(iff(1.0, 0.35));
        assert!(matches!(
            two_mode_mode_responsive_iff(&pwa3(0.5)),
            Err(StabilityError::WrongShape(_))
        ));
    }

    #[test]
    fn three_mode_band_edge_is_never_unstable() {
        // ψ_1^1/3 + 2ψ_1^2/3 = 0.31
        let scn = three_mode(mode_responsive(&[[0.33, 0.67], [0.3, 0.7], [0.3, 0.7]]));
        assert_ne!(classify(&scn).unwrap().class, StabilityClass::Unstable);
    }

    #[test]
    fn certificate_reverification() {
        let scn = two_mode(mode_responsive(&[[0.9, 0.1], [0.1, 0.9]]));
        let cert = StabilityCertificate::new(0, vec![45.0, 57.5], 1.0);
        assert!(cert.verify(&scn).unwrap().is_valid());
        let bad = StabilityCertificate::new(0, vec![45.0, 57.5], 2.0);
        assert!(!bad.verify(&scn).unwrap().is_valid());
    }

    #[test]
    fn custom_policy_uses_numeric_limits() {
        let custom = PolicySpec::Custom(CustomPolicy::new("split", |mode, _q, out| {
            let s = if mode == 0 { 0.9 } else { 0.1 };
            out[0] = s;
            out[1] = 1.0 - s;
        }));
        let v = classify(&two_mode(custom)).unwrap();
        assert_eq!(v.limits_source, LimitsSource::Numeric);
        assert_eq!(v.class, StabilityClass::Stable);
        assert!(close(&v.necessary_margins, &[0.2, 0.2], 1e-12));
    }

    #[test]
    fn grid_validation() {
        assert!(BGrid::new(vec![]).is_err());
        assert!(BGrid::new(vec![1.0, -1.0]).is_err());
        let g = BGrid::default();
        assert_eq!(g.points().len(), 201);
        assert!((g.points()[100] - 1.0).abs() < 1e-12);
        assert!((g.points()[200] - 1e4).abs() < 1e-8);
    }
}
