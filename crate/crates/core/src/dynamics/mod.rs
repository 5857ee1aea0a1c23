//! Hybrid queue dynamics.
//!
//! Between mode switches the queue vector follows `dq/dt = D(i, q) = φ(i, q) − r(i, q)`
//! where the discharge `r_k` equals the inflow `φ_k` on an empty queue that
//! can absorb it and the saturation rate `u_k^i` otherwise.

mod integrator;
mod trajectory;

pub use integrator::{
    integrate_between_switches, BoundaryEvent, BoundaryKind, IntegratorConfig, SegmentResult,
};
pub use trajectory::{simulate_trajectory, EventKind, Trajectory, TrajectoryEvent};

use thiserror::Error;

use crate::mode_chain::ModeChain;
use crate::routing::{check_admissible, standard_samples, PolicyError, PolicySpec};

/// Queue entries at or below this level count as empty.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("demand must be finite and non-negative, got {0}")]
    InvalidDemand(f64),
    #[error("{what}: expected {expected}, got {got}")]
    Dimension {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("saturation rate of server {} in mode {} must be positive and finite, got {value}", .server + 1, .mode + 1)]
    NonPositiveSaturation {
        mode: usize,
        server: usize,
        value: f64,
    },
    #[error("modes {} and {} have identical saturation vectors", .first + 1, .second + 1)]
    DuplicateSaturation { first: usize, second: usize },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("policy is not admissible: inflows sum to {total} (demand {demand}) in mode {} at q = {queue:?}", .mode + 1)]
    Inadmissible {
        mode: usize,
        queue: Vec<f64>,
        total: f64,
        demand: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("step size underflow at t = {time} in mode {}", .mode + 1)]
    StepFailure { time: f64, mode: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// A validated PDQ system: demand, saturation rates per mode, the mode chain
/// and the routing policy.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    demand: f64,
    saturation: Vec<Vec<f64>>,
    chain: ModeChain,
    policy: PolicySpec,
}

impl Scenario {
    pub fn new(
        demand: f64,
        saturation: Vec<Vec<f64>>,
        chain: ModeChain,
        policy: PolicySpec,
    ) -> Result<Self, ScenarioError> {
        if !(demand.is_finite() && demand >= 0.0) {
            return Err(ScenarioError::InvalidDemand(demand));
        }
        let m = chain.m();
        if saturation.len() != m {
            return Err(ScenarioError::Dimension {
                what: "saturation rows (one per mode)".into(),
                expected: m,
                got: saturation.len(),
            });
        }
        let n = saturation[0].len();
        if n == 0 {
            return Err(ScenarioError::Dimension {
                what: "server count".into(),
                expected: 1,
                got: 0,
            });
        }
        for (i, row) in saturation.iter().enumerate() {
            if row.len() != n {
                return Err(ScenarioError::Dimension {
                    what: format!("saturation row {}", i + 1),
                    expected: n,
                    got: row.len(),
                });
            }
            for (k, &v) in row.iter().enumerate() {
                if !(v.is_finite() && v > 0.0) {
                    return Err(ScenarioError::NonPositiveSaturation {
                        mode: i,
                        server: k,
                        value: v,
                    });
                }
            }
        }
        for i in 0..m {
            for j in i + 1..m {
                if saturation[i] == saturation[j] {
                    return Err(ScenarioError::DuplicateSaturation { first: i, second: j });
                }
            }
        }
        policy.validate_shape(m, n)?;
        let report = check_admissible(&policy, demand, m, &standard_samples(n));
        if let Some(v) = report.violations.into_iter().next() {
            return Err(ScenarioError::Inadmissible {
                mode: v.mode,
                queue: v.queue,
                total: v.total,
                demand,
            });
        }
        Ok(Self {
            demand,
            saturation,
            chain,
            policy,
        })
    }

    /// Same system under a different routing policy.
    pub fn with_policy(&self, policy: PolicySpec) -> Result<Self, ScenarioError> {
        Self::new(self.demand, self.saturation.clone(), self.chain.clone(), policy)
    }

    pub fn demand(&self) -> f64 {
        self.demand
    }

    pub fn servers(&self) -> usize {
        self.saturation[0].len()
    }

    pub fn modes(&self) -> usize {
        self.chain.m()
    }

    /// `u^mode`.
    pub fn saturation(&self, mode: usize) -> &[f64] {
        &self.saturation[mode]
    }

    pub fn saturation_rows(&self) -> &[Vec<f64>] {
        &self.saturation
    }

    pub fn chain(&self) -> &ModeChain {
        &self.chain
    }

    pub fn policy(&self) -> &PolicySpec {
        &self.policy
    }

    pub fn inflow(&self, mode: usize, q: &[f64]) -> Result<Vec<f64>, PolicyError> {
        self.check_queue(q)?;
        self.policy.evaluate(self.demand, mode, q)
    }

    /// `r^φ(mode, q)`.
    pub fn discharge_rate(&self, mode: usize, q: &[f64]) -> Result<Vec<f64>, PolicyError> {
        let phi = self.inflow(mode, q)?;
        Ok(self.discharge_from(mode, q, &phi))
    }

    /// `D^φ(mode, q) = φ − r^φ`.
    pub fn vector_field(&self, mode: usize, q: &[f64]) -> Result<Vec<f64>, PolicyError> {
        let phi = self.inflow(mode, q)?;
        let r = self.discharge_from(mode, q, &phi);
        Ok(phi.iter().zip(&r).map(|(f, r)| f - r).collect())
    }

    pub(crate) fn discharge_from(&self, mode: usize, q: &[f64], phi: &[f64]) -> Vec<f64> {
        let u = &self.saturation[mode];
        (0..phi.len())
            .map(|k| {
                if q[k] <= BOUNDARY_TOL && phi[k] <= u[k] {
                    phi[k]
                } else {
                    u[k]
                }
            })
            .collect()
    }

    /// Generator applied to `V(i, q) = a^i e^{b|q|}`:
    /// `(Σ_k D_k(i,q) a^i b + Σ_j λ_ij (a^j − a^i)) e^{b|q|}`.
    pub fn generator_apply(
        &self,
        a: &[f64],
        b: f64,
        mode: usize,
        q: &[f64],
    ) -> Result<f64, PolicyError> {
        let d = self.vector_field(mode, q)?;
        let flow: f64 = d.iter().sum::<f64>() * a[mode] * b;
        let jump: f64 = (0..self.modes())
            .map(|j| self.chain.rate(mode, j) * (a[j] - a[mode]))
            .sum();
        let norm: f64 = q.iter().sum();
        Ok((flow + jump) * (b * norm).exp())
    }

    /// `V(i, q) = a^i e^{b|q|}`.
    pub fn lyapunov_value(a: &[f64], b: f64, mode: usize, q: &[f64]) -> f64 {
        a[mode] * (b * q.iter().sum::<f64>()).exp()
    }

    fn check_queue(&self, q: &[f64]) -> Result<(), PolicyError> {
        if q.len() != self.servers() {
            return Err(PolicyError::Dimension {
                name: "queue vector",
                expected: self.servers(),
                got: q.len(),
            });
        }
        Ok(())
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn discharge_examples() {
        let scn = two_mode(mode_responsive(&[[0.5, 0.5], [0.5, 0.5]]));
        assert_eq!(scn.discharge_rate(0, &[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let scn = two_mode(mode_responsive(&[[0.9, 0.1], [0.5, 0.5]]));
        assert_eq!(scn.discharge_rate(0, &[0.0, 0.0]).unwrap(), vec![0.9, 0.1]);
        // queue 1 positive, queue 2 empty with inflow above saturation
        let scn = two_mode(mode_responsive(&[[0.5, 0.5], [0.2, 0.8]]));
        assert_eq!(scn.discharge_rate(1, &[1.0, 0.0]).unwrap(), vec![0.2, 0.7]);
    }

    #[test]
    fn vector_field_examples() {
        let scn = two_mode(mode_responsive(&[[0.5, 0.5], [0.9, 0.1]]));
        assert_eq!(scn.vector_field(0, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let d = scn.vector_field(1, &[1.0, 1.0]).unwrap();
        assert!((d[0] - 0.7).abs() < 1e-15 && (d[1] + 0.6).abs() < 1e-15);
        // empty queue with inflow above saturation starts growing
        let d = scn.vector_field(1, &[0.0, 0.0]).unwrap();
        assert!((d[0] - 0.7).abs() < 1e-15);
        assert_eq!(d[1], 0.0);
    }

    #[test]
    fn conservation_and_bounds() {
        let scn = two_mode(PolicySpec::Logit {
            gamma: vec![0.2, -0.1],
            beta: vec![0.8, 0.3],
        });
        for q in standard_samples(2) {
            for i in 0..2 {
                let phi = scn.inflow(i, &q).unwrap();
                let r = scn.discharge_rate(i, &q).unwrap();
                let d = scn.vector_field(i, &q).unwrap();
                let total: f64 = r.iter().sum::<f64>() + d.iter().sum::<f64>();
                assert!((total - 1.0).abs() < 1e-9);
                assert!((phi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                for k in 0..2 {
                    assert!(r[k] <= scn.saturation(i)[k]);
                }
            }
        }
    }

    #[test]
    fn generator_vanishes_at_equilibrium_with_uniform_weights() {
        let scn = two_mode(mode_responsive(&[[0.5, 0.5], [0.1, 0.9]]));
        let v = scn.generator_apply(&[2.0, 2.0], 0.7, 0, &[0.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn generator_bound_for_certificate() {
        let scn = two_mode(mode_responsive(&[[0.9, 0.1], [0.1, 0.9]]));
        let a = [45.0, 57.5];
        for q in [[3.0, 2.0], [10.0, 0.5], [40.0, 40.0]] {
            let lv = scn.generator_apply(&a, 1.0, 0, &q).unwrap();
            let e = (q[0] + q[1]).exp();
            assert!(lv <= -0.5 * e, "{q:?}: {lv}");
        }
    }

    #[test]
    fn scenario_validation() {
        let chain = two_mode_chain();
        let mr = mode_responsive(&[[0.5, 0.5], [0.5, 0.5]]);
        assert!(matches!(
            Scenario::new(1.0, vec![vec![1.2, 0.7], vec![1.2, 0.7]], chain.clone(), mr.clone()),
            Err(ScenarioError::DuplicateSaturation { .. })
        ));
        assert!(matches!(
            Scenario::new(1.0, vec![vec![1.2, 0.0], vec![0.2, 0.7]], chain.clone(), mr.clone()),
            Err(ScenarioError::NonPositiveSaturation { mode: 0, server: 1, .. })
        ));
        assert!(matches!(
            Scenario::new(1.0, vec![vec![1.2, 0.7, 1.0], vec![0.2, 0.7]], chain.clone(), mr.clone()),
            Err(ScenarioError::Dimension { .. })
        ));
        assert!(matches!(
            Scenario::new(-1.0, two_mode_saturation(), chain.clone(), mr),
            Err(ScenarioError::InvalidDemand(_))
        ));
        assert!(matches!(
            Scenario::new(
                1.0,
                two_mode_saturation(),
                chain,
                mode_responsive(&[[0.6, 0.6], [0.5, 0.5]])
            ),
            Err(ScenarioError::Inadmissible { mode: 0, .. })
        ));
    }
}
