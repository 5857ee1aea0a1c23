//! Event-driven integration of the queue ODE within one mode.
//!
//! Dormand–Prince 5(4) with adaptive steps. Each queue is either *free*
//! (`dq_k/dt = φ_k − u_k`) or *pinned* to the boundary `q_k = 0` (sliding,
//! `dq_k/dt = 0`). A free queue that reaches zero is pinned when `φ_k ≤ u_k`;
//! a pinned queue is released as soon as `φ_k > u_k`. Both transitions are
//! located in time by a safeguarded regula falsi on the step length.
//!
//! The state is augmented with the running integral of the inflow vector so
//! time averages of `φ` come out of the same integration.

use super::{DynamicsError, Scenario, BOUNDARY_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Time tolerance `εt` for boundary-event localization.
    pub event_tol: f64,
    /// Boundary tolerance `εq`.
    pub boundary_tol: f64,
    pub min_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            event_tol: 1e-9,
            boundary_tol: BOUNDARY_TOL,
            min_step: 1e-14,
        }
    }
}

impl IntegratorConfig {
    /// All tolerances divided by `factor`.
    pub fn tightened(self, factor: f64) -> Self {
        Self {
            rtol: self.rtol / factor,
            atol: self.atol / factor,
            event_tol: self.event_tol / factor,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    HitsZero,
    LeavesZero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEvent {
    /// Time since the start of the segment.
    pub offset: f64,
    pub server: usize,
    pub kind: BoundaryKind,
    pub queue: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentResult {
    pub queue: Vec<f64>,
    /// `∫ φ(i, q(s)) ds` over the segment.
    pub inflow_integral: Vec<f64>,
    pub events: Vec<BoundaryEvent>,
    pub accepted_steps: usize,
}

// Dormand–Prince 5(4) tableau; the field is autonomous so the nodes are not needed.
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a> {
    scn: &'a Scenario,
    mode: usize,
    n: usize,
    cfg: IntegratorConfig,
    pinned: Vec<bool>,
    stages: [Vec<f64>; 7],
    scratch: Vec<f64>,
    phi: Vec<f64>,
    q_pos: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(scn: &'a Scenario, mode: usize, cfg: IntegratorConfig) -> Self {
        let n = scn.servers();
        let dim = 2 * n;
        Self {
            scn,
            mode,
            n,
            cfg,
            pinned: vec![false; n],
            stages: std::array::from_fn(|_| vec![0.0; dim]),
            scratch: vec![0.0; dim],
            phi: vec![0.0; n],
            q_pos: vec![0.0; n],
        }
    }

    fn inflow_at(&mut self, q: &[f64]) {
        for k in 0..self.n {
            self.q_pos[k] = q[k].max(0.0);
        }
        self.scn
            .policy()
            .eval_into(self.scn.demand(), self.mode, &self.q_pos, &mut self.phi);
    }

    /// Augmented field: queue derivatives then inflow rates.
    fn field(&mut self, y: &[f64], out_stage: usize) {
        self.inflow_at(&y[..self.n]);
        let u = self.scn.saturation(self.mode);
        let out = &mut self.stages[out_stage];
        for k in 0..self.n {
            out[k] = if self.pinned[k] { 0.0 } else { self.phi[k] - u[k] };
            out[self.n + k] = self.phi[k];
        }
    }

    /// One step of length `h` from `y` (with `stages[0] = f(y)` already set).
    /// Writes the 5th-order solution to `out` and returns the scaled error norm.
    fn step(&mut self, y: &[f64], h: f64, out: &mut [f64]) -> f64 {
        let dim = y.len();
        for s in 1..7 {
            for d in 0..dim {
                let mut acc = 0.0;
                for (j, a) in A[s][..s].iter().enumerate() {
                    acc += a * self.stages[j][d];
                }
                self.scratch[d] = y[d] + h * acc;
            }
            let tmp = std::mem::take(&mut self.scratch);
            self.field(&tmp, s);
            self.scratch = tmp;
        }
        let mut err: f64 = 0.0;
        for d in 0..dim {
            let mut acc = 0.0;
            let mut e = 0.0;
            for s in 0..7 {
                acc += B[s] * self.stages[s][d];
                e += E[s] * self.stages[s][d];
            }
            out[d] = y[d] + h * acc;
            let scale = self.cfg.atol + self.cfg.rtol * y[d].abs().max(out[d].abs());
            err = err.max((h * e).abs() / scale);
        }
        err
    }

    /// Event function for server `k`: negative once the event has happened.
    fn event_value(&mut self, k: usize, y: &[f64]) -> f64 {
        if self.pinned[k] {
            self.inflow_at(&y[..self.n]);
            self.scn.saturation(self.mode)[k] - self.phi[k]
        } else {
            y[k]
        }
    }

    /// Smallest step length in `(0, h]` at which server `k`'s event has
    /// occurred, to within `event_tol`.
    fn locate(&mut self, k: usize, y: &[f64], h: f64, g_hi: f64) -> f64 {
        let mut trial = vec![0.0; y.len()];
        let (mut lo, mut hi) = (0.0, h);
        let mut g_lo = self.event_value(k, y).max(0.0);
        let mut g_hi = g_hi;
        let mut side = 0i8;
        for _ in 0..200 {
            if hi - lo <= self.cfg.event_tol {
                break;
            }
            let mut s = if g_lo > 0.0 && g_hi < 0.0 {
                lo + (hi - lo) * g_lo / (g_lo - g_hi)
            } else {
                0.5 * (lo + hi)
            };
            if !(s > lo && s < hi) {
                s = 0.5 * (lo + hi);
            }
            self.step(y, s, &mut trial);
            let g = self.event_value(k, &trial);
            let landed = !self.pinned[k] && g.abs() <= 1e-15;
            if g < 0.0 || landed {
                hi = s;
                g_hi = g;
                if side == -1 {
                    g_lo *= 0.5;
                }
                side = -1;
                if landed {
                    break;
                }
            } else {
                lo = s;
                g_lo = g;
                if side == 1 {
                    g_hi *= 0.5;
                }
                side = 1;
            }
        }
        hi
    }
}

/// Advances `dq/dt = D^φ(mode, q)` for `duration` from `q0`, locating every
/// boundary hit and release.
pub fn integrate_between_switches(
    scn: &Scenario,
    mode: usize,
    q0: &[f64],
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<SegmentResult, DynamicsError> {
    let n = scn.servers();
    if q0.len() != n {
        return Err(DynamicsError::InvalidInput(format!(
            "queue vector has {} entries, expected {n}",
            q0.len()
        )));
    }
    if let Some(v) = q0.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        return Err(DynamicsError::InvalidInput(format!("invalid queue entry {v}")));
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(DynamicsError::InvalidInput(format!("invalid duration {duration}")));
    }

    let mut st = Stepper::new(scn, mode, *cfg);
    let mut y = vec![0.0; 2 * n];
    y[..n].copy_from_slice(q0);
    st.inflow_at(q0);
    for k in 0..n {
        if y[k] <= cfg.boundary_tol && st.phi[k] <= scn.saturation(mode)[k] {
            y[k] = 0.0;
            st.pinned[k] = true;
        }
    }

    let mut events = Vec::new();
    let mut y_new = vec![0.0; 2 * n];
    let mut t = 0.0;
    let mut h = duration;
    let mut accepted = 0usize;
    let mut stalled = 0usize;

    while t < duration {
        let remaining = duration - t;
        let last = h >= remaining;
        let h_try = if last { remaining } else { h };
        st.field(&y, 0);
        let err = st.step(&y, h_try, &mut y_new);
        if !(err <= 1.0) {
            h = h_try * (0.9 * err.powf(-0.2)).clamp(0.1, 0.5);
            if !err.is_finite() {
                h = h_try * 0.1;
            }
            if h < cfg.min_step * t.max(1.0) {
                return Err(DynamicsError::StepFailure { time: t, mode });
            }
            continue;
        }

        // earliest boundary event inside the step
        let mut first: Option<(f64, usize)> = None;
        for k in 0..n {
            let g_end = st.event_value(k, &y_new);
            if g_end < 0.0 {
                let s = st.locate(k, &y, h_try, g_end);
                if first.map_or(true, |(best, _)| s < best) {
                    first = Some((s, k));
                }
            }
        }

        let step_len = if let Some((s, k)) = first {
            st.field(&y, 0);
            st.step(&y, s, &mut y_new);
            let kind = if st.pinned[k] {
                st.pinned[k] = false;
                BoundaryKind::LeavesZero
            } else {
                y_new[k] = 0.0;
                st.inflow_at(&y_new[..n]);
                if st.phi[k] <= scn.saturation(mode)[k] {
                    st.pinned[k] = true;
                }
                BoundaryKind::HitsZero
            };
            for v in y_new[..n].iter_mut() {
                *v = v.max(0.0);
            }
            events.push(BoundaryEvent {
                offset: t + s,
                server: k,
                kind,
                queue: y_new[..n].to_vec(),
            });
            if s <= cfg.event_tol {
                stalled += 1;
                if stalled > 16 * n + 16 {
                    return Err(DynamicsError::StepFailure { time: t, mode });
                }
            } else {
                stalled = 0;
            }
            s
        } else {
            stalled = 0;
            for v in y_new[..n].iter_mut() {
                *v = v.max(0.0);
            }
            // landed on the boundary without crossing it
            st.inflow_at(&y_new[..n]);
            for k in 0..n {
                if !st.pinned[k]
                    && y[k] > cfg.boundary_tol
                    && y_new[k] <= cfg.boundary_tol
                    && st.phi[k] <= scn.saturation(mode)[k]
                {
                    y_new[k] = 0.0;
                    st.pinned[k] = true;
                    events.push(BoundaryEvent {
                        offset: if last { duration } else { t + h_try },
                        server: k,
                        kind: BoundaryKind::HitsZero,
                        queue: y_new[..n].to_vec(),
                    });
                }
            }
            accepted += 1;
            h = if err == 0.0 {
                h_try * 5.0
            } else {
                h_try * (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            h_try
        };

        std::mem::swap(&mut y, &mut y_new);
        if first.is_none() && last {
            t = duration;
        } else {
            t += step_len;
        }
    }

    Ok(SegmentResult {
        queue: y[..n].to_vec(),
        inflow_integral: y[n..].to_vec(),
        events,
        accepted_steps: accepted,
    })
}
