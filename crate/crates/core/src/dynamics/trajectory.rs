use std::io::{self, Write};

use rand::Rng;

use super::integrator::{integrate_between_switches, BoundaryKind, IntegratorConfig};
use super::{DynamicsError, Scenario};
use crate::mode_chain::ModePath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    ModeSwitch,
    QueueHitsZero,
    QueueLeavesZero,
    Sample,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::ModeSwitch => "ModeSwitch",
            EventKind::QueueHitsZero => "QueueHitsZero",
            EventKind::QueueLeavesZero => "QueueLeavesZero",
            EventKind::Sample => "Sample",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEvent {
    pub time: f64,
    pub kind: EventKind,
    /// Mode in force from this event on (the new mode for a switch).
    pub mode: usize,
    pub queue: Vec<f64>,
}

/// A simulated hybrid path.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub events: Vec<TrajectoryEvent>,
    pub horizon: f64,
    pub initial_mode: usize,
    pub mode_count: usize,
    /// Time spent in each mode.
    pub occupancy_time: Vec<f64>,
    /// `∫_0^horizon φ_k(I(s), Q(s)) ds` per server.
    pub inflow_integral: Vec<f64>,
}

impl Trajectory {
    pub fn servers(&self) -> usize {
        self.events[0].queue.len()
    }

    pub fn samples(&self) -> impl Iterator<Item = &TrajectoryEvent> {
        self.events.iter().filter(|e| e.kind == EventKind::Sample)
    }

    pub fn initial_queue(&self) -> &[f64] {
        &self.events[0].queue
    }

    pub fn final_queue(&self) -> &[f64] {
        &self.events.last().expect("trajectory has events").queue
    }

    /// The mode path underlying this trajectory.
    pub fn mode_path(&self) -> ModePath {
        let mut epochs = vec![0.0];
        let mut modes = vec![self.initial_mode];
        for e in self.events.iter().filter(|e| e.kind == EventKind::ModeSwitch) {
            epochs.push(e.time);
            modes.push(e.mode);
        }
        ModePath {
            epochs,
            modes,
            horizon: self.horizon,
            mode_count: self.mode_count,
        }
    }

    /// CSV with header `time,event_kind,mode,q_1..q_n`; modes are 1-based.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "time,event_kind,mode")?;
        for k in 1..=self.servers() {
            write!(w, ",q_{k}")?;
        }
        writeln!(w)?;
        for e in &self.events {
            write!(w, "{},{},{}", e.time, e.kind.as_str(), e.mode + 1)?;
            for q in &e.queue {
                write!(w, ",{q}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Simulates the hybrid process from `(initial_mode, q0)` on `[0, horizon]`.
///
/// Mode epochs are drawn exactly from the chain; between epochs the queues
/// are integrated with boundary-event localization. Samples are recorded at
/// `0, sample_dt, 2·sample_dt, …` and at the horizon.
pub fn simulate_trajectory<R: Rng + ?Sized>(
    scn: &Scenario,
    initial_mode: usize,
    q0: &[f64],
    horizon: f64,
    sample_dt: f64,
    rng: &mut R,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    let n = scn.servers();
    let m = scn.modes();
    if initial_mode >= m {
        return Err(DynamicsError::InvalidInput(format!(
            "initial mode {} out of range 1..={m}",
            initial_mode + 1
        )));
    }
    if q0.len() != n || q0.iter().any(|q| !(*q >= 0.0 && q.is_finite())) {
        return Err(DynamicsError::InvalidInput(format!(
            "initial queue must be {n} non-negative finite entries"
        )));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(DynamicsError::InvalidInput(format!("invalid horizon {horizon}")));
    }
    if !(sample_dt > 0.0 && sample_dt.is_finite()) {
        return Err(DynamicsError::InvalidInput(format!("invalid sample_dt {sample_dt}")));
    }

    let chain = scn.chain();
    let mut events = vec![TrajectoryEvent {
        time: 0.0,
        kind: EventKind::Sample,
        mode: initial_mode,
        queue: q0.to_vec(),
    }];
    let mut occupancy_time = vec![0.0; m];
    let mut inflow_integral = vec![0.0; n];
    let mut mode = initial_mode;
    let mut q = q0.to_vec();
    let mut t = 0.0;
    let mut next_switch = chain.sample_holding_time(mode, rng);
    let mut sample_idx: u64 = 1;

    while t < horizon {
        let mut next_sample = sample_idx as f64 * sample_dt;
        if next_sample >= horizon * (1.0 - 1e-12) {
            next_sample = horizon;
        }
        let target = next_switch.min(next_sample).min(horizon);
        let seg = integrate_between_switches(scn, mode, &q, target - t, cfg).map_err(|e| match e {
            DynamicsError::StepFailure { time, mode } => DynamicsError::StepFailure {
                time: t + time,
                mode,
            },
            other => other,
        })?;
        for ev in seg.events {
            events.push(TrajectoryEvent {
                time: t + ev.offset,
                kind: match ev.kind {
                    BoundaryKind::HitsZero => EventKind::QueueHitsZero,
                    BoundaryKind::LeavesZero => EventKind::QueueLeavesZero,
                },
                mode,
                queue: ev.queue,
            });
        }
        occupancy_time[mode] += target - t;
        for (acc, x) in inflow_integral.iter_mut().zip(&seg.inflow_integral) {
            *acc += x;
        }
        q = seg.queue;
        t = target;

        if target == next_switch && target < horizon {
            mode = chain.sample_next_mode(mode, rng);
            events.push(TrajectoryEvent {
                time: t,
                kind: EventKind::ModeSwitch,
                mode,
                queue: q.clone(),
            });
            next_switch = t + chain.sample_holding_time(mode, rng);
        }
        if target == next_sample {
            events.push(TrajectoryEvent {
                time: t,
                kind: EventKind::Sample,
                mode,
                queue: q.clone(),
            });
            sample_idx += 1;
        }
    }

    Ok(Trajectory {
        events,
        horizon,
        initial_mode,
        mode_count: m,
        occupancy_time,
        inflow_integral,
    })
}
