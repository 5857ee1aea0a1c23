//! Simulation and stability analysis of piecewise-deterministic queueing
//! (PDQ) systems: parallel fluid queues whose saturation rates switch among
//! finitely many modes according to a continuous-time Markov chain, with
//! inflows set by a state-feedback routing policy.

pub mod bundled;
pub mod dynamics;
pub mod mode_chain;
pub mod monte_carlo;
pub mod routing;
pub mod scenario_file;
pub mod stability;

pub use dynamics::{Scenario, ScenarioError, Trajectory};
pub use mode_chain::{ModeChain, SteadyState};
pub use routing::{LimitingInflows, PolicySpec};
pub use stability::{classify, StabilityCertificate, StabilityClass, Verdict};
