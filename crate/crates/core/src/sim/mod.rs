//! Pursuit simulations: worlds, built-in scenarios, batch runner and
//! significance tests.

pub mod env;
pub mod runner;
pub mod scenario;
pub mod stats;

pub use env::{baseline_action, Baseline, TruthState, World};
pub use runner::{run_batch, run_episode, Agent, BatchSummary, EpisodeResult, PolicyKind};
pub use scenario::{PlannerFrame, Scenario, BUILTIN_SCENARIOS};
pub use stats::{pooled_se, proportion_ztest, welch_ttest, TestResult};
