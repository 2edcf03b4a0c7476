//! Monte Carlo estimation, exact small-instance oracles, gambler's-ruin
//! references and pilot calibration.

mod calibrate;
mod exact;
mod experiment;
mod nstate;
mod stats;
mod walk;

pub use calibrate::{
    config_hash, load_or_calibrate, pilot_calibrate, BatchStatistic, Calibration, PilotSpec,
};
pub use exact::{
    empirical, enumerate_exact, monte_carlo_terminal, total_variation, tv_standard_error,
    TerminalDistribution, MAX_ENUMERATION_STEPS,
};
pub use experiment::{
    agent_trial, estimate_learning, estimate_urn_learning, run_experiment, summarize,
    ConditionalSummary, Correctness, ExperimentResult, HerdFraction, LearningOptions,
    QuantilePoint, TrialOutcome, DEFAULT_HERD_THRESHOLDS, DEFAULT_QUANTILE_LEVELS,
};
pub use nstate::{estimate_nstate_learning, NStateCheckpoint, NStateResult};
pub use stats::{normal_quantile, quantile, wilson, Estimate};
pub use walk::{gamblers_ruin_escape, simulate_walk, WalkEstimate, WalkSpec, DEFAULT_ESCAPE_CAP};
