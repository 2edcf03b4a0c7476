//! Simulation engine for sequential observational learning with boundedly
//! rational agents.
//!
//! Each agent forms a prior from the unordered counts of past actions, updates
//! it with a private signal by Bayes' rule, and acts through a (possibly
//! randomized) decision rule. Conditional on the state the resulting action
//! process is a generalized Pólya urn.

pub mod analysis;
pub mod error;
pub mod heuristics;
mod kernel;
pub mod seeding;
pub mod signal_model;
pub mod sim;
pub mod urn;
pub mod verify;

pub use error::{Error, Result};
pub use heuristics::{
    complementary_pair, degroot_prior, evaluate_decision, form_prior, quasibayes_params,
    quasibayes_prior, Continuity, DecisionRule, MonotoneMap, PriorRule, PriorRuleSpec, PriorValue,
    QuasiBayesParams, StepRule,
};
pub use signal_model::{
    bayes_posterior, check_fosd, dominated_binary_model, BeliefDistribution, BinarySymmetricModel,
    Condition, SignalModel, State,
};
pub use urn::{
    build_urn_function, coupled_simulate, drift_sign_scan, find_fixed_points, find_plateaus, simulate_urn,
    verify_dominance, CyclicUrn, FixedPointReport, Plateau, UrnFunction, UrnProcess, UrnState,
};
pub use sim::{
    compute_block_length, quasi_walk_coupling, run_heterogeneous, run_trial, run_trial_nstate,
    step_agent, AgentProcessConfig, Conditioning, ModelSequence, NStateModel, Trajectory,
    WalkCoupling,
};
pub use analysis::{
    enumerate_exact, estimate_learning, gamblers_ruin_escape, pilot_calibrate, simulate_walk,
    ExperimentResult, WalkSpec,
};
