use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seeding;
use crate::signal_model::State;
use crate::sim::{simulate_with, AgentProcessConfig, Engine};
use crate::urn::{UrnProcess, UrnState};

use super::stats::{quantile_sorted, wilson, Estimate};

pub const DEFAULT_QUANTILE_LEVELS: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];
pub const DEFAULT_HERD_THRESHOLDS: [f64; 3] = [0.1, 0.5, 0.9];

/// What counts as a correct action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correctness {
    /// The action equals the realized state.
    #[default]
    MatchState,
    /// The action equals a fixed value.
    Action(u8),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningOptions {
    pub confidence: f64,
    pub quantile_levels: Vec<f64>,
    pub herd_thresholds: Vec<f64>,
    pub correct: Correctness,
}

impl Default for LearningOptions {
    fn default() -> Self {
        LearningOptions {
            confidence: 0.95,
            quantile_levels: DEFAULT_QUANTILE_LEVELS.to_vec(),
            herd_thresholds: DEFAULT_HERD_THRESHOLDS.to_vec(),
            correct: Correctness::MatchState,
        }
    }
}

impl LearningOptions {
    fn validate(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(invalid("confidence must lie in (0,1)"));
        }
        if self.quantile_levels.iter().any(|q| !(0.0..=1.0).contains(q))
            || self.quantile_levels.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(invalid("quantile levels must be increasing within [0,1]"));
        }
        if self.herd_thresholds.iter().any(|h| !(0.0..=1.0).contains(h)) {
            return Err(invalid("herd thresholds must lie in [0,1]"));
        }
        Ok(())
    }
}

/// What a single trial contributes to an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub omega: State,
    /// Action of the agent at each checkpoint.
    pub actions: Vec<u8>,
    /// Proportion observed by the agent at each checkpoint.
    pub x: Vec<f64>,
    /// Proportion after the last agent.
    pub x_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantilePoint {
    pub level: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HerdFraction {
    pub threshold: f64,
    /// Fraction of trials with final proportion strictly above / below the threshold.
    pub above: f64,
    pub below: f64,
}

/// Summary over the trials that realized one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalSummary {
    pub omega: State,
    pub trials: u64,
    /// Per checkpoint; absent when no trial realized this state.
    pub p_correct: Vec<Option<Estimate>>,
    pub x_quantiles: Vec<Vec<QuantilePoint>>,
    pub herd_fractions: Vec<HerdFraction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub trials: u64,
    pub master_seed: u64,
    pub confidence: f64,
    /// One-based agent indices.
    pub checkpoints: Vec<u64>,
    pub p_correct: Vec<Estimate>,
    pub herd_fractions: Vec<HerdFraction>,
    pub conditional: Vec<ConditionalSummary>,
    /// Wall time; left empty by the library so results stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

impl ExperimentResult {
    pub fn estimates(&self) -> Vec<f64> {
        self.p_correct.iter().map(|e| e.estimate).collect()
    }

    /// Point estimates never decrease from one checkpoint to the next.
    pub fn nondecreasing(&self) -> bool {
        self.p_correct.windows(2).all(|w| w[0].estimate <= w[1].estimate)
    }

    pub fn herd_above(&self, threshold: f64) -> Option<f64> {
        self.herd_fractions
            .iter()
            .find(|h| h.threshold == threshold)
            .map(|h| h.above)
    }
}

fn normalize_checkpoints(checkpoints: &[u64], horizon: u64) -> Result<Vec<u64>> {
    let mut cps = checkpoints.to_vec();
    cps.sort_unstable();
    cps.dedup();
    if cps.is_empty() {
        return Err(invalid("at least one checkpoint is required"));
    }
    if cps[0] == 0 || *cps.last().unwrap() > horizon {
        return Err(invalid(format!("checkpoints must lie in [1, {horizon}]")));
    }
    Ok(cps)
}

/// Estimates `P(a_t = ω)` at the checkpoints from `trials` independent runs.
/// Trial `i` uses the stream derived from `(master_seed, i)`.
pub fn estimate_learning(
    config: &AgentProcessConfig,
    trials: u64,
    checkpoints: &[u64],
    master_seed: u64,
    options: &LearningOptions,
) -> Result<ExperimentResult> {
    Engine::new(config)?;
    let cps = normalize_checkpoints(checkpoints, config.horizon)?;
    run_experiment(trials, &cps, master_seed, options, |seed| {
        agent_trial(config, &cps, seed).expect("validated configuration")
    })
}

/// One trial of the agent process reduced to its checkpoint values.
pub fn agent_trial(config: &AgentProcessConfig, checkpoints: &[u64], seed: u64) -> Result<TrialOutcome> {
    let mut actions = Vec::with_capacity(checkpoints.len());
    let mut x = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    let (omega, terminal) = simulate_with(config, seed, |rec| {
        if next < checkpoints.len() && rec.step + 1 == checkpoints[next] {
            actions.push(rec.action);
            x.push(rec.x);
            next += 1;
        }
    })?;
    Ok(TrialOutcome {
        omega,
        actions,
        x,
        x_final: terminal.x(),
    })
}

/// [`estimate_learning`] for an urn process whose draws are the actions,
/// with the state fixed to `state`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_urn_learning<P: UrnProcess + ?Sized>(
    f: &P,
    state: State,
    init: UrnState,
    horizon: u64,
    trials: u64,
    checkpoints: &[u64],
    master_seed: u64,
    options: &LearningOptions,
) -> Result<ExperimentResult> {
    UrnState::new(init.m, init.k)?;
    let cps = normalize_checkpoints(checkpoints, horizon)?;
    run_experiment(trials, &cps, master_seed, options, |seed| {
        let mut rng = seeding::rng(seed);
        let mut h = init;
        let mut actions = Vec::with_capacity(cps.len());
        let mut x = Vec::with_capacity(cps.len());
        let mut next = 0;
        for step in 0..horizon {
            let xt = h.x();
            let one = rng.gen::<f64>() < f.prob(step, xt);
            if next < cps.len() && step + 1 == cps[next] {
                actions.push(one as u8);
                x.push(xt);
                next += 1;
            }
            h.add(one);
        }
        TrialOutcome {
            omega: state,
            actions,
            x,
            x_final: h.x(),
        }
    })
}

/// Runs trials in parallel and reduces them in trial order.
pub fn run_experiment<F>(
    trials: u64,
    checkpoints: &[u64],
    master_seed: u64,
    options: &LearningOptions,
    trial: F,
) -> Result<ExperimentResult>
where
    F: Fn(u64) -> TrialOutcome + Sync,
{
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    options.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|i| trial(seeding::derive_seed(master_seed, i)))
        .collect();
    summarize(&outcomes, checkpoints, master_seed, options)
}

fn is_correct(correct: Correctness, omega: State, action: u8) -> bool {
    match correct {
        Correctness::MatchState => action as usize == omega.index(),
        Correctness::Action(a) => action == a,
    }
}

fn herd_fractions(outcomes: &[&TrialOutcome], thresholds: &[f64]) -> Vec<HerdFraction> {
    let n = outcomes.len().max(1) as f64;
    thresholds
        .iter()
        .map(|&threshold| HerdFraction {
            threshold,
            above: outcomes.iter().filter(|o| o.x_final > threshold).count() as f64 / n,
            below: outcomes.iter().filter(|o| o.x_final < threshold).count() as f64 / n,
        })
        .collect()
}

/// Aggregates trial outcomes, in the order given.
pub fn summarize(
    outcomes: &[TrialOutcome],
    checkpoints: &[u64],
    master_seed: u64,
    options: &LearningOptions,
) -> Result<ExperimentResult> {
    let all: Vec<&TrialOutcome> = outcomes.iter().collect();
    let p_correct_for = |group: &[&TrialOutcome]| -> Result<Vec<Estimate>> {
        (0..checkpoints.len())
            .map(|c| {
                let hits = group
                    .iter()
                    .filter(|o| is_correct(options.correct, o.omega, o.actions[c]))
                    .count() as u64;
                wilson(hits, group.len() as u64, options.confidence)
            })
            .collect()
    };
    let conditional = [State::Zero, State::One]
        .into_iter()
        .map(|omega| -> Result<ConditionalSummary> {
            let group: Vec<&TrialOutcome> = all.iter().copied().filter(|o| o.omega == omega).collect();
            if group.is_empty() {
                return Ok(ConditionalSummary {
                    omega,
                    trials: 0,
                    p_correct: vec![None; checkpoints.len()],
                    x_quantiles: vec![Vec::new(); checkpoints.len()],
                    herd_fractions: Vec::new(),
                });
            }
            let x_quantiles = (0..checkpoints.len())
                .map(|c| {
                    let mut xs: Vec<f64> = group.iter().map(|o| o.x[c]).collect();
                    xs.sort_by(f64::total_cmp);
                    options
                        .quantile_levels
                        .iter()
                        .map(|&level| QuantilePoint {
                            level,
                            value: quantile_sorted(&xs, level),
                        })
                        .collect()
                })
                .collect();
            Ok(ConditionalSummary {
                omega,
                trials: group.len() as u64,
                p_correct: p_correct_for(&group)?.into_iter().map(Some).collect(),
                x_quantiles,
                herd_fractions: herd_fractions(&group, &options.herd_thresholds),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        trials: outcomes.len() as u64,
        master_seed,
        confidence: options.confidence,
        checkpoints: checkpoints.to_vec(),
        p_correct: p_correct_for(&all)?,
        herd_fractions: herd_fractions(&all, &options.herd_thresholds),
        conditional,
        runtime_seconds: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristics::{DecisionRule, PriorRule};
    use crate::signal_model::BinarySymmetricModel;
    use crate::urn::UrnFunction;

    #[test]
    fn constant_urn_is_always_correct() {
        let opts = LearningOptions {
            correct: Correctness::Action(1),
            ..Default::default()
        };
        let r = estimate_urn_learning(
            &UrnFunction::constant(1.0).unwrap(),
            State::One,
            UrnState::default(),
            100,
            50,
            &[1, 10, 100],
            1,
            &opts,
        )
        .unwrap();
        for e in &r.p_correct {
            assert_eq!((e.estimate, e.ci_high), (1.0, 1.0));
        }
        assert_eq!(r.herd_above(0.9), Some(1.0));
    }

    #[test]
    fn deterministic_and_order_invariant() {
        let model = BinarySymmetricModel::new(0.2).unwrap().to_model();
        let cfg = AgentProcessConfig::new(model, PriorRule::DeGroot, DecisionRule::ProbabilityMatching, 500);
        let opts = LearningOptions::default();
        let a = estimate_learning(&cfg, 64, &[10, 100, 500], 9, &opts).unwrap();
        let b = estimate_learning(&cfg, 64, &[500, 10, 100], 9, &opts).unwrap();
        assert_eq!(a, b);
        // reducing the same outcomes in reverse order changes nothing but the order
        let cps = [10, 100, 500];
        let mut outs: Vec<TrialOutcome> = (0..64)
            .map(|i| agent_trial(&cfg, &cps, seeding::derive_seed(9, i)).unwrap())
            .collect();
        assert_eq!(summarize(&outs, &cps, 9, &opts).unwrap(), a);
        outs.reverse();
        assert_eq!(summarize(&outs, &cps, 9, &opts).unwrap().p_correct, a.p_correct);
        for e in &a.p_correct {
            assert!(e.ci_low <= e.estimate && e.estimate <= e.ci_high);
        }
        for c in &a.conditional {
            for qs in &c.x_quantiles {
                assert!(qs.windows(2).all(|w| w[0].value <= w[1].value));
            }
        }
    }

    #[test]
    fn rejects_bad_checkpoints() {
        let model = BinarySymmetricModel::new(0.2).unwrap().to_model();
        let cfg = AgentProcessConfig::new(model, PriorRule::DeGroot, DecisionRule::ProbabilityMatching, 50);
        let opts = LearningOptions::default();
        assert!(estimate_learning(&cfg, 4, &[0], 1, &opts).is_err());
        assert!(estimate_learning(&cfg, 4, &[51], 1, &opts).is_err());
        assert!(estimate_learning(&cfg, 0, &[5], 1, &opts).is_err());
    }
}
