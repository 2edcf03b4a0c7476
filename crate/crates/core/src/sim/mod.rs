//! The sequential agent process.
//!
//! Agents act one at a time starting from a synthetic history (by default one
//! action of each kind, so the first agent is `t = 3`). Each agent forms a
//! prior from the counts, draws a private signal, updates by Bayes' rule and
//! acts through the decision rule.

mod nstate;
mod walk;

pub use nstate::{run_trial_nstate, NStateConditioning, NStateModel, NStateTrajectory};
pub use walk::{
    compute_block_length, decision_threshold, quasi_walk_coupling, WalkBlock, WalkCoupling,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::heuristics::{proportion, DecisionRule, PriorRule, PriorValue};
use crate::kernel::PreparedModel;
use crate::seeding::{self, STATE_STREAM};
use crate::signal_model::{SignalModel, State};
use crate::urn::UrnState;

/// Longest supported period of a heterogeneous model sequence.
pub const MAX_PERIOD: usize = 1_000_000;

/// Slack when comparing a model's private-belief variance with the bound.
pub const VARIANCE_TOL: f64 = 1e-12;

/// Information structures faced by successive agents.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSequence {
    Single(SignalModel),
    /// Agent number `n` (zero-based) faces `models[n mod len]`. Every model has
    /// private-belief variance at least `bound`.
    Cyclic { models: Vec<SignalModel>, bound: f64 },
}

impl ModelSequence {
    pub fn cyclic(models: Vec<SignalModel>, bound: f64) -> Result<Self> {
        if models.is_empty() || models.len() > MAX_PERIOD {
            return Err(invalid(format!(
                "cyclic sequence needs between 1 and {MAX_PERIOD} models"
            )));
        }
        if !(bound > 0.0) {
            return Err(invalid("uniform informativeness bound must be positive"));
        }
        let mu = models[0].mu();
        for (index, m) in models.iter().enumerate() {
            let variance = m.private_belief_variance();
            if variance < bound - VARIANCE_TOL {
                return Err(Error::Informativeness {
                    index,
                    variance,
                    bound,
                });
            }
            if m.mu() != mu {
                return Err(invalid("all models of a cyclic sequence must share the prior mu"));
            }
        }
        Ok(ModelSequence::Cyclic { models, bound })
    }

    pub fn models(&self) -> &[SignalModel] {
        match self {
            ModelSequence::Single(m) => std::slice::from_ref(m),
            ModelSequence::Cyclic { models, .. } => models,
        }
    }

    pub fn mu(&self) -> f64 {
        self.models()[0].mu()
    }
}

/// How the state is chosen for a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Conditioning {
    /// Draw `ω = 1` with probability `mu` from a dedicated stream.
    #[default]
    #[serde(rename = "draw")]
    Draw,
    #[serde(rename = "fixed")]
    Fixed(State),
}

/// How randomness is consumed per agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DrawDiscipline {
    /// Two uniforms per agent: the signal by inverse CDF, then the action.
    #[default]
    Agent,
    /// One uniform per agent against the marginal action probability, i.e.
    /// the urn function evaluated at the agent's history.
    Urn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentProcessConfig {
    pub models: ModelSequence,
    pub prior: PriorRule,
    pub decision: DecisionRule,
    pub init: UrnState,
    pub horizon: u64,
    pub conditioning: Conditioning,
    pub discipline: DrawDiscipline,
}

impl AgentProcessConfig {
    pub fn new(model: SignalModel, prior: PriorRule, decision: DecisionRule, horizon: u64) -> Self {
        AgentProcessConfig {
            models: ModelSequence::Single(model),
            prior,
            decision,
            init: UrnState::default(),
            horizon,
            conditioning: Conditioning::Draw,
            discipline: DrawDiscipline::Agent,
        }
    }

    pub fn with_models(mut self, models: ModelSequence) -> Self {
        self.models = models;
        self
    }

    pub fn with_state(mut self, state: State) -> Self {
        self.conditioning = Conditioning::Fixed(state);
        self
    }

    pub fn with_conditioning(mut self, conditioning: Conditioning) -> Self {
        self.conditioning = conditioning;
        self
    }

    pub fn with_init(mut self, init: UrnState) -> Self {
        self.init = init;
        self
    }

    pub fn with_horizon(mut self, horizon: u64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_discipline(mut self, discipline: DrawDiscipline) -> Self {
        self.discipline = discipline;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        UrnState::new(self.init.m, self.init.k)?;
        // tabular priors may miss entries; fail before any randomness is used
        if let PriorRule::Tabular(_) = self.prior {
            return Err(invalid(
                "tabular priors are exploratory and cannot drive a full simulation",
            ));
        }
        if let ModelSequence::Cyclic { models, bound } = &self.models {
            ModelSequence::cyclic(models.clone(), *bound)?;
        }
        if self.prior.is_quasi_bayes() {
            if let Some(i) = self
                .models
                .models()
                .iter()
                .position(|m| !m.mutually_abs_continuous())
            {
                return Err(invalid(format!(
                    "quasi-Bayesian prior needs mutually absolutely continuous f0 and f1; model {i} is not"
                )));
            }
        }
        Ok(())
    }
}

/// What one agent did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    /// Zero-based agent index.
    pub step: u64,
    /// Agent index counting the synthetic history (`m + k + 1`).
    pub t: u64,
    pub model_index: usize,
    /// History observed by the agent.
    pub m: u64,
    pub k: u64,
    pub x: f64,
    pub prior: f64,
    pub prior_log_odds: f64,
    /// Signal index and posterior; absent under the urn draw discipline.
    pub signal: Option<usize>,
    pub posterior: Option<f64>,
    pub action: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub omega: State,
    pub records: Vec<AgentRecord>,
    pub terminal: UrnState,
}

impl Trajectory {
    pub fn actions(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.action).collect()
    }
}

/// Outcome of one agent step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentStep {
    pub action: u8,
    pub prior: PriorValue,
    pub signal: usize,
    pub posterior: f64,
}

/// One agent under the two-uniform discipline: `draws.0` selects the signal
/// from `model_t`'s distribution in state `omega`, `draws.1` the action.
pub fn step_agent(
    config: &AgentProcessConfig,
    history: UrnState,
    model_t: &SignalModel,
    omega: State,
    draws: (f64, f64),
) -> Result<AgentStep> {
    let prior = config.prior.value(history.m, history.k)?;
    let signal = model_t.sample_signal(omega, draws.0);
    let p = model_t.private_belief_at(signal)?;
    let posterior = prior.posterior(p);
    let action = (draws.1 < config.decision.eval(posterior)) as u8;
    Ok(AgentStep {
        action,
        prior,
        signal,
        posterior,
    })
}

/// A validated configuration with its models prepared for fast stepping.
pub(crate) struct Engine<'a> {
    config: &'a AgentProcessConfig,
    prepared: Vec<PreparedModel>,
}

impl<'a> Engine<'a> {
    pub fn new(config: &'a AgentProcessConfig) -> Result<Self> {
        config.validate()?;
        let prepared = config
            .models
            .models()
            .iter()
            .map(|m| PreparedModel::new(m.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Engine { config, prepared })
    }

    pub fn draw_state(&self, seed: u64) -> State {
        match self.config.conditioning {
            Conditioning::Fixed(s) => s,
            Conditioning::Draw => {
                let u: f64 = seeding::rng(seeding::derive_seed(seed, STATE_STREAM)).gen();
                if u < self.config.models.mu() {
                    State::One
                } else {
                    State::Zero
                }
            }
        }
    }

    /// Probability that the next agent plays 1 given history and state.
    pub fn action_probability(&self, step: u64, history: UrnState, omega: State) -> f64 {
        let model = &self.prepared[(step % self.prepared.len() as u64) as usize];
        let prior = self
            .config
            .prior
            .value(history.m, history.k)
            .expect("validated prior rule");
        model.action_probability(omega, prior, &self.config.decision)
    }

    /// Runs one trial, handing each agent record to `visit`.
    pub fn run(&self, seed: u64, mut visit: impl FnMut(&AgentRecord)) -> (State, UrnState) {
        let omega = self.draw_state(seed);
        let mut rng = seeding::rng(seed);
        let mut h = self.config.init;
        let period = self.prepared.len() as u64;
        let rule = &self.config.decision;
        for step in 0..self.config.horizon {
            let model_index = (step % period) as usize;
            let model = &self.prepared[model_index];
            let prior = self
                .config
                .prior
                .value(h.m, h.k)
                .expect("validated prior rule");
            let (signal, posterior, action) = match self.config.discipline {
                DrawDiscipline::Agent => {
                    let u1: f64 = rng.gen();
                    let u2: f64 = rng.gen();
                    let s = model.model.sample_signal(omega, u1);
                    let post = prior.posterior(model.beliefs[s]);
                    (Some(s), Some(post), u2 < rule.eval(post))
                }
                DrawDiscipline::Urn => {
                    let u: f64 = rng.gen();
                    (None, None, u < model.action_probability(omega, prior, rule))
                }
            };
            let (prior_p, prior_l) = match prior {
                PriorValue::Prob(p) => (p, crate::signal_model::logit(p)),
                PriorValue::LogOdds(l) => (crate::signal_model::logistic(l), l),
            };
            visit(&AgentRecord {
                step,
                t: h.t(),
                model_index,
                m: h.m,
                k: h.k,
                x: proportion(h.m, h.k),
                prior: prior_p,
                prior_log_odds: prior_l,
                signal,
                posterior,
                action: action as u8,
            });
            h.add(action);
        }
        (omega, h)
    }
}

/// Full trajectory of one trial, deterministic in `seed`.
pub fn run_trial(config: &AgentProcessConfig, seed: u64) -> Result<Trajectory> {
    let engine = Engine::new(config)?;
    let mut records = Vec::with_capacity(config.horizon as usize);
    let (omega, terminal) = engine.run(seed, |r| records.push(*r));
    Ok(Trajectory {
        omega,
        records,
        terminal,
    })
}

/// Runs one trial without storing it, handing each agent record to `visit`.
/// Returns the state and the final history.
pub fn simulate_with(
    config: &AgentProcessConfig,
    seed: u64,
    visit: impl FnMut(&AgentRecord),
) -> Result<(State, UrnState)> {
    Ok(Engine::new(config)?.run(seed, visit))
}

/// [`run_trial`] for a heterogeneous sequence; rejects sequences that break
/// the uniform informativeness bound.
pub fn run_heterogeneous(config: &AgentProcessConfig, seed: u64) -> Result<Trajectory> {
    if let ModelSequence::Cyclic { models, bound } = &config.models {
        ModelSequence::cyclic(models.clone(), *bound)?;
    }
    run_trial(config, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristics::{complementary_pair, QuasiBayesParams};
    use crate::signal_model::BinarySymmetricModel;
    use crate::urn::{build_urn_function, simulate_urn};

    fn eps(e: f64) -> SignalModel {
        BinarySymmetricModel::new(e).unwrap().to_model()
    }

    fn pm_config(e: f64, horizon: u64) -> AgentProcessConfig {
        AgentProcessConfig::new(eps(e), PriorRule::DeGroot, DecisionRule::ProbabilityMatching, horizon)
    }

    #[test]
    fn step_agent_action_probability() {
        // enumerate a fine grid of (u1, u2): the fraction of 1-actions is P(a=1)
        let cfg = pm_config(0.2, 1);
        let model = eps(0.2);
        let n = 1000;
        let mut ones = 0;
        for i in 0..n {
            for j in 0..n {
                let draws = ((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
                ones += step_agent(&cfg, UrnState::default(), &model, State::One, draws)
                    .unwrap()
                    .action as u32;
            }
        }
        assert!((ones as f64 / (n * n) as f64 - 0.58).abs() < 1e-3);
    }

    #[test]
    fn step_agent_threshold_and_quasi_bayes() {
        let cfg = AgentProcessConfig::new(eps(0.2), PriorRule::DeGroot, DecisionRule::BayesThreshold, 1);
        // s1 has p = 0.7, posterior 0.7 >= 1/2 at x = 1/2
        let s = step_agent(&cfg, UrnState::default(), &eps(0.2), State::Zero, (0.99, 0.999_999)).unwrap();
        assert_eq!((s.signal, s.action), (1, 1));

        let qb = PriorRule::QuasiBayes(QuasiBayesParams::new(0.7, 0.3).unwrap());
        let cfg = AgentProcessConfig::new(eps(0.2), qb, DecisionRule::ProbabilityMatching, 1);
        let s = step_agent(&cfg, UrnState::default(), &eps(0.2), State::One, (0.5, 0.5)).unwrap();
        assert!((s.prior.probability() - 0.5).abs() < 1e-12);
        let urn = build_urn_function(&eps(0.2), &PriorRule::DeGroot, &DecisionRule::ProbabilityMatching, State::One)
            .unwrap();
        let engine = Engine::new(&cfg).unwrap();
        let p = engine.action_probability(0, UrnState::default(), State::One);
        assert!((p - 0.58).abs() < 1e-12 && (urn.eval(0.5) - 0.58).abs() < 1e-12);
    }

    #[test]
    fn horizon_one_has_uniform_prior() {
        for prior in [
            PriorRule::DeGroot,
            PriorRule::QuasiBayes(QuasiBayesParams::new(0.7, 0.3).unwrap()),
            PriorRule::SizeInvariant(crate::heuristics::MonotoneMap::piecewise_linear(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap()),
        ] {
            let cfg = AgentProcessConfig::new(eps(0.2), prior, DecisionRule::ProbabilityMatching, 1);
            let tr = run_trial(&cfg, 5).unwrap();
            assert_eq!(tr.records.len(), 1);
            assert!((tr.records[0].prior - 0.5).abs() < 1e-12);
            assert_eq!(tr.records[0].t, 3);
        }
    }

    #[test]
    fn urn_discipline_matches_simulate_urn() {
        for seed in 0..20 {
            let cfg = pm_config(0.2, 2000)
                .with_state(State::One)
                .with_discipline(DrawDiscipline::Urn);
            let tr = run_trial(&cfg, seed).unwrap();
            let f = build_urn_function(&eps(0.2), &PriorRule::DeGroot, &DecisionRule::ProbabilityMatching, State::One)
                .unwrap();
            let urn = simulate_urn(&f, UrnState::default(), 2000, seed).unwrap();
            assert_eq!(tr.actions(), urn.increments());
        }
        let (g, _) = complementary_pair(0.3).unwrap();
        let cfg = AgentProcessConfig::new(eps(0.1), PriorRule::SizeInvariant(g.clone()), DecisionRule::BayesThreshold, 500)
            .with_state(State::Zero)
            .with_discipline(DrawDiscipline::Urn);
        let f = build_urn_function(&eps(0.1), &PriorRule::SizeInvariant(g), &DecisionRule::BayesThreshold, State::Zero)
            .unwrap();
        assert_eq!(
            run_trial(&cfg, 77).unwrap().actions(),
            simulate_urn(&f, UrnState::default(), 500, 77).unwrap().increments()
        );
    }

    #[test]
    fn threshold_cascade_after_first_one() {
        // at x = 1/2 only s1 (p = 0.6) gives posterior >= 1/2; in state 0, s1
        // has probability 0.4, so u1 >= 0.6 selects it
        let cfg = AgentProcessConfig::new(eps(0.1), PriorRule::DeGroot, DecisionRule::BayesThreshold, 50)
            .with_state(State::Zero);
        let seed = (0..1000u64)
            .find(|&s| {
                let mut rng = seeding::rng(s);
                let u1: f64 = rng.gen();
                u1 >= 0.6
            })
            .unwrap();
        let tr = run_trial(&cfg, seed).unwrap();
        assert_eq!(tr.records[0].action, 1);
        assert!((tr.records[1].x - 2.0 / 3.0).abs() < 1e-15);
        assert!(tr.records.iter().all(|r| r.action == 1));
    }

    #[test]
    fn determinism_and_state_draw() {
        let cfg = pm_config(0.2, 300);
        assert_eq!(run_trial(&cfg, 9).unwrap(), run_trial(&cfg, 9).unwrap());
        let states: Vec<State> = (0..400).map(|s| run_trial(&cfg.clone().with_horizon(1), s).unwrap().omega).collect();
        let ones = states.iter().filter(|s| **s == State::One).count();
        assert!(ones > 150 && ones < 250);
    }

    #[test]
    fn heterogeneous_sequences() {
        let cfg = pm_config(0.2, 400).with_state(State::One);
        let constant = cfg
            .clone()
            .with_models(ModelSequence::cyclic(vec![eps(0.2), eps(0.2)], 0.01).unwrap());
        assert_eq!(run_heterogeneous(&constant, 4).unwrap().actions(), run_trial(&cfg, 4).unwrap().actions());

        let alt = cfg
            .clone()
            .with_models(ModelSequence::cyclic(vec![eps(0.1), eps(0.3)], 0.01).unwrap());
        let tr = run_heterogeneous(&alt, 4).unwrap();
        assert_eq!(tr.records[3].model_index, 1);
        assert_eq!(tr.records[4].model_index, 0);

        assert!(matches!(
            ModelSequence::cyclic(vec![eps(0.3), eps(0.01)], 0.01),
            Err(Error::Informativeness { index: 1, .. })
        ));
        assert!(ModelSequence::cyclic(vec![eps(0.3)], 0.0).is_err());
    }

    #[test]
    fn quasi_bayes_needs_absolute_continuity() {
        let model = SignalModel::from_vectors(0.5, vec![0.5, 0.5, 0.0], vec![0.0, 0.5, 0.5]).unwrap();
        let qb = PriorRule::QuasiBayes(QuasiBayesParams::new(0.7, 0.3).unwrap());
        let cfg = AgentProcessConfig::new(model, qb, DecisionRule::ProbabilityMatching, 10);
        assert!(run_trial(&cfg, 1).is_err());
    }
}
