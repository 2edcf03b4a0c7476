//! JSON configuration for the subcommands. Unknown keys are rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nll_core::analysis::LearningOptions;
use nll_core::sim::NStateConditioning;
use nll_core::{
    AgentProcessConfig, Conditioning, DecisionRule, ModelSequence, NStateModel, PriorRuleSpec,
    SignalModel, State, UrnState,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::{config_error, CliError, Classify};

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))
        .or_config()?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
        .or_config()?;
    if !value.is_object() {
        return Err(config_error(format!("{}: top level must be a JSON object", path.display())));
    }
    Ok(value)
}

pub fn parse<T: DeserializeOwned>(value: &Value) -> Result<T, CliError> {
    T::deserialize(value).or_config()
}

/// `"draw"`, or a fixed state index given as a string or an integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "Value", into = "String")]
pub enum StateChoice {
    #[default]
    Draw,
    Fixed(usize),
}

impl FromStr for StateChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "draw" {
            return Ok(StateChoice::Draw);
        }
        s.parse()
            .map(StateChoice::Fixed)
            .map_err(|_| format!("state must be `draw` or a state index, got `{s}`"))
    }
}

impl TryFrom<Value> for StateChoice {
    type Error = String;

    fn try_from(v: Value) -> Result<Self, String> {
        match v {
            Value::String(s) => s.parse(),
            Value::Number(n) => n
                .as_u64()
                .map(|i| StateChoice::Fixed(i as usize))
                .ok_or_else(|| format!("state index must be a non-negative integer, got {n}")),
            other => Err(format!("state must be `draw` or a state index, got {other}")),
        }
    }
}

impl From<StateChoice> for String {
    fn from(s: StateChoice) -> String {
        s.to_string()
    }
}

impl fmt::Display for StateChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateChoice::Draw => f.write_str("draw"),
            StateChoice::Fixed(i) => write!(f, "{i}"),
        }
    }
}

impl StateChoice {
    pub fn binary(self) -> Result<Conditioning, CliError> {
        match self {
            StateChoice::Draw => Ok(Conditioning::Draw),
            StateChoice::Fixed(i) => State::from_index(i)
                .map(Conditioning::Fixed)
                .ok_or_else(|| config_error(format!("binary state must be 0 or 1, got {i}"))),
        }
    }

    pub fn nstate(self, n: usize) -> Result<NStateConditioning, CliError> {
        match self {
            StateChoice::Draw => Ok(NStateConditioning::Draw),
            StateChoice::Fixed(i) if i < n => Ok(NStateConditioning::Fixed(i)),
            StateChoice::Fixed(i) => Err(config_error(format!("state {i} out of range for {n} states"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CyclicSpec {
    pub models: Vec<SignalModel>,
    /// Declared lower bound on every model's private-belief variance.
    pub v: f64,
}

fn default_decision() -> DecisionRule {
    DecisionRule::ProbabilityMatching
}

fn default_trials() -> u64 {
    100
}

/// Config of `nll simulate` and of each sweep cell. Exactly one of `model`,
/// `cyclic` and `nstate` is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    #[serde(default)]
    pub model: Option<SignalModel>,
    #[serde(default)]
    pub cyclic: Option<CyclicSpec>,
    #[serde(default)]
    pub nstate: Option<NStateModel>,
    #[serde(default)]
    pub prior: PriorRuleSpec,
    #[serde(default = "default_decision")]
    pub decision: DecisionRule,
    pub horizon: u64,
    /// One-based agent indices; defaults to the horizon.
    #[serde(default)]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub state: StateChoice,
    #[serde(default)]
    pub init: Option<UrnState>,
    /// Number of leading trials whose full paths are written out.
    #[serde(default)]
    pub save_trajectories: u64,
    #[serde(default)]
    pub options: LearningOptions,
}

/// A validated simulation.
#[derive(Debug, Clone)]
pub enum Plan {
    Binary(AgentProcessConfig),
    NState {
        model: NStateModel,
        horizon: u64,
        conditioning: NStateConditioning,
    },
}

impl SimulateConfig {
    pub fn checkpoints(&self) -> Vec<u64> {
        let mut cps = self.checkpoints.clone().unwrap_or_else(|| vec![self.horizon]);
        cps.sort_unstable();
        cps.dedup();
        cps
    }

    pub fn plan(&self) -> Result<Plan, CliError> {
        let sources = [self.model.is_some(), self.cyclic.is_some(), self.nstate.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(config_error("give exactly one of `model`, `cyclic` and `nstate`"));
        }
        if self.horizon == 0 {
            return Err(config_error("horizon must be at least 1"));
        }
        if self.trials == 0 {
            return Err(config_error("trials must be at least 1"));
        }
        let cps = self.checkpoints();
        if cps.is_empty() || cps[0] == 0 || cps[cps.len() - 1] > self.horizon {
            return Err(config_error(format!("checkpoints must be non-empty and lie in [1, {}]", self.horizon)));
        }
        if self.save_trajectories > self.trials {
            return Err(config_error("save_trajectories exceeds the number of trials"));
        }

        if let Some(model) = &self.nstate {
            let degroot = matches!(self.prior, PriorRuleSpec::Degroot {});
            if !degroot || self.decision != DecisionRule::ProbabilityMatching {
                return Err(config_error("the n-state engine supports DeGroot priors with probability matching only"));
            }
            if self.init.is_some() {
                return Err(config_error("the n-state engine starts from one action of each kind; `init` is not supported"));
            }
            model.validate().or_config()?;
            return Ok(Plan::NState {
                model: model.clone(),
                horizon: self.horizon,
                conditioning: self.state.nstate(model.n())?,
            });
        }

        let models = match (&self.model, &self.cyclic) {
            (Some(m), _) => ModelSequence::Single(m.clone()),
            (_, Some(c)) => ModelSequence::cyclic(c.models.clone(), c.v).or_config()?,
            _ => unreachable!("exactly one source is present"),
        };
        if matches!(self.prior, PriorRuleSpec::Quasibayes(_))
            && models.models().iter().any(|m| !m.mutually_abs_continuous())
        {
            return Err(config_error(
                "quasi-Bayes prior formation needs mutually absolutely continuous signal distributions",
            ));
        }
        let prior = self.prior.resolve(self.model.as_ref()).or_config()?;
        let first = models.models()[0].clone();
        let mut config = AgentProcessConfig::new(first, prior, self.decision.clone(), self.horizon)
            .with_models(models)
            .with_conditioning(self.state.binary()?);
        if let Some(init) = self.init {
            config = config.with_init(init);
        }
        config.validate().or_config()?;
        Ok(Plan::Binary(config))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum UrnSpec {
    Identity,
    Constant(f64),
}

/// Config of `nll urn`: either a heuristic (`model`, `prior`, `decision`,
/// `state`) or a direct `urn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UrnConfig {
    #[serde(default)]
    pub model: Option<SignalModel>,
    #[serde(default)]
    pub prior: PriorRuleSpec,
    #[serde(default = "default_decision")]
    pub decision: DecisionRule,
    #[serde(default)]
    pub state: Option<StateChoice>,
    #[serde(default)]
    pub urn: Option<UrnSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// A simulate config; grid values replace its fields cell by cell.
    pub base: Value,
    pub grid: SweepGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    /// Binary symmetric noise levels; each replaces the base model.
    #[serde(default)]
    pub epsilon: Option<Vec<f64>>,
    #[serde(default)]
    pub decision: Option<Vec<Value>>,
    #[serde(default)]
    pub prior: Option<Vec<Value>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn state_choice_forms() {
        assert_eq!(serde_json::from_value::<StateChoice>(json!("draw")).unwrap(), StateChoice::Draw);
        assert_eq!(serde_json::from_value::<StateChoice>(json!("1")).unwrap(), StateChoice::Fixed(1));
        assert_eq!(serde_json::from_value::<StateChoice>(json!(2)).unwrap(), StateChoice::Fixed(2));
        assert!(serde_json::from_value::<StateChoice>(json!("maybe")).is_err());
        assert!(StateChoice::Fixed(2).binary().is_err());
        assert_eq!(serde_json::to_value(StateChoice::Fixed(0)).unwrap(), json!("0"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let v = json!({"model": {"binary_symmetric": {"epsilon": 0.2}}, "horizon": 10, "colour": 1});
        assert!(parse::<SimulateConfig>(&v).is_err());
    }

    #[test]
    fn exactly_one_model_source() {
        let both = json!({
            "model": {"binary_symmetric": {"epsilon": 0.2}},
            "cyclic": {"models": [{"binary_symmetric": {"epsilon": 0.2}}], "v": 0.01},
            "horizon": 10
        });
        let c: SimulateConfig = parse(&both).unwrap();
        assert_eq!(c.plan().unwrap_err().exit_code(), 2);
        let none: SimulateConfig = parse(&json!({"horizon": 10})).unwrap();
        assert!(none.plan().is_err());
    }

    #[test]
    fn plan_defaults() {
        let c: SimulateConfig = parse(&json!({"model": {"binary_symmetric": {"epsilon": 0.2}}, "horizon": 50})).unwrap();
        assert_eq!(c.checkpoints(), vec![50]);
        assert_eq!(c.trials, 100);
        match c.plan().unwrap() {
            Plan::Binary(cfg) => {
                assert_eq!(cfg.horizon, 50);
                assert_eq!(cfg.decision, DecisionRule::ProbabilityMatching);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quasi_bayes_needs_absolute_continuity() {
        let v = json!({
            "model": {"mu": 0.5, "signals": ["a", "b"], "f0": [1.0, 0.0], "f1": [0.5, 0.5]},
            "prior": {"quasibayes": {"from_model": true}},
            "horizon": 10
        });
        let err = parse::<SimulateConfig>(&v).unwrap().plan().unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("absolutely continuous"), "{err}");
    }

    #[test]
    fn nstate_restrictions() {
        let v = json!({
            "nstate": {"mu": [0.5, 0.5], "signals": ["a", "b"], "likelihoods": [[0.7, 0.3], [0.3, 0.7]]},
            "horizon": 10,
            "decision": "bayes_threshold"
        });
        let c: SimulateConfig = parse(&v).unwrap();
        assert!(c.plan().is_err());
    }
}
