use crate::error::Result;
use crate::heuristics::{DecisionRule, PriorValue};
use crate::signal_model::{SignalModel, State};

/// A signal model with its private beliefs precomputed.
///
/// The action probability here is the single implementation shared by urn
/// functions and the agent engine, so both agree bit for bit.
#[derive(Debug, Clone)]
pub(crate) struct PreparedModel {
    pub model: SignalModel,
    /// `p(s)` per signal; NaN for signals impossible in both states.
    pub beliefs: Vec<f64>,
}

impl PreparedModel {
    pub fn new(model: SignalModel) -> Result<Self> {
        let beliefs = (0..model.len())
            .map(|i| {
                if model.f0()[i] + model.f1()[i] == 0.0 {
                    Ok(f64::NAN)
                } else {
                    model.private_belief_at(i)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedModel { model, beliefs })
    }

    /// `Σ_s Pr(s | state) · σ(posterior(p(s), prior))`.
    #[inline]
    pub fn action_probability(&self, state: State, prior: PriorValue, rule: &DecisionRule) -> f64 {
        let weights = self.model.conditional(state);
        let mut total = 0.0;
        for (w, p) in weights.iter().zip(&self.beliefs) {
            if *w > 0.0 {
                total += w * rule.eval(prior.posterior(*p));
            }
        }
        total.clamp(0.0, 1.0)
    }
}
