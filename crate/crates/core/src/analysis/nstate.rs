use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seeding;
use crate::sim::{run_trial_nstate, NStateConditioning, NStateModel, NStateTrajectory};

use super::stats::{quantile_sorted, wilson, Estimate};
use super::QuantilePoint;

/// Per-checkpoint summary of the `n`-state process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NStateCheckpoint {
    pub checkpoint: u64,
    /// The agent at the checkpoint plays the realized state.
    pub p_correct: Estimate,
    /// Quantiles of the proportion of correct actions observed after the checkpoint.
    pub correct_proportion: Vec<QuantilePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NStateResult {
    pub trials: u64,
    pub master_seed: u64,
    pub states: usize,
    pub confidence: f64,
    /// Trials that realized each state.
    pub state_counts: Vec<u64>,
    pub checkpoints: Vec<NStateCheckpoint>,
}

impl NStateResult {
    pub fn medians(&self) -> Vec<Option<f64>> {
        self.checkpoints
            .iter()
            .map(|c| c.correct_proportion.iter().find(|q| q.level == 0.5).map(|q| q.value))
            .collect()
    }
}

/// Runs `trials` independent `n`-state trials, trial `i` on the stream
/// derived from `(master_seed, i)`, and summarizes them at the checkpoints.
#[allow(clippy::too_many_arguments)]
pub fn estimate_nstate_learning(
    model: &NStateModel,
    horizon: u64,
    trials: u64,
    checkpoints: &[u64],
    master_seed: u64,
    conditioning: NStateConditioning,
    confidence: f64,
    quantile_levels: &[f64],
) -> Result<NStateResult> {
    model.validate()?;
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    let mut cps = checkpoints.to_vec();
    cps.sort_unstable();
    cps.dedup();
    if cps.is_empty() || cps[0] == 0 || *cps.last().unwrap() > horizon {
        return Err(invalid(format!("checkpoints must be non-empty and lie in [1, {horizon}]")));
    }
    if let NStateConditioning::Fixed(w) = conditioning {
        if w >= model.n() {
            return Err(invalid(format!("state {w} out of range for {} states", model.n())));
        }
    }
    let runs: Vec<NStateTrajectory> = (0..trials)
        .into_par_iter()
        .map(|i| run_trial_nstate(model, horizon, seeding::derive_seed(master_seed, i), conditioning))
        .collect::<Result<_>>()?;
    let mut state_counts = vec![0; model.n()];
    for r in &runs {
        state_counts[r.omega] += 1;
    }
    let checkpoints = cps
        .iter()
        .map(|&cp| -> Result<NStateCheckpoint> {
            let hits = runs.iter().filter(|r| r.actions[cp as usize - 1] == r.omega).count() as u64;
            let mut props: Vec<f64> = runs
                .iter()
                .map(|r| r.proportion_after(cp as usize, r.omega))
                .collect();
            props.sort_by(f64::total_cmp);
            Ok(NStateCheckpoint {
                checkpoint: cp,
                p_correct: wilson(hits, trials, confidence)?,
                correct_proportion: quantile_levels
                    .iter()
                    .map(|&level| QuantilePoint {
                        level,
                        value: quantile_sorted(&props, level),
                    })
                    .collect(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(NStateResult {
        trials,
        master_seed,
        states: model.n(),
        confidence,
        state_counts,
        checkpoints,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::separated_three_state;

    #[test]
    fn summary_is_deterministic_and_consistent() {
        let model = separated_three_state();
        let run = || {
            estimate_nstate_learning(&model, 200, 40, &[10, 200], 5, NStateConditioning::Draw, 0.95, &[0.5])
                .unwrap()
        };
        let a = run();
        assert_eq!(a, run());
        assert_eq!(a.state_counts.iter().sum::<u64>(), 40);
        assert_eq!(a.medians().len(), 2);
        let fixed =
            estimate_nstate_learning(&model, 50, 10, &[50], 5, NStateConditioning::Fixed(2), 0.95, &[0.5]).unwrap();
        assert_eq!(fixed.state_counts, vec![0, 0, 10]);
        assert!(estimate_nstate_learning(&model, 50, 10, &[51], 5, NStateConditioning::Draw, 0.95, &[]).is_err());
        assert!(estimate_nstate_learning(&model, 50, 10, &[5], 5, NStateConditioning::Fixed(3), 0.95, &[]).is_err());
    }
}
