//! The process with `n` states and `n` actions under DeGroot priors and
//! probability matching.
//!
//! The prior is the vector of action proportions, the posterior is
//! proportional to `prior_j · Pr(s | ω_j)`, and the action is sampled from the
//! posterior. Index 0 of every probability vector is stored as the complement
//! of the others, which makes `n = 2` perform the same floating-point
//! operations as the binary engine.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seeding::{self, STATE_STREAM};
use crate::signal_model::{sample_index, SignalModel, SUM_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NStateModel {
    pub mu: Vec<f64>,
    pub signals: Vec<String>,
    /// Row `j` is the signal distribution in state `j`.
    pub likelihoods: Vec<Vec<f64>>,
}

impl NStateModel {
    pub fn new(mu: Vec<f64>, signals: Vec<String>, likelihoods: Vec<Vec<f64>>) -> Result<Self> {
        let model = NStateModel {
            mu,
            signals,
            likelihoods,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.mu.len();
        if n < 2 {
            return Err(invalid("an n-state model needs at least two states"));
        }
        if self.likelihoods.len() != n {
            return Err(invalid(format!(
                "expected {n} likelihood rows, got {}",
                self.likelihoods.len()
            )));
        }
        if self.mu.iter().any(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(invalid("state prior must be strictly positive"));
        }
        if (self.mu.iter().sum::<f64>() - 1.0).abs() > SUM_TOL {
            return Err(invalid("state prior must sum to 1"));
        }
        let width = self.signals.len();
        if width == 0 {
            return Err(invalid("signal alphabet is empty"));
        }
        for (j, row) in self.likelihoods.iter().enumerate() {
            if row.len() != width {
                return Err(invalid(format!("likelihood row {j} has the wrong length")));
            }
            if row.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
                return Err(invalid(format!("likelihood row {j} has a negative entry")));
            }
            if (row.iter().sum::<f64>() - 1.0).abs() > SUM_TOL {
                return Err(invalid(format!("likelihood row {j} does not sum to 1")));
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                if self.likelihoods[i] == self.likelihoods[j] {
                    return Err(invalid(format!(
                        "states {i} and {j} have identical signal distributions"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    /// The binary model with `f0`, `f1` the two rows, for `n = 2`.
    pub fn to_binary(&self) -> Result<SignalModel> {
        if self.n() != 2 {
            return Err(invalid("only two-state models have a binary form"));
        }
        SignalModel::new(
            self.mu[1],
            self.signals.clone(),
            self.likelihoods[0].clone(),
            self.likelihoods[1].clone(),
        )
    }

    pub fn from_binary(model: &SignalModel) -> Self {
        NStateModel {
            mu: vec![1.0 - model.mu(), model.mu()],
            signals: model.signals().to_vec(),
            likelihoods: vec![model.f0().to_vec(), model.f1().to_vec()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NStateConditioning {
    #[default]
    #[serde(rename = "draw")]
    Draw,
    #[serde(rename = "fixed")]
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NStateTrajectory {
    pub omega: usize,
    pub actions: Vec<usize>,
    /// Action counts after the last agent, including the synthetic history.
    pub terminal: Vec<u64>,
}

impl NStateTrajectory {
    /// Proportion of `action` in the history observed after `steps` agents.
    pub fn proportion_after(&self, steps: usize, action: usize) -> f64 {
        let n = self.terminal.len() as u64;
        let hits = self.actions[..steps].iter().filter(|&&a| a == action).count() as u64;
        (hits + 1) as f64 / (steps as u64 + n) as f64
    }
}

/// Draws an index from `probs` scanning from the last entry down, so that
/// for two entries index 1 is chosen iff `u < probs[1]`.
fn sample_from_top(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for j in (1..probs.len()).rev() {
        acc += probs[j];
        if u < acc {
            return j;
        }
    }
    0
}

/// Fills `out` with `v_j / Σv` for `j ≥ 1` and the complement at index 0.
fn normalize_into(values: &[f64], total: f64, out: &mut [f64]) {
    let mut rest = 0.0;
    for j in 1..values.len() {
        out[j] = values[j] / total;
        rest += out[j];
    }
    out[0] = 1.0 - rest;
}

struct Prepared {
    /// Per signal: uniform-prior posterior over states, or `None` if the
    /// signal is impossible in every state.
    beliefs: Vec<Option<Vec<f64>>>,
}

impl Prepared {
    fn new(model: &NStateModel) -> Self {
        let n = model.n();
        let beliefs = (0..model.signals.len())
            .map(|s| {
                let col: Vec<f64> = model.likelihoods.iter().map(|row| row[s]).collect();
                let total: f64 = col.iter().sum();
                (total > 0.0).then(|| {
                    let mut out = vec![0.0; n];
                    normalize_into(&col, total, &mut out);
                    out
                })
            })
            .collect();
        Prepared { beliefs }
    }
}

/// Posterior over states from `prior` and a private-belief vector `pi`.
///
/// An uninformative signal leaves the prior unchanged, a uniform prior
/// returns the private belief and a conclusive signal is decisive.
fn posterior_into(prior: &[f64], pi: &[f64], out: &mut [f64]) {
    let n = prior.len();
    if pi.iter().all(|&p| p == pi[0]) {
        out.copy_from_slice(prior);
        return;
    }
    if pi.iter().filter(|&&p| p > 0.0).count() == 1 || prior.iter().all(|&b| b == prior[0]) {
        out.copy_from_slice(pi);
        return;
    }
    let mut weights = [0.0f64; 16];
    let mut heap;
    let w: &mut [f64] = if n <= weights.len() {
        &mut weights[..n]
    } else {
        heap = vec![0.0; n];
        &mut heap
    };
    for j in 0..n {
        w[j] = pi[j] * prior[j];
    }
    let mut total = 0.0;
    for j in (0..n).rev() {
        total += w[j];
    }
    normalize_into(w, total, out);
}

/// One trial of the `n`-state process from one action of each kind.
pub fn run_trial_nstate(
    model: &NStateModel,
    horizon: u64,
    seed: u64,
    conditioning: NStateConditioning,
) -> Result<NStateTrajectory> {
    model.validate()?;
    if horizon == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    let n = model.n();
    let omega = match conditioning {
        NStateConditioning::Fixed(w) if w < n => w,
        NStateConditioning::Fixed(w) => {
            return Err(invalid(format!("state {w} out of range for {n} states")))
        }
        NStateConditioning::Draw => {
            let u: f64 = seeding::rng(seeding::derive_seed(seed, STATE_STREAM)).gen();
            sample_from_top(&model.mu, u)
        }
    };
    let prepared = Prepared::new(model);
    let mut rng = seeding::rng(seed);
    let mut counts = vec![1u64; n];
    let mut total = n as u64;
    let mut prior = vec![0.0; n];
    let mut post = vec![0.0; n];
    let mut actions = Vec::with_capacity(horizon as usize);
    for _ in 0..horizon {
        let u1: f64 = rng.gen();
        let u2: f64 = rng.gen();
        let mut rest = 0.0;
        for j in 1..n {
            prior[j] = counts[j] as f64 / total as f64;
            rest += prior[j];
        }
        prior[0] = 1.0 - rest;
        let s = sample_index(&model.likelihoods[omega], u1);
        let pi = prepared.beliefs[s]
            .as_ref()
            .expect("sampled signals have positive probability");
        posterior_into(&prior, pi, &mut post);
        let a = sample_from_top(&post, u2);
        counts[a] += 1;
        total += 1;
        actions.push(a);
    }
    Ok(NStateTrajectory {
        omega,
        actions,
        terminal: counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heuristics::{DecisionRule, PriorRule};
    use crate::signal_model::BinarySymmetricModel;
    use crate::sim::{run_trial, AgentProcessConfig, Conditioning};
    use crate::signal_model::State;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn two_states_reproduce_binary_engine() {
        let models = [
            BinarySymmetricModel::new(0.2).unwrap().to_model(),
            BinarySymmetricModel::new(0.05).unwrap().to_model_with_mu(0.3).unwrap(),
            SignalModel::from_vectors(0.5, vec![0.5, 0.3, 0.2], vec![0.1, 0.3, 0.6]).unwrap(),
        ];
        for model in models {
            let nmodel = NStateModel::from_binary(&model);
            assert_eq!(nmodel.to_binary().unwrap(), model);
            for seed in 0..10 {
                let cfg = AgentProcessConfig::new(
                    model.clone(),
                    PriorRule::DeGroot,
                    DecisionRule::ProbabilityMatching,
                    3000,
                )
                .with_conditioning(Conditioning::Draw);
                let binary = run_trial(&cfg, seed).unwrap();
                let nstate = run_trial_nstate(&nmodel, 3000, seed, NStateConditioning::Draw).unwrap();
                assert_eq!(binary.omega.index(), nstate.omega);
                let b: Vec<usize> = binary.actions().iter().map(|&a| a as usize).collect();
                assert_eq!(b, nstate.actions);
                let fixed = run_trial(&cfg.clone().with_state(State::Zero), seed).unwrap();
                let nfixed = run_trial_nstate(&nmodel, 3000, seed, NStateConditioning::Fixed(0)).unwrap();
                let b: Vec<usize> = fixed.actions().iter().map(|&a| a as usize).collect();
                assert_eq!(b, nfixed.actions);
            }
        }
    }

    #[test]
    fn identical_rows_rejected() {
        let row = vec![0.5, 0.5];
        assert!(NStateModel::new(vec![1.0 / 3.0; 3], names(2), vec![row.clone(), row.clone(), vec![0.2, 0.8]]).is_err());
        assert!(NStateModel::new(vec![0.5, 0.5, 0.0], names(2), vec![row, vec![0.1, 0.9], vec![0.2, 0.8]]).is_err());
        assert!(NStateModel::new(vec![0.5, 0.5], names(2), vec![vec![0.5, 0.6], vec![0.1, 0.9]]).is_err());
    }

    #[test]
    fn posterior_matches_bayes_rule() {
        let prior = [0.2, 0.3, 0.5];
        let pi = [0.1, 0.6, 0.3];
        let mut out = [0.0; 3];
        posterior_into(&prior, &pi, &mut out);
        let z: f64 = prior.iter().zip(&pi).map(|(a, b)| a * b).sum();
        for j in 0..3 {
            assert!((out[j] - prior[j] * pi[j] / z).abs() < 1e-15);
        }
        posterior_into(&prior, &[1.0 / 3.0; 3], &mut out);
        assert_eq!(out, prior);
    }

    #[test]
    fn separated_three_states_learn() {
        let model = NStateModel::new(
            vec![1.0 / 3.0; 3],
            names(3),
            vec![vec![0.6, 0.2, 0.2], vec![0.2, 0.6, 0.2], vec![0.2, 0.2, 0.6]],
        )
        .unwrap();
        let mut early = Vec::new();
        let mut late = Vec::new();
        for seed in 0..40 {
            let tr = run_trial_nstate(&model, 20_000, seed, NStateConditioning::Fixed(1)).unwrap();
            early.push(tr.proportion_after(100, 1));
            late.push(tr.proportion_after(20_000, 1));
        }
        early.sort_by(f64::total_cmp);
        late.sort_by(f64::total_cmp);
        assert!(late[20] > early[20]);
    }
}
