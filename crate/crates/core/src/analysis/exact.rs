use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seeding;
use crate::urn::{run_urn_terminal, UrnProcess, UrnState};

/// Longest horizon accepted by [`enumerate_exact`].
pub const MAX_ENUMERATION_STEPS: u32 = 20;

/// Distribution of the terminal composition after `steps` draws, indexed by
/// the number of 1-balls added.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalDistribution {
    pub init: UrnState,
    pub steps: u32,
    /// `probs[j]` is the probability that `j` of the `steps` draws are 1.
    pub probs: Vec<f64>,
}

impl TerminalDistribution {
    pub fn prob_of(&self, terminal: UrnState) -> f64 {
        if terminal.m + terminal.k != self.init.m + self.init.k + self.steps as u64
            || terminal.k < self.init.k
        {
            return 0.0;
        }
        self.probs
            .get((terminal.k - self.init.k) as usize)
            .copied()
            .unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// Exact terminal law by summing the probability of every one of the
/// `2^steps` draw sequences.
pub fn enumerate_exact<P: UrnProcess + ?Sized>(
    f: &P,
    init: UrnState,
    steps: u32,
) -> Result<TerminalDistribution> {
    if steps > MAX_ENUMERATION_STEPS {
        return Err(Error::EnumerationTooLarge {
            steps,
            limit: MAX_ENUMERATION_STEPS,
        });
    }
    UrnState::new(init.m, init.k)?;
    let mut probs = vec![0.0; steps as usize + 1];
    fn walk<P: UrnProcess + ?Sized>(
        f: &P,
        state: UrnState,
        step: u32,
        steps: u32,
        mass: f64,
        ones: usize,
        probs: &mut [f64],
    ) {
        if step == steps {
            probs[ones] += mass;
            return;
        }
        let p = f.prob(step as u64, state.x()).clamp(0.0, 1.0);
        if p > 0.0 {
            let mut next = state;
            next.add(true);
            walk(f, next, step + 1, steps, mass * p, ones + 1, probs);
        }
        if p < 1.0 {
            let mut next = state;
            next.add(false);
            walk(f, next, step + 1, steps, mass * (1.0 - p), ones, probs);
        }
    }
    walk(f, init, 0, steps, 1.0, 0, &mut probs);
    Ok(TerminalDistribution { init, steps, probs })
}

/// Empirical terminal law from `trials` independent urn runs.
pub fn monte_carlo_terminal<P: UrnProcess + ?Sized>(
    f: &P,
    init: UrnState,
    steps: u32,
    trials: u64,
    seed: u64,
) -> Result<TerminalDistribution> {
    if trials == 0 {
        return Err(invalid("Monte Carlo estimate needs at least one trial"));
    }
    let ones: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|i| (run_urn_terminal(f, init, steps as u64, seeding::derive_seed(seed, i)).k - init.k) as usize)
        .collect();
    Ok(empirical(init, steps, ones))
}

/// Terminal law from a sample of 1-ball counts added.
pub fn empirical(init: UrnState, steps: u32, ones: impl IntoIterator<Item = usize>) -> TerminalDistribution {
    let mut counts = vec![0u64; steps as usize + 1];
    let mut n = 0u64;
    for j in ones {
        counts[j] += 1;
        n += 1;
    }
    TerminalDistribution {
        init,
        steps,
        probs: counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect(),
    }
}

/// `½ Σ |p − q|`.
pub fn total_variation(a: &TerminalDistribution, b: &TerminalDistribution) -> Result<f64> {
    if a.probs.len() != b.probs.len() {
        return Err(invalid("distributions have different supports"));
    }
    Ok(0.5 * a.probs.iter().zip(&b.probs).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Standard error scale of the total-variation distance between an exact law
/// and an empirical one from `trials` draws: `½ Σ sqrt(p(1−p)/N)`.
pub fn tv_standard_error(exact: &TerminalDistribution, trials: u64) -> f64 {
    0.5 * exact
        .probs
        .iter()
        .map(|p| (p * (1.0 - p) / trials as f64).sqrt())
        .sum::<f64>()
}
