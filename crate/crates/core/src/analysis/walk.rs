use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::seeding;

use super::stats::{wilson, Estimate};

/// Simple random walk stepping up with probability `up_prob`, started at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSpec {
    pub up_prob: f64,
    pub start: u64,
}

impl WalkSpec {
    pub fn new(up_prob: f64, start: u64) -> Result<Self> {
        if !(up_prob > 0.0 && up_prob < 1.0) {
            return Err(invalid(format!("up probability must lie in (0,1), got {up_prob}")));
        }
        if start == 0 {
            return Err(invalid("walk must start at a positive level"));
        }
        Ok(WalkSpec { up_prob, start })
    }
}

/// Default level at which a walk is declared to have escaped.
pub const DEFAULT_ESCAPE_CAP: u64 = 1000;

/// Probability of drifting to infinity without ever reaching 0:
/// `1 − ((1−p)/p)^z` for `p > 1/2`, and 0 otherwise.
pub fn gamblers_ruin_escape(spec: WalkSpec) -> f64 {
    let p = spec.up_prob;
    if p <= 0.5 {
        return 0.0;
    }
    let q = 1.0 - p;
    // (p^z − q^z) / p^z rounds the common cases (e.g. 2/3, 8/9) exactly
    if let Ok(z) = i32::try_from(spec.start) {
        let pz = p.powi(z);
        if pz > f64::MIN_POSITIVE {
            return (pz - q.powi(z)) / pz;
        }
    }
    1.0 - (q / p).powf(spec.start as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkEstimate {
    pub trials: u64,
    pub escapes: u64,
    pub ruins: u64,
    /// Trials that neither escaped nor hit 0 within the step budget;
    /// counted as non-escapes.
    pub undecided: u64,
    pub cap: u64,
    pub frequency: f64,
    /// Upper bound on the probability that a walk reaching the cap is
    /// ruined later, `((1−p)/p)^cap`.
    pub truncation_bound: f64,
}

impl WalkEstimate {
    pub fn interval(&self, confidence: f64) -> Result<Estimate> {
        wilson(self.escapes, self.trials, confidence)
    }
}

enum Outcome {
    Escape,
    Ruin,
    Undecided,
}

/// Monte Carlo escape frequency. Trial `i` uses the stream derived from
/// `(seed, i)`; a walk escapes once it reaches `cap`.
pub fn simulate_walk(spec: WalkSpec, horizon: u64, trials: u64, seed: u64, cap: u64) -> Result<WalkEstimate> {
    if trials == 0 {
        return Err(invalid("walk simulation needs at least one trial"));
    }
    if cap <= spec.start {
        return Err(invalid("escape cap must exceed the starting level"));
    }
    let outcomes: Vec<Outcome> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeding::rng(seeding::derive_seed(seed, i));
            let mut z = spec.start;
            for _ in 0..horizon {
                if rng.gen::<f64>() < spec.up_prob {
                    z += 1;
                    if z >= cap {
                        return Outcome::Escape;
                    }
                } else {
                    z -= 1;
                    if z == 0 {
                        return Outcome::Ruin;
                    }
                }
            }
            Outcome::Undecided
        })
        .collect();
    let count = |f: fn(&Outcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as u64;
    let escapes = count(|o| matches!(o, Outcome::Escape));
    let ruins = count(|o| matches!(o, Outcome::Ruin));
    let p = spec.up_prob;
    Ok(WalkEstimate {
        trials,
        escapes,
        ruins,
        undecided: trials - escapes - ruins,
        cap,
        frequency: escapes as f64 / trials as f64,
        truncation_bound: if p > 0.5 {
            ((1.0 - p) / p).powf(cap as f64)
        } else {
            1.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `h(z) = p·h(z+1) + (1−p)·h(z−1)`, `h(0) = 0`, `h(N) = 1`, by the
    /// Thomas algorithm.
    fn lattice_escape(p: f64, z: usize, n: usize) -> f64 {
        let q = 1.0 - p;
        // unknowns h(1..n-1): -q h(i-1) + h(i) - p h(i+1) = 0
        let m = n - 1;
        let mut c = vec![0.0; m];
        let mut d = vec![0.0; m];
        for i in 0..m {
            let rhs = if i == m - 1 { p } else { 0.0 };
            let denom = if i == 0 { 1.0 } else { 1.0 + q * c[i - 1] };
            c[i] = -p / denom;
            d[i] = (rhs + if i == 0 { 0.0 } else { q * d[i - 1] }) / denom;
        }
        let mut h = vec![0.0; m];
        h[m - 1] = d[m - 1];
        for i in (0..m - 1).rev() {
            h[i] = d[i] - c[i] * h[i + 1];
        }
        h[z - 1]
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(gamblers_ruin_escape(WalkSpec::new(0.75, 1).unwrap()), 2.0 / 3.0);
        assert_eq!(gamblers_ruin_escape(WalkSpec::new(0.75, 2).unwrap()), 8.0 / 9.0);
        assert_eq!(gamblers_ruin_escape(WalkSpec::new(0.5, 1).unwrap()), 0.0);
        assert_eq!(gamblers_ruin_escape(WalkSpec::new(0.3, 4).unwrap()), 0.0);
        assert!((gamblers_ruin_escape(WalkSpec::new(0.9, 1).unwrap()) - 8.0 / 9.0).abs() < 1e-15);
        assert!(WalkSpec::new(1.0, 1).is_err());
        assert!(WalkSpec::new(0.6, 0).is_err());
    }

    #[test]
    fn agrees_with_first_step_recursion() {
        for &p in &[0.55, 0.6, 0.75, 0.9] {
            for z in 1..6 {
                let exact = gamblers_ruin_escape(WalkSpec::new(p, z as u64).unwrap());
                let lattice = lattice_escape(p, z, 2000);
                assert!((exact - lattice).abs() < 1e-9, "p={p} z={z}: {exact} vs {lattice}");
            }
        }
    }

    #[test]
    fn monte_carlo_matches_formula() {
        let spec = WalkSpec::new(0.75, 1).unwrap();
        let est = simulate_walk(spec, 100_000, 20_000, 11, DEFAULT_ESCAPE_CAP).unwrap();
        let ci = est.interval(0.99).unwrap();
        assert!(ci.ci_low <= 2.0 / 3.0 && 2.0 / 3.0 <= ci.ci_high, "{est:?}");
        assert!(est.truncation_bound < 1e-300);
        assert_eq!(est, simulate_walk(spec, 100_000, 20_000, 11, DEFAULT_ESCAPE_CAP).unwrap());

        let low = simulate_walk(WalkSpec::new(0.4, 1).unwrap(), 100_000, 2000, 3, 50).unwrap();
        assert_eq!(low.escapes, 0);
    }
}
