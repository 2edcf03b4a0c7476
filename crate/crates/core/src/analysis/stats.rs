use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result};

/// A proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub successes: u64,
    pub n: u64,
}

/// Two-sided standard normal quantile for the given confidence level.
pub fn normal_quantile(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(format!("confidence must lie in (0,1), got {confidence}")));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + confidence / 2.0))
}

/// Wilson score interval for `successes` out of `n`.
pub fn wilson(successes: u64, n: u64, confidence: f64) -> Result<Estimate> {
    if n == 0 {
        return Err(invalid("Wilson interval needs at least one observation"));
    }
    if successes > n {
        return Err(invalid("more successes than trials"));
    }
    let z = normal_quantile(confidence)?;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let mut ci_low = (centre - half).max(0.0);
    let mut ci_high = (centre + half).min(1.0);
    // the interval always contains the point estimate; pin the ends at 0 and n
    if successes == 0 {
        ci_low = 0.0;
    }
    if successes == n {
        ci_high = 1.0;
    }
    Ok(Estimate {
        estimate: p,
        ci_low: ci_low.min(p),
        ci_high: ci_high.max(p),
        successes,
        n,
    })
}

/// Linearly interpolated quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * level.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("quantile of an empty sample"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, level))
}
