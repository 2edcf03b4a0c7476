use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};
use crate::seeding::{self, PILOT_NAMESPACE};

use super::stats::quantile_sorted;

/// Statistic computed over each resampled batch of per-trial values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchStatistic {
    Mean,
    Median,
}

impl BatchStatistic {
    fn apply(self, values: &mut [f64]) -> f64 {
        match self {
            BatchStatistic::Mean => values.iter().sum::<f64>() / values.len() as f64,
            BatchStatistic::Median => {
                values.sort_by(f64::total_cmp);
                quantile_sorted(values, 0.5)
            }
        }
    }
}

/// How a pilot is run and turned into a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotSpec {
    pub metric: String,
    pub config_hash: String,
    pub seed: u64,
    pub pilot_trials: u64,
    /// Size of the batches the threshold applies to.
    pub batch_size: u64,
    pub statistic: BatchStatistic,
    /// The threshold is this quantile of the batch statistic.
    pub quantile: f64,
    pub resamples: u64,
}

/// A pilot-derived threshold with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub metric: String,
    pub config_hash: String,
    pub seed: u64,
    pub value: f64,
    pub trials: u64,
    pub batch_size: u64,
    pub statistic: BatchStatistic,
    pub quantile: f64,
    pub resamples: u64,
    /// The batch statistic over the whole pilot.
    pub pilot_estimate: f64,
    pub source: String,
}

impl Calibration {
    pub fn matches(&self, spec: &PilotSpec) -> bool {
        self.metric == spec.metric
            && self.config_hash == spec.config_hash
            && self.seed == spec.seed
            && self.trials == spec.pilot_trials
            && self.batch_size == spec.batch_size
            && self.statistic == spec.statistic
            && self.quantile == spec.quantile
            && self.resamples == spec.resamples
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| invalid(format!("bad calibration file {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let value = serde_json::to_value(self).expect("calibration serializes");
        let text = serde_json::to_string_pretty(&value).expect("calibration serializes") + "\n";
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)
                .map_err(|e| invalid(format!("cannot create {}: {e}", dir.display())))?;
        }
        std::fs::write(path, text).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))
    }
}

/// SHA-256 of the compact JSON form with sorted keys.
pub fn config_hash(value: &serde_json::Value) -> String {
    // serde_json's default map is ordered, so this form is canonical
    let bytes = serde_json::to_vec(value).expect("JSON values serialize");
    hex::encode(Sha256::digest(bytes))
}

/// Runs the pilot under the reserved seed namespace and returns the
/// `quantile` of the batch statistic over bootstrap batches of `batch_size`.
pub fn pilot_calibrate<F>(spec: &PilotSpec, per_trial: F) -> Result<Calibration>
where
    F: Fn(u64) -> f64 + Sync,
{
    if spec.pilot_trials == 0 || spec.batch_size == 0 || spec.resamples == 0 {
        return Err(invalid("pilot needs positive trial, batch and resample counts"));
    }
    if !(0.0..=1.0).contains(&spec.quantile) {
        return Err(invalid("calibration quantile must lie in [0,1]"));
    }
    let base = PILOT_NAMESPACE ^ spec.seed;
    let values: Vec<f64> = (0..spec.pilot_trials)
        .into_par_iter()
        .map(|i| per_trial(seeding::derive_seed(base, i)))
        .collect();
    let mut rng = seeding::rng(seeding::derive_seed(base, u64::MAX));
    let mut batch = vec![0.0; spec.batch_size as usize];
    let mut stats: Vec<f64> = (0..spec.resamples)
        .map(|_| {
            for slot in batch.iter_mut() {
                *slot = values[rng.gen_range(0..values.len())];
            }
            spec.statistic.apply(&mut batch)
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    Ok(Calibration {
        metric: spec.metric.clone(),
        config_hash: spec.config_hash.clone(),
        seed: spec.seed,
        value: quantile_sorted(&stats, spec.quantile),
        trials: spec.pilot_trials,
        batch_size: spec.batch_size,
        statistic: spec.statistic,
        quantile: spec.quantile,
        resamples: spec.resamples,
        pilot_estimate: spec.statistic.apply(&mut values.clone()),
        source: "pilot".to_string(),
    })
}

/// Reuses the calibration stored at `path` when it was produced by the same
/// spec; otherwise runs the pilot and stores the result.
pub fn load_or_calibrate<F>(path: &Path, spec: &PilotSpec, per_trial: F) -> Result<Calibration>
where
    F: Fn(u64) -> f64 + Sync,
{
    if let Ok(existing) = Calibration::load(path) {
        if existing.matches(spec) {
            return Ok(existing);
        }
    }
    let fresh = pilot_calibrate(spec, per_trial)?;
    fresh.save(path)?;
    Ok(fresh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(statistic: BatchStatistic) -> PilotSpec {
        PilotSpec {
            metric: "test".into(),
            config_hash: config_hash(&serde_json::json!({"b": 1, "a": [1, 2]})),
            seed: 7,
            pilot_trials: 500,
            batch_size: 100,
            statistic,
            quantile: 0.05,
            resamples: 400,
        }
    }

    #[test]
    fn constant_metric_gives_constant_floor() {
        let c = pilot_calibrate(&spec(BatchStatistic::Mean), |_| 1.0).unwrap();
        assert_eq!(c.value, 1.0);
        assert_eq!(c.pilot_estimate, 1.0);
    }

    #[test]
    fn floor_sits_below_the_mean() {
        let bernoulli = |seed: u64| (seeding::rng(seed).gen::<f64>() < 0.7) as u8 as f64;
        let c = pilot_calibrate(&spec(BatchStatistic::Mean), bernoulli).unwrap();
        assert!(c.value < c.pilot_estimate && c.value > 0.5, "{c:?}");
        assert_eq!(c, pilot_calibrate(&spec(BatchStatistic::Mean), bernoulli).unwrap());
        let m = pilot_calibrate(&spec(BatchStatistic::Median), |s| seeding::rng(s).gen::<f64>()).unwrap();
        assert!(m.value < 0.5 && m.value > 0.3);
    }

    #[test]
    fn hash_is_key_order_independent() {
        let a: serde_json::Value = serde_json::from_str(r#"{"x": 1, "y": {"b": 2, "a": 3}}"#).unwrap();
        let b: serde_json::Value = serde_json::from_str(r#"{"y": {"a": 3, "b": 2}, "x": 1}"#).unwrap();
        assert_eq!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }

    #[test]
    fn file_round_trip_and_reuse() {
        let dir = std::env::temp_dir().join(format!("nll-cal-{}", std::process::id()));
        let path = dir.join("c.json");
        let s = spec(BatchStatistic::Mean);
        let first = load_or_calibrate(&path, &s, |_| 0.5).unwrap();
        // a matching file is reused, so the new closure is never consulted
        let second = load_or_calibrate(&path, &s, |_| 0.0).unwrap();
        assert_eq!(first, second);
        let other = PilotSpec { seed: 8, ..s };
        assert_eq!(load_or_calibrate(&path, &other, |_| 0.0).unwrap().value, 0.0);
        std::fs::remove_dir_all(dir).ok();
    }
}
