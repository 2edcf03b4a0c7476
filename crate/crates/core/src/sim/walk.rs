//! Coupling of the quasi-Bayesian action process in state 0 with a biased
//! simple random walk.
//!
//! Once the public log-odds exceed a threshold `b` at which a single agent
//! plays 1 with probability above `v = (3/4)^(1/l)`, actions are grouped into
//! blocks of `l` agents. A block of `l` ones moves the walk up; the first 0
//! in a block moves it down and starts the next block right after it. With
//! `l` chosen so that `l` ones outweigh one zero in log-odds, every path that
//! keeps the walk above zero also keeps the public belief above `b`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::heuristics::{DecisionRule, PriorRule, PriorValue, QuasiBayesParams};
use crate::kernel::PreparedModel;
use crate::signal_model::{logistic, SignalModel, State};
use crate::urn::UrnState;

use super::{AgentProcessConfig, Engine, Trajectory};

/// Search range for the threshold log-odds.
const LOG_ODDS_RANGE: f64 = 60.0;

/// Relative slack in the block-length inequality. Decimal parameters such as
/// `(0.7, 0.3)` are not exact complements in binary, which would otherwise
/// push a tie to the next integer.
pub const BLOCK_TOL: f64 = 1e-12;

/// Smallest `l ≥ 1` with `l·ln(q/(1−q)) ≥ ln((1−r)/r)`, up to [`BLOCK_TOL`].
pub fn compute_block_length(q: f64, r: f64) -> Result<u64> {
    if !(0.0 < r && r < 0.5 && 0.5 < q && q < 1.0) {
        return Err(invalid(format!(
            "block length needs 0 < r < 1/2 < q < 1, got q = {q}, r = {r}"
        )));
    }
    let up = (q / (1.0 - q)).ln();
    let down = ((1.0 - r) / r).ln();
    let target = down * (1.0 - BLOCK_TOL);
    let mut l = ((target / up).ceil() as u64).max(1);
    while (l as f64) * up < target {
        l += 1;
    }
    while l > 1 && ((l - 1) as f64) * up >= target {
        l -= 1;
    }
    Ok(l)
}

/// Smallest public log-odds (to within `1e-9`) at which an agent in state 0
/// plays 1 with probability above `v`, or `None` if no level up to ±60 does.
pub fn decision_threshold(model: &SignalModel, rule: &DecisionRule, v: f64) -> Result<Option<f64>> {
    let prepared = PreparedModel::new(model.clone())?;
    let p = |l: f64| prepared.action_probability(State::Zero, PriorValue::LogOdds(l), rule);
    if p(LOG_ODDS_RANGE) <= v {
        return Ok(None);
    }
    if p(-LOG_ODDS_RANGE) > v {
        return Ok(Some(-LOG_ODDS_RANGE));
    }
    let (mut lo, mut hi) = (-LOG_ODDS_RANGE, LOG_ODDS_RANGE);
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if p(mid) > v {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkBlock {
    /// Zero-based step of the block's first agent.
    pub start: u64,
    /// Step after the block's last agent.
    pub end: u64,
    pub up: bool,
    /// Walk position after the block.
    pub z: i64,
}

/// Bookkeeping of the walk coupled to one quasi-Bayesian trial in state 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkCoupling {
    pub q: f64,
    pub r: f64,
    pub l: u64,
    /// Per-agent floor `v = (3/4)^(1/l)`.
    pub v: f64,
    /// Threshold prior `b` and its log-odds; absent when no level reaches `v`.
    pub threshold_b: Option<f64>,
    pub threshold_log_odds: Option<f64>,
    /// First step whose public log-odds exceed the threshold.
    pub start: Option<u64>,
    /// `Z_0 = 1, Z_1, …` over completed blocks.
    pub z_path: Vec<i64>,
    /// Block clock `t(n)` as zero-based steps.
    pub block_clock: Vec<u64>,
    pub blocks: Vec<WalkBlock>,
    /// Step at which the walk reached 0.
    pub ruined_at: Option<u64>,
    pub final_log_odds: f64,
    /// Block ends at which `Δk ≥ l·Δm` held relative to the walk start,
    /// and those among them where the public log-odds fell.
    pub monotone_checks: u64,
    pub monotone_violations: u64,
    /// Agents acting inside the walk with log-odds at or above the threshold,
    /// and those among them whose probability of playing 1 was at most `v`.
    pub marginal_checks: u64,
    pub marginal_violations: u64,
}

/// Runs a quasi-Bayesian trial in state 0 from `start_history` and records
/// the walk coupling along it.
pub fn quasi_walk_coupling(
    model: &SignalModel,
    decision_rule: &DecisionRule,
    start_history: UrnState,
    horizon: u64,
    seed: u64,
) -> Result<(Trajectory, WalkCoupling)> {
    let params = QuasiBayesParams::from_model(model)?;
    let (q, r) = (params.q(), params.r());
    let l = compute_block_length(q, r)?;
    let v = 0.75f64.powf(1.0 / l as f64);
    let threshold = decision_threshold(model, decision_rule, v)?;

    let config = AgentProcessConfig::new(
        model.clone(),
        PriorRule::QuasiBayes(params),
        decision_rule.clone(),
        horizon,
    )
    .with_init(start_history)
    .with_state(State::Zero);
    let engine = Engine::new(&config)?;

    let mut walk = WalkCoupling {
        q,
        r,
        l,
        v,
        threshold_b: threshold.map(logistic),
        threshold_log_odds: threshold,
        start: None,
        z_path: Vec::new(),
        block_clock: Vec::new(),
        blocks: Vec::new(),
        ruined_at: None,
        final_log_odds: params.log_odds(start_history.m, start_history.k),
        monotone_checks: 0,
        monotone_violations: 0,
        marginal_checks: 0,
        marginal_violations: 0,
    };
    let mut records = Vec::with_capacity(horizon as usize);
    let mut origin = start_history;
    let mut block_start = 0u64;
    let mut run = 0u64;
    let (omega, terminal) = engine.run(seed, |rec| {
        records.push(*rec);
        let Some(lb) = threshold else { return };
        if walk.ruined_at.is_some() {
            return;
        }
        if walk.start.is_none() {
            if rec.prior_log_odds <= lb {
                return;
            }
            walk.start = Some(rec.step);
            walk.z_path.push(1);
            walk.block_clock.push(rec.step);
            origin = UrnState { m: rec.m, k: rec.k };
            block_start = rec.step;
            run = 0;
        }
        if rec.prior_log_odds >= lb {
            walk.marginal_checks += 1;
            let p1 = engine.action_probability(rec.step, UrnState { m: rec.m, k: rec.k }, State::Zero);
            if p1 <= v {
                walk.marginal_violations += 1;
            }
        }
        let end = rec.step + 1;
        let up = if rec.action == 1 {
            run += 1;
            if run < l {
                return;
            }
            true
        } else {
            false
        };
        let z = walk.z_path.last().copied().unwrap_or(1) + if up { 1 } else { -1 };
        walk.z_path.push(z);
        walk.block_clock.push(end);
        walk.blocks.push(WalkBlock {
            start: block_start,
            end,
            up,
            z,
        });
        block_start = end;
        run = 0;

        let (m_after, k_after) = if rec.action == 1 {
            (rec.m, rec.k + 1)
        } else {
            (rec.m + 1, rec.k)
        };
        let (dm, dk) = (m_after - origin.m, k_after - origin.k);
        if dk >= l * dm {
            walk.monotone_checks += 1;
            let scale = (dk as f64) * params.log_odds_q().abs() + (dm as f64) * params.log_odds_r().abs();
            if params.log_odds_shift(dm, dk) < -BLOCK_TOL * scale {
                walk.monotone_violations += 1;
            }
        }
        if z == 0 {
            walk.ruined_at = Some(end);
        }
    });
    walk.final_log_odds = params.log_odds(terminal.m, terminal.k);
    Ok((
        Trajectory {
            omega,
            records,
            terminal,
        },
        walk,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::BinarySymmetricModel;

    #[test]
    fn block_length_examples() {
        assert_eq!(compute_block_length(0.75, 0.25).unwrap(), 1);
        assert_eq!(compute_block_length(0.6, 0.25).unwrap(), 3);
        assert_eq!(compute_block_length(0.6, 0.4).unwrap(), 1);
        assert_eq!(compute_block_length(0.7, 0.3).unwrap(), 1);
        assert!(compute_block_length(0.5, 0.3).is_err());
        assert!(compute_block_length(0.7, 0.5).is_err());
    }

    #[test]
    fn block_length_satisfies_inequality() {
        for i in 1..50 {
            for j in 1..50 {
                let q = 0.5 + i as f64 / 100.0;
                let r = j as f64 / 100.0;
                let l = compute_block_length(q, r).unwrap() as f64;
                let up = (q / (1.0 - q)).ln();
                let down = ((1.0 - r) / r).ln();
                let target = down * (1.0 - BLOCK_TOL);
                assert!(l * up >= target);
                assert!(l == 1.0 || (l - 1.0) * up < target);
            }
        }
    }

    #[test]
    fn threshold_is_monotone_boundary() {
        let model = BinarySymmetricModel::new(0.2).unwrap().to_model();
        let rule = DecisionRule::ProbabilityMatching;
        let lb = decision_threshold(&model, &rule, 0.75).unwrap().unwrap();
        let prepared = PreparedModel::new(model.clone()).unwrap();
        let p = |l: f64| prepared.action_probability(State::Zero, PriorValue::LogOdds(l), &rule);
        assert!(p(lb) > 0.75);
        assert!(p(lb - 1e-6) <= 0.75 + 1e-9);
        // a rule that never plays 1 with high probability has no threshold
        let capped = DecisionRule::Piecewise(
            crate::heuristics::StepRule::new(vec![0.5], vec![0.0, 0.5], Default::default()).unwrap(),
        );
        assert_eq!(decision_threshold(&model, &capped, 0.75).unwrap(), None);
    }

    #[test]
    fn unit_blocks_follow_the_action_walk() {
        let model = BinarySymmetricModel::new(0.2).unwrap().to_model();
        for seed in 0..30 {
            let (tr, walk) = quasi_walk_coupling(
                &model,
                &DecisionRule::ProbabilityMatching,
                UrnState::new(1, 8).unwrap(),
                400,
                seed,
            )
            .unwrap();
            assert_eq!(walk.l, 1);
            let Some(start) = walk.start else { continue };
            let steps = walk.ruined_at.unwrap_or(400);
            let mut z = 1i64;
            for rec in &tr.records[start as usize..steps as usize] {
                z += if rec.action == 1 { 1 } else { -1 };
            }
            assert_eq!(walk.z_path.last().copied(), Some(z));
            assert!(walk.block_clock.windows(2).all(|w| w[0] < w[1]));
            assert!(walk.z_path.windows(2).all(|w| (w[0] - w[1]).abs() == 1));
            assert_eq!(walk.monotone_violations, 0);
            assert_eq!(walk.marginal_violations, 0);
        }
    }

    #[test]
    fn longer_blocks_and_bookkeeping() {
        // q = 0.6, r = 0.25 gives l = 3
        let model = SignalModel::from_vectors(0.5, vec![0.2, 0.4, 0.4], vec![0.6, 0.3, 0.1]).unwrap();
        let params = QuasiBayesParams::from_model(&model).unwrap();
        let l = compute_block_length(params.q(), params.r()).unwrap();
        let (_, walk) = quasi_walk_coupling(
            &model,
            &DecisionRule::ProbabilityMatching,
            UrnState::new(1, 30).unwrap(),
            2000,
            3,
        )
        .unwrap();
        assert_eq!(walk.l, l);
        for b in &walk.blocks {
            if b.up {
                assert_eq!(b.end - b.start, l);
            } else {
                assert!(b.end - b.start <= l);
            }
        }
        assert_eq!(walk.z_path.len(), walk.blocks.len() + 1);
        assert_eq!(walk.monotone_violations, 0);
    }
}
