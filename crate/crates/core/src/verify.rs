//! Verification suites: algebraic identities, urn drift, desk-scale
//! reproductions of the learning results and oracle comparisons.
//!
//! Every check is deterministic in the master seed. Thresholds that have no
//! closed form come from pilot calibration files.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_rational::BigRational;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{
    agent_trial, config_hash, enumerate_exact, estimate_learning, gamblers_ruin_escape,
    load_or_calibrate, monte_carlo_terminal, simulate_walk, total_variation, tv_standard_error,
    BatchStatistic, Calibration, LearningOptions, PilotSpec, TerminalDistribution,
    WalkSpec, DEFAULT_ESCAPE_CAP,
};
use crate::error::{invalid, Result};
use crate::heuristics::{
    complementary_pair, quasibayes_prior, DecisionRule, PriorRule, QuasiBayesParams,
};
use crate::seeding::{self, SimRng};
use crate::signal_model::{
    bayes_posterior, check_fosd, dominated_binary_model, BinarySymmetricModel, Condition,
    SignalModel, State,
};
use crate::sim::{
    compute_block_length, run_trial, run_trial_nstate, simulate_with, AgentProcessConfig,
    ModelSequence, NStateConditioning, NStateModel,
};
use crate::urn::{
    build_urn_function, coupled_simulate, drift_sign_scan, verify_dominance, CyclicUrn, DriftClass,
    UrnFunction, UrnState,
};

/// Calibration files shipped with the repository.
pub const DEFAULT_CALIBRATION_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../calibration");

/// Seed of every pilot run; pilots draw from their own namespace, so this
/// never overlaps an experiment stream.
pub const PILOT_SEED: u64 = 0;

/// Bootstrap quantile used for calibrated floors.
pub const FLOOR_QUANTILE: f64 = 0.01;

const CALIBRATION_RESAMPLES: u64 = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Exact,
    Urn,
    Theorem1,
    Theorem2,
    Theorem3,
    NState,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 7] = ["exact", "urn", "theorem1", "theorem2", "theorem3", "nstate", "all"];

    /// Criteria run by the suite, in order.
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Exact => &[1],
            Suite::Urn => &[2, 7, 8],
            Suite::Theorem1 => &[3, 4],
            Suite::Theorem2 => &[6],
            Suite::Theorem3 => &[5],
            Suite::NState => &[9],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9],
        }
    }
}

impl FromStr for Suite {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exact" => Suite::Exact,
            "urn" => Suite::Urn,
            "theorem1" => Suite::Theorem1,
            "theorem2" => Suite::Theorem2,
            "theorem3" => Suite::Theorem3,
            "nstate" => Suite::NState,
            "all" => Suite::All,
            other => {
                return Err(invalid(format!(
                    "unknown suite `{other}`; expected one of {}",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionReport {
    fn new(id: u8, name: &str, checks: Vec<Check>) -> Self {
        CriterionReport {
            id,
            name: name.to_string(),
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    /// One line: `criterion N [PASS|FAIL] name`.
    pub fn summary_line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name
        )
    }
}

fn check(name: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check {
        name: name.to_string(),
        passed,
        detail: detail.into(),
    }
}

#[derive(Debug, Clone)]
pub struct VerifyContext {
    pub seed: u64,
    pub calibration_dir: PathBuf,
}

impl VerifyContext {
    pub fn new(seed: u64) -> Self {
        VerifyContext {
            seed,
            calibration_dir: PathBuf::from(DEFAULT_CALIBRATION_DIR),
        }
    }

    fn rng(&self, criterion: u64) -> SimRng {
        seeding::rng(seeding::derive_seed(self.seed, criterion))
    }

    fn stream(&self, criterion: u64, part: u64) -> u64 {
        seeding::derive_seed(seeding::derive_seed(self.seed, criterion), part)
    }

    fn calibration(&self, name: &str) -> PathBuf {
        self.calibration_dir.join(format!("{name}.json"))
    }
}

pub fn run_suite(suite: Suite, ctx: &VerifyContext) -> Result<Vec<CriterionReport>> {
    suite.criteria().iter().map(|&c| run_criterion(c, ctx)).collect()
}

pub fn run_criterion(id: u8, ctx: &VerifyContext) -> Result<CriterionReport> {
    match id {
        1 => exact_algebra(ctx),
        2 => urn_drift(ctx),
        3 => theorem1_sufficiency(ctx),
        4 => theorem1_necessity(ctx),
        5 => theorem3(ctx),
        6 => theorem2(ctx),
        7 => complementary_pairs(ctx),
        8 => oracle_equivalence(ctx),
        9 => nstate(ctx),
        other => Err(invalid(format!("no criterion {other} in the library suites"))),
    }
}

/// A random informative model with 2 to 6 signals and full support.
pub fn random_model(rng: &mut SimRng, mu: f64) -> SignalModel {
    let n = rng.gen_range(2..=6);
    let mut row = || {
        let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.01).collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|v| v / total).collect::<Vec<_>>()
    };
    let f0 = row();
    let f1 = row();
    SignalModel::from_vectors(mu, f0, f1).expect("random rows are valid and distinct")
}

fn eps(e: f64) -> SignalModel {
    BinarySymmetricModel::new(e).expect("valid epsilon").to_model()
}

fn max_abs(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max)
}

fn odds(p: f64) -> f64 {
    p / (1.0 - p)
}

fn exact_algebra(ctx: &VerifyContext) -> Result<CriterionReport> {
    let mut rng = ctx.rng(1);
    let tol = 1e-12;

    let mut uniform = 0.0f64;
    let mut cancel = 0.0f64;
    let mut compose = 0.0f64;
    for _ in 0..1000 {
        let p = rng.gen_range(0.001..0.999);
        let b = rng.gen_range(0.001..0.999);
        let p2 = rng.gen_range(0.001..0.999);
        uniform = uniform.max((bayes_posterior(p, 0.5)? - p).abs());
        cancel = cancel.max((bayes_posterior(p, 1.0 - p)? - 0.5).abs());
        // two signals in either order equal one signal with the product of odds
        let seq = bayes_posterior(p2, bayes_posterior(p, b)?)?;
        let rev = bayes_posterior(p, bayes_posterior(p2, b)?)?;
        let o = odds(p) * odds(p2) * odds(b);
        compose = compose.max((seq - o / (1.0 + o)).abs()).max((seq - rev).abs());
    }

    let mut qb = 0.0f64;
    for _ in 0..1000 {
        let q: f64 = rng.gen_range(0.51..0.99);
        let r: f64 = rng.gen_range(0.01..0.49);
        let k = rng.gen_range(0..40u64);
        let m = rng.gen_range(0..40u64);
        let a = q.powi(k as i32) * r.powi(m as i32);
        let c = (1.0 - q).powi(k as i32) * (1.0 - r).powi(m as i32);
        qb = qb.max((quasibayes_prior(q, r, m, k)? - a / (a + c)).abs());
    }

    let mut martingale = 0.0f64;
    let mut rn = 0.0f64;
    let mut fosd_ok = true;
    for _ in 0..100 {
        let mu = rng.gen_range(0.05..0.95);
        let model = random_model(&mut rng, mu);
        let g = model.belief_distribution(mu, Condition::Unconditional)?;
        let g1 = model.belief_distribution(mu, Condition::Given(State::One))?;
        let g0 = model.belief_distribution(mu, Condition::Given(State::Zero))?;
        martingale = martingale.max((g.mean - mu).abs());
        for &(y, mass) in &g.atoms {
            rn = rn
                .max((g1.mass_at(y) - mass * y / mu).abs())
                .max((g0.mass_at(y) - mass * (1.0 - y) / (1.0 - mu)).abs());
        }
        let f = check_fosd(&g1, &g0);
        fosd_ok &= f.dominates && f.strict;
    }

    Ok(CriterionReport::new(
        1,
        "exact algebra: posterior identities, quasi-Bayes forms, martingale, Radon-Nikodym, FOSD",
        vec![
            check("uniform prior", uniform <= tol, format!("max error {uniform:e}")),
            check("odds cancellation", cancel <= tol, format!("max error {cancel:e}")),
            check("odds composition", compose <= tol, format!("max error {compose:e}")),
            check("quasi-Bayes closed form vs log-odds", qb <= tol, format!("max error {qb:e}")),
            check("martingale mean", martingale <= tol, format!("max error {martingale:e}")),
            check("Radon-Nikodym reweighting", rn <= tol, format!("max error {rn:e}")),
            check("G1 strictly dominates G0", fosd_ok, "100 random models"),
        ],
    ))
}

fn urn_drift(ctx: &VerifyContext) -> Result<CriterionReport> {
    let mut rng = ctx.rng(2);
    let mut models: Vec<(String, SignalModel)> = (0..25)
        .map(|i| (format!("random #{i}"), random_model(&mut rng, 0.5)))
        .collect();
    for e in [0.05, 0.1, 0.2, 0.3] {
        models.push((format!("epsilon {e}"), eps(e)));
    }
    let mut failures = Vec::new();
    let mut worst = f64::INFINITY;
    for (name, model) in &models {
        for (state, want) in [(State::One, DriftClass::AllAbove), (State::Zero, DriftClass::AllBelow)] {
            let f = build_urn_function(model, &PriorRule::DeGroot, &DecisionRule::ProbabilityMatching, state)?;
            let scan = drift_sign_scan(&f, 99)?;
            worst = worst.min(scan.min_margin);
            if scan.class != want || scan.min_margin <= 0.0 {
                failures.push(format!("{name} at omega={}", state.index()));
            }
        }
    }
    Ok(CriterionReport::new(
        2,
        "urn drift: f(x) > x given omega=1 and f(x) < x given omega=0 on a 99-point grid",
        vec![check(
            "strict drift",
            failures.is_empty(),
            format!("{} models, smallest margin {worst:e}, failures {failures:?}", models.len()),
        )],
    ))
}

const SUFFICIENCY_CHECKPOINTS: [u64; 4] = [100, 1_000, 10_000, 100_000];
const SUFFICIENCY_TRIALS: u64 = 1000;

/// Point estimates nondecreasing and the final estimate above a calibrated floor.
fn monotone_improvement(
    ctx: &VerifyContext,
    criterion: u64,
    label: &str,
    config: &AgentProcessConfig,
    description: serde_json::Value,
) -> Result<Vec<Check>> {
    let result = estimate_learning(
        config,
        SUFFICIENCY_TRIALS,
        &SUFFICIENCY_CHECKPOINTS,
        ctx.stream(criterion, 0),
        &LearningOptions::default(),
    )?;
    let last = *SUFFICIENCY_CHECKPOINTS.last().unwrap();
    let floor = calibrate(
        ctx,
        &format!("{label}_final_correct"),
        description,
        2000,
        SUFFICIENCY_TRIALS,
        BatchStatistic::Mean,
        |seed| agent_trial(config, &[last], seed).map(|o| (o.actions[0] as usize == o.omega.index()) as u8 as f64),
    )?;
    let estimates = result.estimates();
    let final_estimate = *estimates.last().unwrap();
    Ok(vec![
        check(
            "estimates nondecreasing across checkpoints",
            result.nondecreasing(),
            format!("checkpoints {SUFFICIENCY_CHECKPOINTS:?}: {estimates:.4?}"),
        ),
        check(
            "final estimate at or above calibrated floor",
            final_estimate >= floor.value,
            format!(
                "final {final_estimate:.4} vs floor {:.4} (pilot estimate {:.4}, {} pilot trials)",
                floor.value, floor.pilot_estimate, floor.trials
            ),
        ),
    ])
}

/// Loads or computes a calibrated floor.
#[allow(clippy::too_many_arguments)]
fn calibrate<F>(
    ctx: &VerifyContext,
    metric: &str,
    description: serde_json::Value,
    pilot_trials: u64,
    batch_size: u64,
    statistic: BatchStatistic,
    per_trial: F,
) -> Result<Calibration>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    let spec = PilotSpec {
        metric: metric.to_string(),
        config_hash: config_hash(&description),
        seed: PILOT_SEED,
        pilot_trials,
        batch_size,
        statistic,
        quantile: FLOOR_QUANTILE,
        resamples: CALIBRATION_RESAMPLES,
    };
    load_or_calibrate(&ctx.calibration(metric), &spec, |seed| {
        per_trial(seed).expect("pilot trial on a validated configuration")
    })
}

fn theorem1_sufficiency(ctx: &VerifyContext) -> Result<CriterionReport> {
    let config = AgentProcessConfig::new(
        eps(0.2),
        PriorRule::DeGroot,
        DecisionRule::ProbabilityMatching,
        *SUFFICIENCY_CHECKPOINTS.last().unwrap(),
    );
    let description = serde_json::json!({
        "model": {"binary_symmetric": {"epsilon": 0.2}},
        "prior": "degroot",
        "decision": "probability_matching",
        "horizon": config.horizon,
        "state": "draw",
    });
    let checks = monotone_improvement(ctx, 3, "theorem1", &config, description)?;
    Ok(CriterionReport::new(
        3,
        "learning under probability matching + DeGroot, epsilon 0.2, 1000 trials to t = 1e5",
        checks,
    ))
}

fn theorem1_necessity(ctx: &VerifyContext) -> Result<CriterionReport> {
    let horizon = 10_000;
    let config = AgentProcessConfig::new(eps(0.1), PriorRule::DeGroot, DecisionRule::BayesThreshold, horizon)
        .with_state(State::Zero);
    let result = estimate_learning(&config, 2000, &[horizon], ctx.stream(4, 0), &LearningOptions::default())?;
    let herd = result.herd_above(0.9).expect("default herd thresholds include 0.9");
    Ok(CriterionReport::new(
        4,
        "wrong herds under the Bayes threshold rule, epsilon 0.1, omega = 0",
        vec![check(
            "fraction with x_T > 0.9 is at least 0.35",
            herd >= 0.35,
            format!("{herd:.4} of 2000 trials (one-step cascade bound 0.4)"),
        )],
    ))
}

/// `q^dk r^dm ≥ (1−q)^dk (1−r)^dm` in exact arithmetic. A float is a dyadic
/// rational `n/d`, and `1 − n/d = (d − n)/d`, so both sides share the
/// denominator and the comparison reduces to integer powers.
pub fn log_odds_shift_nonnegative_exact(q: f64, r: f64, dm: u64, dk: u64) -> bool {
    let parts = |x: f64| {
        let x = BigRational::from_float(x).expect("finite");
        (x.numer().clone(), x.denom().clone())
    };
    let exp = |e: u64| u32::try_from(e).expect("exponent fits in u32");
    let ((qn, qd), (rn, rd)) = (parts(q), parts(r));
    let lhs = qn.pow(exp(dk)) * rn.pow(exp(dm));
    let rhs = (&qd - &qn).pow(exp(dk)) * (&rd - &rn).pow(exp(dm));
    lhs >= rhs
}

fn theorem3(ctx: &VerifyContext) -> Result<CriterionReport> {
    let mut checks = Vec::new();

    let spec = WalkSpec::new(0.75, 1)?;
    let exact = gamblers_ruin_escape(spec);
    checks.push(check("escape probability is 2/3", exact == 2.0 / 3.0, format!("{exact:?}")));
    let est = simulate_walk(spec, 100_000, 100_000, ctx.stream(5, 0), DEFAULT_ESCAPE_CAP)?;
    let ci = est.interval(0.99)?;
    checks.push(check(
        "Monte Carlo escape frequency within Wilson 99% interval",
        ci.ci_low <= exact && exact <= ci.ci_high,
        format!(
            "{:.5} in [{:.5}, {:.5}], {} undecided, truncation bound {:e}",
            est.frequency, ci.ci_low, ci.ci_high, est.undecided, est.truncation_bound
        ),
    ));

    let mut rng = ctx.rng(5);
    let mut pairs = 0u64;
    let mut failures = Vec::new();
    for _ in 0..1000 {
        let q = rng.gen_range(0.501..0.99);
        let r = rng.gen_range(0.01..0.499);
        let l = compute_block_length(q, r)?;
        let params = QuasiBayesParams::new(q, r)?;
        // boundary Δk = lΔm plus random slack, from the block start
        for _ in 0..8 {
            let dm = rng.gen_range(0..12u64);
            let dk = l * dm + if rng.gen_bool(0.5) { 0 } else { rng.gen_range(0..6u64) };
            pairs += 1;
            if !log_odds_shift_nonnegative_exact(q, r, dm, dk) {
                failures.push((q, r, l, dm, dk, params.log_odds_shift(dm, dk)));
            }
        }
    }
    checks.push(check(
        "public log-odds never fall when dk >= l dm (exact arithmetic)",
        failures.is_empty(),
        format!("{pairs} increments over 1000 random (q, r); failures {failures:?}"),
    ));

    let model = eps(0.2);
    let params = QuasiBayesParams::from_model(&model)?;
    let horizon = 10_000;
    let config = AgentProcessConfig::new(
        model,
        PriorRule::QuasiBayes(params),
        DecisionRule::ProbabilityMatching,
        horizon,
    )
    .with_state(State::Zero);
    let wrong_herd = |seed: u64| -> Result<f64> {
        let (_, h) = simulate_with(&config, seed, |_| {})?;
        Ok((params.prior(h.m, h.k) > 0.99) as u8 as f64)
    };
    let trials = 2000u64;
    let hits: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|i| wrong_herd(seeding::derive_seed(ctx.stream(5, 1), i)))
        .collect::<Result<_>>()?;
    let fraction = hits.iter().sum::<f64>() / trials as f64;
    let floor = calibrate(
        ctx,
        "theorem3_wrong_herd",
        serde_json::json!({
            "model": {"binary_symmetric": {"epsilon": 0.2}},
            "prior": {"quasibayes": {"from_model": true}},
            "decision": "probability_matching",
            "horizon": horizon,
            "state": "0",
            "event": "e(k_T, m_T) > 0.99",
        }),
        4000,
        trials,
        BatchStatistic::Mean,
        wrong_herd,
    )?;
    checks.push(check(
        "wrong-herd fraction positive and at or above calibrated floor",
        fraction > 0.0 && floor.value > 0.0 && fraction >= floor.value,
        format!(
            "{fraction:.4} of {trials} trials vs floor {:.4} (pilot estimate {:.4})",
            floor.value, floor.pilot_estimate
        ),
    ));

    Ok(CriterionReport::new(
        5,
        "quasi-Bayesian failure: gambler's ruin, log-odds monotonicity, wrong herds",
        checks,
    ))
}

fn theorem2(ctx: &VerifyContext) -> Result<CriterionReport> {
    let bound = 0.01;
    let cycle = vec![eps(0.1), eps(0.3)];
    let sequence = ModelSequence::cyclic(cycle.clone(), bound)?;
    let dominated = dominated_binary_model(bound)?.to_model();
    let pm = DecisionRule::ProbabilityMatching;
    let f_dom = build_urn_function(&dominated, &PriorRule::DeGroot, &pm, State::One)?;
    let fns = cycle
        .iter()
        .map(|m| build_urn_function(m, &PriorRule::DeGroot, &pm, State::One))
        .collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    for (f, m) in fns.iter().zip(&cycle) {
        let d = verify_dominance(f, &f_dom, 99)?;
        checks.push(check(
            &format!("f_t dominates the dominated model's f (variance {:.4})", m.private_belief_variance()),
            d.holds,
            format!("worst margin {:e} at x = {:.2}", d.worst_margin, d.witness_x),
        ));
    }
    let hetero = CyclicUrn::new(fns)?;
    let violations: Vec<String> = (0..100u64)
        .into_par_iter()
        .filter_map(|i| {
            coupled_simulate(&hetero, &f_dom, UrnState::default(), 10_000, ctx.stream(6, i))
                .err()
                .map(|e| e.to_string())
        })
        .collect();
    checks.push(check(
        "coupled paths: heterogeneous proportion never below dominated",
        violations.is_empty(),
        format!("100 seeds x 1e4 steps; violations {violations:?}"),
    ));
    let config = AgentProcessConfig::new(eps(0.1), PriorRule::DeGroot, pm, *SUFFICIENCY_CHECKPOINTS.last().unwrap())
        .with_models(sequence);
    let description = serde_json::json!({
        "cyclic": {"models": [{"binary_symmetric": {"epsilon": 0.1}}, {"binary_symmetric": {"epsilon": 0.3}}], "v": bound},
        "prior": "degroot",
        "decision": "probability_matching",
        "horizon": config.horizon,
        "state": "draw",
    });
    checks.extend(monotone_improvement(ctx, 6, "theorem2", &config, description)?);
    Ok(CriterionReport::new(
        6,
        "heterogeneous information: dominance, pathwise coupling, learning",
        checks,
    ))
}

fn complementary_pairs(ctx: &VerifyContext) -> Result<CriterionReport> {
    let mut rng = ctx.rng(7);
    let models: Vec<SignalModel> = (0..10).map(|_| random_model(&mut rng, 0.5)).collect();
    let cs: Vec<f64> = (0..50).map(|_| rng.gen_range(0.01..0.99)).collect();
    let pm = DecisionRule::ProbabilityMatching;
    let mut worst = 0.0f64;
    let mut mismatched = Vec::new();
    for (mi, model) in models.iter().enumerate() {
        let base: Vec<UrnFunction> = [State::Zero, State::One]
            .into_iter()
            .map(|s| build_urn_function(model, &PriorRule::DeGroot, &pm, s))
            .collect::<Result<_>>()?;
        for (ci, &c) in cs.iter().enumerate() {
            let (g, sigma) = complementary_pair(c)?;
            let prior = PriorRule::SizeInvariant(g);
            for (si, s) in [State::Zero, State::One].into_iter().enumerate() {
                let f = build_urn_function(model, &prior, &sigma, s)?;
                worst = worst.max(max_abs(
                    crate::urn::interior_grid(99).map(|x| (f.eval(x) - base[si].eval(x)).abs()),
                ));
            }
            let seed = ctx.stream(7, (mi * cs.len() + ci) as u64);
            let a = run_trial(&AgentProcessConfig::new(model.clone(), PriorRule::DeGroot, pm.clone(), 2000), seed)?;
            let b = run_trial(&AgentProcessConfig::new(model.clone(), prior.clone(), sigma.clone(), 2000), seed)?;
            if a.actions() != b.actions() || a.omega != b.omega {
                mismatched.push((mi, c));
            }
        }
    }
    Ok(CriterionReport::new(
        7,
        "complementary pairs are observationally equivalent to DeGroot + probability matching",
        vec![
            check("urn functions agree to 1e-12", worst <= 1e-12, format!("max difference {worst:e}")),
            check(
                "identical trajectories under shared seeds",
                mismatched.is_empty(),
                format!("500 pairs x 2000 agents; mismatches {mismatched:?}"),
            ),
        ],
    ))
}

fn tv_check(name: &str, exact: &TerminalDistribution, mc: &TerminalDistribution, trials: u64) -> Result<Check> {
    let tv = total_variation(exact, mc)?;
    let se = tv_standard_error(exact, trials);
    Ok(check(name, tv <= 3.0 * se, format!("TV {tv:.5} vs 3 SE {:.5}", 3.0 * se)))
}

fn oracle_equivalence(ctx: &VerifyContext) -> Result<CriterionReport> {
    let steps = 10;
    let trials = 100_000;
    let init = UrnState::default();
    let identity = UrnFunction::identity();
    let pm = build_urn_function(&eps(0.2), &PriorRule::DeGroot, &DecisionRule::ProbabilityMatching, State::One)?;
    let threshold = build_urn_function(&eps(0.1), &PriorRule::DeGroot, &DecisionRule::BayesThreshold, State::Zero)?;

    let mut checks = Vec::new();
    let id_exact = enumerate_exact(&identity, init, steps)?;
    let uniform = max_abs(id_exact.probs.iter().map(|p| (p - 1.0 / 11.0).abs()));
    checks.push(check(
        "identity urn enumerates to the uniform law",
        uniform <= 1e-12 && id_exact.probs.len() == 11,
        format!("max deviation {uniform:e}"),
    ));
    for (i, (name, f)) in [("identity", &identity), ("matching epsilon 0.2, omega 1", &pm), ("threshold epsilon 0.1, omega 0", &threshold)]
        .into_iter()
        .enumerate()
    {
        let exact = enumerate_exact(f, init, steps)?;
        let mass = (exact.total_mass() - 1.0).abs();
        checks.push(check(&format!("{name}: total mass 1"), mass <= 1e-12, format!("|mass - 1| = {mass:e}")));
        let mc = monte_carlo_terminal(f, init, steps, trials, ctx.stream(8, i as u64))?;
        checks.push(tv_check(&format!("{name}: enumeration vs urn Monte Carlo"), &exact, &mc, trials)?);
    }
    // the agent engine draws signals and actions separately; its law must match too
    let config = AgentProcessConfig::new(eps(0.2), PriorRule::DeGroot, DecisionRule::ProbabilityMatching, steps as u64)
        .with_state(State::One);
    let base = ctx.stream(8, 99);
    let ones: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|i| {
            simulate_with(&config, seeding::derive_seed(base, i), |_| {})
                .map(|(_, h)| (h.k - init.k) as usize)
        })
        .collect::<Result<_>>()?;
    let agents = crate::analysis::empirical(init, steps, ones);
    checks.push(tv_check(
        "matching epsilon 0.2, omega 1: enumeration vs agent engine",
        &enumerate_exact(&pm, init, steps)?,
        &agents,
        trials,
    )?);
    Ok(CriterionReport::new(
        8,
        "exhaustive enumeration agrees with Monte Carlo on 10-step horizons",
        checks,
    ))
}

const NSTATE_CHECKPOINTS: [usize; 3] = [1_000, 10_000, 100_000];

/// The separated three-state structure of the n-state checks.
pub fn separated_three_state() -> NStateModel {
    NStateModel::new(
        vec![1.0 / 3.0; 3],
        vec!["s0".into(), "s1".into(), "s2".into()],
        vec![vec![0.8, 0.1, 0.1], vec![0.1, 0.8, 0.1], vec![0.1, 0.1, 0.8]],
    )
    .expect("valid model")
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    crate::analysis::quantile(&v, 0.5).expect("non-empty")
}

fn nstate(ctx: &VerifyContext) -> Result<CriterionReport> {
    let mut checks = Vec::new();
    let mut rng = ctx.rng(9);
    let mut mismatches = 0;
    let mut compared = 0;
    for i in 0..20u64 {
        let model = if i < 4 {
            eps([0.05, 0.1, 0.2, 0.3][i as usize])
        } else {
            let mu = rng.gen_range(0.1..0.9);
            random_model(&mut rng, mu)
        };
        let nmodel = NStateModel::from_binary(&model);
        let seed = ctx.stream(9, i);
        let binary = run_trial(
            &AgentProcessConfig::new(model, PriorRule::DeGroot, DecisionRule::ProbabilityMatching, 5000),
            seed,
        )?;
        let n = run_trial_nstate(&nmodel, 5000, seed, NStateConditioning::Draw)?;
        compared += 1;
        let same = binary.omega.index() == n.omega
            && binary.actions().iter().map(|&a| a as usize).eq(n.actions.iter().copied());
        mismatches += (!same) as u32;
    }
    checks.push(check(
        "two-state engine reproduces the binary engine",
        mismatches == 0,
        format!("{compared} models x 5000 agents; {mismatches} mismatches"),
    ));

    let model = separated_three_state();
    let horizon = *NSTATE_CHECKPOINTS.last().unwrap() as u64;
    let correct = 1usize;
    let trials = 200u64;
    let paths: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            run_trial_nstate(&model, horizon, ctx.stream(9, 1000 + i), NStateConditioning::Fixed(correct))
                .map(|t| NSTATE_CHECKPOINTS.iter().map(|&c| t.proportion_after(c, correct)).collect())
        })
        .collect::<Result<_>>()?;
    let medians: Vec<f64> = (0..NSTATE_CHECKPOINTS.len())
        .map(|c| median(paths.iter().map(|p| p[c]).collect()))
        .collect();
    checks.push(check(
        "median correct-action proportion grows across checkpoints",
        medians.windows(2).all(|w| w[0] < w[1]),
        format!("checkpoints {NSTATE_CHECKPOINTS:?}: {medians:.4?}"),
    ));
    let floor = calibrate(
        ctx,
        "nstate_final_proportion",
        serde_json::json!({
            "nstate": &model,
            "horizon": horizon,
            "state": correct,
            "statistic": "median proportion of the correct action",
        }),
        1000,
        trials,
        BatchStatistic::Median,
        |seed| {
            run_trial_nstate(&model, horizon, seed, NStateConditioning::Fixed(correct))
                .map(|t| t.proportion_after(horizon as usize, correct))
        },
    )?;
    let last = *medians.last().unwrap();
    checks.push(check(
        "final median at or above calibrated floor",
        last >= floor.value,
        format!("{last:.4} vs floor {:.4} (pilot median {:.4})", floor.value, floor.pilot_estimate),
    ));
    Ok(CriterionReport::new(9, "n-state extension: two-state consistency and three-state learning", checks))
}

/// Reads a calibration file from `dir`, if present.
pub fn read_calibration(dir: &Path, metric: &str) -> Option<Calibration> {
    Calibration::load(&dir.join(format!("{metric}.json"))).ok()
}
