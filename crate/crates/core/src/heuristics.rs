//! Prior-formation rules `b(m, k)` and decision rules `σ`.
//!
//! History is always passed as `(m, k)`: `m` observed 0-actions and `k`
//! observed 1-actions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal_model::{logistic, logit, posterior_unchecked, SignalModel};

/// `d(k, m) = k / (k + m)`.
pub fn degroot_prior(m: u64, k: u64) -> Result<f64> {
    if m + k == 0 {
        return Err(Error::EmptyHistory);
    }
    Ok(proportion(m, k))
}

#[inline]
pub(crate) fn proportion(m: u64, k: u64) -> f64 {
    k as f64 / (m + k) as f64
}

/// Parameters of the quasi-Bayesian prior, kept together with their log-odds.
///
/// `q` is the probability of `ω = 1` given an isolated agent played 1, `r`
/// the same given it played 0. The prior after `(m, k)` has log-odds
/// `k·ln(q/(1−q)) + m·ln(r/(1−r))`, which never saturates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiBayesParams {
    q: f64,
    r: f64,
    log_odds_q: f64,
    log_odds_r: f64,
    /// `log_odds_q + log_odds_r`; exactly 0 when `r = 1 − q`.
    pair: f64,
}

/// `ln p − ln(1 − p)`, so that `r = 1 − q` gives exactly `−logit(q)`.
fn split_logit(p: f64) -> f64 {
    p.ln() - (1.0 - p).ln()
}

impl QuasiBayesParams {
    pub fn new(q: f64, r: f64) -> Result<Self> {
        if !(r > 0.0 && r <= 0.5 && q >= 0.5 && q < 1.0 && r < q) {
            return Err(invalid(format!(
                "quasi-Bayes parameters need 0 < r <= 1/2 <= q < 1 and r < q, got q={q}, r={r}"
            )));
        }
        let (log_odds_q, log_odds_r) = (split_logit(q), split_logit(r));
        Ok(QuasiBayesParams {
            q,
            r,
            log_odds_q,
            log_odds_r,
            pair: log_odds_q + log_odds_r,
        })
    }

    /// `q = P(ω=1 | p(s) ≥ 1/2)` and `r = P(ω=1 | p(s) < 1/2)` under a uniform prior.
    pub fn from_model(model: &SignalModel) -> Result<Self> {
        let (q, r) = threshold_posteriors(model.f0(), model.f1())?;
        Self::new(q, r)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `ln(q / (1 − q))`, positive.
    pub fn log_odds_q(&self) -> f64 {
        self.log_odds_q
    }

    /// `ln(r / (1 − r))`, non-positive.
    pub fn log_odds_r(&self) -> f64 {
        self.log_odds_r
    }

    /// Written as `(k − m)·ln(q/(1−q)) + m·(ln(q/(1−q)) + ln(r/(1−r)))` so that
    /// one action of each kind cancels exactly in symmetric structures.
    pub fn log_odds(&self, m: u64, k: u64) -> f64 {
        (k as f64 - m as f64) * self.log_odds_q + m as f64 * self.pair
    }

    /// Change in log-odds when `dk` 1-actions and `dm` 0-actions are added.
    pub fn log_odds_shift(&self, dm: u64, dk: u64) -> f64 {
        self.log_odds(dm, dk)
    }

    pub fn prior(&self, m: u64, k: u64) -> f64 {
        logistic(self.log_odds(m, k))
    }
}

/// `(P(ω=1 | p(s) ≥ 1/2), P(ω=1 | p(s) < 1/2))` under a uniform prior.
///
/// For a valid informative model both events have positive probability; the
/// error arm guards raw vectors that skip model validation.
fn threshold_posteriors(f0: &[f64], f1: &[f64]) -> Result<(f64, f64)> {
    let (mut hi_one, mut hi_all, mut lo_one, mut lo_all) = (0.0, 0.0, 0.0, 0.0);
    for (&a, &b) in f0.iter().zip(f1) {
        if a + b == 0.0 {
            continue;
        }
        // p(s) = b / (a + b) >= 1/2  iff  b >= a
        if b >= a {
            hi_one += b;
            hi_all += a + b;
        } else {
            lo_one += b;
            lo_all += a + b;
        }
    }
    if hi_all == 0.0 {
        return Err(Error::DegenerateThreshold("p(s) >= 1/2"));
    }
    if lo_all == 0.0 {
        return Err(Error::DegenerateThreshold("p(s) < 1/2"));
    }
    Ok((hi_one / hi_all, lo_one / lo_all))
}

/// Parameters of the quasi-Bayesian prior induced by `model`.
pub fn quasibayes_params(model: &SignalModel) -> Result<(f64, f64)> {
    QuasiBayesParams::from_model(model).map(|p| (p.q, p.r))
}

/// `e(k, m)` evaluated in log-odds space.
pub fn quasibayes_prior(q: f64, r: f64, m: u64, k: u64) -> Result<f64> {
    Ok(QuasiBayesParams::new(q, r)?.prior(m, k))
}

/// A nondecreasing map `[0,1] → [0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum MonotoneMap {
    /// Linear interpolation between `(breakpoints[i], values[i])`, constant
    /// beyond the end points.
    PiecewiseLinear { breakpoints: Vec<f64>, values: Vec<f64> },
    /// `x ↦ xc / (cx + (1−c)(1−x))`: Bayes update of `x` with an imaginary
    /// signal whose private belief is `c`.
    OddsScale { c: f64 },
}

impl MonotoneMap {
    pub fn piecewise_linear(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || breakpoints.len() != values.len() {
            return Err(invalid(
                "monotone map needs at least two breakpoints and one value per breakpoint",
            ));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("monotone map breakpoints must be strictly increasing"));
        }
        if breakpoints.iter().chain(&values).any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("monotone map breakpoints and values must lie in [0,1]"));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("monotone map values must be nondecreasing"));
        }
        Ok(MonotoneMap::PiecewiseLinear { breakpoints, values })
    }

    pub fn odds_scale(c: f64) -> Result<Self> {
        check_c(c)?;
        Ok(MonotoneMap::OddsScale { c })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            MonotoneMap::OddsScale { c } => odds_scale(x, *c),
            MonotoneMap::PiecewiseLinear { breakpoints, values } => {
                let n = breakpoints.len();
                if x <= breakpoints[0] {
                    return values[0];
                }
                if x >= breakpoints[n - 1] {
                    return values[n - 1];
                }
                let i = breakpoints.partition_point(|b| *b <= x);
                let (x0, x1) = (breakpoints[i - 1], breakpoints[i]);
                let (y0, y1) = (values[i - 1], values[i]);
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0 && c < 1.0) {
        return Err(invalid(format!("complementary parameter c must lie in (0,1), got {c}")));
    }
    Ok(())
}

#[inline]
fn odds_scale(x: f64, c: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return x;
    }
    let num = x * c;
    num / (num + (1.0 - c) * (1.0 - x))
}

/// How a prior is formed from the observed counts.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorRule {
    DeGroot,
    QuasiBayes(QuasiBayesParams),
    /// `b(m, k) = g(k / (m + k))`.
    SizeInvariant(MonotoneMap),
    /// Arbitrary `b(m, k)` for exploration.
    Tabular(BTreeMap<(u64, u64), f64>),
}

/// A prior either as a probability or, for count-driven rules, as log-odds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorValue {
    Prob(f64),
    LogOdds(f64),
}

impl PriorValue {
    pub fn probability(self) -> f64 {
        match self {
            PriorValue::Prob(p) => p,
            PriorValue::LogOdds(l) => logistic(l),
        }
    }

    pub fn log_odds(self) -> f64 {
        match self {
            PriorValue::Prob(p) => logit(p),
            PriorValue::LogOdds(l) => l,
        }
    }

    /// Posterior after a signal with private belief `p`. Certain priors are absorbing.
    #[inline]
    pub fn posterior(self, p: f64) -> f64 {
        match self {
            PriorValue::Prob(b) => posterior_unchecked(p, b),
            PriorValue::LogOdds(l) => {
                if p <= 0.0 || p >= 1.0 {
                    p
                } else {
                    logistic(l + logit(p))
                }
            }
        }
    }
}

impl PriorRule {
    pub fn value(&self, m: u64, k: u64) -> Result<PriorValue> {
        match self {
            PriorRule::DeGroot => degroot_prior(m, k).map(PriorValue::Prob),
            PriorRule::QuasiBayes(params) => Ok(PriorValue::LogOdds(params.log_odds(m, k))),
            PriorRule::SizeInvariant(g) => Ok(PriorValue::Prob(g.eval(degroot_prior(m, k)?))),
            PriorRule::Tabular(table) => table
                .get(&(m, k))
                .copied()
                .map(PriorValue::Prob)
                .ok_or(Error::MissingEntry { m, k }),
        }
    }

    /// The map `g` with `b(m, k) = g(k/(m+k))`, or `None` for the identity.
    pub fn proportion_map(&self) -> Result<Option<&MonotoneMap>> {
        match self {
            PriorRule::DeGroot => Ok(None),
            PriorRule::SizeInvariant(g) => Ok(Some(g)),
            PriorRule::QuasiBayes(_) | PriorRule::Tabular(_) => Err(Error::NotSizeInvariant),
        }
    }

    pub fn is_quasi_bayes(&self) -> bool {
        matches!(self, PriorRule::QuasiBayes(_))
    }
}

/// Dispatch over prior rule variants, returning a probability.
pub fn form_prior(rule: &PriorRule, m: u64, k: u64) -> Result<f64> {
    rule.value(m, k).map(PriorValue::probability)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Continuity {
    Left,
    #[default]
    Right,
}

/// A nondecreasing step function: `values[i]` on the `i`-th piece between
/// consecutive breakpoints. At a breakpoint the value of the right piece is
/// taken when right-continuous, the left piece when left-continuous.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRule {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    continuity: Continuity,
}

impl StepRule {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>, continuity: Continuity) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(invalid(format!(
                "piecewise rule with {} breakpoints needs {} values, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                values.len()
            )));
        }
        if breakpoints.iter().any(|b| !(*b > 0.0 && *b < 1.0)) {
            return Err(invalid("piecewise breakpoints must lie strictly inside (0,1)"));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("piecewise breakpoints must be strictly increasing"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("piecewise values must lie in [0,1]"));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid("piecewise decision rule must be nondecreasing"));
        }
        Ok(StepRule {
            breakpoints,
            values,
            continuity,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    pub fn eval(&self, y: f64) -> f64 {
        let piece = match self.continuity {
            Continuity::Right => self.breakpoints.partition_point(|b| *b <= y),
            Continuity::Left => self.breakpoints.partition_point(|b| *b < y),
        };
        self.values[piece]
    }
}

/// `σ`: probability of playing action 1 at posterior `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DecisionRuleRepr", into = "DecisionRuleSpec")]
pub enum DecisionRule {
    ProbabilityMatching,
    /// 1 iff the posterior is at least 1/2.
    BayesThreshold,
    /// `y ↦ (1−c)y / ((1−c)y + c(1−y))`, the inverse of [`MonotoneMap::OddsScale`].
    Complementary { c: f64 },
    Piecewise(StepRule),
}

impl DecisionRule {
    pub fn complementary(c: f64) -> Result<Self> {
        check_c(c)?;
        Ok(DecisionRule::Complementary { c })
    }

    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        match self {
            DecisionRule::ProbabilityMatching => y,
            DecisionRule::BayesThreshold => {
                if y >= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            DecisionRule::Complementary { c } => odds_scale(y, 1.0 - c),
            DecisionRule::Piecewise(step) => step.eval(y),
        }
    }
}

pub fn evaluate_decision(rule: &DecisionRule, y: f64) -> f64 {
    rule.eval(y)
}

/// The complementary pair `(g_c, σ_c)`; `σ_c ∘ g_c` is the identity.
pub fn complementary_pair(c: f64) -> Result<(MonotoneMap, DecisionRule)> {
    Ok((MonotoneMap::odds_scale(c)?, DecisionRule::complementary(c)?))
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum DecisionRuleSpec {
    ProbabilityMatching {},
    BayesThreshold {},
    Complementary {
        c: f64,
    },
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        #[serde(default)]
        continuity: Continuity,
    },
}

/// Rules without parameters may also be written as a bare name.
#[derive(Deserialize)]
#[serde(untagged)]
enum DecisionRuleRepr {
    Name(DecisionName),
    Spec(DecisionRuleSpec),
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum DecisionName {
    ProbabilityMatching,
    BayesThreshold,
}

impl TryFrom<DecisionRuleRepr> for DecisionRule {
    type Error = Error;

    fn try_from(repr: DecisionRuleRepr) -> Result<Self> {
        match repr {
            DecisionRuleRepr::Name(DecisionName::ProbabilityMatching) => Ok(DecisionRule::ProbabilityMatching),
            DecisionRuleRepr::Name(DecisionName::BayesThreshold) => Ok(DecisionRule::BayesThreshold),
            DecisionRuleRepr::Spec(spec) => spec.try_into(),
        }
    }
}

impl TryFrom<DecisionRuleSpec> for DecisionRule {
    type Error = Error;

    fn try_from(spec: DecisionRuleSpec) -> Result<Self> {
        Ok(match spec {
            DecisionRuleSpec::ProbabilityMatching {} => DecisionRule::ProbabilityMatching,
            DecisionRuleSpec::BayesThreshold {} => DecisionRule::BayesThreshold,
            DecisionRuleSpec::Complementary { c } => DecisionRule::complementary(c)?,
            DecisionRuleSpec::Piecewise {
                breakpoints,
                values,
                continuity,
            } => DecisionRule::Piecewise(StepRule::new(breakpoints, values, continuity)?),
        })
    }
}

impl From<DecisionRule> for DecisionRuleSpec {
    fn from(rule: DecisionRule) -> Self {
        match rule {
            DecisionRule::ProbabilityMatching => DecisionRuleSpec::ProbabilityMatching {},
            DecisionRule::BayesThreshold => DecisionRuleSpec::BayesThreshold {},
            DecisionRule::Complementary { c } => DecisionRuleSpec::Complementary { c },
            DecisionRule::Piecewise(s) => DecisionRuleSpec::Piecewise {
                breakpoints: s.breakpoints,
                values: s.values,
                continuity: s.continuity,
            },
        }
    }
}

/// JSON form of a prior rule. Quasi-Bayes parameters may be derived from the
/// signal model, so the spec is resolved against one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields, from = "PriorRuleRepr")]
pub enum PriorRuleSpec {
    Degroot {},
    Quasibayes(QuasiBayesSpec),
    SizeInvariant(SizeInvariantSpec),
    Tabular { entries: Vec<(u64, u64, f64)> },
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PriorRuleRepr {
    Name(PriorName),
    #[serde(with = "PriorRuleTagged")]
    Spec(PriorRuleSpec),
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum PriorName {
    Degroot,
}

#[derive(Deserialize)]
#[serde(remote = "PriorRuleSpec", rename_all = "snake_case", deny_unknown_fields)]
enum PriorRuleTagged {
    Degroot {},
    Quasibayes(QuasiBayesSpec),
    SizeInvariant(SizeInvariantSpec),
    Tabular { entries: Vec<(u64, u64, f64)> },
}

impl From<PriorRuleRepr> for PriorRuleSpec {
    fn from(repr: PriorRuleRepr) -> Self {
        match repr {
            PriorRuleRepr::Name(PriorName::Degroot) => PriorRuleSpec::Degroot {},
            PriorRuleRepr::Spec(spec) => spec,
        }
    }
}

impl Default for PriorRuleSpec {
    fn default() -> Self {
        PriorRuleSpec::Degroot {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum QuasiBayesSpec {
    Params {
        q: f64,
        r: f64,
    },
    FromModel {
        from_model: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SizeInvariantSpec {
    Complementary {
        complementary_c: f64,
    },
    Piecewise {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
}

impl PriorRuleSpec {
    pub fn resolve(&self, model: Option<&SignalModel>) -> Result<PriorRule> {
        Ok(match self {
            PriorRuleSpec::Degroot {} => PriorRule::DeGroot,
            PriorRuleSpec::Quasibayes(QuasiBayesSpec::Params { q, r }) => {
                PriorRule::QuasiBayes(QuasiBayesParams::new(*q, *r)?)
            }
            PriorRuleSpec::Quasibayes(QuasiBayesSpec::FromModel { from_model }) => {
                if !from_model {
                    return Err(invalid("quasibayes needs either q and r or from_model: true"));
                }
                let model = model.ok_or_else(|| {
                    invalid("quasibayes from_model needs a single signal model")
                })?;
                PriorRule::QuasiBayes(QuasiBayesParams::from_model(model)?)
            }
            PriorRuleSpec::SizeInvariant(SizeInvariantSpec::Complementary { complementary_c }) => {
                PriorRule::SizeInvariant(MonotoneMap::odds_scale(*complementary_c)?)
            }
            PriorRuleSpec::SizeInvariant(SizeInvariantSpec::Piecewise { breakpoints, values }) => {
                PriorRule::SizeInvariant(MonotoneMap::piecewise_linear(
                    breakpoints.clone(),
                    values.clone(),
                )?)
            }
            PriorRuleSpec::Tabular { entries } => {
                let mut table = BTreeMap::new();
                for &(m, k, p) in entries {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(invalid(format!("tabular prior {p} outside [0,1]")));
                    }
                    table.insert((m, k), p);
                }
                PriorRule::Tabular(table)
            }
        })
    }
}
