//! Finite information structures and the exact belief computations built on
//! them.
//!
//! A [`SignalModel`] is a prior on the state `ω = 1` together with two
//! probability vectors over a finite signal alphabet, one per state. Every
//! expectation over signals is therefore a finite sum and all quantities here
//! are computed exactly (up to floating point rounding).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance for probability vectors summing to one.
pub const SUM_TOL: f64 = 1e-12;

/// Two belief values closer than this are merged into one atom.
pub const MERGE_TOL: f64 = 1e-12;

/// The binary state of the world.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum State {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
}

impl State {
    pub fn index(self) -> usize {
        match self {
            State::Zero => 0,
            State::One => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<State> {
        match i {
            0 => Some(State::Zero),
            1 => Some(State::One),
            _ => None,
        }
    }

    pub fn flip(self) -> State {
        match self {
            State::Zero => State::One,
            State::One => State::Zero,
        }
    }
}

/// Which law a belief distribution is taken under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Unconditional,
    Given(State),
}

/// A prior on `ω = 1` plus state-conditional signal distributions over a
/// finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SignalModelSpec", into = "SignalModelSpec")]
pub struct SignalModel {
    mu: f64,
    signals: Vec<String>,
    f0: Vec<f64>,
    f1: Vec<f64>,
}

impl SignalModel {
    pub fn new(mu: f64, signals: Vec<String>, f0: Vec<f64>, f1: Vec<f64>) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(invalid(format!("prior mu must lie in (0,1), got {mu}")));
        }
        if signals.is_empty() {
            return Err(invalid("signal alphabet is empty"));
        }
        if f0.len() != signals.len() || f1.len() != signals.len() {
            return Err(invalid(format!(
                "f0 ({}) and f1 ({}) must align with the {} signals",
                f0.len(),
                f1.len(),
                signals.len()
            )));
        }
        for (i, a) in signals.iter().enumerate() {
            if signals[..i].contains(a) {
                return Err(invalid(format!("duplicate signal identifier `{a}`")));
            }
        }
        for (name, v) in [("f0", &f0), ("f1", &f1)] {
            if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(invalid(format!("{name} has a negative or non-finite entry")));
            }
            let total: f64 = v.iter().sum();
            if (total - 1.0).abs() > SUM_TOL {
                return Err(invalid(format!("{name} sums to {total}, not 1")));
            }
        }
        if f0.iter().zip(&f1).all(|(a, b)| (a - b).abs() <= SUM_TOL) {
            return Err(invalid("uninformative model: f0 equals f1"));
        }
        Ok(SignalModel { mu, signals, f0, f1 })
    }

    /// Builds a model with signals named `s0, s1, ...`.
    pub fn from_vectors(mu: f64, f0: Vec<f64>, f1: Vec<f64>) -> Result<Self> {
        let signals = (0..f0.len()).map(|i| format!("s{i}")).collect();
        Self::new(mu, signals, f0, f1)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn signals(&self) -> &[String] {
        &self.signals
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    pub fn f0(&self) -> &[f64] {
        &self.f0
    }

    pub fn f1(&self) -> &[f64] {
        &self.f1
    }

    /// Signal distribution conditional on `state`.
    pub fn conditional(&self, state: State) -> &[f64] {
        match state {
            State::Zero => &self.f0,
            State::One => &self.f1,
        }
    }

    /// Same model with a different prior on `ω = 1`.
    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Self::new(mu, self.signals.clone(), self.f0.clone(), self.f1.clone())
    }

    /// True iff f0 and f1 have identical supports.
    pub fn mutually_abs_continuous(&self) -> bool {
        self.f0.iter().zip(&self.f1).all(|(a, b)| (*a > 0.0) == (*b > 0.0))
    }

    pub fn signal_index(&self, s: &str) -> Result<usize> {
        self.signals
            .iter()
            .position(|x| x == s)
            .ok_or_else(|| Error::UnknownSignal(s.to_string()))
    }

    /// `p(s)`: posterior on `ω = 1` after signal `s` under a uniform prior.
    pub fn private_belief(&self, s: &str) -> Result<f64> {
        self.private_belief_at(self.signal_index(s)?)
    }

    pub fn private_belief_at(&self, idx: usize) -> Result<f64> {
        let (a, b) = (self.f0[idx], self.f1[idx]);
        if a == 0.0 && b == 0.0 {
            return Err(Error::DegenerateSignal(self.signals[idx].clone()));
        }
        if a == 0.0 {
            return Ok(1.0);
        }
        if b == 0.0 {
            return Ok(0.0);
        }
        if a == b {
            return Ok(0.5);
        }
        Ok(b / (a + b))
    }

    /// `p_μ(s)`: the posterior after signal `s` when the prior is `mu`.
    pub fn posterior_given_prior(&self, s: &str, mu: f64) -> Result<f64> {
        bayes_posterior(self.private_belief(s)?, mu)
    }

    /// Distribution of `p_μ(s)` when `s` is drawn under `mu` (or under one state).
    pub fn belief_distribution(&self, mu: f64, condition: Condition) -> Result<BeliefDistribution> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(invalid(format!("prior must lie in (0,1), got {mu}")));
        }
        let mut atoms = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let (a, b) = (self.f0[i], self.f1[i]);
            let mass = match condition {
                Condition::Unconditional => mu * b + (1.0 - mu) * a,
                Condition::Given(State::One) => b,
                Condition::Given(State::Zero) => a,
            };
            if mass <= 0.0 {
                continue;
            }
            let belief = bayes_posterior(self.private_belief_at(i)?, mu)?;
            atoms.push((belief, mass));
        }
        BeliefDistribution::from_atoms(atoms)
    }

    /// `v`: variance of the private-belief distribution under a uniform prior.
    pub fn private_belief_variance(&self) -> f64 {
        self.belief_distribution(0.5, Condition::Unconditional)
            .map(|d| d.variance)
            .unwrap_or(0.0)
    }

    pub(crate) fn sample_signal(&self, state: State, u: f64) -> usize {
        sample_index(self.conditional(state), u)
    }
}

/// Inverse-CDF draw over a probability vector; zero-mass entries are never chosen.
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// The symmetric binary structure with `Pr(s_ω | ω) = 1/2 + ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinarySymmetricModel {
    epsilon: f64,
}

impl BinarySymmetricModel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(invalid(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
        }
        Ok(BinarySymmetricModel { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn to_model(&self) -> SignalModel {
        self.to_model_with_mu(0.5).expect("mu = 1/2 is valid")
    }

    pub fn to_model_with_mu(&self, mu: f64) -> Result<SignalModel> {
        let hi = 0.5 + self.epsilon;
        let lo = 0.5 - self.epsilon;
        SignalModel::new(
            mu,
            vec!["s0".into(), "s1".into()],
            vec![hi, lo],
            vec![lo, hi],
        )
    }
}

/// The binary symmetric structure whose private beliefs sit at `1/2 ± √v`,
/// i.e. has variance exactly `v` under a uniform prior.
pub fn dominated_binary_model(v: f64) -> Result<BinarySymmetricModel> {
    if !(v > 0.0 && v < 0.25) {
        return Err(invalid(format!("variance bound must lie in (0, 1/4), got {v}")));
    }
    BinarySymmetricModel::new(v.sqrt())
}

/// Posterior on `ω = 1` from private belief `p` and prior `prior`:
/// `p·b / (p·b + (1−p)(1−b))`.
pub fn bayes_posterior(p: f64, prior: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&prior) {
        return Err(invalid(format!(
            "belief and prior must lie in [0,1], got ({p}, {prior})"
        )));
    }
    if (p == 1.0 && prior == 0.0) || (p == 0.0 && prior == 1.0) {
        return Err(Error::UndefinedPosterior { p, prior });
    }
    Ok(posterior_unchecked(p, prior))
}

/// Posterior for arguments already known to be in range and not 0/0.
/// Certain priors are absorbing.
#[inline]
pub(crate) fn posterior_unchecked(p: f64, prior: f64) -> f64 {
    if prior == 0.0 || prior == 1.0 || p == 0.5 {
        return prior;
    }
    if p == 0.0 || p == 1.0 || prior == 0.5 {
        return p;
    }
    let num = p * prior;
    num / (num + (1.0 - p) * (1.0 - prior))
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[inline]
pub fn logistic(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

/// A finitely supported distribution of beliefs on `[0,1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefDistribution {
    pub atoms: Vec<(f64, f64)>,
    pub mean: f64,
    pub variance: f64,
    pub support_lo: f64,
    pub support_hi: f64,
}

impl BeliefDistribution {
    /// Sorts, merges values within [`MERGE_TOL`] and drops zero-mass atoms.
    pub fn from_atoms(mut raw: Vec<(f64, f64)>) -> Result<Self> {
        if raw
            .iter()
            .any(|&(x, m)| !(0.0..=1.0).contains(&x) || !(m >= 0.0) || !m.is_finite())
        {
            return Err(invalid("belief atoms must lie in [0,1] with non-negative mass"));
        }
        raw.retain(|&(_, m)| m > 0.0);
        if raw.is_empty() {
            return Err(invalid("belief distribution has no mass"));
        }
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (x, m) in raw {
            match atoms.last_mut() {
                Some(last) if (x - last.0).abs() <= MERGE_TOL => last.1 += m,
                _ => atoms.push((x, m)),
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(invalid(format!("belief masses sum to {total}, not 1")));
        }
        let mean: f64 = atoms.iter().map(|&(x, m)| x * m).sum();
        let variance: f64 = atoms.iter().map(|&(x, m)| m * (x - mean) * (x - mean)).sum();
        let support_lo = atoms[0].0;
        let support_hi = atoms[atoms.len() - 1].0;
        Ok(BeliefDistribution {
            atoms,
            mean,
            variance,
            support_lo,
            support_hi,
        })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .take_while(|a| a.0 <= x + MERGE_TOL)
            .map(|a| a.1)
            .sum()
    }

    /// Mass at `x`, zero when `x` is not an atom.
    pub fn mass_at(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .find(|a| (a.0 - x).abs() <= MERGE_TOL)
            .map_or(0.0, |a| a.1)
    }
}

/// Outcome of a first-order stochastic dominance comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fosd {
    /// CDF of the first distribution never exceeds that of the second.
    pub dominates: bool,
    /// The CDF inequality is strict at some atom.
    pub strict: bool,
}

/// Does `g1` first-order stochastically dominate `g0`?
pub fn check_fosd(g1: &BeliefDistribution, g0: &BeliefDistribution) -> Fosd {
    let mut points: Vec<f64> = g1.atoms.iter().chain(&g0.atoms).map(|a| a.0).collect();
    points.sort_by(f64::total_cmp);
    let mut dominates = true;
    let mut strict = false;
    for x in points {
        let (c1, c0) = (g1.cdf(x), g0.cdf(x));
        if c1 > c0 + SUM_TOL {
            dominates = false;
        }
        if c1 < c0 - SUM_TOL {
            strict = true;
        }
    }
    Fosd {
        dominates,
        strict: dominates && strict,
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SignalModelSpec {
    Explicit(ExplicitSpec),
    Binary(BinaryWrapper),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitSpec {
    mu: f64,
    signals: Vec<String>,
    f0: Vec<f64>,
    f1: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BinaryWrapper {
    binary_symmetric: BinarySpec,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BinarySpec {
    epsilon: f64,
    #[serde(default = "half")]
    mu: f64,
}

fn half() -> f64 {
    0.5
}

impl TryFrom<SignalModelSpec> for SignalModel {
    type Error = Error;

    fn try_from(spec: SignalModelSpec) -> Result<Self> {
        match spec {
            SignalModelSpec::Explicit(e) => SignalModel::new(e.mu, e.signals, e.f0, e.f1),
            SignalModelSpec::Binary(b) => BinarySymmetricModel::new(b.binary_symmetric.epsilon)?
                .to_model_with_mu(b.binary_symmetric.mu),
        }
    }
}

impl From<SignalModel> for SignalModelSpec {
    fn from(m: SignalModel) -> Self {
        SignalModelSpec::Explicit(ExplicitSpec {
            mu: m.mu,
            signals: m.signals,
            f0: m.f0,
            f1: m.f1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(e: f64) -> SignalModel {
        BinarySymmetricModel::new(e).unwrap().to_model()
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn private_belief_examples() {
        close(eps(0.2).private_belief("s1").unwrap(), 0.7);
        let m = SignalModel::from_vectors(0.5, vec![0.3, 0.7], vec![0.9, 0.1]).unwrap();
        close(m.private_belief("s0").unwrap(), 0.75);
        let flat = SignalModel::from_vectors(0.5, vec![0.2, 0.3, 0.5], vec![0.2, 0.6, 0.2]).unwrap();
        assert_eq!(flat.private_belief("s0").unwrap(), 0.5);
    }

    #[test]
    fn private_belief_errors_and_extremes() {
        let m = SignalModel::from_vectors(0.5, vec![0.0, 0.5, 0.5, 0.0], vec![0.5, 0.5, 0.0, 0.0])
            .unwrap();
        assert_eq!(m.private_belief("s0").unwrap(), 1.0);
        assert_eq!(m.private_belief("s2").unwrap(), 0.0);
        assert!(matches!(m.private_belief("s3"), Err(Error::DegenerateSignal(_))));
        assert!(matches!(m.private_belief("nope"), Err(Error::UnknownSignal(_))));
        assert!(!m.mutually_abs_continuous());
        assert!(eps(0.1).mutually_abs_continuous());
    }

    #[test]
    fn bayes_posterior_examples() {
        close(bayes_posterior(0.7, 0.5).unwrap(), 0.7);
        close(bayes_posterior(0.7, 0.3).unwrap(), 0.5);
        close(bayes_posterior(0.6, 0.75).unwrap(), 4.5 / 5.5);
        assert_eq!(bayes_posterior(0.5, 0.37).unwrap(), 0.37);
        assert_eq!(bayes_posterior(0.9, 0.0).unwrap(), 0.0);
        assert_eq!(bayes_posterior(0.2, 1.0).unwrap(), 1.0);
        assert!(matches!(bayes_posterior(1.0, 0.0), Err(Error::UndefinedPosterior { .. })));
        assert!(matches!(bayes_posterior(0.0, 1.0), Err(Error::UndefinedPosterior { .. })));
        assert!(bayes_posterior(1.2, 0.5).is_err());
    }

    #[test]
    fn posterior_given_prior_examples() {
        close(eps(0.2).posterior_given_prior("s1", 0.5).unwrap(), 0.7);
        close(eps(0.2).posterior_given_prior("s0", 0.7).unwrap(), 0.5);
        close(eps(0.1).posterior_given_prior("s1", 0.25).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn belief_distribution_examples() {
        let g = eps(0.2).belief_distribution(0.5, Condition::Unconditional).unwrap();
        assert_eq!(g.atoms.len(), 2);
        close(g.atoms[0].0, 0.3);
        close(g.atoms[0].1, 0.5);
        close(g.atoms[1].0, 0.7);
        close(g.variance, 0.04);
        let g1 = eps(0.2).belief_distribution(0.5, Condition::Given(State::One)).unwrap();
        close(g1.atoms[0].1, 0.3);
        close(g1.atoms[1].1, 0.7);
        let m = SignalModel::from_vectors(0.5, vec![0.1, 0.2, 0.7], vec![0.5, 0.3, 0.2]).unwrap();
        close(m.belief_distribution(0.37, Condition::Unconditional).unwrap().mean, 0.37);
    }

    #[test]
    fn identical_beliefs_merge() {
        // s0 and s1 both give p = 0.25
        let m = SignalModel::from_vectors(0.5, vec![0.3, 0.3, 0.4], vec![0.1, 0.1, 0.8]).unwrap();
        let g = m.belief_distribution(0.5, Condition::Unconditional).unwrap();
        assert_eq!(g.atoms.len(), 2);
        close(g.atoms[0].1, 0.4);
    }

    #[test]
    fn dominated_binary_examples() {
        close(dominated_binary_model(0.04).unwrap().epsilon(), 0.2);
        let tiny = dominated_binary_model(1e-10).unwrap();
        assert!(tiny.epsilon() < 1e-4);
        assert!(dominated_binary_model(0.25).is_err());
        assert!(dominated_binary_model(0.0).is_err());
        let v = dominated_binary_model(0.01).unwrap().to_model().private_belief_variance();
        close(v, 0.01);
    }

    #[test]
    fn fosd_examples() {
        let m = eps(0.2);
        let g1 = m.belief_distribution(0.5, Condition::Given(State::One)).unwrap();
        let g0 = m.belief_distribution(0.5, Condition::Given(State::Zero)).unwrap();
        close(g1.cdf(0.3), 0.3);
        close(g0.cdf(0.3), 0.7);
        assert_eq!(check_fosd(&g1, &g0), Fosd { dominates: true, strict: true });
        assert_eq!(check_fosd(&g1, &g1), Fosd { dominates: true, strict: false });
        assert!(!check_fosd(&g0, &g1).dominates);
    }

    #[test]
    fn construction_rejects_bad_models() {
        assert!(SignalModel::from_vectors(0.5, vec![0.5, 0.5], vec![0.5, 0.5]).is_err());
        assert!(SignalModel::from_vectors(0.5, vec![0.5, 0.6], vec![0.5, 0.5]).is_err());
        assert!(SignalModel::from_vectors(1.0, vec![0.4, 0.6], vec![0.6, 0.4]).is_err());
        assert!(SignalModel::from_vectors(0.5, vec![0.4, 0.6], vec![0.6]).is_err());
        assert!(BinarySymmetricModel::new(0.5).is_err());
    }

    #[test]
    fn json_forms() {
        let m: SignalModel =
            serde_json::from_str(r#"{"mu":0.5,"signals":["a","b"],"f0":[0.7,0.3],"f1":[0.3,0.7]}"#)
                .unwrap();
        assert_eq!(m, eps(0.2).with_mu(0.5).unwrap().relabel(&["a", "b"]));
        let b: SignalModel = serde_json::from_str(r#"{"binary_symmetric":{"epsilon":0.2}}"#).unwrap();
        assert_eq!(b, eps(0.2));
        assert!(serde_json::from_str::<SignalModel>(r#"{"binary_symmetric":{"epsilon":0.2,"x":1}}"#)
            .is_err());
        assert!(serde_json::from_str::<SignalModel>(r#"{"binary_symmetric":{"epsilon":0.7}}"#).is_err());
        let back: SignalModel = serde_json::from_str(&serde_json::to_string(&b).unwrap()).unwrap();
        assert_eq!(back, b);
    }

    impl SignalModel {
        fn relabel(mut self, names: &[&str]) -> Self {
            self.signals = names.iter().map(|s| s.to_string()).collect();
            self
        }
    }
}
