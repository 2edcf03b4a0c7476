//! Generalized Pólya urn dynamics.
//!
//! Conditional on the state, the action process is an urn: with a fraction
//! `x` of 1-balls, the next ball is a 1-ball with probability `f(x)`. This
//! module evaluates `f` exactly for a heuristic, scans its drift `f(x) − x`,
//! locates and classifies fixed points, and simulates single and coupled urns.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::heuristics::{proportion, DecisionRule, MonotoneMap, PriorRule, PriorValue};
use crate::kernel::PreparedModel;
use crate::seeding;
use crate::signal_model::{BeliefDistribution, SignalModel, State};

/// `|f(x) − x|` at or below this counts as touching the diagonal.
pub const TOUCH_TOL: f64 = 1e-9;

/// Offset used to report the one-sided limits of `f` at 0 and 1.
pub const BOUNDARY_OFFSET: f64 = 1e-12;

pub const DOMINANCE_TOL: f64 = 1e-12;

/// Anything that gives the probability of adding a 1-ball at step `step`
/// (zero-based) when the current proportion is `x`.
pub trait UrnProcess: Sync {
    fn prob(&self, step: u64, x: f64) -> f64;
}

/// A time-homogeneous urn function `f: [0,1] → [0,1]`.
#[derive(Clone)]
pub struct UrnFunction {
    kind: UrnKind,
    label: String,
}

#[derive(Clone)]
enum UrnKind {
    Agent(Box<AgentUrn>),
    Constant(f64),
    Identity,
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

#[derive(Clone)]
struct AgentUrn {
    prepared: PreparedModel,
    map: Option<MonotoneMap>,
    rule: DecisionRule,
    state: State,
}

impl fmt::Debug for UrnFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UrnFunction").field("label", &self.label).finish()
    }
}

impl UrnFunction {
    pub fn constant(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(invalid(format!("constant urn value {value} outside [0,1]")));
        }
        Ok(UrnFunction {
            kind: UrnKind::Constant(value),
            label: format!("constant({value})"),
        })
    }

    pub fn identity() -> Self {
        UrnFunction {
            kind: UrnKind::Identity,
            label: "identity".into(),
        }
    }

    /// Wraps an arbitrary function; values are clamped to `[0,1]`.
    pub fn custom(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        UrnFunction {
            kind: UrnKind::Custom(Arc::new(f)),
            label: label.into(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Conditioning state for urns built from a heuristic.
    pub fn state(&self) -> Option<State> {
        match &self.kind {
            UrnKind::Agent(a) => Some(a.state),
            _ => None,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            UrnKind::Agent(a) => {
                let prior = match &a.map {
                    None => x,
                    Some(g) => g.eval(x),
                };
                a.prepared
                    .action_probability(a.state, PriorValue::Prob(prior), &a.rule)
            }
            UrnKind::Constant(v) => *v,
            UrnKind::Identity => x,
            UrnKind::Custom(f) => f(x).clamp(0.0, 1.0),
        }
    }
}

impl UrnProcess for UrnFunction {
    #[inline]
    fn prob(&self, _step: u64, x: f64) -> f64 {
        self.eval(x)
    }
}

/// A periodic sequence of urn functions, `f_t = fns[t mod period]`.
#[derive(Debug, Clone)]
pub struct CyclicUrn {
    fns: Vec<UrnFunction>,
}

impl CyclicUrn {
    pub fn new(fns: Vec<UrnFunction>) -> Result<Self> {
        if fns.is_empty() {
            return Err(invalid("cyclic urn needs at least one function"));
        }
        Ok(CyclicUrn { fns })
    }

    pub fn functions(&self) -> &[UrnFunction] {
        &self.fns
    }
}

impl UrnProcess for CyclicUrn {
    fn prob(&self, step: u64, x: f64) -> f64 {
        self.fns[(step % self.fns.len() as u64) as usize].eval(x)
    }
}

/// `f(x) = Σ_s Pr(s | ω) · σ(posterior(p(s), b(x)))` for a size-invariant prior.
pub fn build_urn_function(
    model: &SignalModel,
    prior: &PriorRule,
    rule: &DecisionRule,
    state: State,
) -> Result<UrnFunction> {
    let map = prior.proportion_map()?.cloned();
    let label = format!("{prior:?}/{rule:?}/omega={}", state.index());
    Ok(UrnFunction {
        kind: UrnKind::Agent(Box::new(AgentUrn {
            prepared: PreparedModel::new(model.clone())?,
            map,
            rule: rule.clone(),
            state,
        })),
        label,
    })
}

/// The same probability as [`build_urn_function`] for DeGroot + probability
/// matching at `ω = 1` and prior 1/2, written as an integral over the private
/// belief distribution: `Σ_y mass(y) · 2xy² / (xy + (1−x)(1−y))`.
pub fn belief_integral_urn(beliefs: &BeliefDistribution, x: f64) -> f64 {
    beliefs
        .atoms
        .iter()
        .map(|&(y, mass)| {
            let den = x * y + (1.0 - x) * (1.0 - y);
            if den == 0.0 {
                0.0
            } else {
                mass * 2.0 * x * y * y / den
            }
        })
        .sum()
}

/// Points `i / (n + 1)` for `i = 1..=n`.
pub fn interior_grid(n: usize) -> impl Iterator<Item = f64> {
    (1..=n).map(move |i| i as f64 / (n + 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftClass {
    AllAbove,
    AllBelow,
    Mixed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftScan {
    pub class: DriftClass,
    /// `min |f(x) − x|` over the grid.
    pub min_margin: f64,
    pub min_margin_x: f64,
    /// First grid points with `f > x` and with `f < x`.
    pub first_above: Option<f64>,
    pub first_below: Option<f64>,
    /// `(x, f(x) − x)` for every grid point.
    pub points: Vec<(f64, f64)>,
}

impl DriftScan {
    pub fn margin_at(&self, x: f64) -> Option<f64> {
        self.points
            .iter()
            .find(|p| (p.0 - x).abs() < 1e-12)
            .map(|p| p.1)
    }
}

/// Sign of `f(x) − x` over a uniform interior grid.
pub fn drift_sign_scan(f: &UrnFunction, grid_size: usize) -> Result<DriftScan> {
    if grid_size < 3 {
        return Err(invalid("drift scan needs a grid of at least 3 points"));
    }
    let points: Vec<(f64, f64)> = interior_grid(grid_size).map(|x| (x, f.eval(x) - x)).collect();
    let all_above = points.iter().all(|p| p.1 > 0.0);
    let all_below = points.iter().all(|p| p.1 < 0.0);
    let class = if all_above {
        DriftClass::AllAbove
    } else if all_below {
        DriftClass::AllBelow
    } else {
        DriftClass::Mixed
    };
    let (min_margin_x, min_margin) = points
        .iter()
        .map(|p| (p.0, p.1.abs()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is non-empty");
    Ok(DriftScan {
        class,
        min_margin,
        min_margin_x,
        first_above: points.iter().find(|p| p.1 > 0.0).map(|p| p.0),
        first_below: points.iter().find(|p| p.1 < 0.0).map(|p| p.0),
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossingKind {
    /// `f > x` on the left, `f < x` on the right.
    StableDowncrossing,
    /// `f < x` on the left, `f > x` on the right.
    UnstableUpcrossing,
    /// Touches the diagonal without changing sign.
    Touchpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub x: f64,
    pub kind: CrossingKind,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryBehavior {
    /// `f` just right of 0.
    pub f0: f64,
    /// `f` just left of 1.
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub crossings: Vec<Crossing>,
    pub boundary: BoundaryBehavior,
    /// `f(x) = x` at every grid point.
    pub degenerate_identity: bool,
}

impl FixedPointReport {
    pub fn interior(&self) -> impl Iterator<Item = &Crossing> {
        self.crossings.iter().filter(|c| c.lo > 0.0 && c.hi < 1.0)
    }
}

fn sign(h: f64) -> i8 {
    if h.abs() <= TOUCH_TOL {
        0
    } else if h > 0.0 {
        1
    } else {
        -1
    }
}

/// Brackets every sign change of `f(x) − x` on `[0,1]`, refines it by
/// bisection to width `tol`, and classifies it. Step decision rules give
/// jumps; these are located the same way and classified by one-sided signs.
pub fn find_fixed_points(f: &UrnFunction, coarse_grid: usize, tol: f64) -> Result<FixedPointReport> {
    if !(tol > 0.0) {
        return Err(invalid("fixed point tolerance must be positive"));
    }
    if coarse_grid < 2 {
        return Err(invalid("fixed point search needs a grid of at least 2 intervals"));
    }
    let n = coarse_grid;
    let xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let signs: Vec<i8> = xs.iter().map(|&x| sign(f.eval(x) - x)).collect();
    let boundary = BoundaryBehavior {
        f0: f.eval(BOUNDARY_OFFSET),
        f1: f.eval(1.0 - BOUNDARY_OFFSET),
    };

    if signs.iter().all(|&s| s == 0) {
        return Ok(FixedPointReport {
            crossings: vec![Crossing {
                x: 0.5,
                kind: CrossingKind::Touchpoint,
                lo: 0.0,
                hi: 1.0,
            }],
            boundary,
            degenerate_identity: true,
        });
    }

    let mut crossings = Vec::new();
    let mut i = 0;
    while i <= n {
        if signs[i] == 0 {
            let mut j = i;
            while j < n && signs[j + 1] == 0 {
                j += 1;
            }
            let left = (i > 0).then(|| signs[i - 1]);
            let right = (j < n).then(|| signs[j + 1]);
            let kind = match (left, right) {
                (Some(1), Some(-1)) => CrossingKind::StableDowncrossing,
                (Some(-1), Some(1)) => CrossingKind::UnstableUpcrossing,
                _ => CrossingKind::Touchpoint,
            };
            crossings.push(Crossing {
                x: 0.5 * (xs[i] + xs[j]),
                kind,
                lo: xs[i],
                hi: xs[j],
            });
            i = j + 1;
            continue;
        }
        if i < n && signs[i + 1] != 0 && signs[i + 1] != signs[i] {
            let (mut lo, mut hi) = (xs[i], xs[i + 1]);
            let left_sign = signs[i];
            let mut exact = None;
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                match sign(f.eval(mid) - mid) {
                    0 => {
                        exact = Some(mid);
                        break;
                    }
                    s if s == left_sign => lo = mid,
                    _ => hi = mid,
                }
            }
            let kind = if left_sign > 0 {
                CrossingKind::StableDowncrossing
            } else {
                CrossingKind::UnstableUpcrossing
            };
            crossings.push(Crossing {
                x: exact.unwrap_or(0.5 * (lo + hi)),
                kind,
                lo,
                hi,
            });
        }
        i += 1;
    }
    Ok(FixedPointReport {
        crossings,
        boundary,
        degenerate_identity: false,
    })
}

/// A maximal interval on which `f` takes a single value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub lo: f64,
    pub hi: f64,
    pub value: f64,
}

/// Runs of exactly equal values over at least two consecutive points of a
/// uniform grid on `[0,1]`, with inner ends refined by bisection to `tol`.
/// Step decision rules make `f` piecewise constant; smooth rules give none.
pub fn find_plateaus(f: &UrnFunction, coarse_grid: usize, tol: f64) -> Result<Vec<Plateau>> {
    if !(tol > 0.0) || coarse_grid < 2 {
        return Err(invalid("plateau search needs a positive tolerance and at least 2 intervals"));
    }
    let n = coarse_grid;
    let xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| f.eval(x)).collect();
    // `inside` is a point of the plateau, `outside` is not
    let refine = |mut inside: f64, mut outside: f64, value: f64| {
        while (inside - outside).abs() > tol {
            let mid = 0.5 * (inside + outside);
            if f.eval(mid) == value {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    };
    let mut plateaus = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && vals[j + 1] == vals[i] {
            j += 1;
        }
        if j > i {
            let value = vals[i];
            let lo = if i == 0 { 0.0 } else { refine(xs[i], xs[i - 1], value) };
            let hi = if j == n { 1.0 } else { refine(xs[j], xs[j + 1], value) };
            plateaus.push(Plateau { lo, hi, value });
        }
        i = j + 1;
    }
    Ok(plateaus)
}

/// Urn composition: `m` 0-balls and `k` 1-balls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UrnState {
    pub m: u64,
    pub k: u64,
}

impl Default for UrnState {
    fn default() -> Self {
        UrnState { m: 1, k: 1 }
    }
}

impl UrnState {
    pub fn new(m: u64, k: u64) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(invalid(format!(
                "initial urn needs at least one ball of each colour, got (m={m}, k={k})"
            )));
        }
        Ok(UrnState { m, k })
    }

    pub fn x(&self) -> f64 {
        proportion(self.m, self.k)
    }

    /// Index of the agent who observes this composition, counting the
    /// synthetic initial history as prior agents (so (1,1) is `t = 3`).
    pub fn t(&self) -> u64 {
        self.m + self.k + 1
    }

    pub fn add(&mut self, one: bool) {
        if one {
            self.k += 1;
        } else {
            self.m += 1;
        }
    }
}

/// One draw of the urn: the composition before the draw and the ball added.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UrnStep {
    pub t: u64,
    pub m: u64,
    pub k: u64,
    pub x: f64,
    pub increment: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UrnTrajectory {
    pub steps: Vec<UrnStep>,
    pub terminal: UrnState,
}

impl UrnTrajectory {
    /// Proportions before each draw followed by the final proportion.
    pub fn x_path(&self) -> Vec<f64> {
        self.steps
            .iter()
            .map(|s| s.x)
            .chain(std::iter::once(self.terminal.x()))
            .collect()
    }

    pub fn increments(&self) -> Vec<u8> {
        self.steps.iter().map(|s| s.increment).collect()
    }
}

/// Runs the urn for `horizon` draws. One uniform per step; a 1-ball is added
/// iff the uniform is strictly below `f(x)`.
pub fn simulate_urn<P: UrnProcess + ?Sized>(
    f: &P,
    init: UrnState,
    horizon: u64,
    seed: u64,
) -> Result<UrnTrajectory> {
    if horizon == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    let mut rng = seeding::rng(seed);
    let mut state = init;
    let mut steps = Vec::with_capacity(horizon as usize);
    for step in 0..horizon {
        let x = state.x();
        let u: f64 = rng.gen();
        let one = u < f.prob(step, x);
        steps.push(UrnStep {
            t: state.t(),
            m: state.m,
            k: state.k,
            x,
            increment: one as u8,
        });
        state.add(one);
    }
    Ok(UrnTrajectory {
        steps,
        terminal: state,
    })
}

/// Terminal composition only; used by Monte Carlo loops.
pub(crate) fn run_urn_terminal<P: UrnProcess + ?Sized>(
    f: &P,
    init: UrnState,
    horizon: u64,
    seed: u64,
) -> UrnState {
    let mut rng = seeding::rng(seed);
    let mut state = init;
    for step in 0..horizon {
        let u: f64 = rng.gen();
        state.add(u < f.prob(step, state.x()));
    }
    state
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledTrajectory {
    pub hi: Vec<UrnState>,
    pub lo: Vec<UrnState>,
}

impl CoupledTrajectory {
    pub fn x_hi(&self) -> Vec<f64> {
        self.hi.iter().map(UrnState::x).collect()
    }

    pub fn x_lo(&self) -> Vec<f64> {
        self.lo.iter().map(UrnState::x).collect()
    }
}

/// Two urns driven by the same uniforms. Both start from `init`; the paths
/// include the initial composition. Fails at the first step where the hi
/// proportion falls below the lo proportion.
pub fn coupled_simulate<H, L>(
    f_hi: &H,
    f_lo: &L,
    init: UrnState,
    horizon: u64,
    seed: u64,
) -> Result<CoupledTrajectory>
where
    H: UrnProcess + ?Sized,
    L: UrnProcess + ?Sized,
{
    if horizon == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    let mut rng = seeding::rng(seed);
    let (mut a, mut b) = (init, init);
    let mut hi = vec![a];
    let mut lo = vec![b];
    for step in 0..horizon {
        let u: f64 = rng.gen();
        a.add(u < f_hi.prob(step, a.x()));
        b.add(u < f_lo.prob(step, b.x()));
        // equal totals, so comparing proportions is comparing 1-ball counts
        if a.k < b.k {
            return Err(Error::CouplingViolated {
                step: step + 1,
                x_hi: a.x(),
                x_lo: b.x(),
            });
        }
        hi.push(a);
        lo.push(b);
    }
    Ok(CoupledTrajectory { hi, lo })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub holds: bool,
    /// `min (f_hi(x) − f_lo(x))` over the grid.
    pub worst_margin: f64,
    pub witness_x: f64,
    /// Strictly positive margin at every grid point.
    pub strict: bool,
}

/// Does `f_hi ≥ f_lo` on a uniform interior grid?
pub fn verify_dominance<H, L>(f_hi: &H, f_lo: &L, grid_size: usize) -> Result<Dominance>
where
    H: UrnProcess + ?Sized,
    L: UrnProcess + ?Sized,
{
    if grid_size < 1 {
        return Err(invalid("dominance check needs a non-empty grid"));
    }
    let (witness_x, worst_margin) = interior_grid(grid_size)
        .map(|x| (x, f_hi.prob(0, x) - f_lo.prob(0, x)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is non-empty");
    Ok(Dominance {
        holds: worst_margin >= -DOMINANCE_TOL,
        worst_margin,
        witness_x,
        strict: worst_margin > DOMINANCE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_model::BinarySymmetricModel;

    fn eps(e: f64) -> SignalModel {
        BinarySymmetricModel::new(e).unwrap().to_model()
    }

    fn pm(e: f64, state: State) -> UrnFunction {
        build_urn_function(&eps(e), &PriorRule::DeGroot, &DecisionRule::ProbabilityMatching, state)
            .unwrap()
    }

    fn threshold(e: f64, state: State) -> UrnFunction {
        build_urn_function(&eps(e), &PriorRule::DeGroot, &DecisionRule::BayesThreshold, state).unwrap()
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn urn_function_examples() {
        close(pm(0.2, State::One).eval(0.5), 0.58);
        close(pm(0.2, State::Zero).eval(0.5), 0.42);
        assert_eq!(threshold(0.1, State::Zero).eval(0.75), 1.0);
        assert_eq!(pm(0.2, State::One).eval(0.0), 0.0);
        assert_eq!(pm(0.2, State::One).eval(1.0), 1.0);
    }

    #[test]
    fn quasi_bayes_has_no_urn_function() {
        let qb = PriorRule::QuasiBayes(crate::heuristics::QuasiBayesParams::new(0.7, 0.3).unwrap());
        let err = build_urn_function(&eps(0.2), &qb, &DecisionRule::ProbabilityMatching, State::One);
        assert_eq!(err.unwrap_err(), Error::NotSizeInvariant);
    }

    #[test]
    fn drift_scan_examples() {
        let scan = drift_sign_scan(&pm(0.2, State::One), 99).unwrap();
        assert_eq!(scan.class, DriftClass::AllAbove);
        close(scan.margin_at(0.5).unwrap(), 0.08);
        assert_eq!(drift_sign_scan(&pm(0.2, State::Zero), 99).unwrap().class, DriftClass::AllBelow);
        let scan = drift_sign_scan(&threshold(0.1, State::Zero), 99).unwrap();
        assert_eq!(scan.class, DriftClass::Mixed);
        close(scan.first_above.unwrap(), 0.6);
        assert!(drift_sign_scan(&pm(0.2, State::One), 2).is_err());
    }

    #[test]
    fn fixed_points_probability_matching() {
        let report = find_fixed_points(&pm(0.2, State::One), 10_000, 1e-10).unwrap();
        assert_eq!(report.interior().count(), 0);
        assert!(report
            .crossings
            .iter()
            .any(|c| c.kind == CrossingKind::Touchpoint && c.hi == 1.0));
        assert!(report.boundary.f0 < 1e-11);
        assert!(report.boundary.f1 > 1.0 - 1e-11);
        assert!(!report.degenerate_identity);
    }

    #[test]
    fn fixed_points_threshold_plateaus() {
        let report = find_fixed_points(&threshold(0.1, State::Zero), 10_000, 1e-10).unwrap();
        let touch = report
            .interior()
            .find(|c| c.kind == CrossingKind::Touchpoint)
            .expect("touchpoint at the 0.4 plateau");
        close(touch.x, 0.4);
        let jump = report
            .interior()
            .find(|c| c.kind == CrossingKind::UnstableUpcrossing)
            .expect("jump at 0.6");
        assert!((jump.x - 0.6).abs() <= 1e-9 && jump.hi - jump.lo <= 1e-10);
        assert!(report.interior().all(|c| c.kind != CrossingKind::StableDowncrossing));
    }

    #[test]
    fn fixed_points_identity_is_degenerate() {
        let report = find_fixed_points(&UrnFunction::identity(), 1000, 1e-10).unwrap();
        assert!(report.degenerate_identity);
    }

    #[test]
    fn fixed_points_stable_crossing() {
        // f(x) = 0.3 + 0.4x crosses the diagonal downward at 0.5
        let f = UrnFunction::custom("affine", |x| 0.3 + 0.4 * x);
        let report = find_fixed_points(&f, 997, 1e-10).unwrap();
        let c: Vec<_> = report.interior().collect();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].kind, CrossingKind::StableDowncrossing);
        assert!((c[0].x - 0.5).abs() < 1e-9);
    }

    #[test]
    fn simulate_urn_deterministic_paths() {
        let one = UrnFunction::constant(1.0).unwrap();
        let tr = simulate_urn(&one, UrnState::default(), 5, 7).unwrap();
        let expect = [1.0 / 2.0, 2.0 / 3.0, 3.0 / 4.0, 4.0 / 5.0, 5.0 / 6.0, 6.0 / 7.0];
        assert_eq!(tr.x_path(), expect);
        assert_eq!(tr.steps[0].t, 3);
        let zero = UrnFunction::constant(0.0).unwrap();
        let tr = simulate_urn(&zero, UrnState::default(), 5, 7).unwrap();
        let path = tr.x_path();
        for (i, x) in path.iter().enumerate() {
            close(*x, 1.0 / (i as f64 + 2.0));
        }
        let f = pm(0.2, State::One);
        assert_eq!(
            simulate_urn(&f, UrnState::default(), 500, 99).unwrap(),
            simulate_urn(&f, UrnState::default(), 500, 99).unwrap()
        );
        assert!(simulate_urn(&f, UrnState::default(), 0, 1).is_err());
    }

    #[test]
    fn coupled_examples() {
        let f = pm(0.2, State::One);
        let c = coupled_simulate(&f, &f, UrnState::default(), 1000, 3).unwrap();
        assert_eq!(c.hi, c.lo);
        let one = UrnFunction::constant(1.0).unwrap();
        let zero = UrnFunction::constant(0.0).unwrap();
        let c = coupled_simulate(&one, &zero, UrnState::default(), 5, 3).unwrap();
        close(*c.x_hi().last().unwrap(), 6.0 / 7.0);
        close(*c.x_lo().last().unwrap(), 1.0 / 7.0);
        let err = coupled_simulate(&zero, &one, UrnState::default(), 5, 3).unwrap_err();
        assert!(matches!(err, Error::CouplingViolated { step: 1, .. }));
    }

    #[test]
    fn dominance_examples() {
        let f = pm(0.1, State::One);
        let d = verify_dominance(&f, &f, 99).unwrap();
        assert!(d.holds && !d.strict && d.worst_margin == 0.0);
        let hi = pm(0.3, State::One);
        assert!(verify_dominance(&hi, &f, 99).unwrap().strict);
        let d = verify_dominance(&f, &hi, 99).unwrap();
        assert!(!d.holds && d.witness_x > 0.0 && d.witness_x < 1.0);
        let c = coupled_simulate(&hi, &f, UrnState::default(), 10_000, 11).unwrap();
        assert!(c.hi.iter().zip(&c.lo).all(|(a, b)| a.k >= b.k));
    }

    #[test]
    fn urn_state_validation() {
        assert!(UrnState::new(0, 1).is_err());
        assert_eq!(UrnState::new(2, 3).unwrap().t(), 6);
    }

    #[test]
    fn plateaus_of_threshold_urn() {
        let model = BinarySymmetricModel::new(0.1).unwrap().to_model();
        let f = build_urn_function(&model, &PriorRule::DeGroot, &DecisionRule::BayesThreshold, State::Zero)
            .unwrap();
        let plateaus = find_plateaus(&f, 1000, 1e-12).unwrap();
        // ε = 0.1: private beliefs 0.4 and 0.6, so f jumps where x/(1−x) crosses 2/3 and 3/2
        assert_eq!(plateaus.len(), 3, "{plateaus:?}");
        assert!((plateaus[0].hi - 0.4).abs() < 1e-9 && plateaus[0].value == 0.0);
        assert!((plateaus[1].value - 0.4).abs() < 1e-12);
        assert!((plateaus[2].lo - 0.6).abs() < 1e-9 && plateaus[2].value == 1.0);
        let smooth = build_urn_function(&model, &PriorRule::DeGroot, &DecisionRule::ProbabilityMatching, State::One)
            .unwrap();
        assert!(find_plateaus(&smooth, 1000, 1e-12).unwrap().is_empty());
        assert_eq!(find_plateaus(&UrnFunction::constant(0.3).unwrap(), 10, 1e-9).unwrap().len(), 1);
    }
}
