//! Properties of urn functions, the agent engine and the Monte Carlo helpers.

use nll_core::analysis::{gamblers_ruin_escape, wilson, WalkSpec};
use nll_core::sim::{DrawDiscipline, NStateConditioning};
use nll_core::urn::{belief_integral_urn, DriftClass};
use nll_core::verify::log_odds_shift_nonnegative_exact;
use nll_core::{
    build_urn_function, compute_block_length, coupled_simulate, drift_sign_scan, run_trial, run_trial_nstate,
    simulate_urn, verify_dominance, AgentProcessConfig, Condition, Conditioning, DecisionRule, NStateModel,
    PriorRule, SignalModel, State, UrnFunction, UrnState,
};
use proptest::prelude::*;

fn model_strategy() -> impl Strategy<Value = SignalModel> {
    (2usize..5)
        .prop_flat_map(|n| {
            (
                0.1f64..0.9,
                prop::collection::vec(0.05f64..1.0, n),
                prop::collection::vec(0.05f64..1.0, n),
            )
        })
        .prop_filter_map("uninformative or invalid", |(mu, a, b)| {
            let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
            let f0: Vec<f64> = a.iter().map(|x| x / sa).collect();
            let f1: Vec<f64> = b.iter().map(|x| x / sb).collect();
            let distance: f64 = f0.iter().zip(&f1).map(|(x, y)| (x - y).abs()).sum();
            if distance < 0.1 {
                return None;
            }
            SignalModel::from_vectors(mu, f0, f1).ok()
        })
}

fn matching(model: &SignalModel, state: State) -> UrnFunction {
    build_urn_function(model, &PriorRule::DeGroot, &DecisionRule::ProbabilityMatching, state).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matching_drifts_toward_the_truth(model in model_strategy()) {
        prop_assert_eq!(drift_sign_scan(&matching(&model, State::One), 99).unwrap().class, DriftClass::AllAbove);
        prop_assert_eq!(drift_sign_scan(&matching(&model, State::Zero), 99).unwrap().class, DriftClass::AllBelow);
    }

    #[test]
    fn matching_has_unit_slope_at_one(model in model_strategy()) {
        let f = matching(&model, State::One);
        let x = 1.0 - 1e-6;
        let ratio = (1.0 - f.eval(x)) / (1.0 - x);
        // first-order remainder: (1 − x) Σ f1 (1 − p)|1 − 2p| / p²
        let curvature: f64 = (0..model.len())
            .map(|s| {
                let p = model.private_belief_at(s).unwrap();
                model.f1()[s] * (1.0 - p) * (1.0 - 2.0 * p).abs() / (p * p)
            })
            .sum();
        prop_assert!((ratio - 1.0).abs() <= 1e-6 * (1.0 + curvature) + 1e-8, "ratio {ratio}");
    }

    #[test]
    fn urn_function_is_the_belief_integral(model in model_strategy()) {
        let model = model.with_mu(0.5).unwrap();
        let f = matching(&model, State::One);
        let beliefs = model.belief_distribution(0.5, Condition::Unconditional).unwrap();
        for i in 1..=99 {
            let x = i as f64 / 100.0;
            prop_assert!((f.eval(x) - belief_integral_urn(&beliefs, x)).abs() < 1e-12);
        }
    }

    #[test]
    fn dominance_implies_pathwise_order(
        hi in model_strategy(),
        eps in 0.01f64..0.05,
        seed in any::<u64>(),
    ) {
        let lo = nll_core::BinarySymmetricModel::new(eps).unwrap().to_model();
        let f_hi = matching(&hi.with_mu(0.5).unwrap(), State::One);
        let f_lo = matching(&lo, State::One);
        prop_assume!(verify_dominance(&f_hi, &f_lo, 99).unwrap().holds);
        let path = coupled_simulate(&f_hi, &f_lo, UrnState::default(), 2000, seed).unwrap();
        prop_assert!(path.x_hi().iter().zip(path.x_lo()).all(|(h, l)| *h >= l));
    }

    #[test]
    fn urn_discipline_matches_simulate_urn(model in model_strategy(), seed in any::<u64>(), one in any::<bool>()) {
        let state = if one { State::One } else { State::Zero };
        let cfg = AgentProcessConfig::new(model.clone(), PriorRule::DeGroot, DecisionRule::ProbabilityMatching, 500)
            .with_state(state)
            .with_discipline(DrawDiscipline::Urn);
        let urn = simulate_urn(&matching(&model, state), UrnState::default(), 500, seed).unwrap();
        prop_assert_eq!(run_trial(&cfg, seed).unwrap().actions(), urn.increments());
    }

    #[test]
    fn two_state_engine_reproduces_binary_engine(model in model_strategy(), seed in any::<u64>()) {
        let cfg = AgentProcessConfig::new(model.clone(), PriorRule::DeGroot, DecisionRule::ProbabilityMatching, 500)
            .with_conditioning(Conditioning::Draw);
        let binary = run_trial(&cfg, seed).unwrap();
        let nstate = run_trial_nstate(&NStateModel::from_binary(&model), 500, seed, NStateConditioning::Draw).unwrap();
        prop_assert_eq!(binary.omega.index(), nstate.omega);
        let actions: Vec<usize> = binary.actions().iter().map(|&a| a as usize).collect();
        prop_assert_eq!(actions, nstate.actions);
    }

    #[test]
    fn trials_are_deterministic(model in model_strategy(), seed in any::<u64>()) {
        let cfg = AgentProcessConfig::new(model, PriorRule::DeGroot, DecisionRule::BayesThreshold, 300);
        prop_assert_eq!(run_trial(&cfg, seed).unwrap(), run_trial(&cfg, seed).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn log_odds_never_fall_along_block_paths(
        q in 0.51f64..0.99,
        r in 0.01f64..0.49,
        dm in 0u64..20,
        extra in 0u64..20,
    ) {
        let l = compute_block_length(q, r).unwrap();
        let dk = l * dm + extra;
        prop_assert!(log_odds_shift_nonnegative_exact(q, r, dm, dk), "q {q} r {r} l {l} dm {dm} dk {dk}");
    }

    #[test]
    fn escape_probability_closed_form(p in 0.5001f64..0.999, z in 1u64..50) {
        let h = gamblers_ruin_escape(WalkSpec::new(p, z).unwrap());
        let expected = 1.0 - ((1.0 - p) / p).powi(z as i32);
        prop_assert!((h - expected).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&h));
    }

    #[test]
    fn wilson_interval_brackets_the_estimate(n in 1u64..10_000, frac in 0.0f64..=1.0, conf in 0.5f64..0.999) {
        let s = (frac * n as f64).round() as u64;
        let e = wilson(s, n, conf).unwrap();
        prop_assert!(0.0 <= e.ci_low && e.ci_low <= e.estimate);
        prop_assert!(e.estimate <= e.ci_high && e.ci_high <= 1.0);
        let wider = wilson(s, n, (conf + 1.0) / 2.0).unwrap();
        prop_assert!(wider.ci_low <= e.ci_low && wider.ci_high >= e.ci_high);
    }
}
