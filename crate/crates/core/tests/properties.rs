use proptest::prelude::*;

use pdq_core::dynamics::Scenario;
use pdq_core::mode_chain::ModeChain;
use pdq_core::routing::{check_admissible, check_monotone, standard_samples, PolicySpec};
use pdq_core::scenario_file::{parse_scenario, serialize_scenario, ScenarioFile};
use pdq_core::stability::{
    classify, limiting_inflows, necessary_condition, two_mode_mode_responsive_iff, StabilityClass,
};

const DEMAND: f64 = 1.0;

fn chain(m: usize) -> impl Strategy<Value = ModeChain> {
    prop::collection::vec(prop::collection::vec(0.1f64..3.0, m), m).prop_map(move |mut rows| {
        for (i, row) in rows.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        ModeChain::from_rows(&rows).unwrap()
    })
}

fn simplex_row(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        let total: f64 = w.iter().sum();
        w.iter().map(|x| DEMAND * x / total).collect()
    })
}

fn mode_responsive(m: usize, n: usize) -> impl Strategy<Value = PolicySpec> {
    prop::collection::vec(simplex_row(n), m).prop_map(|psi| PolicySpec::ModeResponsive { psi })
}

fn pwa() -> impl Strategy<Value = PolicySpec> {
    (-1.0f64..2.0, 0.0f64..3.0, 0.0f64..3.0)
        .prop_map(|(t, a1, a2)| PolicySpec::pwa_two_server(DEMAND, t, a1, a2))
}

fn logit(n: usize) -> impl Strategy<Value = PolicySpec> {
    (
        prop::collection::vec(-2.0f64..2.0, n),
        prop::collection::vec(0.0f64..3.0, n),
    )
        .prop_map(|(gamma, beta)| PolicySpec::Logit { gamma, beta })
}

fn two_server_policy(m: usize) -> impl Strategy<Value = PolicySpec> {
    prop_oneof![mode_responsive(m, 2), pwa(), logit(2)]
}

fn scenario(policy: impl Fn(usize) -> BoxedStrategy<PolicySpec>) -> impl Strategy<Value = Scenario> {
    (2usize..=3)
        .prop_flat_map(move |m| {
            (
                chain(m),
                prop::collection::vec(prop::collection::vec(0.05f64..1.0, 2), m),
                policy(m),
            )
        })
        .prop_map(|(chain, sat, policy)| Scenario::new(DEMAND, sat, chain, policy).unwrap())
}

fn queue(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..30.0], n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn builtin_policies_are_admissible(policy in two_server_policy(3)) {
        let report = check_admissible(&policy, DEMAND, 3, &standard_samples(2));
        prop_assert!(report.is_admissible(), "{:?}", report.violations.first());
    }

    #[test]
    fn builtin_policies_are_monotone(
        policy in two_server_policy(3),
        q in queue(2),
        k in 0usize..2,
        dq in 0.01f64..10.0,
    ) {
        let mut hi = q.clone();
        hi[k] += dq;
        let report = check_monotone(&policy, DEMAND, 3, &[(q, hi)]);
        prop_assert!(report.violations.is_empty(), "{:?}", report.violations);
    }

    #[test]
    fn own_queue_limit_bounds_inflow_from_below(policy in two_server_policy(2), q in queue(2)) {
        let lim = policy.limiting_inflows(DEMAND, 2, 2).unwrap();
        for i in 0..2 {
            let phi = policy.evaluate(DEMAND, i, &q).unwrap();
            for k in 0..2 {
                prop_assert!(phi[k] >= lim.get(i, k, k) - 1e-9);
            }
        }
    }

    #[test]
    fn analytic_and_numeric_limits_agree(policy in two_server_policy(2)) {
        let analytic = policy.limiting_inflows(DEMAND, 2, 2).unwrap();
        let numeric = policy.limiting_inflows_numeric(DEMAND, 2, 2, 1e3, 1e-10).unwrap();
        prop_assert!(analytic.max_abs_diff(&numeric) < 1e-6);
    }

    #[test]
    fn steady_state_is_a_stationary_distribution(c in (2usize..=5).prop_flat_map(chain)) {
        let p = c.steady_state().unwrap();
        let p = p.probabilities();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|x| *x > 0.0));
        let q = c.generator();
        for j in 0..c.m() {
            let flux: f64 = (0..c.m()).map(|i| p[i] * q[(i, j)]).sum();
            prop_assert!(flux.abs() < 1e-10);
        }
    }

    #[test]
    fn verdicts_nest_and_certificates_verify(scn in scenario(|_| pwa().boxed())) {
        let v = classify(&scn).unwrap();
        let necessary = necessary_condition(&scn).unwrap();
        prop_assert_eq!(v.class == StabilityClass::Unstable, !necessary.holds);
        if let Some(cert) = &v.certificate {
            prop_assert_eq!(v.class, StabilityClass::Stable);
            prop_assert!(cert.verify(&scn).unwrap().is_valid());
        }
    }

    #[test]
    fn scenario_text_round_trips(
        scn in scenario(|m| prop_oneof![mode_responsive(m, 2), pwa(), logit(2)].boxed()),
    ) {
        let file = ScenarioFile { scenario: scn, simulation: None, scan: None };
        let text = serialize_scenario(&file).unwrap();
        let back = parse_scenario(&text).unwrap();
        prop_assert_eq!(back.scenario.policy(), file.scenario.policy());
        prop_assert_eq!(back.scenario.saturation_rows(), file.scenario.saturation_rows());
        prop_assert_eq!(back.scenario.chain().rows(), file.scenario.chain().rows());
        prop_assert_eq!(serialize_scenario(&back).unwrap(), text);
    }

    #[test]
    fn two_mode_band_agrees_with_classifier(
        c in chain(2),
        sat in prop::collection::vec(prop::collection::vec(0.05f64..1.0, 2), 2),
        policy in mode_responsive(2, 2),
    ) {
        let scn = Scenario::new(DEMAND, sat, c, policy).unwrap();
        let margins = necessary_condition(&scn).unwrap().margins;
        prop_assume!(margins.iter().all(|x| x.abs() > 2e-9));
        let exact = two_mode_mode_responsive_iff(&scn).unwrap();
        let class = classify(&scn).unwrap().class;
        prop_assert_ne!(class, StabilityClass::Unknown);
        prop_assert_eq!(exact, class == StabilityClass::Stable);
    }

    #[test]
    fn analytic_limits_are_reported_for_builtins(scn in scenario(|m| two_server_policy(m).boxed())) {
        let (_, source) = limiting_inflows(&scn).unwrap();
        prop_assert_eq!(source, pdq_core::stability::LimitsSource::Analytic);
    }
}
