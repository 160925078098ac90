use proptest::prelude::*;
use qnd_core::gaussian_prep::{violation_scan_with, ProbePairPreparation};
use qnd_core::instruments::{born_probability, build_instrument, random_state, random_unitary, ReadoutFamily};
use qnd_core::moments::{
    canonicalize, check_relations, joint_noise_disturbance, joint_variances, noise_disturbance, validate_scenario, Couplings,
    CrossCovariances, Ordering, ProbeMoments, Relation, Scenario, SystemMoments, Variable,
};
use qnd_core::oracle::ProbabilityTable;
use qnd_core::sampler::{sample_outcomes_with, Distribution};
use qnd_core::Exec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXACT: f64 = 1e-12;

fn system() -> impl Strategy<Value = SystemMoments> {
    (0.1f64..3.0, 1.0f64..4.0).prop_map(|(sx, f)| SystemMoments::new(sx, f * 0.5 / sx))
}

fn probe(label: Variable) -> impl Strategy<Value = ProbeMoments> {
    (0.05f64..3.0, 1.0f64..4.0).prop_map(move |(d, f)| ProbeMoments::new(label, d, f * 0.5 / d))
}

fn sequential() -> impl Strategy<Value = Ordering> {
    prop_oneof![Just(Ordering::XthenK), Just(Ordering::KthenX)]
}

fn uncorrelated(ordering: impl Strategy<Value = Ordering>) -> impl Strategy<Value = Scenario> {
    (system(), probe(Variable::X), probe(Variable::K), ordering)
        .prop_map(|(s, px, pk, o)| Scenario::canonical(s, px, pk, CrossCovariances::default(), o))
}

/// Correlated probes realized by the Gaussian preparation.
fn prepared(ordering: Ordering) -> impl Strategy<Value = (ProbePairPreparation, Scenario)> {
    (system(), 0.1f64..3.0, 0.1f64..3.0, -0.99f64..0.99).prop_map(move |(s, dk, dx, r)| {
        let p = ProbePairPreparation::new(dk, dx, r).unwrap();
        (p, p.to_scenario(s, (0.0, 0.0), Couplings::unit(ordering)).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn uncorrelated_probes_obey_heisenberg(s in uncorrelated(sequential())) {
        prop_assert!(validate_scenario(&s).passed());
        let nd = noise_disturbance(&s).unwrap();
        prop_assert!(nd.eta2_signed >= 0.0);
        prop_assert!(nd.epsilon() * nd.eta2_signed.sqrt() >= 0.5 - EXACT);
    }

    #[test]
    fn joint_relations_hold_with_correlations((_, s) in prepared(Ordering::Joint)) {
        prop_assert!(validate_scenario(&s).passed());
        let [x, k] = joint_noise_disturbance(&s).unwrap();
        prop_assert!(x.epsilon2 * k.epsilon2 >= 0.25 - EXACT);
        let v = joint_variances(&s).unwrap();
        prop_assert!(v.delta2_first * v.delta2_second_given_first >= 1.0 - EXACT);
        prop_assert_eq!(check_relations(&s).unwrap().get(Relation::UProduct).status, qnd_core::moments::Status::Holds);
    }

    #[test]
    fn exchange_maps_noise_onto_noise(s in uncorrelated(sequential()), kappa in -1.0f64..1.0, xi in -1.0f64..1.0) {
        let mut s = s;
        s.cross = CrossCovariances::new(kappa * s.probe_x.delta_tilde * s.probe_k.delta, xi * s.probe_k.delta_tilde * s.probe_x.delta);
        let a = noise_disturbance(&s).unwrap();
        let b = noise_disturbance(&s.exchanged()).unwrap();
        prop_assert_eq!(a.first.other(), b.first);
        prop_assert!((a.epsilon2 - b.epsilon2).abs() < EXACT);
        prop_assert!((a.eta2_signed - b.eta2_signed).abs() < EXACT);
        prop_assert_eq!(s.exchanged().exchanged(), s);
    }

    #[test]
    fn validation_survives_canonicalization(s in uncorrelated(Just(Ordering::XthenK)), lx in 0.2f64..5.0, lk in 0.2f64..5.0, kappa in -1.0f64..1.0) {
        let mut physical = s;
        physical.canonical = false;
        physical.couplings = Couplings::new(lx, lk, Ordering::XthenK);
        physical.cross.kappa = kappa * physical.probe_x.delta_tilde * physical.probe_k.delta;
        let c = canonicalize(&physical).unwrap();
        prop_assert_eq!(validate_scenario(&physical).passed(), validate_scenario(&c).passed());
        // κ/(δ̃_X δ_K) is coupling independent
        let rho = |s: &Scenario| s.cross.kappa / (s.probe_x.delta_tilde * s.probe_k.delta);
        prop_assert!((rho(&physical) - rho(&c)).abs() < EXACT);
    }

    #[test]
    fn violation_product_matches_moments((p, s) in prepared(Ordering::XthenK)) {
        let nd = noise_disturbance(&s).unwrap();
        let product = nd.epsilon2 * nd.eta2_signed;
        prop_assert!((p.violation_product() - product).abs() < 1e-9 * (1.0 + product.abs()));
    }

    #[test]
    fn born_probabilities_are_normalized(seed in any::<u64>(), dp in 2usize..4, ds in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary(dp * ds, &mut rng);
        let det = random_state(dp, &mut rng);
        let sys = random_state(ds, &mut rng);
        let f = ReadoutFamily::projective(dp);
        let p = born_probability(&f, &u, &det, &sys).unwrap();
        prop_assert!(p.iter().all(|&v| v >= -EXACT));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < EXACT);
        let (inst, _) = build_instrument(&f, &u, &det).unwrap();
        prop_assert!(inst.check_axioms(std::slice::from_ref(&sys)).passed());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sampling_is_policy_independent(seed in any::<u64>(), n in 1usize..3000) {
        let values: Vec<f64> = (0..9).map(|i| i as f64 * 0.5 - 2.0).collect();
        let mut probs = vec![1.0; 9];
        probs[4] = 3.0;
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let table = ProbabilityTable::new(values, probs, 0.5).unwrap();
        let dist = Distribution::Single(Variable::X, &table);
        let a = sample_outcomes_with(dist, n, seed, "p", Exec::Sequential).unwrap();
        let b = sample_outcomes_with(dist, n, seed, "p", Exec::Parallel).unwrap();
        prop_assert_eq!(&a.mu_x, &b.mu_x);
        prop_assert!(a.mu_x.iter().all(|&m| (-2.25..=2.25).contains(&m)));
    }

    #[test]
    fn scan_is_policy_independent(lo in 0.2f64..1.0, span in 0.1f64..2.0) {
        let a = violation_scan_with((lo, lo + span), (-0.9, 0.9), (5, 7), Exec::Sequential).unwrap();
        let b = violation_scan_with((lo, lo + span), (-0.9, 0.9), (5, 7), Exec::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }
}
