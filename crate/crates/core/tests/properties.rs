use loccforge::cone::{member, nontrivial_intersection, Cone};
use loccforge::hermitian::{proportional, tensor};
use loccforge::nogo::{corollary1_check, theorem1_check};
use loccforge::random::{self, random_tree};
use loccforge::synth::{synthesize, RunConfig, Verdict};
use loccforge::tree::{compact_same_party, eliminate_coin_flips, extract_measurement, prune_unitary_rounds};
use loccforge::Tolerances;
use proptest::prelude::*;

fn tol() -> Tolerances {
    Tolerances::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vectorize_round_trips(seed in any::<u64>(), d in 1usize..4) {
        let h = random::any_psd(&mut random::rng(seed), d);
        let back = h.vectorize().devectorize().unwrap();
        prop_assert!(back.distance(&h) < 1e-12);
        let n: f64 = h.vectorize().coords.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((n - h.norm()).abs() < 1e-10);
    }

    #[test]
    fn tensor_trace_is_multiplicative(seed in any::<u64>()) {
        let mut r = random::rng(seed);
        let a = random::any_psd(&mut r, 2);
        let b = random::any_psd(&mut r, 3);
        let t = tensor(&[a.clone(), b.clone()]).unwrap();
        prop_assert!((t.trace() - a.trace() * b.trace()).abs() < 1e-9 * (1.0 + t.trace()));
    }

    #[test]
    fn scaled_operator_is_proportional(seed in any::<u64>(), s in 0.01f64..100.0) {
        let h = random::any_psd(&mut random::rng(seed), 3);
        let l = proportional(&h.scale(s), &h, 1e-10).unwrap().unwrap();
        prop_assert!((l - s).abs() < 1e-8 * s);
    }

    #[test]
    fn combinations_are_members(seed in any::<u64>(), n in 1usize..5) {
        let mut r = random::rng(seed);
        let gens = random::cone_generators(&mut r, 2, n);
        let cone = Cone::new(gens, &tol()).unwrap();
        let coeffs: Vec<f64> = (0..n).map(|i| 0.1 + i as f64 * 0.3).collect();
        let x = cone.combination(&coeffs);
        let w = member(&x, &cone, &tol()).unwrap();
        prop_assert!(w.is_some());
        let back = cone.combination(&w.unwrap());
        prop_assert!(back.distance(&x) <= 1e-8 * (1.0 + x.norm()));
    }

    #[test]
    fn intersection_is_symmetric(seed in any::<u64>()) {
        let (a, b) = random::cone_pair(&mut random::rng(seed), 4);
        let ca = Cone::new(a, &tol()).unwrap();
        let cb = Cone::new(b, &tol()).unwrap();
        let ab = nontrivial_intersection(&ca, &cb, &tol()).unwrap().is_some();
        let ba = nontrivial_intersection(&cb, &ca, &tol()).unwrap().is_some();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn random_tree_child_sums_hold(seed in any::<u64>()) {
        let t = random_tree(&mut random::rng(seed), 3, 3);
        prop_assert!(t.tree.validate_eq3(&t.parts, &t.assignment, false, &tol()).unwrap());
        // a perturbed assignment breaks some child sum unless the tree is a bare chain
        if t.tree.num_nodes() > t.tree.num_parties() && !t.assignment.is_empty() {
            let mut a = t.assignment.clone();
            let last = a.len() - 1;
            a[last] *= 1.5;
            prop_assert!(!t.tree.validate_eq3(&t.parts, &a, false, &tol()).unwrap());
        }
    }

    #[test]
    fn passes_preserve_the_measurement(seed in any::<u64>()) {
        let t = random_tree(&mut random::rng(seed), 3, 3);
        let base = extract_measurement(&t.tree, &t.parts, &t.assignment, &tol()).unwrap();

        let pruned = prune_unitary_rounds(&t.tree);
        let ext = extract_measurement(&pruned, &t.parts, &t.assignment, &tol()).unwrap();
        prop_assert!(base.equivalent(&ext, 1e-8));
        prop_assert_eq!(prune_unitary_rounds(&pruned), pruned.clone());

        let compact = compact_same_party(&t.tree);
        let ext = extract_measurement(&compact, &t.parts, &t.assignment, &tol()).unwrap();
        prop_assert!(base.equivalent(&ext, 1e-8));
        prop_assert_eq!(compact_same_party(&compact), compact.clone());

        let (flat, a) = eliminate_coin_flips(&t.tree, &t.parts, &t.assignment, &tol()).unwrap();
        prop_assert!(flat.validate_eq3(&t.parts, &a, false, &tol()).unwrap());
        let ext = extract_measurement(&flat, &t.parts, &a, &tol()).unwrap();
        prop_assert!(base.equivalent(&ext, 1e-8));
        let (again, a2) = eliminate_coin_flips(&flat, &t.parts, &a, &tol()).unwrap();
        prop_assert_eq!(again, flat);
        prop_assert_eq!(a2, a);
    }

    #[test]
    fn canonical_key_survives_rebuild(seed in any::<u64>()) {
        let t = random_tree(&mut random::rng(seed), 3, 3);
        let pruned_twice = prune_unitary_rounds(&prune_unitary_rounds(&t.tree));
        prop_assert_eq!(prune_unitary_rounds(&t.tree).canonical_key(), pruned_twice.canonical_key());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn witness_family_is_not_implementable(seed in any::<u64>()) {
        let m = random::witness_measurement(&mut random::rng(seed));
        let c = corollary1_check(&m, &tol()).unwrap();
        prop_assert!(c.is_some());
        prop_assert!(theorem1_check(&m, 16, &tol()).unwrap().witness().is_some());
        let cfg = RunConfig { nogo_precheck: false, ..RunConfig::with_rounds(3) };
        let r = synthesize(&m, &cfg).unwrap();
        prop_assert!(!matches!(r.verdict, Verdict::Protocol(_)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn found_protocols_are_sound(seed in any::<u64>()) {
        let m = random::one_way_measurement(&mut random::rng(seed));
        let r = synthesize(&m, &RunConfig::with_rounds(2)).unwrap();
        let Verdict::Protocol(p) = &r.verdict else {
            return Err(TestCaseError::fail(format!("{:?}", r.verdict)));
        };
        let parts = loccforge::tree::LocalParts::from_measurement(&m);
        prop_assert!(p.tree.validate_eq3(&parts, &p.assignment, true, &tol()).unwrap());
        let ext = extract_measurement(&p.tree, &parts, &p.assignment, &tol()).unwrap();
        let w = ext.weights_for(&m, &tol()).unwrap();
        prop_assert!(w.iter().all(|x| *x > 0.0));
        prop_assert!(ext.completeness_residual().unwrap() <= 1e-8);
        prop_assert_eq!(p.tree.first_measurer(), Some(0));
    }

    #[test]
    fn synthesis_is_deterministic(seed in any::<u64>()) {
        let m = random::one_way_measurement(&mut random::rng(seed));
        let a = synthesize(&m, &RunConfig::with_rounds(2)).unwrap();
        let b = synthesize(&m, &RunConfig::with_rounds(2)).unwrap();
        prop_assert_eq!(a, b);
    }
}
