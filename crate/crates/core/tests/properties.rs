use conehedge::fixtures::{random_model, random_rat, random_spec, random_theta, rng, tree_fixture};
use conehedge::market::{build_tree, simulate_paths};
use conehedge::portfolio::{k_to_theta, theta_to_k};
use conehedge::solvency::{
    decompose, dual_membership, dual_membership_by_generators, eps_membership, physical_cone, EpsCone,
};
use conehedge::superhedge::{backward_sets, is_upper, oracle_membership, root_contains};
use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::Rng;
use ratgeom::{contains_point, Rat};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decompose_reconstructs(seed in any::<u64>(), d in 2usize..=4) {
        let mut r = rng(seed);
        let spec = random_spec(d, &mut r);
        let alpha: Vec<Rat> = (0..d).map(|_| random_rat(&mut r, 0, 30, 7)).collect();
        let b = decompose(&spec, &alpha).unwrap();
        let mut back = vec![Rat::zero(); d];
        for (i, j) in spec.exchange.pairs() {
            prop_assert!(b[i][j] >= Rat::zero());
            for (k, g) in spec.exchange.generator(i, j).iter().enumerate() {
                back[k] += &b[i][j] * g;
            }
        }
        prop_assert_eq!(back, alpha);
    }

    #[test]
    fn dual_routes_agree(seed in any::<u64>(), d in 2usize..=3) {
        let mut r = rng(seed);
        let spec = random_spec(d, &mut r);
        let y: Vec<Rat> = (0..d).map(|k| if k == 0 { Rat::one() } else { random_rat(&mut r, 1, 40, 16) }).collect();
        let z: Vec<Rat> = (0..d).map(|_| random_rat(&mut r, -8, 24, 8)).collect();
        prop_assert_eq!(dual_membership(&spec, &y, &z).unwrap(), dual_membership_by_generators(&spec, &y, &z).unwrap());
    }

    #[test]
    fn eps_cone_grows_with_eps(seed in any::<u64>(), e1 in 0.001f64..0.5, extra in 0.0f64..0.5) {
        let mut r = rng(seed);
        let d = 2 + (seed % 2) as usize;
        let spec = random_spec(d, &mut r);
        let y: Vec<f64> = (0..d).map(|k| if k == 0 { 1.0 } else { r.random_range(0.5..2.0) }).collect();
        let small = EpsCone::new(&spec, &y, e1).unwrap();
        let large = EpsCone::new(&spec, &y, (e1 + extra).min(1.0)).unwrap();
        let yq: Vec<Rat> = y.iter().map(|v| ratgeom::rat_from_f64(*v).unwrap()).collect();
        let base = physical_cone(&spec, &yq).unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
            if eps_membership(&small, &x) {
                prop_assert!(eps_membership(&large, &x));
            }
            let xq: Vec<Rat> = x.iter().map(|v| ratgeom::rat_from_f64(*v).unwrap()).collect();
            if contains_point(&base, &xq).unwrap() {
                prop_assert!(eps_membership(&small, &x));
            }
        }
    }

    #[test]
    fn theta_k_round_trip(seed in any::<u64>(), d in 2usize..=4, steps in 1usize..=6) {
        let mut r = rng(seed);
        let spec = random_spec(d, &mut r);
        let theta = random_theta(d, steps, &mut r);
        let k = theta_to_k(&theta, &spec.exchange);
        prop_assert!(k.validate(&spec).is_ok());
        let back = k_to_theta(&k, &spec.exchange).unwrap();
        prop_assert_eq!(theta_to_k(&back, &spec.exchange), k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn tree_probabilities_and_determinism(seed in any::<u64>(), d in 2usize..=3, periods in 1usize..=3) {
        let mut r = rng(seed);
        let model = random_model(d, 1.0, &mut r);
        let a = build_tree(&model, periods).unwrap();
        let b = build_tree(&model, periods).unwrap();
        prop_assert_eq!(&a, &b);
        let total: Rat = a.leaves().iter().map(|&l| a.nodes[l].prob.clone()).sum();
        prop_assert_eq!(total, Rat::one());
        for n in &a.nodes {
            prop_assert!(n.price_exact.iter().all(|p| *p > Rat::zero()));
            let mass: Rat = n.children.iter().map(|&c| a.nodes[c].branch_prob.clone()).sum();
            prop_assert!(n.children.is_empty() || mass == Rat::one());
        }
    }

    #[test]
    fn paths_repeat_under_a_seed(seed in any::<u64>(), d in 2usize..=3) {
        let mut r = rng(seed);
        let model = random_model(d, 1.0, &mut r);
        let a = simulate_paths(&model, 20, 8, seed).unwrap();
        let b = simulate_paths(&model, 20, 8, seed).unwrap();
        for p in 0..20 {
            prop_assert_eq!(a.terminal(p), b.terminal(p));
            prop_assert_eq!(a.price(p, 0), model.s0());
        }
    }

    #[test]
    fn superhedging_sets_are_upper_and_match_oracle(seed in any::<u64>(), periods in 1usize..=2) {
        let f = tree_fixture(2, periods, seed).unwrap();
        let res = backward_sets(&f.tree, &f.spec, &f.claim).unwrap();
        for p in &res.sets {
            prop_assert!(is_upper(p).unwrap());
        }
        let mut r = rng(seed ^ 1);
        let v = res.root().vertices()[0].clone();
        for _ in 0..6 {
            let x: Vec<Rat> = v.iter().map(|a| a + random_rat(&mut r, -4, 4, 16)).collect();
            prop_assert_eq!(root_contains(&res, &x).unwrap(), oracle_membership(&f.tree, &f.spec, &f.claim, &x).unwrap());
        }
    }
}
