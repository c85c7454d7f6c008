use proptest::prelude::*;
use proptest::strategy::ValueTree;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratgeom::{
    contains_point_by_generators, dd_convert, intersect, minkowski_sum, rat, set_equal, HRep, Halfspace, LinearProgram,
    Polyhedron, Rat, Relation, Representation, VRep,
};

fn small_rat() -> impl Strategy<Value = Rat> {
    (-4i64..=4, 1i64..=3).prop_map(|(n, d)| rat(n, d))
}

fn vector(dim: usize) -> impl Strategy<Value = Vec<Rat>> {
    proptest::collection::vec(small_rat(), dim)
}

fn nonzero_vector(dim: usize) -> impl Strategy<Value = Vec<Rat>> {
    vector(dim).prop_filter("nonzero", |v| v.iter().any(|x| *x != rat(0, 1)))
}

fn vrep(max_dim: usize) -> impl Strategy<Value = VRep> {
    (1..=max_dim).prop_flat_map(|d| {
        (
            proptest::collection::vec(vector(d), 1..=4),
            proptest::collection::vec(nonzero_vector(d), 0..=4),
        )
            .prop_map(move |(v, r)| VRep::new(d, v, r))
    })
}

fn hrep(max_dim: usize) -> impl Strategy<Value = HRep> {
    (1..=max_dim).prop_flat_map(|d| {
        proptest::collection::vec((nonzero_vector(d), small_rat()), 1..=7)
            .prop_map(move |rows| HRep::new(d, rows.into_iter().map(|(n, o)| Halfspace::new(n, o)).collect()))
    })
}

fn same_dim_pair(max_dim: usize) -> impl Strategy<Value = (VRep, VRep, VRep)> {
    (1..=max_dim).prop_flat_map(|d| {
        let one = move || {
            (
                proptest::collection::vec(vector(d), 1..=4),
                proptest::collection::vec(nonzero_vector(d), 0..=4),
            )
                .prop_map(move |(v, r)| VRep::new(d, v, r))
        };
        (one(), one(), one())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn round_trip_from_v(v in vrep(4)) {
        let p = Polyhedron::from_vrep(&v).unwrap();
        let there = dd_convert(&Representation::V(v.clone())).unwrap();
        let back = dd_convert(&there).unwrap();
        let q = back.to_polyhedron().unwrap();
        prop_assert!(set_equal(&p, &q).unwrap());
        // Every input generator lies in the converted set.
        for x in &v.vertices {
            prop_assert!(q.contains_point(x).unwrap());
        }
        for r in &v.rays {
            prop_assert!(q.contains_ray(r).unwrap());
        }
    }

    #[test]
    fn round_trip_from_h(h in hrep(4)) {
        let p = Polyhedron::from_hrep(&h).unwrap();
        if p.is_empty() {
            return Ok(());
        }
        let there = dd_convert(&Representation::H(h.clone())).unwrap();
        let back = dd_convert(&there).unwrap();
        let q = back.to_polyhedron().unwrap();
        prop_assert!(set_equal(&p, &q).unwrap());
        for x in p.vertices() {
            prop_assert!(h.rows.iter().all(|r| r.holds(x)));
        }
    }

    #[test]
    fn minkowski_commutes_and_associates((a, b, c) in same_dim_pair(3)) {
        let a = Polyhedron::from_vrep(&a).unwrap();
        let b = Polyhedron::from_vrep(&b).unwrap();
        let c = Polyhedron::from_vrep(&c).unwrap();
        let ab = minkowski_sum(&a, &b).unwrap();
        prop_assert!(set_equal(&ab, &minkowski_sum(&b, &a).unwrap()).unwrap());
        let left = minkowski_sum(&ab, &c).unwrap();
        let right = minkowski_sum(&a, &minkowski_sum(&b, &c).unwrap()).unwrap();
        prop_assert!(set_equal(&left, &right).unwrap());
    }

    #[test]
    fn intersect_idempotent_and_zero_is_neutral(v in vrep(3)) {
        let p = Polyhedron::from_vrep(&v).unwrap();
        prop_assert!(set_equal(&intersect(&p, &p).unwrap(), &p).unwrap());
        let zero = Polyhedron::point(&vec![rat(0, 1); v.dim]).unwrap();
        prop_assert!(set_equal(&minkowski_sum(&p, &zero).unwrap(), &p).unwrap());
    }
}

/// Samples points near the set: a generator combination, perturbed half the
/// time, so both outcomes show up.
fn sample_points(p: &Polyhedron, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<Rat>> {
    let d = p.dim();
    (0..n)
        .map(|_| {
            let mut x = p.vertices()[rng.random_range(0..p.vertices().len())].clone();
            for r in p.rays() {
                if rng.random_bool(0.5) {
                    let t = rat(rng.random_range(0..4), rng.random_range(1..4));
                    for (xi, ri) in x.iter_mut().zip(r) {
                        *xi += &t * ri;
                    }
                }
            }
            if rng.random_bool(0.5) {
                let k = rng.random_range(0..d);
                x[k] += rat(rng.random_range(-3..=3), rng.random_range(1..5));
            }
            x
        })
        .collect()
}

#[test]
fn contains_point_matches_lp_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let mut inside = 0usize;
    let mut outside = 0usize;
    for _ in 0..25 {
        let v = vrep(3).new_tree(&mut runner).unwrap().current();
        let p = Polyhedron::from_vrep(&v).unwrap();
        for x in sample_points(&p, 200, &mut rng) {
            let by_h = p.contains_point(&x).unwrap();
            // The oracle sees the raw, possibly redundant generators.
            let by_lp = contains_point_by_generators(&v, &x).unwrap();
            assert_eq!(by_h, by_lp, "disagreement at {x:?} for {v:?}");
            if by_h {
                inside += 1;
            } else {
                outside += 1;
            }
        }
    }
    assert!(inside > 100 && outside > 100, "inside {inside}, outside {outside}");
}

/// (A ⊕ C) ∩ (B ⊕ C) ⊇ (A ∩ B) ⊕ C always, but equality fails in general.
#[test]
fn sum_does_not_distribute_over_intersection() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let mut counterexample = None;
    for _ in 0..200 {
        let (a, b, c) = same_dim_pair(2).new_tree(&mut runner).unwrap().current();
        let a = Polyhedron::from_vrep(&a).unwrap();
        let b = Polyhedron::from_vrep(&b).unwrap();
        let c = Polyhedron::cone(c.dim, &c.rays).unwrap();
        let lhs = intersect(&minkowski_sum(&a, &c).unwrap(), &minkowski_sum(&b, &c).unwrap()).unwrap();
        let rhs = minkowski_sum(&intersect(&a, &b).unwrap(), &c).unwrap();
        assert!(ratgeom::is_subset(&rhs, &lhs).unwrap());
        if !set_equal(&lhs, &rhs).unwrap() && counterexample.is_none() {
            counterexample = Some((a, b, c));
        }
    }
    let (a, b, c) = counterexample.expect("random search should find a strict inclusion");
    eprintln!("counterexample: A={:?} B={:?} C={:?}", a.vertices(), b.vertices(), c.rays());
}

type Row = (Vec<Rat>, Relation, Rat);

fn lp_rows(vars: usize) -> impl Strategy<Value = Vec<Row>> {
    let rel = prop_oneof![Just(Relation::Le), Just(Relation::Ge), Just(Relation::Eq)];
    proptest::collection::vec((vector(vars), rel, small_rat()), 1..=5)
}

fn lp_case() -> impl Strategy<Value = (usize, Vec<bool>, Vec<Row>)> {
    (1usize..=4).prop_flat_map(|n| (Just(n), proptest::collection::vec(any::<bool>(), n), lp_rows(n)))
}

fn satisfies(x: &[Rat], free: &[bool], rows: &[Row]) -> bool {
    let zero = rat(0, 1);
    x.iter().zip(free).all(|(v, f)| *f || *v >= zero)
        && rows.iter().all(|(a, r, b)| {
            let lhs: Rat = a.iter().zip(x).map(|(p, q)| p * q).sum();
            match r {
                Relation::Le => lhs <= *b,
                Relation::Ge => lhs >= *b,
                Relation::Eq => lhs == *b,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    // The float-guided certificate and the exact simplex are separate
    // routes to the same answer.
    #[test]
    fn feasibility_routes_agree((n, free, rows) in lp_case()) {
        let mut lp = LinearProgram::new(n);
        for (j, f) in free.iter().enumerate() {
            if *f {
                lp.set_free(j);
            }
        }
        for (a, r, b) in &rows {
            lp.add_constraint(a.iter().cloned().enumerate().filter(|(_, v)| *v != rat(0, 1)).collect(), *r, b.clone());
        }
        let simplex = lp.solve().is_feasible();
        prop_assert_eq!(lp.is_feasible(), simplex);
        match lp.feasible_point() {
            Some(x) => prop_assert!(simplex && satisfies(&x, &free, &rows)),
            None => prop_assert!(!simplex),
        }
    }
}
