//! Property suite behind `conehedge verify`.

use rand::Rng;
use serde_json::{json, Value};

use conehedge::fixtures::{golden_fixture, random_rat, random_spec, random_theta, random_tree_strategy, rng, tree_fixture};
use conehedge::portfolio::{k_to_theta, theta_to_k};
use conehedge::pricing::{find_consistent_z, tree_supermartingale_check};
use conehedge::solvency::{decompose, dual_membership, dual_membership_by_generators};
use conehedge::superhedge::{
    backward_sets, dpp_check, eps_value_membership_tree, oracle_membership, root_contains, EpsQuery,
    DEFAULT_EPS_BUDGET,
};
use conehedge::{Error, Result};
use ratgeom::{rat, rat_int, rat_to_f64, Rat};

use crate::{reconstruct, Failure};

struct Check {
    name: &'static str,
    cases: usize,
    outcome: Result<Option<String>>,
}

/// `Ok(None)` is a pass; `Ok(Some(msg))` a failed property.
fn check(name: &'static str, cases: usize, f: impl FnOnce() -> Result<Option<String>>) -> Check {
    Check { name, cases, outcome: f() }
}

pub fn run_suite(quick: bool, seed: u64) -> std::result::Result<Value, Failure> {
    let n = |full: usize| if quick { full / 5 } else { full };
    let checks = vec![
        check("golden cone", 1, golden_cone),
        check("decompose round trip", n(250), || decompose_round_trip(n(250), seed)),
        check("dual generators positive", n(100), || duals_positive(n(100), seed)),
        check("dual membership routes agree", n(100), || dual_routes(n(100), seed)),
        check("theta k round trip", n(50), || theta_round_trip(n(50), seed)),
        check("oracle equivalence", n(10), || oracle(n(10), seed)),
        check("dynamic programming principle", n(5), || dpp(n(5), seed)),
        check("tree supermartingale", n(10), || supermartingale(n(10), seed)),
        check("eps monotonicity", n(10), || eps_monotone(n(10), seed)),
    ];
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for c in checks {
        let (passed, detail) = match c.outcome {
            Ok(None) => (true, Value::Null),
            Ok(Some(msg)) => (false, json!(msg)),
            Err(e) => (false, json!({"error": e.to_string(), "invariant": e.invariant()})),
        };
        if !passed {
            failed.push(c.name);
        }
        rows.push(json!({"name": c.name, "cases": c.cases, "passed": passed, "detail": detail}));
    }
    Ok(json!({"quick": quick, "seed": seed, "passed": failed.is_empty(), "failed": failed, "checks": rows}))
}

fn golden_cone() -> Result<Option<String>> {
    let f = golden_fixture();
    let gens = &f.spec.generators;
    let want = [vec![rat(11, 10), rat_int(-1)], vec![rat(-9, 10), rat_int(1)]];
    if !want.iter().all(|g| gens.contains(g)) || gens.len() != 2 {
        return Ok(Some(format!("generators {gens:?}")));
    }
    let b = decompose(&f.spec, &[rat_int(1), rat_int(1)])?;
    if b[0][1] != rat(19, 2) || b[1][0] != rat(21, 2) {
        return Ok(Some(format!("decompose(1, 1) = {b:?}")));
    }
    Ok(None)
}

fn decompose_round_trip(cases: usize, seed: u64) -> Result<Option<String>> {
    let mut r = rng(seed ^ 0xdec0);
    for i in 0..cases {
        let d = 2 + i % 3;
        let spec = random_spec(d, &mut r);
        let alpha: Vec<Rat> = (0..d).map(|_| random_rat(&mut r, 0, 40, 8)).collect();
        let b = decompose(&spec, &alpha)?;
        if b.iter().flatten().any(|x| x < &rat_int(0)) || reconstruct(&spec.exchange, &b) != alpha {
            return Ok(Some(format!("case {i}: bad witness for {alpha:?}")));
        }
    }
    Ok(None)
}

fn duals_positive(cases: usize, seed: u64) -> Result<Option<String>> {
    let mut r = rng(seed ^ 0xd0a1);
    for i in 0..cases {
        let spec = random_spec(2 + i % 3, &mut r);
        let zero = rat_int(0);
        if spec.dual_generators.iter().flatten().any(|x| x <= &zero) {
            return Ok(Some(format!("case {i}: nonpositive dual generator")));
        }
    }
    Ok(None)
}

fn dual_routes(cases: usize, seed: u64) -> Result<Option<String>> {
    let mut r = rng(seed ^ 0xd0a2);
    for i in 0..cases {
        let d = 2 + i % 2;
        let spec = random_spec(d, &mut r);
        let y: Vec<Rat> = (0..d).map(|k| if k == 0 { rat_int(1) } else { random_rat(&mut r, 1, 32, 16) }).collect();
        let z: Vec<Rat> = (0..d).map(|_| random_rat(&mut r, -4, 16, 8)).collect();
        if dual_membership(&spec, &y, &z)? != dual_membership_by_generators(&spec, &y, &z)? {
            return Ok(Some(format!("case {i}: routes disagree on {z:?}")));
        }
    }
    Ok(None)
}

fn theta_round_trip(cases: usize, seed: u64) -> Result<Option<String>> {
    let mut r = rng(seed ^ 0x7e7a);
    for i in 0..cases {
        let d = 2 + i % 2;
        let spec = random_spec(d, &mut r);
        let theta = random_theta(d, 4, &mut r);
        let k = theta_to_k(&theta, &spec.exchange);
        let back = k_to_theta(&k, &spec.exchange)?;
        if theta_to_k(&back, &spec.exchange) != k {
            return Ok(Some(format!("case {i}: k changed after a round trip")));
        }
    }
    Ok(None)
}

fn oracle(fixtures: usize, seed: u64) -> Result<Option<String>> {
    for i in 0..fixtures.max(1) {
        let f = tree_fixture(2, 1 + i % 2, seed.wrapping_add(100 + i as u64))?;
        let res = backward_sets(&f.tree, &f.spec, &f.claim)?;
        let mut r = rng(seed ^ i as u64);
        let base: Vec<Rat> = res.root().vertices()[0].clone();
        for _ in 0..10 {
            let p: Vec<Rat> = base.iter().map(|x| x + random_rat(&mut r, -8, 8, 16)).collect();
            if root_contains(&res, &p)? != oracle_membership(&f.tree, &f.spec, &f.claim, &p)? {
                return Ok(Some(format!("fixture {i}: recursion and oracle disagree")));
            }
        }
    }
    Ok(None)
}

fn dpp(fixtures: usize, seed: u64) -> Result<Option<String>> {
    for i in 0..fixtures.max(1) {
        let f = tree_fixture(2, 2, seed.wrapping_add(200 + i as u64))?;
        let res = backward_sets(&f.tree, &f.spec, &f.claim)?;
        if !dpp_check(&f.tree, &f.spec, &res, 1)? {
            return Ok(Some(format!("fixture {i}: recomposition differs")));
        }
    }
    Ok(None)
}

fn supermartingale(fixtures: usize, seed: u64) -> Result<Option<String>> {
    for i in 0..fixtures.max(1) {
        let f = tree_fixture(2 + i % 2, 2, seed.wrapping_add(300 + i as u64))?;
        let z = find_consistent_z(&f.tree, &f.spec)?;
        let mut r = rng(seed ^ 0x5u64 ^ i as u64);
        let strategy = random_tree_strategy(&f.tree, &f.spec, &mut r)?;
        let v0 = vec![rat_int(1); f.tree.d];
        let rep = tree_supermartingale_check(&f.tree, &f.spec, &z, &strategy, &v0)?;
        if rep.violations > 0 {
            return Ok(Some(format!("fixture {i}: {} violations", rep.violations)));
        }
    }
    Ok(None)
}

fn eps_monotone(queries: usize, seed: u64) -> Result<Option<String>> {
    for i in 0..queries.max(1) {
        let f = tree_fixture(2, 1 + i % 2, seed.wrapping_add(400 + i as u64))?;
        let res = backward_sets(&f.tree, &f.spec, &f.claim)?;
        let mut r = rng(seed ^ 0xe95 ^ i as u64);
        let shift: f64 = r.random_range(-0.1..0.05);
        let xi: Vec<f64> = res.root().vertices()[0].iter().map(|x| rat_to_f64(x) + shift).collect();
        let mut prev = false;
        for eps in [0.05, 0.1, 0.2, 0.4] {
            let q = EpsQuery { xi: xi.clone(), eps, lipschitz: rat_to_f64(&f.claim.lipschitz), node: 0 };
            let accepted = match eps_value_membership_tree(&f.tree, &f.spec, &f.claim, &q, DEFAULT_EPS_BUDGET) {
                Ok(rep) => rep.accepted,
                Err(Error::BudgetExceeded { .. }) => continue,
                Err(e) => return Err(e),
            };
            if prev && !accepted {
                return Ok(Some(format!("query {i}: rejected at {eps} after an acceptance")));
            }
            prev = accepted;
        }
    }
    Ok(None)
}
