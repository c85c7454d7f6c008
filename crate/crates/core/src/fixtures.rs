//! Seeded fixture generators shared by the test suites and `verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratgeom::{rat, rat_int, Rat};

use crate::error::Result;
use crate::market::{build_tree, Claim, MarketModel, PriceTree};
use crate::portfolio::{StrategyTheta, TreeStrategy};
use crate::solvency::{build_cone, ExchangeMatrix, SolvencyConeSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform rational `n / den` with `n` in `lo..=hi`.
pub fn random_rat(rng: &mut impl Rng, lo: i64, hi: i64, den: i64) -> Rat {
    rat(rng.random_range(lo..=hi), den)
}

/// `λ ∈ [0.01, 0.15]`, every off-diagonal `μ^{ij} ∈ [λ, 2λ + λ²]`; the
/// triangle inequality holds because `(1 + λ)² = 1 + 2λ + λ²`.
pub fn random_exchange(d: usize, rng: &mut impl Rng) -> ExchangeMatrix {
    let lambda = random_rat(rng, 10, 150, 1000);
    let hi = rat_int(2) * &lambda + &lambda * &lambda;
    let mu = (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    if i == j {
                        rat_int(0)
                    } else {
                        let t = random_rat(rng, 0, 1000, 1000);
                        &lambda + (&hi - &lambda) * t
                    }
                })
                .collect()
        })
        .collect();
    ExchangeMatrix::new(mu).expect("generated costs satisfy the triangle inequality")
}

pub fn random_spec(d: usize, rng: &mut impl Rng) -> SolvencyConeSpec {
    build_cone(random_exchange(d, rng), false).expect("positive round-trip costs")
}

/// Constant coefficients, `s0ⁱ ∈ [0.8, 1.25]`, volatilities with a
/// dominant diagonal so the risky block is invertible.
pub fn random_model(d: usize, horizon: f64, rng: &mut impl Rng) -> MarketModel {
    let m = d - 1;
    let mut s0 = vec![1.0];
    s0.extend((1..d).map(|_| rng.random_range(0.8..1.25)));
    let r = rng.random_range(0.0..0.03);
    let b = (0..m).map(|_| rng.random_range(-0.05..0.1)).collect();
    let mut sigma = vec![vec![0.0; m]];
    for i in 0..m {
        sigma.push((0..m).map(|l| if l == i { rng.random_range(0.1..0.35) } else { rng.random_range(-0.05..0.05) }).collect());
    }
    MarketModel::constant(s0, r, b, sigma, horizon).expect("valid generated model")
}

/// Call on asset 2 struck near the money for `d = 2`, otherwise alternately
/// a call or a linear basket.
pub fn random_claim(d: usize, rng: &mut impl Rng) -> Claim {
    if d == 2 || rng.random_bool(0.5) {
        let asset = rng.random_range(2..=d);
        Claim::vanilla_call(d, asset, random_rat(rng, 80, 120, 100)).expect("valid call")
    } else {
        let mut w: Vec<Rat> = (0..d).map(|_| random_rat(rng, -5, 10, 10)).collect();
        w[0] = rat_int(0);
        Claim::linear_basket(w)
    }
}

#[derive(Debug, Clone)]
pub struct TreeFixture {
    pub tree: PriceTree,
    pub spec: SolvencyConeSpec,
    pub claim: Claim,
}

pub fn tree_fixture(d: usize, periods: usize, seed: u64) -> Result<TreeFixture> {
    let mut r = rng(seed);
    let spec = random_spec(d, &mut r);
    let model = random_model(d, 1.0, &mut r);
    let claim = random_claim(d, &mut r);
    Ok(TreeFixture { tree: build_tree(&model, periods)?, spec, claim })
}

/// Rational transfer rates with sparse support.
pub fn random_theta(d: usize, steps: usize, rng: &mut impl Rng) -> StrategyTheta {
    let steps = (0..steps)
        .map(|_| {
            (0..d)
                .map(|i| {
                    (0..d)
                        .map(|j| if i != j && rng.random_bool(0.6) { random_rat(rng, 0, 20, 10) } else { rat_int(0) })
                        .collect()
                })
                .collect()
        })
        .collect();
    StrategyTheta { steps }
}

/// At every internal node a nonnegative rational combination of the
/// physical generators, so each rate lies in `K̂` at that node.
pub fn random_tree_strategy(tree: &PriceTree, spec: &SolvencyConeSpec, rng: &mut impl Rng) -> Result<TreeStrategy> {
    let mut s = TreeStrategy::zero(tree);
    for node in &tree.nodes {
        if node.children.is_empty() {
            continue;
        }
        let gens = spec.physical_generators(&node.price_exact)?;
        let mut k = vec![rat_int(0); tree.d];
        for g in gens {
            if rng.random_bool(0.5) {
                let w = random_rat(rng, 0, 10, 10);
                for (a, b) in k.iter_mut().zip(g) {
                    *a += &w * b;
                }
            }
        }
        s.khat[node.id] = k;
    }
    Ok(s)
}

/// One-period binomial with `μ = 1/10`, `s0 = (1, 1)`, `σ = 0.2`, `b = r = 0`
/// and the claim `(1, 0)`; its root set is pinned in the tests.
pub fn golden_fixture() -> TreeFixture {
    let model = MarketModel::constant(vec![1.0, 1.0], 0.0, vec![0.0], vec![vec![0.0], vec![0.2]], 1.0)
        .expect("valid model");
    TreeFixture {
        tree: build_tree(&model, 1).expect("small tree"),
        spec: build_cone(ExchangeMatrix::constant(2, rat(1, 10)).expect("valid costs"), false).expect("cone"),
        claim: Claim::constant_physical(vec![rat_int(1), rat_int(0)]),
    }
}
