//! Self-financing strategies as transfer rates `Θ`, cone-valued rates `k`
//! in numéraire units, and physical-unit rates `k̂ = diag(S)⁻¹k`.

use num_traits::{Signed, Zero};
use ratgeom::{format_rats, parse_rats, Rat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{PathSet, PriceTree};
use crate::solvency::{generator_weights, ExchangeMatrix, SolvencyConeSpec};

/// One `d × d` transfer-rate matrix per grid step.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyTheta {
    pub steps: Vec<Vec<Vec<Rat>>>,
}

impl StrategyTheta {
    pub fn validate(&self, d: usize) -> Result<()> {
        for (n, m) in self.steps.iter().enumerate() {
            if m.len() != d || m.iter().any(|r| r.len() != d) {
                return Err(Error::PreconditionViolated(format!("step {n}: theta must be {d} x {d}")));
            }
            for (i, row) in m.iter().enumerate() {
                if !row[i].is_zero() || row.iter().any(Signed::is_negative) {
                    return Err(Error::PreconditionViolated(format!(
                        "step {n}: theta needs zero diagonal and nonnegative entries"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let steps: Vec<Vec<Vec<String>>> = self.steps.iter().map(|m| m.iter().map(|r| format_rats(r)).collect()).collect();
        serde_json::json!(steps)
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let raw: Vec<Vec<Vec<String>>> =
            serde_json::from_value(v.clone()).map_err(|e| Error::Config(e.to_string()))?;
        let steps = raw
            .iter()
            .map(|m| m.iter().map(|r| parse_rats(r)).collect::<std::result::Result<Vec<_>, _>>())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { steps })
    }
}

/// One vector of `K(Π)` per grid step.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyK {
    pub steps: Vec<Vec<Rat>>,
}

impl StrategyK {
    pub fn validate(&self, spec: &SolvencyConeSpec) -> Result<()> {
        for k in &self.steps {
            if k.len() != spec.d() {
                return Err(Error::PreconditionViolated("rate vector has the wrong length".into()));
            }
            if !spec.cone.contains_point(k)? {
                return Err(Error::NotInCone);
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        let steps: Vec<Vec<String>> = self.steps.iter().map(|k| format_rats(k)).collect();
        serde_json::json!(steps)
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let raw: Vec<Vec<String>> = serde_json::from_value(v.clone()).map_err(|e| Error::Config(e.to_string()))?;
        let steps = raw.iter().map(|r| parse_rats(r)).collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { steps })
    }
}

/// `k = Σ θ^{ij} g^{ij}`: the numéraire component is `⟨Θ, Π⟩`, the others
/// are net inflows `Σ_j (θ^{ji} − θ^{ij})`.
pub fn theta_step_to_k(theta: &[Vec<Rat>], exchange: &ExchangeMatrix) -> Vec<Rat> {
    let d = exchange.d();
    let mut k = vec![Rat::zero(); d];
    for (i, j) in exchange.pairs() {
        let t = &theta[i][j];
        if t.is_zero() {
            continue;
        }
        for (kc, g) in k.iter_mut().zip(exchange.generator(i, j)) {
            *kc += t * g;
        }
    }
    k
}

pub fn theta_to_k(theta: &StrategyTheta, exchange: &ExchangeMatrix) -> StrategyK {
    StrategyK { steps: theta.steps.iter().map(|m| theta_step_to_k(m, exchange)).collect() }
}

/// Minimal-`Σθ` preimage of each step, ties broken lexicographically.
pub fn k_to_theta(k: &StrategyK, exchange: &ExchangeMatrix) -> Result<StrategyTheta> {
    let mut steps = Vec::with_capacity(k.steps.len());
    for v in &k.steps {
        if v.len() != exchange.d() {
            return Err(Error::PreconditionViolated("rate vector has the wrong length".into()));
        }
        steps.push(generator_weights(exchange, v).ok_or(Error::NotInCone)?);
    }
    Ok(StrategyTheta { steps })
}

/// Physical-unit rates on one path, constant on each strategy step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyKhat {
    pub horizon: f64,
    pub rates: Vec<Vec<f64>>,
}

impl StrategyKhat {
    pub fn n_steps(&self) -> usize {
        self.rates.len()
    }
}

/// `k̂_n = diag(S_{t_n})⁻¹ k_n` with `t_n` the strategy grid on `path`.
pub fn khat_from_k(k: &StrategyK, paths: &PathSet, path: usize) -> Result<StrategyKhat> {
    let n = k.steps.len();
    if n == 0 || paths.n_steps % n != 0 {
        return Err(Error::GridMismatch(format!("{n} strategy steps do not divide {} path steps", paths.n_steps)));
    }
    let stride = paths.n_steps / n;
    let rates = k
        .steps
        .iter()
        .enumerate()
        .map(|(s, kv)| {
            let price = paths.price(path, s * stride);
            kv.iter().zip(price).map(|(a, p)| ratgeom::rat_to_f64(a) / p).collect()
        })
        .collect();
    Ok(StrategyKhat { horizon: paths.times[paths.n_steps], rates })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValuePaths {
    pub times: Vec<f64>,
    /// Physical units, integrated exactly.
    pub vhat: Vec<Vec<f64>>,
    /// `diag(S) V̂`.
    pub v: Vec<Vec<f64>>,
    /// Numéraire-unit SDE integrated by Euler driven by the price returns.
    pub v_euler: Vec<Vec<f64>>,
}

impl ValuePaths {
    pub fn max_discrepancy(&self) -> f64 {
        self.v
            .iter()
            .zip(&self.v_euler)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Runs `strategy` from the physical-unit position `v0_hat` along one path.
pub fn simulate_value(paths: &PathSet, path: usize, strategy: &StrategyKhat, v0_hat: &[f64]) -> Result<ValuePaths> {
    let n = strategy.n_steps();
    let horizon = paths.times[paths.n_steps];
    if n == 0 || paths.n_steps % n != 0 || (strategy.horizon - horizon).abs() > 1e-12 * horizon.max(1.0) {
        return Err(Error::GridMismatch(format!(
            "strategy with {n} steps on [0,{}] does not fit a {}-step path on [0,{horizon}]",
            strategy.horizon, paths.n_steps
        )));
    }
    if v0_hat.len() != paths.d || strategy.rates.iter().any(|r| r.len() != paths.d) {
        return Err(Error::PreconditionViolated("dimension mismatch between strategy, v0 and path".into()));
    }
    let stride = paths.n_steps / n;
    let dt = paths.dt();
    let mut vhat = vec![v0_hat.to_vec()];
    let mut v_euler = vec![v0_hat.iter().zip(paths.price(path, 0)).map(|(a, s)| a * s).collect::<Vec<f64>>()];
    for step in 0..paths.n_steps {
        let k = &strategy.rates[step / stride];
        let s0 = paths.price(path, step);
        let s1 = paths.price(path, step + 1);
        let prev = vhat.last().unwrap();
        vhat.push(prev.iter().zip(k).map(|(v, k)| v - k * dt).collect());
        let ve = v_euler.last().unwrap();
        v_euler.push((0..paths.d).map(|i| ve[i] + ve[i] * (s1[i] / s0[i] - 1.0) - s0[i] * k[i] * dt).collect());
    }
    let v = vhat.iter().enumerate().map(|(k, vh)| vh.iter().zip(paths.price(path, k)).map(|(a, s)| a * s).collect()).collect();
    Ok(ValuePaths { times: paths.times.clone(), vhat, v, v_euler })
}

/// Exact physical-unit rates at every node of a tree (entries at leaves
/// are ignored).
#[derive(Debug, Clone, PartialEq)]
pub struct TreeStrategy {
    pub khat: Vec<Vec<Rat>>,
}

impl TreeStrategy {
    pub fn zero(tree: &PriceTree) -> Self {
        Self { khat: vec![vec![Rat::zero(); tree.d]; tree.nodes.len()] }
    }

    /// Each rate is checked against `K̂` at its node.
    pub fn validate(&self, tree: &PriceTree, spec: &SolvencyConeSpec) -> Result<()> {
        if self.khat.len() != tree.nodes.len() {
            return Err(Error::GridMismatch("one rate per tree node required".into()));
        }
        for (node, k) in tree.nodes.iter().zip(&self.khat) {
            if node.children.is_empty() {
                continue;
            }
            let numeraire: Vec<Rat> = k.iter().zip(&node.price_exact).map(|(a, s)| a * s).collect();
            if !spec.cone.contains_point(&numeraire)? {
                return Err(Error::NotInCone);
            }
        }
        Ok(())
    }
}

/// `V̂` at every node: `V̂_child = V̂_parent − k̂_parent Δt`.
pub fn tree_values(tree: &PriceTree, strategy: &TreeStrategy, v0_hat: &[Rat]) -> Result<Vec<Vec<Rat>>> {
    if v0_hat.len() != tree.d || strategy.khat.len() != tree.nodes.len() {
        return Err(Error::PreconditionViolated("dimension mismatch between tree, strategy and v0".into()));
    }
    let mut out = vec![Vec::new(); tree.nodes.len()];
    out[0] = v0_hat.to_vec();
    for lvl in 0..tree.periods {
        let dt = ratgeom::rat_from_f64(tree.times[lvl + 1] - tree.times[lvl]).expect("finite step");
        for &v in &tree.levels[lvl] {
            let next: Vec<Rat> = out[v].iter().zip(&strategy.khat[v]).map(|(x, k)| x - k * &dt).collect();
            for &c in &tree.nodes[v].children {
                out[c] = next.clone();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{simulate_paths, MarketModel};
    use crate::solvency::build_cone;
    use ratgeom::{rat, rat_int};

    fn tenth() -> ExchangeMatrix {
        ExchangeMatrix::constant(2, rat(1, 10)).unwrap()
    }

    fn theta(m: Vec<Vec<Rat>>) -> StrategyTheta {
        StrategyTheta { steps: vec![m] }
    }

    #[test]
    fn theta_to_k_examples() {
        let z = rat_int(0);
        let o = rat_int(1);
        let k = theta_to_k(&theta(vec![vec![z.clone(), z.clone()], vec![z.clone(), z.clone()]]), &tenth());
        assert_eq!(k.steps[0], vec![rat_int(0), rat_int(0)]);
        let k = theta_to_k(&theta(vec![vec![z.clone(), o.clone()], vec![z.clone(), z.clone()]]), &tenth());
        assert_eq!(k.steps[0], vec![rat(11, 10), rat_int(-1)]);
        let k = theta_to_k(&theta(vec![vec![z.clone(), o.clone()], vec![o.clone(), z.clone()]]), &tenth());
        assert_eq!(k.steps[0], vec![rat(1, 5), rat_int(0)]);
    }

    #[test]
    fn k_to_theta_examples() {
        let ex = tenth();
        let k = StrategyK { steps: vec![vec![rat_int(0), rat_int(0)], vec![rat(11, 10), rat_int(-1)], vec![rat(1, 5), rat_int(0)]] };
        let t = k_to_theta(&k, &ex).unwrap();
        assert!(t.steps[0].iter().flatten().all(Zero::is_zero));
        assert_eq!(t.steps[1], vec![vec![rat_int(0), rat_int(1)], vec![rat_int(0), rat_int(0)]]);
        t.validate(2).unwrap();
        assert_eq!(theta_to_k(&t, &ex), k);
        let bad = StrategyK { steps: vec![vec![rat_int(-1), rat_int(0)]] };
        assert_eq!(k_to_theta(&bad, &ex), Err(Error::NotInCone));
    }

    #[test]
    fn json_round_trip() {
        let k = StrategyK { steps: vec![vec![rat(11, 10), rat_int(-1)]] };
        assert_eq!(StrategyK::from_json(&k.to_json()).unwrap(), k);
        let t = k_to_theta(&k, &tenth()).unwrap();
        assert_eq!(StrategyTheta::from_json(&t.to_json()).unwrap(), t);
    }

    #[test]
    fn zero_strategy_is_buy_and_hold() {
        let m = MarketModel::constant(vec![1.0, 1.0], 0.01, vec![0.05], vec![vec![0.0], vec![0.3]], 1.0).unwrap();
        let p = simulate_paths(&m, 1, 16, 4).unwrap();
        let s = StrategyKhat { horizon: 1.0, rates: vec![vec![0.0, 0.0]; 4] };
        let out = simulate_value(&p, 0, &s, &[2.0, 3.0]).unwrap();
        assert!(out.vhat.iter().all(|v| v == &vec![2.0, 3.0]));
        assert!(out.max_discrepancy() < 1e-12);
    }

    #[test]
    fn linear_drain() {
        let m = MarketModel::constant(vec![1.0, 1.0], 0.0, vec![0.0], vec![vec![0.0], vec![0.0]], 2.0).unwrap();
        let p = simulate_paths(&m, 1, 8, 0).unwrap();
        let s = StrategyKhat { horizon: 2.0, rates: vec![vec![1.0, 0.0]; 2] };
        let out = simulate_value(&p, 0, &s, &[5.0, 0.0]).unwrap();
        assert!((out.vhat[8][0] - 3.0).abs() < 1e-12);
        assert!(out.max_discrepancy() < 1e-12);
        let bad = StrategyKhat { horizon: 2.0, rates: vec![vec![1.0, 0.0]; 3] };
        assert!(matches!(simulate_value(&p, 0, &bad, &[0.0, 0.0]), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn tree_values_follow_trades() {
        let m = MarketModel::constant(vec![1.0, 1.0], 0.0, vec![0.0], vec![vec![0.0], vec![0.2]], 1.0).unwrap();
        let t = crate::market::build_tree(&m, 2).unwrap();
        let spec = build_cone(tenth(), false).unwrap();
        let mut s = TreeStrategy::zero(&t);
        s.khat[0] = vec![rat(11, 10), rat_int(-1)];
        s.validate(&t, &spec).unwrap();
        let v = tree_values(&t, &s, &[rat_int(0), rat_int(0)]).unwrap();
        assert_eq!(v[1], vec![rat(-11, 20), rat(1, 2)]);
        assert_eq!(v[3], v[1]);
        s.khat[1] = vec![rat_int(-1), rat_int(0)];
        assert_eq!(s.validate(&t, &spec), Err(Error::NotInCone));
    }
}
