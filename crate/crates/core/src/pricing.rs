//! Consistent price processes on trees and Monte Carlo paths, and the
//! supermartingale property of `Z·V̂` for self-financing strategies.

use num_traits::{One, Signed, Zero};
use ratgeom::{dot, format_rats, rat_to_f64, LinearProgram, LpOutcome, Rat, Relation};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{MarketModel, PathSet, PriceTree};
use crate::portfolio::{tree_values, StrategyK, TreeStrategy};
use crate::solvency::{dual_membership, SolvencyConeSpec};

/// `Z` at every tree node, exact.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistentPriceProcess {
    pub z: Vec<Vec<Rat>>,
}

impl ConsistentPriceProcess {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!(self.z.iter().map(|v| format_rats(v)).collect::<Vec<_>>())
    }
}

/// Normalized barycenter of the canonical dual generators of `K̂(s0)`.
pub fn root_z(tree: &PriceTree, spec: &SolvencyConeSpec) -> Result<Vec<Rat>> {
    let gens = spec.physical_dual_generators(&tree.root().price_exact)?;
    let d = spec.d();
    let mut z = vec![Rat::zero(); d];
    for g in &gens {
        let first = g.iter().find(|v| !v.is_zero()).cloned().unwrap_or_else(Rat::one).abs();
        for (a, b) in z.iter_mut().zip(g) {
            *a += b / &first;
        }
    }
    if !z[0].is_positive() {
        return Err(Error::Infeasible("root dual cone has no point with positive numeraire component".into()));
    }
    let n = z[0].clone();
    Ok(z.into_iter().map(|v| v / &n).collect())
}

/// Forward construction: each node's children solve one exact LP that
/// keeps the conditional mean equal to the parent and pushes every child
/// as deep into its dual cone as possible (`z·ĝ ≥ t`, `t` maximal, capped
/// at 1). When no child can be made interior (`t* ≤ 0`, e.g. degenerate
/// cones) a second LP maximizes the smallest numéraire component.
pub fn find_consistent_z(tree: &PriceTree, spec: &SolvencyConeSpec) -> Result<ConsistentPriceProcess> {
    let d = spec.d();
    let mut z = vec![Vec::new(); tree.nodes.len()];
    z[0] = root_z(tree, spec)?;
    for lvl in 0..tree.periods {
        for &v in &tree.levels[lvl] {
            let children = &tree.nodes[v].children;
            let sol = child_values(tree, spec, v, &z[v])?;
            for (k, &c) in children.iter().enumerate() {
                z[c] = sol[k * d..(k + 1) * d].to_vec();
            }
        }
    }
    Ok(ConsistentPriceProcess { z })
}

fn child_values(tree: &PriceTree, spec: &SolvencyConeSpec, node: usize, parent_z: &[Rat]) -> Result<Vec<Rat>> {
    let d = spec.d();
    let children = &tree.nodes[node].children;
    let nz = children.len() * d;
    let gens: Vec<Vec<Vec<Rat>>> = children
        .iter()
        .map(|&c| spec.physical_generators(&tree.nodes[c].price_exact))
        .collect::<Result<_>>()?;
    let build = |interior: bool| {
        let mut lp = LinearProgram::new(nz + 1);
        for v in 0..=nz {
            lp.set_free(v);
        }
        for i in 0..d {
            let row = children.iter().enumerate().map(|(k, &c)| (k * d + i, tree.nodes[c].branch_prob.clone())).collect();
            lp.add_constraint(row, Relation::Eq, parent_z[i].clone());
        }
        let t = nz;
        for (k, g) in gens.iter().enumerate() {
            for gen in g {
                let mut row: Vec<(usize, Rat)> =
                    (0..d).filter(|&i| !gen[i].is_zero()).map(|i| (k * d + i, gen[i].clone())).collect();
                if interior {
                    row.push((t, -Rat::one()));
                }
                lp.add_constraint(row, Relation::Ge, Rat::zero());
            }
            if !interior {
                lp.add_constraint(vec![(k * d, Rat::one()), (t, -Rat::one())], Relation::Ge, Rat::zero());
            }
        }
        lp.add_constraint(vec![(t, Rat::one())], Relation::Le, Rat::one());
        lp.set_objective(vec![(t, -Rat::one())]);
        lp.solve()
    };
    for interior in [true, false] {
        match build(interior) {
            LpOutcome::Optimal(sol) if sol.x[nz].is_positive() => return Ok(sol.x[..nz].to_vec()),
            LpOutcome::Optimal(_) => continue,
            _ => break,
        }
    }
    Err(Error::Infeasible(format!("no consistent price process extends node {node} to its children")))
}

/// Checks normalization, exact martingality, dual-cone membership,
/// nonzero-ness and strict positivity at every node.
pub fn validate_z(tree: &PriceTree, spec: &SolvencyConeSpec, z: &ConsistentPriceProcess) -> Result<()> {
    if z.z.len() != tree.nodes.len() || z.z.iter().any(|v| v.len() != spec.d()) {
        return Err(Error::InconsistentZ("one d-vector per node required".into()));
    }
    if !z.z[0][0].is_one() {
        return Err(Error::InconsistentZ("Z^1 at the root must equal 1".into()));
    }
    for node in &tree.nodes {
        let zv = &z.z[node.id];
        if zv.iter().all(Zero::is_zero) {
            return Err(Error::InconsistentZ(format!("Z vanishes at node {}", node.id)));
        }
        if !dual_membership(spec, &node.price_exact, zv)? {
            return Err(Error::InconsistentZ(format!("Z leaves the dual cone at node {}", node.id)));
        }
        if zv.iter().any(|v| !v.is_positive()) {
            return Err(Error::InconsistentZ(format!("Z not strictly positive at node {}", node.id)));
        }
        if !node.children.is_empty() {
            let mut mean = vec![Rat::zero(); spec.d()];
            for &c in &node.children {
                for (m, v) in mean.iter_mut().zip(&z.z[c]) {
                    *m += &tree.nodes[c].branch_prob * v;
                }
            }
            if &mean != zv {
                return Err(Error::InconsistentZ(format!("martingale property fails at node {}", node.id)));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeSupermartingaleReport {
    pub nodes_checked: usize,
    pub violations: usize,
    /// Nodes where `E[Z·V̂ | ν] < Z·V̂` strictly.
    pub strict_nodes: usize,
    /// Node with the smallest margin `Z·V̂ − E[Z_c·V̂_c]`, and that margin.
    pub worst_node: usize,
    pub worst_margin: Rat,
}

/// Exact node-wise check of `Σ p_c Z_c·V̂_c ≤ Z_ν·V̂_ν`.
pub fn tree_supermartingale_check(
    tree: &PriceTree,
    spec: &SolvencyConeSpec,
    z: &ConsistentPriceProcess,
    strategy: &TreeStrategy,
    v0_hat: &[Rat],
) -> Result<TreeSupermartingaleReport> {
    validate_z(tree, spec, z)?;
    strategy.validate(tree, spec)?;
    let vhat = tree_values(tree, strategy, v0_hat)?;
    let internal: Vec<usize> = tree.nodes.iter().filter(|n| !n.children.is_empty()).map(|n| n.id).collect();
    let margins: Vec<(usize, Rat)> = internal
        .par_iter()
        .map(|&v| {
            let here = dot(&z.z[v], &vhat[v]);
            let next = tree.nodes[v]
                .children
                .iter()
                .fold(Rat::zero(), |acc, &c| acc + &tree.nodes[c].branch_prob * dot(&z.z[c], &vhat[c]));
            (v, here - next)
        })
        .collect();
    let violations = margins.iter().filter(|(_, m)| m.is_negative()).count();
    let strict_nodes = margins.iter().filter(|(_, m)| m.is_positive()).count();
    let (worst_node, worst_margin) = margins
        .iter()
        .min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
        .cloned()
        .unwrap_or((0, Rat::zero()));
    Ok(TreeSupermartingaleReport { nodes_checked: margins.len(), violations, strict_nodes, worst_node, worst_margin })
}

/// Market price of risk `θ = σ'⁻¹(b − r)` per grid step, with `σ'` the
/// `m × m` block of risky rows, from step-averaged coefficients.
fn market_price_of_risk(model: &MarketModel, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let m = model.m();
    let mut out = Vec::with_capacity(times.len() - 1);
    for w in times.windows(2) {
        let (b, sigma) = model.averaged(w[0], w[1]);
        let mut a: Vec<Vec<f64>> = (1..=m).map(|i| sigma[i].clone()).collect();
        let mut rhs: Vec<f64> = (1..=m).map(|i| b[i] - b[0]).collect();
        // Gaussian elimination with partial pivoting.
        for col in 0..m {
            let piv = (col..m)
                .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
                .unwrap();
            if a[piv][col].abs() < 1e-14 {
                return Err(Error::InvalidModel("risky volatility block is singular".into()));
            }
            a.swap(col, piv);
            rhs.swap(col, piv);
            for r in 0..m {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..m {
                        a[r][c] -= f * a[col][c];
                    }
                    rhs[r] -= f * rhs[col];
                }
            }
        }
        out.push((0..m).map(|i| rhs[i] / a[i][i]).collect());
    }
    Ok(out)
}

/// `Z` along Monte Carlo paths: `Z¹` is the discrete stochastic exponential
/// `Π exp(−θ·ΔW − ½|θ|²Δt)` (an exact martingale for deterministic `θ`) and
/// `Zⁱ = Z¹ Sⁱ/S¹`, the frictionless mid-price inside every dual cone.
/// Layout `[path][step 0..=n][asset]`.
pub fn mc_consistent_z(model: &MarketModel, paths: &PathSet) -> Result<Vec<f64>> {
    let theta = market_price_of_risk(model, &paths.times)?;
    let d = paths.d;
    let n = paths.n_steps;
    let per_path: Vec<Vec<f64>> = (0..paths.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut out = Vec::with_capacity((n + 1) * d);
            let mut log_z1 = 0.0;
            for k in 0..=n {
                if k > 0 {
                    let th = &theta[k - 1];
                    let dt = paths.times[k] - paths.times[k - 1];
                    let dw = paths.increment(p, k - 1);
                    log_z1 += -th.iter().zip(dw).map(|(a, b)| a * b).sum::<f64>()
                        - 0.5 * th.iter().map(|a| a * a).sum::<f64>() * dt;
                }
                let s = paths.price(p, k);
                let z1 = log_z1.exp();
                out.extend(s.iter().map(|si| z1 * si / s[0]));
            }
            out
        })
        .collect();
    Ok(per_path.concat())
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSupermartingaleReport {
    pub mean: f64,
    pub initial: f64,
    pub std_error: f64,
    pub passes: bool,
}

/// `E[Z_T·V̂_T] ≤ Z_0·V̂_0 + 3·SE` for a deterministic numéraire-unit
/// strategy `k` (physical rates `diag(S)⁻¹k` on each path).
pub fn mc_supermartingale_check(
    model: &MarketModel,
    paths: &PathSet,
    spec: &SolvencyConeSpec,
    k: &StrategyK,
    v0_hat: &[f64],
) -> Result<McSupermartingaleReport> {
    k.validate(spec)?;
    let z = mc_consistent_z(model, paths)?;
    let d = paths.d;
    let n = paths.n_steps;
    if z[..d].iter().zip(paths.price(0, 0)).any(|(a, s)| !(a.is_finite() && *a > 0.0) || *s <= 0.0) {
        return Err(Error::InconsistentZ("Z_0 must be strictly positive".into()));
    }
    let terminal: Vec<f64> = (0..paths.n_paths)
        .into_par_iter()
        .map(|p| {
            let khat = crate::portfolio::khat_from_k(k, paths, p)?;
            let vals = crate::portfolio::simulate_value(paths, p, &khat, v0_hat)?;
            let zt = &z[(p * (n + 1) + n) * d..(p * (n + 1) + n + 1) * d];
            Ok(zt.iter().zip(&vals.vhat[n]).map(|(a, b)| a * b).sum())
        })
        .collect::<Result<_>>()?;
    let (mean, std_error) = mean_and_se(&terminal);
    let initial: f64 = z[..d].iter().zip(v0_hat).map(|(a, b)| a * b).sum();
    Ok(McSupermartingaleReport { mean, initial, std_error, passes: mean <= initial + 3.0 * std_error })
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReweightingReport {
    pub reweighted: f64,
    pub reweighted_se: f64,
    pub direct: f64,
    pub direct_se: f64,
    pub passes: bool,
}

/// Compares `E[Z¹_T f(S_T)]` under the physical dynamics with `E^Q[f(S_T)]`
/// simulated directly under `b ≡ r`; both must agree within three combined
/// standard errors. `f` is the numéraire-discounted first component of the
/// claim's physical payoff.
pub fn reweighting_check(
    model: &MarketModel,
    claim: &crate::market::Claim,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<ReweightingReport> {
    let physical = crate::market::simulate_paths(model, n_paths, n_steps, seed)?;
    let z = mc_consistent_z(model, &physical)?;
    let d = model.d();
    let weighted: Vec<f64> = (0..n_paths)
        .map(|p| {
            let z1 = z[(p * (n_steps + 1) + n_steps) * d];
            z1 * claim.payoff_f64(physical.terminal(p))[0]
        })
        .collect();
    let rn = crate::market::simulate_paths(&model.risk_neutral(), n_paths, n_steps, seed.wrapping_add(0x9e37_79b9))?;
    let direct: Vec<f64> = (0..n_paths).map(|p| claim.payoff_f64(rn.terminal(p))[0]).collect();
    let (a, sa) = mean_and_se(&weighted);
    let (b, sb) = mean_and_se(&direct);
    let passes = (a - b).abs() <= 3.0 * (sa * sa + sb * sb).sqrt();
    Ok(ReweightingReport { reweighted: a, reweighted_se: sa, direct: b, direct_se: sb, passes })
}

/// Float view of `Z` for reporting.
pub fn z_to_f64(z: &ConsistentPriceProcess) -> Vec<Vec<f64>> {
    z.z.iter().map(|v| v.iter().map(rat_to_f64).collect()).collect()
}
