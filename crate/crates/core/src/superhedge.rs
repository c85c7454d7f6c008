//! Node-indexed superhedging sets by backward recursion, the exact
//! dynamic-programming check, a brute-force LP oracle, ε-relaxed
//! membership and the one-sided concentration bound.

use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;

use ratgeom::{
    contains_point, intersect, intersect_all, is_subset, minkowski_sum, rat_from_f64_simplest, set_equal, translate,
    Halfspace, HRep, LinearProgram, Polyhedron, Rat, Relation,
};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{Claim, PathSet, PriceTree};
use crate::solvency::{eps_membership, physical_cone, EpsCone, SolvencyConeSpec};

pub const MAX_SUPERHEDGE_DIM: usize = 3;
pub const MAX_SUPERHEDGE_NODES: usize = 1000;
pub const MAX_EPS_LEAVES: usize = 12;
/// Default cap on polyhedral operations in one ε-membership query.
pub const DEFAULT_EPS_BUDGET: u64 = 20_000;

#[derive(Debug, Clone)]
pub struct LevelTrace {
    pub level: usize,
    pub nodes: usize,
    pub max_vertices: usize,
    pub max_rays: usize,
}

#[derive(Debug, Clone)]
pub struct SuperhedgeResult {
    /// `SHP_ν` for every node, physical units.
    pub sets: Vec<Polyhedron>,
    /// `X̂` at each leaf, `None` at internal nodes.
    pub payoffs: Vec<Option<Vec<Rat>>>,
    pub claim: Option<Claim>,
    /// Leaves first, root last.
    pub trace: Vec<LevelTrace>,
}

impl SuperhedgeResult {
    pub fn root(&self) -> &Polyhedron {
        &self.sets[0]
    }

    /// Per-node polyhedra keyed by node id.
    pub fn to_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        for (id, p) in self.sets.iter().enumerate() {
            map.insert(id.to_string(), ratgeom::to_json_value(p));
        }
        serde_json::Value::Object(map)
    }
}

fn check_budget(tree: &PriceTree, spec: &SolvencyConeSpec) -> Result<()> {
    if spec.d() != tree.d {
        return Err(Error::PreconditionViolated("tree and cone dimensions differ".into()));
    }
    if spec.d() > MAX_SUPERHEDGE_DIM {
        return Err(Error::UnsupportedDimension { d: spec.d(), max: MAX_SUPERHEDGE_DIM });
    }
    if tree.nodes.len() > MAX_SUPERHEDGE_NODES {
        return Err(Error::BudgetExceeded {
            what: "superhedging tree nodes",
            needed: tree.nodes.len() as u64,
            limit: MAX_SUPERHEDGE_NODES as u64,
        });
    }
    Ok(())
}

/// `X̂` at every leaf, indexed by node id.
pub fn leaf_payoffs(tree: &PriceTree, claim: &Claim) -> Result<Vec<Option<Vec<Rat>>>> {
    claim.validate(tree.d)?;
    let mut out = vec![None; tree.nodes.len()];
    for &l in tree.leaves() {
        out[l] = Some(claim.payoff_exact(&tree.nodes[l].price_exact)?);
    }
    Ok(out)
}

pub fn backward_sets(tree: &PriceTree, spec: &SolvencyConeSpec, claim: &Claim) -> Result<SuperhedgeResult> {
    let payoffs = leaf_payoffs(tree, claim)?;
    let mut r = backward_sets_with_payoffs(tree, spec, payoffs)?;
    r.claim = Some(claim.clone());
    Ok(r)
}

/// Leaf: `X̂ ⊕ K̂_leaf`. Internal: `K̂_ν ⊕ ∩_c SHP_c`.
pub fn backward_sets_with_payoffs(
    tree: &PriceTree,
    spec: &SolvencyConeSpec,
    payoffs: Vec<Option<Vec<Rat>>>,
) -> Result<SuperhedgeResult> {
    check_budget(tree, spec)?;
    if payoffs.len() != tree.nodes.len() {
        return Err(Error::PreconditionViolated("one payoff slot per node required".into()));
    }
    let leaves = tree.leaves();
    let leaf_sets: Vec<(usize, Polyhedron)> = leaves
        .par_iter()
        .map(|&l| {
            let x = payoffs[l]
                .as_ref()
                .ok_or_else(|| Error::PreconditionViolated(format!("missing payoff at leaf {l}")))?;
            if x.len() != tree.d {
                return Err(Error::PreconditionViolated(format!("payoff at leaf {l} has the wrong length")));
            }
            let cone = physical_cone(spec, &tree.nodes[l].price_exact)?;
            Ok((l, translate(&cone, x)?))
        })
        .collect::<Result<_>>()?;
    let mut trace = vec![level_trace(tree.periods, &leaf_sets)];
    let mut slots: Vec<Option<Polyhedron>> = vec![None; tree.nodes.len()];
    for (l, p) in leaf_sets {
        slots[l] = Some(p);
    }
    let sets = compose(tree, spec, slots, tree.periods, &mut trace)?;
    Ok(SuperhedgeResult { sets, payoffs, claim: None, trace })
}

fn level_trace(level: usize, sets: &[(usize, Polyhedron)]) -> LevelTrace {
    LevelTrace {
        level,
        nodes: sets.len(),
        max_vertices: sets.iter().map(|(_, p)| p.vertices().len()).max().unwrap_or(0),
        max_rays: sets.iter().map(|(_, p)| p.rays().len()).max().unwrap_or(0),
    }
}

/// Fills levels `from − 1, …, 0` given the sets at level `from`. Returns
/// sets for levels `0..=from`; deeper slots are left as they came in.
fn compose(
    tree: &PriceTree,
    spec: &SolvencyConeSpec,
    mut slots: Vec<Option<Polyhedron>>,
    from: usize,
    trace: &mut Vec<LevelTrace>,
) -> Result<Vec<Polyhedron>> {
    let d = tree.d;
    for lvl in (0..from).rev() {
        let computed: Vec<(usize, Polyhedron)> = tree.levels[lvl]
            .par_iter()
            .map(|&v| {
                let children: Vec<&Polyhedron> =
                    tree.nodes[v].children.iter().map(|c| slots[*c].as_ref().expect("child computed")).collect();
                let meet = intersect_all(d, children)?;
                if meet.is_empty() {
                    return Err(Error::EmptySet { node: v });
                }
                let cone = physical_cone(spec, &tree.nodes[v].price_exact)?;
                Ok((v, minkowski_sum(&cone, &meet)?))
            })
            .collect::<Result<_>>()?;
        trace.push(level_trace(lvl, &computed));
        for (v, p) in computed {
            slots[v] = Some(p);
        }
    }
    Ok(slots.into_iter().map(|s| s.unwrap_or_else(|| Polyhedron::empty(d))).collect())
}

/// Two-stage recomposition at level `u`: the level-`u` sets are recomputed
/// from scratch on their own subtrees, compared with the stored ones, then
/// used as terminal data for the recursion from 0 to `u`; the result must
/// equal the directly computed root set.
pub fn dpp_check(tree: &PriceTree, spec: &SolvencyConeSpec, result: &SuperhedgeResult, u: usize) -> Result<bool> {
    dpp_check_with(tree, spec, result, u, |_, p| Ok(p.clone()))
}

/// As [`dpp_check`], with `mutate` applied to each level-`u` set before
/// composition (used to test that the check can fail).
pub fn dpp_check_with<F>(
    tree: &PriceTree,
    spec: &SolvencyConeSpec,
    result: &SuperhedgeResult,
    u: usize,
    mutate: F,
) -> Result<bool>
where
    F: Fn(usize, &Polyhedron) -> Result<Polyhedron> + Sync,
{
    if u == 0 || u >= tree.periods {
        return Err(Error::LevelOutOfRange { level: u, periods: tree.periods });
    }
    check_budget(tree, spec)?;
    let level_sets: Vec<(usize, Option<Polyhedron>)> = tree.levels[u]
        .par_iter()
        .map(|&v| {
            let sub = tree.subtree(v);
            let originals = tree.leaves_under(v);
            let mut payoffs = vec![None; sub.nodes.len()];
            for (&sl, &ol) in sub.leaves().iter().zip(&originals) {
                payoffs[sl] = result.payoffs[ol].clone();
            }
            let fresh = backward_sets_with_payoffs(&sub, spec, payoffs)?;
            if !set_equal(fresh.root(), &result.sets[v])? {
                return Ok((v, None));
            }
            Ok((v, Some(mutate(v, fresh.root())?)))
        })
        .collect::<Result<_>>()?;
    let mut slots: Vec<Option<Polyhedron>> = vec![None; tree.nodes.len()];
    for (v, p) in level_sets {
        match p {
            Some(p) => slots[v] = Some(p),
            None => return Ok(false),
        }
    }
    let sets = compose(tree, spec, slots, u, &mut Vec::new())?;
    Ok(set_equal(&sets[0], result.root())?)
}

/// Single exact LP over nonnegative generator weights at every node:
/// `ξ − Σ_{ν on path} k_ν ≥ X̂_leaf` for every leaf.
pub fn oracle_membership(tree: &PriceTree, spec: &SolvencyConeSpec, claim: &Claim, xi: &[Rat]) -> Result<bool> {
    let payoffs = leaf_payoffs(tree, claim)?;
    oracle_membership_with_payoffs(tree, spec, &payoffs, xi)
}

pub fn oracle_membership_with_payoffs(
    tree: &PriceTree,
    spec: &SolvencyConeSpec,
    payoffs: &[Option<Vec<Rat>>],
    xi: &[Rat],
) -> Result<bool> {
    check_budget(tree, spec)?;
    let d = tree.d;
    if xi.len() != d {
        return Err(Error::PreconditionViolated("xi has the wrong length".into()));
    }
    let gens: Vec<Vec<Vec<Rat>>> =
        tree.nodes.iter().map(|n| spec.physical_generators(&n.price_exact)).collect::<Result<_>>()?;
    let per_node = spec.generators.len();
    let mut lp = LinearProgram::new(tree.nodes.len() * per_node);
    for &l in tree.leaves() {
        let x = payoffs[l].as_ref().ok_or_else(|| Error::PreconditionViolated(format!("missing payoff at leaf {l}")))?;
        let path = tree.path_between(0, l).expect("leaf below root");
        for i in 0..d {
            let mut row = Vec::new();
            for &v in &path {
                for (g, gen) in gens[v].iter().enumerate() {
                    if !gen[i].is_zero() {
                        row.push((v * per_node + g, gen[i].clone()));
                    }
                }
            }
            lp.add_constraint(row, Relation::Le, &xi[i] - &x[i]);
        }
    }
    Ok(lp.is_feasible())
}

/// ε-superhedging query at a tree node (or at time 0 on paths).
#[derive(Debug, Clone, PartialEq)]
pub struct EpsQuery {
    pub xi: Vec<f64>,
    pub eps: f64,
    pub lipschitz: f64,
    /// Tree node at which `ξ` is held; ignored in Monte Carlo mode.
    pub node: usize,
}

impl EpsQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::PreconditionViolated(format!("eps must lie in (0, 1], got {}", self.eps)));
        }
        if !(self.lipschitz.is_finite() && self.lipschitz >= 1.0) {
            return Err(Error::PreconditionViolated("L must be finite and >= 1".into()));
        }
        if self.xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::PreconditionViolated("xi must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsTreeReport {
    pub accepted: bool,
    /// Leaf subset that admits a strategy, when accepted.
    pub witness: Option<Vec<usize>>,
    pub subsets_tried: usize,
    /// Polyhedral operations spent (sums, intersections, containment tests).
    pub set_ops: u64,
}

/// Finite union of polyhedra, kept free of empty and dominated members.
type Union = Vec<Polyhedron>;

struct EpsUnions<'a> {
    tree: &'a PriceTree,
    /// Pieces of `𝒦̂^ε` at each node, as polyhedral cones.
    pieces: BTreeMap<usize, Vec<Polyhedron>>,
    /// `X̂ − Lε·1` at each leaf.
    targets: BTreeMap<usize, Vec<Rat>>,
    /// Keyed by node and the subset leaves below it.
    memo: BTreeMap<(usize, Vec<usize>), Union>,
    ops: u64,
    budget: u64,
}

impl EpsUnions<'_> {
    fn tick(&mut self, n: u64) -> Result<()> {
        self.ops += n;
        if self.ops > self.budget {
            return Err(Error::BudgetExceeded { what: "eps membership set operations", needed: self.ops, limit: self.budget });
        }
        Ok(())
    }

    fn prune(&mut self, list: Union) -> Result<Union> {
        let mut list: Union = list.into_iter().filter(|p| !p.is_empty()).collect();
        list.sort_by_key(|p| std::cmp::Reverse(p.vertices().len() + p.rays().len()));
        let mut kept: Union = Vec::with_capacity(list.len());
        for p in list {
            self.tick(kept.len() as u64)?;
            let mut dominated = false;
            for q in &kept {
                if is_subset(&p, q)? {
                    dominated = true;
                    break;
                }
            }
            if !dominated {
                let mut rest = Vec::with_capacity(kept.len() + 1);
                for q in kept {
                    if !is_subset(&q, &p)? {
                        rest.push(q);
                    }
                }
                rest.push(p);
                kept = rest;
            }
        }
        Ok(kept)
    }

    /// Positions `ξ` at `node` from which trades in `𝒦̂^ε` at `node` and
    /// below cover the targets at every listed leaf.
    fn at(&mut self, node: usize, leaves: &[usize]) -> Result<Union> {
        let key = (node, leaves.to_vec());
        if let Some(u) = self.memo.get(&key) {
            return Ok(u.clone());
        }
        let pieces = self.pieces[&node].clone();
        let out = if self.tree.is_leaf(node) {
            let orthant = Polyhedron::orthant(self.tree.d)?;
            let target = self.targets[&node].clone();
            self.tick(pieces.len() as u64)?;
            let list = pieces
                .iter()
                .map(|p| Ok(translate(&minkowski_sum(p, &orthant)?, &target)?))
                .collect::<Result<Union>>()?;
            self.prune(list)?
        } else {
            let mut inner: Option<Union> = None;
            for &c in &self.tree.nodes[node].children.clone() {
                let below: Vec<usize> = self.tree.leaves_under(c).into_iter().filter(|l| leaves.contains(l)).collect();
                if below.is_empty() {
                    continue;
                }
                let child = self.at(c, &below)?;
                inner = Some(match inner {
                    None => child,
                    Some(acc) => {
                        self.tick((acc.len() * child.len()) as u64)?;
                        let mut list = Vec::with_capacity(acc.len() * child.len());
                        for a in &acc {
                            for b in &child {
                                list.push(intersect(a, b)?);
                            }
                        }
                        self.prune(list)?
                    }
                });
            }
            let inner = inner.expect("every listed leaf lies below some child");
            self.tick((pieces.len() * inner.len()) as u64)?;
            let mut list = Vec::with_capacity(pieces.len() * inner.len());
            for p in &pieces {
                for c in &inner {
                    list.push(minkowski_sum(p, c)?);
                }
            }
            self.prune(list)?
        };
        self.memo.insert(key, out.clone());
        Ok(out)
    }
}

/// Exact LP: nonnegative weights on `gens[v]` at every node from `root` to
/// the listed leaves with `ξ − Σ k_ν ≥ target` at each leaf.
fn path_lp(
    tree: &PriceTree,
    root: usize,
    leaves: &[usize],
    gens: &BTreeMap<usize, Vec<Vec<Rat>>>,
    targets: &BTreeMap<usize, Vec<Rat>>,
    xi: &[Rat],
) -> bool {
    let mut offset = BTreeMap::new();
    let mut n = 0;
    for &l in leaves {
        for v in tree.path_between(root, l).expect("leaf below root") {
            offset.entry(v).or_insert_with(|| {
                let o = n;
                n += gens[&v].len();
                o
            });
        }
    }
    let mut lp = LinearProgram::new(n);
    for &l in leaves {
        let path = tree.path_between(root, l).expect("leaf below root");
        for (i, x) in xi.iter().enumerate() {
            let mut row = Vec::new();
            for &v in &path {
                for (g, gen) in gens[&v].iter().enumerate() {
                    if !gen[i].is_zero() {
                        row.push((offset[&v] + g, gen[i].clone()));
                    }
                }
            }
            lp.add_constraint(row, Relation::Le, x - &targets[&l][i]);
        }
    }
    lp.is_feasible()
}

/// Branch and bound over which piece of `𝒦̂^ε` each node trades in.
/// Unassigned nodes use the hull to prune and the inner cone to accept.
struct PieceSearch<'a> {
    tree: &'a PriceTree,
    root: usize,
    leaves: &'a [usize],
    order: &'a [usize],
    pieces: &'a BTreeMap<usize, Vec<Vec<Vec<Rat>>>>,
    inner: &'a BTreeMap<usize, Vec<Vec<Rat>>>,
    hull: &'a BTreeMap<usize, Vec<Vec<Rat>>>,
    targets: &'a BTreeMap<usize, Vec<Rat>>,
    xi: &'a [Rat],
}

impl PieceSearch<'_> {
    fn gens(&self, assigned: &[usize], fill: &BTreeMap<usize, Vec<Vec<Rat>>>) -> BTreeMap<usize, Vec<Vec<Rat>>> {
        self.order
            .iter()
            .enumerate()
            .map(|(k, &v)| (v, assigned.get(k).map_or_else(|| fill[&v].clone(), |&p| self.pieces[&v][p].clone())))
            .collect()
    }

    /// `None` once `left` LPs are spent.
    fn branch(&self, assigned: &mut Vec<usize>, left: &mut u64) -> Option<bool> {
        if *left == 0 {
            return None;
        }
        *left -= 1;
        let relaxed = self.gens(assigned, self.hull);
        if !path_lp(self.tree, self.root, self.leaves, &relaxed, self.targets, self.xi) {
            return Some(false);
        }
        if assigned.len() == self.order.len() {
            return Some(true);
        }
        let inner = self.gens(assigned, self.inner);
        if path_lp(self.tree, self.root, self.leaves, &inner, self.targets, self.xi) {
            return Some(true);
        }
        let v = self.order[assigned.len()];
        for p in 0..self.pieces[&v].len() {
            assigned.push(p);
            let hit = self.branch(assigned, left)?;
            assigned.pop();
            if hit {
                return Some(true);
            }
        }
        Some(false)
    }
}

/// Inclusion-minimal leaf subsets of `leaves` with total probability at
/// least `threshold`.
fn minimal_subsets(probs: &[Rat], threshold: &Rat) -> Vec<Vec<usize>> {
    let n = probs.len();
    let mut out = Vec::new();
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let total: Rat = members.iter().map(|&i| probs[i].clone()).sum();
        if &total < threshold {
            continue;
        }
        if members.iter().all(|&i| &(&total - &probs[i]) < threshold) {
            out.push(members);
        }
    }
    out.sort_by_key(|m| m.len());
    out
}

/// Tree mode: accepts iff some leaf subset `G` below `query.node` with
/// `P(G | node) ≥ 1 − ε` admits trades `k_ν ∈ 𝒦̂^ε(S_ν)` at the nodes
/// leading to `G` with `ξ − Σ k_ν + Lε·1 ≥ X̂` on every leaf of `G`.
///
/// Each `𝒦̂^ε` is the union of `2d` polyhedral pieces. Sums and
/// intersections distribute over unions, so the backward recursion runs on
/// finite unions of exact polyhedra (dominated members dropped), which
/// decides every piece assignment at once. In three dimensions the unions
/// grow too fast to prune, so a branch and bound over piece assignments
/// runs instead. `budget` caps set operations plus LPs.
pub fn eps_value_membership_tree(
    tree: &PriceTree,
    spec: &SolvencyConeSpec,
    claim: &Claim,
    query: &EpsQuery,
    budget: u64,
) -> Result<EpsTreeReport> {
    query.validate()?;
    let d = spec.d();
    if d > MAX_SUPERHEDGE_DIM {
        return Err(Error::UnsupportedDimension { d, max: MAX_SUPERHEDGE_DIM });
    }
    if query.xi.len() != d || tree.d != d {
        return Err(Error::PreconditionViolated("xi, tree and cone dimensions must agree".into()));
    }
    if query.node >= tree.nodes.len() {
        return Err(Error::PreconditionViolated(format!("node {} not in tree", query.node)));
    }
    let leaves = tree.leaves_under(query.node);
    if leaves.len() > MAX_EPS_LEAVES {
        return Err(Error::BudgetExceeded {
            what: "eps membership leaves",
            needed: leaves.len() as u64,
            limit: MAX_EPS_LEAVES as u64,
        });
    }
    let eps = rat_from_f64_simplest(query.eps).expect("finite eps");
    let cushion = rat_from_f64_simplest(query.lipschitz).expect("finite L") * &eps;
    let xi: Vec<Rat> = query.xi.iter().map(|v| rat_from_f64_simplest(*v).expect("finite xi")).collect();

    let mut pieces = BTreeMap::new();
    let mut inner_gens = BTreeMap::new();
    let mut hull_gens = BTreeMap::new();
    let mut piece_rays = BTreeMap::new();
    let mut stack = vec![query.node];
    while let Some(v) = stack.pop() {
        let cone = EpsCone::new(spec, &tree.nodes[v].price, query.eps)?;
        let base = HRep::new(d, cone.scaled_normals_exact().into_iter().map(|a| Halfspace::new(a, Rat::zero())).collect());
        inner_gens.insert(v, Polyhedron::from_hrep(&base)?.rays().to_vec());
        let list = cone
            .pieces_exact()
            .into_iter()
            .map(|rows| Ok(Polyhedron::from_hrep(&HRep::new(d, rows.into_iter().map(|a| Halfspace::new(a, Rat::zero())).collect()))?))
            .collect::<Result<Vec<_>>>()?;
        let mut hull: Vec<Vec<Rat>> = Vec::new();
        for p in &list {
            for r in p.rays() {
                if !hull.contains(r) {
                    hull.push(r.clone());
                }
            }
        }
        hull_gens.insert(v, hull);
        piece_rays.insert(v, list.iter().map(|p| p.rays().to_vec()).collect::<Vec<_>>());
        pieces.insert(v, list);
        stack.extend(tree.nodes[v].children.iter().copied());
    }
    let mut targets = BTreeMap::new();
    for &l in &leaves {
        let x = claim.payoff_exact(&tree.nodes[l].price_exact)?;
        targets.insert(l, x.iter().map(|v| v - &cushion).collect::<Vec<Rat>>());
    }
    let targets_ro = targets.clone();
    let mut unions = EpsUnions { tree, pieces, targets, memo: BTreeMap::new(), ops: 0, budget };

    let probs: Vec<Rat> = leaves.iter().map(|&l| tree.conditional_prob(l, query.node)).collect();
    let threshold = Rat::one() - &eps;
    let mut report = EpsTreeReport { accepted: false, witness: None, subsets_tried: 0, set_ops: 0 };
    for subset in minimal_subsets(&probs, &threshold) {
        report.subsets_tried += 1;
        let chosen: Vec<usize> = subset.iter().map(|&i| leaves[i]).collect();
        // The convex inner cone gives a sufficient test, the convex hull a
        // necessary one. Only disagreement needs the union recursion.
        let hit = if path_lp(tree, query.node, &chosen, &inner_gens, &unions.targets, &xi) {
            true
        } else if !path_lp(tree, query.node, &chosen, &hull_gens, &unions.targets, &xi) {
            false
        } else {
            let mut order = Vec::new();
            for &l in &chosen {
                for v in tree.path_between(query.node, l).expect("leaf below node") {
                    if !order.contains(&v) {
                        order.push(v);
                    }
                }
            }
            order.sort_unstable();
            let search = PieceSearch { tree, root: query.node, leaves: &chosen, order: &order, pieces: &piece_rays, inner: &inner_gens, hull: &hull_gens, targets: &targets_ro, xi: &xi };
            if d <= 2 {
                let sets = unions.at(query.node, &chosen)?;
                let mut hit = false;
                for p in &sets {
                    if contains_point(p, &xi)? {
                        hit = true;
                        break;
                    }
                }
                hit
            } else {
                let mut left = budget.saturating_sub(unions.ops);
                let before = left;
                let found = search.branch(&mut Vec::new(), &mut left);
                unions.ops += before - left;
                found.ok_or(Error::BudgetExceeded { what: "eps membership set operations", needed: budget + 1, limit: budget })?
            }
        };
        if hit {
            report.accepted = true;
            report.witness = Some(chosen);
            break;
        }
    }
    report.set_ops = unions.ops;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsMcReport {
    pub successes: usize,
    pub n_paths: usize,
    pub frequency: f64,
    pub accepted: bool,
}

/// Monte Carlo mode: holds `ξ` to `T` and trades once at the terminal
/// price. A path succeeds when `ξ + Lε·1 − X̂(S_T) ∈ 𝒦̂^ε(S_T)`; the query
/// is accepted when the success frequency is at least `1 − ε`.
pub fn eps_value_membership_mc(
    paths: &PathSet,
    spec: &SolvencyConeSpec,
    claim: &Claim,
    query: &EpsQuery,
) -> Result<EpsMcReport> {
    query.validate()?;
    let d = spec.d();
    if query.xi.len() != d || paths.d != d {
        return Err(Error::PreconditionViolated("xi, paths and cone dimensions must agree".into()));
    }
    claim.validate(d)?;
    let successes = (0..paths.n_paths)
        .into_par_iter()
        .map(|p| {
            let s = paths.terminal(p);
            let x = claim.payoff_f64(s);
            let target: Vec<f64> =
                (0..d).map(|i| query.xi[i] + query.lipschitz * query.eps - x[i]).collect();
            let cone = EpsCone::new(spec, s, query.eps)?;
            Ok(usize::from(eps_membership(&cone, &target)))
        })
        .collect::<Result<Vec<usize>>>()?
        .into_iter()
        .sum::<usize>();
    let frequency = successes as f64 / paths.n_paths as f64;
    Ok(EpsMcReport { successes, n_paths: paths.n_paths, frequency, accepted: frequency >= 1.0 - query.eps })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    /// `P(A | ν)` for each level-`u` node, in level order.
    pub conditional: Vec<(usize, Rat)>,
    /// `P({ν : P(A|ν) ≥ √ε})`.
    pub mass_above: Rat,
    pub holds: bool,
}

/// `P({P(A | F_u) ≥ √ε}) ≤ √ε` for a leaf event with `P(A) ≤ ε`,
/// decided exactly by comparing squares.
pub fn concentration_check(tree: &PriceTree, event: &[usize], eps: &Rat, u: usize) -> Result<ConcentrationReport> {
    if !eps.is_positive() || eps > &Rat::one() {
        return Err(Error::BadEvent("eps must lie in (0, 1]".into()));
    }
    if u > tree.periods {
        return Err(Error::BadEvent(format!("level {u} exceeds {} periods", tree.periods)));
    }
    let mut sorted = event.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != event.len() {
        return Err(Error::BadEvent("event lists a leaf twice".into()));
    }
    if sorted.iter().any(|&l| l >= tree.nodes.len() || !tree.is_leaf(l)) {
        return Err(Error::BadEvent("event must consist of leaves".into()));
    }
    let p_a: Rat = sorted.iter().map(|&l| tree.nodes[l].prob.clone()).sum();
    if &p_a > eps {
        return Err(Error::BadEvent("P(A) exceeds eps".into()));
    }
    let mut conditional = Vec::with_capacity(tree.levels[u].len());
    let mut mass_above = Rat::zero();
    for &v in &tree.levels[u] {
        let below = tree.leaves_under(v);
        let p: Rat = below
            .iter()
            .filter(|l| sorted.binary_search(l).is_ok())
            .map(|&l| tree.conditional_prob(l, v))
            .sum();
        if &(&p * &p) >= eps && p.is_positive() {
            mass_above += &tree.nodes[v].prob;
        }
        conditional.push((v, p));
    }
    let holds = &(&mass_above * &mass_above) <= eps;
    Ok(ConcentrationReport { conditional, mass_above, holds })
}

/// True when `ξ` lies in the root set (convenience for probes).
pub fn root_contains(result: &SuperhedgeResult, xi: &[Rat]) -> Result<bool> {
    Ok(contains_point(result.root(), xi)?)
}

/// `p ⊕ R^d_+ = p`: every unit vector is a recession direction.
pub fn is_upper(p: &Polyhedron) -> Result<bool> {
    let d = p.dim();
    for i in 0..d {
        let mut e = vec![Rat::zero(); d];
        e[i] = Rat::one();
        if !p.contains_ray(&e)? {
            return Ok(false);
        }
    }
    Ok(!p.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{build_tree, MarketModel};
    use crate::solvency::{build_cone, ExchangeMatrix};
    use ratgeom::{rat, rat_int, Polyhedron, VRep};

    fn spec() -> SolvencyConeSpec {
        build_cone(ExchangeMatrix::constant(2, rat(1, 10)).unwrap(), false).unwrap()
    }

    fn tree(sigma: f64, periods: usize) -> PriceTree {
        let m = MarketModel::constant(vec![1.0, 1.0], 0.0, vec![0.0], vec![vec![0.0], vec![sigma]], 1.0).unwrap();
        build_tree(&m, periods).unwrap()
    }

    fn unit_claim() -> Claim {
        Claim::constant_physical(vec![rat_int(1), rat_int(0)])
    }

    #[test]
    fn golden_one_period() {
        let t = tree(0.2, 1);
        let r = backward_sets(&t, &spec(), &unit_claim()).unwrap();
        let expected = Polyhedron::from_vrep(&VRep::new(
            2,
            vec![vec![rat_int(1), rat_int(0)]],
            vec![vec![rat_int(-1), rat(10, 9)], vec![rat_int(1), rat(-10, 11)]],
        ))
        .unwrap();
        assert!(set_equal(r.root(), &expected).unwrap());
        assert_eq!(r.root().vertices(), &[vec![rat_int(1), rat_int(0)]]);
    }

    #[test]
    fn zero_claim_contains_origin() {
        let t = tree(0.3, 2);
        let zero = Claim::constant_physical(vec![rat_int(0), rat_int(0)]);
        let r = backward_sets(&t, &spec(), &zero).unwrap();
        assert!(root_contains(&r, &[rat_int(0), rat_int(0)]).unwrap());
        assert!(oracle_membership(&t, &spec(), &zero, &[rat_int(0), rat_int(0)]).unwrap());
    }

    #[test]
    fn deterministic_tree_collapses_to_root_cone() {
        let t = tree(0.0, 3);
        let r = backward_sets(&t, &spec(), &unit_claim()).unwrap();
        let k = physical_cone(&spec(), &t.root().price_exact).unwrap();
        assert!(set_equal(r.root(), &translate(&k, &[rat_int(1), rat_int(0)]).unwrap()).unwrap());
    }

    #[test]
    fn dpp_and_mutation() {
        let t = tree(0.25, 2);
        let s = spec();
        let call = Claim::vanilla_call(2, 2, rat_int(1)).unwrap();
        let r = backward_sets(&t, &s, &call).unwrap();
        assert!(dpp_check(&t, &s, &r, 1).unwrap());
        assert!(matches!(dpp_check(&t, &s, &r, 2), Err(Error::LevelOutOfRange { .. })));
        let down = vec![rat_int(-1), rat_int(-1)];
        let first = t.levels[1][0];
        let mutated = dpp_check_with(&t, &s, &r, 1, |v, p| {
            if v == first {
                Ok(minkowski_sum(p, &Polyhedron::cone(2, std::slice::from_ref(&down))?)?)
            } else {
                Ok(p.clone())
            }
        })
        .unwrap();
        assert!(!mutated);
    }

    #[test]
    fn oracle_agrees_on_vertices() {
        let t = tree(0.2, 2);
        let s = spec();
        let call = Claim::vanilla_call(2, 2, rat(9, 10)).unwrap();
        let r = backward_sets(&t, &s, &call).unwrap();
        for v in r.root().vertices() {
            assert!(oracle_membership(&t, &s, &call, v).unwrap());
            let below: Vec<Rat> = v.iter().map(|x| x - rat(1, 1000)).collect();
            assert!(!oracle_membership(&t, &s, &call, &below).unwrap());
            assert!(!root_contains(&r, &below).unwrap());
        }
        assert!(is_upper(r.root()).unwrap());
    }

    #[test]
    fn eps_tree_pinned_pair() {
        let t = tree(0.0, 1);
        let s = spec();
        let q = |xi: Vec<f64>| EpsQuery { xi, eps: 0.01, lipschitz: 1.0, node: 0 };
        let inside = eps_value_membership_tree(&t, &s, &unit_claim(), &q(vec![1.0, 0.0]), DEFAULT_EPS_BUDGET).unwrap();
        assert!(inside.accepted);
        let outside =
            eps_value_membership_tree(&t, &s, &unit_claim(), &q(vec![0.98, -0.02]), DEFAULT_EPS_BUDGET).unwrap();
        assert!(!outside.accepted);
    }

    #[test]
    fn eps_tree_validates_query() {
        let t = tree(0.2, 1);
        let q = EpsQuery { xi: vec![1.0, 0.0], eps: 0.0, lipschitz: 1.0, node: 0 };
        assert!(eps_value_membership_tree(&t, &spec(), &unit_claim(), &q, 10).is_err());
    }

    #[test]
    fn concentration_examples() {
        let t = tree(0.2, 3);
        let empty = concentration_check(&t, &[], &rat(1, 8), 1).unwrap();
        assert!(empty.holds);
        let leaf = t.leaves()[0];
        let r = concentration_check(&t, &[leaf], &rat(1, 8), 1).unwrap();
        assert_eq!(r.conditional.iter().map(|(_, p)| p.clone()).collect::<Vec<_>>(), vec![rat(1, 4), rat_int(0)]);
        assert_eq!(r.mass_above, rat_int(0));
        assert!(r.holds);
        assert!(concentration_check(&t, &[0], &rat(1, 8), 1).is_err());
        assert!(concentration_check(&t, &t.leaves()[..2], &rat(1, 8), 1).is_err());
    }
}
