//! Black–Scholes market with deterministic piecewise-constant coefficients.
//!
//! Asset 0 is the bank account, `dS⁰ = S⁰ r dt`; the others follow
//! `dSⁱ = Sⁱ (bⁱ dt + σⁱ dW)` with `m = d − 1` Brownian drivers.

use num_traits::{Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use ratgeom::{rat_from_f64, Rat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant function on `[0, ∞)`: `segments[k].1` applies on
/// `(segments[k-1].0, segments[k].0]`, the last value extends to infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct Piecewise<T> {
    segments: Vec<(f64, T)>,
}

impl<T: Clone> Piecewise<T> {
    pub fn constant(value: T) -> Self {
        Self { segments: vec![(f64::INFINITY, value)] }
    }

    /// `(until, value)` pairs with strictly increasing `until`.
    pub fn new(mut segments: Vec<(f64, T)>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::InvalidModel("piecewise function needs at least one segment".into()));
        }
        for w in segments.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::InvalidModel("segment breakpoints must be strictly increasing".into()));
            }
        }
        if segments.iter().any(|(t, _)| t.is_nan() || *t <= 0.0) {
            return Err(Error::InvalidModel("segment breakpoints must be positive".into()));
        }
        segments.last_mut().unwrap().0 = f64::INFINITY;
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[(f64, T)] {
        &self.segments
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.segments.iter().map(|(t, _)| *t).filter(|t| t.is_finite())
    }

    /// Value on the segment containing `t` (right-continuous at interior
    /// points of `(a, b]` is irrelevant here: callers pass midpoints).
    pub fn at(&self, t: f64) -> &T {
        for (until, v) in &self.segments {
            if t < *until {
                return v;
            }
        }
        &self.segments.last().unwrap().1
    }

    fn values(&self) -> impl Iterator<Item = &T> {
        self.segments.iter().map(|(_, v)| v)
    }
}

/// One interval with constant coefficients, for every asset.
#[derive(Debug, Clone)]
pub struct Piece {
    pub dt: f64,
    /// `bⁱ − ½|σⁱ|²` (with `b⁰ = r`).
    pub log_drift: Vec<f64>,
    /// `d × m`.
    pub sigma: Vec<Vec<f64>>,
    pub r: f64,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MarketModel {
    d: usize,
    s0: Vec<f64>,
    r: Piecewise<f64>,
    /// Drifts of assets 2..d.
    b: Piecewise<Vec<f64>>,
    /// `d × m`, first row zero.
    sigma: Piecewise<Vec<Vec<f64>>>,
    t_end: f64,
}

impl MarketModel {
    pub fn new(
        s0: Vec<f64>,
        r: Piecewise<f64>,
        b: Piecewise<Vec<f64>>,
        sigma: Piecewise<Vec<Vec<f64>>>,
        t_end: f64,
    ) -> Result<Self> {
        let d = s0.len();
        if d < 2 {
            return Err(Error::InvalidModel("need at least 2 assets".into()));
        }
        if s0[0] != 1.0 {
            return Err(Error::InvalidModel("s0 of the numeraire must equal 1".into()));
        }
        if s0.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidModel("s0 must be finite and strictly positive".into()));
        }
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidModel("T must be finite and positive".into()));
        }
        if r.values().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("r must be finite".into()));
        }
        for v in b.values() {
            if v.len() != d - 1 || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidModel(format!("b must have {} finite entries", d - 1)));
            }
        }
        for s in sigma.values() {
            if s.len() != d || s.iter().any(|row| row.len() != d - 1 || row.iter().any(|x| !x.is_finite())) {
                return Err(Error::InvalidModel(format!("sigma must be {d} x {} and finite", d - 1)));
            }
            if s[0].iter().any(|x| *x != 0.0) {
                return Err(Error::InvalidModel("sigma row 1 (numeraire) must be zero".into()));
            }
        }
        Ok(Self { d, s0, r, b, sigma, t_end })
    }

    /// Constant coefficients.
    pub fn constant(s0: Vec<f64>, r: f64, b: Vec<f64>, sigma: Vec<Vec<f64>>, t_end: f64) -> Result<Self> {
        Self::new(s0, Piecewise::constant(r), Piecewise::constant(b), Piecewise::constant(sigma), t_end)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.d - 1
    }

    pub fn s0(&self) -> &[f64] {
        &self.s0
    }

    pub fn horizon(&self) -> f64 {
        self.t_end
    }

    /// Same model with `b ≡ r` (the dynamics under the bank-account
    /// martingale measure).
    pub fn risk_neutral(&self) -> Self {
        let mut segments: Vec<(f64, Vec<f64>)> = Vec::new();
        for (until, r) in self.r.segments() {
            segments.push((*until, vec![*r; self.d - 1]));
        }
        Self { b: Piecewise { segments }, ..self.clone() }
    }

    /// Coefficient pieces covering `[a, b]`, split at every breakpoint.
    pub fn pieces(&self, a: f64, b: f64) -> Vec<Piece> {
        let mut cuts: Vec<f64> = self
            .r
            .breakpoints()
            .chain(self.b.breakpoints())
            .chain(self.sigma.breakpoints())
            .filter(|t| *t > a && *t < b)
            .collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut out = Vec::with_capacity(cuts.len() + 1);
        let mut lo = a;
        for hi in cuts.into_iter().chain(std::iter::once(b)) {
            if hi > lo {
                out.push(self.piece(lo, hi));
            }
            lo = hi;
        }
        out
    }

    fn piece(&self, lo: f64, hi: f64) -> Piece {
        let mid = 0.5 * (lo + hi);
        let r = *self.r.at(mid);
        let mut b = vec![r];
        b.extend(self.b.at(mid).iter().copied());
        let sigma = self.sigma.at(mid).clone();
        let log_drift = (0..self.d).map(|i| b[i] - 0.5 * sigma[i].iter().map(|s| s * s).sum::<f64>()).collect();
        Piece { dt: hi - lo, log_drift, sigma, r, b }
    }

    /// Step-averaged coefficients on `[a, b]`: `(b̄, σ̄)` with `b̄⁰ = r̄`.
    pub fn averaged(&self, a: f64, b: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
        let pieces = self.pieces(a, b);
        let total = b - a;
        let m = self.m();
        let mut bb = vec![0.0; self.d];
        let mut ss = vec![vec![0.0; m]; self.d];
        for p in &pieces {
            let w = p.dt / total;
            for i in 0..self.d {
                bb[i] += w * p.b[i];
                for l in 0..m {
                    ss[i][l] += w * p.sigma[i][l];
                }
            }
        }
        (bb, ss)
    }
}

fn grid(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|k| if k == n { t_end } else { t_end * k as f64 / n as f64 }).collect()
}

/// Simulated paths on a uniform grid. Arrays are flat, path-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub d: usize,
    pub m: usize,
    pub n_paths: usize,
    pub n_steps: usize,
    pub times: Vec<f64>,
    /// `[path][step 0..=n_steps][asset]`.
    pub prices: Vec<f64>,
    /// Brownian increments `[path][step 0..n_steps][driver]`.
    pub dw: Vec<f64>,
}

impl PathSet {
    pub fn price(&self, path: usize, step: usize) -> &[f64] {
        let o = (path * (self.n_steps + 1) + step) * self.d;
        &self.prices[o..o + self.d]
    }

    pub fn increment(&self, path: usize, step: usize) -> &[f64] {
        let o = (path * self.n_steps + step) * self.m;
        &self.dw[o..o + self.m]
    }

    pub fn terminal(&self, path: usize) -> &[f64] {
        self.price(path, self.n_steps)
    }

    pub fn dt(&self) -> f64 {
        self.times[self.n_steps] / self.n_steps as f64
    }

    /// Keeps every `factor`-th grid point; Brownian increments are summed.
    pub fn coarsen(&self, factor: usize) -> Result<PathSet> {
        if factor == 0 || self.n_steps % factor != 0 {
            return Err(Error::GridMismatch(format!("{} steps cannot be coarsened by {factor}", self.n_steps)));
        }
        let n = self.n_steps / factor;
        let mut prices = Vec::with_capacity(self.n_paths * (n + 1) * self.d);
        let mut dw = Vec::with_capacity(self.n_paths * n * self.m);
        for p in 0..self.n_paths {
            for k in 0..=n {
                prices.extend_from_slice(self.price(p, k * factor));
            }
            for k in 0..n {
                for l in 0..self.m {
                    dw.push((0..factor).map(|j| self.increment(p, k * factor + j)[l]).sum());
                }
            }
        }
        let times = (0..=n).map(|k| self.times[k * factor]).collect();
        Ok(PathSet { d: self.d, m: self.m, n_paths: self.n_paths, n_steps: n, times, prices, dw })
    }

    /// One row per grid point: `time,S1,..,Sd`.
    pub fn to_csv(&self, path: usize) -> String {
        let mut out = String::from("time");
        for i in 1..=self.d {
            out.push_str(&format!(",S{i}"));
        }
        out.push('\n');
        for k in 0..=self.n_steps {
            out.push_str(&format!("{}", self.times[k]));
            for v in self.price(path, k) {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Exact log-scheme. Path `p` draws from its own ChaCha8 stream `p` of
/// `rng_seed`, so the output does not depend on thread scheduling.
pub fn simulate_paths(model: &MarketModel, n_paths: usize, n_steps: usize, rng_seed: u64) -> Result<PathSet> {
    if n_paths == 0 || n_steps == 0 {
        return Err(Error::InvalidModel("n_paths and n_steps must be at least 1".into()));
    }
    let d = model.d;
    let m = model.m();
    let times = grid(model.t_end, n_steps);
    let steps: Vec<Vec<Piece>> = (0..n_steps).map(|k| model.pieces(times[k], times[k + 1])).collect();
    let per_path: Vec<(Vec<f64>, Vec<f64>)> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(p as u64);
            let mut prices = Vec::with_capacity((n_steps + 1) * d);
            let mut dw = Vec::with_capacity(n_steps * m);
            let mut log_s: Vec<f64> = model.s0.iter().map(|s| s.ln()).collect();
            prices.extend_from_slice(&model.s0);
            let mut z = vec![0.0; m];
            for pieces in &steps {
                let mut inc = vec![0.0; m];
                for piece in pieces {
                    let sq = piece.dt.sqrt();
                    for zl in z.iter_mut() {
                        let n: f64 = StandardNormal.sample(&mut rng);
                        *zl = n * sq;
                    }
                    for i in 0..d {
                        let noise: f64 = piece.sigma[i].iter().zip(&z).map(|(s, w)| s * w).sum();
                        log_s[i] += piece.log_drift[i] * piece.dt + noise;
                    }
                    for (a, b) in inc.iter_mut().zip(&z) {
                        *a += b;
                    }
                }
                prices.extend(log_s.iter().map(|v| v.exp()));
                dw.extend(inc);
            }
            (prices, dw)
        })
        .collect();
    let mut prices = Vec::with_capacity(n_paths * (n_steps + 1) * d);
    let mut dw = Vec::with_capacity(n_paths * n_steps * m);
    for (p, w) in per_path {
        prices.extend(p);
        dw.extend(w);
    }
    Ok(PathSet { d, m, n_paths, n_steps, times, prices, dw })
}

/// Node prices are rounded to multiples of `2^-PRICE_GRID_BITS`.
pub const PRICE_GRID_BITS: u32 = 32;
pub const MAX_TREE_NODES: u64 = 1_000_000;

pub fn round_to_grid(x: f64) -> Rat {
    let scale = (PRICE_GRID_BITS as f64).exp2();
    let n = (x * scale).round();
    rat_from_f64(n).expect("finite price") / rat_from_f64(scale).unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub id: usize,
    pub level: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Sign pattern of the driver increments leading here (empty at the root).
    pub signs: Vec<i8>,
    /// Prices in floating point, as produced by the log-scheme.
    pub price: Vec<f64>,
    /// Prices rounded to the dyadic grid; exact work uses these.
    #[serde(skip)]
    pub price_exact: Vec<Rat>,
    #[serde(skip)]
    pub branch_prob: Rat,
    #[serde(skip)]
    pub prob: Rat,
}

/// Non-recombining tree with `2^m` equally likely children per node.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTree {
    pub d: usize,
    pub m: usize,
    pub periods: usize,
    pub times: Vec<f64>,
    pub nodes: Vec<TreeNode>,
    pub levels: Vec<Vec<usize>>,
}

fn tree_size(m: usize, periods: usize) -> Option<u64> {
    let fan = 1u64.checked_shl(m as u32)?;
    let mut total = 0u64;
    let mut width = 1u64;
    for _ in 0..=periods {
        total = total.checked_add(width)?;
        width = width.checked_mul(fan)?;
    }
    Some(total)
}

/// Child log-increments use step-averaged coefficients and
/// `ΔW^ℓ = ±√Δt` with probability `2^-m` per sign pattern.
pub fn build_tree(model: &MarketModel, periods: usize) -> Result<PriceTree> {
    if periods == 0 {
        return Err(Error::InvalidModel("periods must be at least 1".into()));
    }
    let m = model.m();
    let d = model.d;
    let needed = tree_size(m, periods).unwrap_or(u64::MAX);
    if needed > MAX_TREE_NODES {
        return Err(Error::BudgetExceeded { what: "tree nodes", needed, limit: MAX_TREE_NODES });
    }
    let times = grid(model.t_end, periods);
    let fan = 1usize << m;
    let branch = Rat::new(1.into(), (fan as u64).into());
    let root = TreeNode {
        id: 0,
        level: 0,
        parent: None,
        children: Vec::new(),
        signs: Vec::new(),
        price: model.s0.clone(),
        price_exact: model.s0.iter().map(|v| round_to_grid(*v)).collect(),
        branch_prob: Rat::from_integer(1.into()),
        prob: Rat::from_integer(1.into()),
    };
    let mut nodes = vec![root];
    let mut levels = vec![vec![0usize]];
    for k in 0..periods {
        let dt = times[k + 1] - times[k];
        let (bb, ss) = model.averaged(times[k], times[k + 1]);
        let drift: Vec<f64> =
            (0..d).map(|i| (bb[i] - 0.5 * ss[i].iter().map(|s| s * s).sum::<f64>()) * dt).collect();
        let sq = dt.sqrt();
        let mut next = Vec::with_capacity(levels[k].len() * fan);
        for &parent in &levels[k] {
            for pattern in 0..fan {
                let signs: Vec<i8> = (0..m).map(|l| if pattern >> l & 1 == 1 { -1 } else { 1 }).collect();
                let price: Vec<f64> = (0..d)
                    .map(|i| {
                        let noise: f64 = (0..m).map(|l| ss[i][l] * f64::from(signs[l]) * sq).sum();
                        nodes[parent].price[i] * (drift[i] + noise).exp()
                    })
                    .collect();
                let price_exact: Vec<Rat> = price.iter().map(|v| round_to_grid(*v)).collect();
                if price_exact.iter().any(|v| !v.is_positive()) {
                    return Err(Error::NonpositivePrice);
                }
                let id = nodes.len();
                let prob = &nodes[parent].prob * &branch;
                nodes.push(TreeNode {
                    id,
                    level: k + 1,
                    parent: Some(parent),
                    children: Vec::new(),
                    signs,
                    price,
                    price_exact,
                    branch_prob: branch.clone(),
                    prob,
                });
                nodes[parent].children.push(id);
                next.push(id);
            }
        }
        levels.push(next);
    }
    Ok(PriceTree { d, m, periods, times, nodes, levels })
}

impl PriceTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> &[usize] {
        &self.levels[self.periods]
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_empty()
    }

    /// Leaves in the subtree of `id`, in id order.
    pub fn leaves_under(&self, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(v) = stack.pop() {
            if self.is_leaf(v) {
                out.push(v);
            } else {
                stack.extend(self.nodes[v].children.iter().copied());
            }
        }
        out.sort_unstable();
        out
    }

    /// Nodes from `from` down to `to`, both included; `None` if `to` is not
    /// in the subtree of `from`.
    pub fn path_between(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let mut path = vec![to];
        let mut v = to;
        while v != from {
            v = self.nodes[v].parent?;
            path.push(v);
        }
        path.reverse();
        Some(path)
    }

    /// `P(leaf | node)`.
    pub fn conditional_prob(&self, leaf: usize, node: usize) -> Rat {
        &self.nodes[leaf].prob / &self.nodes[node].prob
    }

    /// The subtree rooted at `id` as a tree of its own, with probabilities
    /// conditioned on reaching `id`. Node order is preserved.
    pub fn subtree(&self, id: usize) -> PriceTree {
        let base = self.nodes[id].level;
        let mut map = std::collections::BTreeMap::new();
        let mut levels: Vec<Vec<usize>> = Vec::new();
        let mut frontier = vec![id];
        while !frontier.is_empty() {
            let mut lvl = Vec::new();
            for &v in &frontier {
                map.insert(v, map.len());
                lvl.push(v);
            }
            levels.push(lvl);
            frontier = frontier.iter().flat_map(|&v| self.nodes[v].children.iter().copied()).collect();
        }
        let root_prob = self.nodes[id].prob.clone();
        let mut nodes: Vec<TreeNode> = Vec::with_capacity(map.len());
        for lvl in &levels {
            for &v in lvl {
                let n = &self.nodes[v];
                nodes.push(TreeNode {
                    id: map[&v],
                    level: n.level - base,
                    parent: if v == id { None } else { n.parent.map(|p| map[&p]) },
                    children: n.children.iter().map(|c| map[c]).collect(),
                    signs: if v == id { Vec::new() } else { n.signs.clone() },
                    price: n.price.clone(),
                    price_exact: n.price_exact.clone(),
                    branch_prob: if v == id { Rat::from_integer(1.into()) } else { n.branch_prob.clone() },
                    prob: &n.prob / &root_prob,
                });
            }
        }
        let levels = levels.into_iter().map(|l| l.into_iter().map(|v| map[&v]).collect()).collect();
        PriceTree {
            d: self.d,
            m: self.m,
            periods: self.periods - base,
            times: self.times[base..].to_vec(),
            nodes,
            levels,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ClaimKind {
    /// Delivers a fixed vector of physical units.
    ConstantPhysical(Vec<Rat>),
    /// Pays `max(Sⁱ_T − K, 0)` in the numéraire; `asset` is 1-based.
    VanillaCall { asset: usize, strike: Rat },
    /// Pays `Σ w_j S^j_T` in the numéraire.
    LinearBasket(Vec<Rat>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Claim {
    pub kind: ClaimKind,
    pub lipschitz: Rat,
}

impl Claim {
    pub fn constant_physical(v: Vec<Rat>) -> Self {
        Self { kind: ClaimKind::ConstantPhysical(v), lipschitz: Rat::from_integer(1.into()) }
    }

    pub fn vanilla_call(d: usize, asset: usize, strike: Rat) -> Result<Self> {
        if !(2..=d).contains(&asset) {
            return Err(Error::InvalidClaim(format!("call asset must be in 2..={d}, got {asset}")));
        }
        if !strike.is_positive() {
            return Err(Error::InvalidClaim("strike must be positive".into()));
        }
        Ok(Self { kind: ClaimKind::VanillaCall { asset, strike }, lipschitz: Rat::from_integer(1.into()) })
    }

    /// `L = max(1, Σ|w|)`.
    pub fn linear_basket(weights: Vec<Rat>) -> Self {
        let sum = weights.iter().fold(Rat::zero(), |a, w| a + w.abs());
        let one = Rat::from_integer(1.into());
        let lipschitz = if sum > one { sum } else { one };
        Self { kind: ClaimKind::LinearBasket(weights), lipschitz }
    }

    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            ClaimKind::ConstantPhysical(v) | ClaimKind::LinearBasket(v) => Some(v.len()),
            ClaimKind::VanillaCall { .. } => None,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if let Some(n) = self.dim() {
            if n != d {
                return Err(Error::InvalidClaim(format!("claim vector has length {n}, expected {d}")));
            }
        }
        if let ClaimKind::VanillaCall { asset, .. } = &self.kind {
            if !(2..=d).contains(asset) {
                return Err(Error::InvalidClaim(format!("call asset must be in 2..={d}")));
            }
        }
        if self.lipschitz < Rat::from_integer(1.into()) {
            return Err(Error::InvalidClaim("Lipschitz constant must be at least 1".into()));
        }
        Ok(())
    }

    /// Payoff in physical units at terminal prices `s`.
    pub fn payoff_exact(&self, s: &[Rat]) -> Result<Vec<Rat>> {
        if s.iter().any(|v| !v.is_positive()) {
            return Err(Error::NonpositivePrice);
        }
        self.validate(s.len())?;
        let mut out = vec![Rat::zero(); s.len()];
        match &self.kind {
            ClaimKind::ConstantPhysical(v) => out.clone_from(v),
            ClaimKind::VanillaCall { asset, strike } => {
                let intrinsic = &s[asset - 1] - strike;
                if intrinsic.is_positive() {
                    out[0] = intrinsic / &s[0];
                }
            }
            ClaimKind::LinearBasket(w) => {
                out[0] = w.iter().zip(s).fold(Rat::zero(), |a, (w, s)| a + w * s) / &s[0];
            }
        }
        Ok(out)
    }

    pub fn payoff_f64(&self, s: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; s.len()];
        match &self.kind {
            ClaimKind::ConstantPhysical(v) => {
                for (o, x) in out.iter_mut().zip(v) {
                    *o = ratgeom::rat_to_f64(x);
                }
            }
            ClaimKind::VanillaCall { asset, strike } => {
                out[0] = (s[asset - 1] - ratgeom::rat_to_f64(strike)).max(0.0) / s[0];
            }
            ClaimKind::LinearBasket(w) => {
                out[0] = w.iter().zip(s).map(|(w, s)| ratgeom::rat_to_f64(w) * s).sum::<f64>() / s[0];
            }
        }
        out
    }
}
