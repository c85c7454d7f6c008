//! Transaction-cost cones.
//!
//! Assets are indexed from 0 internally, asset 0 being the numéraire; error
//! messages and serialized output use 1-based indices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratgeom::{
    diag_scale, dot, rat_from_f64, rat_from_f64_simplest, rat_to_f64, simplest_between, LinearProgram, Polyhedron, Rat, Relation,
};
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeMatrix {
    mu: Vec<Vec<Rat>>,
}

impl ExchangeMatrix {
    /// Validates range, diagonal and the triangle inequality
    /// `1 + μ^{ij} ≤ (1 + μ^{ik})(1 + μ^{kj})`.
    pub fn new(mu: Vec<Vec<Rat>>) -> Result<Self> {
        let d = mu.len();
        if d < 2 {
            return Err(Error::InvalidCostMatrix(format!("need at least 2 assets, got {d}")));
        }
        for (i, row) in mu.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidCostMatrix(format!("row {} has length {}, expected {d}", i + 1, row.len())));
            }
            for (j, x) in row.iter().enumerate() {
                if i == j && !x.is_zero() {
                    return Err(Error::InvalidCostMatrix(format!("diagonal entry ({0},{0}) must be 0", i + 1)));
                }
                if x.is_negative() || *x >= Rat::one() {
                    return Err(Error::InvalidCostMatrix(format!("entry ({},{}) = {x} outside [0,1)", i + 1, j + 1)));
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    if i == j || j == k || i == k {
                        continue;
                    }
                    let lhs = Rat::one() + &mu[i][j];
                    let rhs = (Rat::one() + &mu[i][k]) * (Rat::one() + &mu[k][j]);
                    if lhs > rhs {
                        return Err(Error::InvalidCostMatrix(format!(
                            "triangle inequality fails for ({},{}) via {}",
                            i + 1,
                            j + 1,
                            k + 1
                        )));
                    }
                }
            }
        }
        Ok(Self { mu })
    }

    /// `μ^{ij} = λ` off the diagonal.
    pub fn constant(d: usize, lambda: Rat) -> Result<Self> {
        let mu = (0..d)
            .map(|i| (0..d).map(|j| if i == j { Rat::zero() } else { lambda.clone() }).collect())
            .collect();
        Self::new(mu)
    }

    pub fn from_strings(rows: &[Vec<String>]) -> Result<Self> {
        let mu = rows
            .iter()
            .map(|r| r.iter().map(|s| ratgeom::parse_rat(s)).collect::<std::result::Result<Vec<_>, _>>())
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(mu)
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self, i: usize, j: usize) -> &Rat {
        &self.mu[i][j]
    }

    pub fn rows(&self) -> &[Vec<Rat>] {
        &self.mu
    }

    /// Entry `π^{ij}` of the exchange matrix.
    pub fn pi(&self, i: usize, j: usize) -> Rat {
        match (i, j) {
            (0, 0) => Rat::one(),
            (0, j) => Rat::one() + &self.mu[0][j],
            (i, 0) => -(Rat::one() - &self.mu[i][0]),
            (i, j) if i == j => Rat::zero(),
            (i, j) => self.mu[i][j].clone(),
        }
    }

    pub fn pi_matrix(&self) -> Vec<Vec<Rat>> {
        let d = self.d();
        (0..d).map(|i| (0..d).map(|j| self.pi(i, j)).collect()).collect()
    }

    /// First asset `j ≥ 1` (0-based) with `μ^{0j} + μ^{j0} = 0`.
    pub fn degenerate_asset(&self) -> Option<usize> {
        (1..self.d()).find(|&j| (&self.mu[0][j] + &self.mu[j][0]).is_zero())
    }

    /// Ordered pairs `(i, j)`, `i ≠ j`, in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let d = self.d();
        (0..d).flat_map(|i| (0..d).filter(move |&j| j != i).map(move |j| (i, j))).collect()
    }

    /// `g^{ij}`: the position change from moving one unit of value from
    /// asset `i` into asset `j`, in numéraire units.
    pub fn generator(&self, i: usize, j: usize) -> Vec<Rat> {
        let mut g = vec![Rat::zero(); self.d()];
        g[0] = self.pi(i, j);
        if i != 0 {
            g[i] += Rat::one();
        }
        if j != 0 {
            g[j] -= Rat::one();
        }
        g
    }

    pub fn generators(&self) -> Vec<Vec<Rat>> {
        self.pairs().into_iter().map(|(i, j)| self.generator(i, j)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SolvencyConeSpec {
    pub exchange: ExchangeMatrix,
    /// `g^{ij}` in the order of [`ExchangeMatrix::pairs`].
    pub generators: Vec<Vec<Rat>>,
    /// `K(Π)` with canonical H- and V-representations.
    pub cone: Polyhedron,
    /// Canonical dual generators: the inner normals of `K(Π)`.
    pub dual_generators: Vec<Vec<Rat>>,
    /// Dual generators scaled to unit Euclidean length, in floating point.
    pub unit_normals: Vec<Vec<f64>>,
    pub degenerate: bool,
}

pub fn build_cone(exchange: ExchangeMatrix, allow_degenerate: bool) -> Result<SolvencyConeSpec> {
    let degenerate = exchange.degenerate_asset();
    if let (Some(j), false) = (degenerate, allow_degenerate) {
        return Err(Error::DegenerateCone { asset: j + 1 });
    }
    let d = exchange.d();
    let generators = exchange.generators();
    let cone = Polyhedron::cone(d, &generators)?;
    let dual_generators: Vec<Vec<Rat>> = cone.halfspaces().iter().map(|h| h.normal.clone()).collect();
    let unit_normals = dual_generators
        .iter()
        .map(|n| {
            let f: Vec<f64> = n.iter().map(rat_to_f64).collect();
            let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            f.iter().map(|x| x / norm).collect()
        })
        .collect();
    Ok(SolvencyConeSpec { exchange, generators, cone, dual_generators, unit_normals, degenerate: degenerate.is_some() })
}

impl SolvencyConeSpec {
    pub fn d(&self) -> usize {
        self.exchange.d()
    }

    /// `diag(y)⁻¹ g^{ij}` for every pair.
    pub fn physical_generators(&self, y: &[Rat]) -> Result<Vec<Vec<Rat>>> {
        check_prices(self.d(), y)?;
        Ok(self.generators.iter().map(|g| g.iter().zip(y).map(|(a, b)| a / b).collect()).collect())
    }

    /// Inner normals of `K̂(y)`: `diag(y)` times the dual generators of `K(Π)`.
    pub fn physical_dual_generators(&self, y: &[Rat]) -> Result<Vec<Vec<Rat>>> {
        check_prices(self.d(), y)?;
        Ok(self.dual_generators.iter().map(|n| n.iter().zip(y).map(|(a, b)| a * b).collect()).collect())
    }
}

fn check_prices(d: usize, y: &[Rat]) -> Result<()> {
    if y.len() != d {
        return Err(Error::PreconditionViolated(format!("price vector has length {}, expected {d}", y.len())));
    }
    if y.iter().any(|v| !v.is_positive()) {
        return Err(Error::NonpositivePrice);
    }
    Ok(())
}

/// Minimizes `Σ b^{ij}` over `B ∈ M^d_+` with `Σ b^{ij} g^{ij} = target`, ties
/// broken lexicographically in pair order. `None` when infeasible.
pub(crate) fn generator_weights(exchange: &ExchangeMatrix, target: &[Rat]) -> Option<Vec<Vec<Rat>>> {
    let d = exchange.d();
    let pairs = exchange.pairs();
    let gens = exchange.generators();
    let mut lp = LinearProgram::new(pairs.len());
    for k in 0..d {
        let coeffs: Vec<(usize, Rat)> =
            gens.iter().enumerate().filter(|(_, g)| !g[k].is_zero()).map(|(v, g)| (v, g[k].clone())).collect();
        lp.add_constraint(coeffs, Relation::Eq, target[k].clone());
    }
    let mut objectives = vec![(0..pairs.len()).map(|v| (v, Rat::one())).collect::<Vec<_>>()];
    objectives.extend((0..pairs.len()).map(|v| vec![(v, Rat::one())]));
    let sol = lp.solve_lexicographic(&objectives).solution()?;
    let mut b = vec![vec![Rat::zero(); d]; d];
    for ((i, j), x) in pairs.into_iter().zip(sol.x) {
        b[i][j] = x;
    }
    Some(b)
}

/// Farkas witness: `B ∈ M^d_+` with `⟨B, Π⟩ = α¹` and
/// `Σ_j (b^{ij} − b^{ji}) = α^i` for `i ≥ 2`.
pub fn decompose(spec: &SolvencyConeSpec, alpha: &[Rat]) -> Result<Vec<Vec<Rat>>> {
    if alpha.len() != spec.d() {
        return Err(Error::PreconditionViolated(format!("alpha has length {}, expected {}", alpha.len(), spec.d())));
    }
    if alpha.iter().any(Signed::is_negative) {
        return Err(Error::PreconditionViolated("alpha must be componentwise nonnegative".into()));
    }
    generator_weights(&spec.exchange, alpha)
        .ok_or_else(|| Error::Infeasible("no nonnegative transfer matrix reproduces alpha".into()))
}

/// `K̂(y) = diag(y)⁻¹ K(Π)`.
pub fn physical_cone(spec: &SolvencyConeSpec, y: &[Rat]) -> Result<Polyhedron> {
    check_prices(spec.d(), y)?;
    let inv: Vec<Rat> = y.iter().map(|v| v.recip()).collect();
    Ok(diag_scale(&spec.cone, &inv)?)
}

/// Dual membership through the ratio inequalities
/// `(1 − μ^{i1}) z¹/y¹ ≤ zⁱ/yⁱ ≤ (1 + μ^{1i}) z¹/y¹` and
/// `z^j/y^j − zⁱ/yⁱ ≤ μ^{ij} z¹/y¹`.
pub fn dual_membership(spec: &SolvencyConeSpec, y: &[Rat], z: &[Rat]) -> Result<bool> {
    check_prices(spec.d(), y)?;
    if z.len() != spec.d() {
        return Err(Error::PreconditionViolated("z has the wrong length".into()));
    }
    let ex = &spec.exchange;
    let r: Vec<Rat> = z.iter().zip(y).map(|(a, b)| a / b).collect();
    let d = spec.d();
    for i in 1..d {
        if r[i] < (Rat::one() - ex.mu(i, 0)) * &r[0] || r[i] > (Rat::one() + ex.mu(0, i)) * &r[0] {
            return Ok(false);
        }
        for j in 1..d {
            if i != j && &r[j] - &r[i] > ex.mu(i, j) * &r[0] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Dual membership straight from the definition: `z · ĝ ≥ 0` for every
/// generator `ĝ` of `K̂(y)`.
pub fn dual_membership_by_generators(spec: &SolvencyConeSpec, y: &[Rat], z: &[Rat]) -> Result<bool> {
    Ok(spec.physical_generators(y)?.iter().all(|g| !dot(g, z).is_negative()))
}

/// `𝒦̂^ε(y) = ∩_n {x : (diag(y) wⁿ)·x ≥ −ε |x|_∞}`.
#[derive(Debug, Clone)]
pub struct EpsCone {
    y: Vec<f64>,
    eps: f64,
    unit_normals: Vec<Vec<f64>>,
    /// Exact dual generators the unit normals were derived from.
    directions: Vec<Vec<Rat>>,
}

/// Relative accuracy of the rational stand-in for `1/|n|` used when the
/// ε-cone is needed as exact polyhedra.
pub const EPS_NORMAL_SCALE_TOL: f64 = 1e-10;

/// Comparison slack for the floating-point membership test.
pub const EPS_MEMBERSHIP_SLACK: f64 = 1e-12;

impl EpsCone {
    pub fn new(spec: &SolvencyConeSpec, y: &[f64], eps: f64) -> Result<Self> {
        if y.len() != spec.d() {
            return Err(Error::PreconditionViolated("price vector has the wrong length".into()));
        }
        if y.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NonpositivePrice);
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::PreconditionViolated(format!("eps must be finite and >= 0, got {eps}")));
        }
        Ok(Self { y: y.to_vec(), eps, unit_normals: spec.unit_normals.clone(), directions: spec.dual_generators.clone() })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// `diag(y) wⁿ` as rationals: the exact dual generator `n` times the
    /// simplest rational within [`EPS_NORMAL_SCALE_TOL`] of `1/|n|`, which
    /// keeps the entries short. `y` is read exactly.
    pub fn scaled_normals_exact(&self) -> Vec<Vec<Rat>> {
        let y: Vec<Rat> = self.y.iter().map(|v| rat_from_f64(*v).expect("finite")).collect();
        self.directions
            .iter()
            .map(|n| {
                let len = n.iter().map(|v| rat_to_f64(v).powi(2)).sum::<f64>().sqrt();
                let lo = rat_from_f64((1.0 - EPS_NORMAL_SCALE_TOL) / len).expect("finite");
                let hi = rat_from_f64((1.0 + EPS_NORMAL_SCALE_TOL) / len).expect("finite");
                let q = simplest_between(&lo, &hi);
                n.iter().zip(&y).map(|(a, b)| a * b * &q).collect()
            })
            .collect()
    }

    /// The `2d` polyhedral cones whose union is `𝒦̂^ε(y)`: piece `(i, s)` is
    /// `{x : (diag(y)wⁿ + s ε e_i)·x ≥ 0 ∀n}`. Returned as inner normals, in
    /// the order `(0,+), (0,−), (1,+), …`, computed exactly from the float data.
    pub fn pieces_exact(&self) -> Vec<Vec<Vec<Rat>>> {
        let base = self.scaled_normals_exact();
        let eps = rat_from_f64_simplest(self.eps).expect("finite");
        let d = self.y.len();
        let mut out = Vec::with_capacity(2 * d);
        for i in 0..d {
            for s in [1i64, -1] {
                let shift = &eps * Rat::from_integer(s.into());
                out.push(
                    base.iter()
                        .map(|a| {
                            let mut a = a.clone();
                            a[i] += &shift;
                            a
                        })
                        .collect(),
                );
            }
        }
        out
    }
}

pub fn eps_membership(c: &EpsCone, x: &[f64]) -> bool {
    let sup = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let slack = EPS_MEMBERSHIP_SLACK * (1.0 + sup);
    c.unit_normals.iter().all(|w| {
        let lhs: f64 = w.iter().zip(&c.y).zip(x).map(|((w, y), x)| w * y * x).sum();
        lhs >= -c.eps * sup - slack
    })
}

/// Sampled check of `𝒦̂^{ε₂}(y) ⊆ 𝒦̂^{ε₁+ε₂}(y′)` for `|y − y′|₂ ≤ ε₁`.
///
/// Half the samples are nonnegative combinations of the generators of
/// `K̂(y)`; the rest are drawn uniformly from `[−1,1]^d` and kept when they
/// lie in `𝒦̂^{ε₂}(y)`, which favours points that use the ε-slack.
pub fn eps_inclusion_check(
    spec: &SolvencyConeSpec,
    y: &[f64],
    y_prime: &[f64],
    eps1: f64,
    eps2: f64,
    samples: usize,
    rng_seed: u64,
) -> Result<bool> {
    let dist = y.iter().zip(y_prime).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if y.len() != y_prime.len() || dist > eps1 {
        return Err(Error::PreconditionViolated(format!("|y - y'| = {dist} exceeds eps1 = {eps1}")));
    }
    let from = EpsCone::new(spec, y, eps2)?;
    let to = EpsCone::new(spec, y_prime, eps1 + eps2)?;
    let d = spec.d();
    let gens: Vec<Vec<f64>> = spec
        .generators
        .iter()
        .map(|g| g.iter().zip(y).map(|(a, b)| rat_to_f64(a) / b).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut checked = 0usize;
    let mut attempts = 0usize;
    while checked < samples {
        let x: Vec<f64> = if checked % 2 == 0 || attempts > 1000 * samples.max(1) {
            let mut x = vec![0.0; d];
            for g in &gens {
                let w: f64 = rng.random::<f64>();
                for (xi, gi) in x.iter_mut().zip(g) {
                    *xi += w * gi;
                }
            }
            x
        } else {
            attempts += 1;
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
            if !eps_membership(&from, &x) {
                continue;
            }
            x
        };
        checked += 1;
        if !eps_membership(&to, &x) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ratgeom::{contains_point, rat, rat_int, set_equal, VRep};

    fn tenth() -> SolvencyConeSpec {
        build_cone(ExchangeMatrix::constant(2, rat(1, 10)).unwrap(), false).unwrap()
    }

    #[test]
    fn two_asset_generators_and_duals() {
        let s = tenth();
        assert_eq!(s.generators, vec![vec![rat(11, 10), rat_int(-1)], vec![rat(-9, 10), rat_int(1)]]);
        assert_eq!(s.dual_generators, vec![vec![rat_int(1), rat(9, 10)], vec![rat_int(1), rat(11, 10)]]);
        // Proportional to (10, 9) and (10, 11).
        let n0 = (100.0f64 + 81.0).sqrt();
        assert!((s.unit_normals[0][0] - 10.0 / n0).abs() < 1e-15);
        assert!((s.unit_normals[0][1] - 9.0 / n0).abs() < 1e-15);
        let gens = Polyhedron::from_vrep(&VRep::new(2, vec![], s.generators.clone())).unwrap();
        assert!(set_equal(&gens, &s.cone).unwrap());
    }

    #[test]
    fn zero_costs_are_degenerate() {
        let ex = ExchangeMatrix::constant(2, rat_int(0)).unwrap();
        assert_eq!(build_cone(ex.clone(), false).unwrap_err(), Error::DegenerateCone { asset: 2 });
        let s = build_cone(ex, true).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.cone.lineality_dim(), 1);
    }

    #[test]
    fn cost_matrix_validation() {
        let bad = vec![
            vec![rat_int(0), rat(1, 100), rat(1, 2)],
            vec![rat(1, 100), rat_int(0), rat(1, 100)],
            vec![rat(1, 100), rat(1, 100), rat_int(0)],
        ];
        assert!(matches!(ExchangeMatrix::new(bad), Err(Error::InvalidCostMatrix(_))));
        assert!(matches!(
            ExchangeMatrix::new(vec![vec![rat_int(0), rat_int(1)], vec![rat_int(0), rat_int(0)]]),
            Err(Error::InvalidCostMatrix(_))
        ));
        for k in 1..10 {
            assert!(ExchangeMatrix::constant(4, rat(k, 10)).is_ok());
        }
    }

    #[test]
    fn decompose_examples() {
        let s = tenth();
        let b = decompose(&s, &[rat_int(1), rat_int(1)]).unwrap();
        assert_eq!(b[0][1], rat(19, 2));
        assert_eq!(b[1][0], rat(21, 2));
        assert_eq!(decompose(&s, &[rat_int(0), rat_int(0)]).unwrap(), vec![vec![rat_int(0); 2]; 2]);
        // 0.2 b = 1 with b¹² = b²¹ = b.
        let b = decompose(&s, &[rat_int(1), rat_int(0)]).unwrap();
        assert_eq!((b[0][1].clone(), b[1][0].clone()), (rat_int(5), rat_int(5)));
        assert!(matches!(decompose(&s, &[rat_int(-1), rat_int(0)]), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn physical_cone_examples() {
        let s = tenth();
        assert_eq!(physical_cone(&s, &[rat_int(1), rat_int(1)]).unwrap(), s.cone);
        let p = physical_cone(&s, &[rat_int(1), rat_int(2)]).unwrap();
        let expect = Polyhedron::cone(2, &[vec![rat(11, 10), rat(-1, 2)], vec![rat(-9, 10), rat(1, 2)]]).unwrap();
        assert_eq!(p, expect);
        assert_eq!(physical_cone(&s, &[rat_int(2), rat_int(2)]).unwrap(), s.cone);
        assert_eq!(physical_cone(&s, &[rat_int(0), rat_int(2)]).unwrap_err(), Error::NonpositivePrice);
        assert!(contains_point(&s.cone, &[rat_int(1), rat_int(0)]).unwrap());
        assert!(!contains_point(&s.cone, &[rat_int(-1), rat_int(0)]).unwrap());
    }

    #[test]
    fn dual_membership_examples() {
        let s = tenth();
        let y = [rat_int(1), rat_int(1)];
        assert!(dual_membership(&s, &y, &[rat_int(1), rat_int(1)]).unwrap());
        assert!(!dual_membership(&s, &y, &[rat_int(1), rat_int(2)]).unwrap());
        assert!(dual_membership(&s, &y, &[rat_int(0), rat_int(0)]).unwrap());
        for z in [[rat_int(1), rat(9, 10)], [rat_int(1), rat(11, 10)], [rat_int(1), rat(111, 100)]] {
            assert_eq!(dual_membership(&s, &y, &z).unwrap(), dual_membership_by_generators(&s, &y, &z).unwrap());
        }
    }

    #[test]
    fn eps_membership_examples() {
        let s = tenth();
        let c0 = EpsCone::new(&s, &[1.0, 1.0], 0.0).unwrap();
        assert!(eps_membership(&c0, &[0.0, 0.0]));
        assert!(eps_membership(&c0, &[1.0, 0.0]));
        assert!(!eps_membership(&c0, &[-1.0, 0.0]));
        // ε = 1/2, x = (−1, 0): w·x = −10/√181 ≈ −0.743 < −0.5, so excluded.
        let c = EpsCone::new(&s, &[1.0, 1.0], 0.5).unwrap();
        assert!(!eps_membership(&c, &[-1.0, 0.0]));
        // x = (−1, 1): both normals give ≥ −0.1/|w| > −0.5.
        assert!(eps_membership(&c, &[-1.0, 1.0]));
        assert!(eps_membership(&c, &[-1.0, 2.0]));
    }

    #[test]
    fn eps_pieces_cover_the_eps_cone() {
        let s = tenth();
        let c = EpsCone::new(&s, &[1.0, 1.5], 0.2).unwrap();
        let pieces = c.pieces_exact();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            let xr: Vec<Rat> = x.iter().map(|v| rat_from_f64(*v).unwrap()).collect();
            let in_union =
                pieces.iter().any(|p| p.iter().all(|a| !dot(a, &xr).is_negative()));
            assert_eq!(in_union, eps_membership(&c, &x), "at {x:?}");
        }
    }

    #[test]
    fn inclusion_examples() {
        let s = tenth();
        assert!(eps_inclusion_check(&s, &[1.0, 1.0], &[1.0, 1.0], 0.0, 0.3, 200, 1).unwrap());
        assert!(eps_inclusion_check(&s, &[1.0, 1.0], &[1.0, 1.04], 0.05, 0.0, 1000, 2).unwrap());
        assert!(matches!(
            eps_inclusion_check(&s, &[1.0, 1.0], &[1.0, 1.2], 0.05, 0.0, 10, 2),
            Err(Error::PreconditionViolated(_))
        ));
    }
}
