//! Polyhedra with both representations held in canonical form.
//!
//! Every constructor runs the double description method twice (H to V and
//! back, or V to H and back), which both fills in the missing representation
//! and strips redundant rows and generators. Canonical form:
//!
//! * the lineality space is emitted as an RREF basis, each line as a `±` ray
//!   pair, and every other vertex and ray is projected onto its orthogonal
//!   complement;
//! * implicit equalities are emitted as RREF rows (as `±` inequality pairs),
//!   and the remaining inequalities are projected onto the orthogonal
//!   complement of the equality space;
//! * rays and normals are scaled so the first nonzero entry is `±1`;
//! * everything is sorted lexicographically and deduplicated.
//!
//! Two polyhedra describe the same set iff their canonical forms coincide,
//! but [`set_equal`] still checks mutual containment so it can be used on
//! representations built elsewhere.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::dd::{cone_generators, IVec};
use crate::error::GeomError;
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::rat::{dot, is_zero_vector, scale_first_nonzero, to_integer_vector, Rat};

/// Largest ambient dimension accepted by the conversions.
pub const MAX_DIM: usize = 6;

/// `normal · x ≥ offset`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Halfspace {
    pub normal: Vec<Rat>,
    pub offset: Rat,
}

impl Halfspace {
    pub fn new(normal: Vec<Rat>, offset: Rat) -> Self {
        Self { normal, offset }
    }

    pub fn holds(&self, x: &[Rat]) -> bool {
        dot(&self.normal, x) >= self.offset
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HRep {
    pub dim: usize,
    pub rows: Vec<Halfspace>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VRep {
    pub dim: usize,
    pub vertices: Vec<Vec<Rat>>,
    pub rays: Vec<Vec<Rat>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Representation {
    H(HRep),
    V(VRep),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polyhedron {
    dim: usize,
    h: HRep,
    v: VRep,
}

fn check_dim(dim: usize) -> Result<(), GeomError> {
    if dim == 0 {
        return Err(GeomError::ZeroDimension);
    }
    if dim > MAX_DIM {
        return Err(GeomError::DimensionTooLarge { dim, max: MAX_DIM });
    }
    Ok(())
}

fn check_len(dim: usize, v: &[Rat]) -> Result<(), GeomError> {
    if v.len() != dim {
        return Err(GeomError::DimensionMismatch { expected: dim, found: v.len() });
    }
    Ok(())
}

fn same_dim(a: usize, b: usize) -> Result<(), GeomError> {
    if a != b {
        return Err(GeomError::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

impl HRep {
    pub fn new(dim: usize, rows: Vec<Halfspace>) -> Self {
        Self { dim, rows }
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        check_dim(self.dim)?;
        for (i, row) in self.rows.iter().enumerate() {
            check_len(self.dim, &row.normal)?;
            if is_zero_vector(&row.normal) {
                return Err(GeomError::ZeroNormal(i));
            }
        }
        Ok(())
    }
}

impl VRep {
    pub fn new(dim: usize, vertices: Vec<Vec<Rat>>, rays: Vec<Vec<Rat>>) -> Self {
        Self { dim, vertices, rays }
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        check_dim(self.dim)?;
        for v in &self.vertices {
            check_len(self.dim, v)?;
        }
        for (i, r) in self.rays.iter().enumerate() {
            check_len(self.dim, r)?;
            if is_zero_vector(r) {
                return Err(GeomError::ZeroRay(i));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Exact linear algebra helpers.

/// Reduced row echelon form; zero rows are dropped.
pub(crate) fn rref(mut rows: Vec<Vec<Rat>>) -> Vec<Vec<Rat>> {
    let ncols = rows.first().map_or(0, Vec::len);
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..rows.len()).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let lead = rows[r][c].clone();
        for x in rows[r].iter_mut() {
            *x = &*x / &lead;
        }
        let pivot = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (x, p) in row.iter_mut().zip(&pivot) {
                if !p.is_zero() {
                    *x -= &f * p;
                }
            }
        }
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    rows
}

pub fn rank(rows: &[Vec<Rat>]) -> usize {
    rref(rows.to_vec()).len()
}

/// Gram–Schmidt without normalization.
fn orthogonal_basis(rows: &[Vec<Rat>]) -> Vec<Vec<Rat>> {
    let mut basis: Vec<Vec<Rat>> = Vec::new();
    for r in rows {
        let w = project_out(r, &basis);
        if !is_zero_vector(&w) {
            basis.push(w);
        }
    }
    basis
}

/// Orthogonal projection onto the complement of `span(basis)`; `basis` must be
/// pairwise orthogonal.
fn project_out(v: &[Rat], basis: &[Vec<Rat>]) -> Vec<Rat> {
    let mut w = v.to_vec();
    for q in basis {
        let num = dot(&w, q);
        if num.is_zero() {
            continue;
        }
        let f = num / dot(q, q);
        for (x, y) in w.iter_mut().zip(q) {
            *x -= &f * y;
        }
    }
    w
}

fn to_rat_vec(v: &[BigInt]) -> Vec<Rat> {
    v.iter().map(|x| Rat::from_integer(x.clone())).collect()
}

fn positive_multiple(w: &[Rat], base: &[Rat]) -> bool {
    let Some(i) = base.iter().position(|x| !x.is_zero()) else {
        return false;
    };
    let f = &w[i] / &base[i];
    f.is_positive() && w.iter().zip(base).all(|(x, y)| *x == &f * y)
}

fn sort_dedup<T: Ord>(v: &mut Vec<T>) {
    v.sort();
    v.dedup();
}

fn negated(v: &[Rat]) -> Vec<Rat> {
    v.iter().map(|x| -x).collect()
}

// ---------------------------------------------------------------------------
// Conversions.

struct Generators {
    vertices: Vec<Vec<Rat>>,
    rays: Vec<Vec<Rat>>,
    lines: Vec<Vec<Rat>>,
}

/// `None` when the inequalities are infeasible.
fn h_to_generators(dim: usize, rows: &[Halfspace]) -> Option<Generators> {
    let mut cons: Vec<IVec> = Vec::with_capacity(rows.len() + 1);
    let mut x0 = vec![BigInt::zero(); dim + 1];
    x0[0] = BigInt::one();
    cons.push(x0);
    for row in rows {
        let mut h = Vec::with_capacity(dim + 1);
        h.push(-row.offset.clone());
        h.extend(row.normal.iter().cloned());
        cons.push(to_integer_vector(&h));
    }
    let g = cone_generators(dim + 1, &cons);
    let mut out = Generators { vertices: Vec::new(), rays: Vec::new(), lines: Vec::new() };
    for l in &g.lineality {
        debug_assert!(l[0].is_zero());
        out.lines.push(to_rat_vec(&l[1..]));
    }
    for r in &g.rays {
        if r[0].is_positive() {
            let s = Rat::from_integer(r[0].clone());
            out.vertices.push(r[1..].iter().map(|x| Rat::from_integer(x.clone()) / &s).collect());
        } else {
            out.rays.push(to_rat_vec(&r[1..]));
        }
    }
    if out.vertices.is_empty() {
        None
    } else {
        Some(out)
    }
}

struct Facets {
    /// Rows `(c, a)` meaning `c + a·x = 0`.
    equalities: Vec<Vec<Rat>>,
    /// Rows `(c, a)` meaning `c + a·x ≥ 0`.
    inequalities: Vec<Vec<Rat>>,
}

/// Facets of a nonempty polyhedron given by generators.
fn generators_to_h(dim: usize, vertices: &[Vec<Rat>], rays: &[Vec<Rat>]) -> Facets {
    debug_assert!(!vertices.is_empty());
    let mut cons: Vec<IVec> = Vec::with_capacity(vertices.len() + rays.len());
    for v in vertices {
        let mut h = Vec::with_capacity(dim + 1);
        h.push(Rat::one());
        h.extend(v.iter().cloned());
        cons.push(to_integer_vector(&h));
    }
    for r in rays {
        let mut h = Vec::with_capacity(dim + 1);
        h.push(Rat::zero());
        h.extend(r.iter().cloned());
        cons.push(to_integer_vector(&h));
    }
    let g = cone_generators(dim + 1, &cons);
    Facets {
        equalities: g.lineality.iter().map(|v| to_rat_vec(v)).collect(),
        inequalities: g.rays.iter().map(|v| to_rat_vec(v)).collect(),
    }
}

fn canonical_h(dim: usize, facets: &Facets) -> HRep {
    // Work in (a, c) column order so RREF pivots on normal coordinates first.
    let reorder = |w: &Vec<Rat>| -> Vec<Rat> {
        let mut out: Vec<Rat> = w[1..].to_vec();
        out.push(w[0].clone());
        out
    };
    let eqs = rref(facets.equalities.iter().map(reorder).collect());
    let basis = orthogonal_basis(&eqs);
    // The always-true row `0 ≥ −1`, modulo the equalities.
    let mut trivial = vec![Rat::zero(); dim + 1];
    trivial[dim] = Rat::one();
    let trivial = project_out(&trivial, &basis);
    let mut rows = Vec::new();
    for w in &facets.inequalities {
        let w = project_out(&reorder(w), &basis);
        if is_zero_vector(&w[..dim]) || positive_multiple(&w, &trivial) {
            continue;
        }
        let lead = w[..dim].iter().find(|x| !x.is_zero()).unwrap().abs();
        let w: Vec<Rat> = w.iter().map(|x| x / &lead).collect();
        rows.push(Halfspace::new(w[..dim].to_vec(), -w[dim].clone()));
    }
    for e in &eqs {
        debug_assert!(!is_zero_vector(&e[..dim]));
        let normal = e[..dim].to_vec();
        let offset = -e[dim].clone();
        rows.push(Halfspace::new(negated(&normal), -offset.clone()));
        rows.push(Halfspace::new(normal, offset));
    }
    sort_dedup(&mut rows);
    HRep::new(dim, rows)
}

fn canonical_v(dim: usize, g: &Generators) -> VRep {
    let lines = rref(g.lines.clone());
    let basis = orthogonal_basis(&lines);
    let mut vertices: Vec<Vec<Rat>> = g.vertices.iter().map(|v| project_out(v, &basis)).collect();
    let mut rays = Vec::new();
    for r in &g.rays {
        let w = project_out(r, &basis);
        if !is_zero_vector(&w) {
            rays.push(scale_first_nonzero(&w));
        }
    }
    for l in &lines {
        rays.push(negated(l));
        rays.push(l.clone());
    }
    sort_dedup(&mut vertices);
    sort_dedup(&mut rays);
    VRep::new(dim, vertices, rays)
}

fn empty_h(dim: usize) -> HRep {
    let mut e = vec![Rat::zero(); dim];
    e[0] = Rat::one();
    let mut rows = vec![Halfspace::new(negated(&e), Rat::zero()), Halfspace::new(e, Rat::one())];
    rows.sort();
    HRep::new(dim, rows)
}

// ---------------------------------------------------------------------------
// Construction.

impl Polyhedron {
    /// Builds from inequalities. Zero rows are allowed and mean the whole
    /// space.
    pub fn from_hrep(h: &HRep) -> Result<Self, GeomError> {
        h.validate()?;
        Ok(Self::from_rows_unchecked(h.dim, &h.rows))
    }

    /// Builds from generators. With no vertices and some rays the generators
    /// are read as a cone at the origin; with neither the set is empty.
    pub fn from_vrep(v: &VRep) -> Result<Self, GeomError> {
        v.validate()?;
        if v.vertices.is_empty() {
            if v.rays.is_empty() {
                return Ok(Self::empty(v.dim));
            }
            return Ok(Self::from_generators_unchecked(v.dim, &[vec![Rat::zero(); v.dim]], &v.rays));
        }
        Ok(Self::from_generators_unchecked(v.dim, &v.vertices, &v.rays))
    }

    fn from_rows_unchecked(dim: usize, rows: &[Halfspace]) -> Self {
        match h_to_generators(dim, rows) {
            None => Self::empty(dim),
            Some(g) => {
                let v = canonical_v(dim, &g);
                let h = canonical_h(dim, &generators_to_h(dim, &v.vertices, &v.rays));
                Self { dim, h, v }
            }
        }
    }

    fn from_generators_unchecked(dim: usize, vertices: &[Vec<Rat>], rays: &[Vec<Rat>]) -> Self {
        let h = canonical_h(dim, &generators_to_h(dim, vertices, rays));
        let g = h_to_generators(dim, &h.rows).expect("generated polyhedron is nonempty");
        let v = canonical_v(dim, &g);
        Self { dim, h, v }
    }

    pub fn empty(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self { dim, h: empty_h(dim), v: VRep::new(dim, Vec::new(), Vec::new()) }
    }

    pub fn whole_space(dim: usize) -> Self {
        Self::from_rows_unchecked(dim, &[])
    }

    pub fn point(x: &[Rat]) -> Result<Self, GeomError> {
        Self::from_vrep(&VRep::new(x.len(), vec![x.to_vec()], Vec::new()))
    }

    /// Conic hull of `rays`; `{0}` when `rays` is empty.
    pub fn cone(dim: usize, rays: &[Vec<Rat>]) -> Result<Self, GeomError> {
        Self::from_vrep(&VRep::new(dim, vec![vec![Rat::zero(); dim]], rays.to_vec()))
    }

    pub fn orthant(dim: usize) -> Result<Self, GeomError> {
        let rows = (0..dim)
            .map(|i| {
                let mut e = vec![Rat::zero(); dim];
                e[i] = Rat::one();
                Halfspace::new(e, Rat::zero())
            })
            .collect();
        Self::from_hrep(&HRep::new(dim, rows))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hrep(&self) -> &HRep {
        &self.h
    }

    pub fn vrep(&self) -> &VRep {
        &self.v
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.h.rows
    }

    pub fn vertices(&self) -> &[Vec<Rat>] {
        &self.v.vertices
    }

    pub fn rays(&self) -> &[Vec<Rat>] {
        &self.v.rays
    }

    pub fn is_empty(&self) -> bool {
        self.v.vertices.is_empty()
    }

    /// True when the polyhedron is a cone with apex at the origin.
    pub fn is_cone(&self) -> bool {
        !self.is_empty() && self.h.rows.iter().all(|r| r.offset.is_zero())
    }

    /// Dimension of the largest linear subspace contained in the set.
    pub fn lineality_dim(&self) -> usize {
        let rays = &self.v.rays;
        rays.iter().filter(|r| rays.contains(&negated(r))).count() / 2
    }

    pub fn contains_point(&self, x: &[Rat]) -> Result<bool, GeomError> {
        check_len(self.dim, x)?;
        Ok(self.h.rows.iter().all(|r| r.holds(x)))
    }

    /// True when `r` is in the recession cone. The empty set has none.
    pub fn contains_ray(&self, r: &[Rat]) -> Result<bool, GeomError> {
        check_len(self.dim, r)?;
        if self.is_empty() {
            return Ok(false);
        }
        Ok(self.h.rows.iter().all(|row| !dot(&row.normal, r).is_negative()))
    }
}

// ---------------------------------------------------------------------------
// Set algebra.

pub fn dd_convert(rep: &Representation) -> Result<Representation, GeomError> {
    match rep {
        // No rows is the whole space, which is what V to H produces for it.
        Representation::H(h) => Ok(Representation::V(Polyhedron::from_hrep(h)?.v)),
        Representation::V(v) => {
            if v.vertices.is_empty() && v.rays.is_empty() {
                return Err(GeomError::EmptyInput("generators"));
            }
            Ok(Representation::H(Polyhedron::from_vrep(v)?.h))
        }
    }
}

impl Representation {
    pub fn dim(&self) -> usize {
        match self {
            Representation::H(h) => h.dim,
            Representation::V(v) => v.dim,
        }
    }

    pub fn to_polyhedron(&self) -> Result<Polyhedron, GeomError> {
        match self {
            Representation::H(h) => Polyhedron::from_hrep(h),
            Representation::V(v) => Polyhedron::from_vrep(v),
        }
    }
}

pub fn minkowski_sum(a: &Polyhedron, b: &Polyhedron) -> Result<Polyhedron, GeomError> {
    same_dim(a.dim, b.dim)?;
    if a.is_empty() || b.is_empty() {
        return Ok(Polyhedron::empty(a.dim));
    }
    let mut vertices = Vec::with_capacity(a.vertices().len() * b.vertices().len());
    for u in a.vertices() {
        for w in b.vertices() {
            vertices.push(u.iter().zip(w).map(|(x, y)| x + y).collect::<Vec<Rat>>());
        }
    }
    let mut rays = a.rays().to_vec();
    rays.extend(b.rays().iter().cloned());
    Ok(Polyhedron::from_generators_unchecked(a.dim, &vertices, &rays))
}

pub fn intersect(a: &Polyhedron, b: &Polyhedron) -> Result<Polyhedron, GeomError> {
    same_dim(a.dim, b.dim)?;
    intersect_all(a.dim, [a, b])
}

/// Intersection of any number of polyhedra; the whole space for none.
pub fn intersect_all<'a, I>(dim: usize, sets: I) -> Result<Polyhedron, GeomError>
where
    I: IntoIterator<Item = &'a Polyhedron>,
{
    check_dim(dim)?;
    let mut rows = Vec::new();
    for p in sets {
        same_dim(dim, p.dim)?;
        if p.is_empty() {
            return Ok(Polyhedron::empty(dim));
        }
        rows.extend(p.h.rows.iter().cloned());
    }
    sort_dedup(&mut rows);
    Ok(Polyhedron::from_rows_unchecked(dim, &rows))
}

pub fn contains_point(p: &Polyhedron, x: &[Rat]) -> Result<bool, GeomError> {
    p.contains_point(x)
}

pub fn contains_ray(p: &Polyhedron, r: &[Rat]) -> Result<bool, GeomError> {
    p.contains_ray(r)
}

/// `a ⊆ b`, checked on the generators of `a` against the inequalities of `b`.
pub fn is_subset(a: &Polyhedron, b: &Polyhedron) -> Result<bool, GeomError> {
    same_dim(a.dim, b.dim)?;
    if a.is_empty() {
        return Ok(true);
    }
    if b.is_empty() {
        return Ok(false);
    }
    for v in a.vertices() {
        if !b.contains_point(v)? {
            return Ok(false);
        }
    }
    for r in a.rays() {
        if !b.contains_ray(r)? {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn set_equal(a: &Polyhedron, b: &Polyhedron) -> Result<bool, GeomError> {
    Ok(is_subset(a, b)? && is_subset(b, a)?)
}

pub fn translate(p: &Polyhedron, t: &[Rat]) -> Result<Polyhedron, GeomError> {
    check_len(p.dim, t)?;
    if p.is_empty() {
        return Ok(p.clone());
    }
    let vertices: Vec<Vec<Rat>> =
        p.vertices().iter().map(|v| v.iter().zip(t).map(|(x, y)| x + y).collect()).collect();
    Ok(Polyhedron::from_generators_unchecked(p.dim, &vertices, p.rays()))
}

/// `c · P` for `c > 0`.
pub fn scale(p: &Polyhedron, c: &Rat) -> Result<Polyhedron, GeomError> {
    if !c.is_positive() {
        return Err(GeomError::NonPositiveScale);
    }
    if p.is_empty() {
        return Ok(p.clone());
    }
    let vertices: Vec<Vec<Rat>> = p.vertices().iter().map(|v| v.iter().map(|x| x * c).collect()).collect();
    Ok(Polyhedron::from_generators_unchecked(p.dim, &vertices, p.rays()))
}

/// `−P`.
pub fn negate(p: &Polyhedron) -> Polyhedron {
    if p.is_empty() {
        return p.clone();
    }
    let vertices: Vec<Vec<Rat>> = p.vertices().iter().map(|v| negated(v)).collect();
    let rays: Vec<Vec<Rat>> = p.rays().iter().map(|r| negated(r)).collect();
    Polyhedron::from_generators_unchecked(p.dim, &vertices, &rays)
}

/// Image under `x ↦ diag(s) x`, all `s_i > 0`.
pub fn diag_scale(p: &Polyhedron, s: &[Rat]) -> Result<Polyhedron, GeomError> {
    check_len(p.dim, s)?;
    if s.iter().any(|x| !x.is_positive()) {
        return Err(GeomError::NonPositiveScale);
    }
    if p.is_empty() {
        return Ok(p.clone());
    }
    let apply = |v: &Vec<Rat>| -> Vec<Rat> { v.iter().zip(s).map(|(x, y)| x * y).collect() };
    let vertices: Vec<Vec<Rat>> = p.vertices().iter().map(apply).collect();
    let rays: Vec<Vec<Rat>> = p.rays().iter().map(apply).collect();
    Ok(Polyhedron::from_generators_unchecked(p.dim, &vertices, &rays))
}

/// Membership decided by LP feasibility over the generators alone:
/// `x = Σ λ_i v_i + Σ ρ_j r_j` with `λ, ρ ≥ 0` and `Σ λ = 1`. No vertices means
/// a cone at the origin. Independent of the double description code.
pub fn contains_point_by_generators(v: &VRep, x: &[Rat]) -> Result<bool, GeomError> {
    check_len(v.dim, x)?;
    let nv = v.vertices.len();
    let nr = v.rays.len();
    if nv == 0 && nr == 0 {
        return Ok(false);
    }
    let mut lp = LinearProgram::new(nv + nr);
    for k in 0..v.dim {
        let mut coeffs = Vec::new();
        for (i, vert) in v.vertices.iter().enumerate() {
            if !vert[k].is_zero() {
                coeffs.push((i, vert[k].clone()));
            }
        }
        for (j, ray) in v.rays.iter().enumerate() {
            if !ray[k].is_zero() {
                coeffs.push((nv + j, ray[k].clone()));
            }
        }
        lp.add_constraint(coeffs, Relation::Eq, x[k].clone());
    }
    if nv > 0 {
        lp.add_constraint((0..nv).map(|i| (i, Rat::one())).collect(), Relation::Eq, Rat::one());
    }
    Ok(!matches!(lp.solve(), LpOutcome::Infeasible))
}
