//! Incremental double description on integer homogeneous cones.
//!
//! Computes generators of `{y : a·y ≥ 0 for every constraint a}`. Lines are
//! split off first: while some lineality vector is not orthogonal to the new
//! constraint, that vector is turned into a ray and the rest of the lineality
//! basis is projected onto the constraint's kernel. Once the constraint is
//! orthogonal to the whole lineality space the usual Motzkin step runs, with
//! adjacency decided from the zero sets of the rays.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

pub(crate) type IVec = Vec<BigInt>;

#[derive(Debug, Clone, Default)]
pub(crate) struct ConeGenerators {
    pub lineality: Vec<IVec>,
    pub rays: Vec<IVec>,
}

pub(crate) fn idot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    let mut acc = BigInt::zero();
    for (x, y) in a.iter().zip(b) {
        if !x.is_zero() && !y.is_zero() {
            acc += x * y;
        }
    }
    acc
}

/// Divides by the (positive) gcd of the entries, preserving direction.
pub(crate) fn normalize(v: &mut IVec) {
    let mut g = BigInt::zero();
    for x in v.iter() {
        if !x.is_zero() {
            g = g.gcd(x);
            if g.is_one() {
                return;
            }
        }
    }
    if g.is_zero() || g.is_one() {
        return;
    }
    for x in v.iter_mut() {
        if !x.is_zero() {
            *x = &*x / &g;
        }
    }
}

/// `s·u − t·v`, gcd-normalized.
fn combine(s: &BigInt, u: &[BigInt], t: &BigInt, v: &[BigInt]) -> IVec {
    let mut out: IVec = u.iter().zip(v).map(|(x, y)| s * x - t * y).collect();
    normalize(&mut out);
    out
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(words: usize) -> Self {
        Bits(vec![0; words])
    }
    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }
    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }
    fn count(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }
    fn subset_of(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }
}

struct Ray {
    v: IVec,
    zeros: Bits,
}

pub(crate) fn cone_generators(dim: usize, constraints: &[IVec]) -> ConeGenerators {
    let mut cons: Vec<IVec> = Vec::with_capacity(constraints.len());
    for c in constraints {
        debug_assert_eq!(c.len(), dim);
        if c.iter().all(Zero::is_zero) {
            continue;
        }
        let mut c = c.clone();
        normalize(&mut c);
        if !cons.contains(&c) {
            cons.push(c);
        }
    }
    let words = cons.len().div_ceil(64).max(1);

    let mut lineality: Vec<IVec> = (0..dim)
        .map(|i| {
            let mut e = vec![BigInt::zero(); dim];
            e[i] = BigInt::one();
            e
        })
        .collect();
    let mut rays: Vec<Ray> = Vec::new();

    for (k, a) in cons.iter().enumerate() {
        if let Some(pos) = lineality.iter().position(|l| !idot(a, l).is_zero()) {
            let mut l = lineality.swap_remove(pos);
            let mut al = idot(a, &l);
            if al.is_negative() {
                for x in l.iter_mut() {
                    *x = -&*x;
                }
                al = -al;
            }
            for other in lineality.iter_mut() {
                let ao = idot(a, other);
                if !ao.is_zero() {
                    *other = combine(&al, other, &ao, &l);
                }
            }
            for r in rays.iter_mut() {
                let ar = idot(a, &r.v);
                if !ar.is_zero() {
                    r.v = combine(&al, &r.v, &ar, &l);
                }
                r.zeros.set(k);
            }
            // Earlier constraints all vanish on the lineality space.
            let mut zeros = Bits::new(words);
            for j in 0..k {
                zeros.set(j);
            }
            rays.push(Ray { v: l, zeros });
            continue;
        }

        let vals: Vec<BigInt> = rays.iter().map(|r| idot(a, &r.v)).collect();
        if vals.iter().all(|v| !v.is_negative()) {
            for (r, v) in rays.iter_mut().zip(&vals) {
                if v.is_zero() {
                    r.zeros.set(k);
                }
            }
            continue;
        }

        let pos: Vec<usize> = (0..rays.len()).filter(|&i| vals[i].is_positive()).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&i| vals[i].is_negative()).collect();
        // A pair needs at least (effective dimension − 2) common tight constraints.
        let eff = dim - lineality.len();
        let min_common = eff.saturating_sub(2) as u32;

        let mut fresh: Vec<Ray> = Vec::new();
        for &p in &pos {
            for &n in &neg {
                let common = rays[p].zeros.and(&rays[n].zeros);
                if common.count() < min_common {
                    continue;
                }
                let adjacent = rays
                    .iter()
                    .enumerate()
                    .all(|(j, r)| j == p || j == n || !common.subset_of(&r.zeros));
                if !adjacent {
                    continue;
                }
                // (a·p)n − (a·n)p, both coefficients positive.
                let v = combine(&vals[p], &rays[n].v, &vals[n], &rays[p].v);
                let mut zeros = common;
                zeros.set(k);
                fresh.push(Ray { v, zeros });
            }
        }

        let mut kept: Vec<Ray> = Vec::with_capacity(rays.len() + fresh.len());
        for (mut r, v) in rays.into_iter().zip(vals) {
            if v.is_negative() {
                continue;
            }
            if v.is_zero() {
                r.zeros.set(k);
            }
            kept.push(r);
        }
        kept.extend(fresh);
        rays = kept;
    }

    ConeGenerators {
        lineality,
        rays: rays.into_iter().map(|r| r.v).collect(),
    }
}
