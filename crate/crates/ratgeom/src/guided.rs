//! Feasibility with a floating-point guide.
//!
//! A float LP proposes a vertex; its support and tight rows are solved again
//! in exact arithmetic and the result is checked against every constraint.
//! Infeasibility is certified the same way through a Farkas ray of the dual
//! system. Only verified certificates are trusted; when neither verifies the
//! caller falls back to the exact simplex.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use num_traits::{One, Signed, Zero};

use crate::rat::{rat_to_f64, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Row {
    Le,
    Eq,
}

/// `rows` over `n` variables; variable `j` is nonnegative iff `nonneg[j]`.
pub(crate) struct System {
    pub n: usize,
    pub nonneg: Vec<bool>,
    pub rows: Vec<(Vec<(usize, Rat)>, Row, Rat)>,
}

/// Relative tolerances tried in turn when reading support and tight rows
/// off the float point.
const TOLERANCES: [f64; 3] = [1e-9, 1e-6, 1e-12];

impl System {
    fn float_point(&self) -> Option<Vec<f64>> {
        let mut p = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = (0..self.n)
            .map(|j| p.add_var(0.0, if self.nonneg[j] { (0.0, f64::INFINITY) } else { (f64::NEG_INFINITY, f64::INFINITY) }))
            .collect();
        for (coeffs, rel, rhs) in &self.rows {
            let expr: Vec<_> = coeffs.iter().map(|(j, a)| (vars[*j], rat_to_f64(a))).collect();
            let op = match rel {
                Row::Le => ComparisonOp::Le,
                Row::Eq => ComparisonOp::Eq,
            };
            p.add_constraint(expr, op, rat_to_f64(rhs));
        }
        let outcome = catch_unwind(AssertUnwindSafe(|| p.solve())).ok()?.ok()?;
        let sol = outcome.solution()?;
        Some(vars.iter().map(|v| sol.var_value_raw(*v)).collect())
    }

    fn holds(&self, z: &[Rat]) -> bool {
        if z.iter().zip(&self.nonneg).any(|(v, nn)| *nn && v.is_negative()) {
            return false;
        }
        self.rows.iter().all(|(coeffs, rel, rhs)| {
            let lhs = coeffs.iter().fold(Rat::zero(), |acc, (j, a)| acc + a * &z[*j]);
            match rel {
                Row::Le => &lhs <= rhs,
                Row::Eq => &lhs == rhs,
            }
        })
    }

    /// Exact point on the face the float point sits on, if it verifies.
    fn recover(&self, z: &[f64]) -> Option<Vec<Rat>> {
        TOLERANCES.iter().find_map(|tol| self.recover_with(z, *tol))
    }

    fn recover_with(&self, z: &[f64], tol: f64) -> Option<Vec<Rat>> {
        let scale = z.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let support: Vec<bool> = z.iter().map(|v| v.abs() > tol * scale).collect();
        let mut elim = Echelon::default();
        for (coeffs, rel, rhs) in &self.rows {
            let h = rat_to_f64(rhs);
            let mut act = 0.0;
            let mut mag = h.abs();
            for (j, a) in coeffs {
                let t = rat_to_f64(a) * z[*j];
                act += t;
                mag += t.abs();
            }
            let tight = *rel == Row::Eq || (h - act).abs() <= tol * (1.0 + mag);
            if !tight {
                continue;
            }
            let row: BTreeMap<usize, Rat> =
                coeffs.iter().filter(|(j, a)| support[*j] && !a.is_zero()).map(|(j, a)| (*j, a.clone())).collect();
            if !elim.insert(row, rhs.clone()) {
                return None;
            }
        }
        let mut out = vec![Rat::zero(); self.n];
        // Non-pivot support columns stay at zero.
        for (col, (_, rhs)) in &elim.pivots {
            out[*col] = rhs.clone();
        }
        self.holds(&out).then_some(out)
    }
}

/// Reduced row echelon form built one row at a time; each stored row has
/// coefficient 1 in its pivot column and 0 in every other pivot column.
#[derive(Default)]
struct Echelon {
    pivots: BTreeMap<usize, (BTreeMap<usize, Rat>, Rat)>,
}

impl Echelon {
    /// Returns `false` when the row is inconsistent with the earlier ones.
    fn insert(&mut self, mut row: BTreeMap<usize, Rat>, mut rhs: Rat) -> bool {
        let hits: Vec<usize> = row.keys().filter(|c| self.pivots.contains_key(c)).copied().collect();
        for c in hits {
            let Some(f) = row.get(&c).cloned() else { continue };
            let (prow, prhs) = &self.pivots[&c];
            for (k, v) in prow {
                let e = row.entry(*k).or_insert_with(Rat::zero);
                *e -= &f * v;
                if e.is_zero() {
                    row.remove(k);
                }
            }
            rhs -= &f * prhs;
        }
        let Some((&col, _)) = row.iter().next() else {
            return rhs.is_zero();
        };
        let inv = row[&col].recip();
        for v in row.values_mut() {
            *v *= &inv;
        }
        rhs *= &inv;
        for (prow, prhs) in self.pivots.values_mut() {
            let Some(f) = prow.get(&col).cloned() else { continue };
            for (k, v) in &row {
                let e = prow.entry(*k).or_insert_with(Rat::zero);
                *e -= &f * v;
                if e.is_zero() {
                    prow.remove(k);
                }
            }
            *prhs -= &f * &rhs;
        }
        debug_assert!(row[&col].is_one());
        self.pivots.insert(col, (row, rhs));
        true
    }
}

pub(crate) enum Certificate {
    Point(Vec<Rat>),
    Infeasible,
}

/// A verified point or a verified Farkas ray; `None` when the guide could
/// not be certified.
pub(crate) fn certify(sys: &System) -> Option<Certificate> {
    if let Some(z) = sys.float_point() {
        if let Some(x) = sys.recover(&z) {
            return Some(Certificate::Point(x));
        }
    }
    let dual = farkas_system(sys);
    let y = dual.float_point()?;
    dual.recover(&y).map(|_| Certificate::Infeasible)
}

/// `y` with `y ≥ 0` on inequality rows, `yᵀA ≥ 0` on nonnegative columns,
/// `yᵀA = 0` on free columns and `yᵀb ≤ −1`.
fn farkas_system(sys: &System) -> System {
    let m = sys.rows.len();
    let mut cols: Vec<Vec<(usize, Rat)>> = vec![Vec::new(); sys.n];
    let mut last = Vec::new();
    for (i, (coeffs, _, rhs)) in sys.rows.iter().enumerate() {
        for (j, a) in coeffs {
            if !a.is_zero() {
                cols[*j].push((i, -a.clone()));
            }
        }
        if !rhs.is_zero() {
            last.push((i, rhs.clone()));
        }
    }
    let mut rows: Vec<(Vec<(usize, Rat)>, Row, Rat)> = cols
        .into_iter()
        .enumerate()
        .map(|(j, c)| (c, if sys.nonneg[j] { Row::Le } else { Row::Eq }, Rat::zero()))
        .collect();
    rows.push((last, Row::Le, -Rat::one()));
    System { n: m, nonneg: sys.rows.iter().map(|(_, rel, _)| *rel == Row::Le).collect(), rows }
}
