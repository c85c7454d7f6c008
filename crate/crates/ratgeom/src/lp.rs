//! Exact linear programming over the rationals.
//!
//! Two-phase primal simplex on a dense tableau. Each row is held as an
//! integer vector whose true value is the vector divided by the entry in the
//! row's basic column, so a pivot only touches rows with a nonzero entry in
//! the entering column and every row can be reduced by its own gcd. Entering
//! columns follow Dantzig's rule; after a run of degenerate pivots the solver
//! switches to Bland's rule until the objective moves again, which rules out
//! cycling.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::guided::{certify, Certificate, Row, System};
use crate::rat::{common_denominator, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<(usize, Rat)>,
    pub relation: Relation,
    pub rhs: Rat,
}

/// `minimize objective·x` subject to the constraints, with `x_j ≥ 0` unless
/// variable `j` is marked free.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    free: Vec<bool>,
    constraints: Vec<Constraint>,
    objective: Vec<(usize, Rat)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<Rat>,
    pub objective: Rat,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible)
    }

    pub fn solution(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            free: vec![false; num_vars],
            constraints: Vec::new(),
            objective: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Appends a fresh variable and returns its index.
    pub fn add_var(&mut self, free: bool) -> usize {
        self.num_vars += 1;
        self.free.push(free);
        self.num_vars - 1
    }

    pub fn set_free(&mut self, var: usize) {
        self.free[var] = true;
    }

    pub fn add_constraint(&mut self, coeffs: Vec<(usize, Rat)>, relation: Relation, rhs: Rat) {
        debug_assert!(coeffs.iter().all(|(j, _)| *j < self.num_vars));
        self.constraints.push(Constraint { coeffs, relation, rhs });
    }

    pub fn set_objective(&mut self, coeffs: Vec<(usize, Rat)>) {
        self.objective = coeffs;
    }

    fn system(&self) -> System {
        let rows = self
            .constraints
            .iter()
            .map(|c| match c.relation {
                Relation::Le => (c.coeffs.clone(), Row::Le, c.rhs.clone()),
                Relation::Eq => (c.coeffs.clone(), Row::Eq, c.rhs.clone()),
                Relation::Ge => (c.coeffs.iter().map(|(j, a)| (*j, -a.clone())).collect(), Row::Le, -c.rhs.clone()),
            })
            .collect();
        System { n: self.num_vars, nonneg: self.free.iter().map(|f| !f).collect(), rows }
    }

    /// Feasibility only. A floating-point LP guides the search and its
    /// answer is certified exactly (a verified point or Farkas ray); the
    /// exact simplex decides whenever certification fails.
    pub fn is_feasible(&self) -> bool {
        match certify(&self.system()) {
            Some(Certificate::Point(_)) => true,
            Some(Certificate::Infeasible) => false,
            None => self.solve().is_feasible(),
        }
    }

    /// Some exactly feasible point, ignoring the objective; `None` when
    /// infeasible. Certified like [`is_feasible`](Self::is_feasible).
    pub fn feasible_point(&self) -> Option<Vec<Rat>> {
        match certify(&self.system()) {
            Some(Certificate::Point(x)) => Some(x),
            Some(Certificate::Infeasible) => None,
            None => {
                let mut plain = self.clone();
                plain.objective.clear();
                plain.solve().solution().map(|s| s.x)
            }
        }
    }

    pub fn solve(&self) -> LpOutcome {
        Solver::build(self).run(self)
    }

    /// Minimizes each objective in turn, pinning the optimum of every earlier
    /// objective with an equality before moving to the next.
    pub fn solve_lexicographic(&self, objectives: &[Vec<(usize, Rat)>]) -> LpOutcome {
        let mut lp = self.clone();
        let mut last = None;
        for obj in objectives {
            lp.set_objective(obj.clone());
            match lp.solve() {
                LpOutcome::Optimal(sol) => {
                    lp.add_constraint(obj.clone(), Relation::Eq, sol.objective.clone());
                    last = Some(sol);
                }
                other => return other,
            }
        }
        match last {
            Some(sol) => LpOutcome::Optimal(sol),
            None => lp.solve(),
        }
    }
}

fn eval(coeffs: &[(usize, Rat)], x: &[Rat]) -> Rat {
    coeffs.iter().fold(Rat::zero(), |acc, (j, c)| acc + c * &x[*j])
}

/// Divides a vector (plus an optional extra entry) by the gcd of its entries.
fn reduce(row: &mut [BigInt], extra: Option<&mut BigInt>) {
    let mut g = BigInt::zero();
    for v in row.iter() {
        if !v.is_zero() {
            g = g.gcd(v);
            if g.is_one() {
                return;
            }
        }
    }
    if let Some(e) = extra.as_ref() {
        g = g.gcd(e);
    }
    if g.is_zero() || g.is_one() {
        return;
    }
    for v in row.iter_mut() {
        if !v.is_zero() {
            *v = &*v / &g;
        }
    }
    if let Some(e) = extra {
        *e = &*e / &g;
    }
}

const DEGENERATE_STREAK_LIMIT: usize = 32;

struct Solver {
    /// Row-major tableau; the last column is the right-hand side.
    rows: Vec<Vec<BigInt>>,
    basis: Vec<usize>,
    /// Reduced costs times `obj_den`; last entry is `-objective * obj_den`.
    obj: Vec<BigInt>,
    obj_den: BigInt,
    ncols: usize,
    /// Column offset of the first artificial variable.
    first_artificial: usize,
    /// For each original variable, (positive column, optional negative column).
    var_cols: Vec<(usize, Option<usize>)>,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl Solver {
    fn build(lp: &LinearProgram) -> Self {
        let mut var_cols = Vec::with_capacity(lp.num_vars);
        let mut col = 0;
        for j in 0..lp.num_vars {
            if lp.free[j] {
                var_cols.push((col, Some(col + 1)));
                col += 2;
            } else {
                var_cols.push((col, None));
                col += 1;
            }
        }
        let structural = col;

        // Normalize every row to a nonnegative right-hand side.
        struct Norm {
            dense: Vec<Rat>,
            rel: Relation,
            rhs: Rat,
        }
        let mut normed = Vec::with_capacity(lp.constraints.len());
        for c in &lp.constraints {
            let mut dense = vec![Rat::zero(); structural];
            for (j, a) in &c.coeffs {
                let (p, n) = var_cols[*j];
                dense[p] += a;
                if let Some(n) = n {
                    dense[n] -= a;
                }
            }
            let (dense, rel, rhs) = if c.rhs.is_negative() {
                let rel = match c.relation {
                    Relation::Le => Relation::Ge,
                    Relation::Ge => Relation::Le,
                    Relation::Eq => Relation::Eq,
                };
                (dense.into_iter().map(|v| -v).collect(), rel, -c.rhs.clone())
            } else {
                (dense, c.relation, c.rhs.clone())
            };
            normed.push(Norm { dense, rel, rhs });
        }

        let n_slack = normed.iter().filter(|r| r.rel != Relation::Eq).count();
        let n_art = normed.iter().filter(|r| r.rel != Relation::Le).count();
        let first_artificial = structural + n_slack;
        let ncols = first_artificial + n_art;

        let m = normed.len();
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut next_slack = structural;
        let mut next_art = first_artificial;
        for r in normed {
            let mut all = r.dense.clone();
            all.push(r.rhs.clone());
            let l = common_denominator(&all);
            let lr = Rat::from_integer(l);
            let mut row = vec![BigInt::zero(); ncols + 1];
            for (k, v) in r.dense.iter().enumerate() {
                if !v.is_zero() {
                    row[k] = (v * &lr).to_integer();
                }
            }
            row[ncols] = (&r.rhs * &lr).to_integer();
            match r.rel {
                Relation::Le => {
                    row[next_slack] = BigInt::one();
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -BigInt::one();
                    next_slack += 1;
                    row[next_art] = BigInt::one();
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = BigInt::one();
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
        }

        Self {
            rows,
            basis,
            obj: vec![BigInt::zero(); ncols + 1],
            obj_den: BigInt::one(),
            ncols,
            first_artificial,
            var_cols,
        }
    }

    fn is_artificial(&self, col: usize) -> bool {
        col >= self.first_artificial && col < self.ncols
    }

    fn run(mut self, lp: &LinearProgram) -> LpOutcome {
        // Phase 1: minimize the sum of artificials.
        if self.first_artificial < self.ncols {
            let mut obj = vec![BigInt::zero(); self.ncols + 1];
            for (i, row) in self.rows.iter().enumerate() {
                if self.is_artificial(self.basis[i]) {
                    for (k, v) in row.iter().enumerate() {
                        if !v.is_zero() && !self.is_artificial(k) {
                            obj[k] -= v;
                        }
                    }
                }
            }
            self.obj = obj;
            self.obj_den = BigInt::one();
            // Phase 1 is bounded below by zero.
            let _ = self.optimize(true);
            if self.obj[self.ncols].is_negative() {
                return LpOutcome::Infeasible;
            }
            self.drive_out_artificials();
        }

        // Phase 2.
        let mut cost = vec![Rat::zero(); self.ncols];
        for (j, c) in &lp.objective {
            let (p, n) = self.var_cols[*j];
            cost[p] += c;
            if let Some(n) = n {
                cost[n] -= c;
            }
        }
        let mut reduced: Vec<Rat> = cost.clone();
        reduced.push(Rat::zero());
        for (i, row) in self.rows.iter().enumerate() {
            let cb = &cost[self.basis[i]];
            if cb.is_zero() {
                continue;
            }
            let q = &row[self.basis[i]];
            for (k, v) in row.iter().enumerate() {
                if !v.is_zero() {
                    reduced[k] -= cb * Rat::new(v.clone(), q.clone());
                }
            }
        }
        let l = common_denominator(&reduced);
        let lr = Rat::from_integer(l.clone());
        self.obj = reduced.iter().map(|v| (v * &lr).to_integer()).collect();
        self.obj_den = l;
        for k in self.first_artificial..self.ncols {
            self.obj[k] = BigInt::zero();
        }

        match self.optimize(false) {
            PhaseEnd::Unbounded => LpOutcome::Unbounded,
            PhaseEnd::Optimal => {
                let mut col_val = vec![Rat::zero(); self.ncols];
                for (i, row) in self.rows.iter().enumerate() {
                    let b = self.basis[i];
                    col_val[b] = Rat::new(row[self.ncols].clone(), row[b].clone());
                }
                let x: Vec<Rat> = self
                    .var_cols
                    .iter()
                    .map(|(p, n)| match n {
                        Some(n) => &col_val[*p] - &col_val[*n],
                        None => col_val[*p].clone(),
                    })
                    .collect();
                let objective = eval(&lp.objective, &x);
                LpOutcome::Optimal(LpSolution { x, objective })
            }
        }
    }

    fn drive_out_artificials(&mut self) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.is_artificial(self.basis[i]) {
                let col = (0..self.first_artificial).find(|&k| !self.rows[i][k].is_zero());
                match col {
                    Some(c) => {
                        self.pivot(i, c);
                        i += 1;
                    }
                    None => {
                        self.rows.remove(i);
                        self.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    fn optimize(&mut self, phase_one: bool) -> PhaseEnd {
        let mut degenerate_streak = 0usize;
        let limit = if phase_one { self.ncols } else { self.first_artificial };
        loop {
            let bland = degenerate_streak > DEGENERATE_STREAK_LIMIT;
            let mut entering: Option<usize> = None;
            for k in 0..limit {
                if !self.obj[k].is_negative() {
                    continue;
                }
                if bland {
                    entering = Some(k);
                    break;
                }
                match entering {
                    Some(e) if self.obj[k] >= self.obj[e] => {}
                    _ => entering = Some(k),
                }
            }
            let Some(c) = entering else {
                return PhaseEnd::Optimal;
            };

            let rhs = self.ncols;
            let mut leave: Option<usize> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[c].is_positive() {
                    continue;
                }
                match leave {
                    None => leave = Some(i),
                    Some(r) => {
                        let best = &self.rows[r];
                        // row[rhs]/row[c] vs best[rhs]/best[c], both denominators positive.
                        let lhs = &row[rhs] * &best[c];
                        let rhs_v = &best[rhs] * &row[c];
                        if lhs < rhs_v || (lhs == rhs_v && self.basis[i] < self.basis[r]) {
                            leave = Some(i);
                        }
                    }
                }
            }
            let Some(r) = leave else {
                return PhaseEnd::Unbounded;
            };
            if self.rows[r][rhs].is_zero() {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            self.pivot(r, c);
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let mut pivot_row = std::mem::take(&mut self.rows[r]);
        if pivot_row[c].is_negative() {
            for v in pivot_row.iter_mut() {
                if !v.is_zero() {
                    *v = -&*v;
                }
            }
        }
        reduce(&mut pivot_row, None);
        let p = pivot_row[c].clone();
        let nz: Vec<usize> = (0..pivot_row.len()).filter(|&k| !pivot_row[k].is_zero()).collect();

        let update = |row: &mut Vec<BigInt>, extra: Option<&mut BigInt>| {
            let f = row[c].clone();
            if f.is_zero() {
                return;
            }
            let scale_all = !p.is_one();
            if scale_all {
                for v in row.iter_mut() {
                    if !v.is_zero() {
                        *v *= &p;
                    }
                }
            }
            for &k in &nz {
                row[k] -= &f * &pivot_row[k];
            }
            match extra {
                Some(e) => {
                    if scale_all {
                        *e *= &p;
                    }
                    reduce(row, Some(e));
                }
                None => reduce(row, None),
            }
        };

        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                update(row, None);
            }
        }
        let mut obj = std::mem::take(&mut self.obj);
        let mut den = std::mem::take(&mut self.obj_den);
        update(&mut obj, Some(&mut den));
        self.obj = obj;
        self.obj_den = den;

        self.rows[r] = pivot_row;
        self.basis[r] = c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{rat, rat_int};

    fn feasible(lp: &LinearProgram) -> LpSolution {
        match lp.solve() {
            LpOutcome::Optimal(s) => s,
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn small_maximization() {
        // max 3x + 2y s.t. x + y <= 4, x + 3y <= 6, x <= 3.
        let mut lp = LinearProgram::new(2);
        lp.add_constraint(vec![(0, rat_int(1)), (1, rat_int(1))], Relation::Le, rat_int(4));
        lp.add_constraint(vec![(0, rat_int(1)), (1, rat_int(3))], Relation::Le, rat_int(6));
        lp.add_constraint(vec![(0, rat_int(1))], Relation::Le, rat_int(3));
        lp.set_objective(vec![(0, rat_int(-3)), (1, rat_int(-2))]);
        let s = feasible(&lp);
        assert_eq!(s.x, vec![rat_int(3), rat_int(1)]);
        assert_eq!(s.objective, rat_int(-11));
    }

    #[test]
    fn equality_and_free_variables() {
        // x free, y >= 0: x + y = 1/2, x - y >= -3, minimize x.
        let mut lp = LinearProgram::new(2);
        lp.set_free(0);
        lp.add_constraint(vec![(0, rat_int(1)), (1, rat_int(1))], Relation::Eq, rat(1, 2));
        lp.add_constraint(vec![(0, rat_int(1)), (1, rat_int(-1))], Relation::Ge, rat_int(-3));
        lp.set_objective(vec![(0, rat_int(1))]);
        let s = feasible(&lp);
        assert_eq!(s.x, vec![rat(-5, 4), rat(7, 4)]);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add_constraint(vec![(0, rat_int(1))], Relation::Ge, rat_int(1));
        lp.add_constraint(vec![(0, rat_int(1))], Relation::Le, rat_int(0));
        assert_eq!(lp.solve(), LpOutcome::Infeasible);

        let mut lp = LinearProgram::new(2);
        lp.add_constraint(vec![(0, rat_int(1)), (1, rat_int(-1))], Relation::Le, rat_int(1));
        lp.set_objective(vec![(1, rat_int(-1))]);
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities_are_dropped() {
        let mut lp = LinearProgram::new(2);
        lp.add_constraint(vec![(0, rat_int(1)), (1, rat_int(1))], Relation::Eq, rat_int(2));
        lp.add_constraint(vec![(0, rat_int(2)), (1, rat_int(2))], Relation::Eq, rat_int(4));
        lp.set_objective(vec![(0, rat_int(1))]);
        let s = feasible(&lp);
        assert_eq!(s.x, vec![rat_int(0), rat_int(2)]);
    }

    #[test]
    fn no_constraints() {
        let mut lp = LinearProgram::new(2);
        lp.set_objective(vec![(0, rat_int(1))]);
        assert_eq!(feasible(&lp).x, vec![rat_int(0), rat_int(0)]);
        lp.set_free(1);
        lp.set_objective(vec![(1, rat_int(1))]);
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn lexicographic_tie_break() {
        // x + y >= 1, minimize x + y, then x: picks (0, 1).
        let mut lp = LinearProgram::new(2);
        lp.add_constraint(vec![(0, rat_int(1)), (1, rat_int(1))], Relation::Ge, rat_int(1));
        let sum = vec![(0, rat_int(1)), (1, rat_int(1))];
        let s = lp.solve_lexicographic(&[sum, vec![(0, rat_int(1))]]).solution().unwrap();
        assert_eq!(s.x, vec![rat_int(0), rat_int(1)]);
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the textbook rule without anti-cycling.
        let mut lp = LinearProgram::new(4);
        let r = |n, d| rat(n, d);
        lp.add_constraint(vec![(0, r(1, 4)), (1, r(-8, 1)), (2, r(-1, 1)), (3, r(9, 1))], Relation::Le, rat_int(0));
        lp.add_constraint(vec![(0, r(1, 2)), (1, r(-12, 1)), (2, r(-1, 2)), (3, r(3, 1))], Relation::Le, rat_int(0));
        lp.add_constraint(vec![(2, rat_int(1))], Relation::Le, rat_int(1));
        lp.set_objective(vec![(0, r(-3, 4)), (1, r(20, 1)), (2, r(-1, 2)), (3, r(6, 1))]);
        let s = feasible(&lp);
        assert_eq!(s.objective, r(-5, 4));
    }
}
