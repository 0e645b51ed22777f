//! Small dense linear programs in the canonical form
//!
//! ```text
//! maximize  c·x   subject to  A x <= b,  x >= 0
//! ```
//!
//! solved with a two-phase tableau simplex. Right-hand sides may be negative;
//! such rows get an artificial variable for phase one. Row duals are read off
//! the final reduced costs of the slack columns.

use crate::error::{Error, Result};

/// Default feasibility/optimality tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Entries smaller than this are never used as pivots.
const PIVOT_TOL: f64 = 1e-11;

/// Consecutive degenerate pivots after which the solver switches from the
/// largest-coefficient rule to Bland's rule for the rest of the phase.
const DEGENERATE_STREAK: usize = 25;

const MAX_PIVOTS: usize = 500_000;

/// One `<=` row with sparse coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Row>,
    /// Free-form tags used when reporting columns.
    pub column_labels: Vec<String>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        LinearProgram {
            objective,
            rows: Vec::new(),
            column_labels: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Appends `sum coeffs <= bound`, dropping explicit zeros.
    pub fn add_row(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, bound: f64) {
        let coeffs = coeffs.into_iter().filter(|&(_, a)| a != 0.0).collect();
        self.rows.push(Row { coeffs, bound });
    }

    /// Appends a column and returns its index. `entries` are `(row, coeff)`.
    pub fn add_column(
        &mut self,
        cost: f64,
        entries: impl IntoIterator<Item = (usize, f64)>,
        label: impl Into<String>,
    ) -> usize {
        let j = self.objective.len();
        self.objective.push(cost);
        for (i, a) in entries {
            if a != 0.0 {
                self.rows[i].coeffs.push((j, a));
            }
        }
        self.column_labels.resize(j, String::new());
        self.column_labels.push(label.into());
        j
    }

    pub fn label(&self, j: usize) -> &str {
        self.column_labels.get(j).map_or("", String::as_str)
    }

    pub fn row_activity(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    fn check(&self) -> Result<()> {
        let n = self.num_vars();
        if let Some(c) = self.objective.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("objective coefficient {c}")));
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.bound.is_finite() {
                return Err(Error::NonFinite(format!("bound of row {i}")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(Error::DimensionMismatch(format!(
                        "row {i} references column {j} of {n}"
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::NonFinite(format!("row {i} column {j}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    /// One dual value per row; meaningful only when optimal.
    pub duals: Vec<f64>,
    pub objective_value: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Returns `self` when optimal, an [`Error::LpStatus`] otherwise.
    pub fn optimal(self) -> Result<Self> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            LpStatus::Infeasible => Err(Error::LpStatus("infeasible")),
            LpStatus::Unbounded => Err(Error::LpStatus("unbounded")),
        }
    }
}

struct Tableau {
    m: usize,
    /// Structural + slack + artificial columns (the RHS is stored after them).
    cols: usize,
    width: usize,
    data: Vec<f64>,
    /// Reduced costs `c_j - z_j`; the last slot holds `-objective`.
    reduced: Vec<f64>,
    basis: Vec<usize>,
    banned: Vec<bool>,
}

enum Step {
    Optimal,
    Unbounded,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.cols]
    }

    fn pivot(&mut self, r: usize, e: usize) {
        let w = self.width;
        let inv = 1.0 / self.data[r * w + e];
        for x in &mut self.data[r * w..(r + 1) * w] {
            *x *= inv;
        }
        self.data[r * w + e] = 1.0;
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[e];
            if f != 0.0 {
                for (x, &p) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * p;
                }
                row[e] = 0.0;
            }
        }
        let f = self.reduced[e];
        if f != 0.0 {
            for (x, &p) in self.reduced.iter_mut().zip(prow.iter()) {
                *x -= f * p;
            }
            self.reduced[e] = 0.0;
        }
        self.basis[r] = e;
    }

    /// Runs simplex iterations on the current reduced-cost row.
    fn optimize(&mut self, tol: f64, pivots: &mut usize) -> Result<Step> {
        let mut bland = false;
        let mut streak = 0;
        loop {
            let entering = if bland {
                (0..self.cols).find(|&j| !self.banned[j] && self.reduced[j] > tol)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..self.cols {
                    let d = self.reduced[j];
                    if !self.banned[j] && d > tol && best.map_or(true, |(_, b)| d > b) {
                        best = Some((j, d));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(e) = entering else {
                return Ok(Step::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, e);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((r, best)) => {
                            ratio < best - 1e-12 * (1.0 + best.abs())
                                || (ratio <= best + 1e-12 * (1.0 + best.abs())
                                    && self.basis[i] < self.basis[r])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Ok(Step::Unbounded);
            };
            if ratio <= 1e-12 {
                streak += 1;
                if streak >= DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                streak = 0;
            }
            self.pivot(r, e);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::IterationLimit(MAX_PIVOTS));
            }
        }
    }

    fn set_objective(&mut self, costs: &[f64]) {
        self.reduced.clear();
        self.reduced.extend_from_slice(costs);
        self.reduced.push(0.0);
        for i in 0..self.m {
            let cb = costs[self.basis[i]];
            if cb != 0.0 {
                let row = &self.data[i * self.width..(i + 1) * self.width];
                for (x, &a) in self.reduced.iter_mut().zip(row) {
                    *x -= cb * a;
                }
            }
        }
    }
}

/// Solves `lp` to optimality (or detects infeasibility/unboundedness).
///
/// The result is a deterministic function of the input.
pub fn solve(lp: &LinearProgram, tol: f64) -> Result<LpSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    lp.check()?;
    let n = lp.num_vars();
    let m = lp.num_rows();
    let flipped: Vec<usize> = (0..m).filter(|&i| lp.rows[i].bound < 0.0).collect();
    let k = flipped.len();
    let cols = n + m + k;
    let width = cols + 1;
    let mut data = vec![0.0; m * width];
    let mut basis = vec![0; m];
    let mut art = 0;
    for (i, row) in lp.rows.iter().enumerate() {
        let sign = if row.bound < 0.0 { -1.0 } else { 1.0 };
        let r = &mut data[i * width..(i + 1) * width];
        for &(j, a) in &row.coeffs {
            r[j] += sign * a;
        }
        r[n + i] = sign;
        r[cols] = sign * row.bound;
        if sign < 0.0 {
            r[n + m + art] = 1.0;
            basis[i] = n + m + art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    let mut t = Tableau {
        m,
        cols,
        width,
        data,
        reduced: Vec::with_capacity(width),
        basis,
        banned: vec![false; cols],
    };
    let mut pivots = 0;

    if k > 0 {
        let mut phase1 = vec![0.0; cols];
        for c in &mut phase1[n + m..] {
            *c = -1.0;
        }
        t.set_objective(&phase1);
        t.optimize(tol, &mut pivots)?;
        let infeasibility = t.reduced[cols];
        let scale = 1.0 + lp.rows.iter().map(|r| r.bound.abs()).fold(0.0, f64::max);
        if infeasibility > tol * scale {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                primal: vec![0.0; n],
                duals: vec![0.0; m],
                objective_value: f64::NAN,
            });
        }
        // Drive zero-level artificials out of the basis where possible.
        for i in 0..m {
            if t.basis[i] >= n + m {
                if let Some(j) = (0..n + m).find(|&j| t.at(i, j).abs() > 1e-9) {
                    t.pivot(i, j);
                }
            }
        }
        for b in &mut t.banned[n + m..] {
            *b = true;
        }
    }

    let mut costs = vec![0.0; cols];
    costs[..n].copy_from_slice(&lp.objective);
    t.set_objective(&costs);
    if let Step::Unbounded = t.optimize(tol, &mut pivots)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            primal: vec![0.0; n],
            duals: vec![0.0; m],
            objective_value: f64::INFINITY,
        });
    }

    let mut primal = vec![0.0; n];
    for i in 0..m {
        if t.basis[i] < n {
            primal[t.basis[i]] = t.rhs(i);
        }
    }
    let duals = (0..m).map(|i| -t.reduced[n + i]).collect();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective_value: lp.objective_at(&primal),
        primal,
        duals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force oracle: enumerate every choice of `n` tight constraints
    /// among the rows and the non-negativity bounds.
    fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let mut dense = vec![vec![0.0; n]; m + n];
        let mut rhs = vec![0.0; m + n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                dense[i][j] += a;
            }
            rhs[i] = row.bound;
        }
        for j in 0..n {
            dense[m + j][j] = -1.0;
        }
        let total = m + n;
        let mut best: Option<f64> = None;
        let mut pick: Vec<usize> = (0..n).collect();
        loop {
            let mut a: Vec<Vec<f64>> = pick.iter().map(|&i| dense[i].clone()).collect();
            let mut b: Vec<f64> = pick.iter().map(|&i| rhs[i]).collect();
            if let Some(x) = gauss(&mut a, &mut b) {
                let feasible = (0..total).all(|i| {
                    let act: f64 = dense[i].iter().zip(&x).map(|(a, x)| a * x).sum();
                    act <= rhs[i] + 1e-9
                });
                if feasible {
                    let val = lp.objective_at(&x);
                    best = Some(best.map_or(val, |b: f64| b.max(val)));
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if pick[i] < total - n + i {
                    pick[i] += 1;
                    for k in i + 1..n {
                        pick[k] = pick[k - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    fn gauss(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
            if a[p][c].abs() < 1e-10 {
                return None;
            }
            a.swap(c, p);
            b.swap(c, p);
            for r in 0..n {
                if r != c {
                    let f = a[r][c] / a[c][c];
                    if f != 0.0 {
                        for k in c..n {
                            a[r][k] -= f * a[c][k];
                        }
                        b[r] -= f * b[c];
                    }
                }
            }
        }
        Some((0..n).map(|i| b[i] / a[i][i]).collect())
    }

    fn assert_certificate(lp: &LinearProgram, sol: &LpSolution, tol: f64) {
        assert!(sol.is_optimal());
        for i in 0..lp.num_rows() {
            let act = lp.row_activity(i, &sol.primal);
            let b = lp.rows[i].bound;
            assert!(act <= b + 1e-7 * (1.0 + b.abs()), "row {i}: {act} > {b}");
            assert!(sol.duals[i] >= -1e-7, "dual {i} = {}", sol.duals[i]);
            assert!(
                sol.duals[i] * (b - act) <= 1e-7 * (1.0 + b.abs()),
                "complementary slackness on row {i}"
            );
        }
        assert!(sol.primal.iter().all(|&x| x >= -tol));
        let dual_obj: f64 = lp
            .rows
            .iter()
            .zip(&sol.duals)
            .map(|(r, y)| r.bound * y)
            .sum();
        assert!(
            (sol.objective_value - dual_obj).abs() <= 1e-7 * (1.0 + sol.objective_value.abs()),
            "strong duality: {} vs {}",
            sol.objective_value,
            dual_obj
        );
    }

    #[test]
    fn one_variable_bound() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_row([(0, 1.0)], 1.0);
        let sol = solve(&lp, DEFAULT_TOL).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[0] - 1.0).abs() < 1e-12);
        assert!((sol.objective_value - 1.0).abs() < 1e-12);
        assert!((sol.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_variable_vertex() {
        // Vertices of {x+y<=4, x<=2, x,y>=0}: (0,0)->0, (2,0)->6, (2,2)->10, (0,4)->8.
        let mut lp = LinearProgram::new(vec![3.0, 2.0]);
        lp.add_row([(0, 1.0), (1, 1.0)], 4.0);
        lp.add_row([(0, 1.0)], 2.0);
        let sol = solve(&lp, DEFAULT_TOL).unwrap();
        assert!((sol.objective_value - 10.0).abs() < 1e-12);
        assert!((sol.primal[0] - 2.0).abs() < 1e-12 && (sol.primal[1] - 2.0).abs() < 1e-12);
        assert_certificate(&lp, &sol, DEFAULT_TOL);
    }

    #[test]
    fn no_rows_is_unbounded() {
        let lp = LinearProgram::new(vec![1.0]);
        assert_eq!(solve(&lp, DEFAULT_TOL).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_bound_needs_phase_one() {
        // maximize -x s.t. -x <= -2  -> x = 2
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.add_row([(0, -1.0)], -2.0);
        lp.add_row([(0, 1.0)], 5.0);
        let sol = solve(&lp, DEFAULT_TOL).unwrap();
        assert!((sol.objective_value + 2.0).abs() < 1e-12);
        assert_certificate(&lp, &sol, DEFAULT_TOL);
    }

    #[test]
    fn infeasible_detected() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_row([(0, 1.0)], 1.0);
        lp.add_row([(0, -1.0)], -2.0);
        assert_eq!(
            solve(&lp, DEFAULT_TOL).unwrap().status,
            LpStatus::Infeasible
        );
    }

    #[test]
    fn input_errors() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.add_row([(3, 1.0)], 1.0);
        assert!(matches!(
            solve(&lp, DEFAULT_TOL),
            Err(Error::DimensionMismatch(_))
        ));
        let mut lp = LinearProgram::new(vec![f64::NAN]);
        lp.add_row([(0, 1.0)], 1.0);
        assert!(matches!(solve(&lp, DEFAULT_TOL), Err(Error::NonFinite(_))));
    }

    #[test]
    fn degenerate_program_terminates() {
        // A classic cycling example under the largest-coefficient rule.
        let mut lp = LinearProgram::new(vec![10.0, -57.0, -9.0, -24.0]);
        lp.add_row([(0, 0.5), (1, -5.5), (2, -2.5), (3, 9.0)], 0.0);
        lp.add_row([(0, 0.5), (1, -1.5), (2, -0.5), (3, 1.0)], 0.0);
        lp.add_row([(0, 1.0)], 1.0);
        let sol = solve(&lp, DEFAULT_TOL).unwrap();
        assert!((sol.objective_value - 1.0).abs() < 1e-9);
        assert_certificate(&lp, &sol, DEFAULT_TOL);
    }

    fn random_program(seed: u64) -> LinearProgram {
        use rand::Rng;
        let mut rng = crate::rng::seeded(seed);
        let n = rng.gen_range(1..=12usize);
        let m = rng.gen_range(1..=12usize).min(18 - n.min(17)).max(1);
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let mut lp = LinearProgram::new((0..n).map(|_| rng.gen_range(-1.0..3.0)).collect());
        // A positive row keeps the program bounded.
        let cap: f64 = x0.iter().sum::<f64>() + rng.gen_range(0.0..2.0);
        lp.add_row((0..n).map(|j| (j, 1.0)), cap);
        for _ in 1..m {
            let coeffs: Vec<(usize, f64)> = (0..n)
                .filter_map(|j| rng.gen_bool(0.7).then(|| (j, rng.gen_range(-2.0..2.0))))
                .collect();
            let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
            lp.add_row(coeffs, act + rng.gen_range(0.0..1.0));
        }
        lp
    }

    #[test]
    fn matches_vertex_enumeration_on_random_programs() {
        for seed in 0..200 {
            let lp = random_program(seed);
            let sol = solve(&lp, DEFAULT_TOL).unwrap();
            let oracle = vertex_enumeration(&lp).expect("feasible bounded program has a vertex");
            assert!(
                (sol.objective_value - oracle).abs() <= 1e-7 * (1.0 + oracle.abs()),
                "seed {seed}: simplex {} vs enumeration {oracle}",
                sol.objective_value
            );
            assert_certificate(&lp, &sol, DEFAULT_TOL);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn solve_is_deterministic(seed in 0u64..10_000) {
            let lp = random_program(seed);
            prop_assert_eq!(solve(&lp, DEFAULT_TOL).unwrap(), solve(&lp, DEFAULT_TOL).unwrap());
        }
    }
}
