//! Strictly convex quadratic programs
//!
//! ```text
//! minimize ½ x'Hx + g'x   s.t.   A x <= b,   E x = e
//! ```
//!
//! solved by the Goldfarb-Idnani dual active-set method. The iterate starts
//! at the unconstrained minimizer and adds violated constraints one at a
//! time while keeping dual feasibility, so the first primal-feasible iterate
//! is optimal. The constraint to add is the most violated one (rows are
//! normalized first), ties going to the lowest row index; dropped
//! constraints are also chosen by lowest index among ties.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Qp {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub ineq_normals: DMatrix<f64>,
    pub ineq_offsets: DVector<f64>,
    pub eq_normals: DMatrix<f64>,
    pub eq_offsets: DVector<f64>,
}

impl Qp {
    /// Problem with inequality rows only.
    pub fn new(
        hessian: DMatrix<f64>,
        gradient: DVector<f64>,
        ineq_normals: DMatrix<f64>,
        ineq_offsets: DVector<f64>,
    ) -> Self {
        let n = gradient.len();
        Self {
            hessian,
            gradient,
            ineq_normals,
            ineq_offsets,
            eq_normals: DMatrix::zeros(0, n),
            eq_offsets: DVector::zeros(0),
        }
    }

    pub fn with_equalities(mut self, eq_normals: DMatrix<f64>, eq_offsets: DVector<f64>) -> Self {
        self.eq_normals = eq_normals;
        self.eq_offsets = eq_offsets;
        self
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.gradient.dot(x)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        check_dim("QP Hessian rows", n, self.hessian.nrows())?;
        check_dim("QP Hessian columns", n, self.hessian.ncols())?;
        check_dim("QP inequality columns", n, self.ineq_normals.ncols())?;
        check_dim(
            "QP inequality offsets",
            self.ineq_normals.nrows(),
            self.ineq_offsets.len(),
        )?;
        check_dim("QP equality columns", n, self.eq_normals.ncols())?;
        check_dim("QP equality offsets", self.eq_normals.nrows(), self.eq_offsets.len())?;
        let finite = |m: &[f64]| m.iter().all(|v| v.is_finite());
        if !(finite(self.hessian.as_slice())
            && finite(self.gradient.as_slice())
            && finite(self.ineq_normals.as_slice())
            && finite(self.ineq_offsets.as_slice())
            && finite(self.eq_normals.as_slice())
            && finite(self.eq_offsets.as_slice()))
        {
            return Err(Error::InvalidInput("QP data must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    /// Primal feasibility, stationarity and complementarity tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub x: DVector<f64>,
    pub objective: f64,
    /// Active inequality rows, sorted.
    pub active: Vec<usize>,
    /// One multiplier per inequality row (zero when inactive), `>= 0`.
    pub multipliers: DVector<f64>,
    pub eq_multipliers: DVector<f64>,
    pub iterations: usize,
}

/// Residuals of the KKT conditions in the `A x <= b` convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

pub fn kkt_report(qp: &Qp, x: &DVector<f64>, multipliers: &DVector<f64>, eq_multipliers: &DVector<f64>) -> KktReport {
    let grad = &qp.hessian * x
        + &qp.gradient
        + qp.ineq_normals.transpose() * multipliers
        + qp.eq_normals.transpose() * eq_multipliers;
    let slack = &qp.ineq_offsets - &qp.ineq_normals * x;
    let eq_res = &qp.eq_normals * x - &qp.eq_offsets;
    let primal = slack
        .iter()
        .map(|s| (-s).max(0.0))
        .chain(eq_res.iter().map(|r| r.abs()))
        .fold(0.0, f64::max);
    KktReport {
        stationarity: grad.amax(),
        primal,
        dual: multipliers.iter().map(|l| (-l).max(0.0)).fold(0.0, f64::max),
        complementarity: multipliers
            .iter()
            .zip(slack.iter())
            .map(|(l, s)| (l * s).abs())
            .fold(0.0, f64::max),
    }
}

/// Constraint in `n'x >= d` form with its original row.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Row {
    /// Equality row with the orientation used when it was added.
    Eq(usize, f64),
    Ineq(usize),
}

struct Work<'a> {
    chol: Cholesky<f64, Dyn>,
    normals: &'a DMatrix<f64>,
    offsets: &'a DVector<f64>,
    eq_normals: &'a DMatrix<f64>,
    eq_offsets: &'a DVector<f64>,
    scale: Vec<f64>,
}

impl Work<'_> {
    /// Normal and offset of a row in `n'x >= d` form (unit norm for
    /// inequalities, so violations are distances).
    fn row(&self, r: Row) -> (DVector<f64>, f64) {
        match r {
            Row::Ineq(i) => (
                -self.normals.row(i).transpose() / self.scale[i],
                -self.offsets[i] / self.scale[i],
            ),
            Row::Eq(i, sign) => (self.eq_normals.row(i).transpose() * sign, self.eq_offsets[i] * sign),
        }
    }

    /// For active normals `N` and a new normal `n_p`:
    /// `z = H^-1 (n_p - N r)` and `r = (N'H^-1 N)^-1 N'H^-1 n_p`.
    /// Also returns `n_p'H^-1 n_p` as the scale for dependence tests.
    fn directions(&self, active: &[Row], np: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>, f64)> {
        let hinv_np = self.chol.solve(np);
        let scale = np.dot(&hinv_np);
        if active.is_empty() {
            return Some((hinv_np, DVector::zeros(0), scale));
        }
        let n = np.len();
        let mut nmat = DMatrix::zeros(n, active.len());
        for (c, r) in active.iter().enumerate() {
            nmat.set_column(c, &self.row(*r).0);
        }
        let hinv_n = self.chol.solve(&nmat);
        let gram = nmat.transpose() * &hinv_n;
        let rhs = nmat.transpose() * &hinv_np;
        let r = match Cholesky::new(gram.clone()) {
            Some(c) => c.solve(&rhs),
            None => gram.lu().solve(&rhs)?,
        };
        let z = hinv_np - hinv_n * &r;
        Some((z, r, scale))
    }
}

/// Solve `qp`. A warm start only changes the order in which constraints are
/// tried: rows active at the warm-start point are added first, in index
/// order, while they are violated. The optimum is unique, so the returned
/// point does not depend on it beyond `tol`.
pub fn solve_qp(qp: &Qp, warm_start: Option<&DVector<f64>>, settings: &QpSettings) -> Result<QpSolution> {
    qp.validate()?;
    let n = qp.dim();
    let sym_err = (&qp.hessian - qp.hessian.transpose()).amax();
    if sym_err > 1e-10 * (1.0 + qp.hessian.amax()) {
        return Err(Error::InvalidInput("QP Hessian must be symmetric".into()));
    }
    let chol = Cholesky::new(qp.hessian.clone())
        .ok_or_else(|| Error::InvalidInput("QP Hessian must be positive definite".into()))?;
    if let Some(w) = warm_start {
        check_dim("warm start", n, w.len())?;
    }
    let m = qp.ineq_normals.nrows();
    let scale: Vec<f64> = (0..m).map(|i| qp.ineq_normals.row(i).norm()).collect();
    let work = Work {
        chol,
        normals: &qp.ineq_normals,
        offsets: &qp.ineq_offsets,
        eq_normals: &qp.eq_normals,
        eq_offsets: &qp.eq_offsets,
        scale,
    };
    let tol = settings.tol;

    // Zero rows are constants: either always satisfied or infeasible.
    for i in 0..m {
        if work.scale[i] <= 1e-300 && qp.ineq_offsets[i] < -tol {
            return Ok(infeasible(qp, DVector::zeros(n), 0));
        }
    }

    let mut x = -work.chol.solve(&qp.gradient);
    let mut active: Vec<Row> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut iterations = 0;

    let priority: Vec<usize> = match warm_start {
        Some(w) => (0..m)
            .filter(|&i| work.scale[i] > 1e-300)
            .filter(|&i| {
                let s = (qp.ineq_offsets[i] - qp.ineq_normals.row(i).dot(&w.transpose())) / work.scale[i];
                s.abs() <= tol.max(1e-9)
            })
            .collect(),
        None => Vec::new(),
    };
    let mut priority_pos = 0;

    let eq_count = qp.eq_normals.nrows();
    let mut eq_next = 0;
    loop {
        // Choose the next constraint to add.
        let p = if eq_next < eq_count {
            eq_next += 1;
            Row::Eq(eq_next - 1, 1.0)
        } else {
            let violation = |i: usize| -> f64 {
                if work.scale[i] <= 1e-300 || active.contains(&Row::Ineq(i)) {
                    return 0.0;
                }
                let (ni, di) = work.row(Row::Ineq(i));
                ni.dot(&x) - di
            };
            let mut pick = None;
            while priority_pos < priority.len() {
                let i = priority[priority_pos];
                priority_pos += 1;
                if violation(i) < -tol {
                    pick = Some(i);
                    break;
                }
            }
            if pick.is_none() {
                let mut worst = -tol;
                for i in 0..m {
                    let s = violation(i);
                    if s < worst {
                        worst = s;
                        pick = Some(i);
                    }
                }
            }
            match pick {
                Some(i) => Row::Ineq(i),
                None => return Ok(finish(qp, &work, x, &active, &u, iterations, QpStatus::Optimal)),
            }
        };

        let (mut np, mut dp) = work.row(p);
        let mut p = p;
        if let Row::Eq(i, _) = p {
            // Orient the equality so it reads as a violated `>=` row.
            if np.dot(&x) - dp > 0.0 {
                np = -np;
                dp = -dp;
                p = Row::Eq(i, -1.0);
            }
        }
        let mut up = 0.0;
        loop {
            iterations += 1;
            if iterations > settings.max_iter {
                return Ok(finish(qp, &work, x, &active, &u, iterations, QpStatus::MaxIter));
            }
            let Some((z, r, scale)) = work.directions(&active, &np) else {
                return Err(Error::Numerical("QP active-set system is singular".into()));
            };
            let s_p = np.dot(&x) - dp;
            // Partial step: first inequality multiplier to reach zero.
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (k, row) in active.iter().enumerate() {
                if matches!(row, Row::Ineq(_)) && r[k] > 1e-14 {
                    let ratio = u[k] / r[k];
                    if ratio < t1 - 1e-15 {
                        t1 = ratio;
                        drop = Some(k);
                    }
                }
            }
            let zn = z.dot(&np);
            let dependent = active.len() >= n || zn <= 1e-10 * scale;
            if dependent && matches!(p, Row::Eq(..)) {
                if s_p.abs() <= tol {
                    break;
                }
                return Ok(infeasible(qp, x, iterations));
            }
            let t2 = if dependent { f64::INFINITY } else { (-s_p / zn).max(0.0) };
            if t1.is_infinite() && t2.is_infinite() {
                return Ok(infeasible(qp, x, iterations));
            }
            let t = t1.min(t2);
            if !dependent {
                x += &z * t;
            }
            for (k, uk) in u.iter_mut().enumerate() {
                *uk -= t * r[k];
            }
            up += t;
            if t2 <= t1 {
                active.push(p);
                u.push(up);
                break;
            }
            let k = drop.expect("partial step has a blocking constraint");
            active.remove(k);
            u.remove(k);
        }
    }
}

fn infeasible(qp: &Qp, x: DVector<f64>, iterations: usize) -> QpSolution {
    QpSolution {
        status: QpStatus::Infeasible,
        objective: qp.objective(&x),
        x,
        active: Vec::new(),
        multipliers: DVector::zeros(qp.ineq_normals.nrows()),
        eq_multipliers: DVector::zeros(qp.eq_normals.nrows()),
        iterations,
    }
}

fn finish(
    qp: &Qp,
    work: &Work,
    x: DVector<f64>,
    active: &[Row],
    u: &[f64],
    iterations: usize,
    status: QpStatus,
) -> QpSolution {
    let mut multipliers = DVector::zeros(qp.ineq_normals.nrows());
    let mut eq_multipliers = DVector::zeros(qp.eq_normals.nrows());
    let mut act = Vec::new();
    for (row, &ui) in active.iter().zip(u) {
        match *row {
            // n = -a / |a|, so the multiplier of a'x <= b is u / |a|.
            Row::Ineq(i) => {
                multipliers[i] = ui / work.scale[i];
                act.push(i);
            }
            Row::Eq(i, sign) => eq_multipliers[i] = -ui * sign,
        }
    }
    act.sort_unstable();
    QpSolution {
        status,
        objective: qp.objective(&x),
        x,
        active: act,
        multipliers,
        eq_multipliers,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_qp(rows: &[(f64, f64)]) -> Qp {
        let mut a = DMatrix::zeros(rows.len(), 1);
        let mut b = DVector::zeros(rows.len());
        for (i, (ai, bi)) in rows.iter().enumerate() {
            a[(i, 0)] = *ai;
            b[i] = *bi;
        }
        Qp::new(DMatrix::identity(1, 1), DVector::from_element(1, -1.0), a, b)
    }

    #[test]
    fn unconstrained_minimum() {
        let s = solve_qp(&scalar_qp(&[]), None, &QpSettings::default()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x[0] - 1.0).abs() < 1e-15);
        assert!((s.objective + 0.5).abs() < 1e-15);
    }

    #[test]
    fn clipped_minimum() {
        let qp = scalar_qp(&[(1.0, 0.5)]);
        let s = solve_qp(&qp, None, &QpSettings::default()).unwrap();
        assert!((s.x[0] - 0.5).abs() < 1e-14);
        assert_eq!(s.active, vec![0]);
        assert!((s.multipliers[0] - 0.5).abs() < 1e-14);
        assert!(kkt_report(&qp, &s.x, &s.multipliers, &s.eq_multipliers).max() < 1e-12);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let s = solve_qp(&scalar_qp(&[(1.0, 0.0), (-1.0, -1.0)]), None, &QpSettings::default()).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
    }

    #[test]
    fn equality_and_inequality() {
        // min ½|x|² s.t. x1 + x2 = 1, x1 <= 0.2  →  (0.2, 0.8)
        let qp = Qp::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DVector::from_element(1, 0.2),
        )
        .with_equalities(
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            DVector::from_element(1, 1.0),
        );
        let s = solve_qp(&qp, None, &QpSettings::default()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.x[0] - 0.2).abs() < 1e-12 && (s.x[1] - 0.8).abs() < 1e-12, "{}", s.x);
        assert!(kkt_report(&qp, &s.x, &s.multipliers, &s.eq_multipliers).max() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_hessian() {
        let qp = Qp::new(
            -DMatrix::identity(1, 1),
            DVector::zeros(1),
            DMatrix::zeros(0, 1),
            DVector::zeros(0),
        );
        assert!(solve_qp(&qp, None, &QpSettings::default()).is_err());
    }

    #[test]
    fn warm_start_does_not_change_optimum() {
        let qp = Qp::new(
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            DVector::from_vec(vec![-4.0, -3.0]),
            DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, -1.0, -1.0, 0.0]),
            DVector::from_vec(vec![1.0, 0.5, 0.0]),
        );
        let cold = solve_qp(&qp, None, &QpSettings::default()).unwrap();
        let warm = solve_qp(&qp, Some(&DVector::from_vec(vec![0.0, 0.0])), &QpSettings::default()).unwrap();
        assert!((&cold.x - &warm.x).amax() < 1e-12);
        let again = solve_qp(&qp, None, &QpSettings::default()).unwrap();
        assert_eq!(cold, again);
    }

    /// Exhaustive active-set search: the unique KKT point of a strictly
    /// convex QP is the optimum.
    fn enumerate(qp: &Qp) -> Option<DVector<f64>> {
        let n = qp.dim();
        let m = qp.ineq_normals.nrows();
        for mask in 0u32..(1 << m) {
            let rows: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
            let k = rows.len();
            if k > n {
                continue;
            }
            let mut kkt = DMatrix::zeros(n + k, n + k);
            let mut rhs = DVector::zeros(n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(&qp.hessian);
            rhs.rows_mut(0, n).copy_from(&(-&qp.gradient));
            for (c, &r) in rows.iter().enumerate() {
                for j in 0..n {
                    kkt[(j, n + c)] = qp.ineq_normals[(r, j)];
                    kkt[(n + c, j)] = qp.ineq_normals[(r, j)];
                }
                rhs[n + c] = qp.ineq_offsets[r];
            }
            let Some(sol) = kkt.lu().solve(&rhs) else { continue };
            let x = sol.rows(0, n).into_owned();
            let feasible = (&qp.ineq_offsets - &qp.ineq_normals * &x).min() >= -1e-9;
            let dual = sol.rows(n, k).iter().all(|l| *l >= -1e-9);
            if feasible && dual {
                return Some(x);
            }
        }
        None
    }

    #[test]
    fn matches_enumeration_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut compared = 0;
        for _ in 0..200 {
            let n = rng.gen_range(1..=4);
            let m = rng.gen_range(1..=8);
            let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let h = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
            let g = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
            let a = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
            let b = DVector::from_fn(m, |_, _| rng.gen_range(-0.5..1.0));
            let qp = Qp::new(h, g, a, b);
            let sol = solve_qp(&qp, None, &QpSettings::default()).unwrap();
            match enumerate(&qp) {
                Some(x) => {
                    assert_eq!(sol.status, QpStatus::Optimal, "{qp:?} {x}");
                    assert!((&sol.x - &x).amax() < 1e-7, "{} vs {}", sol.x, x);
                    let kkt = kkt_report(&qp, &sol.x, &sol.multipliers, &sol.eq_multipliers);
                    assert!(kkt.max() < 1e-8, "{kkt:?}");
                    compared += 1;
                }
                None => {
                    // Either infeasible or degenerate beyond the oracle; the
                    // feasibility LP settles which.
                    let p = crate::Polytope::new(qp.ineq_normals.clone(), qp.ineq_offsets.clone()).unwrap();
                    if p.is_empty(0.0).unwrap() {
                        assert_eq!(sol.status, QpStatus::Infeasible, "{qp:?} {sol:?}");
                    }
                }
            }
        }
        assert!(compared > 100);
    }
}
