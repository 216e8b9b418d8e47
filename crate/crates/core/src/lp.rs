//! Dense linear programming over halfspace polytopes.
//!
//! Every LP in the crate has the shape `max c'x s.t. Ax <= b` with `x` free.
//! It is solved through its dual `min b'y s.t. A'y = c, y >= 0`, a standard
//! form problem whose basis has only `dim` columns. The primal optimizer is
//! recovered as the simplex multipliers of the dual. Pricing is Dantzig's
//! rule, switching to Bland's rule while pivots are degenerate.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

/// Reduced cost / primal slack tolerance.
const OPT_TOL: f64 = 1e-9;
/// Smallest pivot magnitude accepted in the ratio test.
const PIVOT_TOL: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub optimizer: Option<DVector<f64>>,
    pub objective: Option<f64>,
    /// Row multipliers `y >= 0` with `A'y = c` (for `Minimize`, `A'y = -c`).
    pub multipliers: Option<DVector<f64>>,
    pub iterations: usize,
}

impl LpSolution {
    fn without_optimum(status: LpStatus, iterations: usize) -> Self {
        Self {
            status,
            optimizer: None,
            objective: None,
            multipliers: None,
            iterations,
        }
    }
}

/// Optimize `c'x` over `{x : normals * x <= offsets}`.
pub fn solve_lp(c: &DVector<f64>, normals: &DMatrix<f64>, offsets: &DVector<f64>, sense: Sense) -> Result<LpSolution> {
    check_dim("solve_lp objective", normals.ncols(), c.len())?;
    check_dim("solve_lp offsets", normals.nrows(), offsets.len())?;
    let c_max = match sense {
        Sense::Maximize => c.clone(),
        Sense::Minimize => -c,
    };
    let sol = maximize(&c_max, normals, offsets)?;
    Ok(match sense {
        Sense::Maximize => sol,
        Sense::Minimize => LpSolution {
            objective: sol.objective.map(|v| -v),
            ..sol
        },
    })
}

/// `true` iff `{x : Ax <= b}` is nonempty (within `OPT_TOL`).
pub fn is_feasible(normals: &DMatrix<f64>, offsets: &DVector<f64>) -> Result<bool> {
    Ok(feasibility_gap(normals, offsets)? <= OPT_TOL)
}

/// `min_x max(0, max_i a_i x - b_i)`.
fn feasibility_gap(normals: &DMatrix<f64>, offsets: &DVector<f64>) -> Result<f64> {
    let (k, n) = normals.shape();
    let mut a = DMatrix::zeros(k + 1, n + 1);
    a.view_mut((0, 0), (k, n)).copy_from(normals);
    for i in 0..k {
        a[(i, n)] = -1.0;
    }
    a[(k, n)] = -1.0;
    let mut b = DVector::zeros(k + 1);
    b.rows_mut(0, k).copy_from(offsets);
    let mut c = DVector::zeros(n + 1);
    c[n] = -1.0;
    match dual_simplex(&c, &a, &b)? {
        Outcome::Optimal { x, .. } => Ok(x[n].max(0.0)),
        // The auxiliary problem is feasible and bounded by construction.
        _ => Err(Error::Numerical(
            "feasibility subproblem reported an impossible status".into(),
        )),
    }
}

fn maximize(c: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<LpSolution> {
    match dual_simplex(c, a, b)? {
        Outcome::Optimal { x, y, iterations } => {
            let objective = c.dot(&x);
            Ok(LpSolution {
                status: LpStatus::Optimal,
                optimizer: Some(x),
                objective: Some(objective),
                multipliers: Some(y),
                iterations,
            })
        }
        Outcome::DualUnbounded { iterations } => Ok(LpSolution::without_optimum(LpStatus::Infeasible, iterations)),
        Outcome::DualInfeasible { iterations } => {
            let status = if feasibility_gap(a, b)? <= OPT_TOL {
                LpStatus::Unbounded
            } else {
                LpStatus::Infeasible
            };
            Ok(LpSolution::without_optimum(status, iterations))
        }
    }
}

enum Outcome {
    Optimal {
        x: DVector<f64>,
        y: DVector<f64>,
        iterations: usize,
    },
    DualInfeasible {
        iterations: usize,
    },
    DualUnbounded {
        iterations: usize,
    },
}

/// Revised simplex on `min b'y s.t. A'y = c, y >= 0`.
///
/// Columns `0..k` are the rows of `A` (scaled by `sign` so that the right-hand
/// side is nonnegative); columns `k..k+n` are phase-one artificials.
struct Dual<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    sign: DVector<f64>,
    rhs: DVector<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    k: usize,
    n: usize,
    iterations: usize,
    max_iter: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

impl<'a> Dual<'a> {
    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.k {
            let mut col = self.a.row(j).transpose();
            col.component_mul_assign(&self.sign);
            col
        } else {
            let mut e = DVector::zeros(self.n);
            e[j - self.k] = 1.0;
            e
        }
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, &j) in self.basis.iter().enumerate() {
            m.set_column(r, &self.column(j));
        }
        m
    }

    fn cost(&self, j: usize, phase_one: bool) -> f64 {
        match (phase_one, j < self.k) {
            (true, true) => 0.0,
            (true, false) => 1.0,
            (false, true) => self.b[j],
            (false, false) => 0.0,
        }
    }

    fn fail(&self, detail: impl Into<String>) -> Error {
        Error::LpFailure {
            iterations: self.iterations,
            detail: detail.into(),
        }
    }

    /// Basic values and simplex multipliers (already sign-corrected, i.e. the
    /// primal point `x`) for the current basis.
    fn primal_dual(&self, phase_one: bool) -> Result<(DVector<f64>, DVector<f64>, DMatrix<f64>)> {
        let bm = self.basis_matrix();
        let lu = bm.clone().lu();
        let xb = lu
            .solve(&self.rhs)
            .ok_or_else(|| self.fail(format!("singular basis {:?}", self.basis)))?;
        let cb = DVector::from_iterator(self.n, self.basis.iter().map(|&j| self.cost(j, phase_one)));
        let pi = bm
            .transpose()
            .lu()
            .solve(&cb)
            .ok_or_else(|| self.fail(format!("singular basis transpose {:?}", self.basis)))?;
        let x = pi.component_mul(&self.sign);
        Ok((xb, x, bm))
    }

    fn run_phase(&mut self, phase_one: bool) -> Result<PhaseEnd> {
        let mut bland = false;
        loop {
            self.iterations += 1;
            if self.iterations > self.max_iter {
                let (xb, _, _) = self.primal_dual(phase_one)?;
                return Err(self.fail(format!(
                    "iteration cap {} reached in phase {}; basis {:?}, basic values {:?}",
                    self.max_iter,
                    if phase_one { 1 } else { 2 },
                    self.basis,
                    xb.as_slice()
                )));
            }
            let (xb, x, bm) = self.primal_dual(phase_one)?;
            // Reduced cost of real column j is cost_j - a_j . x.
            let ax = self.a * &x;
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.k {
                if self.is_basic[j] {
                    continue;
                }
                let d = self.cost(j, phase_one) - ax[j];
                if d < -OPT_TOL {
                    if bland {
                        entering = Some((j, d));
                        break;
                    }
                    if entering.is_none_or(|(_, best)| d < best) {
                        entering = Some((j, d));
                    }
                }
            }
            let Some((q, _)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            let dir = bm
                .lu()
                .solve(&self.column(q))
                .ok_or_else(|| self.fail("singular basis in ratio test"))?;
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.n {
                if dir[r] > PIVOT_TOL {
                    let ratio = xb[r].max(0.0) / dir[r];
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                            if ratio < lratio && !tie || tie && self.basis[r] < self.basis[lr] {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((r, step)) = leave else {
                return Ok(PhaseEnd::Unbounded);
            };
            bland = step <= 1e-12;
            self.is_basic[self.basis[r]] = false;
            self.basis[r] = q;
            self.is_basic[q] = true;
        }
    }

    /// Pivot zero-level artificials out of the basis where a real column can
    /// replace them. Remaining artificials mark linearly dependent equations.
    fn drive_out_artificials(&mut self) -> Result<()> {
        for r in 0..self.n {
            if self.basis[r] < self.k {
                continue;
            }
            let bm = self.basis_matrix();
            let Some(inv) = bm.try_inverse() else {
                return Err(self.fail("singular basis while removing artificials"));
            };
            let row = inv.row(r).transpose();
            let mut best: Option<(usize, f64)> = None;
            for j in 0..self.k {
                if self.is_basic[j] {
                    continue;
                }
                let alpha = row.dot(&self.column(j)).abs();
                if alpha > 1e-9 && best.is_none_or(|(_, b)| alpha > b) {
                    best = Some((j, alpha));
                }
            }
            if let Some((j, _)) = best {
                self.is_basic[self.basis[r]] = false;
                self.basis[r] = j;
                self.is_basic[j] = true;
            }
        }
        Ok(())
    }
}

fn dual_simplex(c: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Outcome> {
    let (k, n) = a.shape();
    let sign = c.map(|v| if v < 0.0 { -1.0 } else { 1.0 });
    let rhs = c.abs();
    let mut is_basic = vec![false; k + n];
    for flag in is_basic.iter_mut().skip(k) {
        *flag = true;
    }
    let mut lp = Dual {
        a,
        b,
        sign,
        rhs,
        basis: (k..k + n).collect(),
        is_basic,
        k,
        n,
        iterations: 0,
        max_iter: 50 * (k + n) + 1000,
    };

    match lp.run_phase(true)? {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => return Err(lp.fail("phase one reported unbounded")),
    }
    let (xb, _, _) = lp.primal_dual(true)?;
    let infeasibility: f64 = lp
        .basis
        .iter()
        .zip(xb.iter())
        .filter(|(&j, _)| j >= k)
        .map(|(_, &v)| v.max(0.0))
        .sum();
    if infeasibility > OPT_TOL * (1.0 + c.amax()) {
        return Ok(Outcome::DualInfeasible {
            iterations: lp.iterations,
        });
    }
    lp.drive_out_artificials()?;

    match lp.run_phase(false)? {
        PhaseEnd::Unbounded => Ok(Outcome::DualUnbounded {
            iterations: lp.iterations,
        }),
        PhaseEnd::Optimal => {
            let (xb, x, _) = lp.primal_dual(false)?;
            let mut y = DVector::zeros(k);
            for (&j, &v) in lp.basis.iter().zip(xb.iter()) {
                if j < k {
                    y[j] = v.max(0.0);
                }
            }
            Ok(Outcome::Optimal {
                x,
                y,
                iterations: lp.iterations,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(n: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut a = DMatrix::zeros(2 * n, n);
        for i in 0..n {
            a[(2 * i, i)] = 1.0;
            a[(2 * i + 1, i)] = -1.0;
        }
        (a, DVector::from_element(2 * n, 1.0))
    }

    #[test]
    fn max_first_coordinate_over_box() {
        let (a, b) = unit_box(2);
        let c = DVector::from_vec(vec![1.0, 0.0]);
        let sol = solve_lp(&c, &a, &b, Sense::Maximize).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let a = DMatrix::from_row_slice(2, 1, &[-1.0, 1.0]);
        let b = DVector::from_vec(vec![-2.0, 1.0]);
        let c = DVector::from_vec(vec![1.0]);
        let sol = solve_lp(&c, &a, &b, Sense::Minimize).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        assert!(sol.optimizer.is_none() && sol.objective.is_none());
    }

    #[test]
    fn simplex_sum() {
        let a = DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let c = DVector::from_vec(vec![1.0, 1.0]);
        let sol = solve_lp(&c, &a, &b, Sense::Maximize).unwrap();
        assert!((sol.objective.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn halfplane_is_unbounded() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let b = DVector::from_vec(vec![1.0]);
        let c = DVector::from_vec(vec![0.0, 1.0]);
        let sol = solve_lp(&c, &a, &b, Sense::Maximize).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn no_rows_zero_objective() {
        let a = DMatrix::zeros(0, 2);
        let b = DVector::zeros(0);
        let c = DVector::zeros(2);
        let sol = solve_lp(&c, &a, &b, Sense::Maximize).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.objective, Some(0.0));
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // Many constraints through the optimal vertex (1, 1).
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for k in 0..20 {
            let th = k as f64 * 0.07;
            let (s, c) = (th.sin(), th.cos());
            rows.extend_from_slice(&[c, s]);
            rhs.push(c + s);
        }
        rows.extend_from_slice(&[-1.0, 0.0, 0.0, -1.0]);
        rhs.extend_from_slice(&[5.0, 5.0]);
        let a = DMatrix::from_row_slice(rhs.len(), 2, &rows);
        let b = DVector::from_vec(rhs);
        let c = DVector::from_vec(vec![1.0, 1.0]);
        let sol = solve_lp(&c, &a, &b, Sense::Maximize).unwrap();
        assert!((sol.objective.unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        let (a, b) = unit_box(2);
        let c = DVector::from_vec(vec![1.0]);
        assert!(matches!(
            solve_lp(&c, &a, &b, Sense::Maximize),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
