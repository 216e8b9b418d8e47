//! Halfspace polytopes `{x : A x <= b}`.
//!
//! Rows are normalized to unit Euclidean norm on construction so every
//! tolerance in this module is a distance. All operations return new values.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::lp::{self, LpSolution, LpStatus, Sense};

/// Tolerance for set equality in fixpoint detection.
pub const SET_TOL: f64 = 1e-7;
/// Default tolerance for redundancy LPs.
pub const REDUNDANCY_TOL: f64 = 1e-9;
/// Default Fourier-Motzkin row cap.
pub const DEFAULT_ROW_CAP: usize = 5000;

const ZERO_ROW: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    normals: DMatrix<f64>,
    offsets: DVector<f64>,
}

impl Polytope {
    /// Build from raw rows. Rows are scaled to unit norm. All-zero rows with
    /// nonnegative offset are dropped; an all-zero row with negative offset is
    /// kept as the canonical contradiction `0 <= -1`.
    pub fn new(normals: DMatrix<f64>, offsets: DVector<f64>) -> Result<Self> {
        check_dim("polytope offsets", normals.nrows(), offsets.len())?;
        let dim = normals.ncols();
        if normals.iter().chain(offsets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("polytope rows must be finite".into()));
        }
        let mut rows: Vec<(DVector<f64>, f64)> = Vec::with_capacity(normals.nrows());
        let mut contradiction = false;
        for i in 0..normals.nrows() {
            let a = normals.row(i).transpose();
            let norm = a.norm();
            if norm <= ZERO_ROW {
                if offsets[i] < -ZERO_ROW {
                    contradiction = true;
                }
                continue;
            }
            rows.push((a / norm, offsets[i] / norm));
        }
        if contradiction {
            return Ok(Self::empty(dim));
        }
        Ok(Self::from_unit_rows(dim, rows))
    }

    /// Rebuild from rows exactly as given (no rescaling), e.g. when loading
    /// a stored set.
    pub fn from_parts(normals: DMatrix<f64>, offsets: DVector<f64>) -> Result<Self> {
        check_dim("polytope offsets", normals.nrows(), offsets.len())?;
        if normals.iter().chain(offsets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("polytope rows must be finite".into()));
        }
        Ok(Self { normals, offsets })
    }

    fn from_unit_rows(dim: usize, rows: Vec<(DVector<f64>, f64)>) -> Self {
        let mut normals = DMatrix::zeros(rows.len(), dim);
        let mut offsets = DVector::zeros(rows.len());
        for (i, (a, b)) in rows.into_iter().enumerate() {
            normals.set_row(i, &a.transpose());
            offsets[i] = b;
        }
        Self { normals, offsets }
    }

    /// The whole space `R^dim` (no rows).
    pub fn universe(dim: usize) -> Self {
        Self {
            normals: DMatrix::zeros(0, dim),
            offsets: DVector::zeros(0),
        }
    }

    /// Canonical empty set: the single row `0'x <= -1`.
    pub fn empty(dim: usize) -> Self {
        Self {
            normals: DMatrix::zeros(1, dim),
            offsets: DVector::from_element(1, -1.0),
        }
    }

    /// Axis-aligned box `lo <= x <= hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        check_dim("box bounds", lo.len(), hi.len())?;
        let n = lo.len();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = hi[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lo[i];
        }
        Self::new(a, b)
    }

    /// Symmetric box `|x_i| <= bound_i`.
    pub fn symmetric_box(bounds: &[f64]) -> Result<Self> {
        let lo: Vec<f64> = bounds.iter().map(|v| -v).collect();
        Self::from_box(&lo, bounds)
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.normals.nrows()
    }

    pub fn normals(&self) -> &DMatrix<f64> {
        &self.normals
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    /// True when the representation contains the `0 <= -1` row.
    pub fn is_flagged_empty(&self) -> bool {
        (0..self.num_rows()).any(|i| self.normals.row(i).norm() <= ZERO_ROW && self.offsets[i] < 0.0)
    }

    /// Signed constraint values `A x - b` (nonpositive inside).
    pub fn residuals(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("polytope point", self.dim(), x.len())?;
        Ok(&self.normals * x - &self.offsets)
    }

    /// Largest `a_i x - b_i`; negative in the interior. `-inf` for the universe.
    pub fn max_violation(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.residuals(x)?.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> Result<bool> {
        Ok(self.max_violation(x)? <= tol)
    }

    pub fn solve_lp(&self, c: &DVector<f64>, sense: Sense) -> Result<LpSolution> {
        lp::solve_lp(c, &self.normals, &self.offsets, sense)
    }

    /// `max_{x in self} c'x`, or `None` when unbounded. Errors if empty.
    fn support(&self, c: &DVector<f64>) -> Result<Option<f64>> {
        let sol = self.solve_lp(c, Sense::Maximize)?;
        match sol.status {
            LpStatus::Optimal => Ok(sol.objective),
            LpStatus::Unbounded => Ok(None),
            LpStatus::Infeasible => Err(Error::EmptySet("support of an empty polytope".into())),
        }
    }

    /// `self ⊆ other`. An empty `self` is a subset of everything.
    pub fn is_subset(&self, other: &Polytope, tol: f64) -> Result<bool> {
        check_dim("is_subset", self.dim(), other.dim())?;
        if self.is_empty(0.0)? {
            return Ok(true);
        }
        for i in 0..other.num_rows() {
            let q = other.normals.row(i).transpose();
            if q.norm() <= ZERO_ROW {
                // 0 <= d with d < 0 excludes every point of a nonempty self.
                if other.offsets[i] < -tol {
                    return Ok(false);
                }
                continue;
            }
            match self.support(&q)? {
                Some(h) if h <= other.offsets[i] + tol => {}
                _ => return Ok(false),
            }
        }
        Ok(true)
    }

    /// Mutual inclusion within `tol`.
    pub fn set_eq(&self, other: &Polytope, tol: f64) -> Result<bool> {
        Ok(self.is_subset(other, tol)? && other.is_subset(self, tol)?)
    }

    /// Row concatenation without redundancy removal.
    pub fn stack(&self, other: &Polytope) -> Result<Polytope> {
        check_dim("intersect", self.dim(), other.dim())?;
        let mut normals = DMatrix::zeros(self.num_rows() + other.num_rows(), self.dim());
        normals.rows_mut(0, self.num_rows()).copy_from(&self.normals);
        normals
            .rows_mut(self.num_rows(), other.num_rows())
            .copy_from(&other.normals);
        let mut offsets = DVector::zeros(self.num_rows() + other.num_rows());
        offsets.rows_mut(0, self.num_rows()).copy_from(&self.offsets);
        offsets
            .rows_mut(self.num_rows(), other.num_rows())
            .copy_from(&other.offsets);
        Ok(Polytope { normals, offsets })
    }

    pub fn intersect(&self, other: &Polytope) -> Result<Polytope> {
        self.stack(other)?.remove_redundant(REDUNDANCY_TOL)
    }

    /// `{x : M x ∈ self}` without redundancy removal.
    pub fn preimage_raw(&self, m: &DMatrix<f64>) -> Result<Polytope> {
        check_dim("preimage rows", self.dim(), m.nrows())?;
        Polytope::new(&self.normals * m, self.offsets.clone())
    }

    /// `{x : M x ∈ self}`.
    pub fn preimage_linear(&self, m: &DMatrix<f64>) -> Result<Polytope> {
        self.preimage_raw(m)?.remove_redundant(REDUNDANCY_TOL)
    }

    /// Cartesian product `self × other`.
    pub fn product(&self, other: &Polytope) -> Polytope {
        let (n1, n2) = (self.dim(), other.dim());
        let (r1, r2) = (self.num_rows(), other.num_rows());
        let mut normals = DMatrix::zeros(r1 + r2, n1 + n2);
        normals.view_mut((0, 0), (r1, n1)).copy_from(&self.normals);
        normals.view_mut((r1, n1), (r2, n2)).copy_from(&other.normals);
        let mut offsets = DVector::zeros(r1 + r2);
        offsets.rows_mut(0, r1).copy_from(&self.offsets);
        offsets.rows_mut(r1, r2).copy_from(&other.offsets);
        Polytope { normals, offsets }
    }

    /// Project out the coordinates in `drop_dims` by Fourier-Motzkin
    /// elimination, one variable at a time, with redundancy removal after
    /// each step.
    pub fn eliminate(&self, drop_dims: &[usize], row_cap: usize) -> Result<Polytope> {
        let mut dims: Vec<usize> = drop_dims.to_vec();
        dims.sort_unstable();
        dims.dedup();
        if let Some(&d) = dims.last() {
            if d >= self.dim() {
                return Err(Error::InvalidInput(format!(
                    "eliminate: index {d} out of range for dimension {}",
                    self.dim()
                )));
            }
        }
        let mut p = self.clone();
        // Highest index first keeps the remaining indices valid.
        for &j in dims.iter().rev() {
            p = p.eliminate_one(j, row_cap)?;
        }
        Ok(p)
    }

    fn eliminate_one(&self, j: usize, row_cap: usize) -> Result<Polytope> {
        let n = self.dim();
        let keep: Vec<usize> = (0..n).filter(|&c| c != j).collect();
        let drop_col = |a: &DVector<f64>| DVector::from_iterator(n - 1, keep.iter().map(|&c| a[c]));
        let mut zero = Vec::new();
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for i in 0..self.num_rows() {
            let a = self.normals.row(i).transpose();
            let b = self.offsets[i];
            let coef = a[j];
            if coef > ZERO_ROW {
                pos.push((a / coef, b / coef));
            } else if coef < -ZERO_ROW {
                neg.push((a / -coef, b / -coef));
            } else {
                zero.push((drop_col(&a), b));
            }
        }
        let total = zero.len() + pos.len() * neg.len();
        if total > row_cap {
            return Err(Error::RowCap {
                rows: total,
                cap: row_cap,
            });
        }
        let mut rows = zero;
        for (ap, bp) in &pos {
            for (an, bn) in &neg {
                rows.push((drop_col(&(ap + an)), bp + bn));
            }
        }
        let mut normals = DMatrix::zeros(rows.len(), n - 1);
        let mut offsets = DVector::zeros(rows.len());
        for (i, (a, b)) in rows.into_iter().enumerate() {
            normals.set_row(i, &a.transpose());
            offsets[i] = b;
        }
        Polytope::new(normals, offsets)?.remove_redundant(REDUNDANCY_TOL)
    }

    /// Minimal representation: every retained row is certified necessary by
    /// an LP. Empty input returns the canonical empty set.
    pub fn remove_redundant(&self, tol: f64) -> Result<Polytope> {
        if self.num_rows() == 0 {
            return Ok(self.clone());
        }
        if self.is_empty(0.0)? {
            return Ok(Polytope::empty(self.dim()));
        }
        let dim = self.dim();
        // Parallel rows: keep the tightest.
        let mut rows: Vec<(DVector<f64>, f64)> = Vec::with_capacity(self.num_rows());
        'outer: for i in 0..self.num_rows() {
            let a = self.normals.row(i).transpose();
            let b = self.offsets[i];
            for (ak, bk) in rows.iter_mut() {
                if (&*ak - &a).amax() <= 1e-12 {
                    if b < *bk {
                        *bk = b;
                    }
                    continue 'outer;
                }
            }
            rows.push((a, b));
        }
        let mut keep = vec![true; rows.len()];
        for i in 0..rows.len() {
            let others: Vec<usize> = (0..rows.len()).filter(|&k| k != i && keep[k]).collect();
            let mut a = DMatrix::zeros(others.len(), dim);
            let mut b = DVector::zeros(others.len());
            for (r, &k) in others.iter().enumerate() {
                a.set_row(r, &rows[k].0.transpose());
                b[r] = rows[k].1;
            }
            let sol = lp::solve_lp(&rows[i].0, &a, &b, Sense::Maximize)?;
            if sol.status == LpStatus::Optimal && sol.objective.unwrap() <= rows[i].1 + tol {
                keep[i] = false;
            }
        }
        let kept = rows.into_iter().zip(keep).filter_map(|(r, k)| k.then_some(r)).collect();
        Ok(Polytope::from_unit_rows(dim, kept))
    }

    /// Center and radius of the largest inscribed ball. The radius is negative
    /// for an empty set (`-inf` for the canonical contradiction).
    pub fn chebyshev_center(&self) -> Result<(DVector<f64>, f64)> {
        let n = self.dim();
        if self.num_rows() == 0 {
            return Err(Error::Unbounded("Chebyshev ball of the whole space".into()));
        }
        if self.is_flagged_empty() {
            return Ok((DVector::zeros(n), f64::NEG_INFINITY));
        }
        let mut a = DMatrix::zeros(self.num_rows(), n + 1);
        a.view_mut((0, 0), (self.num_rows(), n)).copy_from(&self.normals);
        for i in 0..self.num_rows() {
            a[(i, n)] = self.normals.row(i).norm();
        }
        let mut c = DVector::zeros(n + 1);
        c[n] = 1.0;
        let sol = lp::solve_lp(&c, &a, &self.offsets, Sense::Maximize)?;
        match sol.status {
            LpStatus::Optimal => {
                let z = sol.optimizer.unwrap();
                Ok((z.rows(0, n).into_owned(), z[n]))
            }
            LpStatus::Unbounded => Err(Error::Unbounded(
                "polytope is unbounded; compact sets are required".into(),
            )),
            LpStatus::Infeasible => Err(Error::Numerical("Chebyshev LP cannot be infeasible".into())),
        }
    }

    /// Emptiness by LP feasibility with slack `tol`.
    pub fn is_empty(&self, tol: f64) -> Result<bool> {
        if self.is_flagged_empty() {
            return Ok(true);
        }
        if self.num_rows() == 0 {
            return Ok(false);
        }
        let relaxed = self.offsets.add_scalar(tol);
        Ok(!lp::is_feasible(&self.normals, &relaxed)?)
    }

    /// Maximizer of each direction. A zero direction returns some feasible
    /// point and is reported in the `degenerate` flags.
    pub fn support_points(&self, directions: &[DVector<f64>]) -> Result<SupportPoints> {
        let mut points = Vec::with_capacity(directions.len());
        let mut degenerate = Vec::with_capacity(directions.len());
        for d in directions {
            check_dim("support direction", self.dim(), d.len())?;
            let sol = self.solve_lp(d, Sense::Maximize)?;
            match sol.status {
                LpStatus::Optimal => points.push(sol.optimizer.unwrap()),
                LpStatus::Unbounded => {
                    return Err(Error::Unbounded(format!(
                        "support point in direction {:?}",
                        d.as_slice()
                    )))
                }
                LpStatus::Infeasible => return Err(Error::EmptySet("support points of an empty polytope".into())),
            }
            degenerate.push(d.norm() <= ZERO_ROW);
        }
        Ok(SupportPoints { points, degenerate })
    }

    /// Support points in `count` evenly spread directions (angles in 2-D,
    /// a deterministic golden-spiral / coordinate set otherwise).
    pub fn spread_support_points(&self, count: usize) -> Result<Vec<DVector<f64>>> {
        Ok(self.support_points(&spread_directions(self.dim(), count))?.points)
    }

    /// Scale the set by a positive factor.
    pub fn scaled(&self, factor: f64) -> Polytope {
        Polytope {
            normals: self.normals.clone(),
            offsets: &self.offsets * factor,
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounding_box(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        let n = self.dim();
        let mut lo = DVector::zeros(n);
        let mut hi = DVector::zeros(n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            hi[i] = self
                .support(&e)?
                .ok_or_else(|| Error::Unbounded("bounding box".into()))?;
            lo[i] = -self
                .support(&-e)?
                .ok_or_else(|| Error::Unbounded("bounding box".into()))?;
        }
        Ok((lo, hi))
    }
}

#[derive(Debug, Clone)]
pub struct SupportPoints {
    pub points: Vec<DVector<f64>>,
    pub degenerate: Vec<bool>,
}

/// Deterministic, evenly spread unit directions.
pub fn spread_directions(dim: usize, count: usize) -> Vec<DVector<f64>> {
    match dim {
        0 => vec![],
        1 => (0..count)
            .map(|k| DVector::from_element(1, if k % 2 == 0 { 1.0 } else { -1.0 }))
            .collect(),
        2 => (0..count)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                DVector::from_vec(vec![th.cos(), th.sin()])
            })
            .collect(),
        _ => {
            // Fibonacci sphere on the first three coordinates, axis directions
            // for the rest.
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let mut d = DVector::zeros(dim);
                    if k < 2 * (dim - 3) {
                        d[3 + k / 2] = if k % 2 == 0 { 1.0 } else { -1.0 };
                        return d;
                    }
                    let y = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - y * y).sqrt();
                    let th = golden * k as f64;
                    d[0] = r * th.cos();
                    d[1] = y;
                    d[2] = r * th.sin();
                    d
                })
                .collect()
        }
    }
}
