//! Finite-horizon problem condensed over the input sequence.
//!
//! With predictions `x_k = Φ_k x0 + Γ_k U` the cost
//!
//! ```text
//! x_N' P(ξ_N) x_N + Σ_{k<N} x_k' Q x_k + u_k' R u_k
//! ```
//!
//! becomes `½ U'HU + g'U + c0`. Constraint rows are `U` on every input, `X`
//! on `x_1 .. x_{N-1}`, `C_xu` on every `(x_k, u_k)` and `X_N` on `x_N`.
//! Rows that do not depend on `U` (all of `X` at `x_0`, the state-only rows
//! of `C_xu` at `k = 0`) are checked up front and left out of the QP.

use nalgebra::{DMatrix, DVector};

use crate::design::DesignResult;
use crate::error::{check_dim, Error, Result};
use crate::model::VertexModel;
use crate::polytope::Polytope;
use crate::qp::{self, Qp, QpSettings, QpStatus};
use crate::sets::SetSuite;
use crate::simplex::SimplexVec;

/// Default tolerance for the constant rows checked at `x_0`.
pub const X0_TOL: f64 = 1e-7;

/// Parameter predictions `ξ_{0|t} .. ξ_{N|t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSequence(Vec<SimplexVec>);

impl PredictionSequence {
    pub fn new(entries: Vec<SimplexVec>) -> Result<Self> {
        let Some(first) = entries.first() else {
            return Err(Error::InvalidInput("prediction sequence is empty".into()));
        };
        let ell = first.len();
        if let Some(bad) = entries.iter().find(|e| e.len() != ell) {
            return Err(Error::DimensionMismatch {
                context: "prediction sequence entry",
                expected: ell,
                found: bad.len(),
            });
        }
        Ok(Self(entries))
    }

    /// `N + 1` copies of `xi`.
    pub fn constant(xi: &SimplexVec, horizon: usize) -> Self {
        Self(vec![xi.clone(); horizon + 1])
    }

    pub fn horizon(&self) -> usize {
        self.0.len() - 1
    }

    pub fn ell(&self) -> usize {
        self.0[0].len()
    }

    pub fn entries(&self) -> &[SimplexVec] {
        &self.0
    }

    pub fn get(&self, k: usize) -> &SimplexVec {
        &self.0[k]
    }

    /// Drop `ξ_0`, move every entry one slot forward and append `xi` as the
    /// new last entry.
    pub fn shift(&mut self, xi: SimplexVec) -> Result<()> {
        check_dim("shifted-in estimate", self.ell(), xi.len())?;
        self.0.remove(0);
        self.0.push(xi);
        Ok(())
    }
}

/// Free-response and input-to-state maps, one per prediction step.
pub type PredictionMaps = (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>);

/// `Φ_0 .. Φ_N` and `Γ_0 .. Γ_N` with `x_k = Φ_k x0 + Γ_k U`.
pub fn predict_matrices(model: &VertexModel, xi_seq: &PredictionSequence) -> Result<PredictionMaps> {
    check_dim("prediction sequence parameters", model.ell(), xi_seq.ell())?;
    let (n, m, horizon) = (model.n(), model.m(), xi_seq.horizon());
    let mut phi = vec![DMatrix::identity(n, n)];
    let mut gamma = vec![DMatrix::zeros(n, horizon * m)];
    for k in 0..horizon {
        let a = model.a_of(xi_seq.get(k))?;
        let mut next = &a * &gamma[k];
        next.view_mut((0, k * m), (n, m)).copy_from(model.b());
        phi.push(&a * &phi[k]);
        gamma.push(next);
    }
    Ok((phi, gamma))
}

/// State trajectory `x_0 .. x_N` by direct recursion.
pub fn predict_states(
    model: &VertexModel,
    xi_seq: &PredictionSequence,
    x0: &DVector<f64>,
    u_seq: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    check_dim("input sequence length", xi_seq.horizon(), u_seq.len())?;
    let mut xs = vec![x0.clone()];
    for (k, u) in u_seq.iter().enumerate() {
        let next = model.step(xi_seq.get(k), &xs[k], u)?;
        xs.push(next);
    }
    Ok(xs)
}

/// Cost of an input sequence evaluated along its predicted trajectory.
pub fn trajectory_cost(
    model: &VertexModel,
    design: &DesignResult,
    xi_seq: &PredictionSequence,
    x0: &DVector<f64>,
    u_seq: &[DVector<f64>],
) -> Result<f64> {
    let xs = predict_states(model, xi_seq, x0, u_seq)?;
    let horizon = xi_seq.horizon();
    let p = design.terminal_p(xi_seq.get(horizon))?;
    let mut cost = xs[horizon].dot(&(&p * &xs[horizon]));
    for (x, u) in xs.iter().zip(u_seq) {
        cost += x.dot(&(&design.q * x)) + u.dot(&(&design.r * u));
    }
    Ok(cost)
}

/// Origin of a QP row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowTag {
    State { k: usize, row: usize },
    Input { k: usize, row: usize },
    Cxu { k: usize, row: usize },
    Terminal { row: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CondensedQp {
    pub qp: Qp,
    /// Cost at `U = 0`.
    pub constant: f64,
    pub tags: Vec<RowTag>,
    pub horizon: usize,
    pub n: usize,
    pub m: usize,
    /// Smallest slack of the rows checked at `x_0`.
    pub x0_margin: f64,
}

impl CondensedQp {
    pub fn cost(&self, u: &DVector<f64>) -> f64 {
        self.qp.objective(u) + self.constant
    }

    pub fn split(&self, u: &DVector<f64>) -> Vec<DVector<f64>> {
        (0..self.horizon)
            .map(|k| u.rows(k * self.m, self.m).into_owned())
            .collect()
    }

    pub fn stack(&self, u_seq: &[DVector<f64>]) -> DVector<f64> {
        let mut u = DVector::zeros(self.horizon * self.m);
        for (k, uk) in u_seq.iter().enumerate().take(self.horizon) {
            u.rows_mut(k * self.m, self.m).copy_from(uk);
        }
        u
    }
}

struct RowBuilder {
    normals: Vec<DVector<f64>>,
    offsets: Vec<f64>,
    tags: Vec<RowTag>,
    x0_margin: f64,
    x0_tol: f64,
}

impl RowBuilder {
    /// Adds `coef'U <= offset`, or checks it at `x_0` when `coef` vanishes.
    fn push(&mut self, coef: DVector<f64>, offset: f64, scale: f64, tag: RowTag) -> Result<()> {
        if coef.amax() <= 1e-12 * scale.max(1.0) {
            self.x0_margin = self.x0_margin.min(offset);
            if offset < -self.x0_tol {
                return Err(Error::InitialStateOutside { violation: -offset });
            }
            return Ok(());
        }
        self.normals.push(coef);
        self.offsets.push(offset);
        self.tags.push(tag);
        Ok(())
    }
}

/// Condense with the default `x_0` tolerance.
pub fn condense(
    model: &VertexModel,
    design: &DesignResult,
    suite: &SetSuite,
    xi_seq: &PredictionSequence,
    x0: &DVector<f64>,
) -> Result<CondensedQp> {
    condense_with_tol(model, design, suite, xi_seq, x0, X0_TOL)
}

pub fn condense_with_tol(
    model: &VertexModel,
    design: &DesignResult,
    suite: &SetSuite,
    xi_seq: &PredictionSequence,
    x0: &DVector<f64>,
    x0_tol: f64,
) -> Result<CondensedQp> {
    let (n, m) = (model.n(), model.m());
    check_dim("initial state", n, x0.len())?;
    check_dim("prediction sequence length", suite.n + 1, xi_seq.horizon() + 1)?;
    check_dim("design parameters", model.ell(), design.ell())?;
    check_dim("C_xu dimension", n + m, suite.cxu.dim())?;
    check_dim("terminal set dimension", n, suite.x_n.dim())?;
    let horizon = xi_seq.horizon();
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let nu = horizon * m;
    let (phi, gamma) = predict_matrices(model, xi_seq)?;
    let free: Vec<DVector<f64>> = phi.iter().map(|p| p * x0).collect();
    let p_term = design.terminal_p(xi_seq.get(horizon))?;

    // Cost.
    let mut h = DMatrix::zeros(nu, nu);
    let mut g = DVector::zeros(nu);
    let mut constant = 0.0;
    for k in 0..=horizon {
        let w = if k == horizon { &p_term } else { &design.q };
        let wg = w * &gamma[k];
        h += gamma[k].transpose() * &wg;
        g += wg.transpose() * &free[k];
        constant += free[k].dot(&(w * &free[k]));
    }
    for k in 0..horizon {
        let mut block = h.view_mut((k * m, k * m), (m, m));
        block += &design.r;
    }
    h *= 2.0;
    g *= 2.0;
    h = (&h + h.transpose()) * 0.5;

    // Constraints.
    let mut rows = RowBuilder {
        normals: Vec::new(),
        offsets: Vec::new(),
        tags: Vec::new(),
        x0_margin: f64::INFINITY,
        x0_tol,
    };
    let state_rows = |rows: &mut RowBuilder, set: &Polytope, k: usize, tag: &dyn Fn(usize) -> RowTag| -> Result<()> {
        for r in 0..set.num_rows() {
            let hr = set.normals().row(r).transpose();
            let coef = gamma[k].transpose() * &hr;
            let offset = set.offsets()[r] - hr.dot(&free[k]);
            rows.push(coef, offset, hr.amax(), tag(r))?;
        }
        Ok(())
    };
    state_rows(&mut rows, model.state_set(), 0, &|row| RowTag::State { k: 0, row })?;
    for k in 0..horizon {
        if k > 0 {
            state_rows(&mut rows, model.state_set(), k, &|row| RowTag::State { k, row })?;
        }
        let uset = model.input_set();
        for r in 0..uset.num_rows() {
            let mut coef = DVector::zeros(nu);
            for j in 0..m {
                coef[k * m + j] = uset.normals()[(r, j)];
            }
            let scale = coef.amax();
            rows.push(coef, uset.offsets()[r], scale, RowTag::Input { k, row: r })?;
        }
        let cxu = &suite.cxu;
        for r in 0..cxu.num_rows() {
            let hx = cxu.normals().row(r).columns(0, n).transpose();
            let mut coef = gamma[k].transpose() * &hx;
            for j in 0..m {
                coef[k * m + j] += cxu.normals()[(r, n + j)];
            }
            let offset = cxu.offsets()[r] - hx.dot(&free[k]);
            let scale = cxu.normals().row(r).amax();
            rows.push(coef, offset, scale, RowTag::Cxu { k, row: r })?;
        }
    }
    state_rows(&mut rows, &suite.x_n, horizon, &|row| RowTag::Terminal { row })?;

    let mut a = DMatrix::zeros(rows.normals.len(), nu);
    for (i, c) in rows.normals.iter().enumerate() {
        a.set_row(i, &c.transpose());
    }
    let b = DVector::from_vec(rows.offsets);
    Ok(CondensedQp {
        qp: Qp::new(h, g, a, b),
        constant,
        tags: rows.tags,
        horizon,
        n,
        m,
        x0_margin: rows.x0_margin,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    pub status: QpStatus,
    pub u: DVector<f64>,
    pub u_sequence: Vec<DVector<f64>>,
    /// Finite-horizon cost including the constant term.
    pub objective: f64,
    pub active_rows: Vec<usize>,
    pub iterations: usize,
}

pub fn solve_condensed(
    cqp: &CondensedQp,
    warm_start: Option<&DVector<f64>>,
    settings: &QpSettings,
) -> Result<MpcSolution> {
    let sol = qp::solve_qp(&cqp.qp, warm_start, settings)?;
    Ok(MpcSolution {
        status: sol.status,
        u_sequence: cqp.split(&sol.x),
        objective: sol.objective + cqp.constant,
        u: sol.x,
        active_rows: sol.active,
        iterations: sol.iterations,
    })
}

/// Optimal finite-horizon cost at `x0`.
pub fn value_function(
    model: &VertexModel,
    design: &DesignResult,
    suite: &SetSuite,
    xi_seq: &PredictionSequence,
    x0: &DVector<f64>,
) -> Result<f64> {
    let cqp = condense(model, design, suite, xi_seq, x0)?;
    let sol = solve_condensed(&cqp, None, &QpSettings::default())?;
    match sol.status {
        QpStatus::Optimal => Ok(sol.objective.max(0.0)),
        status => Err(Error::Numerical(format!("value function QP ended with {status:?}"))),
    }
}
