//! Parameter estimator: windowed least squares over the simplex coordinates,
//! projection onto Ξ and a first-order filter
//!
//! ```text
//! ξ(t+1) = (1 - ς) ξ(t) + ς proj_Ξ(ϱ(t))
//! ```

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::model::VertexModel;
use crate::qp::{solve_qp, Qp, QpSettings, QpStatus};
use crate::simplex::{project_simplex, SimplexVec};

/// Default ridge weight of the least squares.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// One transition `(x(t-1), u(t-1), x(t))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub x_prev: DVector<f64>,
    pub u_prev: DVector<f64>,
    pub x_next: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsEstimate {
    pub rho: DVector<f64>,
    /// The Gram matrix was singular without regularization and the
    /// minimum-norm solution was returned.
    pub rank_deficient: bool,
}

/// Minimizer of `Σ ‖x⁺ - Σ ϱ_i A_i x - B u‖² + λ ‖ϱ - ϱ_prev‖²`.
pub fn ls_estimate<'a>(
    window: impl IntoIterator<Item = &'a Transition>,
    model: &VertexModel,
    rho_prev: &DVector<f64>,
    ridge: f64,
) -> Result<LsEstimate> {
    let ell = model.ell();
    check_dim("previous estimate", ell, rho_prev.len())?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidInput(format!("ridge weight {ridge} must be >= 0")));
    }
    let mut gram = DMatrix::zeros(ell, ell);
    let mut rhs = DVector::zeros(ell);
    let mut count = 0;
    for tr in window {
        check_dim("transition state", model.n(), tr.x_prev.len())?;
        check_dim("transition input", model.m(), tr.u_prev.len())?;
        check_dim("transition successor", model.n(), tr.x_next.len())?;
        let mut phi = DMatrix::zeros(model.n(), ell);
        for (i, a) in model.vertices().iter().enumerate() {
            phi.set_column(i, &(a * &tr.x_prev));
        }
        let target = &tr.x_next - model.b() * &tr.u_prev;
        gram += phi.transpose() * &phi;
        rhs += phi.transpose() * target;
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidInput(
            "least squares needs at least one transition".into(),
        ));
    }
    gram += DMatrix::identity(ell, ell) * ridge;
    rhs += rho_prev * ridge;
    let scale = gram.amax().max(f64::MIN_POSITIVE);
    if ridge > 0.0 {
        if let Some(chol) = gram.clone().cholesky() {
            return Ok(LsEstimate {
                rho: chol.solve(&rhs),
                rank_deficient: false,
            });
        }
    }
    let svd = gram.svd(true, true);
    let cutoff = 1e-12 * scale;
    let rank_deficient = svd.singular_values.iter().any(|s| *s <= cutoff);
    let rho = svd
        .solve(&rhs, cutoff)
        .map_err(|e| Error::Numerical(format!("least squares: {e}")))?;
    Ok(LsEstimate { rho, rank_deficient })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Window length `N_m`.
    pub window: usize,
    /// Filter gain `ς` in `[0, 1]`.
    pub gain: f64,
    pub ridge: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            window: 3,
            gain: 0.5,
            ridge: DEFAULT_RIDGE,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidInput("estimator window must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.gain) {
            return Err(Error::InvalidInput(format!("filter gain {} not in [0, 1]", self.gain)));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidInput(format!("ridge weight {} must be >= 0", self.ridge)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub config: EstimatorConfig,
    pub window: VecDeque<Transition>,
    pub xi: SimplexVec,
    pub rho_prev: DVector<f64>,
    /// Projection of the last least-squares estimate.
    pub projected: Option<SimplexVec>,
    pub rank_deficient: bool,
}

impl EstimatorState {
    /// Starts at the simplex barycenter.
    pub fn new(ell: usize, config: EstimatorConfig) -> Result<Self> {
        Self::with_initial(SimplexVec::uniform(ell), config)
    }

    pub fn with_initial(xi: SimplexVec, config: EstimatorConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            rho_prev: xi.weights().clone(),
            xi,
            config,
            window: VecDeque::with_capacity(config.window),
            projected: None,
            rank_deficient: false,
        })
    }

    /// Record a transition and update `ξ`.
    pub fn step(&mut self, transition: Transition, model: &VertexModel) -> Result<&SimplexVec> {
        check_dim("estimator parameters", model.ell(), self.xi.len())?;
        if self.window.len() == self.config.window {
            self.window.pop_front();
        }
        self.window.push_back(transition);
        let est = ls_estimate(&self.window, model, &self.rho_prev, self.config.ridge)?;
        let projected = project_simplex(&est.rho);
        self.xi = self.xi.blend(&projected, self.config.gain);
        self.rho_prev = est.rho;
        self.rank_deficient = est.rank_deficient;
        self.projected = Some(projected);
        Ok(&self.xi)
    }
}

/// `ε(ξ, Ā) = min ‖ξ - ξ'‖` over `ξ' ∈ Ξ` with `Σ ξ'_i A_i = Ā`.
pub fn matrix_space_error(model: &VertexModel, xi: &SimplexVec, a_true: &DMatrix<f64>) -> Result<f64> {
    let ell = model.ell();
    check_dim("estimate", ell, xi.len())?;
    check_dim("true matrix rows", model.n(), a_true.nrows())?;
    check_dim("true matrix columns", model.n(), a_true.ncols())?;
    let nn = model.n() * model.n();
    let mut eq = DMatrix::zeros(nn + 1, ell);
    let mut rhs = DVector::zeros(nn + 1);
    for (i, a) in model.vertices().iter().enumerate() {
        eq.view_mut((0, i), (nn, 1)).copy_from_slice(a.as_slice());
        eq[(nn, i)] = 1.0;
    }
    rhs.rows_mut(0, nn).copy_from_slice(a_true.as_slice());
    rhs[nn] = 1.0;
    // Drop dependent equality rows so the solver sees a full-rank system.
    let (eq, rhs) = independent_rows(&eq, &rhs);
    let qp = Qp::new(
        DMatrix::identity(ell, ell),
        -xi.weights(),
        -DMatrix::identity(ell, ell),
        DVector::zeros(ell),
    )
    .with_equalities(eq, rhs);
    let sol = solve_qp(&qp, None, &QpSettings::default())?;
    if sol.status != QpStatus::Optimal {
        return Err(Error::InvalidInput(
            "true matrix is not in the convex hull of the vertices".into(),
        ));
    }
    Ok((&sol.x - xi.weights()).norm())
}

fn independent_rows(a: &DMatrix<f64>, b: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mut kept: Vec<usize> = Vec::new();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for i in 0..a.nrows() {
        let mut v = a.row(i).transpose();
        let norm = v.norm();
        for q in &basis {
            let c = q.dot(&v);
            v -= q * c;
        }
        if v.norm() > 1e-10 * norm.max(1e-300) && norm > 0.0 {
            basis.push(&v / v.norm());
            kept.push(i);
        }
    }
    let rows = DMatrix::from_fn(kept.len(), a.ncols(), |r, c| a[(kept[r], c)]);
    let rhs = DVector::from_iterator(kept.len(), kept.iter().map(|&r| b[r]));
    (rows, rhs)
}
