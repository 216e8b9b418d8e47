//! Offline synthesis of vertex gains `K_i` and terminal weights `P_i`.
//!
//! For every ordered vertex pair `(i, j)` the block matrix
//!
//! ```text
//!  [ G_i + G_i' - S_i   (A_i G_i + B E_i)'   E_i'    G_i'  ]
//!  [ A_i G_i + B E_i     S_j                 0       0     ]
//!  [ E_i                 0                   R^-1    0     ]
//!  [ G_i                 0                   0       Q^-1  ]
//! ```
//!
//! must be positive definite. A solution yields `P_i = S_i^-1` and
//! `K_i = E_i G_i^-1`, for which `V_ξ(x) = x' P(ξ) x` decreases by at least
//! `x'(Q + κ(ξ)' R κ(ξ)) x` along the closed loop for every pair of
//! parameters. Strictness is enforced as `⪰ ε I`; feasibility is posed as
//! `min t s.t. blocks ⪰ (ε - t) I` and accepted iff `t <= 0`.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::model::VertexModel;
use crate::sdp::{self, BlockSdp, SdpSettings, SdpStatus};
use crate::simplex::SimplexVec;

/// Bound on each decision variable; keeps the SDP optimal face compact.
const VARIABLE_BOUND: f64 = 1e4;
/// Condition number beyond which `S_i` or `G_i` is not inverted.
const MAX_CONDITION: f64 = 1e12;

/// Default strictness margin `1e-6 (1 + max |A_i|)`.
pub fn default_eps(model: &VertexModel) -> f64 {
    1e-6 * (1.0 + model.max_abs_entry())
}

/// One `(i, j)` block as an affine function of the decision variables.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub i: usize,
    pub j: usize,
    pub constant: DMatrix<f64>,
    pub coefficients: Vec<(usize, DMatrix<f64>)>,
}

/// The design LMI over `{G_i, S_i, E_i}`.
///
/// Variables are laid out per vertex: `G_i` row-major (`n²`), the upper
/// triangle of `S_i` (`n(n+1)/2`), then `E_i` row-major (`m n`).
#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub n: usize,
    pub m: usize,
    pub ell: usize,
    pub eps_margin: f64,
    pub blocks: Vec<LmiBlock>,
}

impl ConicProblem {
    pub fn block_size(&self) -> usize {
        3 * self.n + self.m
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    fn per_vertex(&self) -> usize {
        vars_per_vertex(self.n, self.m)
    }

    pub fn num_vars(&self) -> usize {
        self.ell * self.per_vertex()
    }

    /// Block values at `vars` (without the margin).
    pub fn evaluate(&self, vars: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.blocks
            .iter()
            .map(|blk| {
                let mut out = blk.constant.clone();
                for (k, coef) in &blk.coefficients {
                    out += coef * vars[*k];
                }
                out
            })
            .collect()
    }

    /// Smallest eigenvalue over all blocks at `vars`.
    pub fn min_eigenvalue(&self, vars: &DVector<f64>) -> f64 {
        self.evaluate(vars)
            .into_iter()
            .map(|m| SymmetricEigen::new(m).eigenvalues.min())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn unpack(&self, vars: &DVector<f64>) -> Certificates {
        let (n, m) = (self.n, self.m);
        let mut out = Certificates::default();
        for i in 0..self.ell {
            let base = i * self.per_vertex();
            let g = DMatrix::from_row_slice(n, n, &vars.as_slice()[base..base + n * n]);
            let mut s = DMatrix::zeros(n, n);
            let mut k = base + n * n;
            for r in 0..n {
                for c in r..n {
                    s[(r, c)] = vars[k];
                    s[(c, r)] = vars[k];
                    k += 1;
                }
            }
            let e = DMatrix::from_row_slice(m, n, &vars.as_slice()[k..k + m * n]);
            out.g.push(g);
            out.s.push(s);
            out.e.push(e);
        }
        out
    }

    pub fn pack(&self, cert: &Certificates) -> DVector<f64> {
        let (n, m) = (self.n, self.m);
        let mut v = Vec::with_capacity(self.num_vars());
        for i in 0..self.ell {
            for r in 0..n {
                for c in 0..n {
                    v.push(cert.g[i][(r, c)]);
                }
            }
            for r in 0..n {
                for c in r..n {
                    v.push(cert.s[i][(r, c)]);
                }
            }
            for r in 0..m {
                for c in 0..n {
                    v.push(cert.e[i][(r, c)]);
                }
            }
        }
        DVector::from_vec(v)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Certificates {
    pub g: Vec<DMatrix<f64>>,
    pub s: Vec<DMatrix<f64>>,
    pub e: Vec<DMatrix<f64>>,
}

fn vars_per_vertex(n: usize, m: usize) -> usize {
    n * n + n * (n + 1) / 2 + m * n
}

fn check_spd(name: &str, m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() || (m - m.transpose()).amax() > 1e-12 * (1.0 + m.amax()) {
        return Err(Error::InvalidInput(format!("{name} must be symmetric")));
    }
    if SymmetricEigen::new(m.clone()).eigenvalues.min() <= 0.0 {
        return Err(Error::InvalidInput(format!("{name} must be positive definite")));
    }
    Ok(())
}

fn assemble_block(
    model: &VertexModel,
    q_inv: &DMatrix<f64>,
    r_inv: &DMatrix<f64>,
    i: usize,
    j: usize,
    cert: &Certificates,
) -> DMatrix<f64> {
    let (n, m) = (model.n(), model.m());
    let (g, e) = (&cert.g[i], &cert.e[i]);
    let top = &cert.s[i];
    let acl = &model.vertices()[i] * g + model.b() * e;
    let size = 3 * n + m;
    let mut out = DMatrix::zeros(size, size);
    out.view_mut((0, 0), (n, n)).copy_from(&(g + g.transpose() - top));
    out.view_mut((n, 0), (n, n)).copy_from(&acl);
    out.view_mut((0, n), (n, n)).copy_from(&acl.transpose());
    out.view_mut((2 * n, 0), (m, n)).copy_from(e);
    out.view_mut((0, 2 * n), (n, m)).copy_from(&e.transpose());
    out.view_mut((2 * n + m, 0), (n, n)).copy_from(g);
    out.view_mut((0, 2 * n + m), (n, n)).copy_from(&g.transpose());
    out.view_mut((n, n), (n, n)).copy_from(&cert.s[j]);
    out.view_mut((2 * n, 2 * n), (m, m)).copy_from(r_inv);
    out.view_mut((2 * n + m, 2 * n + m), (n, n)).copy_from(q_inv);
    out
}

pub fn build_design_lmi(
    model: &VertexModel,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    eps_margin: f64,
) -> Result<ConicProblem> {
    let (n, m, ell) = (model.n(), model.m(), model.ell());
    check_dim("Q rows", n, q.nrows())?;
    check_dim("R rows", m, r.nrows())?;
    check_spd("Q", q)?;
    check_spd("R", r)?;
    if !(eps_margin > 0.0 && eps_margin.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "eps_margin must be positive, got {eps_margin}"
        )));
    }
    let q_inv = q
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("Q not invertible".into()))?;
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("R not invertible".into()))?;

    let shell = ConicProblem {
        n,
        m,
        ell,
        eps_margin,
        blocks: Vec::new(),
    };
    let nv = shell.num_vars();
    let zero = shell.unpack(&DVector::zeros(nv));
    let mut blocks = Vec::with_capacity(ell * ell);
    for i in 0..ell {
        for j in 0..ell {
            let constant = assemble_block(model, &q_inv, &r_inv, i, j, &zero);
            let mut coefficients = Vec::new();
            for k in 0..nv {
                let mut unit = DVector::zeros(nv);
                unit[k] = 1.0;
                let coef = assemble_block(model, &q_inv, &r_inv, i, j, &shell.unpack(&unit)) - &constant;
                if coef.amax() > 0.0 {
                    coefficients.push((k, coef));
                }
            }
            blocks.push(LmiBlock {
                i,
                j,
                constant,
                coefficients,
            });
        }
    }
    Ok(ConicProblem { blocks, ..shell })
}

/// Output of the offline design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignResult {
    pub p: Vec<DMatrix<f64>>,
    pub k: Vec<DMatrix<f64>>,
    pub s: Vec<DMatrix<f64>>,
    pub g: Vec<DMatrix<f64>>,
    pub e: Vec<DMatrix<f64>>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub eps_margin: f64,
    /// Optimal slack `t`; feasible designs have `t <= 0`.
    pub slack: f64,
    pub model_hash: String,
}

impl DesignResult {
    /// Assemble a result from gains and weights only, with `S = P^-1`,
    /// `G = S`, `E = K G`. Used for hand-built terminal laws.
    pub fn from_gains(
        model: &VertexModel,
        p: Vec<DMatrix<f64>>,
        k: Vec<DMatrix<f64>>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Result<Self> {
        check_dim("terminal weights", model.ell(), p.len())?;
        check_dim("gains", model.ell(), k.len())?;
        let mut s = Vec::new();
        let mut e = Vec::new();
        for (pi, ki) in p.iter().zip(&k) {
            check_dim("P rows", model.n(), pi.nrows())?;
            check_dim("K rows", model.m(), ki.nrows())?;
            check_dim("K columns", model.n(), ki.ncols())?;
            check_spd("P_i", pi)?;
            let si = pi
                .clone()
                .try_inverse()
                .ok_or_else(|| Error::Numerical("P_i singular".into()))?;
            e.push(ki * &si);
            s.push(si);
        }
        Ok(Self {
            p,
            k,
            g: s.clone(),
            s,
            e,
            q,
            r,
            eps_margin: 0.0,
            slack: 0.0,
            model_hash: model.hash(),
        })
    }

    pub fn ell(&self) -> usize {
        self.p.len()
    }

    /// `κ(ξ) = Σ ξ_i K_i`.
    pub fn kappa(&self, xi: &SimplexVec) -> Result<DMatrix<f64>> {
        check_dim("simplex vector", self.ell(), xi.len())?;
        Ok(xi.combine(&self.k))
    }

    /// `P(ξ) = Σ ξ_i P_i`.
    pub fn terminal_p(&self, xi: &SimplexVec) -> Result<DMatrix<f64>> {
        check_dim("simplex vector", self.ell(), xi.len())?;
        Ok(xi.combine(&self.p))
    }

    /// Re-evaluate the LMI blocks at the stored certificates; returns the
    /// smallest eigenvalue found.
    pub fn lmi_min_eigenvalue(&self, model: &VertexModel) -> Result<f64> {
        let problem = build_design_lmi(model, &self.q, &self.r, self.eps_margin.max(f64::MIN_POSITIVE))?;
        let cert = Certificates {
            g: self.g.clone(),
            s: self.s.clone(),
            e: self.e.clone(),
        };
        Ok(problem.min_eigenvalue(&problem.pack(&cert)))
    }

    pub fn check_model(&self, model: &VertexModel) -> Result<()> {
        if self.model_hash != model.hash() {
            return Err(Error::ArtifactMismatch(
                "design was computed for a different model".into(),
            ));
        }
        Ok(())
    }
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().singular_values();
    let smin = sv.min();
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        sv.max() / smin
    }
}

/// SDP in the form `max b'y s.t. C - Σ y_k A_k ⪰ 0` over `y = (vars, t)`
/// with blocks `LMI_ij(vars) - (ε - t) I ⪰ 0` and `|y_k| <= bound`.
/// Without the slack the objective is zero and the interior-point iterates
/// approach the analytic center of `{LMI_ij ⪰ ε I}`.
fn design_sdp(problem: &ConicProblem, with_slack: bool) -> BlockSdp {
    design_sdp_with(problem, with_slack, &[], None)
}

/// Like [`design_sdp`] with additional blocks `extra ⪰ 0` and a linear
/// objective on the decision variables.
fn design_sdp_with(
    problem: &ConicProblem,
    with_slack: bool,
    extra: &[LmiBlock],
    objective: Option<DVector<f64>>,
) -> BlockSdp {
    let nv = problem.num_vars();
    let nblk = problem.num_blocks();
    let bs = problem.block_size();
    let ny = nv + usize::from(with_slack);
    let mut block_sizes = vec![bs; nblk];
    block_sizes.extend(extra.iter().map(|blk| blk.constant.nrows()));
    block_sizes.extend(std::iter::repeat_n(1, 2 * nv));
    let mut c: Vec<DMatrix<f64>> = problem
        .blocks
        .iter()
        .map(|blk| &blk.constant - DMatrix::identity(bs, bs) * problem.eps_margin)
        .collect();
    c.extend(extra.iter().map(|blk| blk.constant.clone()));
    c.extend(std::iter::repeat_n(DMatrix::from_element(1, 1, VARIABLE_BOUND), 2 * nv));
    let mut a: Vec<Vec<(usize, DMatrix<f64>)>> = vec![Vec::new(); ny];
    for (bi, blk) in problem.blocks.iter().enumerate() {
        for (k, coef) in &blk.coefficients {
            a[*k].push((bi, -coef));
        }
        if with_slack {
            a[nv].push((bi, -DMatrix::identity(bs, bs)));
        }
    }
    for (ei, blk) in extra.iter().enumerate() {
        for (k, coef) in &blk.coefficients {
            a[*k].push((nblk + ei, -coef));
        }
    }
    let bound_base = nblk + extra.len();
    for (k, col) in a.iter_mut().take(nv).enumerate() {
        col.push((bound_base + 2 * k, DMatrix::from_element(1, 1, 1.0)));
        col.push((bound_base + 2 * k + 1, DMatrix::from_element(1, 1, -1.0)));
    }
    let mut b = DVector::zeros(ny);
    if with_slack {
        b[nv] = -1.0;
    }
    if let Some(obj) = objective {
        b.rows_mut(0, nv).copy_from(&obj);
    }
    BlockSdp { block_sizes, c, a, b }
}

/// Splits an affine matrix-valued map of the certificates into constant and
/// per-variable coefficients.
fn affine_blocks<F>(problem: &ConicProblem, f: F) -> Vec<LmiBlock>
where
    F: Fn(&Certificates) -> Vec<DMatrix<f64>>,
{
    let nv = problem.num_vars();
    let constants = f(&problem.unpack(&DVector::zeros(nv)));
    let mut blocks: Vec<LmiBlock> = constants
        .into_iter()
        .map(|constant| LmiBlock {
            i: 0,
            j: 0,
            constant,
            coefficients: Vec::new(),
        })
        .collect();
    for k in 0..nv {
        let mut unit = DVector::zeros(nv);
        unit[k] = 1.0;
        for (blk, val) in blocks.iter_mut().zip(f(&problem.unpack(&unit))) {
            let coef = val - &blk.constant;
            if coef.amax() > 0.0 {
                blk.coefficients.push((k, coef));
            }
        }
    }
    blocks
}

/// Blocks requiring the level set `{x : x' P_i x <= γ}` to lie in `X` and
/// `K_i x` to lie in `U` on it:
/// `b² - γ h' S_i h >= 0` per state row and
/// `[c²/γ, g' E_i; E_i' g, G_i + G_i' - S_i] ⪰ 0` per input row.
fn envelope_blocks(model: &VertexModel, problem: &ConicProblem, level: f64) -> Vec<LmiBlock> {
    let xs = model.state_set();
    let us = model.input_set();
    let n = model.n();
    affine_blocks(problem, |cert| {
        let mut out = Vec::new();
        for i in 0..problem.ell {
            for r in 0..xs.num_rows() {
                let h = xs.normals().row(r).transpose();
                let b = xs.offsets()[r];
                out.push(DMatrix::from_element(1, 1, b * b - level * h.dot(&(&cert.s[i] * &h))));
            }
            let inner = &cert.g[i] + cert.g[i].transpose() - &cert.s[i];
            for r in 0..us.num_rows() {
                let g = us.normals().row(r).transpose();
                let c = us.offsets()[r];
                let ge = g.transpose() * &cert.e[i];
                let mut blk = DMatrix::zeros(n + 1, n + 1);
                blk[(0, 0)] = c * c / level;
                blk.view_mut((0, 1), (1, n)).copy_from(&ge);
                blk.view_mut((1, 0), (n, 1)).copy_from(&ge.transpose());
                blk.view_mut((1, 1), (n, n)).copy_from(&inner);
                out.push(blk);
            }
        }
        out
    })
}

fn trace_s_objective(problem: &ConicProblem) -> DVector<f64> {
    let mut cert = problem.unpack(&DVector::zeros(problem.num_vars()));
    for s in cert.s.iter_mut() {
        s.fill_with_identity();
    }
    let mut obj = problem.pack(&cert);
    // Off-diagonal S entries are packed once but appear twice; identity has none.
    obj.apply(|v| *v = if *v != 0.0 { 1.0 } else { 0.0 });
    obj
}

/// Which feasible point of the design LMI is returned.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Selection {
    /// The minimizer of the slack `t`: the point with the largest common
    /// eigenvalue margin over all blocks.
    #[default]
    MaxMargin,
    /// The analytic center of `{LMI_ij ⪰ ε I}`, after the slack problem has
    /// certified feasibility.
    AnalyticCenter,
    /// Maximizes `Σ trace(S_i)` subject to the level sets
    /// `x' P_i x <= level` lying in `X` with `K_i x ∈ U`, which favors
    /// low-gain certificates with large admissible regions.
    MaxEnvelope { level: f64 },
}

/// Solve the design LMI with the default [`Selection`].
pub fn solve_design(model: &VertexModel, q: &DMatrix<f64>, r: &DMatrix<f64>, eps_margin: f64) -> Result<DesignResult> {
    solve_design_with(model, q, r, eps_margin, Selection::default())
}

/// Solve the design LMI and recover `P_i`, `K_i`.
pub fn solve_design_with(
    model: &VertexModel,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    eps_margin: f64,
    selection: Selection,
) -> Result<DesignResult> {
    let problem = build_design_lmi(model, q, r, eps_margin)?;
    let nv = problem.num_vars();
    let sol = sdp::solve(&design_sdp(&problem, true), &SdpSettings::default())?;
    let slack = sol.y[nv];
    let mut vars = sol.y.rows(0, nv).into_owned();
    let mut min_eig = problem.min_eigenvalue(&vars);

    if slack > 0.0 && min_eig < eps_margin {
        return Err(Error::AssumptionViolation { slack });
    }
    if min_eig < eps_margin / 2.0 {
        return Err(Error::Numerical(format!(
            "design SDP {:?} after {} iterations; re-evaluated block eigenvalue {min_eig:.3e} < eps/2",
            sol.status, sol.iterations
        )));
    }
    if sol.status != SdpStatus::Converged && min_eig < eps_margin {
        return Err(Error::Numerical(format!(
            "design SDP stalled (gap {:.2e}, infeasibility {:.2e})",
            sol.relative_gap,
            sol.primal_infeasibility.max(sol.dual_infeasibility)
        )));
    }
    if selection != Selection::MaxMargin && slack < 0.0 {
        let (objective, extra) = match selection {
            Selection::MaxEnvelope { level } => {
                if !(level > 0.0 && level.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "envelope level must be positive, got {level}"
                    )));
                }
                (
                    Some(trace_s_objective(&problem)),
                    envelope_blocks(model, &problem, level),
                )
            }
            _ => (None, Vec::new()),
        };
        // Selection runs with twice the margin so that a boundary optimum
        // still clears ε after rounding.
        let mut tightened = problem.clone();
        tightened.eps_margin = 2.0 * eps_margin;
        let center = sdp::solve(
            &design_sdp_with(&tightened, false, &extra, objective),
            &SdpSettings::default(),
        )?;
        let eig = problem.min_eigenvalue(&center.y);
        if eig < eps_margin {
            return Err(Error::Numerical(format!(
                "certificate selection {selection:?} ended {:?} with block eigenvalue {eig:.3e} < eps",
                center.status
            )));
        }
        vars = center.y;
        min_eig = eig;
    }
    debug_assert!(min_eig >= eps_margin / 2.0);

    let cert = problem.unpack(&vars);
    let mut p = Vec::with_capacity(model.ell());
    let mut k = Vec::with_capacity(model.ell());
    for i in 0..model.ell() {
        let si = &cert.s[i];
        if condition_number(si) >= MAX_CONDITION {
            return Err(Error::Numerical(format!("S_{} is ill-conditioned", i + 1)));
        }
        let pi = Cholesky::new(si.clone())
            .ok_or_else(|| Error::Numerical(format!("S_{} is not positive definite", i + 1)))?
            .inverse();
        let gi = &cert.g[i];
        if condition_number(gi) >= MAX_CONDITION {
            return Err(Error::Numerical(format!("G_{} is ill-conditioned", i + 1)));
        }
        let gt_inv = gi
            .transpose()
            .lu()
            .solve(&cert.e[i].transpose())
            .ok_or_else(|| Error::Numerical(format!("G_{} is singular", i + 1)))?;
        p.push((&pi + pi.transpose()) * 0.5);
        k.push(gt_inv.transpose());
    }
    Ok(DesignResult {
        p,
        k,
        s: cert.s,
        g: cert.g,
        e: cert.e,
        q: q.clone(),
        r: r.clone(),
        eps_margin,
        slack,
        model_hash: model.hash(),
    })
}

#[derive(Debug, Clone)]
pub struct DecreaseReport {
    pub samples: usize,
    /// Largest `ΔV + x'(Q + κ'Rκ)x` seen, normalized by `1 + ‖x‖²`.
    pub worst_residual: f64,
    pub passed: bool,
}

/// Decrease residual `V(x+, ξ+) - V(x, ξ) + x'(Q + κ(ξ)'Rκ(ξ))x` under the
/// closed loop `x+ = A(ξ) x + B κ(ξ) x`.
pub fn decrease_residual(
    design: &DesignResult,
    model: &VertexModel,
    x: &DVector<f64>,
    xi: &SimplexVec,
    xi_next: &SimplexVec,
) -> Result<f64> {
    let kap = design.kappa(xi)?;
    let u = &kap * x;
    let x_next = model.step(xi, x, &u)?;
    let v_next = x_next.dot(&(design.terminal_p(xi_next)? * &x_next));
    let v = x.dot(&(design.terminal_p(xi)? * x));
    let stage = x.dot(&(&design.q * x)) + u.dot(&(&design.r * &u));
    Ok(v_next - v + stage)
}

/// Sample-based check of the Lyapunov decrease. All vertex pairs are checked
/// first, then `n_samples` random triples `(x on the unit sphere, ξ, ξ+)`.
pub fn verify_decrease(
    design: &DesignResult,
    model: &VertexModel,
    n_samples: usize,
    rng_seed: u64,
) -> Result<DecreaseReport> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let ell = model.ell();
    let n = model.n();
    let mut worst = f64::NEG_INFINITY;
    let mut samples = 0;
    let mut record = |x: &DVector<f64>, a: &SimplexVec, b: &SimplexVec| -> Result<()> {
        let r = decrease_residual(design, model, x, a, b)?;
        worst = worst.max(r / (1.0 + x.norm_squared()));
        samples += 1;
        Ok(())
    };
    let unit = |rng: &mut ChaCha8Rng| {
        let v = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(rng)));
        let norm: f64 = v.norm();
        v / norm.max(1e-300)
    };
    for i in 0..ell {
        for j in 0..ell {
            let x = unit(&mut rng);
            record(&x, &SimplexVec::vertex(ell, i), &SimplexVec::vertex(ell, j))?;
        }
    }
    for _ in 0..n_samples {
        let x = unit(&mut rng);
        let a = SimplexVec::sample(ell, &mut rng);
        let b = SimplexVec::sample(ell, &mut rng);
        record(&x, &a, &b)?;
    }
    Ok(DecreaseReport {
        samples,
        worst_residual: worst,
        passed: worst <= 1e-8,
    })
}
