//! Primal-dual interior point method for small block-diagonal SDPs.
//!
//! Dual form solved here:
//!
//! ```text
//!     maximize    b'y
//!     subject to  Z = C - Σ_k y_k A_k  ⪰ 0
//! ```
//!
//! with primal `min <C, X> s.t. <A_k, X> = b_k, X ⪰ 0`. Search directions are
//! HKM with a Mehrotra predictor-corrector; the iteration starts infeasible.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BlockSdp {
    pub block_sizes: Vec<usize>,
    pub c: Vec<DMatrix<f64>>,
    /// For each variable, the blocks it touches and its coefficient matrix there.
    pub a: Vec<Vec<(usize, DMatrix<f64>)>>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SdpSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
}

impl Default for SdpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200,
            step_fraction: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Converged,
    /// Progress stalled; the iterate is returned as the best available.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub y: DVector<f64>,
    pub x: Vec<DMatrix<f64>>,
    pub z: Vec<DMatrix<f64>>,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
}

type Blocks = Vec<DMatrix<f64>>;

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl BlockSdp {
    fn num_vars(&self) -> usize {
        self.a.len()
    }

    fn validate(&self) -> Result<()> {
        if self.c.len() != self.block_sizes.len() {
            return Err(Error::InvalidInput("SDP: one C block per block size".into()));
        }
        if self.b.len() != self.a.len() {
            return Err(Error::InvalidInput("SDP: one b entry per variable".into()));
        }
        for (c, &s) in self.c.iter().zip(&self.block_sizes) {
            if c.shape() != (s, s) {
                return Err(Error::InvalidInput("SDP: C block has wrong shape".into()));
            }
        }
        for entries in &self.a {
            for (blk, m) in entries {
                let s = *self
                    .block_sizes
                    .get(*blk)
                    .ok_or_else(|| Error::InvalidInput("SDP: block index out of range".into()))?;
                if m.shape() != (s, s) {
                    return Err(Error::InvalidInput("SDP: A block has wrong shape".into()));
                }
            }
        }
        Ok(())
    }

    /// `A(X)_k = Σ <A_k, X>`.
    fn op(&self, x: &Blocks) -> DVector<f64> {
        DVector::from_iterator(
            self.num_vars(),
            self.a
                .iter()
                .map(|entries| entries.iter().map(|(blk, m)| inner(m, &x[*blk])).sum()),
        )
    }

    /// `A*(y) = Σ y_k A_k`.
    fn adjoint(&self, y: &DVector<f64>) -> Blocks {
        let mut out: Blocks = self.block_sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect();
        for (k, entries) in self.a.iter().enumerate() {
            for (blk, m) in entries {
                out[*blk] += m * y[k];
            }
        }
        out
    }

    /// `Z = C - A*(y)`.
    pub fn slack(&self, y: &DVector<f64>) -> Blocks {
        self.adjoint(y).iter().zip(&self.c).map(|(ay, c)| c - ay).collect()
    }

    fn vars_by_block(&self) -> Vec<Vec<(usize, &DMatrix<f64>)>> {
        let mut out = vec![Vec::new(); self.block_sizes.len()];
        for (k, entries) in self.a.iter().enumerate() {
            for (blk, m) in entries {
                out[*blk].push((k, m));
            }
        }
        out
    }
}

/// Largest `α` with `X + α D ⪰ 0` (may be infinite).
fn max_step(x: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<f64> {
    let chol =
        Cholesky::new(x.clone()).ok_or_else(|| Error::Numerical("SDP iterate lost positive definiteness".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("SDP: singular Cholesky factor".into()))?;
    let m = symmetrize(&(&linv * d * linv.transpose()));
    let lmin = SymmetricEigen::new(m).eigenvalues.min();
    Ok(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
}

fn blocks_step(x: &Blocks, d: &Blocks) -> Result<f64> {
    let mut alpha = f64::INFINITY;
    for (xb, db) in x.iter().zip(d) {
        alpha = alpha.min(max_step(xb, db)?);
    }
    Ok(alpha)
}

fn blocks_inner(a: &Blocks, b: &Blocks) -> f64 {
    a.iter().zip(b).map(|(x, y)| inner(x, y)).sum()
}

fn blocks_norm(a: &Blocks) -> f64 {
    a.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

fn inverse_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Cholesky::new(m.clone())
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Numerical("SDP slack lost positive definiteness".into()))
}

pub fn solve(problem: &BlockSdp, settings: &SdpSettings) -> Result<SdpSolution> {
    problem.validate()?;
    let nv = problem.num_vars();
    let dim_total: usize = problem.block_sizes.iter().sum();
    let by_block = problem.vars_by_block();

    let c_norm = blocks_norm(&problem.c);
    let b_norm = problem.b.norm();
    let scale = 10.0 * (1.0f64).max(c_norm.sqrt()).max(b_norm.sqrt());
    let mut x: Blocks = problem
        .block_sizes
        .iter()
        .map(|&s| DMatrix::identity(s, s) * scale)
        .collect();
    let mut z = x.clone();
    let mut y = DVector::zeros(nv);

    let mut stall = 0;
    let mut iterations = 0;
    loop {
        let rp = &problem.b - problem.op(&x);
        let rd: Blocks = problem.slack(&y).iter().zip(&z).map(|(s, zb)| s - zb).collect();
        let mu = blocks_inner(&x, &z) / dim_total as f64;
        let pobj = blocks_inner(&problem.c, &x);
        let dobj = problem.b.dot(&y);
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = blocks_norm(&rd) / (1.0 + c_norm);
        let gap = blocks_inner(&x, &z) / (1.0 + pobj.abs() + dobj.abs());

        let done = pinf < settings.tol && dinf < settings.tol && gap < settings.tol;
        if done || iterations >= settings.max_iter || stall >= 5 {
            let status = if done { SdpStatus::Converged } else { SdpStatus::Stalled };
            return Ok(SdpSolution {
                status,
                y,
                x,
                z,
                iterations,
                primal_infeasibility: pinf,
                dual_infeasibility: dinf,
                relative_gap: gap,
            });
        }
        iterations += 1;

        let Ok(zinv) = z.iter().map(inverse_spd).collect::<Result<Blocks>>() else {
            stall = usize::MAX;
            continue;
        };

        // Schur complement M_kl = Σ <A_l, X A_k Z^-1>.
        let mut schur = DMatrix::zeros(nv, nv);
        for (blk, vars) in by_block.iter().enumerate() {
            let w: Vec<DMatrix<f64>> = vars.iter().map(|(_, ak)| &x[blk] * *ak * &zinv[blk]).collect();
            for (ik, (k, _)) in vars.iter().enumerate() {
                for (l, al) in vars.iter() {
                    schur[(*k, *l)] += inner(al, &w[ik]);
                }
            }
        }
        let schur = symmetrize(&schur);
        let reg = 1e-13 * (1.0 + schur.diagonal().amax());
        let factor = Cholesky::new(schur.clone()).or_else(|| Cholesky::new(&schur + DMatrix::identity(nv, nv) * reg));
        let Some(factor) = factor else {
            stall = usize::MAX;
            continue;
        };
        let solve_schur = |rhs: &DVector<f64>| -> Result<DVector<f64>> { Ok(factor.solve(rhs)) };

        let x_rd_zinv: Blocks = (0..x.len()).map(|b| &x[b] * &rd[b] * &zinv[b]).collect();
        let a_x_rd_zinv = problem.op(&x_rd_zinv);

        // Direction for complementarity target rc (dX Z + X dZ = rc).
        let direction = |rc: &Blocks| -> Result<(Blocks, DVector<f64>, Blocks)> {
            let rc_zinv: Blocks = rc.iter().zip(&zinv).map(|(r, zi)| r * zi).collect();
            let rhs = &rp - problem.op(&rc_zinv) + &a_x_rd_zinv;
            let dy = solve_schur(&rhs)?;
            let a_dy = problem.adjoint(&dy);
            let dz: Blocks = rd.iter().zip(&a_dy).map(|(r, a)| r - a).collect();
            let dx: Blocks = (0..x.len())
                .map(|b| symmetrize(&(&rc_zinv[b] - &x[b] * &dz[b] * &zinv[b])))
                .collect();
            Ok((dx, dy, dz))
        };

        let xz: Blocks = x.iter().zip(&z).map(|(xb, zb)| xb * zb).collect();
        let rc_aff: Blocks = xz.iter().map(|m| -m).collect();
        let (dx_a, _, dz_a) = direction(&rc_aff)?;
        // Rounding can leave an iterate numerically semidefinite; stop there
        // and let the caller judge the last iterate.
        let (Ok(ap), Ok(ad)) = (blocks_step(&x, &dx_a), blocks_step(&z, &dz_a)) else {
            stall = usize::MAX;
            continue;
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let x_aff: Blocks = x.iter().zip(&dx_a).map(|(a, d)| a + d * ap).collect();
        let z_aff: Blocks = z.iter().zip(&dz_a).map(|(a, d)| a + d * ad).collect();
        let mu_aff = blocks_inner(&x_aff, &z_aff) / dim_total as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let rc: Blocks = (0..x.len())
            .map(|b| DMatrix::identity(x[b].nrows(), x[b].nrows()) * (sigma * mu) - &xz[b] - &dx_a[b] * &dz_a[b])
            .collect();
        let (dx, dy, dz) = direction(&rc)?;
        let (Ok(ap), Ok(ad)) = (blocks_step(&x, &dx), blocks_step(&z, &dz)) else {
            stall = usize::MAX;
            continue;
        };
        let ap = (settings.step_fraction * ap).min(1.0);
        let ad = (settings.step_fraction * ad).min(1.0);
        if ap.max(ad) < 1e-10 {
            stall += 1;
        } else {
            stall = 0;
        }
        for b in 0..x.len() {
            x[b] = symmetrize(&(&x[b] + &dx[b] * ap));
            z[b] = symmetrize(&(&z[b] + &dz[b] * ad));
        }
        y += dy * ad;
    }
}
