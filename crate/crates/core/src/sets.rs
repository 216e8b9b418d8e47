//! Invariant and reachable sets: maximal RCI set `C`, robust state-input set
//! `C_xu`, maximal constraint-admissible terminal set `X_N`, the backward
//! family `S^(h)` and the horizon `N`.
//!
//! The terminal set only requires `(x, K_i x) ∈ X_xu` at the vertices. Since
//! `X_xu` is convex and `κ(ξ) = Σ ξ_i K_i`, the pair `(x, κ(ξ) x)` is the
//! convex combination `Σ ξ_i (x, K_i x)` and so lies in `X_xu` for every
//! `ξ ∈ Ξ`. The same argument applies to the closed-loop maps
//! `A(ξ) + B κ(ξ) = Σ ξ_i (A_i + B K_i)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::design::DesignResult;
use crate::error::{check_dim, Error, Result};
use crate::model::VertexModel;
use crate::polytope::{Polytope, DEFAULT_ROW_CAP, REDUNDANCY_TOL, SET_TOL};

/// Default cap on fixpoint iterations.
pub const DEFAULT_MAX_ITER: usize = 200;
/// Default cap on the horizon search.
pub const DEFAULT_H_MAX: usize = 50;
/// Smallest Chebyshev radius accepted for any computed set.
pub const MIN_INTERIOR_RADIUS: f64 = 1e-9;
/// Number of support points used to report partial coverage of `C`.
const COVERAGE_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SetSuite {
    pub c: Polytope,
    pub cxu: Polytope,
    pub x_n: Polytope,
    pub n: usize,
    pub s_family: Vec<Polytope>,
    pub rci_iterations: usize,
    pub mcas_iterations: usize,
    pub tol: f64,
    pub model_hash: String,
}

impl SetSuite {
    pub fn check_model(&self, model: &VertexModel) -> Result<()> {
        if self.model_hash != model.hash() {
            return Err(Error::ArtifactMismatch(
                "set suite was computed for a different model".into(),
            ));
        }
        Ok(())
    }
}

/// A set thinner than the fixpoint tolerance cannot be told apart from a
/// shrinking sequence that converges to a point, so it is rejected too.
fn require_interior(p: &Polytope, what: &str, tol: f64) -> Result<()> {
    let (_, radius) = p.chebyshev_center()?;
    if radius <= MIN_INTERIOR_RADIUS.max(tol) {
        return Err(Error::EmptySet(format!(
            "{what} has empty interior (Chebyshev radius {radius:.3e})"
        )));
    }
    Ok(())
}

/// Rows of `{(x, u) : A x + B u ∈ target}` in the lifted space.
fn successor_rows(a: &DMatrix<f64>, b: &DMatrix<f64>, target: &Polytope) -> Result<Polytope> {
    let mut ab = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    ab.view_mut((0, 0), (a.nrows(), a.ncols())).copy_from(a);
    ab.view_mut((0, a.ncols()), (b.nrows(), b.ncols())).copy_from(b);
    target.preimage_raw(&ab)
}

/// `{(x, u) ∈ base × U : A_i x + B u ∈ target ∀i}`, redundancy-removed.
fn lifted(model: &VertexModel, base: &Polytope, target: &Polytope, vertices: &[usize]) -> Result<Polytope> {
    let mut p = base.product(model.input_set());
    for &i in vertices {
        p = p.stack(&successor_rows(&model.vertices()[i], model.b(), target)?)?;
    }
    p.remove_redundant(REDUNDANCY_TOL)
}

fn input_dims(model: &VertexModel) -> Vec<usize> {
    (model.n()..model.n() + model.m()).collect()
}

fn all_vertices(model: &VertexModel) -> Vec<usize> {
    (0..model.ell()).collect()
}

/// Maximal robust control invariant set in `X`:
/// `C^(0) = X`, `C^(h+1) = {x : ∃u ∈ U, A_i x + B u ∈ C^(h) ∀i} ∩ C^(h)`.
pub fn max_rci(model: &VertexModel, max_iter: usize, tol: f64) -> Result<Polytope> {
    max_rci_counted(model, max_iter, tol).map(|(c, _)| c)
}

fn max_rci_counted(model: &VertexModel, max_iter: usize, tol: f64) -> Result<(Polytope, usize)> {
    let mut c = model.state_set().remove_redundant(REDUNDANCY_TOL)?;
    let verts = all_vertices(model);
    let drop = input_dims(model);
    for h in 0..max_iter {
        let pre = lifted(model, &c, &c, &verts)?.eliminate(&drop, DEFAULT_ROW_CAP)?;
        let next = pre.intersect(&c)?;
        if next.is_empty(0.0)? {
            return Err(Error::EmptySet("no RCI set within X".into()));
        }
        if c.is_subset(&next, tol)? {
            require_interior(&next, "RCI set", tol)?;
            return Ok((next, h + 1));
        }
        c = next;
    }
    Err(Error::NonTermination {
        what: "maximal RCI recursion",
        iterations: max_iter,
        last: Box::new(c),
    })
}

/// `C_xu = {(x, u) ∈ C × U : A_i x + B u ∈ C ∀i}`.
pub fn build_cxu(model: &VertexModel, c: &Polytope) -> Result<Polytope> {
    check_dim("C dimension", model.n(), c.dim())?;
    let cxu = lifted(model, c, c, &all_vertices(model))?;
    if cxu.is_empty(0.0)? {
        return Err(Error::EmptySet(
            "C_xu is empty, so C is not robust control invariant".into(),
        ));
    }
    Ok(cxu)
}

/// `{x : (x, K x) ∈ X_xu}`.
fn gain_slice(x_xu: &Polytope, k: &DMatrix<f64>) -> Result<Polytope> {
    let n = k.ncols();
    let mut lift = DMatrix::zeros(n + k.nrows(), n);
    lift.view_mut((0, 0), (n, n)).fill_with_identity();
    lift.view_mut((n, 0), (k.nrows(), n)).copy_from(k);
    x_xu.preimage_raw(&lift)
}

/// Maximal constraint-admissible set of the vertex closed loops
/// `A_i + B K_i` inside `X_xu`. Returns the set and the number of
/// iterations needed to certify the fixpoint.
pub fn mcas(
    model: &VertexModel,
    design: &DesignResult,
    x_xu: &Polytope,
    max_iter: usize,
    tol: f64,
) -> Result<(Polytope, usize)> {
    check_dim("X_xu dimension", model.n() + model.m(), x_xu.dim())?;
    check_dim("gains", model.ell(), design.k.len())?;
    let mut x = Polytope::universe(model.n());
    for k in &design.k {
        x = x.stack(&gain_slice(x_xu, k)?)?;
    }
    let mut x = x.remove_redundant(REDUNDANCY_TOL)?;
    let closed: Vec<DMatrix<f64>> = model
        .vertices()
        .iter()
        .zip(&design.k)
        .map(|(a, k)| a + model.b() * k)
        .collect();
    for h in 0..max_iter {
        let pre: Vec<Polytope> = closed
            .par_iter()
            .map(|acl| x.preimage_raw(acl))
            .collect::<Result<_>>()?;
        let mut next = x.clone();
        for p in &pre {
            next = next.stack(p)?;
        }
        let next = next.remove_redundant(REDUNDANCY_TOL)?;
        if next.is_empty(0.0)? {
            return Err(Error::EmptySet("terminal set is empty".into()));
        }
        if x.is_subset(&next, tol)? {
            require_interior(&next, "terminal set", tol)?;
            if !next.contains(&DVector::zeros(model.n()), 0.0)? {
                return Err(Error::EmptySet("origin is not in the terminal set".into()));
            }
            return Ok((next, h + 1));
        }
        x = next;
    }
    Err(Error::NonTermination {
        what: "MCAS recursion",
        iterations: max_iter,
        last: Box::new(x),
    })
}

/// One backward step: `S_i = {x ∈ X : ∃u ∈ U, A_i x + B u ∈ S_h}`,
/// returns `∩_i S_i`.
pub fn backward_step(model: &VertexModel, s_h: &Polytope, x: &Polytope, u: &Polytope) -> Result<Polytope> {
    check_dim("S dimension", model.n(), s_h.dim())?;
    check_dim("X dimension", model.n(), x.dim())?;
    check_dim("U dimension", model.m(), u.dim())?;
    if s_h.is_empty(0.0)? {
        return Err(Error::EmptySet("backward step from an empty set".into()));
    }
    let drop = input_dims(model);
    let per_vertex: Vec<Polytope> = model
        .vertices()
        .par_iter()
        .map(|a| {
            x.product(u)
                .stack(&successor_rows(a, model.b(), s_h)?)?
                .remove_redundant(REDUNDANCY_TOL)?
                .eliminate(&drop, DEFAULT_ROW_CAP)
        })
        .collect::<Result<_>>()?;
    let mut out = Polytope::universe(model.n());
    for (i, s_i) in per_vertex.iter().enumerate() {
        if s_i.is_empty(0.0)? {
            return Err(Error::EmptySet(format!(
                "backward reachable set for vertex {} is empty",
                i + 1
            )));
        }
        out = out.stack(s_i)?;
    }
    let out = out.remove_redundant(REDUNDANCY_TOL)?;
    if out.is_empty(0.0)? {
        return Err(Error::EmptySet("backward reachable set is empty".into()));
    }
    Ok(out)
}

fn coverage(c_points: &[DVector<f64>], s: &Polytope) -> Result<f64> {
    let mut hit = 0;
    for p in c_points {
        if s.contains(p, SET_TOL)? {
            hit += 1;
        }
    }
    Ok(hit as f64 / c_points.len().max(1) as f64)
}

/// Smallest `N <= h_max` with `C ⊆ S^(N)`, together with `S^(0..=N)`.
pub fn min_horizon(model: &VertexModel, x_n: &Polytope, c: &Polytope, h_max: usize) -> Result<(usize, Vec<Polytope>)> {
    min_horizon_from(model, vec![x_n.clone()], c, h_max)
}

/// Resume the horizon search from a previously computed prefix
/// `S^(0..=k)` of the backward family.
pub fn min_horizon_from(
    model: &VertexModel,
    mut family: Vec<Polytope>,
    c: &Polytope,
    h_max: usize,
) -> Result<(usize, Vec<Polytope>)> {
    let Some(first) = family.first() else {
        return Err(Error::InvalidInput("backward family needs S^(0)".into()));
    };
    check_dim("terminal set", model.n(), first.dim())?;
    check_dim("C dimension", model.n(), c.dim())?;
    let c_points = c.spread_support_points(COVERAGE_SAMPLES)?;
    let mut covered = Vec::new();
    for h in 0..=h_max {
        if h >= family.len() {
            let next = backward_step(model, &family[h - 1], model.state_set(), model.input_set())?;
            family.push(next);
        }
        if c.is_subset(&family[h], SET_TOL)? {
            family.truncate(h + 1);
            return Ok((h, family));
        }
        covered.push(coverage(&c_points, &family[h])?);
    }
    Err(Error::HorizonNotFound {
        h_max,
        coverage: covered,
    })
}

/// Assemble `C`, `C_xu`, `X_N = X∞(C_xu)` and the horizon `N`.
///
/// The horizon is raised to 1 when `C ⊆ X_N` already, since the online
/// problem needs at least one decision input.
pub fn build_set_suite(
    model: &VertexModel,
    design: &DesignResult,
    max_iter: usize,
    tol: f64,
    h_max: usize,
) -> Result<SetSuite> {
    design.check_model(model)?;
    let (c, rci_iterations) = max_rci_counted(model, max_iter, tol).map_err(|e| e.in_stage("maximal RCI set"))?;
    let cxu = build_cxu(model, &c).map_err(|e| e.in_stage("robust state-input set"))?;
    let (x_n, mcas_iterations) = mcas(model, design, &cxu, max_iter, tol).map_err(|e| e.in_stage("terminal set"))?;
    let (n, mut s_family) = min_horizon(model, &x_n, &c, h_max).map_err(|e| e.in_stage("horizon"))?;
    let n = if n == 0 {
        let s1 = backward_step(model, &x_n, model.state_set(), model.input_set()).map_err(|e| e.in_stage("horizon"))?;
        s_family.push(s1);
        1
    } else {
        n
    };
    Ok(SetSuite {
        c,
        cxu,
        x_n,
        n,
        s_family,
        rci_iterations,
        mcas_iterations,
        tol,
        model_hash: model.hash(),
    })
}

/// Use horizon `h` instead of the computed one. Since `X_N` is invariant
/// under the terminal law the family is nested, so `C ⊆ S^(h)` for every
/// `h >= N`; shorter horizons are rejected.
pub fn with_horizon(model: &VertexModel, mut suite: SetSuite, h: usize) -> Result<SetSuite> {
    suite.check_model(model)?;
    if h < suite.n {
        return Err(Error::InvalidInput(format!(
            "horizon {h} is below the certified minimum {}",
            suite.n
        )));
    }
    while suite.s_family.len() <= h {
        let last = suite.s_family.last().expect("family starts at X_N");
        let next = backward_step(model, last, model.state_set(), model.input_set())?;
        suite.s_family.push(next);
    }
    suite.s_family.truncate(h + 1);
    suite.n = h;
    Ok(suite)
}
