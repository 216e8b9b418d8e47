//! Points of the unit simplex `Ξ = {w >= 0, Σ w = 1}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

/// Membership tolerance for [`SimplexVec::new`].
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A convex combination vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexVec(DVector<f64>);

impl SimplexVec {
    /// Accepts `w` if it lies in Ξ within [`SIMPLEX_TOL`], then clips and
    /// renormalizes so the stored value is exactly a convex combination.
    pub fn new(w: DVector<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidInput("simplex vector of length 0".into()));
        }
        if w.iter()
            .any(|v| !v.is_finite() || *v < -SIMPLEX_TOL || *v > 1.0 + SIMPLEX_TOL)
        {
            return Err(Error::InvalidInput(format!(
                "entries of {:?} are not in [0, 1]",
                w.as_slice()
            )));
        }
        let sum = w.sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidInput(format!(
                "entries of {:?} sum to {sum}, not 1",
                w.as_slice()
            )));
        }
        Ok(Self::renormalized(w))
    }

    pub fn from_slice(w: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(w))
    }

    fn renormalized(mut w: DVector<f64>) -> Self {
        w.apply(|v| *v = v.max(0.0));
        let s = w.sum();
        Self(w / s)
    }

    pub fn uniform(len: usize) -> Self {
        Self(DVector::from_element(len, 1.0 / len as f64))
    }

    pub fn vertex(len: usize, i: usize) -> Self {
        let mut w = DVector::zeros(len);
        w[i] = 1.0;
        Self(w)
    }

    /// Uniform sample on Ξ (normalized exponentials).
    pub fn sample<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let w = DVector::from_iterator(len, (0..len).map(|_| Exp1.sample(rng)));
        let w: DVector<f64> = w.map(|v: f64| v.max(f64::MIN_POSITIVE));
        Self::renormalized(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    /// `Σ_i w_i M_i`.
    pub fn combine(&self, mats: &[DMatrix<f64>]) -> DMatrix<f64> {
        assert_eq!(mats.len(), self.len(), "one matrix per simplex weight");
        let mut out = DMatrix::zeros(mats[0].nrows(), mats[0].ncols());
        for (w, m) in self.0.iter().zip(mats) {
            out += m * *w;
        }
        out
    }

    /// `(1 - gain) self + gain other`; stays in Ξ for `gain ∈ [0, 1]`.
    pub fn blend(&self, other: &SimplexVec, gain: f64) -> SimplexVec {
        Self::renormalized(&self.0 * (1.0 - gain) + &other.0 * gain)
    }
}

/// Euclidean projection onto Ξ by sorting and thresholding.
pub fn project_simplex(v: &DVector<f64>) -> SimplexVec {
    let mut sorted: Vec<f64> = v.iter().cloned().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumsum += s;
        let t = (cumsum - 1.0) / (k + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    SimplexVec::renormalized(v.map(|x| (x - theta).max(0.0)))
}
