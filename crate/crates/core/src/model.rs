use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use crate::error::{check_dim, Error, Result};
use crate::polytope::Polytope;
use crate::simplex::SimplexVec;

/// Polytopic uncertain system `x+ = Σ ξ_i A_i x + B u`, `x ∈ X`, `u ∈ U`.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexModel {
    vertices: Vec<DMatrix<f64>>,
    b: DMatrix<f64>,
    state_set: Polytope,
    input_set: Polytope,
}

impl VertexModel {
    /// Validates dimensions, compactness of `X` and `U`, and that the origin
    /// is interior to both.
    pub fn new(vertices: Vec<DMatrix<f64>>, b: DMatrix<f64>, state_set: Polytope, input_set: Polytope) -> Result<Self> {
        let model = Self::new_relaxed(vertices, b, state_set, input_set)?;
        for (name, set) in [("X", &model.state_set), ("U", &model.input_set)] {
            let margin = -set.max_violation(&DVector::zeros(set.dim()))?;
            if margin <= 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "origin must be interior to {name} (margin {margin:.3e})"
                )));
            }
        }
        Ok(model)
    }

    /// Like [`VertexModel::new`] but only requires `0 ∈ X × U`, not interior.
    /// Used for degenerate cases such as `U = {0}`.
    pub fn new_relaxed(
        vertices: Vec<DMatrix<f64>>,
        b: DMatrix<f64>,
        state_set: Polytope,
        input_set: Polytope,
    ) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::InvalidInput("at least one vertex matrix is required".into()));
        }
        let n = b.nrows();
        let m = b.ncols();
        if n == 0 || m == 0 {
            return Err(Error::InvalidInput("B must be nonempty".into()));
        }
        for a in &vertices {
            check_dim("vertex rows", n, a.nrows())?;
            check_dim("vertex columns", n, a.ncols())?;
        }
        check_dim("state set", n, state_set.dim())?;
        check_dim("input set", m, input_set.dim())?;
        for (name, set) in [("X", &state_set), ("U", &input_set)] {
            if set.num_rows() == 0 {
                return Err(Error::InvalidInput(format!("{name} must be compact")));
            }
            set.bounding_box()
                .map_err(|_| Error::InvalidInput(format!("{name} must be compact and nonempty")))?;
            if !set.contains(&DVector::zeros(set.dim()), 1e-12)? {
                return Err(Error::InvalidInput(format!("{name} must contain the origin")));
            }
        }
        Ok(Self {
            vertices,
            b,
            state_set,
            input_set,
        })
    }

    /// Two-state, five-vertex benchmark mixing stable and unstable vertices:
    /// `A_1 = [[1, .2], [0, 1]]`, `A_2 = 1.1 A_1`, `A_3 = 0.6 A_1`,
    /// `A_4 = [[.9, .3], [.4, .6]]`, `A_5 = [[.95, 0], [.8, 1.02]]`,
    /// `B = [-0.035, -0.905]'`, `|x_i| <= 15`, `|u| <= 10`.
    pub fn benchmark() -> Self {
        let a1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        let vertices = vec![
            a1.clone(),
            &a1 * 1.1,
            &a1 * 0.6,
            DMatrix::from_row_slice(2, 2, &[0.9, 0.3, 0.4, 0.6]),
            DMatrix::from_row_slice(2, 2, &[0.95, 0.0, 0.8, 1.02]),
        ];
        let b = DMatrix::from_column_slice(2, 1, &[-0.035, -0.905]);
        Self::new(
            vertices,
            b,
            Polytope::symmetric_box(&[15.0, 15.0]).expect("valid box"),
            Polytope::symmetric_box(&[10.0]).expect("valid box"),
        )
        .expect("benchmark model is valid")
    }

    pub fn ell(&self) -> usize {
        self.vertices.len()
    }

    pub fn n(&self) -> usize {
        self.b.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn vertices(&self) -> &[DMatrix<f64>] {
        &self.vertices
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn state_set(&self) -> &Polytope {
        &self.state_set
    }

    pub fn input_set(&self) -> &Polytope {
        &self.input_set
    }

    /// `A(ξ) = Σ ξ_i A_i`.
    pub fn a_of(&self, xi: &SimplexVec) -> Result<DMatrix<f64>> {
        check_dim("simplex vector", self.ell(), xi.len())?;
        Ok(xi.combine(&self.vertices))
    }

    /// One step of the true plant.
    pub fn step(&self, xi: &SimplexVec, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("state", self.n(), x.len())?;
        check_dim("input", self.m(), u.len())?;
        Ok(self.a_of(xi)? * x + &self.b * u)
    }

    /// Largest `‖A_i‖_max` entry over all vertices.
    pub fn max_abs_entry(&self) -> f64 {
        self.vertices.iter().map(|a| a.amax()).fold(0.0, f64::max)
    }

    /// SHA-256 of a canonical text rendering; ties artifacts to a model.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |label: &str, m: &DMatrix<f64>| {
            h.update(format!("{label} {} {}\n", m.nrows(), m.ncols()));
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    h.update(format!("{:.16e} ", m[(i, j)]));
                }
            }
            h.update("\n");
        };
        for a in &self.vertices {
            put("A", a);
        }
        put("B", &self.b);
        put("HX", self.state_set.normals());
        put(
            "hX",
            &DMatrix::from_column_slice(self.state_set.num_rows(), 1, self.state_set.offsets().as_slice()),
        );
        put("HU", self.input_set.normals());
        put(
            "hU",
            &DMatrix::from_column_slice(self.input_set.num_rows(), 1, self.input_set.offsets().as_slice()),
        );
        hex::encode(h.finalize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_dimensions() {
        let m = VertexModel::benchmark();
        assert_eq!((m.ell(), m.n(), m.m()), (5, 2, 1));
        assert_eq!(m.hash(), VertexModel::benchmark().hash());
    }

    #[test]
    fn rejects_bad_models() {
        let x = Polytope::symmetric_box(&[1.0]).unwrap();
        let u = Polytope::symmetric_box(&[1.0]).unwrap();
        let one = DMatrix::from_element(1, 1, 1.0);
        assert!(VertexModel::new(vec![], one.clone(), x.clone(), u.clone()).is_err());
        assert!(VertexModel::new(vec![DMatrix::identity(2, 2)], one.clone(), x.clone(), u.clone()).is_err());
        let half = Polytope::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 1.0)).unwrap();
        assert!(VertexModel::new(vec![one.clone()], one.clone(), half, u.clone()).is_err());
        let zero_u = Polytope::from_box(&[0.0], &[0.0]).unwrap();
        assert!(VertexModel::new(vec![one.clone()], one.clone(), x.clone(), zero_u.clone()).is_err());
        assert!(VertexModel::new_relaxed(vec![one.clone()], one, x, zero_u).is_ok());
    }

    #[test]
    fn hash_changes_with_model() {
        let a = VertexModel::benchmark();
        let mut verts = a.vertices().to_vec();
        verts[0][(0, 0)] += 1e-12;
        let b = VertexModel::new(verts, a.b().clone(), a.state_set().clone(), a.input_set().clone()).unwrap();
        assert_ne!(a.hash(), b.hash());
    }
}
