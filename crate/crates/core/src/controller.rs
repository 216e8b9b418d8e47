//! Online controller with an N-step delayed parameter prediction.
//!
//! Each step shifts the buffer (`ξ_{k|t} = ξ_{k+1|t-1}`, `ξ_{N|t} = ξ(t)`),
//! condenses the finite-horizon problem at the measured state and applies
//! the first optimal input.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::design::DesignResult;
use crate::error::{check_dim, Error, Result};
use crate::model::VertexModel;
use crate::mpc::{self, CondensedQp, MpcSolution, PredictionSequence};
use crate::qp::{QpSettings, QpStatus};
use crate::sets::SetSuite;
use crate::simplex::SimplexVec;

/// Model, design and sets checked to belong together.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub model: VertexModel,
    pub design: DesignResult,
    pub suite: SetSuite,
}

impl Artifacts {
    pub fn new(model: VertexModel, design: DesignResult, suite: SetSuite) -> Result<Self> {
        design.check_model(&model)?;
        suite.check_model(&model)?;
        if suite.n == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        Ok(Self { model, design, suite })
    }

    pub fn horizon(&self) -> usize {
        self.suite.n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiag {
    pub value: f64,
    pub iterations: usize,
    pub active_rows: Vec<usize>,
    pub solve_seconds: f64,
    /// Smallest slack of the constraints checked at the measured state.
    pub x0_margin: f64,
}

#[derive(Debug, Clone)]
pub struct ControllerState {
    pub artifacts: Arc<Artifacts>,
    pub buffer: PredictionSequence,
    pub settings: QpSettings,
    pub last_solution: Option<MpcSolution>,
    /// Predicted `x_{N|t}` of the last solution.
    last_terminal: Option<DVector<f64>>,
    pub step_count: usize,
}

impl ControllerState {
    /// Buffer of `N + 1` barycenters.
    pub fn new(artifacts: Arc<Artifacts>) -> Self {
        let buffer = PredictionSequence::constant(&SimplexVec::uniform(artifacts.model.ell()), artifacts.horizon());
        Self::with_buffer(artifacts, buffer).expect("uniform buffer has the right shape")
    }

    pub fn with_buffer(artifacts: Arc<Artifacts>, buffer: PredictionSequence) -> Result<Self> {
        check_dim("buffer length", artifacts.horizon() + 1, buffer.horizon() + 1)?;
        check_dim("buffer parameters", artifacts.model.ell(), buffer.ell())?;
        Ok(Self {
            artifacts,
            buffer,
            settings: QpSettings::default(),
            last_solution: None,
            last_terminal: None,
            step_count: 0,
        })
    }

    /// Candidate from the previous solution: drop `u_0`, append
    /// `κ(ξ_{N|t-1}) x_{N|t-1}`.
    fn warm_start(&self, prev_terminal_xi: &SimplexVec) -> Result<Option<DVector<f64>>> {
        let (Some(sol), Some(x_n)) = (&self.last_solution, &self.last_terminal) else {
            return Ok(None);
        };
        let m = self.artifacts.model.m();
        let len = sol.u.len();
        let mut u = DVector::zeros(len);
        u.rows_mut(0, len - m).copy_from(&sol.u.rows(m, len - m));
        let tail = self.artifacts.design.kappa(prev_terminal_xi)? * x_n;
        u.rows_mut(len - m, m).copy_from(&tail);
        Ok(Some(u))
    }

    fn condense(&self, x: &DVector<f64>) -> Result<CondensedQp> {
        let a = &self.artifacts;
        mpc::condense(&a.model, &a.design, &a.suite, &self.buffer, x)
    }

    /// Shift in `xi_new`, solve and return `u*_{0|t}`.
    pub fn control_step(&mut self, x: &DVector<f64>, xi_new: SimplexVec) -> Result<(DVector<f64>, StepDiag)> {
        let prev_terminal_xi = self.buffer.get(self.buffer.horizon()).clone();
        let mut buffer = self.buffer.clone();
        buffer.shift(xi_new)?;
        let previous = std::mem::replace(&mut self.buffer, buffer);
        let result = self.solve_current(x, &prev_terminal_xi);
        if result.is_err() {
            self.buffer = previous;
        }
        result
    }

    fn solve_current(&mut self, x: &DVector<f64>, prev_terminal_xi: &SimplexVec) -> Result<(DVector<f64>, StepDiag)> {
        let start = Instant::now();
        let cqp = self.condense(x).map_err(|e| match e {
            Error::InitialStateOutside { .. } => e,
            other => other.in_stage("condense"),
        })?;
        let warm = self.warm_start(prev_terminal_xi)?;
        let sol = mpc::solve_condensed(&cqp, warm.as_ref(), &self.settings)?;
        let solve_seconds = start.elapsed().as_secs_f64();
        match sol.status {
            QpStatus::Optimal => {}
            QpStatus::Infeasible => {
                return Err(Error::ControllerInfeasible {
                    step: self.step_count,
                    detail: format!("x = {:?}, buffer = {:?}", x.as_slice(), self.buffer_weights()),
                })
            }
            QpStatus::MaxIter => {
                return Err(Error::Numerical(format!(
                    "QP hit the iteration limit at step {} (x = {:?})",
                    self.step_count,
                    x.as_slice()
                )))
            }
        }
        let a = &self.artifacts;
        let xs = mpc::predict_states(&a.model, &self.buffer, x, &sol.u_sequence)?;
        let u0 = sol.u_sequence[0].clone();
        let diag = StepDiag {
            value: sol.objective.max(0.0),
            iterations: sol.iterations,
            active_rows: sol.active_rows.clone(),
            solve_seconds,
            x0_margin: cqp.x0_margin,
        };
        self.last_terminal = xs.last().cloned();
        self.last_solution = Some(sol);
        self.step_count += 1;
        Ok((u0, diag))
    }

    /// Optimal cost at `x` under the current buffer.
    pub fn value_of(&self, x: &DVector<f64>) -> Result<f64> {
        let a = &self.artifacts;
        mpc::value_function(&a.model, &a.design, &a.suite, &self.buffer, x)
    }

    pub fn buffer_weights(&self) -> Vec<Vec<f64>> {
        self.buffer.entries().iter().map(|e| e.as_slice().to_vec()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::DesignResult;
    use crate::mpc::tests::loose_suite;
    use crate::polytope::Polytope;
    use nalgebra::DMatrix;

    fn scalar_artifacts(horizon: usize) -> Arc<Artifacts> {
        let model = VertexModel::new(
            vec![DMatrix::from_element(1, 1, 1.2)],
            DMatrix::from_element(1, 1, 1.0),
            Polytope::symmetric_box(&[5.0]).unwrap(),
            Polytope::symmetric_box(&[1.0]).unwrap(),
        )
        .unwrap();
        let design = DesignResult::from_gains(
            &model,
            vec![DMatrix::from_element(1, 1, 3.0)],
            vec![DMatrix::from_element(1, 1, -0.9)],
            DMatrix::identity(1, 1),
            DMatrix::identity(1, 1),
        )
        .unwrap();
        let mut suite = loose_suite(&model, horizon);
        suite.cxu = Polytope::symmetric_box(&[5.0, 1.0]).unwrap();
        suite.x_n = Polytope::symmetric_box(&[1.0]).unwrap();
        Arc::new(Artifacts::new(model, design, suite).unwrap())
    }

    #[test]
    fn buffer_starts_uniform() {
        let ctrl = ControllerState::new(scalar_artifacts(3));
        assert_eq!(ctrl.buffer.horizon(), 3);
        assert!(ctrl.buffer.entries().iter().all(|e| e.as_slice() == [1.0]));
    }

    #[test]
    fn mismatched_artifacts_are_rejected() {
        let a = scalar_artifacts(2);
        let other = VertexModel::benchmark();
        assert!(matches!(
            Artifacts::new(other, a.design.clone(), a.suite.clone()),
            Err(Error::ArtifactMismatch(_))
        ));
    }

    #[test]
    fn origin_gives_zero_input() {
        let mut ctrl = ControllerState::new(scalar_artifacts(3));
        let (u, diag) = ctrl.control_step(&DVector::zeros(1), SimplexVec::uniform(1)).unwrap();
        assert_eq!(u[0], 0.0);
        assert_eq!(diag.value, 0.0);
        assert_eq!(ctrl.value_of(&DVector::zeros(1)).unwrap(), 0.0);
    }

    #[test]
    fn shift_law_with_sentinels() {
        let model = VertexModel::benchmark();
        let a = scalar_artifacts(2);
        let mut suite = loose_suite(&model, 3);
        suite.cxu = Polytope::symmetric_box(&[15.0, 15.0, 10.0]).unwrap();
        let design = DesignResult::from_gains(
            &model,
            vec![DMatrix::identity(2, 2); 5],
            vec![DMatrix::zeros(1, 2); 5],
            DMatrix::identity(2, 2),
            a.design.r.clone(),
        )
        .unwrap();
        let art = Arc::new(Artifacts::new(model, design, suite).unwrap());
        let mut ctrl = ControllerState::new(art);
        let x = DVector::from_vec(vec![0.5, -0.5]);
        for j in 0..5 {
            let before = ctrl.buffer.clone();
            ctrl.control_step(&x, SimplexVec::vertex(5, j)).unwrap();
            for k in 0..3 {
                assert_eq!(ctrl.buffer.get(k), before.get(k + 1));
            }
            assert_eq!(ctrl.buffer.get(3), &SimplexVec::vertex(5, j));
        }
    }

    #[test]
    fn single_vertex_matches_plain_mpc() {
        let art = scalar_artifacts(4);
        let mut ctrl = ControllerState::new(art.clone());
        let xi = SimplexVec::uniform(1);
        let seq = PredictionSequence::constant(&xi, 4);
        let mut x = DVector::from_element(1, 3.0);
        let mut x_ref = x.clone();
        let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
        for _ in 0..15 {
            let (u, _) = ctrl.control_step(&x, xi.clone()).unwrap();
            x = art.model.step(&xi, &x, &u).unwrap();

            let cqp = mpc::condense(&art.model, &art.design, &art.suite, &seq, &x_ref).unwrap();
            let warm = prev.as_ref().map(|(u_prev, x_n)| {
                let mut w = DVector::zeros(4);
                w.rows_mut(0, 3).copy_from(&u_prev.rows(1, 3));
                w[3] = (art.design.kappa(&xi).unwrap() * x_n)[0];
                w
            });
            let sol = mpc::solve_condensed(&cqp, warm.as_ref(), &QpSettings::default()).unwrap();
            let xs = mpc::predict_states(&art.model, &seq, &x_ref, &sol.u_sequence).unwrap();
            prev = Some((sol.u.clone(), xs[4].clone()));
            x_ref = art.model.step(&xi, &x_ref, &sol.u_sequence[0]).unwrap();
            assert_eq!(u, sol.u_sequence[0]);
            assert_eq!(x, x_ref);
        }
    }

    #[test]
    fn infeasible_state_is_reported() {
        let mut ctrl = ControllerState::new(scalar_artifacts(1));
        // |x| = 4.9 is in X, but one step with |u| <= 1 cannot reach |x| <= 1.
        let err = ctrl
            .control_step(&DVector::from_element(1, 4.9), SimplexVec::uniform(1))
            .unwrap_err();
        assert!(matches!(err, Error::ControllerInfeasible { .. }), "{err}");
        assert_eq!(ctrl.step_count, 0);
    }
}
