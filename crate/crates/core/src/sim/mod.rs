//! Closed-loop experiments: the true plant with an unknown parameter, the
//! estimator and the controller, logged into [`Trace`]s and checked by
//! [`verify`].

mod config;
mod sweep;
mod trace;
mod verify;

use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;

pub use config::*;
pub use sweep::*;
pub use trace::*;
pub use verify::*;

use crate::controller::{Artifacts, ControllerState};
use crate::design::{solve_design_with, DesignResult};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorState, Transition};
use crate::mpc::PredictionSequence;
use crate::polytope::Polytope;
use crate::sets::{build_set_suite, with_horizon, SetSuite};
use crate::simplex::SimplexVec;

/// Solve the design LMI as configured.
pub fn build_design(cfg: &ScenarioConfig) -> Result<DesignResult> {
    let model = cfg.model.build()?;
    let (q, r) = cfg.design.weights(&model)?;
    solve_design_with(&model, &q, &r, cfg.design.eps(&model), cfg.design.selection())
}

/// Sets for a design, honouring a configured horizon.
pub fn build_suite(cfg: &ScenarioConfig, design: &DesignResult) -> Result<SetSuite> {
    let model = cfg.model.build()?;
    let suite = build_set_suite(&model, design, cfg.sets.max_iter, cfg.sets.tol, cfg.sets.h_max)?;
    match cfg.sets.horizon {
        Some(h) => with_horizon(&model, suite, h),
        None => Ok(suite),
    }
}

pub fn build_artifacts(cfg: &ScenarioConfig) -> Result<Artifacts> {
    let design = build_design(cfg).map_err(|e| e.in_stage("design"))?;
    let suite = build_suite(cfg, &design).map_err(|e| e.in_stage("sets"))?;
    Artifacts::new(cfg.model.build()?, design, suite)
}

/// One simulation: initial state and true parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub truth_index: usize,
    pub initial_index: usize,
    pub x0: DVector<f64>,
    pub truth: Truth,
}

impl RunSpec {
    pub fn name(&self) -> String {
        format!("t{}_x{}", self.truth_index, self.initial_index)
    }
}

/// Every truth draw crossed with every initial state, truth-major.
pub fn plan_runs(cfg: &ScenarioConfig, artifacts: &Artifacts) -> Result<Vec<RunSpec>> {
    let truths = cfg.truth.draws(artifacts.model.ell(), cfg.seed)?;
    let points = cfg.initial.points(&artifacts.suite.c)?;
    let mut runs = Vec::with_capacity(truths.len() * points.len());
    for (ti, truth) in truths.iter().enumerate() {
        for (xi, x0) in points.iter().enumerate() {
            runs.push(RunSpec {
                truth_index: ti,
                initial_index: xi,
                x0: x0.clone(),
                truth: truth.clone(),
            });
        }
    }
    Ok(runs)
}

fn margin(set: &Polytope, v: &DVector<f64>) -> Result<f64> {
    Ok(-set.max_violation(v)?)
}

/// Simulate one run for `steps` steps.
pub fn simulate_run(
    artifacts: &Arc<Artifacts>,
    spec: &RunSpec,
    estimator: &EstimatorSpec,
    steps: usize,
) -> Result<Trace> {
    let wrap = |e: Error| Error::Scenario {
        run: spec.name(),
        source: Box::new(e),
    };
    simulate_inner(artifacts, spec, estimator, steps).map_err(wrap)
}

fn simulate_inner(
    artifacts: &Arc<Artifacts>,
    spec: &RunSpec,
    estimator: &EstimatorSpec,
    steps: usize,
) -> Result<Trace> {
    let model = &artifacts.model;
    let oracle = estimator.mode == EstimatorMode::Oracle;
    let mut ctrl = if oracle {
        let buffer = PredictionSequence::constant(spec.truth.at(0), artifacts.horizon());
        ControllerState::with_buffer(artifacts.clone(), buffer)?
    } else {
        ControllerState::new(artifacts.clone())
    };
    let mut est = EstimatorState::new(model.ell(), estimator.config())?;
    let mut x = spec.x0.clone();
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    let mut log = Vec::with_capacity(steps);

    for t in 0..steps {
        let estimate = next_estimate(&mut est, oracle, spec, t, &x, prev.take(), model)?;
        let (u, diag) = ctrl.control_step(&x, estimate.xi.clone())?;
        let truth = spec.truth.at(t);
        let buffer = ctrl.buffer_weights();
        let xi_tilde: Vec<f64> = truth.as_slice().iter().zip(&buffer[0]).map(|(a, b)| a - b).collect();
        log.push(TraceStep {
            t,
            x: x.as_slice().to_vec(),
            u: u.as_slice().to_vec(),
            xi: estimate.xi.as_slice().to_vec(),
            rho: estimate.rho,
            projected: estimate.projected,
            xi_true: truth.as_slice().to_vec(),
            xi_tilde,
            buffer,
            value: diag.value,
            iterations: diag.iterations,
            solve_seconds: diag.solve_seconds,
            x_margin: margin(model.state_set(), &x)?,
            u_margin: margin(model.input_set(), &u)?,
            c_margin: margin(&artifacts.suite.c, &x)?,
        });
        let next = model.step(truth, &x, &u)?;
        prev = Some((x, u));
        x = next;
    }
    let estimate = next_estimate(&mut est, oracle, spec, steps, &x, prev.take(), model)?;
    let (_, diag) = ctrl.control_step(&x, estimate.xi)?;
    Ok(Trace {
        info: RunInfo {
            run: spec.name(),
            truth_index: spec.truth_index,
            initial_index: spec.initial_index,
            piecewise: spec.truth.is_piecewise(),
            oracle,
            gain: estimator.gain,
        },
        steps: log,
        final_state: x.as_slice().to_vec(),
        final_value: diag.value,
    })
}

struct Estimate {
    xi: SimplexVec,
    rho: Option<Vec<f64>>,
    projected: Option<Vec<f64>>,
}

fn next_estimate(
    est: &mut EstimatorState,
    oracle: bool,
    spec: &RunSpec,
    t: usize,
    x: &DVector<f64>,
    prev: Option<(DVector<f64>, DVector<f64>)>,
    model: &crate::model::VertexModel,
) -> Result<Estimate> {
    if oracle {
        return Ok(Estimate {
            xi: spec.truth.at(t).clone(),
            rho: None,
            projected: None,
        });
    }
    let Some((x_prev, u_prev)) = prev else {
        return Ok(Estimate {
            xi: est.xi.clone(),
            rho: None,
            projected: None,
        });
    };
    est.step(
        Transition {
            x_prev,
            u_prev,
            x_next: x.clone(),
        },
        model,
    )?;
    Ok(Estimate {
        xi: est.xi.clone(),
        rho: Some(est.rho_prev.as_slice().to_vec()),
        projected: est.projected.as_ref().map(|p| p.as_slice().to_vec()),
    })
}

/// Run every planned simulation in parallel; results keep the plan order.
pub fn run_scenario(cfg: &ScenarioConfig, artifacts: &Arc<Artifacts>) -> Result<Vec<Trace>> {
    cfg.validate()?;
    let runs = plan_runs(cfg, artifacts)?;
    runs.par_iter()
        .map(|spec| simulate_run(artifacts, spec, &cfg.estimator, cfg.steps))
        .collect()
}
