//! Checks recomputed from logged trajectories.
//!
//! With `r(t) = V(t+1) - V(t) + λ_min(Q)‖x(t)‖²` and `ξ̃(t) = ξ̄(t) - ξ_{0|t}`:
//!
//! - constraints: `x(t) ∈ X`, `u(t) ∈ U` with slack `>= -constraint_tol`;
//! - invariance: `x(t) ∈ C` for all `t` when `x(0) ∈ C`;
//! - estimates: logged parameters lie in Ξ, `ξ̃` matches its definition and
//!   the buffer obeys the shift law exactly;
//! - nominal decrease: on steps with `ξ̃ = 0`, `r(t) <= decrease_tol` and
//!   `V(t+1) < V(t)` while `‖x(t)‖ > 1e-6`;
//! - ISS fit: `γ̂ = max r(t) / ‖ξ̃(t)‖` over steps with `ξ̃ ≠ 0`, an empirical
//!   estimate of the gain, reported but only required to be finite.
//!
//! Runs with a piecewise-constant true parameter skip the decrease and ISS
//! checks.

use serde::{Deserialize, Serialize};

use crate::controller::Artifacts;
use crate::simplex::SIMPLEX_TOL;

use super::trace::Trace;

/// Threshold below which the state counts as the origin.
pub const ORIGIN_NORM: f64 = 1e-6;
const MAX_LISTED_FAILURES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub constraint_tol: f64,
    pub decrease_tol: f64,
    /// Required `‖x(T)‖ / ‖x(0)‖` on runs where every `ξ̃` is zero.
    pub convergence_ratio: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            constraint_tol: 1e-8,
            decrease_tol: 1e-6,
            convergence_ratio: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub passed: bool,
    /// Number of runs the check applied to.
    pub runs: usize,
    /// Worst value seen; its meaning depends on the check.
    pub worst: Option<f64>,
}

impl Check {
    fn new() -> Self {
        Self {
            passed: true,
            runs: 0,
            worst: None,
        }
    }

    fn min(&mut self, v: f64) {
        self.worst = Some(self.worst.map_or(v, |w| w.min(v)));
    }

    fn max(&mut self, v: f64) {
        self.worst = Some(self.worst.map_or(v, |w| w.max(v)));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IssFit {
    pub passed: bool,
    pub gamma_hat: Option<f64>,
    pub fitted_steps: usize,
    pub zero_error_steps: usize,
    pub worst_zero_error_residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub check: String,
    pub run: String,
    pub step: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub runs: usize,
    pub steps: usize,
    /// Smallest slack of `X` and `U`.
    pub constraints: Check,
    /// Smallest slack of `C` over runs starting in `C`.
    pub invariance: Check,
    /// Largest deviation in the estimate, `ξ̃` and shift-law checks.
    pub estimates: Check,
    /// Largest `r(t)` on steps with `ξ̃ = 0`.
    pub nominal_decrease: Check,
    /// Largest `‖x(T)‖ / ‖x(0)‖` on runs with `ξ̃ = 0` throughout.
    pub convergence: Check,
    pub iss: IssFit,
    pub final_state_norm_max: f64,
    pub failures: Vec<Failure>,
    /// Failures beyond the listed ones.
    pub unlisted_failures: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn simplex_deviation(w: &[f64]) -> f64 {
    let neg = w.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
    neg.max((w.iter().sum::<f64>() - 1.0).abs())
}

struct Collector {
    failures: Vec<Failure>,
    unlisted: usize,
}

impl Collector {
    fn fail(&mut self, check: &mut Check, name: &str, run: &str, step: usize, value: f64) {
        check.passed = false;
        if self.failures.len() < MAX_LISTED_FAILURES {
            self.failures.push(Failure {
                check: name.into(),
                run: run.into(),
                step,
                value,
            });
        } else {
            self.unlisted += 1;
        }
    }
}

/// Verify traces against the artifacts they were produced with.
pub fn verify_traces(traces: &[Trace], artifacts: &Artifacts, opts: &VerifyOptions) -> VerificationReport {
    let model = &artifacts.model;
    let c = &artifacts.suite.c;
    let lambda_q = artifacts.design.q.clone().symmetric_eigen().eigenvalues.min();
    let mut out = Collector {
        failures: Vec::new(),
        unlisted: 0,
    };
    let mut constraints = Check::new();
    let mut invariance = Check::new();
    let mut estimates = Check::new();
    let mut nominal = Check::new();
    let mut convergence = Check::new();
    let mut iss = IssFit {
        passed: true,
        gamma_hat: None,
        fitted_steps: 0,
        zero_error_steps: 0,
        worst_zero_error_residual: None,
    };
    let mut steps_total = 0;
    let mut final_norm_max: f64 = 0.0;
    let slack = |set: &crate::Polytope, v: &[f64]| -> f64 {
        let v = nalgebra::DVector::from_column_slice(v);
        match set.max_violation(&v) {
            Ok(viol) => -viol,
            Err(_) => f64::NEG_INFINITY,
        }
    };

    for tr in traces {
        let run = tr.info.run.as_str();
        steps_total += tr.steps.len();
        let states = tr.states();
        let values = tr.values();
        final_norm_max = final_norm_max.max(norm(&tr.final_state));

        constraints.runs += 1;
        for (t, s) in tr.steps.iter().enumerate() {
            let m = slack(model.state_set(), &s.x).min(slack(model.input_set(), &s.u));
            constraints.min(m);
            if m.is_nan() || m < -opts.constraint_tol {
                out.fail(&mut constraints, "constraints", run, t, m);
            }
        }
        let fm = slack(model.state_set(), &tr.final_state);
        constraints.min(fm);
        if fm.is_nan() || fm < -opts.constraint_tol {
            out.fail(&mut constraints, "constraints", run, tr.steps.len(), fm);
        }

        if slack(c, states[0]) >= -opts.constraint_tol {
            invariance.runs += 1;
            for (t, x) in states.iter().enumerate() {
                let m = slack(c, x);
                invariance.min(m);
                if m.is_nan() || m < -opts.constraint_tol {
                    out.fail(&mut invariance, "invariance", run, t, m);
                }
            }
        }

        estimates.runs += 1;
        let mut all_zero = true;
        for (t, s) in tr.steps.iter().enumerate() {
            let mut dev = simplex_deviation(&s.xi).max(simplex_deviation(&s.xi_true));
            for b in &s.buffer {
                dev = dev.max(simplex_deviation(b));
            }
            let exact_tilde = s.xi_tilde.len() == s.xi_true.len()
                && s.buffer
                    .first()
                    .is_some_and(|b0| s.xi_true.iter().zip(b0).zip(&s.xi_tilde).all(|((a, b), d)| a - b == *d));
            let shift_ok = s.buffer.last() == Some(&s.xi)
                && (t == 0 || {
                    let prev = &tr.steps[t - 1].buffer;
                    prev.len() == s.buffer.len() && prev[1..] == s.buffer[..s.buffer.len() - 1]
                });
            if !exact_tilde || !shift_ok {
                dev = f64::INFINITY;
            }
            estimates.max(dev);
            if dev > SIMPLEX_TOL {
                out.fail(&mut estimates, "estimates", run, t, dev);
            }
            if s.xi_tilde.iter().any(|v| *v != 0.0) {
                all_zero = false;
            }
        }

        if tr.info.piecewise {
            continue;
        }
        let mut run_checked = false;
        for (t, s) in tr.steps.iter().enumerate() {
            let xn = norm(&s.x);
            let r = values[t + 1] - values[t] + lambda_q * xn * xn;
            let e = norm(&s.xi_tilde);
            if e == 0.0 {
                run_checked = true;
                iss.zero_error_steps += 1;
                iss.worst_zero_error_residual = Some(iss.worst_zero_error_residual.map_or(r, |w: f64| w.max(r)));
                nominal.max(r);
                if r.is_nan() || r > opts.decrease_tol {
                    out.fail(&mut nominal, "nominal_decrease", run, t, r);
                }
                if xn > ORIGIN_NORM && values[t + 1] >= values[t] {
                    out.fail(&mut nominal, "strict_decrease", run, t, values[t + 1] - values[t]);
                }
            } else {
                iss.fitted_steps += 1;
                let g = r / e;
                iss.gamma_hat = Some(iss.gamma_hat.map_or(g, |w: f64| w.max(g)));
            }
        }
        if run_checked {
            nominal.runs += 1;
        }
        if all_zero {
            convergence.runs += 1;
            let x0 = norm(states[0]);
            let ratio = if x0 > 0.0 { norm(&tr.final_state) / x0 } else { 0.0 };
            convergence.max(ratio);
            if let Some(limit) = opts.convergence_ratio {
                if ratio.is_nan() || ratio > limit {
                    out.fail(&mut convergence, "convergence", run, tr.steps.len(), ratio);
                }
            }
        }
    }
    if !nominal.passed {
        iss.passed = false;
    }
    if iss.gamma_hat.is_some_and(|g| !g.is_finite()) {
        iss.passed = false;
        out.failures.push(Failure {
            check: "iss".into(),
            run: String::new(),
            step: 0,
            value: iss.gamma_hat.unwrap_or(f64::NAN),
        });
    }
    let passed = constraints.passed
        && invariance.passed
        && estimates.passed
        && nominal.passed
        && convergence.passed
        && iss.passed;
    VerificationReport {
        passed,
        runs: traces.len(),
        steps: steps_total,
        constraints,
        invariance,
        estimates,
        nominal_decrease: nominal,
        convergence,
        iss,
        final_state_norm_max: final_norm_max,
        failures: out.failures,
        unlisted_failures: out.unlisted,
    }
}
