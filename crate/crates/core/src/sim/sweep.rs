//! Filter-gain comparison on matched seeds.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::controller::Artifacts;
use crate::error::{Error, Result};
use crate::estimator::matrix_space_error;
use crate::simplex::SimplexVec;

use super::config::{EstimatorMode, ScenarioConfig};
use super::run_scenario;
use super::trace::Trace;

/// Fraction of `‖x(0)‖` a run must stay under to count as settled.
pub const SETTLING_FRACTION: f64 = 0.01;

/// Per-step series of one run under one gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSeries {
    pub run: String,
    /// `ε(ξ(t), A(ξ̄(t)))` for `t = 0 .. T-1`.
    pub estimation_error: Vec<f64>,
    /// `V(0) .. V(T)`.
    pub value: Vec<f64>,
    /// `‖x(0)‖ .. ‖x(T)‖`.
    pub state_norm: Vec<f64>,
    pub settling_step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSummary {
    pub gain: f64,
    pub runs: usize,
    pub peak_value: f64,
    /// `None` if some run never settles.
    pub max_settling_step: Option<usize>,
    /// Mean over the runs that settle.
    pub mean_settling_step: Option<f64>,
    pub unsettled_runs: usize,
    pub final_estimation_error_max: f64,
    pub series: Vec<GainSeries>,
}

/// First `t` with `‖x(τ)‖ <= fraction·‖x(0)‖` for every `τ >= t`.
pub fn settling_step(norms: &[f64], fraction: f64) -> Option<usize> {
    let bound = fraction * norms.first().copied()?;
    let mut first = norms.len();
    for (t, v) in norms.iter().enumerate().rev() {
        if *v <= bound {
            first = t;
        } else {
            break;
        }
    }
    (first < norms.len()).then_some(first)
}

fn series_of(trace: &Trace, artifacts: &Artifacts) -> Result<GainSeries> {
    let model = &artifacts.model;
    let estimation_error = trace
        .steps
        .iter()
        .map(|s| {
            let truth = SimplexVec::from_slice(&s.xi_true)?;
            let xi = SimplexVec::from_slice(&s.xi)?;
            matrix_space_error(model, &xi, &model.a_of(&truth)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let state_norm: Vec<f64> = trace
        .states()
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    Ok(GainSeries {
        run: trace.info.run.clone(),
        estimation_error,
        value: trace.values(),
        settling_step: settling_step(&state_norm, SETTLING_FRACTION),
        state_norm,
    })
}

/// Summarise traces produced with one gain.
pub fn summarize_gain(gain: f64, traces: &[Trace], artifacts: &Artifacts) -> Result<GainSummary> {
    let series = traces
        .par_iter()
        .map(|t| series_of(t, artifacts))
        .collect::<Result<Vec<_>>>()?;
    let peak_value = series.iter().flat_map(|s| s.value.iter().copied()).fold(0.0, f64::max);
    let settled: Vec<usize> = series.iter().filter_map(|s| s.settling_step).collect();
    let unsettled_runs = series.len() - settled.len();
    let max_settling_step = if unsettled_runs == 0 {
        settled.iter().copied().max()
    } else {
        None
    };
    let mean_settling_step = (!settled.is_empty()).then(|| settled.iter().sum::<usize>() as f64 / settled.len() as f64);
    let final_estimation_error_max = series
        .iter()
        .filter_map(|s| s.estimation_error.last().copied())
        .fold(0.0, f64::max);
    Ok(GainSummary {
        gain,
        runs: series.len(),
        peak_value,
        max_settling_step,
        mean_settling_step,
        unsettled_runs,
        final_estimation_error_max,
        series,
    })
}

/// Rerun the scenario with the least-squares estimator at each gain.
pub fn sweep_filter_gain(cfg: &ScenarioConfig, artifacts: &Arc<Artifacts>, gains: &[f64]) -> Result<Vec<GainSummary>> {
    if let Some(g) = gains.iter().find(|g| !(**g > 0.0 && **g <= 1.0)) {
        return Err(Error::InvalidInput(format!("filter gain {g} not in (0, 1]")));
    }
    gains
        .iter()
        .map(|&gain| {
            let mut c = cfg.clone();
            c.estimator.mode = EstimatorMode::LeastSquares;
            c.estimator.gain = gain;
            let traces = run_scenario(&c, artifacts)?;
            summarize_gain(gain, &traces, artifacts)
        })
        .collect()
}

/// One row per gain.
pub fn write_summary_csv<W: Write>(out: W, summaries: &[GainSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "gain",
        "runs",
        "peak_value",
        "max_settling_step",
        "mean_settling_step",
        "unsettled_runs",
        "final_estimation_error_max",
    ])
    .map_err(csv_err)?;
    for s in summaries {
        w.write_record([
            format!("{:?}", s.gain),
            s.runs.to_string(),
            format!("{:?}", s.peak_value),
            s.max_settling_step.map_or(String::new(), |v| v.to_string()),
            s.mean_settling_step.map_or(String::new(), |v| format!("{v:?}")),
            s.unsettled_runs.to_string(),
            format!("{:?}", s.final_estimation_error_max),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Long format: `gain, run, t, estimation_error, value, state_norm`.
/// The estimation error is empty at `t = T`.
pub fn write_series_csv<W: Write>(out: W, summaries: &[GainSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gain", "run", "t", "estimation_error", "value", "state_norm"])
        .map_err(csv_err)?;
    for s in summaries {
        for series in &s.series {
            for t in 0..series.value.len() {
                w.write_record([
                    format!("{:?}", s.gain),
                    series.run.clone(),
                    t.to_string(),
                    series
                        .estimation_error
                        .get(t)
                        .map_or(String::new(), |v| format!("{v:?}")),
                    format!("{:?}", series.value[t]),
                    format!("{:?}", series.state_norm[t]),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_files(dir: &Path, summaries: &[GainSummary]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_summary_csv(std::fs::File::create(dir.join("summary.csv"))?, summaries)?;
    write_series_csv(std::fs::File::create(dir.join("series.csv"))?, summaries)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}
