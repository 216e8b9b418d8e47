//! Scenario configuration (TOML).
//!
//! ```toml
//! steps = 100
//! seed = 1
//!
//! [model]
//! kind = "benchmark"            # or "explicit" with vertices, b, state, input
//!
//! [design]
//! q = [[1.0, 0.0], [0.0, 1.0]]  # default identity
//! r = [[1.0]]
//! selection = "max_envelope"    # "max_margin" | "analytic_center"
//! envelope_level = 1e4
//!
//! [sets]
//! horizon = 8                   # omit for the computed minimum
//!
//! [estimator]
//! mode = "least_squares"        # or "oracle"
//! window = 3
//! gain = 0.5
//! ridge = 1e-8
//!
//! [truth]
//! policy = "random"             # "fixed" with values, "schedule" with segments
//! count = 4
//!
//! [initial]
//! kind = "support_points"       # "chebyshev_center" | "explicit" with points
//! count = 200
//! ```
//!
//! Sets are given as `{ box = [15.0, 15.0] }` (symmetric bounds) or
//! `{ hrep = { normals = [[...]], offsets = [...] } }`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{default_eps, Selection};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, DEFAULT_RIDGE};
use crate::model::VertexModel;
use crate::polytope::Polytope;
use crate::sets::{DEFAULT_H_MAX, DEFAULT_MAX_ITER};
use crate::simplex::SimplexVec;

/// Level of the default envelope selection.
pub const DEFAULT_ENVELOPE_LEVEL: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub design: DesignSpec,
    #[serde(default)]
    pub sets: SetsSpec,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    #[serde(default)]
    pub truth: TruthPolicy,
    #[serde(default)]
    pub initial: InitialStates,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_steps() -> usize {
    100
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::default(),
            design: DesignSpec::default(),
            sets: SetsSpec::default(),
            estimator: EstimatorSpec::default(),
            truth: TruthPolicy::default(),
            initial: InitialStates::default(),
            steps: default_steps(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetSpec {
    Box(Vec<f64>),
    Hrep { normals: Vec<Vec<f64>>, offsets: Vec<f64> },
}

impl SetSpec {
    pub fn to_polytope(&self) -> Result<Polytope> {
        match self {
            SetSpec::Box(bounds) => Polytope::symmetric_box(bounds),
            SetSpec::Hrep { normals, offsets } => Polytope::new(
                rows_to_matrix(normals, "set normals")?,
                DVector::from_column_slice(offsets),
            ),
        }
    }
}

fn rows_to_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidInput(format!("{what}: rows have different lengths")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    #[default]
    Benchmark,
    Explicit {
        vertices: Vec<Vec<Vec<f64>>>,
        b: Vec<Vec<f64>>,
        state: SetSpec,
        input: SetSpec,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<VertexModel> {
        match self {
            ModelSpec::Benchmark => Ok(VertexModel::benchmark()),
            ModelSpec::Explicit {
                vertices,
                b,
                state,
                input,
            } => VertexModel::new(
                vertices
                    .iter()
                    .map(|v| rows_to_matrix(v, "vertex matrix"))
                    .collect::<Result<_>>()?,
                rows_to_matrix(b, "B")?,
                state.to_polytope()?,
                input.to_polytope()?,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    MaxMargin,
    AnalyticCenter,
    #[default]
    MaxEnvelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    pub q: Option<Vec<Vec<f64>>>,
    pub r: Option<Vec<Vec<f64>>>,
    pub eps_margin: Option<f64>,
    #[serde(default)]
    pub selection: SelectionKind,
    #[serde(default = "default_level")]
    pub envelope_level: f64,
}

fn default_level() -> f64 {
    DEFAULT_ENVELOPE_LEVEL
}

impl Default for DesignSpec {
    fn default() -> Self {
        Self {
            q: None,
            r: None,
            eps_margin: None,
            selection: SelectionKind::default(),
            envelope_level: DEFAULT_ENVELOPE_LEVEL,
        }
    }
}

impl DesignSpec {
    pub fn weights(&self, model: &VertexModel) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let q = match &self.q {
            Some(rows) => rows_to_matrix(rows, "Q")?,
            None => DMatrix::identity(model.n(), model.n()),
        };
        let r = match &self.r {
            Some(rows) => rows_to_matrix(rows, "R")?,
            None => DMatrix::identity(model.m(), model.m()),
        };
        Ok((q, r))
    }

    pub fn eps(&self, model: &VertexModel) -> f64 {
        self.eps_margin.unwrap_or_else(|| default_eps(model))
    }

    pub fn selection(&self) -> Selection {
        match self.selection {
            SelectionKind::MaxMargin => Selection::MaxMargin,
            SelectionKind::AnalyticCenter => Selection::AnalyticCenter,
            SelectionKind::MaxEnvelope => Selection::MaxEnvelope {
                level: self.envelope_level,
            },
        }
    }

    pub fn set_weights(&mut self, q: &DMatrix<f64>, r: &DMatrix<f64>) {
        self.q = Some(matrix_to_rows(q));
        self.r = Some(matrix_to_rows(r));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetsSpec {
    /// Fixed horizon; the computed minimum when absent.
    pub horizon: Option<usize>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_h_max")]
    pub h_max: usize,
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}
fn default_tol() -> f64 {
    1e-9
}
fn default_h_max() -> usize {
    DEFAULT_H_MAX
}

impl Default for SetsSpec {
    fn default() -> Self {
        Self {
            horizon: None,
            max_iter: DEFAULT_MAX_ITER,
            tol: default_tol(),
            h_max: DEFAULT_H_MAX,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    #[default]
    LeastSquares,
    /// `ξ(t) = ξ̄(t)`; the prediction buffer starts filled with `ξ̄(0)`.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    #[serde(default)]
    pub mode: EstimatorMode,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_gain")]
    pub gain: f64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
}

fn default_window() -> usize {
    3
}
fn default_gain() -> f64 {
    0.5
}
fn default_ridge() -> f64 {
    DEFAULT_RIDGE
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            mode: EstimatorMode::default(),
            window: default_window(),
            gain: default_gain(),
            ridge: DEFAULT_RIDGE,
        }
    }
}

impl EstimatorSpec {
    pub fn config(&self) -> EstimatorConfig {
        EstimatorConfig {
            window: self.window,
            gain: self.gain,
            ridge: self.ridge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start: usize,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum TruthPolicy {
    /// `count` constant parameters drawn uniformly on Ξ from the seed.
    Random { count: usize },
    /// One constant run per listed parameter.
    Fixed { values: Vec<Vec<f64>> },
    /// A single piecewise-constant parameter; the first segment starts at 0.
    Schedule { segments: Vec<Segment> },
}

impl Default for TruthPolicy {
    fn default() -> Self {
        TruthPolicy::Random { count: 4 }
    }
}

/// True parameter over time.
#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    Constant(SimplexVec),
    Piecewise(Vec<(usize, SimplexVec)>),
}

impl Truth {
    pub fn at(&self, t: usize) -> &SimplexVec {
        match self {
            Truth::Constant(xi) => xi,
            Truth::Piecewise(segs) => {
                let mut cur = &segs[0].1;
                for (start, xi) in segs {
                    if *start <= t {
                        cur = xi;
                    }
                }
                cur
            }
        }
    }

    pub fn is_piecewise(&self) -> bool {
        matches!(self, Truth::Piecewise(_))
    }
}

impl TruthPolicy {
    pub fn draws(&self, ell: usize, seed: u64) -> Result<Vec<Truth>> {
        match self {
            TruthPolicy::Random { count } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok((0..*count)
                    .map(|_| Truth::Constant(SimplexVec::sample(ell, &mut rng)))
                    .collect())
            }
            TruthPolicy::Fixed { values } => values
                .iter()
                .map(|v| {
                    crate::error::check_dim("true parameter", ell, v.len())?;
                    Ok(Truth::Constant(SimplexVec::from_slice(v)?))
                })
                .collect(),
            TruthPolicy::Schedule { segments } => {
                if segments.first().map(|s| s.start) != Some(0) {
                    return Err(Error::InvalidInput("schedule must start at t = 0".into()));
                }
                if segments.windows(2).any(|w| w[1].start <= w[0].start) {
                    return Err(Error::InvalidInput("schedule starts must increase".into()));
                }
                let segs = segments
                    .iter()
                    .map(|s| {
                        crate::error::check_dim("true parameter", ell, s.value.len())?;
                        Ok((s.start, SimplexVec::from_slice(&s.value)?))
                    })
                    .collect::<Result<_>>()?;
                Ok(vec![Truth::Piecewise(segs)])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialStates {
    /// Maximizers of `C` along evenly spread directions.
    SupportPoints {
        count: usize,
    },
    ChebyshevCenter,
    Explicit {
        points: Vec<Vec<f64>>,
    },
}

impl Default for InitialStates {
    fn default() -> Self {
        InitialStates::SupportPoints { count: 200 }
    }
}

impl InitialStates {
    pub fn points(&self, c: &Polytope) -> Result<Vec<DVector<f64>>> {
        match self {
            InitialStates::SupportPoints { count } => c.spread_support_points(*count),
            InitialStates::ChebyshevCenter => Ok(vec![c.chebyshev_center()?.0]),
            InitialStates::Explicit { points } => points
                .iter()
                .map(|p| {
                    crate::error::check_dim("initial state", c.dim(), p.len())?;
                    Ok(DVector::from_column_slice(p))
                })
                .collect(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidInput("steps must be >= 1".into()));
        }
        if !(self.estimator.gain > 0.0 && self.estimator.gain <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "filter gain {} not in (0, 1]",
                self.estimator.gain
            )));
        }
        self.estimator.config().validate()?;
        if self.sets.horizon == Some(0) {
            return Err(Error::InvalidInput("horizon must be >= 1".into()));
        }
        if let TruthPolicy::Random { count: 0 } = self.truth {
            return Err(Error::InvalidInput("random truth policy needs count >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_benchmark_scenario() {
        let cfg = ScenarioConfig::from_toml("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.model.build().unwrap(), VertexModel::benchmark());
        assert_eq!(cfg.steps, 100);
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
            steps = 20
            seed = 7
            [model]
            kind = "explicit"
            vertices = [[[0.5]], [[1.1]]]
            b = [[1.0]]
            state = { box = [4.0] }
            input = { hrep = { normals = [[1.0], [-1.0]], offsets = [1.0, 1.0] } }
            [design]
            q = [[2.0]]
            r = [[0.5]]
            selection = "max_margin"
            [sets]
            horizon = 5
            [estimator]
            mode = "oracle"
            gain = 0.05
            [truth]
            policy = "schedule"
            segments = [{ start = 0, value = [1.0, 0.0] }, { start = 10, value = [0.0, 1.0] }]
            [initial]
            kind = "explicit"
            points = [[1.0], [-2.0]]
        "#;
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        let model = cfg.model.build().unwrap();
        assert_eq!(model.ell(), 2);
        assert_eq!(cfg.design.selection(), Selection::MaxMargin);
        let truth = cfg.truth.draws(2, cfg.seed).unwrap();
        assert_eq!(truth.len(), 1);
        assert_eq!(truth[0].at(9).as_slice(), &[1.0, 0.0]);
        assert_eq!(truth[0].at(10).as_slice(), &[0.0, 1.0]);
        let back = ScenarioConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(ScenarioConfig::from_toml("steps = 0").is_err());
        assert!(ScenarioConfig::from_toml("[estimator]\ngain = 0.0").is_err());
        assert!(ScenarioConfig::from_toml("[estimator]\ngain = 1.5").is_err());
        assert!(ScenarioConfig::from_toml("bogus = 1").is_err());
    }

    #[test]
    fn random_draws_are_seeded() {
        let p = TruthPolicy::Random { count: 3 };
        assert_eq!(p.draws(5, 1).unwrap(), p.draws(5, 1).unwrap());
        assert_ne!(p.draws(5, 1).unwrap(), p.draws(5, 2).unwrap());
    }
}
