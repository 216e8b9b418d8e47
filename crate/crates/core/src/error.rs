use thiserror::Error;

use crate::polytope::Polytope;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty set: {0}")]
    EmptySet(String),

    #[error("unbounded: {0}")]
    Unbounded(String),

    #[error("LP solver failed after {iterations} iterations: {detail}")]
    LpFailure { iterations: usize, detail: String },

    #[error(
        "Fourier-Motzkin elimination produced {rows} rows (cap {cap}); \
         reduce the dimension or change the elimination order"
    )]
    RowCap { rows: usize, cap: usize },

    /// The design LMI has no solution for the given model and weights.
    #[error("design assumption violated: the LMI admits no feasible solution (best slack t = {slack:.3e})")]
    AssumptionViolation { slack: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{what} did not reach a fixpoint within {iterations} iterations")]
    NonTermination {
        what: &'static str,
        iterations: usize,
        last: Box<Polytope>,
    },

    #[error("no horizon up to {h_max} satisfies S^(N) ⊇ C; coverage per h: {coverage:?}")]
    HorizonNotFound { h_max: usize, coverage: Vec<f64> },

    #[error("initial state outside C/X (worst violation {violation:.3e})")]
    InitialStateOutside { violation: f64 },

    #[error(
        "QP infeasible at step {step}: recursive feasibility is certified for x(t0) in C, \
         so this indicates an artifact or tolerance bug ({detail})"
    )]
    ControllerInfeasible { step: usize, detail: String },

    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("run {run}: {source}")]
    Scenario {
        run: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Label the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Scenario { source, .. } => source.root(),
            e => e,
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        });
    }
    Ok(())
}
