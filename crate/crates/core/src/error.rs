use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("steady-state iteration did not converge after {iterations} iterations (last update {last_update:e})")]
    NonConvergence { iterations: usize, last_update: f64 },

    /// More than one linearly stable steady state; the candidate effective
    /// detunings are listed so the caller can pick one.
    #[error("multistable steady state: {} stable roots at effective detunings {roots:?}", roots.len())]
    Multistable { roots: Vec<f64> },

    #[error("singular response system (|det| = {det:e})")]
    SingularSystem { det: f64 },

    #[error("at grid index {index}: {source}")]
    AtGridPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid detuning grid: {0}")]
    InvalidGrid(String),

    #[error("Hilbert-space dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("steady-state solver failure: {0}")]
    SolverFailure(String),

    #[error("integration step rejected repeatedly at t = {t} (h = {h:e})")]
    StepRejection { t: f64, h: f64 },

    #[error("trajectory diverged at t = {t}")]
    Divergence { t: f64 },

    #[error("ill-conditioned sideband fit: {0}")]
    IllConditioned(String),
}

impl Error {
    pub(crate) fn at_grid_point(self, index: usize) -> Self {
        Error::AtGridPoint {
            index,
            source: Box::new(self),
        }
    }
}
