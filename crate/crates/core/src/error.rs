use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("invalid phase schedule: {0}")]
    InvalidSchedule(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("site {site} outside chain of {n_sites} sites")]
    SiteOutOfRange { site: usize, n_sites: usize },

    #[error("states live in different bases ({left} vs {right} sites)")]
    BasisMismatch { left: usize, right: usize },

    #[error("Chern integral {raw} is not within 0.01 of an integer; refine the grid")]
    GridTooCoarse { raw: f64 },

    #[error("integration failure at t = {t}: norm drift {drift:e} exceeds {tolerance:e} ({steps} steps, dt = {dt:e})")]
    IntegrationFailure {
        t: f64,
        drift: f64,
        tolerance: f64,
        steps: usize,
        dt: f64,
    },

    #[error("propagator is not unitary (max |U^dag U - I| = {deviation:e})")]
    NonUnitary { deviation: f64 },

    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),

    #[error("sample {index} (seed {seed:#018x}) failed: {source}")]
    SampleFailed {
        index: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::GridTooCoarse { .. } | Error::IntegrationFailure { .. } | Error::NonUnitary { .. } => true,
            Error::SampleFailed { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
