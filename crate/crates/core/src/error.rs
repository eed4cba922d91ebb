use thiserror::Error;

/// Failures raised by the hybrid-system, saltation, filter and sampling code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite state encountered at t = {t}")]
    NumericalDivergence { t: f64 },
    #[error("grazing contact on transition {transition} at t = {t} (|normal velocity| = {denom:e})")]
    GrazingContact { transition: usize, t: f64, denom: f64 },
    #[error("transversality violated: |D_xg f + D_tg| = {0:e}")]
    TransversalityViolation(f64),
    #[error("more than {0} events in a single step (Zeno suspicion)")]
    ZenoSuspicion(usize),
    #[error("invalid covariance: {0}")]
    InvalidCovariance(&'static str),
    #[error("innovation covariance is singular (condition number {0:e})")]
    SingularInnovation(f64),
    #[error("mean trajectory crosses transition {0} during a smooth prediction")]
    UnexpectedEvent(usize),
    #[error("singular covariance")]
    SingularCovariance,
    #[error("sample cloud spans several modes")]
    MultimodalCloud,
    #[error("{excluded} of {total} particles diverged")]
    TooManyDiverged { excluded: usize, total: usize },
    #[error("particle {0} did not reach the guard before the horizon")]
    MissedEvent(usize),
    #[error("sign test undefined: all differences are ties")]
    AllTies,
}

pub type Result<T> = core::result::Result<T, Error>;
