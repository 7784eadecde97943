use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is singular or indefinite (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },

    #[error("matrix has no nonzero eigenvalue")]
    ZeroSpectrum,

    #[error("support/sign pattern is inconsistent with delta (radicand {0:e})")]
    InfeasibleSupport(f64),

    #[error(
        "||b||_2 = {b_norm} <= delta = {delta}: x = 0 is optimal and no beta is distinguished"
    )]
    TrivialCase { b_norm: f64, delta: f64 },

    #[error("residual never reaches delta = {delta} (smallest residual {min_residual} at beta = {beta})")]
    RootBracket {
        delta: f64,
        beta: f64,
        min_residual: f64,
    },

    #[error("qp solver did not converge at beta = {beta} (kkt residual {kkt:e})")]
    NotConverged { beta: f64, kkt: f64 },

    #[error("weak duality violated at beta = {beta}: g = {g} > primal {primal}")]
    WeakDuality { beta: f64, g: f64, primal: f64 },

    #[error("reports do not share one parameter set and beta grid")]
    MixedGrid,

    #[error("no reports to aggregate")]
    Empty,
}
