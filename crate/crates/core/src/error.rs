use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("z = {0} lies on the branch cut of z^(3 alpha)")]
    BranchCut(Complex64),

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("no convergence after {iterations} iterations (last residual {last:e})")]
    NoConvergence { iterations: usize, last: f64 },

    #[error("root escaped the search window at {0}")]
    OutOfWindow(Complex64),

    #[error("resonant parameters: {0}")]
    Resonance(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("ill-conditioned: {0}")]
    IllConditioned(String),

    #[error("outside the subdominance wedge: {0}")]
    Wedge(String),

    #[error("boundary closure error {error:e} above tolerance; widen the grid")]
    Closure { error: f64 },

    #[error("Q drift {drift:e} under rho_min -> 2 rho_min exceeds tolerance; estimates {first:?} and {second:?}")]
    Drift { drift: f64, first: Vec<Complex64>, second: Vec<Complex64> },

    #[error("missing data: {0}")]
    Missing(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
