use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("perturbation delta={delta} too large: Levi eigenvalues leave [{lo}, {hi}] (observed {min_eig:.4}..{max_eig:.4})")]
    PerturbationTooLarge {
        delta: f64,
        min_eig: f64,
        max_eig: f64,
        lo: f64,
        hi: f64,
    },
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("no sampled delta has omega(delta) <= {epsilon} (smallest omega {smallest})")]
    NoAdmissibleDelta { epsilon: f64, smallest: f64 },
    #[error("singular kernel: |g| = {magnitude:e} below underflow guard")]
    SingularKernel { magnitude: f64 },
    #[error("degenerate generating form: <eta, w - z> = {magnitude:e}")]
    DegenerateGeneratingForm { magnitude: f64 },
    #[error("unsupported domain for {0}")]
    UnsupportedDomain(String),
    #[error("integral does not converge under refinement: {0}")]
    NonIntegrable(String),
    #[error("Gram matrix ill conditioned (condition estimate {cond:e})")]
    IllConditionedGram { cond: f64 },
    #[error("function not in L^p: {0}")]
    NotInLp(String),
    #[error("integrand failed at node {node}: {source}")]
    AtNode {
        node: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
