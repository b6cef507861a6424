use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (asymmetry {asymmetry:.3e} exceeds {tol:.1e})")]
    NotHermitian { asymmetry: f64, tol: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:.6e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("function `{name}` cannot be evaluated at {at}")]
    Evaluation { name: String, at: f64 },

    #[error("Jacobi iteration did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("hyperbolicity lost at lambda = {lambda}: eigenvalue {nu:.6e} of the asymptotic matrix is not positive")]
    HyperbolicityLost { lambda: f64, nu: f64 },

    #[error("invalid Lagrangian frame: {0}")]
    InvalidFrame(String),

    #[error("integration failed at {param}: {reason}")]
    Integration { param: f64, reason: String },

    #[error("non-transversal crossing: a phase stays at -1 on [{from}, {to}]")]
    NonTransversalCrossing { from: f64, to: f64 },

    #[error("phase continuity could not be restored near parameter {param}")]
    PhaseDiscontinuity { param: f64 },

    #[error("Maslov box does not close: shelf sum {box_sum} ({detail})")]
    InconsistentBox { box_sum: i64, detail: String },

    #[error("unsupported boundary condition: {0}")]
    UnsupportedBoundary(String),

    #[error("unsupported feature: {0}")]
    Unsupported(String),

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Assumption(_)
            | Error::HyperbolicityLost { .. }
            | Error::NotPositiveDefinite { .. } => 2,
            Error::Config(_)
            | Error::Dimension(_)
            | Error::NotHermitian { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 3,
            Error::InconsistentBox { .. } => 4,
            Error::UnsupportedBoundary(_) | Error::Unsupported(_) => 5,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
