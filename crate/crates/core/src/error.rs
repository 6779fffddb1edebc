use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid density spec: {0}")]
    InvalidDensity(String),

    #[error("periodicity violated: |∫ L_ψ ρ| = {residual:e} exceeds tolerance {tolerance:e}")]
    Periodicity { residual: f64, tolerance: f64 },

    #[error("singular evaluation: {0}")]
    Singularity(String),

    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("operation `{op}` is not defined for the {variant} kernel")]
    Variant { op: &'static str, variant: &'static str },

    #[error("positivity lost at t = {time}: min ρ = {min_rho:e} below floor {floor:e}")]
    Positivity { time: f64, min_rho: f64, floor: f64 },

    #[error("step limit of {max_steps} reached at t = {time}")]
    StepLimit { max_steps: usize, time: f64 },

    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("Fourier tail not certified: |χ̂(k)| ≤ {tail_bound} for k > {k_max} exceeds scanned max {scanned_max}")]
    Tail {
        k_max: usize,
        tail_bound: f64,
        scanned_max: f64,
    },

    #[error("smallness violated ({condition}): sup|q0| = {value} must be < {threshold} (margin {margin})")]
    SmallnessViolation {
        condition: String,
        value: f64,
        threshold: f64,
        margin: f64,
    },

    #[error("tail window holds {found} snapshots, need at least {needed}")]
    InsufficientTail { found: usize, needed: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
