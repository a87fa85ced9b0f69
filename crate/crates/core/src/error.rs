use thiserror::Error;

/// Errors produced anywhere in the OCP-PINN pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("scalar was not recorded on this tape")]
    UnrecordedScalar,

    #[error("derivative of order {needed} in x requested but only order {available} was propagated")]
    MissingDerivative { needed: usize, available: usize },

    #[error("invalid derivative order: {0}")]
    InvalidOrder(String),

    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),

    #[error("boundary location `{location}` is not part of the plan for {problem}")]
    LocationNotInPlan {
        location: &'static str,
        problem: &'static str,
    },

    #[error("point ({x}, {t}) is not on the planned boundary set")]
    OffBoundary { x: f64, t: f64 },

    #[error("solver blow-up at time step {step}: |y| = {magnitude:e} exceeds guard (dt = {dt:e}, dx = {dx:e}; reduce dt below {suggested_dt:e})")]
    Unstable {
        step: usize,
        magnitude: f64,
        dt: f64,
        dx: f64,
        suggested_dt: f64,
    },

    #[error("singular matrix at pivot {0}")]
    Singular(usize),

    #[error("line search failed at iteration {iteration} after {backtracks} backtracks")]
    LineSearchFailed { iteration: usize, backtracks: usize },

    #[error("reference field has zero L2 norm")]
    ZeroNorm,

    #[error("requested {requested} {what} but only {available} are available")]
    NotEnoughNodes {
        what: &'static str,
        requested: usize,
        available: usize,
    },

    #[error("training diverged at epoch {epoch} (nu = {nu}): {detail}")]
    Diverged { epoch: usize, nu: f64, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
