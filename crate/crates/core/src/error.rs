use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value at cell {cell}")]
    NonFinite { cell: usize },

    #[error(
        "diffusion matrix not positive definite at cell {cell} (smallest eigenvalue {min_eig:e})"
    )]
    NotSpd { cell: usize, min_eig: f64 },

    #[error("grids do not match")]
    GridMismatch,

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("stencil overflow at cell {cell}: |v h / a| = {peclet:e} exceeds 700")]
    StencilOverflow { cell: usize, peclet: f64 },

    #[error("anisotropy cap violated at cell {cell}: lambda/Lambda = {ratio} < {cap}")]
    AnisotropyCap { cell: usize, ratio: f64, cap: f64 },

    #[error("operator has {closed_classes} closed communicating classes; stationary measure is not unique")]
    Singular { closed_classes: usize },

    #[error("stationary solve did not converge (residual history {history:?})")]
    NoConvergence { history: Vec<f64> },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error(
        "ensemble not settled: diameter changed by {relative_change:.3} over the last 20% of time"
    )]
    NotSettled { relative_change: f64 },

    #[error("trajectory state became non-finite at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lyapunov inequality violated at {} cells (worst excess {worst_excess:e}, slack {slack:e})", cells.len())]
    Violation {
        cells: Vec<usize>,
        worst_excess: f64,
        slack: f64,
    },

    #[error("level-set hypothesis fails: gradient vanishes on level band near rho = {rho}")]
    HypothesisFail { rho: f64, fallback_factor: f64 },

    #[error("gradient of the isolating function degenerates on the level set (min |grad| = {min_grad:e})")]
    DegenerateGradient { min_grad: f64 },

    #[error("isolation data invalid: {0}")]
    InvalidIsolation(String),

    #[error("ratio {ratio} infeasible: transition band spans {band_cells:.2} cells, need at least {min_cells} (minimum feasible level width {min_level_width:e})")]
    RatioInfeasible {
        ratio: f64,
        band_cells: f64,
        min_cells: f64,
        min_level_width: f64,
    },

    #[error("certificate fails {condition}: {detail}")]
    CertificateFail {
        condition: &'static str,
        detail: String,
    },

    #[error("sampler under-resolved: {fraction:.4} of steps jump more than two cells")]
    Underresolved { fraction: f64 },

    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),

    #[error("document error: {0}")]
    Document(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
