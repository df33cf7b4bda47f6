//! Measure diagnostics: weak* distances, invariance residuals, level-set
//! bounds, tightness and support checks.

mod bl;
mod bounds;
mod dictionary;
mod report;
mod residual;
mod support;

pub use bl::{angular_w1, angular_w1_to_uniform, bl_distance, radial_w1, BlReport, ANGULAR_BINS};
pub use bounds::{
    anti_lyapunov_lower_bound, band_mass, exterior_mass, level_integral, lyapunov_upper_bound,
    LevelBound, LevelIntegral, RHO_MESH_POINTS,
};
pub use dictionary::{
    TestFunction, TestFunctionDictionary, BOUNDARY_TOLERANCE, DICTIONARY_VERSION,
};
pub use report::{convergence_report, ConvergenceReport, ConvergenceRow, ReportSpec};
pub use residual::{invariance_residual, ResidualReport};
pub use support::{
    support_in_zero_set, tightness_profile, SupportVerdict, TightnessProfile, DEFAULT_LIMIT_MASS,
};
