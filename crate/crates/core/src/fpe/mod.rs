//! Stationary Fokker-Planck solver: assembly, null-vector solve, family sweeps.

mod assemble;
mod family;
mod solve;

pub use assemble::{
    assemble, bernoulli, AssembleOptions, DiscreteOperator, StencilInfo, DEFAULT_ANISOTROPY_CAP,
    MAX_PECLET,
};
pub use family::{solve_family, FamilyOutcome, MemberSolution};
pub use solve::{
    closed_classes, solve_stationary, SolveMethod, SolveReport, CLIP_TOLERANCE, RESIDUAL_TOLERANCE,
};
