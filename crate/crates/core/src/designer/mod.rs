//! Spatially shaped noise families that stabilize a chosen local attractor
//! or push mass off a local repeller, and the check that a repelling
//! equilibrium loses mass under any normal family.

mod equilibrium;
mod family;
mod isolation;

pub use equilibrium::{verify_repelling_equilibrium, EquilibriumMember, EquilibriumVerdict};
pub use family::{
    band_constant, design_destabilizing_family, design_stabilizing_family, BandConstant,
    DesignOptions, DesignedFamily, MIN_TRANSITION_CELLS,
};
pub use isolation::{IsolationData, IsolationLevels, TargetKind};
