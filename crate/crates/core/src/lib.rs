//! Numerical laboratory for stationary Fokker-Planck equations under vanishing noise.
//!
//! The crate solves `∂²ᵢⱼ(aⁱʲu) − ∂ᵢ(Vⁱu) = 0` on truncated planar grids for a
//! schedule of shrinking diffusion matrices, and checks how the resulting
//! stationary measures concentrate on the attractors of the noiseless flow
//! `ẋ = V(x)`.
//!
//! Layout:
//!
//! - [`grid`], [`field`], [`measure`], [`schedule`], [`doc`]: shared domain types
//!   and the on-disk document format.
//! - [`dynamics`]: RK4 flows, attractor detection, Lyapunov certificates.
//! - [`fpe`]: exponentially fitted finite-volume assembly and the stationary solve.
//! - [`sde`]: Euler-Maruyama occupation measures, an independent Monte-Carlo oracle.
//! - [`analysis`]: weak* diagnostics, invariance residuals and level-set bounds.
//! - [`designer`]: spatially shaped noise families that stabilize or destabilize
//!   chosen invariant sets.
//! - [`scenarios`]: the scenario library (OU, Gibbs, double well, Hopf).
//!
//! Work that fans out (Monte-Carlo paths, family sweeps, per-cell assembly) goes
//! through [`Exec`], which uses rayon when the `parallel` feature is on and
//! otherwise runs sequentially. Results never depend on the execution mode.

pub mod analysis;
pub mod designer;
pub mod doc;
pub mod dynamics;
pub mod error;
pub mod exec;
pub mod field;
pub mod fpe;
pub mod grid;
pub mod linalg;
pub mod measure;
pub mod scenarios;
pub mod schedule;
pub mod sde;

pub use error::{Error, Result};
pub use exec::Exec;
pub use field::{DiffusionField, Drift, ScalarField, Sym2, VectorField};
pub use grid::{Cell, Grid2D};
pub use measure::DiscreteMeasure;
pub use schedule::{FamilyMember, InvarianceMode, NullFamilySchedule};
