use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::analysis::{bl_distance, TestFunctionDictionary};
use crate::error::Result;
use crate::exec::Exec;
use crate::field::DiffusionField;
use crate::fpe::{assemble, solve_stationary, AssembleOptions};
use crate::grid::Grid2D;
use crate::measure::DiscreteMeasure;
use crate::sde::{occupation_measure, SamplerConfig, SamplerDiagnostics};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossOracleRow {
    pub eps: f64,
    /// BL distance between the PDE and Monte-Carlo measures.
    pub bl: f64,
    pub radial_w1: f64,
    pub large_jump_fraction: f64,
    pub drift_resolved_fraction: f64,
}

/// Solves and samples the same member `A = ε·base` at each `ε` and compares
/// the two measures. Returns the rows and the measures `(pde, mc)`.
pub fn run_cross_oracle(
    scenario: &Scenario,
    eps: &[f64],
    grid: &Grid2D,
    cfg: &SamplerConfig,
    exec: Exec,
) -> Result<(Vec<CrossOracleRow>, Vec<(DiscreteMeasure, DiscreteMeasure)>)> {
    let dict = TestFunctionDictionary::standard(grid)?;
    let mut rows = Vec::with_capacity(eps.len());
    let mut pairs = Vec::with_capacity(eps.len());
    for &e in eps {
        let a = DiffusionField::constant(grid, scenario.diffusion(e))?;
        let op = assemble(scenario, &a, grid, AssembleOptions::default(), exec)?;
        let (pde, _) = solve_stationary(&op)?;
        let (mc, diag): (DiscreteMeasure, SamplerDiagnostics) =
            occupation_measure(scenario, &a, grid, cfg, exec)?;
        let b = bl_distance(&pde, &mc, Some(&dict))?;
        rows.push(CrossOracleRow {
            eps: e,
            bl: b.distance,
            radial_w1: b.radial_w1,
            large_jump_fraction: diag.large_jump_fraction,
            drift_resolved_fraction: diag.drift_resolved_fraction,
        });
        pairs.push((pde, mc));
    }
    Ok((rows, pairs))
}
