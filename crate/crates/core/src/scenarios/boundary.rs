use serde::{Deserialize, Serialize};

use super::result::solve;
use super::Scenario;
use crate::analysis::{bl_distance, TestFunctionDictionary};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{DiffusionField, ScalarField};
use crate::fpe::MemberSolution;
use crate::grid::Grid2D;
use crate::schedule::{FamilyMember, InvarianceMode, NullFamilySchedule};

/// Floor of the boundary taper. The diffusion never vanishes exactly: the
/// operator must stay irreducible and the cell Péclet number within the
/// stencil cap where the drift is strongest.
pub const TAPER_FLOOR: f64 = 0.1;

/// `max(floor, smoothstep(d/width))`, with `d` the distance from the cell
/// centre to the box boundary.
pub fn taper_profile(grid: &Grid2D, width: f64) -> Result<ScalarField> {
    if !(width > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "taper width must be positive, got {width}"
        )));
    }
    ScalarField::sample(grid, |x, y| {
        let mut d = (x - grid.x_min()).min(grid.x_max() - x);
        if !grid.is_line() {
            d = d.min(y - grid.y_min()).min(grid.y_max() - y);
        }
        let t = (d / width).clamp(0.0, 1.0);
        (t * t * (3.0 - 2.0 * t)).max(TAPER_FLOOR)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRow {
    pub eps: f64,
    pub bl: f64,
    pub l1: f64,
    /// Mass within `width` of the boundary under each treatment.
    pub edge_mass_reflecting: f64,
    pub edge_mass_tapered: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryComparison {
    pub width: f64,
    pub rows: Vec<BoundaryRow>,
    #[serde(skip)]
    pub reflecting: Vec<MemberSolution>,
    #[serde(skip)]
    pub tapered: Vec<MemberSolution>,
}

/// Reflecting truncation against a family whose diffusion tapers to
/// `TAPER_FLOOR·A` at the box boundary, member by member.
pub fn run_boundary_comparison(
    scenario: &Scenario,
    eps: &[f64],
    grid: &Grid2D,
    width: f64,
    exec: Exec,
) -> Result<BoundaryComparison> {
    let taper = taper_profile(grid, width)?;
    let reflecting =
        NullFamilySchedule::scaled(grid, eps, |_, _| scenario.base, InvarianceMode::Reflecting)?;
    let members = eps
        .iter()
        .map(|&e| {
            let base = scenario.diffusion(e);
            Ok(FamilyMember {
                eps: e,
                field: DiffusionField::from_values(
                    grid,
                    taper.values().iter().map(|&s| base.scaled(s)).collect(),
                )?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tapered = NullFamilySchedule::new(members, InvarianceMode::VanishingAtBoundary)?;
    let (r, rf) = solve(scenario, &reflecting, grid, exec)?;
    let (t, tf) = solve(scenario, &tapered, grid, exec)?;
    if let Some((e, m)) = rf.into_iter().chain(tf).next() {
        return Err(Error::InvalidArgument(format!(
            "member eps = {e} failed: {m}"
        )));
    }
    let dict = TestFunctionDictionary::standard(grid)?;
    let edge = |c: &crate::grid::Cell| taper.at(c.index) < 1.0;
    let rows = r
        .iter()
        .zip(&t)
        .map(|(a, b)| {
            Ok(BoundaryRow {
                eps: a.eps,
                bl: bl_distance(&a.measure, &b.measure, Some(&dict))?.distance,
                l1: a.measure.l1_distance(&b.measure)?,
                edge_mass_reflecting: a.measure.mass_on(edge),
                edge_mass_tapered: b.measure.mass_on(edge),
            })
        })
        .collect::<Result<_>>()?;
    Ok(BoundaryComparison {
        width,
        rows,
        reflecting: r,
        tapered: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn taper_vanishes_only_at_the_edge() {
        let g = Grid2D::square(2.0, 40).unwrap();
        let t = taper_profile(&g, 0.5).unwrap();
        assert_eq!(t.at(g.locate(0.0, 0.0).unwrap()), 1.0);
        assert_eq!(t.at(0), TAPER_FLOOR);
    }

    #[test]
    fn confined_mass_ignores_the_boundary_treatment() {
        let s = Scenario::by_name("hopf", &BTreeMap::new()).unwrap();
        let g = Grid2D::square(2.5, 60).unwrap();
        let c = run_boundary_comparison(&s, &[0.2, 0.1], &g, 0.4, Exec::Parallel).unwrap();
        for r in &c.rows {
            assert!(r.bl < 1e-3 && r.edge_mass_reflecting < 1e-4, "{r:?}");
        }
    }
}
