use super::assemble::{assemble, AssembleOptions};
use super::solve::{solve_stationary, SolveReport};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::Drift;
use crate::grid::Grid2D;
use crate::measure::DiscreteMeasure;
use crate::schedule::NullFamilySchedule;

#[derive(Clone, Debug)]
pub struct MemberSolution {
    pub eps: f64,
    pub measure: DiscreteMeasure,
    pub report: SolveReport,
}

/// Solutions and failures of a sweep, each in schedule order.
#[derive(Debug, Default)]
pub struct FamilyOutcome {
    pub solutions: Vec<MemberSolution>,
    pub failures: Vec<(f64, Error)>,
}

impl FamilyOutcome {
    pub fn measures(&self) -> Vec<&DiscreteMeasure> {
        self.solutions.iter().map(|s| &s.measure).collect()
    }

    /// The solutions, or the first failure.
    pub fn into_result(mut self) -> Result<Vec<MemberSolution>> {
        if self.failures.is_empty() {
            Ok(self.solutions)
        } else {
            Err(self.failures.swap_remove(0).1)
        }
    }
}

/// Solves every member of `family`; failures are collected and the sweep
/// continues. Members run concurrently under `Exec::Parallel`, each solve
/// being sequential, so the outcome does not depend on `exec`.
pub fn solve_family(
    drift: &dyn Drift,
    family: &NullFamilySchedule,
    grid: &Grid2D,
    opts: AssembleOptions,
    exec: Exec,
) -> FamilyOutcome {
    let results = exec.map(family.members(), |m| {
        let op = assemble(drift, &m.field, grid, opts, Exec::Sequential)?;
        let (measure, report) = solve_stationary(&op)?;
        Ok(MemberSolution {
            eps: m.eps,
            measure,
            report,
        })
    });
    let mut out = FamilyOutcome::default();
    for (m, r) in family.members().iter().zip(results) {
        match r {
            Ok(s) => out.solutions.push(s),
            Err(e) => out.failures.push((m.eps, e)),
        }
    }
    out
}
