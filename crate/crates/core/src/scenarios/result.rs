use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Scenario;
use crate::analysis::DICTIONARY_VERSION;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fpe::{solve_family, AssembleOptions, MemberSolution, SolveReport};
use crate::grid::{Grid2D, GridSpec};
use crate::measure::DiscreteMeasure;
use crate::schedule::{InvarianceMode, NullFamilySchedule};

/// Everything needed to re-derive a result's rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfigEcho {
    pub scenario: String,
    pub params: BTreeMap<String, f64>,
    pub grid: GridSpec,
    pub eps: Vec<f64>,
    /// `uniform`, `shaped`, `designed` or `tapered`.
    pub family: String,
    pub ratio: Option<f64>,
    pub seed: Option<u64>,
    pub dictionary_version: String,
    pub invariance_mode: InvarianceMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub eps: f64,
    pub values: BTreeMap<String, f64>,
}

/// A named verdict computed by a sweep (not a user threshold).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct ScenarioResult {
    pub config: RunConfigEcho,
    /// Solved members in schedule order.
    pub solutions: Vec<MemberSolution>,
    pub rows: Vec<MetricRow>,
    pub checks: Vec<Check>,
    /// Members whose solve failed, with the error message.
    pub failures: Vec<(f64, String)>,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a RunConfigEcho,
    rows: &'a [MetricRow],
    checks: &'a [Check],
    failures: &'a [(f64, String)],
    reports: Vec<(f64, &'a SolveReport)>,
}

impl ScenarioResult {
    pub fn measures(&self) -> Vec<&DiscreteMeasure> {
        self.solutions.iter().map(|s| &s.measure).collect()
    }

    /// A metric along the schedule; `None` if any row lacks it.
    pub fn series(&self, name: &str) -> Option<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.values.get(name).copied())
            .collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// `eps` first, then every metric name in sorted order; missing cells are empty.
    pub fn to_csv(&self) -> String {
        let names: BTreeSet<&String> = self.rows.iter().flat_map(|r| r.values.keys()).collect();
        let mut s = String::from("eps");
        for n in &names {
            let _ = write!(s, ",{n}");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{}", r.eps);
            for n in &names {
                match r.values.get(*n) {
                    Some(v) => {
                        let _ = write!(s, ",{v}");
                    }
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }

    /// Config, rows, checks, failures and per-member solve reports.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::to_value(Summary {
            config: &self.config,
            rows: &self.rows,
            checks: &self.checks,
            failures: &self.failures,
            reports: self.solutions.iter().map(|s| (s.eps, &s.report)).collect(),
        })
        .expect("summary serializes")
    }
}

/// `uniform` when every member is a constant field, `shaped` otherwise.
pub(crate) fn family_label(schedule: &NullFamilySchedule) -> &'static str {
    let constant = schedule
        .members()
        .iter()
        .all(|m| m.field.values().windows(2).all(|w| w[0] == w[1]));
    if constant {
        "uniform"
    } else {
        "shaped"
    }
}

pub(crate) fn echo(
    scenario: &Scenario,
    grid: &Grid2D,
    schedule: &NullFamilySchedule,
    family: &str,
) -> RunConfigEcho {
    RunConfigEcho {
        scenario: scenario.name.clone(),
        params: scenario.params.clone(),
        grid: grid.clone().into(),
        eps: schedule.eps(),
        family: family.into(),
        ratio: None,
        seed: None,
        dictionary_version: DICTIONARY_VERSION.into(),
        invariance_mode: schedule.invariance_mode(),
    }
}

/// Solves the schedule; failures are kept as messages and the sweep goes on.
/// Errors only if no member could be solved.
pub(crate) fn solve(
    scenario: &Scenario,
    schedule: &NullFamilySchedule,
    grid: &Grid2D,
    exec: Exec,
) -> Result<(Vec<MemberSolution>, Vec<(f64, String)>)> {
    if let Some(g) = schedule.grid() {
        g.same_as(grid)?;
    }
    let out = solve_family(scenario, schedule, grid, AssembleOptions::default(), exec);
    let failures: Vec<(f64, String)> = out
        .failures
        .iter()
        .map(|(e, err)| (*e, err.to_string()))
        .collect();
    if out.solutions.is_empty() && !schedule.is_empty() {
        let (_, first) = out.failures.into_iter().next().expect("non-empty schedule");
        return Err(first);
    }
    Ok((out.solutions, failures))
}

/// Schedule member for a solved `ε`.
pub(crate) fn member_field<'a>(
    schedule: &'a NullFamilySchedule,
    eps: f64,
) -> Result<&'a crate::field::DiffusionField> {
    schedule
        .members()
        .iter()
        .find(|m| m.eps == eps)
        .map(|m| &m.field)
        .ok_or_else(|| Error::InvalidArgument(format!("no schedule member at eps = {eps}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_union_of_columns() {
        let r = ScenarioResult {
            config: RunConfigEcho {
                scenario: "ou".into(),
                params: BTreeMap::new(),
                grid: Grid2D::line(-1.0, 1.0, 8).unwrap().into(),
                eps: vec![0.2, 0.1],
                family: "uniform".into(),
                ratio: None,
                seed: None,
                dictionary_version: DICTIONARY_VERSION.into(),
                invariance_mode: InvarianceMode::Reflecting,
            },
            solutions: vec![],
            rows: vec![
                MetricRow {
                    eps: 0.2,
                    values: BTreeMap::from([("b".into(), 1.5), ("a".into(), 0.1)]),
                },
                MetricRow {
                    eps: 0.1,
                    values: BTreeMap::from([("a".into(), 0.25)]),
                },
            ],
            checks: vec![],
            failures: vec![],
        };
        assert_eq!(r.to_csv(), "eps,a,b\n0.2,0.1,1.5\n0.1,0.25,\n");
        assert_eq!(r.series("a"), Some(vec![0.1, 0.25]));
        assert_eq!(r.series("b"), None);
        let s = r.summary();
        let back: RunConfigEcho = serde_json::from_value(s["config"].clone()).unwrap();
        assert_eq!(back, r.config);
    }
}
