use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bl::{angular_w1_to_uniform, bl_distance};
use super::dictionary::TestFunctionDictionary;
use super::residual::invariance_residual;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{ScalarField, VectorField};
use crate::measure::DiscreteMeasure;

/// Metrics of one schedule member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    /// BL distance to the reference measure, when one is given.
    pub bl_distance: Option<f64>,
    pub radial_w1: Option<f64>,
    /// Angular-marginal W1 to the uniform law (planar grids only).
    pub angular_w1_uniform: Option<f64>,
    pub residual_max: f64,
    pub residual_mean: f64,
    pub masses: BTreeMap<String, f64>,
    /// `μ({U ≥ ρ_j})` on the report's level mesh.
    pub exterior: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub dictionary_version: String,
    pub rhos: Vec<f64>,
    pub rows: Vec<ConvergenceRow>,
}

/// What to measure along a schedule.
pub struct ReportSpec<'a> {
    pub v: &'a VectorField,
    pub dict: &'a TestFunctionDictionary,
    pub reference: Option<&'a DiscreteMeasure>,
    /// Level function for the tightness columns.
    pub level: Option<&'a ScalarField>,
    pub rhos: Vec<f64>,
    /// Named cell masks whose masses are tracked.
    pub regions: Vec<(String, Vec<bool>)>,
}

/// Per-`ε` diagnostics, computed concurrently across the schedule.
pub fn convergence_report(
    measures: &[(f64, &DiscreteMeasure)],
    spec: &ReportSpec,
    exec: Exec,
) -> Result<ConvergenceReport> {
    if spec.level.is_none() && !spec.rhos.is_empty() {
        return Err(Error::InvalidArgument(
            "level mesh given without a level function".into(),
        ));
    }
    let rows = exec.map(measures, |&(eps, mu)| -> Result<ConvergenceRow> {
        let res = invariance_residual(mu, spec.v, spec.dict, Exec::Sequential)?;
        let (bl, radial) = match spec.reference {
            Some(r) => {
                let b = bl_distance(mu, r, Some(spec.dict))?;
                (Some(b.distance), Some(b.radial_w1))
            }
            None => (None, None),
        };
        let mut masses = BTreeMap::new();
        for (name, mask) in &spec.regions {
            if mask.len() != mu.grid().len() {
                return Err(Error::GridMismatch);
            }
            masses.insert(name.clone(), mu.mass_on(|c| mask[c.index]));
        }
        let exterior = match spec.level {
            Some(u) => {
                mu.grid().same_as(u.grid())?;
                spec.rhos
                    .iter()
                    .map(|&rho| mu.mass_on(|c| u.at(c.index) >= rho))
                    .collect()
            }
            None => vec![],
        };
        Ok(ConvergenceRow {
            eps,
            bl_distance: bl,
            radial_w1: radial,
            angular_w1_uniform: (!mu.grid().is_line()).then(|| angular_w1_to_uniform(mu)),
            residual_max: res.max,
            residual_mean: res.weighted_mean,
            masses,
            exterior,
        })
    });
    let report = ConvergenceReport {
        dictionary_version: spec.dict.version().into(),
        rhos: spec.rhos.clone(),
        rows: rows.into_iter().collect::<Result<_>>()?,
    };
    report.validate()?;
    Ok(report)
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

impl ConvergenceReport {
    /// Metrics are finite and non-negative; BL distances lie in `[0, 2]`.
    pub fn validate(&self) -> Result<()> {
        for r in &self.rows {
            let mut all = vec![r.residual_max, r.residual_mean];
            all.extend(r.bl_distance);
            all.extend(r.radial_w1);
            all.extend(r.angular_w1_uniform);
            all.extend(r.masses.values());
            all.extend(&r.exterior);
            if all.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidArgument(format!(
                    "metric out of range at eps = {}",
                    r.eps
                )));
            }
            if r.bl_distance.is_some_and(|b| b > 2.0) {
                return Err(Error::InvalidArgument(format!(
                    "BL distance above 2 at eps = {}",
                    r.eps
                )));
            }
        }
        Ok(())
    }

    /// Mass series of a named region, in schedule order.
    pub fn mass_series(&self, name: &str) -> Option<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.masses.get(name).copied())
            .collect()
    }

    /// One row per `ε`; columns are fixed metrics, then region masses, then exterior masses.
    pub fn to_csv(&self) -> String {
        let names: Vec<&String> = self
            .rows
            .first()
            .map(|r| r.masses.keys().collect())
            .unwrap_or_default();
        let mut s =
            String::from("eps,bl_distance,radial_w1,angular_w1_uniform,residual_max,residual_mean");
        for n in &names {
            let _ = write!(s, ",mass_{n}");
        }
        for rho in &self.rhos {
            let _ = write!(s, ",exterior_{rho}");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(
                s,
                "{},{},{},{},{},{}",
                r.eps,
                cell(r.bl_distance),
                cell(r.radial_w1),
                cell(r.angular_w1_uniform),
                r.residual_max,
                r.residual_mean
            );
            for n in &names {
                let _ = write!(s, ",{}", cell(r.masses.get(*n).copied()));
            }
            for x in &r.exterior {
                let _ = write!(s, ",{x}");
            }
            s.push('\n');
        }
        s
    }
}
