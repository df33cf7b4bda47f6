use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::result::{echo, family_label, member_field, solve, Check, MetricRow, ScenarioResult};
use super::Scenario;
use crate::analysis::{
    anti_lyapunov_lower_bound, band_mass, convergence_report, exterior_mass, lyapunov_upper_bound,
    ReportSpec, TestFunctionDictionary,
};
use crate::designer::verify_repelling_equilibrium;
use crate::dynamics::{fit_operator_certificate, CertificateSpec};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{Drift, ScalarField, VectorField};
use crate::grid::Grid2D;
use crate::schedule::NullFamilySchedule;

/// Levels of `U = r²` used by the bound checks of a Hopf sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopfLevels {
    /// `ρ_m` of the decreasing operator certificate; at least `b/2`.
    pub rho_m: f64,
    /// Levels at which the exterior mass is compared with its upper bound.
    pub rhos: Vec<f64>,
    /// `[ρ_m, ρ_M]` of the increasing certificate around the origin (`b > 0`).
    pub anti_band: [f64; 2],
    pub anti_rho0: f64,
    pub anti_rhos: Vec<f64>,
    /// `ρ₀ < ρ̄` of the repelling-equilibrium template (`b > 0`).
    pub eq_rho0: f64,
    pub eq_rho_bar: f64,
}

impl HopfLevels {
    /// Defaults scaled with `b` inside the cycle; the outer levels stay fixed
    /// so that `{U ≤ 4}` fits the default box.
    pub fn for_b(b: f64) -> Self {
        let s = b.max(0.0);
        HopfLevels {
            rho_m: 1.5,
            rhos: vec![1.75, 2.0, 2.5, 3.0, 4.0],
            anti_band: [0.04 * s, 0.49 * s],
            anti_rho0: 0.09 * s,
            anti_rhos: [0.16, 0.25, 0.36, 0.45].iter().map(|x| x * s).collect(),
            eq_rho0: 0.04 * s,
            eq_rho_bar: 0.49 * s,
        }
    }
}

/// Smallest value of `u` on the boundary cells: the largest level whose
/// sublevel set stays inside the box.
pub fn boundary_level(u: &ScalarField) -> f64 {
    let g = u.grid();
    (0..g.len())
        .filter(|&k| g.is_boundary(k))
        .map(|k| u.at(k))
        .fold(f64::INFINITY, f64::min)
}

/// Per-`ε` Hopf diagnostics: origin, core and annulus masses, angular
/// uniformity, BL distance to the reference limit, invariance residuals, and
/// the upper (all `b`) and lower (`b > 0`) level-set bounds for `U = r²`.
pub fn run_hopf_sweep(
    scenario: &Scenario,
    schedule: &NullFamilySchedule,
    grid: &Grid2D,
    levels: &HopfLevels,
    exec: Exec,
) -> Result<ScenarioResult> {
    let b = scenario
        .b()
        .filter(|_| scenario.name == "hopf")
        .ok_or_else(|| {
            Error::InvalidArgument(format!("{} is not a Hopf scenario", scenario.name))
        })?;
    if grid.is_line() {
        return Err(Error::InvalidArgument(
            "the Hopf sweep needs a planar grid".into(),
        ));
    }
    let (solutions, failures) = solve(scenario, schedule, grid, exec)?;
    let v = VectorField::sample(grid, |x, y| scenario.eval(x, y))?;
    let u = ScalarField::sample(grid, |x, y| scenario.certificate(x, y))?;
    let dict = TestFunctionDictionary::standard(grid)?;
    let reference = scenario.reference_measure(grid, 0.0)?;
    let rb = b.max(0.0).sqrt();
    let mut regions = vec![
        (
            "origin".to_string(),
            grid.cells()
                .map(|c| c.radius() < 0.3 * rb.max(1.0))
                .collect(),
        ),
        (
            "core".to_string(),
            grid.cells().map(|c| c.radius() < 0.2).collect(),
        ),
    ];
    if b > 0.0 {
        regions.push((
            "annulus".into(),
            grid.cells()
                .map(|c| (c.radius() - rb).abs() < 0.15)
                .collect(),
        ));
    }
    let measures: Vec<(f64, &_)> = solutions.iter().map(|s| (s.eps, &s.measure)).collect();
    let report = convergence_report(
        &measures,
        &ReportSpec {
            v: &v,
            dict: &dict,
            reference: Some(&reference),
            level: None,
            rhos: vec![],
            regions,
        },
        exec,
    )?;
    let mut rows: Vec<MetricRow> = report
        .rows
        .iter()
        .map(|r| {
            let mut values = BTreeMap::new();
            values.insert(
                "bl_reference".into(),
                r.bl_distance.expect("reference given"),
            );
            values.insert(
                "radial_w1_reference".into(),
                r.radial_w1.expect("reference given"),
            );
            values.insert(
                "angular_w1_uniform".into(),
                r.angular_w1_uniform.expect("planar grid"),
            );
            values.insert("residual_max".into(), r.residual_max);
            values.insert("residual_mean".into(), r.residual_mean);
            for (k, m) in &r.masses {
                values.insert(format!("mass_{k}"), *m);
            }
            MetricRow { eps: r.eps, values }
        })
        .collect();

    let rho_max = boundary_level(&u);
    let mut checks = Vec::new();
    let mut upper = Check {
        name: "upper_bound".into(),
        pass: true,
        detail: String::new(),
    };
    for (s, row) in solutions.iter().zip(rows.iter_mut()) {
        let a = member_field(schedule, s.eps)?;
        let spec = CertificateSpec::lyapunov(levels.rho_m, 0.0).with_rho_max(rho_max);
        let cert = match fit_operator_certificate(&u, &v, a, spec) {
            Ok(c) => c,
            Err(e) => {
                upper.pass = false;
                upper.detail += &format!("eps = {}: {e}; ", s.eps);
                continue;
            }
        };
        row.values.insert("gamma_upper".into(), cert.spec.gamma);
        for &rho in &levels.rhos {
            let bound = lyapunov_upper_bound(&cert, a, rho)?.value;
            let ext = exterior_mass(&s.measure, &u, rho)?;
            row.values.insert(format!("bound_{rho}"), bound);
            row.values.insert(format!("exterior_{rho}"), ext);
            if ext > bound {
                upper.pass = false;
                upper.detail += &format!(
                    "eps = {}, rho = {rho}: exterior {ext} > bound {bound}; ",
                    s.eps
                );
            }
        }
    }
    checks.push(upper);

    if b > 0.0 {
        let mut anti = Check {
            name: "anti_bound".into(),
            pass: true,
            detail: String::new(),
        };
        let [lo, hi] = levels.anti_band;
        for (s, row) in solutions.iter().zip(rows.iter_mut()) {
            let a = member_field(schedule, s.eps)?;
            let cert = match fit_operator_certificate(
                &u,
                &v,
                a,
                CertificateSpec::anti(lo, 0.0).with_rho_max(hi),
            ) {
                Ok(c) => c,
                Err(e) => {
                    anti.pass = false;
                    anti.detail += &format!("eps = {}: {e}; ", s.eps);
                    continue;
                }
            };
            row.values.insert("gamma_anti".into(), cert.spec.gamma);
            let base = band_mass(&s.measure, &u, lo, levels.anti_rho0)?;
            for &rho in &levels.anti_rhos {
                let factor = anti_lyapunov_lower_bound(&cert, a, levels.anti_rho0, rho)?.value;
                let lhs = band_mass(&s.measure, &u, lo, rho)?;
                row.values
                    .insert(format!("anti_ratio_{rho}"), lhs / (base * factor));
                if lhs < base * factor {
                    anti.pass = false;
                    anti.detail +=
                        &format!("eps = {}, rho = {rho}: {lhs} < {base} * {factor}; ", s.eps);
                }
            }
        }
        checks.push(anti);

        let eq = if solutions.len() == schedule.len() {
            let ms: Vec<_> = solutions.iter().map(|s| &s.measure).collect();
            verify_repelling_equilibrium(
                [0.0, 0.0],
                &v,
                &u,
                schedule,
                &ms,
                levels.eq_rho0,
                levels.eq_rho_bar,
            )
        } else {
            Err(Error::InvalidArgument(
                "some members failed to solve".into(),
            ))
        };
        match eq {
            Ok(verdict) => {
                for (m, row) in verdict.members.iter().zip(rows.iter_mut()) {
                    row.values.insert("mass_rho0".into(), m.mass);
                    row.values
                        .insert("equilibrium_template".into(), verdict.template);
                }
                checks.push(Check {
                    name: "repelling_equilibrium".into(),
                    pass: verdict.pass,
                    detail: format!(
                        "C = {}, template = {}, below = {:?}",
                        verdict.constant,
                        verdict.template,
                        verdict
                            .members
                            .iter()
                            .map(|m| m.below_template)
                            .collect::<Vec<_>>()
                    ),
                });
            }
            Err(e) => checks.push(Check {
                name: "repelling_equilibrium".into(),
                pass: false,
                detail: e.to_string(),
            }),
        }
    }

    Ok(ScenarioResult {
        config: echo(scenario, grid, schedule, family_label(schedule)),
        solutions,
        rows,
        checks,
        failures,
    })
}
