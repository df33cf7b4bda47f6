use std::collections::BTreeMap;

use super::hopf::boundary_level;
use super::result::{echo, family_label, member_field, solve, Check, MetricRow, ScenarioResult};
use super::Scenario;
use crate::analysis::{
    bl_distance, exterior_mass, invariance_residual, lyapunov_upper_bound, support_in_zero_set,
    TestFunctionDictionary, DEFAULT_LIMIT_MASS,
};
use crate::dynamics::{fit_operator_certificate, verify_lyapunov, CertificateSpec};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{Drift, ScalarField, VectorField};
use crate::grid::Grid2D;
use crate::schedule::NullFamilySchedule;

/// Gradient-system sweep against the analytic density `∝ exp(−Φ/(cε))`:
/// L1 and BL errors, invariance residuals with their scale
/// `sup|A|·max‖Δh‖∞`, support of the mass relative to `{V·∇U = 0}`, and
/// optionally the level-set upper bound at `levels = (ρ_m, ρ's)` for the
/// scenario's certificate. Double-well runs add left/right and well masses.
pub fn run_gibbs(
    scenario: &Scenario,
    schedule: &NullFamilySchedule,
    grid: &Grid2D,
    levels: Option<(f64, &[f64])>,
    exec: Exec,
) -> Result<ScenarioResult> {
    if !scenario.has_analytic_density() {
        return Err(Error::InvalidArgument(format!(
            "{} has no analytic density",
            scenario.name
        )));
    }
    let (solutions, failures) = solve(scenario, schedule, grid, exec)?;
    let v = VectorField::sample(grid, |x, y| scenario.eval(x, y))?;
    let u = ScalarField::sample(grid, |x, y| scenario.certificate(x, y))?;
    let dict = TestFunctionDictionary::standard(grid)?;
    let rho_max = boundary_level(&u);
    let weak = verify_lyapunov(&u, &v, CertificateSpec::entire_weak().with_rho_max(rho_max))?;
    let mut upper = Check {
        name: "upper_bound".into(),
        pass: true,
        detail: String::new(),
    };
    let rows = exec.map(&solutions, |s| -> Result<(MetricRow, Vec<String>)> {
        let mu = &s.measure;
        let a = member_field(schedule, s.eps)?;
        let exact = scenario
            .analytic_measure(grid, s.eps)?
            .expect("checked above");
        let mut values = BTreeMap::new();
        values.insert("l1_error".into(), mu.l1_distance(&exact)?);
        values.insert(
            "bl_reference".into(),
            bl_distance(mu, &exact, Some(&dict))?.distance,
        );
        let res = invariance_residual(mu, &v, &dict, Exec::Sequential)?;
        values.insert("residual_max".into(), res.max);
        values.insert("residual_mean".into(), res.weighted_mean);
        values.insert(
            "residual_scale".into(),
            a.sup_norm() * dict.max_laplacian_sup(),
        );
        values.insert(
            "support_offending_mass".into(),
            support_in_zero_set(mu, &v, &weak, DEFAULT_LIMIT_MASS)?.offending_mass,
        );
        if !grid.is_line() {
            values.insert("mass_left".into(), mu.mass_on(|c| c.x < 0.0));
            values.insert("mass_right".into(), mu.mass_on(|c| c.x > 0.0));
        }
        if scenario.name == "double-well" {
            values.insert(
                "mass_wells".into(),
                mu.mass_on(|c| (c.x - 1.0).hypot(c.y) < 0.5 || (c.x + 1.0).hypot(c.y) < 0.5),
            );
        }
        let mut violations = Vec::new();
        if let Some((rho_m, rhos)) = levels {
            let spec = CertificateSpec::lyapunov(rho_m, 0.0).with_rho_max(rho_max);
            match fit_operator_certificate(&u, &v, a, spec) {
                Ok(cert) => {
                    values.insert("gamma_upper".into(), cert.spec.gamma);
                    for &rho in rhos {
                        let bound = lyapunov_upper_bound(&cert, a, rho)?.value;
                        let ext = exterior_mass(mu, &u, rho)?;
                        values.insert(format!("bound_{rho}"), bound);
                        values.insert(format!("exterior_{rho}"), ext);
                        if ext > bound {
                            violations.push(format!(
                                "eps = {}, rho = {rho}: exterior {ext} > bound {bound}",
                                s.eps
                            ));
                        }
                    }
                }
                Err(e) => violations.push(format!("eps = {}: {e}", s.eps)),
            }
        }
        Ok((MetricRow { eps: s.eps, values }, violations))
    });
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        let (row, v) = r?;
        if !v.is_empty() {
            upper.pass = false;
            upper.detail += &v.join("; ");
        }
        out.push(row);
    }
    let mut checks = Vec::new();
    if levels.is_some() {
        checks.push(upper);
    }
    Ok(ScenarioResult {
        config: echo(scenario, grid, schedule, family_label(schedule)),
        solutions,
        rows: out,
        checks,
        failures,
    })
}
