use std::collections::BTreeMap;

use super::hopf::boundary_level;
use super::result::{echo, member_field, solve, MetricRow, ScenarioResult};
use super::Scenario;
use crate::designer::{
    band_constant, design_destabilizing_family, design_stabilizing_family, BandConstant,
    DesignOptions, DesignedFamily, IsolationData, TargetKind,
};
use crate::dynamics::{fit_operator_certificate, verify_lyapunov, CertificateSpec};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{DiffusionField, Drift, ScalarField, VectorField};
use crate::grid::Grid2D;
use crate::schedule::{InvarianceMode, NullFamilySchedule};

/// Uniform and designed sweeps over the same `ε` list.
#[derive(Clone, Debug)]
pub struct PairedResult {
    pub target: String,
    pub kind: TargetKind,
    /// Metric compared for dominance: `mass_basin` when the target has a
    /// basin, `mass_target` (the isolating neighbourhood) otherwise.
    pub metric: String,
    pub uniform: ScenarioResult,
    pub designed: ScenarioResult,
    pub family: DesignedFamily,
    pub band: BandConstant,
    /// Per `ε`: designed ≥ uniform for attractors, ≤ for repellers.
    pub dominance: Vec<bool>,
}

impl PairedResult {
    pub fn dominates_everywhere(&self) -> bool {
        !self.dominance.is_empty() && self.dominance.iter().all(|&d| d)
    }
}

/// Isolation data, band constant and designed family for a named target.
#[derive(Clone, Debug)]
pub struct TargetDesign {
    pub kind: TargetKind,
    pub iso: IsolationData,
    pub band: BandConstant,
    pub family: DesignedFamily,
    /// Rate of the global certificate, fitted to `A = ε₀·base`.
    pub global_gamma: f64,
}

/// Designs a family with ratio `R` for the named target.
///
/// The global certificate is the scenario's `U` with the rate fitted to the
/// largest uniform member `eps[0]·base`; every designed member must satisfy it.
pub fn design_for_target(
    scenario: &Scenario,
    target: &str,
    ratio: f64,
    eps: &[f64],
    grid: &Grid2D,
) -> Result<TargetDesign> {
    let preset = scenario.target(target)?;
    let v = VectorField::sample(grid, |x, y| scenario.eval(x, y))?;
    let u0 = ScalarField::sample(grid, |x, y| (preset.u0)(x, y))?;
    let iso = IsolationData::new(u0, v.clone(), preset.kind, preset.levels)?;
    let band = band_constant(&iso)?;
    let e0 = *eps
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty eps list".into()))?;
    let first = DiffusionField::constant(grid, scenario.diffusion(e0))?;
    let u = ScalarField::sample(grid, |x, y| scenario.certificate(x, y))?;
    let spec = CertificateSpec::lyapunov(preset.global_rho_m, 0.0).with_rho_max(boundary_level(&u));
    let gamma = fit_operator_certificate(&u, &v, &first, spec)?.spec.gamma;
    let global = verify_lyapunov(&u, &v, CertificateSpec { gamma, ..spec })?;
    let opts = DesignOptions {
        ratio,
        ..DesignOptions::default()
    };
    let family = match preset.kind {
        TargetKind::Attractor => design_stabilizing_family(&iso, &global, eps, opts)?,
        TargetKind::Repeller => design_destabilizing_family(&iso, &global, eps, opts)?,
    };
    Ok(TargetDesign {
        kind: preset.kind,
        iso,
        band,
        family,
        global_gamma: gamma,
    })
}

/// Designs a family with ratio `R` for the named target (see
/// [`design_for_target`]) and compares its stationary measures with those of
/// uniform noise `ε·base`.
pub fn run_designed_comparison(
    scenario: &Scenario,
    target: &str,
    ratio: f64,
    eps: &[f64],
    grid: &Grid2D,
    exec: Exec,
) -> Result<PairedResult> {
    let preset = scenario.target(target)?;
    let TargetDesign {
        iso, band, family, ..
    } = design_for_target(scenario, target, ratio, eps, grid)?;
    let u0 = iso.u0().clone();
    let uniform =
        NullFamilySchedule::scaled(grid, eps, |_, _| scenario.base, InvarianceMode::Reflecting)?;

    let metric = if preset.basin.is_some() {
        "mass_basin"
    } else {
        "mass_target"
    };
    let run = |schedule: &NullFamilySchedule, label: &str| -> Result<ScenarioResult> {
        let (solutions, failures) = solve(scenario, schedule, grid, exec)?;
        let band_mask = iso.band(band.band[0], band.band[1]);
        let mut rows = Vec::with_capacity(solutions.len());
        for s in &solutions {
            let a = member_field(schedule, s.eps)?;
            let mu = &s.measure;
            let mut values = BTreeMap::new();
            values.insert(
                "mass_target".into(),
                mu.mass_on(|c| u0.at(c.index) < preset.levels.boundary),
            );
            if let Some(basin) = &preset.basin {
                values.insert("mass_basin".into(), mu.mass_on(|c| basin(c.x, c.y)));
            }
            let noise = band.noise_size(&iso, a)?;
            values.insert("band_noise".into(), noise);
            values.insert("band_mass".into(), mu.mass_on(|c| band_mask[c.index]));
            values.insert("band_mass_bound".into(), band.mass_bound(noise));
            rows.push(MetricRow { eps: s.eps, values });
        }
        let mut config = echo(scenario, grid, schedule, label);
        if label == "designed" {
            config.ratio = Some(ratio);
        }
        Ok(ScenarioResult {
            config,
            solutions,
            rows,
            checks: vec![],
            failures,
        })
    };
    let uniform = run(&uniform, "uniform")?;
    let designed = run(&family.schedule, "designed")?;
    let (a, b) = (
        uniform.series(metric).unwrap_or_default(),
        designed.series(metric).unwrap_or_default(),
    );
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(
            "uniform and designed sweeps solved different members".into(),
        ));
    }
    let dominance = a
        .iter()
        .zip(&b)
        .map(|(u, d)| match preset.kind {
            TargetKind::Attractor => d >= u,
            TargetKind::Repeller => d <= u,
        })
        .collect();
    Ok(PairedResult {
        target: target.into(),
        kind: preset.kind,
        metric: metric.into(),
        uniform,
        designed,
        family,
        band,
        dominance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn left_well_is_favoured() {
        let s = Scenario::by_name("double-well", &BTreeMap::new()).unwrap();
        let g = Grid2D::square(2.0, 160).unwrap();
        let p =
            run_designed_comparison(&s, "left-well", 4.0, &[0.2, 0.1], &g, Exec::Parallel).unwrap();
        assert_eq!(p.metric, "mass_basin");
        assert!(p.dominates_everywhere(), "{:?}", p.dominance);
        let u = p.uniform.series("mass_basin").unwrap();
        assert!(u.iter().all(|m| (m - 0.5).abs() < 1e-9), "{u:?}");
        assert_eq!(p.designed.config.ratio, Some(4.0));
        assert_eq!(p.designed.config.family, "designed");
    }

    #[test]
    fn unknown_target() {
        let s = Scenario::by_name("double-well", &BTreeMap::new()).unwrap();
        let g = Grid2D::square(2.5, 40).unwrap();
        assert!(run_designed_comparison(&s, "cycle", 10.0, &[0.2], &g, Exec::Sequential).is_err());
    }
}
