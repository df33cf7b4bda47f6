use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::measure::DiscreteMeasure;
use crate::schedule::NullFamilySchedule;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumMember {
    pub eps: f64,
    /// `μ_ε({U < ρ0})`.
    pub mass: f64,
    pub below_template: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumVerdict {
    /// Smallest eigenvalue of `D²U` on `{U < ρ̄}`.
    pub lambda_u: f64,
    /// `max |∇U|²/U` on `{U < ρ̄}`.
    pub gradient_ratio: f64,
    /// `inf_α inf λ_α / sup Λ_α` on `{U < ρ̄}`.
    pub normality: f64,
    /// Decay exponent `C = λ_U / C₂ · normality`.
    pub constant: f64,
    pub rho0: f64,
    pub rho_bar: f64,
    /// `(ρ0/ρ̄)^C`.
    pub template: f64,
    pub members: Vec<EquilibriumMember>,
    /// Masses strictly decrease along the schedule.
    pub decreasing: bool,
    pub pass: bool,
}

fn fail(condition: &'static str, detail: String) -> Error {
    Error::CertificateFail { condition, detail }
}

/// Checks that `U` certifies `x0` as a strongly repelling equilibrium on
/// `W = {U < ρ̄}` (convex, minimal and zero at `x0`, strictly increasing along
/// the flow elsewhere) and compares each `μ_ε({U < ρ0})` with `(ρ0/ρ̄)^C`.
pub fn verify_repelling_equilibrium(
    x0: [f64; 2],
    v: &VectorField,
    u: &ScalarField,
    family: &NullFamilySchedule,
    measures: &[&DiscreteMeasure],
    rho0: f64,
    rho_bar: f64,
) -> Result<EquilibriumVerdict> {
    let g = u.grid();
    g.same_as(v.grid())?;
    if measures.len() != family.len() {
        return Err(Error::InvalidArgument(format!(
            "{} measures for {} family members",
            measures.len(),
            family.len()
        )));
    }
    if !(0.0 < rho0 && rho0 < rho_bar) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < rho0 < rho_bar (got {rho0}, {rho_bar})"
        )));
    }
    let k0 = g
        .locate(x0[0], x0[1])
        .ok_or_else(|| Error::InvalidArgument("equilibrium lies outside the grid".into()))?;
    let (i0, j0) = g.coords(k0);
    let near = |k: usize| {
        let (i, j) = g.coords(k);
        i.abs_diff(i0) <= 1 && j.abs_diff(j0) <= 1
    };
    let w: Vec<usize> = (0..g.len()).filter(|&k| u.at(k) < rho_bar).collect();
    if w.iter().any(|&k| g.is_boundary(k)) {
        return Err(Error::InvalidArgument(
            "the sublevel set reaches the truncation boundary".into(),
        ));
    }
    let curvature = u.max_second_derivative();
    let spacing = g.spacing_sum();

    let mut lambda_u = f64::INFINITY;
    for &k in &w {
        let l = u.hessian_at(k).min_eigenvalue();
        if !(l > 0.0) {
            return Err(fail(
                "P1",
                format!("D²U is not positive definite at cell {k} (eigenvalue {l:e})"),
            ));
        }
        lambda_u = lambda_u.min(l);
    }
    let gr0 = u.gradient_at(k0);
    if u.at(k0) > curvature * spacing * spacing || gr0[0].hypot(gr0[1]) > curvature * spacing {
        return Err(fail(
            "P2",
            format!("U or ∇U does not vanish at the equilibrium cell {k0}"),
        ));
    }
    let floor = u.at(k0) - 1e-12 * (1.0 + u.at(k0).abs());
    if let Some(&k) = w.iter().find(|&&k| u.at(k) < floor) {
        return Err(fail(
            "P2",
            format!("U is smaller at cell {k} than at the equilibrium"),
        ));
    }
    let mut gradient_ratio: f64 = 0.0;
    for &k in &w {
        let gr = u.gradient_at(k);
        if !near(k) {
            let d = v.at(k);
            let lie = d[0] * gr[0] + d[1] * gr[1];
            if !(lie > 0.0) {
                return Err(fail(
                    "P3",
                    format!("V·∇U = {lie:e} is not positive at cell {k}"),
                ));
            }
        }
        if u.at(k) > 0.0 {
            gradient_ratio = gradient_ratio.max((gr[0] * gr[0] + gr[1] * gr[1]) / u.at(k));
        }
    }

    let mut normality = f64::INFINITY;
    for m in family.members() {
        m.field.grid().same_as(g)?;
        let lo = w
            .iter()
            .map(|&k| m.field.min_eig()[k])
            .fold(f64::INFINITY, f64::min);
        let hi = w
            .iter()
            .map(|&k| m.field.frobenius()[k])
            .fold(0.0, f64::max);
        normality = normality.min(lo / hi);
    }
    let constant = lambda_u / gradient_ratio * normality;
    let template = (rho0 / rho_bar).powf(constant);
    let mut members = Vec::with_capacity(measures.len());
    for (m, mu) in family.members().iter().zip(measures) {
        mu.grid().same_as(g)?;
        let mass = mu.mass_on(|c| u.at(c.index) < rho0);
        members.push(EquilibriumMember {
            eps: m.eps,
            mass,
            below_template: mass <= template,
        });
    }
    let decreasing = members.windows(2).all(|p| p[1].mass < p[0].mass);
    let pass = members.iter().all(|m| m.below_template);
    Ok(EquilibriumVerdict {
        lambda_u,
        gradient_ratio,
        normality,
        constant,
        rho0,
        rho_bar,
        template,
        members,
        decreasing,
        pass,
    })
}
