use serde::{Deserialize, Serialize};

use crate::doc::{DocKind, Document};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{DiffusionField, ScalarField, VectorField};
use crate::schedule::NullFamilySchedule;

/// Sign condition a certificate asserts on its check region.
///
/// Decreasing kinds require `V·∇U ≤ −γ`, increasing (`Anti`) kinds
/// `V·∇U ≥ γ`. Plain kinds check `{ρ_m < U < ρ_M}`, `Entire` kinds check
/// all of `{U < ρ_M}`. Weak kinds are normally used with `γ = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    Lyapunov,
    AntiLyapunov,
    Weak,
    WeakAnti,
    EntireWeak,
    EntireWeakAnti,
}

impl CertificateKind {
    fn increasing(self) -> bool {
        matches!(
            self,
            CertificateKind::AntiLyapunov
                | CertificateKind::WeakAnti
                | CertificateKind::EntireWeakAnti
        )
    }

    fn entire(self) -> bool {
        matches!(
            self,
            CertificateKind::EntireWeak | CertificateKind::EntireWeakAnti
        )
    }

    /// The same condition for the time-reversed field.
    pub fn reversed(self) -> Self {
        use CertificateKind::*;
        match self {
            Lyapunov => AntiLyapunov,
            AntiLyapunov => Lyapunov,
            Weak => WeakAnti,
            WeakAnti => Weak,
            EntireWeak => EntireWeakAnti,
            EntireWeakAnti => EntireWeak,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifiedFor {
    Ode,
    OperatorFamily,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateSpec {
    pub rho_m: f64,
    /// Essential upper bound `ρ_M`; `f64::MAX` when the box lies inside it.
    pub rho_max: f64,
    pub gamma: f64,
    pub kind: CertificateKind,
}

impl CertificateSpec {
    pub fn lyapunov(rho_m: f64, gamma: f64) -> Self {
        CertificateSpec {
            rho_m,
            rho_max: f64::MAX,
            gamma,
            kind: CertificateKind::Lyapunov,
        }
    }

    pub fn anti(rho_m: f64, gamma: f64) -> Self {
        CertificateSpec {
            kind: CertificateKind::AntiLyapunov,
            ..Self::lyapunov(rho_m, gamma)
        }
    }

    pub fn entire_weak() -> Self {
        CertificateSpec {
            kind: CertificateKind::EntireWeak,
            ..Self::lyapunov(0.0, 0.0)
        }
    }

    pub fn entire_weak_anti() -> Self {
        CertificateSpec {
            kind: CertificateKind::EntireWeakAnti,
            ..Self::lyapunov(0.0, 0.0)
        }
    }

    pub fn with_rho_max(self, rho_max: f64) -> Self {
        CertificateSpec { rho_max, ..self }
    }

    pub fn with_kind(self, kind: CertificateKind) -> Self {
        CertificateSpec { kind, ..self }
    }

    fn in_region(&self, u: f64) -> bool {
        u < self.rho_max && (self.kind.entire() || u > self.rho_m)
    }
}

/// Grid samples of `U` with the verified sign condition and per-cell margins.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovCertificate {
    u: ScalarField,
    pub spec: CertificateSpec,
    pub verified_for: VerifiedFor,
    /// `C` in the slack `C·(hx + hy)`.
    pub slack_constant: f64,
    pub slack: f64,
    /// Smallest margin over checked cells (`+∞` if none were checked).
    pub worst_margin: f64,
    margins: Vec<Option<f64>>,
}

/// `C = 2·max|D²U|`, the discretization constant of every sign check.
pub fn slack_constant(u: &ScalarField) -> f64 {
    2.0 * u.max_second_derivative()
}

fn check_inputs(u: &ScalarField, v: &VectorField, spec: &CertificateSpec) -> Result<()> {
    u.grid().same_as(v.grid())?;
    if let Some(k) = u.values().iter().position(|&x| x < 0.0) {
        return Err(Error::InvalidArgument(format!("U is negative at cell {k}")));
    }
    if !(spec.rho_m >= 0.0 && spec.rho_m < spec.rho_max && spec.gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= rho_m < rho_M and gamma >= 0 (rho_m = {}, rho_M = {}, gamma = {})",
            spec.rho_m, spec.rho_max, spec.gamma
        )));
    }
    Ok(())
}

/// Per-cell margins of `sign·g_k − γ` on the check region, where `g_k` is
/// `V·∇U` plus an optional second-order term.
fn margins(
    u: &ScalarField,
    v: &VectorField,
    spec: &CertificateSpec,
    second_order: Option<&[f64]>,
) -> Vec<Option<f64>> {
    let sign = if spec.kind.increasing() { 1.0 } else { -1.0 };
    Exec::Parallel.map_range(u.grid().len(), |k| {
        if !spec.in_region(u.at(k)) {
            return None;
        }
        let g = u.gradient_at(k);
        let d = v.at(k);
        let drift = d[0] * g[0] + d[1] * g[1];
        let lu = drift + second_order.map_or(0.0, |s| s[k]);
        Some(sign * lu - spec.gamma)
    })
}

fn summarize(m: &[Option<f64>], slack: f64) -> (f64, Vec<usize>) {
    let worst = m.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let bad = m
        .iter()
        .enumerate()
        .filter_map(|(k, x)| x.filter(|&x| x < -slack).map(|_| k))
        .collect();
    (worst, bad)
}

/// Checks the sign condition of `spec.kind` for the flow of `v`, allowing a
/// discretization slack `C·(hx + hy)` with `C = 2·max|D²U|`.
pub fn verify_lyapunov(
    u: &ScalarField,
    v: &VectorField,
    spec: CertificateSpec,
) -> Result<LyapunovCertificate> {
    check_inputs(u, v, &spec)?;
    let c = slack_constant(u);
    let slack = c * u.grid().spacing_sum();
    let m = margins(u, v, &spec, None);
    let (worst, bad) = summarize(&m, slack);
    if !bad.is_empty() {
        return Err(Error::Violation {
            cells: bad,
            worst_excess: -worst,
            slack,
        });
    }
    Ok(LyapunovCertificate {
        u: u.clone(),
        spec,
        verified_for: VerifiedFor::Ode,
        slack_constant: c,
        slack,
        worst_margin: worst,
        margins: m,
    })
}

/// Checks the sign condition for the single operator `aⁱʲ∂²ᵢⱼU + V·∇U`;
/// the result is marked as verified for the operator family.
pub fn verify_operator_lyapunov(
    u: &ScalarField,
    v: &VectorField,
    a: &DiffusionField,
    spec: CertificateSpec,
) -> Result<LyapunovCertificate> {
    check_inputs(u, v, &spec)?;
    a.grid().same_as(u.grid())?;
    let c = slack_constant(u);
    let slack = c * u.grid().spacing_sum();
    let second: Vec<f64> = u
        .hessian()
        .iter()
        .enumerate()
        .map(|(k, h)| a.at(k).contract(h))
        .collect();
    let m = margins(u, v, &spec, Some(&second));
    let (worst, bad) = summarize(&m, slack);
    if !bad.is_empty() {
        return Err(Error::Violation {
            cells: bad,
            worst_excess: -worst,
            slack,
        });
    }
    Ok(LyapunovCertificate {
        u: u.clone(),
        spec,
        verified_for: VerifiedFor::OperatorFamily,
        slack_constant: c,
        slack,
        worst_margin: worst,
        margins: m,
    })
}

/// Operator certificate on `{ρ_m < U < ρ_M}` with the largest rate the
/// grid supports: `γ = −max LU` for decreasing kinds, `min LU` for increasing
/// ones. The extremum runs over the region's cells and over the values
/// interpolated linearly to the levels `ρ_m`, `ρ_M` along crossing grid
/// edges, so the strip between the outermost cells and the levels is
/// covered. Fails with `CertificateFail` when that rate is not positive.
pub fn fit_operator_certificate(
    u: &ScalarField,
    v: &VectorField,
    a: &DiffusionField,
    spec: CertificateSpec,
) -> Result<LyapunovCertificate> {
    check_inputs(u, v, &spec)?;
    let g = u.grid();
    a.grid().same_as(g)?;
    let sign = if spec.kind.increasing() { 1.0 } else { -1.0 };
    let hess = u.hessian();
    let rate = |k: usize| {
        let gr = u.gradient_at(k);
        let d = v.at(k);
        sign * (d[0] * gr[0] + d[1] * gr[1] + a.at(k).contract(&hess[k]))
    };
    let mut levels = vec![spec.rho_max];
    if !spec.kind.entire() {
        levels.push(spec.rho_m);
    }
    let mut gamma = f64::INFINITY;
    for k in 0..g.len() {
        let uk = u.at(k);
        if spec.in_region(uk) {
            gamma = gamma.min(rate(k));
        }
        for m in g.neighbors(k).filter(|&m| m > k) {
            let um = u.at(m);
            for &t in &levels {
                if (uk - t) * (um - t) <= 0.0 && uk != um {
                    let theta = (t - uk) / (um - uk);
                    gamma = gamma.min((1.0 - theta) * rate(k) + theta * rate(m));
                }
            }
        }
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::CertificateFail {
            condition: "positive operator rate",
            detail: format!(
                "best rate {gamma} on levels ({}, {})",
                spec.rho_m, spec.rho_max
            ),
        });
    }
    verify_operator_lyapunov(u, v, a, CertificateSpec { gamma, ..spec })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemberVerdict {
    pub eps: f64,
    pub pass: bool,
    pub worst_margin: f64,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformVerdict {
    pub members: Vec<MemberVerdict>,
    /// Every member passes with the same `(ρ_m, γ)`.
    pub uniform: bool,
    /// First index from which every later member passes.
    pub passing_from: Option<usize>,
    pub slack: f64,
}

/// Checks `aⁱʲ∂²ᵢⱼU + V·∇U ≤ −γ` (or `≥ γ` for increasing kinds) for every
/// family member with one shared `(ρ_m, γ)`.
pub fn verify_uniform_lyapunov(
    u: &ScalarField,
    v: &VectorField,
    family: &NullFamilySchedule,
    spec: CertificateSpec,
) -> Result<UniformVerdict> {
    check_inputs(u, v, &spec)?;
    if family.is_empty() {
        return Err(Error::InvalidArgument("family is empty".into()));
    }
    let hess = u.hessian();
    let slack = slack_constant(u) * u.grid().spacing_sum();
    let mut members = Vec::with_capacity(family.len());
    for m in family.members() {
        m.field.grid().same_as(u.grid())?;
        let second: Vec<f64> = (0..hess.len())
            .map(|k| m.field.at(k).contract(&hess[k]))
            .collect();
        let mg = margins(u, v, &spec, Some(&second));
        let (worst, bad) = summarize(&mg, slack);
        members.push(MemberVerdict {
            eps: m.eps,
            pass: bad.is_empty(),
            worst_margin: worst,
            violations: bad.len(),
        });
    }
    let uniform = members.iter().all(|m| m.pass);
    let tail = members.iter().rev().take_while(|m| m.pass).count();
    let passing_from = (tail > 0).then(|| members.len() - tail);
    Ok(UniformVerdict {
        members,
        uniform,
        passing_from,
        slack,
    })
}

impl LyapunovCertificate {
    pub fn u(&self) -> &ScalarField {
        &self.u
    }

    pub fn margins(&self) -> &[Option<f64>] {
        &self.margins
    }

    /// Cells of `{U < ρ}`.
    pub fn sublevel_set(&self, rho: f64) -> Vec<bool> {
        sublevel_set(&self.u, rho)
    }

    pub fn to_document(&self) -> Document {
        let n = self.u.grid().len();
        let mut values = Vec::with_capacity(3 * n);
        for k in 0..n {
            values.push(self.u.at(k));
            values.push(self.margins[k].unwrap_or(0.0));
            values.push(if self.margins[k].is_some() { 1.0 } else { 0.0 });
        }
        Document::new(
            DocKind::Certificate,
            self.u.grid(),
            &["u", "margin", "checked"],
            values,
        )
        .with_meta(
            "spec",
            serde_json::to_value(self.spec).expect("struct serializes"),
        )
        .with_meta(
            "verified_for",
            serde_json::to_value(self.verified_for).expect("enum serializes"),
        )
        .with_meta("slack_constant", self.slack_constant)
        .with_meta("slack", self.slack)
        .with_meta(
            "worst_margin",
            serde_json::Value::from(finite_or_null(self.worst_margin)),
        )
    }

    pub fn from_document(d: &Document) -> Result<Self> {
        d.validate()?;
        if d.kind != DocKind::Certificate || d.components != ["u", "margin", "checked"] {
            return Err(Error::Document("not a certificate document".into()));
        }
        let u =
            ScalarField::from_values(&d.grid, d.values.chunks_exact(3).map(|c| c[0]).collect())?;
        let margins = d
            .values
            .chunks_exact(3)
            .map(|c| (c[2] != 0.0).then_some(c[1]))
            .collect();
        let get = |k: &str| d.meta.get(k).cloned().unwrap_or(serde_json::Value::Null);
        Ok(LyapunovCertificate {
            u,
            spec: serde_json::from_value(get("spec"))?,
            verified_for: serde_json::from_value(get("verified_for"))?,
            slack_constant: d.meta_f64("slack_constant")?,
            slack: d.meta_f64("slack")?,
            worst_margin: get("worst_margin").as_f64().unwrap_or(f64::INFINITY),
            margins,
        })
    }
}

fn finite_or_null(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Mask of `{U < ρ}`.
pub fn sublevel_set(u: &ScalarField, rho: f64) -> Vec<bool> {
    u.values().iter().map(|&x| x < rho).collect()
}
