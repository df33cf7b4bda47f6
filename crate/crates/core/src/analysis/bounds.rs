use serde::{Deserialize, Serialize};

use crate::dynamics::{LyapunovCertificate, VerifiedFor};
use crate::error::{Error, Result};
use crate::field::{DiffusionField, ScalarField};
use crate::measure::DiscreteMeasure;

/// Points of the ρ-mesh for `∫dt/H(t)`; trapezoid rule.
pub const RHO_MESH_POINTS: usize = 64;

/// `∫_{from}^{to} dt / H(t)` with the sampled `H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelIntegral {
    pub from: f64,
    pub to: f64,
    pub mesh: Vec<f64>,
    pub h: Vec<f64>,
    pub integral: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelBound {
    pub gamma: f64,
    pub integral: LevelIntegral,
    /// `exp(−γ∫dt/H)` for the upper bound, `exp(γ∫dt/H)` for the growth factor.
    pub value: f64,
}

/// `q_k = aⁱʲ∂ᵢU∂ⱼU` per cell.
fn level_weights(u: &ScalarField, a: &DiffusionField) -> Vec<f64> {
    (0..u.grid().len())
        .map(|k| a.at(k).quad(u.gradient_at(k)))
        .collect()
}

/// `H(t)`: the largest `q` over cells with `|U − t| ≤ half_band`, and over
/// the level set itself, located by linear interpolation along grid edges.
fn h_at(u: &ScalarField, q: &[f64], t: f64, half_band: f64) -> f64 {
    let g = u.grid();
    let uv = u.values();
    let mut h: f64 = 0.0;
    for k in 0..g.len() {
        if (uv[k] - t).abs() <= half_band {
            h = h.max(q[k]);
        }
    }
    let mut edge = |k: usize, m: usize| {
        let (lo, hi) = (uv[k].min(uv[m]), uv[k].max(uv[m]));
        if lo <= t && t <= hi && hi > lo {
            let theta = (t - uv[k]) / (uv[m] - uv[k]);
            h = h.max(q[k] + theta * (q[m] - q[k]));
        }
    };
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let k = g.index(i, j);
            if i + 1 < g.nx() {
                edge(k, g.index(i + 1, j));
            }
            if j + 1 < g.ny() {
                edge(k, g.index(i, j + 1));
            }
        }
    }
    h
}

/// `sup |A|·|∇U|² / γ` over `{from ≤ U ≤ to}`: the factor of the
/// constant-form bound that needs no level-set hypothesis.
fn fallback_factor(u: &ScalarField, a: &DiffusionField, from: f64, to: f64, gamma: f64) -> f64 {
    let mut s: f64 = 0.0;
    for k in 0..u.grid().len() {
        let x = u.at(k);
        if from <= x && x <= to {
            let gr = u.gradient_at(k);
            s = s.max(a.frobenius()[k] * (gr[0] * gr[0] + gr[1] * gr[1]));
        }
    }
    s / gamma
}

/// Trapezoid rule for `∫dt/H` on a 64-point mesh. `H` is maximized over a
/// level band one mesh cell wide, which can only shrink the integral.
pub fn level_integral(
    u: &ScalarField,
    a: &DiffusionField,
    from: f64,
    to: f64,
    gamma: f64,
) -> Result<LevelIntegral> {
    u.grid().same_as(a.grid())?;
    if !(from <= to) {
        return Err(Error::InvalidArgument(format!(
            "need from <= to (from = {from}, to = {to})"
        )));
    }
    if from == to {
        return Ok(LevelIntegral {
            from,
            to,
            mesh: vec![from],
            h: vec![],
            integral: 0.0,
        });
    }
    let q = level_weights(u, a);
    let step = (to - from) / (RHO_MESH_POINTS - 1) as f64;
    let mesh: Vec<f64> = (0..RHO_MESH_POINTS)
        .map(|j| from + j as f64 * step)
        .collect();
    let mut h = Vec::with_capacity(mesh.len());
    for &t in &mesh {
        let v = h_at(u, &q, t, 0.5 * step);
        if !(v > 0.0) {
            return Err(Error::HypothesisFail {
                rho: t,
                fallback_factor: fallback_factor(u, a, from, to, gamma),
            });
        }
        h.push(v);
    }
    let integral = h
        .windows(2)
        .map(|w| 0.5 * step * (1.0 / w[0] + 1.0 / w[1]))
        .sum();
    Ok(LevelIntegral {
        from,
        to,
        mesh,
        h,
        integral,
    })
}

fn require_operator(cert: &LyapunovCertificate) -> Result<()> {
    if cert.verified_for != VerifiedFor::OperatorFamily {
        return Err(Error::InvalidArgument(
            "level-set bounds need a certificate verified for the operator".into(),
        ));
    }
    Ok(())
}

/// Upper bound `exp(−γ∫_{ρ_m}^{ρ} dt/H)` on the stationary mass outside `{U < ρ}`.
pub fn lyapunov_upper_bound(
    cert: &LyapunovCertificate,
    a: &DiffusionField,
    rho: f64,
) -> Result<LevelBound> {
    require_operator(cert)?;
    let s = cert.spec;
    if !(rho >= s.rho_m && rho < s.rho_max) {
        return Err(Error::InvalidArgument(format!(
            "rho = {rho} outside [rho_m, rho_M) = [{}, {})",
            s.rho_m, s.rho_max
        )));
    }
    let integral = level_integral(cert.u(), a, s.rho_m, rho, s.gamma)?;
    let value = (-s.gamma * integral.integral).exp();
    Ok(LevelBound {
        gamma: s.gamma,
        integral,
        value,
    })
}

/// Growth factor `exp(γ∫_{ρ0}^{ρ} dt/H)` relating `μ(Ω_ρ \ Ω*_{ρ_m})` to
/// `μ(Ω_{ρ0} \ Ω*_{ρ_m})` under an anti-Lyapunov certificate.
pub fn anti_lyapunov_lower_bound(
    cert: &LyapunovCertificate,
    a: &DiffusionField,
    rho0: f64,
    rho: f64,
) -> Result<LevelBound> {
    require_operator(cert)?;
    let s = cert.spec;
    if !(s.rho_m <= rho0 && rho0 <= rho && rho < s.rho_max) {
        return Err(Error::InvalidArgument(format!(
            "need rho_m <= rho0 <= rho < rho_M (rho0 = {rho0}, rho = {rho})"
        )));
    }
    if s.gamma == 0.0 {
        return Ok(LevelBound {
            gamma: 0.0,
            integral: LevelIntegral {
                from: rho0,
                to: rho,
                mesh: vec![],
                h: vec![],
                integral: 0.0,
            },
            value: 1.0,
        });
    }
    let integral = level_integral(cert.u(), a, rho0, rho, s.gamma)?;
    let value = (s.gamma * integral.integral).exp();
    Ok(LevelBound {
        gamma: s.gamma,
        integral,
        value,
    })
}

/// `μ({U ≥ ρ})`, the mass outside the open sublevel set.
pub fn exterior_mass(mu: &DiscreteMeasure, u: &ScalarField, rho: f64) -> Result<f64> {
    mu.grid().same_as(u.grid())?;
    Ok(mu.mass_on(|c| u.at(c.index) >= rho))
}

/// `μ({lo < U < hi})`, i.e. `μ(Ω_hi \ Ω*_lo)`.
pub fn band_mass(mu: &DiscreteMeasure, u: &ScalarField, lo: f64, hi: f64) -> Result<f64> {
    mu.grid().same_as(u.grid())?;
    Ok(mu.mass_on(|c| {
        let x = u.at(c.index);
        lo < x && x < hi
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{verify_operator_lyapunov, CertificateSpec};
    use crate::field::{Sym2, VectorField};
    use crate::grid::Grid2D;

    fn ou_line(eps: f64) -> (ScalarField, VectorField, DiffusionField) {
        let g = Grid2D::line(-4.0, 4.0, 400).unwrap();
        (
            ScalarField::sample(&g, |x, _| x * x).unwrap(),
            VectorField::sample(&g, |x, _| [-x, 0.0]).unwrap(),
            DiffusionField::constant(&g, Sym2::new(eps / 2.0, 0.0, 0.0)).unwrap(),
        )
    }

    #[test]
    fn ou_integral_matches_closed_form() {
        // H(t) = 2εt, so ∫_{ρ_m}^{ρ} dt/H = ln(ρ/ρ_m)/(2ε)
        let eps = 0.1;
        let (u, _, a) = ou_line(eps);
        for rho in [1.2, 1.6, 2.0] {
            let li = level_integral(&u, &a, 1.0, rho, 1.0).unwrap();
            let exact = (rho / 1.0f64).ln() / (2.0 * eps);
            assert!(
                (li.integral - exact).abs() / exact < 0.01,
                "{} vs {exact}",
                li.integral
            );
        }
    }

    #[test]
    fn ou_bound_dominates_tail() {
        let eps = 0.1;
        let (u, v, a) = ou_line(eps);
        // 𝓛U = ε − 2x² ≤ −(2ρ_m − ε) outside ρ_m
        let gamma = 2.0 - eps;
        let cert =
            verify_operator_lyapunov(&u, &v, &a, CertificateSpec::lyapunov(1.0, gamma)).unwrap();
        let mu = DiscreteMeasure::from_density(u.grid(), |x, _| (-x * x / eps).exp()).unwrap();
        for rho in [1.2, 1.5, 2.0] {
            let b = lyapunov_upper_bound(&cert, &a, rho).unwrap();
            assert!(b.value >= exterior_mass(&mu, &u, rho).unwrap());
        }
        // concentration as ε shrinks at fixed ρ
        let small = ou_line(0.01);
        let cert = verify_operator_lyapunov(
            &small.0,
            &small.1,
            &small.2,
            CertificateSpec::lyapunov(1.0, 1.99),
        )
        .unwrap();
        assert!(lyapunov_upper_bound(&cert, &small.2, 2.0).unwrap().value < 1e-20);
    }

    #[test]
    fn trivial_growth_factors() {
        let g = Grid2D::square(1.0, 40).unwrap();
        let u = ScalarField::sample(&g, |x, y| x * x + y * y).unwrap();
        let v = VectorField::sample(&g, |x, y| {
            let r2 = x * x + y * y;
            [x - y - x * r2, x + y - y * r2]
        })
        .unwrap();
        let a = DiffusionField::constant(&g, Sym2::isotropic(0.1)).unwrap();
        let spec = CertificateSpec::anti(0.04, 0.3).with_rho_max(0.49);
        let cert = verify_operator_lyapunov(&u, &v, &a, spec).unwrap();
        assert_eq!(
            anti_lyapunov_lower_bound(&cert, &a, 0.1, 0.1)
                .unwrap()
                .value,
            1.0
        );
        assert!(
            anti_lyapunov_lower_bound(&cert, &a, 0.1, 0.3)
                .unwrap()
                .value
                > 1.0
        );
        let mut zero = cert.clone();
        zero.spec.gamma = 0.0;
        assert_eq!(
            anti_lyapunov_lower_bound(&zero, &a, 0.1, 0.3)
                .unwrap()
                .value,
            1.0
        );
    }

    #[test]
    fn missing_level_set_is_a_hypothesis_failure() {
        // levels above max U ≈ 2 have no cells and no crossings
        let g = Grid2D::square(1.0, 40).unwrap();
        let u = ScalarField::sample(&g, |x, y| x * x + y * y).unwrap();
        let a = DiffusionField::constant(&g, Sym2::isotropic(0.1)).unwrap();
        let err = level_integral(&u, &a, 1.5, 3.0, 0.5).unwrap_err();
        match err {
            Error::HypothesisFail {
                rho,
                fallback_factor,
            } => {
                assert!(rho > 1.9);
                assert!(fallback_factor > 0.0);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn ode_certificate_is_rejected() {
        let g = Grid2D::line(-2.0, 2.0, 50).unwrap();
        let u = ScalarField::sample(&g, |x, _| x * x).unwrap();
        let v = VectorField::sample(&g, |x, _| [-x, 0.0]).unwrap();
        let a = DiffusionField::constant(&g, Sym2::new(0.05, 0.0, 0.0)).unwrap();
        let cert =
            crate::dynamics::verify_lyapunov(&u, &v, CertificateSpec::lyapunov(0.5, 0.5)).unwrap();
        assert!(lyapunov_upper_bound(&cert, &a, 1.0).is_err());
    }
}
