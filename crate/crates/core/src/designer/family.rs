use serde::{Deserialize, Serialize};

use super::isolation::{IsolationData, IsolationLevels, TargetKind};
use crate::doc::{DocKind, Document};
use crate::dynamics::{verify_uniform_lyapunov, LyapunovCertificate, UniformVerdict};
use crate::error::{Error, Result};
use crate::field::{DiffusionField, ScalarField, Sym2};
use crate::schedule::{FamilyMember, InvarianceMode, NullFamilySchedule};

/// Narrowest admissible smoothstep transition, in cells.
pub const MIN_TRANSITION_CELLS: f64 = 4.0;

/// Level-band constant of the isolating function and the band on which the
/// noise size `a(α) = max|A_α|` enters the bound `exp(−C/a(α))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandConstant {
    pub kind: TargetKind,
    pub constant: f64,
    /// `[lo, hi]` levels of the band.
    pub band: [f64; 2],
    pub min_boundary_gradient: f64,
    pub max_band_gradient_sq: f64,
    pub gamma0: f64,
}

impl BandConstant {
    /// `max_band |A|` (Frobenius) for one diffusion field.
    pub fn noise_size(&self, iso: &IsolationData, a: &DiffusionField) -> Result<f64> {
        a.grid().same_as(iso.u0().grid())?;
        let band = iso.band(self.band[0], self.band[1]);
        Ok((0..band.len())
            .filter(|&k| band[k])
            .map(|k| a.frobenius()[k])
            .fold(0.0, f64::max))
    }

    /// `exp(−C / a)`.
    pub fn mass_bound(&self, noise_size: f64) -> f64 {
        (-self.constant / noise_size).exp()
    }
}

/// `C = γ₀·width·min_{U₀=ρ̃}|∇U₀| / (2·max_band|∇U₀|²)`, where the band is
/// `[ρ_*, ρ̃]` for attractors and `[ρ̃, ρ*]` for repellers and `width` is its
/// level width.
pub fn band_constant(iso: &IsolationData) -> Result<BandConstant> {
    let IsolationLevels {
        lower,
        boundary,
        upper,
    } = iso.levels;
    let band = match iso.kind {
        TargetKind::Attractor => [lower, boundary],
        TargetKind::Repeller => [boundary, upper],
    };
    let min_grad = iso.min_boundary_gradient();
    if !(min_grad > iso.grad_tolerance) {
        return Err(Error::DegenerateGradient { min_grad });
    }
    let max_sq = iso.max_band_gradient_sq(band[0], band[1]);
    Ok(BandConstant {
        kind: iso.kind,
        constant: iso.gamma0 * (band[1] - band[0]) * min_grad / (2.0 * max_sq),
        band,
        min_boundary_gradient: min_grad,
        max_band_gradient_sq: max_sq,
        gamma0: iso.gamma0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignOptions {
    /// `R = max s / min s`.
    pub ratio: f64,
    pub min_ratio: f64,
}

impl Default for DesignOptions {
    fn default() -> Self {
        DesignOptions {
            ratio: 10.0,
            min_ratio: 1.0,
        }
    }
}

/// `A_k(x) = ε_k·s(x)·I` with a shaping profile `s ∈ [1/R, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignedFamily {
    pub schedule: NullFamilySchedule,
    profile: ScalarField,
    pub target: TargetKind,
    pub levels: IsolationLevels,
    /// Level at which the strong-noise region starts (attractor) or ends (repeller).
    pub split_level: f64,
    pub ratio: f64,
    /// Strong-noise region `D`.
    pub strong: Vec<bool>,
    /// Band `D*` whose mass controls `D` through the Harnack chain.
    pub guard: Vec<bool>,
    /// Weak-noise band `D_*`.
    pub weak: Vec<bool>,
    /// `min_D s / max_{D_*} s`.
    pub ratio_condition: f64,
    /// `max|∇s|·max(hx, hy)`: change of `s` per cell, at most 1.
    pub gradient_cap: f64,
    pub transition_cells: f64,
    pub uniform: UniformVerdict,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

fn build(
    iso: &IsolationData,
    global: &LyapunovCertificate,
    eps: &[f64],
    opts: DesignOptions,
    expected: TargetKind,
) -> Result<DesignedFamily> {
    if iso.kind != expected {
        return Err(Error::InvalidIsolation(format!(
            "isolation data describes a {:?}, expected a {expected:?}",
            iso.kind
        )));
    }
    if !(opts.ratio >= opts.min_ratio && opts.ratio >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "ratio {} below the configured minimum {}",
            opts.ratio, opts.min_ratio
        )));
    }
    let u0 = iso.u0();
    let g = u0.grid();
    let IsolationLevels {
        lower,
        boundary,
        upper,
    } = iso.levels;
    let low = 1.0 / opts.ratio;
    // the transition runs over [from, to] in levels of U₀
    let (from, to, split) = match expected {
        TargetKind::Attractor => {
            let split = 0.5 * (boundary + upper);
            (boundary, split, split)
        }
        TargetKind::Repeller => {
            let split = 0.5 * (lower + boundary);
            (split, boundary, split)
        }
    };
    let h = if g.is_line() {
        g.hx()
    } else {
        g.hx().max(g.hy())
    };
    let max_grad = iso.max_band_gradient_sq(from, to).sqrt();
    let transition_cells = (to - from) / (max_grad * h);
    if opts.ratio > 1.0 && transition_cells < MIN_TRANSITION_CELLS {
        return Err(Error::RatioInfeasible {
            ratio: opts.ratio,
            band_cells: transition_cells,
            min_cells: MIN_TRANSITION_CELLS,
            min_level_width: MIN_TRANSITION_CELLS * max_grad * h,
        });
    }
    let profile: Vec<f64> = u0
        .values()
        .iter()
        .map(|&x| {
            let t = smoothstep((x - from) / (to - from));
            match expected {
                TargetKind::Attractor => low + (1.0 - low) * t,
                TargetKind::Repeller => 1.0 - (1.0 - low) * t,
            }
        })
        .collect();
    let profile = ScalarField::from_values(g, profile)?;
    let gradient_cap = profile
        .gradient()
        .iter()
        .map(|d| d[0].hypot(d[1]))
        .fold(0.0, f64::max)
        * h;
    if gradient_cap > 1.0 {
        return Err(Error::RatioInfeasible {
            ratio: opts.ratio,
            band_cells: transition_cells,
            min_cells: MIN_TRANSITION_CELLS,
            min_level_width: MIN_TRANSITION_CELLS * max_grad * h,
        });
    }
    let mask = |f: &dyn Fn(f64) -> bool| u0.values().iter().map(|&x| f(x)).collect::<Vec<bool>>();
    let (strong, guard, weak) = match expected {
        TargetKind::Attractor => (
            mask(&|x| x >= split),
            mask(&|x| boundary <= x && x <= upper),
            mask(&|x| lower <= x && x <= boundary),
        ),
        TargetKind::Repeller => (
            mask(&|x| x <= split),
            mask(&|x| lower <= x && x <= boundary),
            mask(&|x| boundary <= x && x <= upper),
        ),
    };
    let over = |m: &[bool], f: fn(f64, f64) -> f64, init: f64| {
        (0..g.len())
            .filter(|&k| m[k])
            .map(|k| profile.at(k))
            .fold(init, f)
    };
    let ratio_condition = over(&strong, f64::min, f64::INFINITY) / over(&weak, f64::max, 0.0);
    let members = eps
        .iter()
        .map(|&e| {
            Ok(FamilyMember {
                eps: e,
                field: DiffusionField::from_values(
                    g,
                    profile
                        .values()
                        .iter()
                        .map(|&s| Sym2::isotropic(e * s))
                        .collect(),
                )?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut schedule = NullFamilySchedule::new(members, InvarianceMode::Reflecting)?;
    schedule.check_normality(|_| true);
    let uniform = verify_uniform_lyapunov(global.u(), iso.v(), &schedule, global.spec)?;
    if !uniform.uniform {
        return Err(Error::InvalidSchedule(format!(
            "designed family is not uniformly Lyapunov for the global certificate (first passing member {:?})",
            uniform.passing_from
        )));
    }
    Ok(DesignedFamily {
        schedule,
        profile,
        target: expected,
        levels: iso.levels,
        split_level: split,
        ratio: opts.ratio,
        strong,
        guard,
        weak,
        ratio_condition,
        gradient_cap,
        transition_cells,
        uniform,
    })
}

/// Strong noise away from a local attractor (`s = 1` outside the split level
/// between `ρ̃` and `ρ*`), weak noise `1/R` on and inside the guarding band
/// `[ρ_*, ρ̃]`, smoothstep in between.
pub fn design_stabilizing_family(
    iso: &IsolationData,
    global: &LyapunovCertificate,
    eps: &[f64],
    opts: DesignOptions,
) -> Result<DesignedFamily> {
    build(iso, global, eps, opts, TargetKind::Attractor)
}

/// Strong noise on and near a local repeller (`s = 1` inside the split level
/// between `ρ_*` and `ρ̃`), weak noise `1/R` from `ρ̃` outward.
pub fn design_destabilizing_family(
    iso: &IsolationData,
    global: &LyapunovCertificate,
    eps: &[f64],
    opts: DesignOptions,
) -> Result<DesignedFamily> {
    build(iso, global, eps, opts, TargetKind::Repeller)
}

impl DesignedFamily {
    pub fn profile(&self) -> &ScalarField {
        &self.profile
    }

    /// The shaping profile with the schedule and design parameters in `meta`.
    pub fn to_document(&self) -> Document {
        Document::from_scalar_field(DocKind::ShapingProfile, "s", &self.profile)
            .with_meta(
                "target",
                serde_json::to_value(self.target).expect("enum serializes"),
            )
            .with_meta(
                "levels",
                serde_json::to_value(self.levels).expect("struct serializes"),
            )
            .with_meta("split_level", self.split_level)
            .with_meta("ratio", self.ratio)
            .with_meta(
                "eps",
                serde_json::to_value(self.schedule.eps()).expect("floats serialize"),
            )
            .with_meta("ratio_condition", self.ratio_condition)
            .with_meta("gradient_cap", self.gradient_cap)
            .with_meta("transition_cells", self.transition_cells)
            .with_meta(
                "invariance_mode",
                serde_json::to_value(self.schedule.invariance_mode()).expect("enum serializes"),
            )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{verify_lyapunov, CertificateSpec};
    use crate::field::VectorField;
    use crate::grid::Grid2D;

    fn hopf(x: f64, y: f64) -> [f64; 2] {
        let r2 = x * x + y * y;
        [x - y - x * r2, x + y - y * r2]
    }

    fn setup(n: usize) -> (IsolationData, LyapunovCertificate) {
        let g = Grid2D::square(2.5, n).unwrap();
        let u = ScalarField::sample(&g, |x, y| x * x + y * y).unwrap();
        let v = VectorField::sample(&g, hopf).unwrap();
        let levels = IsolationLevels {
            lower: 0.04,
            boundary: 0.25,
            upper: 0.49,
        };
        let iso = IsolationData::new(u.clone(), v.clone(), TargetKind::Repeller, levels).unwrap();
        let cert = verify_lyapunov(&u, &v, CertificateSpec::lyapunov(1.5, 0.7)).unwrap();
        (iso, cert)
    }

    #[test]
    fn repeller_constant_matches_hand_formula() {
        // |∇U₀| = 2r: min on r² = ρ̃ is 2√ρ̃, max² on the band [ρ̃, ρ*] is 4ρ*
        let (iso, _) = setup(200);
        let c = band_constant(&iso).unwrap();
        let hand = iso.gamma0 * (0.49 - 0.25) * 2.0 * 0.25f64.sqrt() / (2.0 * 4.0 * 0.49);
        assert!(
            (c.constant - hand).abs() / hand < 0.02,
            "{} vs {hand}",
            c.constant
        );
    }

    #[test]
    fn attractor_constant_vanishes_with_the_band() {
        let g = Grid2D::square(2.5, 200).unwrap();
        let u = ScalarField::sample(&g, |x, y| (x.hypot(y) - 1.0).powi(2)).unwrap();
        let v = VectorField::sample(&g, hopf).unwrap();
        let wide = IsolationLevels {
            lower: 0.01,
            boundary: 0.04,
            upper: 0.25,
        };
        let narrow = IsolationLevels {
            lower: 0.039,
            ..wide
        };
        let c_wide = band_constant(
            &IsolationData::new(u.clone(), v.clone(), TargetKind::Attractor, wide).unwrap(),
        )
        .unwrap();
        let c_narrow =
            band_constant(&IsolationData::new(u, v, TargetKind::Attractor, narrow).unwrap())
                .unwrap();
        assert!(c_wide.constant > 0.0);
        assert!(c_narrow.constant < 0.05 * c_wide.constant);
    }

    #[test]
    fn destabilizing_family_invariants() {
        let (iso, cert) = setup(200);
        let fam =
            design_destabilizing_family(&iso, &cert, &[0.2, 0.1, 0.05], DesignOptions::default())
                .unwrap();
        // per cell Λ/λ = √2 for the Frobenius norm; over the grid the profile adds R
        let nr = fam.schedule.normality_ratio().unwrap();
        assert!((nr - 10.0 * std::f64::consts::SQRT_2).abs() < 1e-9, "{nr}");
        assert!((fam.ratio_condition - 10.0).abs() < 1e-9);
        assert!(fam.gradient_cap <= 1.0);
        assert!(fam.transition_cells >= MIN_TRANSITION_CELLS);
        let s = fam.profile();
        assert!((s.max() - 1.0).abs() < 1e-12 && (s.min() - 0.1).abs() < 1e-12);
        let origin = s.grid().locate(0.0, 0.0).unwrap();
        assert_eq!(s.at(origin), 1.0);
        assert!(fam.strong[origin] && !fam.weak[origin]);
    }

    #[test]
    fn unit_ratio_is_isotropic() {
        let (iso, cert) = setup(60);
        let opts = DesignOptions {
            ratio: 1.0,
            min_ratio: 1.0,
        };
        let fam = design_destabilizing_family(&iso, &cert, &[0.2, 0.1], opts).unwrap();
        assert!(fam.profile().values().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn narrow_transition_is_infeasible() {
        let g = Grid2D::square(2.5, 40).unwrap();
        let u = ScalarField::sample(&g, |x, y| x * x + y * y).unwrap();
        let v = VectorField::sample(&g, hopf).unwrap();
        let levels = IsolationLevels {
            lower: 0.04,
            boundary: 0.25,
            upper: 0.49,
        };
        let iso = IsolationData::new(u.clone(), v.clone(), TargetKind::Repeller, levels).unwrap();
        let cert = verify_lyapunov(&u, &v, CertificateSpec::lyapunov(1.5, 0.7)).unwrap();
        let r = design_destabilizing_family(&iso, &cert, &[0.1], DesignOptions::default());
        assert!(matches!(r, Err(Error::RatioInfeasible { .. })));
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        let (iso, cert) = setup(60);
        assert!(design_stabilizing_family(&iso, &cert, &[0.1], DesignOptions::default()).is_err());
    }
}
