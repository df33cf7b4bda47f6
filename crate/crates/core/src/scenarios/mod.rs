//! Scenario library: drift, base diffusion, reference data and default
//! certificate for each named system, plus the sweeps that run them.

mod boundary;
mod cross;
mod designed;
mod gibbs;
mod hopf;
mod result;

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::designer::{IsolationLevels, TargetKind};
use crate::error::{Error, Result};
use crate::field::{Drift, Sym2};
use crate::grid::{Grid2D, GridSpec};
use crate::measure::DiscreteMeasure;

pub use boundary::{run_boundary_comparison, taper_profile, BoundaryComparison, TAPER_FLOOR};
pub use cross::{run_cross_oracle, CrossOracleRow};
pub use designed::{design_for_target, run_designed_comparison, PairedResult, TargetDesign};
pub use gibbs::run_gibbs;
pub use hopf::{boundary_level, run_hopf_sweep, HopfLevels};
pub use result::{Check, MetricRow, RunConfigEcho, ScenarioResult};

type Fn2<T> = Arc<dyn Fn(f64, f64) -> T + Send + Sync>;

/// Descriptor of the vanishing-noise limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferenceMeasure {
    PointMass {
        x: f64,
        y: f64,
    },
    /// Uniform law on the circle of this radius about the origin.
    CircleHaar {
        radius: f64,
    },
    /// The scenario's analytic density at the same `ε`.
    Analytic,
}

/// Isolating data for a designed-noise target in a scenario.
#[derive(Clone)]
pub struct TargetPreset {
    pub kind: TargetKind,
    pub u0: Fn2<f64>,
    pub levels: IsolationLevels,
    /// Basin of the chosen target, when the scenario has a natural one.
    pub basin: Option<Fn2<bool>>,
    /// `ρ_m` of the global certificate every designed member must satisfy.
    pub global_rho_m: f64,
}

/// A named drift with its base diffusion `A = ε·base`, reference limit,
/// default truncation and default certificate `U`.
#[derive(Clone)]
pub struct Scenario {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    drift: Fn2<[f64; 2]>,
    pub base: Sym2,
    /// `Φ` with `V = −∇Φ` and `base = cI`; the density is `∝ exp(−Φ/(cε))`.
    potential: Option<Fn2<f64>>,
    pub reference: ReferenceMeasure,
    pub grid: GridSpec,
    certificate: Fn2<f64>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("base", &self.base)
            .field("reference", &self.reference)
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

impl Drift for Scenario {
    fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        (self.drift)(x, y)
    }
}

pub const SCENARIOS: &[&str] = &["ou", "gibbs-quadratic", "double-well", "hopf"];

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn square(half: f64, n: usize) -> GridSpec {
    GridSpec {
        x_min: -half,
        x_max: half,
        y_min: -half,
        y_max: half,
        nx: n,
        ny: n,
    }
}

impl Scenario {
    /// Looks up a scenario by name. Unknown parameter keys are rejected.
    ///
    /// * `ou`: 1D, `V = −x`, `A = ε/2`, on `[−4, 4]` with 400 cells.
    /// * `gibbs-quadratic`: `Φ = (x² + y²)/2`, `A = εI`.
    /// * `double-well`: `Φ = (x² − 1)²/4 + y²/2`, `A = εI`.
    /// * `hopf`: `V = (bx − y − xr², x + by − yr²)`, `A = ε·diag(1, anisotropy)`.
    pub fn by_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Scenario> {
        let allowed: &[&str] = match name {
            "hopf" => &["b", "anisotropy"],
            "ou" | "gibbs-quadratic" | "double-well" => &[],
            _ => return Err(Error::UnknownScenario(name.into())),
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidArgument(format!(
                "scenario {name} has no parameter {k}"
            )));
        }
        let s = match name {
            "ou" => Scenario {
                name: name.into(),
                params: BTreeMap::new(),
                drift: Arc::new(|x, _| [-x, 0.0]),
                base: Sym2::isotropic(0.5),
                potential: Some(Arc::new(|x, _| 0.5 * x * x)),
                reference: ReferenceMeasure::Analytic,
                grid: GridSpec {
                    x_min: -4.0,
                    x_max: 4.0,
                    y_min: -0.5,
                    y_max: 0.5,
                    nx: 400,
                    ny: 1,
                },
                certificate: Arc::new(|x, _| x * x),
            },
            "gibbs-quadratic" => Scenario {
                name: name.into(),
                params: BTreeMap::new(),
                drift: Arc::new(|x, y| [-x, -y]),
                base: Sym2::isotropic(1.0),
                potential: Some(Arc::new(|x, y| 0.5 * (x * x + y * y))),
                reference: ReferenceMeasure::Analytic,
                grid: square(2.5, 200),
                certificate: Arc::new(|x, y| x * x + y * y),
            },
            "double-well" => Scenario {
                name: name.into(),
                params: BTreeMap::new(),
                drift: Arc::new(|x, y| [-x * (x * x - 1.0), -y]),
                base: Sym2::isotropic(1.0),
                potential: Some(Arc::new(double_well)),
                reference: ReferenceMeasure::Analytic,
                grid: square(2.5, 200),
                certificate: Arc::new(double_well),
            },
            _ => {
                let b = param(params, "b", 1.0);
                let an = param(params, "anisotropy", 1.0);
                if !(b.is_finite() && b <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "hopf needs b <= 1 to fit the default box, got {b}"
                    )));
                }
                if !(an > 0.0 && an <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "hopf anisotropy must lie in (0, 1], got {an}"
                    )));
                }
                Scenario {
                    name: name.into(),
                    params: BTreeMap::from([("b".into(), b), ("anisotropy".into(), an)]),
                    drift: Arc::new(move |x, y| {
                        let r2 = x * x + y * y;
                        [b * x - y - x * r2, x + b * y - y * r2]
                    }),
                    base: Sym2 {
                        a11: 1.0,
                        a12: 0.0,
                        a22: an,
                    },
                    potential: None,
                    reference: if b > 0.0 {
                        ReferenceMeasure::CircleHaar { radius: b.sqrt() }
                    } else {
                        ReferenceMeasure::PointMass { x: 0.0, y: 0.0 }
                    },
                    grid: square(2.5, 200),
                    certificate: Arc::new(|x, y| x * x + y * y),
                }
            }
        };
        s.validate()?;
        Ok(s)
    }

    /// Reference data agree with the drift: a circle-haar radius squares to
    /// `b`, a point mass sits at `b ≤ 0`, and analytic references have a potential.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match (&self.reference, self.name.as_str()) {
            (ReferenceMeasure::CircleHaar { radius }, "hopf") => {
                let b = param(&self.params, "b", f64::NAN);
                if (radius * radius - b).abs() > 1e-12 * b.abs().max(1.0) {
                    return bad(format!("circle radius {radius} does not square to b = {b}"));
                }
            }
            (ReferenceMeasure::PointMass { .. }, "hopf") => {
                if param(&self.params, "b", f64::NAN) > 0.0 {
                    return bad("point-mass reference with b > 0".into());
                }
            }
            (ReferenceMeasure::Analytic, _) if self.potential.is_some() => {}
            (r, n) => return bad(format!("reference {r:?} inconsistent with scenario {n}")),
        }
        Grid2D::try_from(self.grid.clone())?;
        Ok(())
    }

    pub fn default_grid(&self) -> Result<Grid2D> {
        Grid2D::try_from(self.grid.clone())
    }

    pub fn b(&self) -> Option<f64> {
        self.params.get("b").copied()
    }

    /// Base diffusion at `ε`.
    pub fn diffusion(&self, eps: f64) -> Sym2 {
        self.base.scaled(eps)
    }

    pub fn certificate(&self, x: f64, y: f64) -> f64 {
        (self.certificate)(x, y)
    }

    pub fn has_analytic_density(&self) -> bool {
        self.potential.is_some()
    }

    /// `exp(−Φ/(cε))` normalized on the grid.
    pub fn analytic_measure(&self, grid: &Grid2D, eps: f64) -> Result<Option<DiscreteMeasure>> {
        let Some(phi) = &self.potential else {
            return Ok(None);
        };
        let t = self.base.a11 * eps;
        // shift by the grid minimum so the exponentials stay representable
        let min = grid
            .cells()
            .map(|c| phi(c.x, c.y))
            .fold(f64::INFINITY, f64::min);
        DiscreteMeasure::from_density(grid, |x, y| (-(phi(x, y) - min) / t).exp()).map(Some)
    }

    /// The reference limit discretized on `grid`; analytic references use `ε`.
    pub fn reference_measure(&self, grid: &Grid2D, eps: f64) -> Result<DiscreteMeasure> {
        match self.reference {
            ReferenceMeasure::Analytic => Ok(self.analytic_measure(grid, eps)?.expect("validated")),
            ReferenceMeasure::PointMass { x, y } => {
                // a point on cell corners is shared by the touching cells
                let d = 1e-9;
                points_measure(
                    grid,
                    [
                        [x - d, y - d],
                        [x + d, y - d],
                        [x - d, y + d],
                        [x + d, y + d],
                    ]
                    .iter()
                    .copied(),
                )
            }
            ReferenceMeasure::CircleHaar { radius } => {
                const SAMPLES: usize = 1 << 14;
                points_measure(
                    grid,
                    (0..SAMPLES).map(|k| {
                        let th = TAU * (k as f64 + 0.5) / SAMPLES as f64;
                        [radius * th.cos(), radius * th.sin()]
                    }),
                )
            }
        }
    }

    /// Names accepted by [`Scenario::target`].
    pub fn target_names(&self) -> &'static [&'static str] {
        match self.name.as_str() {
            "double-well" => &["left-well"],
            "hopf" if self.b().unwrap_or(0.0) > 0.0 => &["cycle", "origin"],
            _ => &[],
        }
    }

    /// Isolating data for the named designed-noise targets of this scenario.
    ///
    /// * `double-well`, `left-well`: attractor at `(−1, 0)`, `U₀ = (x + 1)² + y²`.
    /// * `hopf`, `cycle`: attractor `r = √b`, `U₀ = (r − √b)²`.
    /// * `hopf`, `origin`: repeller at the origin, `U₀ = r²` (needs `b > 0`).
    pub fn target(&self, name: &str) -> Result<TargetPreset> {
        let unknown =
            || Error::InvalidArgument(format!("scenario {} has no target {name}", self.name));
        match (self.name.as_str(), name) {
            ("double-well", "left-well") => Ok(TargetPreset {
                kind: TargetKind::Attractor,
                u0: Arc::new(|x, y| (x + 1.0).powi(2) + y * y),
                levels: IsolationLevels {
                    lower: 0.09,
                    boundary: 0.25,
                    upper: 0.64,
                },
                basin: Some(Arc::new(|x, _| x < 0.0)),
                global_rho_m: 0.5,
            }),
            ("hopf", "cycle") | ("hopf", "origin") if self.b().unwrap_or(0.0) > 0.0 => {
                let b = self.b().expect("hopf has b");
                let rb = b.sqrt();
                if name == "cycle" {
                    Ok(TargetPreset {
                        kind: TargetKind::Attractor,
                        u0: Arc::new(move |x, y| (x.hypot(y) - rb).powi(2)),
                        levels: IsolationLevels {
                            lower: 0.01 * b,
                            boundary: 0.04 * b,
                            upper: 0.25 * b,
                        },
                        basin: None,
                        global_rho_m: 1.5,
                    })
                } else {
                    Ok(TargetPreset {
                        kind: TargetKind::Repeller,
                        u0: Arc::new(|x, y| x * x + y * y),
                        levels: IsolationLevels {
                            lower: 0.04 * b,
                            boundary: 0.25 * b,
                            upper: 0.49 * b,
                        },
                        basin: None,
                        global_rho_m: 1.5,
                    })
                }
            }
            _ => Err(unknown()),
        }
    }
}

fn double_well(x: f64, y: f64) -> f64 {
    0.25 * (x * x - 1.0).powi(2) + 0.5 * y * y
}

fn points_measure(grid: &Grid2D, pts: impl Iterator<Item = [f64; 2]>) -> Result<DiscreteMeasure> {
    let mut w = vec![0.0; grid.len()];
    for p in pts {
        let k = grid.locate(p[0], p[1]).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "reference point ({}, {}) outside the grid",
                p[0], p[1]
            ))
        })?;
        w[k] += 1.0;
    }
    DiscreteMeasure::from_unnormalized(grid, w)
}

/// Trend predicates shared by the sweeps.
pub fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

pub fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}
