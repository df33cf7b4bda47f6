//! Euler–Maruyama sampling of `dx = V dt + G dW` with `G Gᵀ = 2A`, used as an
//! independent Monte-Carlo estimate of the stationary measure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{DiffusionField, Drift, Sym2};
use crate::grid::Grid2D;
use crate::linalg::cholesky2;
use crate::measure::DiscreteMeasure;

/// Steps jumping more than two cells, as a fraction, beyond which a run is rejected.
pub const MAX_LARGE_JUMP_FRACTION: f64 = 0.05;
const BOOTSTRAP_RESAMPLES: usize = 32;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    #[default]
    Reflect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub dt: f64,
    pub t_burn: f64,
    pub t_total: f64,
    pub n_paths: usize,
    pub rng_seed: u64,
    #[serde(default)]
    pub boundary_policy: BoundaryPolicy,
    /// Starting point of every path; the box centre when absent.
    #[serde(default)]
    pub start: Option<[f64; 2]>,
}

impl SamplerConfig {
    /// Burn-in defaults to 20% of the horizon.
    pub fn new(dt: f64, t_total: f64, n_paths: usize, rng_seed: u64) -> Self {
        SamplerConfig {
            dt,
            t_burn: 0.2 * t_total,
            t_total,
            n_paths,
            rng_seed,
            boundary_policy: BoundaryPolicy::Reflect,
            start: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidArgument("sampler.dt must be positive".into()));
        }
        if !(self.t_burn >= 0.0 && self.t_burn < self.t_total) {
            return Err(Error::InvalidArgument(
                "sampler.t_burn must lie in [0, t_total)".into(),
            ));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument(
                "sampler.n_paths must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplerDiagnostics {
    pub steps_per_path: usize,
    pub recorded_per_path: usize,
    /// Fraction of steps moving more than two cells in some direction.
    pub large_jump_fraction: f64,
    /// Fraction of steps with `|V| dt` below one cell.
    pub drift_resolved_fraction: f64,
    pub reflections: u64,
    /// Mean L1 distance between path-bootstrap resamples and the pooled histogram.
    pub bootstrap_l1: f64,
}

/// Lower-triangular `G` with `G Gᵀ / 2 = A`.
pub fn noise_factor(a: Sym2) -> Result<[[f64; 2]; 2]> {
    cholesky2(a.scaled(2.0)).ok_or(Error::NotSpd {
        cell: 0,
        min_eig: a.min_eigenvalue(),
    })
}

fn reflect(mut x: f64, lo: f64, hi: f64) -> (f64, u64) {
    let mut n = 0;
    while x < lo || x > hi {
        x = if x < lo { 2.0 * lo - x } else { 2.0 * hi - x };
        n += 1;
    }
    (x, n)
}

struct PathStats {
    hist: Vec<u64>,
    large: u64,
    resolved: u64,
    reflections: u64,
}

/// Pooled post-burn-in occupation histogram of `cfg.n_paths` reflected
/// Euler–Maruyama paths. Path `p` draws from the ChaCha stream
/// `(rng_seed, p)`, and histograms are merged in path order, so the result
/// is independent of the execution mode.
pub fn occupation_measure(
    v: &dyn Drift,
    a: &DiffusionField,
    grid: &Grid2D,
    cfg: &SamplerConfig,
    exec: Exec,
) -> Result<(DiscreteMeasure, SamplerDiagnostics)> {
    cfg.validate()?;
    a.grid().same_as(grid)?;
    let factors = a
        .values()
        .iter()
        .enumerate()
        .map(|(k, m)| {
            if grid.is_line() {
                Ok([[(2.0 * m.a11).sqrt(), 0.0], [0.0, 0.0]])
            } else {
                noise_factor(*m).map_err(|_| Error::NotSpd {
                    cell: k,
                    min_eig: m.min_eigenvalue(),
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let steps = (cfg.t_total / cfg.dt).round() as usize;
    let burn = (cfg.t_burn / cfg.dt).round() as usize;
    let (hx, hy) = (grid.hx(), grid.hy());
    let line = grid.is_line();
    let cell = if line { hx } else { hx.min(hy) };
    let sq = cfg.dt.sqrt();
    let start = cfg.start.unwrap_or([
        0.5 * (grid.x_min() + grid.x_max()),
        if line {
            0.0
        } else {
            0.5 * (grid.y_min() + grid.y_max())
        },
    ]);

    let paths: Vec<Result<PathStats>> = exec.map_range(cfg.n_paths, |p| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(p as u64);
        let mut st = PathStats {
            hist: vec![0; grid.len()],
            large: 0,
            resolved: 0,
            reflections: 0,
        };
        let [mut x, mut y] = start;
        for s in 0..steps {
            let k = grid.locate(x, y).expect("reflected state stays in the box");
            let d = v.eval(x, y);
            let g = factors[k];
            let xi0: f64 = rng.sample(StandardNormal);
            let (dx, dy) = if line {
                (d[0] * cfg.dt + g[0][0] * sq * xi0, 0.0)
            } else {
                let xi1: f64 = rng.sample(StandardNormal);
                (
                    d[0] * cfg.dt + g[0][0] * sq * xi0,
                    d[1] * cfg.dt + sq * (g[1][0] * xi0 + g[1][1] * xi1),
                )
            };
            if dx.abs() > 2.0 * hx || (!line && dy.abs() > 2.0 * hy) {
                st.large += 1;
            }
            if d[0].hypot(if line { 0.0 } else { d[1] }) * cfg.dt < cell {
                st.resolved += 1;
            }
            let (nx, rx) = reflect(x + dx, grid.x_min(), grid.x_max());
            let (ny, ry) = if line {
                (0.0, 0)
            } else {
                reflect(y + dy, grid.y_min(), grid.y_max())
            };
            if !(nx.is_finite() && ny.is_finite()) {
                return Err(Error::NonFiniteState {
                    t: (s + 1) as f64 * cfg.dt,
                });
            }
            st.reflections += rx + ry;
            x = nx;
            y = ny;
            if s >= burn {
                st.hist[grid.locate(x, y).expect("reflected state stays in the box")] += 1;
            }
        }
        Ok(st)
    });
    let paths = paths.into_iter().collect::<Result<Vec<_>>>()?;

    let total_steps = (steps * cfg.n_paths).max(1) as f64;
    let large = paths.iter().map(|p| p.large).sum::<u64>() as f64 / total_steps;
    if large > MAX_LARGE_JUMP_FRACTION {
        return Err(Error::Underresolved { fraction: large });
    }
    let mut counts = vec![0u64; grid.len()];
    for p in &paths {
        for (c, h) in counts.iter_mut().zip(&p.hist) {
            *c += h;
        }
    }
    let mu = from_counts(grid, &counts)?;
    let diag = SamplerDiagnostics {
        steps_per_path: steps,
        recorded_per_path: steps.saturating_sub(burn),
        large_jump_fraction: large,
        drift_resolved_fraction: paths.iter().map(|p| p.resolved).sum::<u64>() as f64 / total_steps,
        reflections: paths.iter().map(|p| p.reflections).sum(),
        bootstrap_l1: bootstrap_l1(grid, &paths, &mu, cfg.rng_seed)?,
    };
    Ok((mu, diag))
}

fn from_counts(grid: &Grid2D, counts: &[u64]) -> Result<DiscreteMeasure> {
    DiscreteMeasure::from_unnormalized(grid, counts.iter().map(|&c| c as f64).collect())
}

/// Path-block bootstrap: resample whole paths with replacement.
fn bootstrap_l1(
    grid: &Grid2D,
    paths: &[PathStats],
    pooled: &DiscreteMeasure,
    seed: u64,
) -> Result<f64> {
    if paths.len() < 2 {
        return Ok(f64::NAN);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b007);
    let mut acc = 0.0;
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let mut counts = vec![0u64; grid.len()];
        for _ in 0..paths.len() {
            let p = &paths[rng.random_range(0..paths.len())];
            for (c, h) in counts.iter_mut().zip(&p.hist) {
                *c += h;
            }
        }
        acc += from_counts(grid, &counts)?.l1_distance(pooled)?;
    }
    Ok(acc / BOOTSTRAP_RESAMPLES as f64)
}
