use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::dictionary::TestFunctionDictionary;
use crate::error::Result;
use crate::measure::DiscreteMeasure;

/// Angular bins of the angular-marginal W1.
pub const ANGULAR_BINS: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlReport {
    /// `sup_f |∫f dμ − ∫f dν|` over the fixed dictionary; lies in `[0, 2]`.
    pub distance: f64,
    /// Label of a maximizing function.
    pub argmax: String,
    /// Exact W1 between the radial marginals.
    pub radial_w1: f64,
    /// W1 between the angular marginals on `[0, 2π)`.
    pub angular_w1: f64,
}

/// Bounded-Lipschitz functions `f` with `|f| ≤ 1` and `Lip f ≤ 1`; the test
/// dictionary enters rescaled by `max(1, ‖∇h‖∞)`.
fn lipschitz_family(
    grid: &crate::grid::Grid2D,
    dict: Option<&TestFunctionDictionary>,
) -> Vec<(String, Vec<f64>)> {
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    let sample =
        |f: &dyn Fn(f64, f64) -> f64| grid.cells().map(|c| f(c.x, c.y)).collect::<Vec<f64>>();
    let shifts = |lo: f64, hi: f64| (0..9).map(move |i| lo + (hi - lo) * i as f64 / 8.0);
    for c in shifts(grid.x_min(), grid.x_max()) {
        out.push((
            format!("clip(x-{c:.3})"),
            sample(&|x, _| (x - c).clamp(-1.0, 1.0)),
        ));
    }
    let line = grid.is_line();
    if !line {
        for c in shifts(grid.y_min(), grid.y_max()) {
            out.push((
                format!("clip(y-{c:.3})"),
                sample(&|_, y| (y - c).clamp(-1.0, 1.0)),
            ));
        }
    }
    let r_max = grid
        .x_min()
        .abs()
        .max(grid.x_max().abs())
        .hypot(grid.y_min().abs().max(grid.y_max().abs()));
    for i in 0..9 {
        let c = r_max * i as f64 / 8.0;
        out.push((
            format!("clip(r-{c:.3})"),
            sample(&|x, y| (x.hypot(y) - c).clamp(-1.0, 1.0)),
        ));
    }
    if !line {
        let m = |x: f64, y: f64| x.hypot(y).max(1.0);
        out.push(("x/max(r,1)".into(), sample(&|x, y| x / m(x, y))));
        out.push(("y/max(r,1)".into(), sample(&|x, y| y / m(x, y))));
        out.push((
            "(x2-y2)/(2max(r,1)2)".into(),
            sample(&|x, y| (x * x - y * y) / (2.0 * m(x, y).powi(2))),
        ));
        out.push((
            "xy/max(r,1)2".into(),
            sample(&|x, y| x * y / m(x, y).powi(2)),
        ));
    }
    let ys: Vec<f64> = if line {
        vec![0.0]
    } else {
        shifts(grid.y_min(), grid.y_max()).collect()
    };
    for &cy in ys.iter().step_by(2) {
        for cx in shifts(grid.x_min(), grid.x_max()).step_by(2) {
            out.push((
                format!("cone({cx:.3},{cy:.3})"),
                sample(&|x, y| (1.0 - (x - cx).hypot(y - cy)).max(0.0)),
            ));
        }
    }
    if let Some(d) = dict {
        for f in d.functions() {
            let s = f.grad_sup.max(1.0);
            out.push((
                format!("{}/{s:.3}", f.label),
                f.values().iter().map(|v| v / s).collect(),
            ));
        }
    }
    out
}

/// Bounded-Lipschitz distance over a fixed dictionary, with the radial and
/// angular marginal W1 reported alongside.
pub fn bl_distance(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    dict: Option<&TestFunctionDictionary>,
) -> Result<BlReport> {
    mu.grid().same_as(nu.grid())?;
    if let Some(d) = dict {
        d.grid().same_as(mu.grid())?;
    }
    let mut distance = 0.0;
    let mut argmax = String::new();
    for (label, f) in lipschitz_family(mu.grid(), dict) {
        let gap = (mu.integrate_values(&f) - nu.integrate_values(&f)).abs();
        if gap > distance {
            distance = gap;
            argmax = label;
        }
    }
    Ok(BlReport {
        distance: distance.min(2.0),
        argmax,
        radial_w1: radial_w1(mu, nu)?,
        angular_w1: angular_w1(mu, nu)?,
    })
}

/// Exact W1 between the laws of `|x|` under `μ` and `ν` (cell-centre radii):
/// the L1 distance of the two CDFs.
pub fn radial_w1(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    mu.grid().same_as(nu.grid())?;
    let g = mu.grid();
    let mut atoms: Vec<(f64, f64)> = g
        .cells()
        .map(|c| (c.radius(), mu.weights()[c.index] - nu.weights()[c.index]))
        .collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut w = 0.0;
    let mut cdf = 0.0;
    for pair in atoms.windows(2) {
        cdf += pair[0].1;
        w += cdf.abs() * (pair[1].0 - pair[0].0);
    }
    Ok(w)
}

/// Adds `mass` spread uniformly over the arc `[lo, hi]` (radians, any branch).
fn spread_arc(hist: &mut [f64], lo: f64, hi: f64, mass: f64) {
    let width = 2.0 * PI / hist.len() as f64;
    let span = hi - lo;
    if span <= 0.0 {
        let b = (lo.rem_euclid(2.0 * PI) / width) as usize;
        hist[b.min(hist.len() - 1)] += mass;
        return;
    }
    let start = lo.rem_euclid(2.0 * PI);
    let end = start + span;
    let first = (start / width).floor() as usize;
    let last = ((end / width).ceil() as usize).max(first + 1);
    for b in first..last {
        let overlap = (end.min((b + 1) as f64 * width) - start.max(b as f64 * width)).max(0.0);
        hist[b % hist.len()] += mass * overlap / span;
    }
}

/// Binned angular CDF. Each cell's mass is spread over the arc its square
/// subtends from the origin, the whole circle if it contains the origin.
fn angular_cdf(mu: &DiscreteMeasure) -> Vec<f64> {
    let g = mu.grid();
    let mut hist = vec![0.0; ANGULAR_BINS];
    let (hx, hy) = (0.5 * g.hx(), 0.5 * g.hy());
    for c in g.cells() {
        let w = mu.weights()[c.index];
        if w == 0.0 {
            continue;
        }
        let (x0, x1, y0, y1) = (c.x - hx, c.x + hx, c.y - hy, c.y + hy);
        if x0 <= 0.0 && 0.0 <= x1 && y0 <= 0.0 && 0.0 <= y1 {
            spread_arc(&mut hist, 0.0, 2.0 * PI, w);
            continue;
        }
        let mid = c.y.atan2(c.x);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in [(x0, y0), (x1, y0), (x0, y1), (x1, y1)] {
            let d = (y.atan2(x) - mid + PI).rem_euclid(2.0 * PI) - PI;
            lo = lo.min(mid + d);
            hi = hi.max(mid + d);
        }
        spread_arc(&mut hist, lo, hi, w);
    }
    let mut acc = 0.0;
    hist.iter()
        .map(|h| {
            acc += h;
            acc
        })
        .collect()
}

/// W1 between the angular marginals on `[0, 2π)`, binned.
pub fn angular_w1(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    mu.grid().same_as(nu.grid())?;
    let (a, b) = (angular_cdf(mu), angular_cdf(nu));
    let width = 2.0 * PI / ANGULAR_BINS as f64;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() * width)
}

/// W1 between the angular marginal of `μ` and the uniform law on `[0, 2π)`.
pub fn angular_w1_to_uniform(mu: &DiscreteMeasure) -> f64 {
    let a = angular_cdf(mu);
    let width = 2.0 * PI / ANGULAR_BINS as f64;
    let total = mu.total();
    a.iter()
        .enumerate()
        .map(|(i, x)| (x - total * (i + 1) as f64 / ANGULAR_BINS as f64).abs())
        .sum::<f64>()
        * width
}
