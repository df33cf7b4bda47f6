use serde::{Deserialize, Serialize};

use super::flow::{rk4_step, steps_for};
use crate::doc::{DocKind, Document};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::Drift;
use crate::grid::{Cell, Grid2D};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttractorKind {
    GlobalAttractor,
    LocalAttractor,
    LocalRepeller,
}

/// Isolating neighbourhood `{U₀ < level}` described by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolatingNeighborhood {
    pub function: String,
    pub level: f64,
}

#[derive(Clone, Debug)]
pub struct EnsembleConfig {
    /// Requested number of initial points, laid out on a regular lattice.
    pub ensemble_size: usize,
    pub t_end: f64,
    pub dt: f64,
    /// Integrate `−V` to find repellers.
    pub time_reversed: bool,
    pub exec: Exec,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            ensemble_size: 1024,
            t_end: 40.0,
            dt: 0.01,
            time_reversed: false,
            exec: Exec::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttractorApprox {
    grid: Grid2D,
    flagged: Vec<bool>,
    pub kind: AttractorKind,
    pub isolation: Option<IsolatingNeighborhood>,
    /// Ensemble diameter at the final time.
    pub diameter: f64,
    /// `|Δ diameter|` over the last 20% of time.
    pub diameter_change: f64,
    pub escaped: usize,
    pub tracked: usize,
}

/// Ensemble estimate of the ω-limit set (or α-limit set under time reversal)
/// of initial points drawn from the grid interior inside `region`.
///
/// The flagged set is the set of cells holding terminal points, dilated by
/// one cell in every direction. Points that leave the box are dropped.
pub fn approximate_attractor(
    v: &dyn Drift,
    grid: &Grid2D,
    cfg: &EnsembleConfig,
    region: Option<&(dyn Fn(&Cell) -> bool + Sync)>,
    isolation: Option<IsolatingNeighborhood>,
) -> Result<AttractorApprox> {
    if cfg.ensemble_size == 0 || !(cfg.t_end > 0.0) || !(cfg.dt > 0.0) {
        return Err(Error::InvalidArgument(
            "ensemble_size, t_end and dt must be positive".into(),
        ));
    }
    let starts = lattice(grid, cfg.ensemble_size, region);
    if starts.is_empty() {
        return Err(Error::InvalidArgument(
            "no initial point lies in the region".into(),
        ));
    }
    let sign = if cfg.time_reversed { -1.0 } else { 1.0 };
    let (n, h) = steps_for(cfg.t_end, cfg.dt);
    let mark = n - n / 5;
    // per path: states at 80% of the time and at the end; None once it leaves the box
    let paths: Vec<Result<Option<([f64; 2], [f64; 2])>>> = cfg.exec.map(&starts, |&x0| {
        let mut x = x0;
        let mut at_mark = x0;
        for s in 1..=n {
            x = rk4_step(v, x, h, sign);
            if !(x[0].is_finite() && x[1].is_finite()) {
                return Err(Error::NonFiniteState {
                    t: sign * s as f64 * h,
                });
            }
            if !grid.contains(x[0], x[1]) {
                return Ok(None);
            }
            if s == mark {
                at_mark = x;
            }
        }
        Ok(Some((at_mark, x)))
    });
    let mut mid = Vec::new();
    let mut end = Vec::new();
    for p in paths {
        if let Some((a, b)) = p? {
            mid.push(a);
            end.push(b);
        }
    }
    if end.is_empty() {
        return Err(Error::InvalidArgument(
            "every ensemble point left the truncation box".into(),
        ));
    }
    let d_mid = diameter(&mid);
    let d_end = diameter(&end);
    let change = (d_end - d_mid).abs();
    let floor = grid.hx().min(if grid.is_line() {
        f64::INFINITY
    } else {
        grid.hy()
    });
    if change > (0.1 * d_end).max(floor) {
        return Err(Error::NotSettled {
            relative_change: change / d_end.max(floor),
        });
    }

    let mut flagged = vec![false; grid.len()];
    for p in &end {
        if let Some(k) = grid.locate(p[0], p[1]) {
            let (i, j) = grid.coords(k);
            let jr = if grid.is_line() {
                0..=0
            } else {
                j.saturating_sub(1)..=(j + 1).min(grid.ny() - 1)
            };
            for jj in jr {
                for ii in i.saturating_sub(1)..=(i + 1).min(grid.nx() - 1) {
                    flagged[grid.index(ii, jj)] = true;
                }
            }
        }
    }
    let kind = match (cfg.time_reversed, region.is_some()) {
        (true, _) => AttractorKind::LocalRepeller,
        (false, true) => AttractorKind::LocalAttractor,
        (false, false) => AttractorKind::GlobalAttractor,
    };
    Ok(AttractorApprox {
        grid: grid.clone(),
        flagged,
        kind,
        isolation,
        diameter: d_end,
        diameter_change: change,
        escaped: starts.len() - end.len(),
        tracked: end.len(),
    })
}

/// Roughly `size` points on a regular lattice of interior cell centres.
fn lattice(
    grid: &Grid2D,
    size: usize,
    region: Option<&(dyn Fn(&Cell) -> bool + Sync)>,
) -> Vec<[f64; 2]> {
    let (ni, nj) = if grid.is_line() {
        (size.min(grid.nx() - 2), 1)
    } else {
        let side = ((size as f64).sqrt().ceil() as usize).max(1);
        (side.min(grid.nx() - 2), side.min(grid.ny() - 2))
    };
    let pick = |m: usize, n: usize, s: usize| 1 + (s * (n - 2)) / m + (n - 2) / (2 * m);
    let mut out = Vec::new();
    for b in 0..nj {
        for a in 0..ni {
            let i = pick(ni, grid.nx(), a);
            let j = if grid.is_line() {
                0
            } else {
                pick(nj, grid.ny(), b)
            };
            let c = grid.cell(grid.index(i, j));
            if region.is_none_or(|r| r(&c)) {
                out.push([c.x, c.y]);
            }
        }
    }
    out
}

fn diameter(pts: &[[f64; 2]]) -> f64 {
    let mut d: f64 = 0.0;
    for (a, p) in pts.iter().enumerate() {
        for q in &pts[a + 1..] {
            d = d.max((p[0] - q[0]).hypot(p[1] - q[1]));
        }
    }
    d
}

impl AttractorApprox {
    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn flagged(&self) -> &[bool] {
        &self.flagged
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.grid.cells().filter(|c| self.flagged[c.index])
    }

    pub fn contains(&self, k: usize) -> bool {
        self.flagged[k]
    }

    pub fn to_document(&self) -> Document {
        let values = self
            .flagged
            .iter()
            .map(|&f| if f { 1.0 } else { 0.0 })
            .collect();
        let mut d = Document::new(DocKind::Attractor, &self.grid, &["flag"], values)
            .with_meta(
                "kind",
                serde_json::to_value(self.kind).expect("enum serializes"),
            )
            .with_meta("diameter", self.diameter)
            .with_meta("diameter_change", self.diameter_change)
            .with_meta("escaped", self.escaped as u64)
            .with_meta("tracked", self.tracked as u64);
        if let Some(iso) = &self.isolation {
            d = d.with_meta(
                "isolation",
                serde_json::to_value(iso).expect("struct serializes"),
            );
        }
        d
    }

    pub fn from_document(d: &Document) -> Result<Self> {
        d.validate()?;
        if d.kind != DocKind::Attractor {
            return Err(Error::Document("not an attractor document".into()));
        }
        let get = |k: &str| d.meta.get(k).cloned().unwrap_or(serde_json::Value::Null);
        Ok(AttractorApprox {
            grid: d.grid.clone(),
            flagged: d.values.iter().map(|&v| v != 0.0).collect(),
            kind: serde_json::from_value(get("kind"))?,
            isolation: serde_json::from_value(get("isolation"))?,
            diameter: d.meta_f64("diameter")?,
            diameter_change: d.meta_f64("diameter_change")?,
            escaped: d.meta_f64("escaped")? as usize,
            tracked: d.meta_f64("tracked")? as usize,
        })
    }
}
