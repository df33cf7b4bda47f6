use serde::{Deserialize, Serialize};

use crate::dynamics::integrate_flow;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{ScalarField, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    Attractor,
    Repeller,
}

/// Levels `ρ_* < ρ̃ < ρ*` of the isolating function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolationLevels {
    pub lower: f64,
    pub boundary: f64,
    pub upper: f64,
}

/// An isolating neighbourhood `W₀ = {U₀ < ρ̃}` whose boundary the flow
/// crosses strictly inward (attractor) or outward (repeller).
#[derive(Clone, Debug, PartialEq)]
pub struct IsolationData {
    u0: ScalarField,
    v: VectorField,
    pub kind: TargetKind,
    pub levels: IsolationLevels,
    /// `γ₀` with `|V·∇U₀| ≥ γ₀|∇U₀|` on the cells of the level set `{U₀ = ρ̃}`.
    pub gamma0: f64,
    /// Gradients below this are treated as vanishing: `max|D²U₀|·(hx + hy)`
    /// over the band `{ρ_* ≤ U₀ ≤ ρ*}`.
    pub grad_tolerance: f64,
}

/// Starting points for the escape check stay clear of the minimum of `U₀`
/// by this fraction of `ρ̃`.
const ESCAPE_CORE: f64 = 0.01;
const ESCAPE_TIME: f64 = 50.0;
const ESCAPE_DT: f64 = 0.01;

/// Cells adjacent to the level set `{U = t}`: one endpoint of a grid edge
/// crossing it.
pub(crate) fn level_cells(u: &ScalarField, t: f64) -> Vec<usize> {
    let g = u.grid();
    let mut mark = vec![false; g.len()];
    for k in 0..g.len() {
        for m in g.neighbors(k) {
            if (u.at(k) - t) * (u.at(m) - t) <= 0.0 {
                mark[k] = true;
            }
        }
    }
    (0..g.len()).filter(|&k| mark[k]).collect()
}

fn grad_norm(u: &ScalarField, k: usize) -> f64 {
    let g = u.gradient_at(k);
    g[0].hypot(g[1])
}

impl IsolationData {
    /// Checks the boundary crossing sign and margin, the non-vanishing
    /// gradient on the band `{ρ_* ≤ U₀ ≤ ρ*}`, and, for repellers, that every
    /// orbit started in `W₀` away from the core leaves it (no internal attractor).
    pub fn new(
        u0: ScalarField,
        v: VectorField,
        kind: TargetKind,
        levels: IsolationLevels,
    ) -> Result<Self> {
        u0.grid().same_as(v.grid())?;
        let IsolationLevels {
            lower,
            boundary,
            upper,
        } = levels;
        if !(0.0 <= lower && lower < boundary && boundary < upper) {
            return Err(Error::InvalidIsolation(format!(
                "need 0 <= rho_lower < rho_tilde < rho_upper, got {lower}, {boundary}, {upper}"
            )));
        }
        let g = u0.grid();
        let curvature = (0..g.len())
            .filter(|&k| (lower..=upper).contains(&u0.at(k)))
            .map(|k| {
                let h = u0.hessian_at(k);
                h.a11.abs().max(h.a12.abs()).max(h.a22.abs())
            })
            .fold(0.0, f64::max);
        let grad_tolerance = curvature * g.spacing_sum();
        let on_level = level_cells(&u0, boundary);
        if on_level.is_empty() {
            return Err(Error::InvalidIsolation(format!(
                "level {boundary} does not meet the grid"
            )));
        }
        if on_level.iter().any(|&k| g.is_boundary(k)) {
            return Err(Error::InvalidIsolation(
                "isolating level set touches the truncation boundary".into(),
            ));
        }
        let sign = match kind {
            TargetKind::Attractor => -1.0,
            TargetKind::Repeller => 1.0,
        };
        let mut gamma0 = f64::INFINITY;
        for &k in &on_level {
            let gr = u0.gradient_at(k);
            let d = v.at(k);
            let lie = sign * (d[0] * gr[0] + d[1] * gr[1]);
            let n = gr[0].hypot(gr[1]);
            if !(lie > 0.0) || n <= grad_tolerance {
                return Err(Error::InvalidIsolation(format!(
                    "flow does not cross the level set strictly {} at cell {k}",
                    if sign < 0.0 { "inward" } else { "outward" }
                )));
            }
            gamma0 = gamma0.min(lie / n);
        }
        let band_min = (0..g.len())
            .filter(|&k| (lower..=upper).contains(&u0.at(k)))
            .map(|k| grad_norm(&u0, k))
            .fold(f64::INFINITY, f64::min);
        if band_min <= grad_tolerance {
            return Err(Error::DegenerateGradient { min_grad: band_min });
        }
        let iso = IsolationData {
            u0,
            v,
            kind,
            levels,
            gamma0,
            grad_tolerance,
        };
        if kind == TargetKind::Repeller {
            iso.check_escape()?;
        }
        Ok(iso)
    }

    fn check_escape(&self) -> Result<()> {
        let g = self.u0.grid();
        let rho = self.levels.boundary;
        let stride = (g.nx() / 24).max(1);
        let starts: Vec<[f64; 2]> = g
            .cells()
            .filter(|c| c.i % stride == 0 && c.j % stride == 0)
            .filter(|c| {
                let x = self.u0.at(c.index);
                x < rho && x >= ESCAPE_CORE * rho
            })
            .map(|c| [c.x, c.y])
            .collect();
        let exits = Exec::Parallel.map(&starts, |&x0| -> Result<bool> {
            let t = integrate_flow(&self.v, x0, ESCAPE_TIME, ESCAPE_DT, Some(g))?;
            Ok(t.escaped
                || t.points
                    .iter()
                    .any(|p| g.locate(p[0], p[1]).is_some_and(|k| self.u0.at(k) >= rho)))
        });
        for (x0, e) in starts.iter().zip(exits) {
            if !e? {
                return Err(Error::InvalidIsolation(format!(
                    "orbit from ({:.3}, {:.3}) never leaves the neighbourhood; it contains an internal attractor",
                    x0[0], x0[1]
                )));
            }
        }
        Ok(())
    }

    pub fn u0(&self) -> &ScalarField {
        &self.u0
    }

    pub fn v(&self) -> &VectorField {
        &self.v
    }

    /// `min |∇U₀|` on the level set `{U₀ = ρ̃}`, interpolated linearly along
    /// the grid edges that cross it.
    pub fn min_boundary_gradient(&self) -> f64 {
        let g = self.u0.grid();
        let t = self.levels.boundary;
        let mut best = f64::INFINITY;
        for k in 0..g.len() {
            for m in g.neighbors(k).filter(|&m| m > k) {
                let (a, b) = (self.u0.at(k), self.u0.at(m));
                if (a - t) * (b - t) <= 0.0 && a != b {
                    let theta = (t - a) / (b - a);
                    let n = (1.0 - theta) * grad_norm(&self.u0, k) + theta * grad_norm(&self.u0, m);
                    best = best.min(n);
                }
            }
        }
        best
    }

    /// `max |∇U₀|²` over `{lo ≤ U₀ ≤ hi}`.
    pub fn max_band_gradient_sq(&self, lo: f64, hi: f64) -> f64 {
        (0..self.u0.grid().len())
            .filter(|&k| (lo..=hi).contains(&self.u0.at(k)))
            .map(|k| grad_norm(&self.u0, k).powi(2))
            .fold(0.0, f64::max)
    }

    /// Mask of `{lo ≤ U₀ ≤ hi}`.
    pub fn band(&self, lo: f64, hi: f64) -> Vec<bool> {
        self.u0
            .values()
            .iter()
            .map(|x| (lo..=hi).contains(x))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;

    fn hopf(x: f64, y: f64) -> [f64; 2] {
        let r2 = x * x + y * y;
        [x - y - x * r2, x + y - y * r2]
    }

    fn fields(n: usize, v: impl Fn(f64, f64) -> [f64; 2]) -> (ScalarField, VectorField) {
        let g = Grid2D::square(2.5, n).unwrap();
        (
            ScalarField::sample(&g, |x, y| x * x + y * y).unwrap(),
            VectorField::sample(&g, v).unwrap(),
        )
    }

    const ORIGIN: IsolationLevels = IsolationLevels {
        lower: 0.04,
        boundary: 0.25,
        upper: 0.49,
    };

    #[test]
    fn hopf_origin_is_an_isolated_repeller() {
        let (u, v) = fields(100, hopf);
        let iso = IsolationData::new(u, v, TargetKind::Repeller, ORIGIN).unwrap();
        // V·∇U/|∇U| = 2U(1 − U)/(2r) = r(1 − r²) ≈ 0.375 at r = 0.5
        assert!((iso.gamma0 - 0.375).abs() < 0.05, "{}", iso.gamma0);
        assert!((iso.min_boundary_gradient() - 1.0).abs() < 0.01);
    }

    #[test]
    fn wrong_orientation_is_rejected() {
        let (u, v) = fields(60, hopf);
        let r = IsolationData::new(u, v, TargetKind::Attractor, ORIGIN);
        assert!(matches!(r, Err(Error::InvalidIsolation(_))));
    }

    #[test]
    fn internal_attractor_is_rejected() {
        // ṙ = r(r² − 0.04)(1 − r²): the origin attracts inside the repelling ring r = 0.2
        let (u, v) = fields(100, |x, y| {
            let r2 = x * x + y * y;
            let s = (r2 - 0.04) * (1.0 - r2);
            [x * s - y, y * s + x]
        });
        let r = IsolationData::new(u, v, TargetKind::Repeller, ORIGIN);
        match r {
            Err(Error::InvalidIsolation(m)) => assert!(m.contains("internal attractor"), "{m}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vanishing_band_gradient() {
        let (u, v) = fields(60, hopf);
        let levels = IsolationLevels {
            lower: 0.0,
            ..ORIGIN
        };
        assert!(matches!(
            IsolationData::new(u, v, TargetKind::Repeller, levels),
            Err(Error::DegenerateGradient { .. })
        ));
    }
}
