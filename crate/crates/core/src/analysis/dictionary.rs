use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid2D;

pub const DICTIONARY_VERSION: &str = "bump-lattice-v1";

/// Largest value a test function may take on a boundary cell.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

const PRIMARY_LATTICE: usize = 5;
const OFFSET_LATTICE: usize = 4;
const SHRINK: f64 = 0.9;

/// `φ(t) = exp(1 − 1/(1 − t²))` on `|t| < 1`, with `φ(0) = 1`, and its first
/// two derivatives.
fn bump(t: f64) -> (f64, f64, f64) {
    if t.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let s = 1.0 - t * t;
    let p = (1.0 - 1.0 / s).exp();
    let d1 = p * (-2.0 * t / (s * s));
    let d2 = p * (4.0 * t * t / (s * s * s * s) - (2.0 + 6.0 * t * t) / (s * s * s));
    (p, d1, d2)
}

/// A smooth test function sampled at cell centres with analytic derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub label: String,
    values: Vec<f64>,
    gradients: Vec<[f64; 2]>,
    laplacians: Vec<f64>,
    /// `‖∇h‖∞` over cell centres.
    pub grad_sup: f64,
    /// `‖Δh‖∞` over cell centres.
    pub laplacian_sup: f64,
}

impl TestFunction {
    /// Builds a test function from per-cell `(h, ∇h, Δh)`.
    pub fn from_samples(
        grid: &Grid2D,
        label: impl Into<String>,
        f: impl Fn(f64, f64) -> (f64, [f64; 2], f64),
    ) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        let mut gradients = Vec::with_capacity(grid.len());
        let mut laplacians = Vec::with_capacity(grid.len());
        for c in grid.cells() {
            let (h, g, l) = f(c.x, c.y);
            values.push(h);
            gradients.push(g);
            laplacians.push(l);
        }
        let grad_sup = gradients
            .iter()
            .map(|g| g[0].hypot(g[1]))
            .fold(0.0, f64::max);
        let laplacian_sup = laplacians.iter().map(|l| l.abs()).fold(0.0, f64::max);
        TestFunction {
            label: label.into(),
            values,
            gradients,
            laplacians,
            grad_sup,
            laplacian_sup,
        }
    }

    /// Tensor bump `φ((x − cx)/wx)·φ((y − cy)/wy)`; line grids use the x factor only.
    pub fn tensor_bump(grid: &Grid2D, center: [f64; 2], width: [f64; 2]) -> Self {
        let line = grid.is_line();
        let label = if line {
            format!("bump(x={:.4},w={:.4})", center[0], width[0])
        } else {
            format!(
                "bump(x={:.4},y={:.4},wx={:.4},wy={:.4})",
                center[0], center[1], width[0], width[1]
            )
        };
        Self::from_samples(grid, label, |x, y| {
            let (px, dx, ddx) = bump((x - center[0]) / width[0]);
            let (dx, ddx) = (dx / width[0], ddx / (width[0] * width[0]));
            if line {
                return (px, [dx, 0.0], ddx);
            }
            let (py, dy, ddy) = bump((y - center[1]) / width[1]);
            let (dy, ddy) = (dy / width[1], ddy / (width[1] * width[1]));
            (px * py, [dx * py, px * dy], ddx * py + px * ddy)
        })
    }

    /// Radial bump `φ((r − r0)/w)`, zero near the origin when `r0 > w`.
    pub fn radial_bump(grid: &Grid2D, r0: f64, w: f64) -> Self {
        Self::from_samples(grid, format!("radial(r={r0:.4},w={w:.4})"), |x, y| {
            let r = x.hypot(y);
            let (p, d1, d2) = bump((r - r0) / w);
            let (d1, d2) = (d1 / w, d2 / (w * w));
            if r == 0.0 {
                return (p, [0.0, 0.0], 2.0 * d2);
            }
            // Δh = h'' + h'/r in the plane
            (p, [d1 * x / r, d1 * y / r], d2 + d1 / r)
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gradients(&self) -> &[[f64; 2]] {
        &self.gradients
    }

    pub fn laplacians(&self) -> &[f64] {
        &self.laplacians
    }

    fn boundary_max(&self, grid: &Grid2D) -> f64 {
        (0..grid.len())
            .filter(|&k| grid.is_boundary(k))
            .map(|k| self.values[k].abs())
            .fold(0.0, f64::max)
    }
}

/// Finite family of compactly supported smooth test functions on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunctionDictionary {
    grid: Grid2D,
    version: String,
    functions: Vec<TestFunction>,
}

impl TestFunctionDictionary {
    /// The versioned default: tensor bumps on a 5-point lattice and a 4-point
    /// offset lattice per axis, widths shrunk by 0.9 until each bump vanishes
    /// on the boundary cells.
    pub fn standard(grid: &Grid2D) -> Result<Self> {
        let mut functions = Vec::new();
        for k in [PRIMARY_LATTICE, OFFSET_LATTICE] {
            let axis = |lo: f64, hi: f64| {
                let step = (hi - lo) / (PRIMARY_LATTICE + 1) as f64;
                // the offset lattice sits halfway between primary points
                let first = if k == PRIMARY_LATTICE {
                    lo + step
                } else {
                    lo + 1.5 * step
                };
                (
                    (0..k).map(|i| first + i as f64 * step).collect::<Vec<_>>(),
                    step,
                )
            };
            let (xs, sx) = axis(grid.x_min(), grid.x_max());
            let (ys, sy) = if grid.is_line() {
                (vec![0.0], 1.0)
            } else {
                axis(grid.y_min(), grid.y_max())
            };
            for &cy in &ys {
                for &cx in &xs {
                    functions.push(Self::fitted(grid, [cx, cy], [1.5 * sx, 1.5 * sy])?);
                }
            }
        }
        Ok(TestFunctionDictionary {
            grid: grid.clone(),
            version: DICTIONARY_VERSION.into(),
            functions,
        })
    }

    /// Shrinks the width until the bump vanishes on the boundary.
    fn fitted(grid: &Grid2D, center: [f64; 2], mut width: [f64; 2]) -> Result<TestFunction> {
        for _ in 0..200 {
            let h = TestFunction::tensor_bump(grid, center, width);
            if h.boundary_max(grid) <= BOUNDARY_TOLERANCE {
                return Ok(h);
            }
            width = [width[0] * SHRINK, width[1] * SHRINK];
        }
        Err(Error::InvalidArgument(format!(
            "no bump centred at {center:?} vanishes on the boundary"
        )))
    }

    /// A custom dictionary; every function must vanish on the boundary cells.
    pub fn from_functions(
        grid: &Grid2D,
        version: impl Into<String>,
        functions: Vec<TestFunction>,
    ) -> Result<Self> {
        for f in &functions {
            if f.values.len() != grid.len() {
                return Err(Error::GridMismatch);
            }
            if f.boundary_max(grid) > BOUNDARY_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "test function {} does not vanish on the boundary",
                    f.label
                )));
            }
        }
        Ok(TestFunctionDictionary {
            grid: grid.clone(),
            version: version.into(),
            functions,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn functions(&self) -> &[TestFunction] {
        &self.functions
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// `max_k ‖Δh_k‖∞`.
    pub fn max_laplacian_sup(&self) -> f64 {
        self.functions
            .iter()
            .map(|f| f.laplacian_sup)
            .fold(0.0, f64::max)
    }
}
