//! Per-cell fields: drifts, diffusion matrices and scalar samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid2D;

/// Symmetric 2×2 matrix `[[a11, a12], [a12, a22]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sym2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Sym2 {
    pub const fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Sym2 { a11, a12, a22 }
    }

    pub const fn isotropic(c: f64) -> Self {
        Sym2 {
            a11: c,
            a12: 0.0,
            a22: c,
        }
    }

    pub fn scaled(self, s: f64) -> Self {
        Sym2::new(self.a11 * s, self.a12 * s, self.a22 * s)
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a22.is_finite()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let r = (0.5 * (self.a11 - self.a22)).hypot(self.a12);
        (mean - r, mean + r)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().0
    }

    /// `sqrt(Σ |aⁱʲ|²)`, the norm used for normality ratios and `|A|`.
    pub fn frobenius(&self) -> f64 {
        (self.a11 * self.a11 + 2.0 * self.a12 * self.a12 + self.a22 * self.a22).sqrt()
    }

    /// `ξᵀ A ξ`.
    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.a11 * v[0] * v[0] + 2.0 * self.a12 * v[0] * v[1] + self.a22 * v[1] * v[1]
    }

    /// `tr(A H)` for another symmetric matrix `H`, i.e. `aⁱʲ ∂²ᵢⱼ`.
    pub fn contract(&self, h: &Sym2) -> f64 {
        self.a11 * h.a11 + 2.0 * self.a12 * h.a12 + self.a22 * h.a22
    }
}

/// Drift evaluated at arbitrary points (analytic callbacks or interpolated fields).
pub trait Drift: Sync {
    fn eval(&self, x: f64, y: f64) -> [f64; 2];
}

impl<F> Drift for F
where
    F: Fn(f64, f64) -> [f64; 2] + Sync,
{
    fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        self(x, y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid2D,
    values: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn sample(grid: &Grid2D, f: impl Fn(f64, f64) -> [f64; 2]) -> Result<Self> {
        let values = grid
            .cells()
            .map(|c| {
                let v = f(c.x, c.y);
                if v[0].is_finite() && v[1].is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite { cell: c.index })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_values(grid: &Grid2D, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(k) = values
            .iter()
            .position(|v| !(v[0].is_finite() && v[1].is_finite()))
        {
            return Err(Error::NonFinite { cell: k });
        }
        Ok(VectorField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn at(&self, k: usize) -> [f64; 2] {
        self.values[k]
    }

    pub fn negated(&self) -> Self {
        VectorField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| [-v[0], -v[1]]).collect(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v[0].hypot(v[1]))
            .fold(0.0, f64::max)
    }
}

impl Drift for VectorField {
    /// Bilinear interpolation between cell centers, clamped at the border.
    fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        let g = &self.grid;
        let fx = ((x - g.x_min()) / g.hx() - 0.5).clamp(0.0, (g.nx() - 1) as f64);
        let i0 = (fx.floor() as usize).min(g.nx().saturating_sub(2));
        let tx = fx - i0 as f64;
        if g.is_line() {
            let a = self.values[i0];
            let b = self.values[i0 + 1];
            return [a[0] + tx * (b[0] - a[0]), a[1] + tx * (b[1] - a[1])];
        }
        let fy = ((y - g.y_min()) / g.hy() - 0.5).clamp(0.0, (g.ny() - 1) as f64);
        let j0 = (fy.floor() as usize).min(g.ny() - 2);
        let ty = fy - j0 as f64;
        let v00 = self.values[g.index(i0, j0)];
        let v10 = self.values[g.index(i0 + 1, j0)];
        let v01 = self.values[g.index(i0, j0 + 1)];
        let v11 = self.values[g.index(i0 + 1, j0 + 1)];
        let mut out = [0.0; 2];
        for c in 0..2 {
            let lo = v00[c] + tx * (v10[c] - v00[c]);
            let hi = v01[c] + tx * (v11[c] - v01[c]);
            out[c] = lo + ty * (hi - lo);
        }
        out
    }
}

/// Symmetric positive definite matrix per cell with cached `λ(x)` and `Λ(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionField {
    grid: Grid2D,
    values: Vec<Sym2>,
    min_eig: Vec<f64>,
    frob: Vec<f64>,
}

impl DiffusionField {
    pub fn sample(grid: &Grid2D, f: impl Fn(f64, f64) -> Sym2) -> Result<Self> {
        let values = grid.cells().map(|c| f(c.x, c.y)).collect();
        Self::from_values(grid, values)
    }

    pub fn constant(grid: &Grid2D, a: Sym2) -> Result<Self> {
        Self::from_values(grid, vec![a; grid.len()])
    }

    pub fn from_values(grid: &Grid2D, values: Vec<Sym2>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        let mut min_eig = Vec::with_capacity(values.len());
        let mut frob = Vec::with_capacity(values.len());
        for (k, a) in values.iter().enumerate() {
            if !a.is_finite() {
                return Err(Error::NonFinite { cell: k });
            }
            let lam = if grid.is_line() {
                a.a11
            } else {
                a.min_eigenvalue()
            };
            if lam.is_nan() || lam <= 0.0 {
                return Err(Error::NotSpd {
                    cell: k,
                    min_eig: lam,
                });
            }
            min_eig.push(lam);
            frob.push(a.frobenius());
        }
        Ok(DiffusionField {
            grid: grid.clone(),
            values,
            min_eig,
            frob,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[Sym2] {
        &self.values
    }

    pub fn at(&self, k: usize) -> Sym2 {
        self.values[k]
    }

    /// Smallest eigenvalue `λ(x)` per cell (`a¹¹` on line grids).
    pub fn min_eig(&self) -> &[f64] {
        &self.min_eig
    }

    /// Frobenius norm `Λ(x)` per cell.
    pub fn frobenius(&self) -> &[f64] {
        &self.frob
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::from_values(
            &self.grid,
            self.values.iter().map(|a| a.scaled(s)).collect(),
        )
    }

    /// `sup Λ` over the whole grid.
    pub fn sup_norm(&self) -> f64 {
        self.frob.iter().copied().fold(0.0, f64::max)
    }

    /// `sup_Ω Λ / inf_Ω λ` over the cells selected by `region`.
    pub fn normality_ratio(&self, region: impl Fn(usize) -> bool) -> Option<f64> {
        let mut big: f64 = 0.0;
        let mut small = f64::INFINITY;
        let mut any = false;
        for k in (0..self.values.len()).filter(|&k| region(k)) {
            any = true;
            big = big.max(self.frob[k]);
            small = small.min(self.min_eig[k]);
        }
        any.then(|| big / small)
    }
}

/// Scalar samples on a grid (Lyapunov candidates, shaping profiles, densities).
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn sample(grid: &Grid2D, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::from_values(grid, grid.cells().map(|c| f(c.x, c.y)).collect())
    }

    pub fn from_values(grid: &Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { cell: k });
        }
        Ok(ScalarField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Second-order finite difference along one axis at cell `(i, j)`:
    /// central inside, one-sided three-point at the truncation boundary.
    fn diff(&self, i: usize, j: usize, along_x: bool) -> f64 {
        let g = &self.grid;
        let (n, h, pos) = if along_x {
            (g.nx(), g.hx(), i)
        } else {
            (g.ny(), g.hy(), j)
        };
        if n < 3 {
            return 0.0;
        }
        let at = |p: usize| {
            if along_x {
                self.values[g.index(p, j)]
            } else {
                self.values[g.index(i, p)]
            }
        };
        if pos == 0 {
            (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
        } else if pos + 1 == n {
            (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
        } else {
            (at(pos + 1) - at(pos - 1)) / (2.0 * h)
        }
    }

    pub fn gradient_at(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.grid.coords(k);
        let gy = if self.grid.is_line() {
            0.0
        } else {
            self.diff(i, j, false)
        };
        [self.diff(i, j, true), gy]
    }

    pub fn gradient(&self) -> Vec<[f64; 2]> {
        (0..self.grid.len()).map(|k| self.gradient_at(k)).collect()
    }

    /// Hessian by central second differences; the stencil centre is moved one
    /// cell inward on the boundary.
    pub fn hessian_at(&self, k: usize) -> Sym2 {
        let g = &self.grid;
        let (i, j) = g.coords(k);
        let ci = i.clamp(1, g.nx() - 2);
        let f = |a: usize, b: usize| self.values[g.index(a, b)];
        let hx = g.hx();
        let dxx = (f(ci + 1, j) - 2.0 * f(ci, j) + f(ci - 1, j)) / (hx * hx);
        if g.is_line() {
            return Sym2::new(dxx, 0.0, 0.0);
        }
        let hy = g.hy();
        let cj = j.clamp(1, g.ny() - 2);
        let dyy = (f(i, cj + 1) - 2.0 * f(i, cj) + f(i, cj - 1)) / (hy * hy);
        let dxy = (f(ci + 1, cj + 1) - f(ci + 1, cj - 1) - f(ci - 1, cj + 1) + f(ci - 1, cj - 1))
            / (4.0 * hx * hy);
        Sym2::new(dxx, dxy, dyy)
    }

    pub fn hessian(&self) -> Vec<Sym2> {
        (0..self.grid.len()).map(|k| self.hessian_at(k)).collect()
    }

    /// `max |D²U|` entrywise, used for discretization slacks.
    pub fn max_second_derivative(&self) -> f64 {
        self.hessian()
            .iter()
            .map(|h| h.a11.abs().max(h.a12.abs()).max(h.a22.abs()))
            .fold(0.0, f64::max)
    }
}
