use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{DiffusionField, Drift};
use crate::grid::Grid2D;

/// Largest admissible `|v h / a|` on a face before `e^z` loses meaning.
pub const MAX_PECLET: f64 = 700.0;
/// Default lower bound on `λ(x) / Λ(x)` accepted by the assembler.
pub const DEFAULT_ANISOTROPY_CAP: f64 = 0.25;

/// `B(z) = z / (eᶻ − 1)`, with the series near zero.
pub fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-6 {
        1.0 - 0.5 * z + z * z / 12.0
    } else {
        z / z.exp_m1()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AssembleOptions {
    pub anisotropy_cap: f64,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions {
            anisotropy_cap: DEFAULT_ANISOTROPY_CAP,
        }
    }
}

/// Stencil facts recorded at assembly time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StencilInfo {
    pub max_peclet: f64,
    /// `min λ/Λ` over cells.
    pub min_anisotropy: f64,
    pub anisotropy_cap: f64,
    pub has_mixed_terms: bool,
}

/// Generator `M` acting on cell masses: `dw/dt = M w`.
///
/// Stored column-compressed with sorted row indices. Column sums vanish
/// up to rounding because every face contribution is added to one cell
/// and removed from its neighbour.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    grid: Grid2D,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<f64>,
    info: StencilInfo,
}

type Triplet = (usize, usize, f64);

/// Finite-volume assembly of `∂²ᵢⱼ(aⁱʲu) − ∂ᵢ(Vⁱu)` with no-flux boundaries.
///
/// Diagonal diffusion enters through Scharfetter–Gummel face fluxes on
/// `q = aⁱⁱ u`; `a¹²` enters through centered corner stencils inside the
/// same face fluxes. The drift is evaluated at face midpoints.
pub fn assemble(
    drift: &dyn Drift,
    a: &DiffusionField,
    grid: &Grid2D,
    opts: AssembleOptions,
    exec: Exec,
) -> Result<DiscreteOperator> {
    a.grid().same_as(grid)?;
    let mut min_aniso = f64::INFINITY;
    for k in 0..grid.len() {
        let r = a.min_eig()[k] / a.frobenius()[k];
        if r < opts.anisotropy_cap {
            return Err(Error::AnisotropyCap {
                cell: k,
                ratio: r,
                cap: opts.anisotropy_cap,
            });
        }
        min_aniso = min_aniso.min(r);
    }
    let has_mixed = !grid.is_line() && a.values().iter().any(|m| m.a12 != 0.0);

    let per_cell: Vec<Result<(Vec<Triplet>, f64)>> =
        exec.map_range(grid.len(), |k| cell_faces(drift, a, grid, k, has_mixed));
    let mut trip = Vec::with_capacity(grid.len() * if has_mixed { 24 } else { 8 });
    let mut max_pe: f64 = 0.0;
    for r in per_cell {
        let (t, pe) = r?;
        max_pe = max_pe.max(pe);
        trip.extend(t);
    }
    let info = StencilInfo {
        max_peclet: max_pe,
        min_anisotropy: min_aniso,
        anisotropy_cap: opts.anisotropy_cap,
        has_mixed_terms: has_mixed,
    };
    Ok(DiscreteOperator::from_triplets(grid, trip, info))
}

/// Contributions of the `+x` and `+y` faces of cell `k`.
fn cell_faces(
    drift: &dyn Drift,
    a: &DiffusionField,
    g: &Grid2D,
    k: usize,
    mixed: bool,
) -> Result<(Vec<Triplet>, f64)> {
    let (i, j) = g.coords(k);
    let (hx, hy) = (g.hx(), g.hy());
    let mut out = Vec::new();
    let mut max_pe: f64 = 0.0;

    let mut sg =
        |lo: usize, hi: usize, v: f64, al: f64, ar: f64, h: f64, out: &mut Vec<Triplet>| {
            let af = 0.5 * (al + ar);
            let z = v * h / af;
            if !(z.abs() <= MAX_PECLET) {
                return Err(Error::StencilOverflow {
                    cell: lo,
                    peclet: z.abs(),
                });
            }
            max_pe = max_pe.max(z.abs());
            let up = bernoulli(-z) * al / (h * h);
            let down = bernoulli(z) * ar / (h * h);
            out.extend([(hi, lo, up), (lo, lo, -up), (lo, hi, down), (hi, hi, -down)]);
            Ok(())
        };

    if i + 1 < g.nx() {
        let r = g.index(i + 1, j);
        let (xl, y) = g.center(i, j);
        let v = drift.eval(xl + 0.5 * hx, y)[0];
        sg(k, r, v, a.at(k).a11, a.at(r).a11, hx, &mut out)?;
        if mixed {
            let jp = (j + 1).min(g.ny() - 1);
            let jm = j.saturating_sub(1);
            let c = 1.0 / (2.0 * (jp - jm) as f64 * hy);
            for ii in [i, i + 1] {
                for (col, cs) in [(g.index(ii, jp), c), (g.index(ii, jm), -c)] {
                    let coef = cs * a.at(col).a12 / hx;
                    out.push((r, col, -coef));
                    out.push((k, col, coef));
                }
            }
        }
    }
    if !g.is_line() && j + 1 < g.ny() {
        let u = g.index(i, j + 1);
        let (x, yd) = g.center(i, j);
        let v = drift.eval(x, yd + 0.5 * hy)[1];
        sg(k, u, v, a.at(k).a22, a.at(u).a22, hy, &mut out)?;
        if mixed {
            let ip = (i + 1).min(g.nx() - 1);
            let im = i.saturating_sub(1);
            let c = 1.0 / (2.0 * (ip - im) as f64 * hx);
            for jj in [j, j + 1] {
                for (col, cs) in [(g.index(ip, jj), c), (g.index(im, jj), -c)] {
                    let coef = cs * a.at(col).a12 / hy;
                    out.push((u, col, -coef));
                    out.push((k, col, coef));
                }
            }
        }
    }
    Ok((out, max_pe))
}

impl DiscreteOperator {
    /// Operator from raw `(row, col, value)` entries; duplicates are summed.
    pub fn from_entries(grid: &Grid2D, entries: Vec<(usize, usize, f64)>) -> Self {
        let info = StencilInfo {
            max_peclet: 0.0,
            min_anisotropy: f64::NAN,
            anisotropy_cap: f64::NAN,
            has_mixed_terms: false,
        };
        Self::from_triplets(grid, entries, info)
    }

    fn from_triplets(grid: &Grid2D, mut t: Vec<Triplet>, info: StencilInfo) -> Self {
        let n = grid.len();
        // stable sort keeps the summation order of duplicates fixed
        t.sort_by_key(|&(r, c, _)| (c, r));
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                vals.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        DiscreteOperator {
            grid: grid.clone(),
            col_ptr,
            row_idx,
            vals,
            info,
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.len()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn info(&self) -> StencilInfo {
        self.info
    }

    /// `(row, value)` pairs of column `c`.
    pub fn column(&self, c: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.col_ptr[c]..self.col_ptr[c + 1];
        self.row_idx[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    /// All stored entries as `(row, col, value)`, column-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |c| self.column(c).map(move |(r, v)| (r, c, v)))
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for c in 0..self.dim() {
            for (r, v) in self.column(c) {
                out[r] += v * w[c];
            }
        }
        out
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|c| self.column(c).map(|(_, v)| v).sum())
            .collect()
    }

    /// `max_c |Σ_r M[r, c]|`.
    pub fn max_column_sum(&self) -> f64 {
        self.column_sums().iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Max absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut rows = vec![0.0; self.dim()];
        for (r, _, v) in self.entries() {
            rows[r] += v.abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Smallest off-diagonal entry; non-negative for a rate matrix.
    pub fn min_off_diagonal(&self) -> f64 {
        self.entries()
            .filter(|&(r, c, _)| r != c)
            .map(|(_, _, v)| v)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut m = vec![vec![0.0; n]; n];
        for (r, c, v) in self.entries() {
            m[r][c] = v;
        }
        m
    }
}
