use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform rectangular cell partition of a truncated planar domain.
///
/// Cells are indexed row-major: cell `(i, j)` (column `i` along x, row `j`
/// along y) has flat index `j * nx + i`. A grid with `ny == 1` is a line grid,
/// the 1D fast path; its y extent is nominal and no y faces exist.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid2D {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    nx: usize,
    ny: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl TryFrom<GridSpec> for Grid2D {
    type Error = Error;

    fn try_from(s: GridSpec) -> Result<Self> {
        if s.ny == 1 {
            Grid2D::line(s.x_min, s.x_max, s.nx).map(|g| Grid2D {
                y_min: s.y_min,
                y_max: s.y_max,
                ..g
            })
        } else {
            Grid2D::new(s.x_min, s.x_max, s.y_min, s.y_max, s.nx, s.ny)
        }
    }
}

impl From<Grid2D> for GridSpec {
    fn from(g: Grid2D) -> Self {
        GridSpec {
            x_min: g.x_min,
            x_max: g.x_max,
            y_min: g.y_min,
            y_max: g.y_max,
            nx: g.nx,
            ny: g.ny,
        }
    }
}

/// A cell seen from a region predicate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
}

impl Cell {
    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Grid2D {
    pub fn new(
        x_min: f64,
        x_max: f64,
        y_min: f64,
        y_max: f64,
        nx: usize,
        ny: usize,
    ) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(Error::InvalidGrid(format!(
                "need at least 8 cells per direction, got {nx}x{ny}"
            )));
        }
        let g = Grid2D {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
        };
        g.check_extent()?;
        Ok(g)
    }

    /// Square grid `[-half, half]²` with `n × n` cells.
    pub fn square(half: f64, n: usize) -> Result<Self> {
        Self::new(-half, half, -half, half, n, n)
    }

    /// Line grid on `[x_min, x_max]` for one-dimensional problems.
    pub fn line(x_min: f64, x_max: f64, nx: usize) -> Result<Self> {
        if nx < 8 {
            return Err(Error::InvalidGrid(format!(
                "need at least 8 cells, got {nx}"
            )));
        }
        let g = Grid2D {
            x_min,
            x_max,
            y_min: -0.5,
            y_max: 0.5,
            nx,
            ny: 1,
        };
        g.check_extent()?;
        Ok(g)
    }

    fn check_extent(&self) -> Result<()> {
        let ok = |lo: f64, hi: f64| lo.is_finite() && hi.is_finite() && hi > lo;
        if !ok(self.x_min, self.x_max) || !ok(self.y_min, self.y_max) {
            return Err(Error::InvalidGrid(format!(
                "degenerate extent [{}, {}] x [{}, {}]",
                self.x_min, self.x_max, self.y_min, self.y_max
            )));
        }
        Ok(())
    }

    /// Same extent with each direction refined by `factor` (line grids stay lines).
    pub fn refined(&self, factor: usize) -> Result<Self> {
        let ny = if self.is_line() { 1 } else { self.ny * factor };
        GridSpec {
            ny,
            nx: self.nx * factor,
            ..self.clone().into()
        }
        .try_into()
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn is_line(&self) -> bool {
        self.ny == 1
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    /// Cell measure used to turn weights into densities. Line grids use `hx`.
    pub fn cell_volume(&self) -> f64 {
        if self.is_line() {
            self.hx()
        } else {
            self.hx() * self.hy()
        }
    }

    /// Sum of the spacings entering discretization slacks (`hx` for line grids).
    pub fn spacing_sum(&self) -> f64 {
        if self.is_line() {
            self.hx()
        } else {
            self.hx() + self.hy()
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        let y = if self.is_line() {
            0.0
        } else {
            self.y_min + (j as f64 + 0.5) * self.hy()
        };
        (self.x_min + (i as f64 + 0.5) * self.hx(), y)
    }

    #[inline]
    pub fn center_of(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.coords(k);
        self.center(i, j)
    }

    pub fn cell(&self, k: usize) -> Cell {
        let (i, j) = self.coords(k);
        let (x, y) = self.center(i, j);
        Cell {
            index: k,
            i,
            j,
            x,
            y,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(move |k| self.cell(k))
    }

    /// Cell containing `(x, y)`, or `None` outside the truncation box.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        if !(self.x_min..=self.x_max).contains(&x) {
            return None;
        }
        let i = (((x - self.x_min) / self.hx()) as usize).min(self.nx - 1);
        let j = if self.is_line() {
            0
        } else {
            if !(self.y_min..=self.y_max).contains(&y) {
                return None;
            }
            (((y - self.y_min) / self.hy()) as usize).min(self.ny - 1)
        };
        Some(self.index(i, j))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let in_x = x >= self.x_min && x <= self.x_max;
        in_x && (self.is_line() || (y >= self.y_min && y <= self.y_max))
    }

    /// Whether the cell touches the truncation boundary.
    pub fn is_boundary(&self, k: usize) -> bool {
        let (i, j) = self.coords(k);
        let on_x = i == 0 || i + 1 == self.nx;
        on_x || (!self.is_line() && (j == 0 || j + 1 == self.ny))
    }

    /// Edge-adjacent neighbours (no diagonals).
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.coords(k);
        let mut out = [None; 4];
        if i > 0 {
            out[0] = Some(self.index(i - 1, j));
        }
        if i + 1 < self.nx {
            out[1] = Some(self.index(i + 1, j));
        }
        if j > 0 {
            out[2] = Some(self.index(i, j - 1));
        }
        if j + 1 < self.ny {
            out[3] = Some(self.index(i, j + 1));
        }
        out.into_iter().flatten()
    }

    pub fn same_as(&self, other: &Grid2D) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}
