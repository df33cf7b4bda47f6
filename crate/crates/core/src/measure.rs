use crate::error::{Error, Result};
use crate::grid::{Cell, Grid2D};

/// Tolerance on `|Σw − 1|` for a valid measure.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Probability measure on the cells of a grid; `w / cell_volume` is the density.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    grid: Grid2D,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Validates non-negativity and unit mass.
    pub fn new(grid: &Grid2D, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(k) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite { cell: k });
        }
        if let Some(k) = weights.iter().position(|&w| w < 0.0) {
            return Err(Error::InvalidMeasure(format!(
                "negative weight {} at cell {k}",
                weights[k]
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!("total mass {total} != 1")));
        }
        Ok(DiscreteMeasure {
            grid: grid.clone(),
            weights,
        })
    }

    /// Normalizes non-negative weights with positive total.
    pub fn from_unnormalized(grid: &Grid2D, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidMeasure(format!(
                "cannot normalize weights with total {total}"
            )));
        }
        Self::new(grid, weights.into_iter().map(|w| w / total).collect())
    }

    /// Discretizes a density by sampling it at cell centers.
    pub fn from_density(grid: &Grid2D, density: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::from_unnormalized(grid, grid.cells().map(|c| density(c.x, c.y)).collect())
    }

    pub fn uniform(grid: &Grid2D) -> Self {
        let n = grid.len();
        DiscreteMeasure {
            grid: grid.clone(),
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// All mass on one cell.
    pub fn point_mass(grid: &Grid2D, cell: usize) -> Result<Self> {
        if cell >= grid.len() {
            return Err(Error::InvalidArgument(format!("cell {cell} out of range")));
        }
        let mut w = vec![0.0; grid.len()];
        w[cell] = 1.0;
        Ok(DiscreteMeasure {
            grid: grid.clone(),
            weights: w,
        })
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn density(&self) -> Vec<f64> {
        let v = self.grid.cell_volume();
        self.weights.iter().map(|w| w / v).collect()
    }

    /// `μ(B)` for the cells selected by `region`.
    pub fn mass_on(&self, region: impl Fn(&Cell) -> bool) -> f64 {
        self.grid
            .cells()
            .filter(|c| region(c))
            // fold from +0 so an empty region reports 0 rather than −0
            .fold(0.0, |m, c| m + self.weights[c.index])
    }

    /// `∫ f dμ` with `f` evaluated at cell centers.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.grid
            .cells()
            .map(|c| self.weights[c.index] * f(c.x, c.y))
            .sum()
    }

    /// `∫ f dμ` for per-cell values.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// `Σ |w − w'|`.
    pub fn l1_distance(&self, other: &DiscreteMeasure) -> Result<f64> {
        self.grid.same_as(&other.grid)?;
        Ok(self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum())
    }
}

/// Convenience helper: measure of one region on a measure, the value of
/// `measure_mass_on` in the operation table.
pub fn measure_mass_on(mu: &DiscreteMeasure, region: impl Fn(&Cell) -> bool) -> f64 {
    mu.mass_on(region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_one_cell() {
        let g = Grid2D::square(1.0, 8).unwrap();
        let mu = DiscreteMeasure::uniform(&g);
        let m = mu.mass_on(|c| c.index < 16);
        assert_relative_eq!(m, 0.25, epsilon = 1e-15);
        assert_relative_eq!(mu.mass_on(|_| true), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn point_mass_excluded() {
        let g = Grid2D::square(1.0, 8).unwrap();
        let mu = DiscreteMeasure::point_mass(&g, 10).unwrap();
        assert_eq!(mu.mass_on(|c| c.index != 10), 0.0);
        assert_eq!(mu.mass_on(|c| c.index == 10), 1.0);
    }

    #[test]
    fn gaussian_disk_mass_matches_direct_quadrature() {
        let g = Grid2D::square(2.0, 64).unwrap();
        let var = 0.05;
        let dens = |x: f64, y: f64| (-(x * x + y * y) / (2.0 * var)).exp();
        let mu = DiscreteMeasure::from_density(&g, dens).unwrap();
        let got = mu.mass_on(|c| c.radius() < 0.3);
        // direct summation of the analytic Gaussian over cell centers
        let (mut inside, mut total) = (0.0, 0.0);
        for j in 0..64 {
            for i in 0..64 {
                let x = -2.0 + (i as f64 + 0.5) * 4.0 / 64.0;
                let y = -2.0 + (j as f64 + 0.5) * 4.0 / 64.0;
                let d = dens(x, y);
                total += d;
                if x * x + y * y < 0.09 {
                    inside += d;
                }
            }
        }
        assert_relative_eq!(got, inside / total, epsilon = 1e-12);
        // and close to the continuum value 1 - exp(-0.09 / 0.1)
        assert!((got - (1.0 - (-0.9f64).exp())).abs() < 0.05);
    }

    #[test]
    fn rejects_bad_weights() {
        let g = Grid2D::square(1.0, 8).unwrap();
        let mut w = vec![1.0 / 64.0; 64];
        w[0] = -1e-3;
        assert!(DiscreteMeasure::new(&g, w).is_err());
        assert!(DiscreteMeasure::new(&g, vec![1.0; 64]).is_err());
        assert!(DiscreteMeasure::from_unnormalized(&g, vec![0.0; 64]).is_err());
    }
}
