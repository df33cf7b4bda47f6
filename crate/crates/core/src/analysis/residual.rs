use serde::{Deserialize, Serialize};

use super::dictionary::TestFunctionDictionary;
use crate::error::Result;
use crate::exec::Exec;
use crate::field::VectorField;
use crate::measure::DiscreteMeasure;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `r_k = |Σ V·∇h_k · w|` per dictionary function.
    pub residuals: Vec<f64>,
    pub max: f64,
    /// Mean of `r_k` weighted by `∫h_k dμ`; zero when no function sees mass.
    pub weighted_mean: f64,
}

/// How far `μ` is from annihilating `V·∇h` for each dictionary function; an
/// invariant measure of the flow gives zero.
pub fn invariance_residual(
    mu: &DiscreteMeasure,
    v: &VectorField,
    dict: &TestFunctionDictionary,
    exec: Exec,
) -> Result<ResidualReport> {
    mu.grid().same_as(v.grid())?;
    mu.grid().same_as(dict.grid())?;
    let w = mu.weights();
    let per: Vec<(f64, f64)> = exec.map(dict.functions(), |f| {
        let mut acc = 0.0;
        let mut mass = 0.0;
        for (k, g) in f.gradients().iter().enumerate() {
            let d = v.at(k);
            acc += (d[0] * g[0] + d[1] * g[1]) * w[k];
            mass += f.values()[k] * w[k];
        }
        (acc.abs(), mass)
    });
    let residuals: Vec<f64> = per.iter().map(|p| p.0).collect();
    let max = residuals.iter().copied().fold(0.0, f64::max);
    let total: f64 = per.iter().map(|p| p.1).sum();
    let weighted_mean = if total > 0.0 {
        per.iter().map(|p| p.0 * p.1).sum::<f64>() / total
    } else {
        0.0
    };
    Ok(ResidualReport {
        residuals,
        max,
        weighted_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::dictionary::TestFunction;
    use crate::grid::Grid2D;

    fn hopf(x: f64, y: f64) -> [f64; 2] {
        let r2 = x * x + y * y;
        [x - y - x * r2, x + y - y * r2]
    }

    #[test]
    fn point_mass_at_equilibrium() {
        let g = Grid2D::new(-2.25, 2.25, -2.25, 2.25, 9, 9).unwrap();
        let v = VectorField::sample(&g, hopf).unwrap();
        let d = TestFunctionDictionary::standard(&g).unwrap();
        let mu = DiscreteMeasure::point_mass(&g, g.locate(0.0, 0.0).unwrap()).unwrap();
        let r = invariance_residual(&mu, &v, &d, Exec::Parallel).unwrap();
        assert_eq!(r.max, 0.0);
    }

    #[test]
    fn circle_measure_and_radial_bump() {
        // V·∇h = h'(r)·ṙ vanishes on the cycle, so the residual shrinks with h
        let mut prev = f64::INFINITY;
        for n in [50, 100, 200] {
            let g = Grid2D::square(2.0, n).unwrap();
            let v = VectorField::sample(&g, hopf).unwrap();
            let width = 2.0 * g.hx();
            let mu = DiscreteMeasure::from_density(&g, |x, y| {
                if (x.hypot(y) - 1.0).abs() < width {
                    1.0
                } else {
                    0.0
                }
            })
            .unwrap();
            let h = TestFunction::radial_bump(&g, 1.0, 0.5);
            let d = TestFunctionDictionary::from_functions(&g, "radial", vec![h]).unwrap();
            let r = invariance_residual(&mu, &v, &d, Exec::Sequential)
                .unwrap()
                .max;
            assert!(r < prev, "n = {n}: {r} vs {prev}");
            prev = r;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn execution_modes_agree() {
        let g = Grid2D::square(2.0, 40).unwrap();
        let v = VectorField::sample(&g, hopf).unwrap();
        let d = TestFunctionDictionary::standard(&g).unwrap();
        let mu = DiscreteMeasure::from_density(&g, |x, y| (-(x * x + 2.0 * y * y)).exp()).unwrap();
        assert_eq!(
            invariance_residual(&mu, &v, &d, Exec::Sequential).unwrap(),
            invariance_residual(&mu, &v, &d, Exec::Parallel).unwrap()
        );
    }
}
