use serde::{Deserialize, Serialize};

use crate::dynamics::LyapunovCertificate;
use crate::error::Result;
use crate::field::{ScalarField, VectorField};
use crate::measure::DiscreteMeasure;

/// Default limit on the mass away from the zero set at the smallest `ε`.
pub const DEFAULT_LIMIT_MASS: f64 = 0.02;

/// `rows[k][j] = μ_k({U ≥ ρ_j})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightnessProfile {
    pub rhos: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl TightnessProfile {
    /// Smallest mesh level beyond which every measure has less than `delta` outside.
    pub fn rho_for(&self, delta: f64) -> Option<f64> {
        self.rhos
            .iter()
            .enumerate()
            .find(|&(j, _)| self.rows.iter().all(|r| r[j] < delta))
            .map(|(_, &rho)| rho)
    }

    /// Every `δ` in `deltas` is met by some mesh level.
    pub fn is_tight(&self, deltas: &[f64]) -> bool {
        deltas.iter().all(|&d| self.rho_for(d).is_some())
    }

    /// Column `j` as a series over the measures.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }
}

/// Exterior masses of each measure on the level mesh `rhos`.
pub fn tightness_profile(
    measures: &[&DiscreteMeasure],
    u: &ScalarField,
    rhos: &[f64],
) -> Result<TightnessProfile> {
    let mut rows = Vec::with_capacity(measures.len());
    for mu in measures {
        mu.grid().same_as(u.grid())?;
        rows.push(
            rhos.iter()
                .map(|&rho| mu.mass_on(|c| u.at(c.index) >= rho))
                .collect(),
        );
    }
    Ok(TightnessProfile {
        rhos: rhos.to_vec(),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportVerdict {
    /// `‖∇(V·∇U)‖∞·(hx + hy)` over the certificate's check region.
    pub tolerance: f64,
    /// `μ({|V·∇U| > tol})`.
    pub offending_mass: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Mass of `μ` away from the zero set `{V·∇U = 0}` of an entire weak
/// certificate, up to the grid tolerance.
pub fn support_in_zero_set(
    mu: &DiscreteMeasure,
    v: &VectorField,
    cert: &LyapunovCertificate,
    threshold: f64,
) -> Result<SupportVerdict> {
    let u = cert.u();
    mu.grid().same_as(u.grid())?;
    v.grid().same_as(u.grid())?;
    let g = u.grid();
    let lie: Vec<f64> = (0..g.len())
        .map(|k| {
            let d = v.at(k);
            let gr = u.gradient_at(k);
            d[0] * gr[0] + d[1] * gr[1]
        })
        .collect();
    let lie = ScalarField::from_values(g, lie)?;
    let checked = cert.margins();
    let slope = (0..g.len())
        .filter(|&k| checked[k].is_some())
        .map(|k| {
            let d = lie.gradient_at(k);
            d[0].hypot(d[1])
        })
        .fold(0.0, f64::max);
    let tolerance = slope * g.spacing_sum();
    let offending_mass = mu.mass_on(|c| lie.at(c.index).abs() > tolerance);
    Ok(SupportVerdict {
        tolerance,
        offending_mass,
        threshold,
        pass: offending_mass < threshold,
    })
}
