//! Null families: diffusion fields indexed by a strictly decreasing `ε`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DiffusionField, Sym2};
use crate::grid::Grid2D;

/// How the truncation boundary stands in for invariance of the domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InvarianceMode {
    #[default]
    Reflecting,
    VanishingAtBoundary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyMember {
    pub eps: f64,
    pub field: DiffusionField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NullFamilySchedule {
    members: Vec<FamilyMember>,
    invariance_mode: InvarianceMode,
    is_bounded: bool,
    normality: Option<f64>,
}

impl NullFamilySchedule {
    /// Validates labels (strictly decreasing, positive) and a shared grid, and
    /// rejects families whose sup-norm does not decrease.
    pub fn new(members: Vec<FamilyMember>, invariance_mode: InvarianceMode) -> Result<Self> {
        check_eps(members.iter().map(|m| m.eps))?;
        if let Some(first) = members.first() {
            for m in &members[1..] {
                m.field.grid().same_as(first.field.grid())?;
            }
        }
        let norms: Vec<f64> = members.iter().map(|m| m.field.sup_norm()).collect();
        if norms.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidSchedule(
                "sup-norm of the diffusion fields must decrease along the schedule".into(),
            ));
        }
        Ok(NullFamilySchedule {
            members,
            invariance_mode,
            is_bounded: norms.windows(2).all(|w| w[1] < w[0]),
            normality: None,
        })
    }

    /// `A_k = ε_k · base(x)`.
    pub fn scaled(
        grid: &Grid2D,
        eps: &[f64],
        base: impl Fn(f64, f64) -> Sym2,
        invariance_mode: InvarianceMode,
    ) -> Result<Self> {
        check_eps(eps.iter().copied())?;
        let base = DiffusionField::sample(grid, base)?;
        let members = eps
            .iter()
            .map(|&e| {
                Ok(FamilyMember {
                    eps: e,
                    field: base.scaled(e)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(members, invariance_mode)
    }

    /// `A_k = ε_k · I`.
    pub fn isotropic(grid: &Grid2D, eps: &[f64]) -> Result<Self> {
        Self::scaled(
            grid,
            eps,
            |_, _| Sym2::isotropic(1.0),
            InvarianceMode::Reflecting,
        )
    }

    /// Computes and records `max_k [Λ_k(Ω) / λ_k(Ω)]` over `region`.
    pub fn check_normality(&mut self, region: impl Fn(usize) -> bool) -> f64 {
        let worst = self
            .members
            .iter()
            .filter_map(|m| m.field.normality_ratio(&region))
            .fold(0.0, f64::max);
        self.normality = Some(worst);
        worst
    }

    pub fn is_normal(&self, bound: f64) -> bool {
        self.normality.is_some_and(|r| r <= bound)
    }

    pub fn normality_ratio(&self) -> Option<f64> {
        self.normality
    }

    pub fn members(&self) -> &[FamilyMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn eps(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.eps).collect()
    }

    pub fn is_bounded(&self) -> bool {
        self.is_bounded
    }

    pub fn invariance_mode(&self) -> InvarianceMode {
        self.invariance_mode
    }

    pub fn grid(&self) -> Option<&Grid2D> {
        self.members.first().map(|m| m.field.grid())
    }
}

pub fn check_eps(eps: impl Iterator<Item = f64>) -> Result<()> {
    let eps: Vec<f64> = eps.collect();
    if eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::InvalidSchedule("eps labels must be positive".into()));
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidSchedule(
            "eps labels must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn isotropic_family_flags() {
        let g = Grid2D::square(1.0, 8).unwrap();
        let mut s = NullFamilySchedule::isotropic(&g, &[0.2, 0.1, 0.05]).unwrap();
        assert!(s.is_bounded());
        let r = s.check_normality(|_| true);
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        assert!(s.is_normal(2.0));
        assert!(!s.is_normal(1.2));
    }

    #[test]
    fn rejects_non_decreasing() {
        let g = Grid2D::square(1.0, 8).unwrap();
        assert!(NullFamilySchedule::isotropic(&g, &[0.1, 0.2]).is_err());
        assert!(NullFamilySchedule::isotropic(&g, &[0.1, 0.1]).is_err());
        assert!(NullFamilySchedule::isotropic(&g, &[0.1, -0.1]).is_err());
        assert!(NullFamilySchedule::isotropic(&g, &[]).unwrap().is_empty());
    }
}
