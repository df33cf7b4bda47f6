use std::time::Instant;

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use super::assemble::DiscreteOperator;
use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;

/// Acceptance threshold on `‖M w‖∞ / ‖M‖∞`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
/// Negative weights above this are rounding and get clipped.
pub const CLIP_TOLERANCE: f64 = -1e-12;

/// Re-pin at the heaviest cell when the pinned weight is this much lighter.
const MAX_PIN_RATIO: f64 = 1e6;
const POWER_ITERATIONS: usize = 30;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    PinnedLu,
    InversePower,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub residual: f64,
    pub relative_residual: f64,
    pub mass_defect: f64,
    pub min_weight: f64,
    pub clipped_mass: f64,
    pub method: SolveMethod,
    pub pinned_cell: usize,
    pub refinement_steps: usize,
    pub nnz: usize,
    pub max_peclet: f64,
    pub anisotropy_cap: f64,
    pub wall_time_s: f64,
}

/// Number of closed communicating classes of the jump chain encoded by the
/// positive off-diagonal entries of `op`.
pub fn closed_classes(op: &DiscreteOperator) -> usize {
    let n = op.dim();
    let mut g = DiGraph::<(), ()>::with_capacity(n, op.nnz());
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for (r, c, v) in op.entries() {
        if r != c && v > 0.0 {
            g.add_edge(nodes[c], nodes[r], ());
        }
    }
    let sccs = tarjan_scc(&g);
    let mut comp = vec![0usize; n];
    for (ci, s) in sccs.iter().enumerate() {
        for nd in s {
            comp[nd.index()] = ci;
        }
    }
    let mut leaves = vec![false; sccs.len()];
    for (r, c, v) in op.entries() {
        if r != c && v > 0.0 && comp[r] != comp[c] {
            leaves[comp[c]] = true;
        }
    }
    leaves.iter().filter(|&&out| !out).count()
}

/// Unit-mass null vector of `op`.
///
/// One redundant equation (row `p`) is replaced by `w_p = 1`, the sparse
/// system is factorized once and refined once, and the result is
/// normalized. If the residual check fails the factorization is reused as a
/// shifted inverse-power iteration.
pub fn solve_stationary(op: &DiscreteOperator) -> Result<(DiscreteMeasure, SolveReport)> {
    // the sparse factorization recurses deeply on large grids; worker
    // threads get a dedicated stack instead of the caller's
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .name("fpe-solve".into())
            .stack_size(SOLVE_STACK_BYTES)
            .spawn_scoped(s, || solve_on_current_thread(op))
            .map_err(|e| Error::Factorization(format!("cannot start solver thread: {e}")))?
            .join()
            .unwrap_or_else(|p| std::panic::resume_unwind(p))
    })
}

/// Stack of the thread running a stationary solve.
pub const SOLVE_STACK_BYTES: usize = 256 << 20;

fn solve_on_current_thread(op: &DiscreteOperator) -> Result<(DiscreteMeasure, SolveReport)> {
    let start = Instant::now();
    let classes = closed_classes(op);
    if classes != 1 {
        return Err(Error::Singular {
            closed_classes: classes,
        });
    }
    let norm = op.norm_inf();

    let (gx, gy) = (op.grid().nx() / 2, op.grid().ny() / 2);
    let mut pin = op.grid().index(gx, gy);
    let mut x = pinned_solve(op, pin)?;
    let hi = x.iter().copied().fold(0.0, f64::max);
    if !(hi.is_finite() && hi <= MAX_PIN_RATIO) {
        let cand = argmax(&x);
        if cand != pin {
            pin = cand;
            x = pinned_solve(op, pin)?;
        }
    }

    normalize(&mut x);
    let mut history = vec![rel_residual(op, &x, norm)];
    let mut method = SolveMethod::PinnedLu;
    let mut steps = 1;
    if !(history[0] <= RESIDUAL_TOLERANCE) {
        method = SolveMethod::InversePower;
        x = inverse_power(op, x, norm, &mut history)?;
        steps = history.len() - 1;
    }

    let min_weight = x.iter().copied().fold(f64::INFINITY, f64::min);
    if min_weight < CLIP_TOLERANCE {
        return Err(Error::InvalidMeasure(format!(
            "stationary vector has weight {min_weight:e} below the clip tolerance"
        )));
    }
    let clipped_mass: f64 = x.iter().filter(|&&w| w < 0.0).fold(0.0, |m, w| m - w);
    for w in &mut x {
        *w = w.max(0.0);
    }
    normalize(&mut x);
    let residual = max_abs(&op.apply(&x));
    let mass_defect = (x.iter().sum::<f64>() - 1.0).abs();
    let mu = DiscreteMeasure::new(op.grid(), x)?;
    let info = op.info();
    Ok((
        mu,
        SolveReport {
            residual,
            relative_residual: residual / norm,
            mass_defect,
            min_weight,
            clipped_mass,
            method,
            pinned_cell: pin,
            refinement_steps: steps,
            nnz: op.nnz(),
            max_peclet: info.max_peclet,
            anisotropy_cap: info.anisotropy_cap,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
    ))
}

fn pinned_matrix(op: &DiscreteOperator, pin: usize) -> Result<SparseColMat<usize, f64>> {
    let n = op.dim();
    let mut t: Vec<Triplet<usize, usize, f64>> = op
        .entries()
        .filter(|&(r, _, _)| r != pin)
        .map(|(r, c, v)| Triplet::new(r, c, v))
        .collect();
    t.push(Triplet::new(pin, pin, 1.0));
    SparseColMat::try_new_from_triplets(n, n, &t)
        .map_err(|e| Error::Factorization(format!("{e:?}")))
}

fn pinned_solve(op: &DiscreteOperator, pin: usize) -> Result<Vec<f64>> {
    let n = op.dim();
    let m = pinned_matrix(op, pin)?;
    let lu = m
        .sp_lu()
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let mut b = Mat::<f64>::zeros(n, 1);
    b[(pin, 0)] = 1.0;
    let x = lu.solve(&b);
    let mut w: Vec<f64> = (0..n).map(|k| x[(k, 0)]).collect();
    // one step of iterative refinement against the pinned system
    let mut r = op.apply(&w);
    for v in &mut r {
        *v = -*v;
    }
    r[pin] = 1.0 - w[pin];
    let rm = Mat::<f64>::from_fn(n, 1, |k, _| r[k]);
    let d = lu.solve(&rm);
    for (k, wk) in w.iter_mut().enumerate() {
        *wk += d[(k, 0)];
    }
    Ok(w)
}

/// `(M − σI) x_{k+1} = x_k` with a tiny shift; the top eigenvalue of `M` is 0.
fn inverse_power(
    op: &DiscreteOperator,
    mut x: Vec<f64>,
    norm: f64,
    history: &mut Vec<f64>,
) -> Result<Vec<f64>> {
    let n = op.dim();
    let sigma = 1e-9 * norm;
    let mut t: Vec<Triplet<usize, usize, f64>> = op
        .entries()
        .map(|(r, c, v)| Triplet::new(r, c, v))
        .collect();
    for k in 0..n {
        t.push(Triplet::new(k, k, -sigma));
    }
    let m = SparseColMat::try_new_from_triplets(n, n, &t)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let lu = m
        .sp_lu()
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    for _ in 0..POWER_ITERATIONS {
        let b = Mat::<f64>::from_fn(n, 1, |k, _| x[k]);
        let y = lu.solve(&b);
        x = (0..n).map(|k| y[(k, 0)]).collect();
        normalize(&mut x);
        let r = rel_residual(op, &x, norm);
        history.push(r);
        if r <= RESIDUAL_TOLERANCE {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence {
        history: history.clone(),
    })
}

fn normalize(x: &mut [f64]) {
    let s: f64 = x.iter().sum();
    for v in x {
        *v /= s;
    }
}

fn rel_residual(op: &DiscreteOperator, x: &[f64], norm: f64) -> f64 {
    max_abs(&op.apply(x)) / norm
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn argmax(x: &[f64]) -> usize {
    x.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Exec;
    use crate::field::{DiffusionField, Sym2};
    use crate::fpe::assemble::assemble;
    use crate::grid::Grid2D;

    #[test]
    fn laplacian_gives_uniform() {
        let g = Grid2D::square(1.0, 16).unwrap();
        let a = DiffusionField::constant(&g, Sym2::isotropic(0.5)).unwrap();
        let op = assemble(
            &|_: f64, _: f64| [0.0, 0.0],
            &a,
            &g,
            Default::default(),
            Exec::Sequential,
        )
        .unwrap();
        let (mu, rep) = solve_stationary(&op).unwrap();
        assert!(rep.residual < 1e-12);
        for w in mu.weights() {
            assert!((w - 1.0 / 256.0).abs() < 1e-14);
        }
    }

    #[test]
    fn ou_line_matches_gaussian() {
        let g = Grid2D::line(-4.0, 4.0, 400).unwrap();
        let eps = 0.1;
        let a = DiffusionField::constant(&g, Sym2::isotropic(eps / 2.0)).unwrap();
        let op = assemble(
            &|x: f64, _: f64| [-x, 0.0],
            &a,
            &g,
            Default::default(),
            Exec::Sequential,
        )
        .unwrap();
        let (mu, rep) = solve_stationary(&op).unwrap();
        assert!(rep.relative_residual <= RESIDUAL_TOLERANCE);
        let exact = DiscreteMeasure::from_density(&g, |x, _| (-x * x / eps).exp()).unwrap();
        assert!(mu.l1_distance(&exact).unwrap() < 1e-3);
    }

    #[test]
    fn disconnected_chain_is_singular() {
        let g = Grid2D::line(0.0, 1.0, 8).unwrap();
        let mut t = Vec::new();
        for (a, b) in [(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7)] {
            t.extend([(b, a, 1.0), (a, a, -1.0), (a, b, 1.0), (b, b, -1.0)]);
        }
        let op = DiscreteOperator::from_entries(&g, t);
        assert_eq!(closed_classes(&op), 2);
        assert!(matches!(
            solve_stationary(&op),
            Err(Error::Singular { closed_classes: 2 })
        ));
    }
}
