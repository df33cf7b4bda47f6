//! Solver and analysis output against references computed independently here.

use std::collections::BTreeMap;

use fplab::analysis::{invariance_residual, TestFunction, TestFunctionDictionary};
use fplab::fpe::{assemble, solve_stationary, AssembleOptions};
use fplab::scenarios::Scenario;
use fplab::{DiffusionField, DiscreteMeasure, Drift, Exec, Grid2D, VectorField};
use nalgebra::DMatrix;

fn scenario(name: &str, params: &[(&str, f64)]) -> Scenario {
    let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    Scenario::by_name(name, &p).unwrap()
}

fn solve(s: &Scenario, g: &Grid2D, eps: f64) -> DiscreteMeasure {
    let a = DiffusionField::constant(g, s.diffusion(eps)).unwrap();
    let op = assemble(s, &a, g, AssembleOptions::default(), Exec::Parallel).unwrap();
    solve_stationary(&op).unwrap().0
}

/// Three-point Gauss-Legendre rule on `[a, b]`.
fn gauss3(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let x = (0.6f64).sqrt();
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    h * (5.0 * f(m - h * x) + 8.0 * f(m) + 5.0 * f(m + h * x)) / 9.0
}

/// Normalized cell integrals of an unnormalized density, tensor Gauss rule per cell.
fn cell_masses(g: &Grid2D, density: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let (hx, hy) = (g.hx(), g.hy());
    let w: Vec<f64> = g
        .cells()
        .map(|c| {
            gauss3(c.x - hx / 2.0, c.x + hx / 2.0, |x| {
                gauss3(c.y - hy / 2.0, c.y + hy / 2.0, |y| density(x, y))
            })
        })
        .collect();
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

fn l1(mu: &DiscreteMeasure, exact: &[f64]) -> f64 {
    mu.weights().iter().zip(exact).map(|(a, b)| (a - b).abs()).sum()
}

#[test]
fn exponential_fitting_is_exact_for_linear_drift_in_1d() {
    // with V = −x sampled at the face x_f, the flux balance gives
    // w[i+1]/w[i] = exp(−x_f·h/a), which is also the ratio of exp(−x²/(2a))
    let s = scenario("ou", &[]);
    let g = Grid2D::line(-4.0, 4.0, 400).unwrap();
    for eps in [0.5, 0.1] {
        let a = eps / 2.0;
        let mu = solve(&s, &g, eps);
        let w = mu.weights();
        let h = g.hx();
        for i in 0..g.nx() - 1 {
            // tails below the solve's absolute accuracy carry no ratio information
            if w[i] < 1e-8 || w[i + 1] < 1e-8 {
                continue;
            }
            let xf = g.center(i, 0).0 + h / 2.0;
            let want = (-xf * h / a).exp();
            let got = w[i + 1] / w[i];
            assert!(
                (got / want - 1.0).abs() < 1e-9,
                "eps = {eps}, face {i}: {got} vs {want}"
            );
        }
    }
}

#[test]
fn nonreversible_null_vector_matches_dense_svd() {
    let s = scenario("hopf", &[("b", 1.0), ("anisotropy", 0.6)]);
    let g = Grid2D::square(2.0, 16).unwrap();
    let a = DiffusionField::constant(&g, s.diffusion(0.3)).unwrap();
    let op = assemble(&s, &a, &g, AssembleOptions::default(), Exec::Sequential).unwrap();
    let (mu, _) = solve_stationary(&op).unwrap();
    let dense = op.to_dense();
    let n = dense.len();
    let svd = DMatrix::from_fn(n, n, |i, j| dense[i][j]).svd(false, true);
    let (k, sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .unwrap();
    assert!(*sigma < 1e-10, "operator has no null vector: {sigma}");
    let v: Vec<f64> = svd.v_t.unwrap().row(k).iter().copied().collect();
    let t: f64 = v.iter().sum();
    for (x, y) in mu.weights().iter().zip(&v) {
        assert!((x - y / t).abs() < 1e-10, "{x} vs {}", y / t);
    }
}

#[test]
fn isotropic_hopf_density_is_radial_gibbs() {
    // the rotation is divergence free and orthogonal to the radial gradient,
    // so A = εI leaves exp((b r²/2 − r⁴/4)/ε) stationary
    let (b, eps) = (1.0, 0.2);
    let s = scenario("hopf", &[("b", b)]);
    let g = Grid2D::square(2.5, 160).unwrap();
    let mu = solve(&s, &g, eps);
    let exact = cell_masses(&g, |x, y| {
        let r2 = x * x + y * y;
        ((b * r2 / 2.0 - r2 * r2 / 4.0 - 0.25) / eps).exp()
    });
    let e = l1(&mu, &exact);
    assert!(e < 1e-2, "L1 = {e}");
}

#[test]
fn gibbs_error_converges_at_first_order_or_better() {
    let s = scenario("gibbs-quadratic", &[]);
    let eps = 0.2;
    let errors: Vec<f64> = [20, 40, 80]
        .iter()
        .map(|&n| {
            let g = Grid2D::square(2.5, n).unwrap();
            let exact = cell_masses(&g, |x, y| (-(x * x + y * y) / (2.0 * eps)).exp());
            l1(&solve(&s, &g, eps), &exact)
        })
        .collect();
    for w in errors.windows(2) {
        assert!(w[0] / w[1] >= 2.0, "{errors:?}");
    }
}

#[test]
fn ou_residual_is_bounded_by_the_diffusion_term() {
    // stationarity gives ∫V·h′ dμ = −(ε/2)∫h″ dμ for every test function
    let s = scenario("ou", &[]);
    let g = s.default_grid().unwrap();
    let v = VectorField::sample(&g, |x, y| s.eval(x, y)).unwrap();
    let dict = TestFunctionDictionary::standard(&g).unwrap();
    for eps in [0.2, 0.05] {
        let mu = solve(&s, &g, eps);
        let res = invariance_residual(&mu, &v, &dict, Exec::Sequential).unwrap();
        for (f, r) in dict.functions().iter().zip(&res.residuals) {
            let lap = f.laplacians().iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let mean_lap: f64 = f
                .laplacians()
                .iter()
                .zip(mu.weights())
                .map(|(l, w)| l * w)
                .sum();
            assert!(*r <= 0.5 * eps * lap, "{r} > {}", 0.5 * eps * lap);
            assert!(
                (r - 0.5 * eps * mean_lap.abs()).abs() <= 1e-3 * lap,
                "{r} vs {}",
                0.5 * eps * mean_lap.abs()
            );
        }
    }
}

#[test]
fn circle_measure_residual_vanishes_under_refinement() {
    // a radial bump sees only the radial speed r(b − r²), zero on r = √b
    let s = scenario("hopf", &[("b", 1.0)]);
    let residuals: Vec<f64> = [50, 100, 200]
        .iter()
        .map(|&n| {
            let g = Grid2D::square(2.5, n).unwrap();
            let v = VectorField::sample(&g, |x, y| s.eval(x, y)).unwrap();
            let bump = TestFunction::radial_bump(&g, 0.8, 0.5);
            let dict = TestFunctionDictionary::from_functions(&g, "radial", vec![bump]).unwrap();
            let haar = s.reference_measure(&g, 0.0).unwrap();
            invariance_residual(&haar, &v, &dict, Exec::Sequential)
                .unwrap()
                .max
        })
        .collect();
    assert!(
        residuals.windows(2).all(|w| w[1] < 0.75 * w[0]),
        "{residuals:?}"
    );
    assert!(residuals[2] < 0.02, "{residuals:?}");
}
