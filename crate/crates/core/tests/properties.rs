use std::collections::BTreeMap;

use fplab::analysis::{bl_distance, exterior_mass};
use fplab::doc::Document;
use fplab::dynamics::{verify_lyapunov, CertificateSpec};
use fplab::fpe::{assemble, bernoulli, solve_stationary, AssembleOptions};
use fplab::scenarios::Scenario;
use fplab::sde::{occupation_measure, SamplerConfig};
use fplab::{
    DiffusionField, DiscreteMeasure, Exec, Grid2D, NullFamilySchedule, ScalarField, Sym2,
    VectorField,
};
use nalgebra::Matrix2;
use proptest::prelude::*;

fn hopf(b: f64, anisotropy: f64) -> Scenario {
    let p = BTreeMap::from([("b".to_string(), b), ("anisotropy".to_string(), anisotropy)]);
    Scenario::by_name("hopf", &p).unwrap()
}

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, n).prop_filter("positive total", |w| {
        w.iter().sum::<f64>() > 1e-3
    })
}

fn measure(g: &Grid2D, w: Vec<f64>) -> DiscreteMeasure {
    DiscreteMeasure::from_unnormalized(g, w).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cell_centres_follow_row_major_layout(nx in 8usize..40, ny in 8usize..40, i in 0usize..8, j in 0usize..8) {
        let g = Grid2D::new(-1.0, 3.0, -2.0, 2.0, nx, ny).unwrap();
        prop_assert_eq!(g.len(), nx * ny);
        let k = g.index(i, j);
        prop_assert_eq!(k, j * nx + i);
        prop_assert_eq!(g.coords(k), (i, j));
        let (x, y) = g.center(i, j);
        prop_assert!((x - (-1.0 + (i as f64 + 0.5) * 4.0 / nx as f64)).abs() < 1e-12);
        prop_assert!((y - (-2.0 + (j as f64 + 0.5) * 4.0 / ny as f64)).abs() < 1e-12);
    }

    #[test]
    fn measures_have_unit_mass_and_round_trip(w in weights(64)) {
        let g = Grid2D::square(1.0, 8).unwrap();
        let mu = measure(&g, w);
        prop_assert!((mu.mass_on(|_| true) - 1.0).abs() < 1e-12);
        let back = Document::from_json(&Document::from_measure(&mu).to_json().unwrap())
            .unwrap()
            .to_measure()
            .unwrap();
        prop_assert_eq!(back.weights(), mu.weights());
    }

    #[test]
    fn diffusion_eigenvalues_match_dense_eigensolve(
        entries in prop::collection::vec((0.01f64..2.0, -0.5f64..0.5, 0.01f64..2.0), 100)
    ) {
        let g = Grid2D::new(0.0, 1.0, 0.0, 1.0, 10, 10).unwrap();
        let vals: Vec<Sym2> = entries
            .iter()
            .map(|&(a, c, d)| {
                // shrink the coupling until the matrix is safely positive definite
                let c = c * (a * d).sqrt();
                Sym2 { a11: a, a12: c, a22: d }
            })
            .collect();
        let a = DiffusionField::from_values(&g, vals.clone()).unwrap();
        for (k, m) in vals.iter().enumerate() {
            let e = Matrix2::new(m.a11, m.a12, m.a12, m.a22).symmetric_eigen();
            let lo = e.eigenvalues.min();
            prop_assert!((a.min_eig()[k] - lo).abs() <= 1e-12 * lo.abs().max(1.0));
            let fro = (m.a11 * m.a11 + 2.0 * m.a12 * m.a12 + m.a22 * m.a22).sqrt();
            prop_assert!((a.frobenius()[k] - fro).abs() <= 1e-12 * fro);
        }
    }

    #[test]
    fn operator_conserves_mass_and_keeps_rates_nonnegative(
        b in -0.5f64..1.0,
        eps in 0.05f64..0.5,
        anisotropy in 0.3f64..1.0,
        n in 12usize..30,
    ) {
        let s = hopf(b, anisotropy);
        // small box so the coarsest grids stay below the Péclet limit
        let g = Grid2D::square(1.5, n).unwrap();
        let a = DiffusionField::constant(&g, s.diffusion(eps)).unwrap();
        let op = assemble(&s, &a, &g, AssembleOptions::default(), Exec::Sequential).unwrap();
        prop_assert!(op.max_column_sum() <= 1e-10 * op.norm_inf().max(1.0));
        prop_assert!(op.min_off_diagonal() >= 0.0);
        let (mu, report) = solve_stationary(&op).unwrap();
        prop_assert!(report.min_weight >= -1e-12);
        prop_assert!((mu.total() - 1.0).abs() < 1e-12);
        let interior_min = g
            .cells()
            .filter(|c| !g.is_boundary(c.index))
            .map(|c| mu.weights()[c.index])
            .fold(f64::INFINITY, f64::min);
        prop_assert!(interior_min > 0.0);
    }

    #[test]
    fn bl_is_a_pseudometric(a in weights(100), b in weights(100), c in weights(100)) {
        let g = Grid2D::square(1.0, 10).unwrap();
        let (x, y, z) = (measure(&g, a), measure(&g, b), measure(&g, c));
        let d = |p: &DiscreteMeasure, q: &DiscreteMeasure| bl_distance(p, q, None).unwrap().distance;
        prop_assert_eq!(d(&x, &x), 0.0);
        prop_assert_eq!(d(&x, &y), d(&y, &x));
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
        prop_assert!((0.0..=2.0).contains(&d(&x, &y)));
    }

    #[test]
    fn exterior_mass_is_nonincreasing_in_the_level(w in weights(100), r1 in 0.0f64..2.0, dr in 0.0f64..1.0) {
        let g = Grid2D::square(1.0, 10).unwrap();
        let mu = measure(&g, w);
        let u = ScalarField::sample(&g, |x, y| x * x + y * y).unwrap();
        prop_assert!(exterior_mass(&mu, &u, r1 + dr).unwrap() <= exterior_mass(&mu, &u, r1).unwrap());
    }

    #[test]
    fn bernoulli_reflection_identity(z in -50.0f64..50.0) {
        // B(−z) = B(z) + z
        prop_assert!((bernoulli(-z) - bernoulli(z) - z).abs() <= 1e-12 * z.abs().max(1.0));
        prop_assert!(bernoulli(z) > 0.0);
    }

    #[test]
    fn reversing_the_flow_swaps_certificate_kinds(b in 0.2f64..1.0, rho_m in 1.2f64..2.0) {
        let s = hopf(b, 1.0);
        let g = Grid2D::square(2.5, 40).unwrap();
        let v = VectorField::sample(&g, |x, y| fplab::Drift::eval(&s, x, y)).unwrap();
        let u = ScalarField::sample(&g, |x, y| x * x + y * y).unwrap();
        let rho_max = 6.0;
        let forward = verify_lyapunov(&u, &v, CertificateSpec::lyapunov(rho_m, 0.1).with_rho_max(rho_max));
        let backward = verify_lyapunov(&u, &v.negated(), CertificateSpec::anti(rho_m, 0.1).with_rho_max(rho_max));
        prop_assert_eq!(forward.is_ok(), backward.is_ok());
        if let (Ok(f), Ok(r)) = (forward, backward) {
            prop_assert_eq!(f.spec.gamma, r.spec.gamma);
            prop_assert_eq!(f.worst_margin, r.worst_margin);
        }
    }

    #[test]
    fn schedules_need_strictly_decreasing_eps(eps in prop::collection::vec(0.01f64..1.0, 2..6)) {
        let g = Grid2D::square(1.0, 8).unwrap();
        let ok = eps.windows(2).all(|w| w[1] < w[0]);
        prop_assert_eq!(NullFamilySchedule::isotropic(&g, &eps).is_ok(), ok);
        if let Ok(s) = NullFamilySchedule::isotropic(&g, &eps) {
            let sup: Vec<f64> = s.members().iter().map(|m| m.field.sup_norm()).collect();
            prop_assert!(sup.windows(2).all(|w| w[1] < w[0]));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn sampler_is_deterministic_across_execution_modes(seed in any::<u64>()) {
        let s = hopf(1.0, 1.0);
        let g = Grid2D::square(2.5, 20).unwrap();
        let a = DiffusionField::constant(&g, s.diffusion(0.2)).unwrap();
        let cfg = SamplerConfig::new(0.01, 5.0, 6, seed);
        let (p, _) = occupation_measure(&s, &a, &g, &cfg, Exec::Parallel).unwrap();
        let (q, _) = occupation_measure(&s, &a, &g, &cfg, Exec::Sequential).unwrap();
        prop_assert_eq!(p.weights(), q.weights());
    }
}
