use std::f64::consts::PI;

use bcspec_core::bc::{BoundaryUnitary, Family};
use bcspec_core::linalg::Mat2;
use bcspec_core::propagator::*;
use bcspec_core::spectral::lowest_levels;
use bcspec_core::Complex64;
use proptest::prelude::*;

fn unitary(gamma: f64, chi: f64, mu: f64, nu: f64) -> BoundaryUnitary {
    let a = Complex64::from_polar(chi.cos(), mu);
    let b = Complex64::from_polar(chi.sin(), nu);
    let m = Mat2::new(a, -b.conj(), b, a.conj()).scale(Complex64::from_polar(1.0, gamma));
    BoundaryUnitary::new(m).unwrap()
}

fn any_unitary() -> impl Strategy<Value = BoundaryUnitary> {
    (-PI..PI, 0.0..PI / 2.0, -PI..PI, -PI..PI).prop_map(|(g, c, m, n)| unitary(g, c, m, n))
}

fn image_cases() -> Vec<(Family, PathRules)> {
    vec![
        (Family::Dirichlet, PathRules::dirichlet()),
        (Family::Neumann, PathRules::neumann()),
        (Family::Periodic, PathRules::wrap(0.0)),
        (Family::PseudoPeriodic { eps: PI / 2.0 }, PathRules::wrap(PI / 2.0)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn spectral_kernels_are_hermitian(u in any_unitary(), tau in 0.02f64..1.0) {
        let k = spectral_kernel(&u, tau, 21, None).unwrap();
        let scale = 1.0 + k.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        prop_assert!(k.hermitian_defect() < 1e-12 * scale);
    }

    #[test]
    fn semigroup(u in any_unitary(), tau in 0.05f64..0.5) {
        // Deep edge states are narrower than the quadrature grid resolves.
        let ground = lowest_levels(&u, 1, 16).unwrap().levels[0].energy;
        prop_assume!(ground > -50.0);
        let k1 = spectral_kernel(&u, tau, 201, None).unwrap();
        let k2 = spectral_kernel(&u, 2.0 * tau, 201, None).unwrap();
        let composed = k1.compose(&k1).unwrap();
        let scale = k2.values.iter().map(|v| v.norm()).fold(1.0, f64::max);
        prop_assert!(kernel_distance(&composed, &k2).unwrap().sup < 1e-6 * scale);
    }

    #[test]
    fn flux_is_periodic(eps in -PI..PI, tau in 0.01f64..1.0) {
        let a = image_kernel(&Family::PseudoPeriodic { eps }, tau, 15, None).unwrap();
        let b = image_kernel(&Family::PseudoPeriodic { eps: eps + 2.0 * PI }, tau, 15, None).unwrap();
        prop_assert!(kernel_distance(&a, &b).unwrap().sup < 1e-12);
        let sa = spectral_kernel(&Family::PseudoPeriodic { eps }.unitary().unwrap(), tau, 15, None).unwrap();
        let sb = spectral_kernel(&Family::PseudoPeriodic { eps: eps + 2.0 * PI }.unitary().unwrap(), tau, 15, None).unwrap();
        prop_assert!(kernel_distance(&sa, &sb).unwrap().sup < 1e-12);
    }

    #[test]
    fn short_time_locality(x in 0.0f64..0.5) {
        let tau: f64 = 1e-3;
        let gauss = (-0.25 / (4.0 * tau)).exp();
        for (f, _) in image_cases() {
            let g = ImageGeometry::from_family(&f).unwrap();
            let v = g.value(x, x + 0.5, tau, g.images_needed(tau)).norm();
            // Two shortest paths (antipodes on the ring, or a reflecting wall
            // under x) double the free value; one path stays below 10 e^{-d²/4τ}.
            let two_paths = x < 0.02 || matches!(g, ImageGeometry::Ring { .. });
            let bound = if two_paths { 2.0 * free_kernel(0.5, tau) * (1.0 + 1e-9) } else { 10.0 * gauss };
            prop_assert!(v <= bound, "{}: {}", f.name(), v);
        }
    }
}

#[test]
fn methods_agree_across_times() {
    for tau in [0.05, 0.1, 0.5] {
        for (f, rules) in image_cases() {
            let img = image_kernel(&f, tau, 11, None).unwrap();
            let sp = spectral_kernel(&f.unitary().unwrap(), tau, 11, None).unwrap();
            let lat = path_kernel_grid(&rules, tau, 11, PathMethod::Lattice { sites: 1000 }).unwrap();
            assert!(kernel_distance(&sp, &img).unwrap().sup < 1e-8, "{} spectral at {tau}", f.name());
            assert!(kernel_distance(&lat, &img).unwrap().sup < 1e-5, "{} lattice at {tau}", f.name());
        }
    }
}

#[test]
fn monte_carlo_is_unbiased() {
    let tau = 0.1;
    let pts = [(0.2, 0.7), (0.9, 0.95)];
    for (_, rules) in image_cases().into_iter().skip(1) {
        let exact = path_kernel(&rules, tau, &pts, PathMethod::Lattice { sites: 2000 }).unwrap();
        let runs: Vec<PathEstimate> = (0..30)
            .map(|s| path_kernel(&rules, tau, &pts, PathMethod::MonteCarlo { paths: 4096, steps: 8, seed: Some(100 + s) }).unwrap())
            .collect();
        for k in 0..pts.len() {
            let mean: Complex64 = runs.iter().map(|r| r.values[k]).sum::<Complex64>() / 30.0;
            let var: f64 = runs.iter().map(|r| (r.values[k] - mean).norm_sqr()).sum::<f64>() / 29.0;
            let sem = (var / 30.0).sqrt();
            assert!((mean - exact.values[k]).norm() <= 3.0 * sem, "{:?}: {mean} vs {}", pts[k], exact.values[k]);
        }
    }
}

#[test]
fn monte_carlo_is_reproducible() {
    let m = PathMethod::MonteCarlo { paths: 10_000, steps: 6, seed: Some(42) };
    let a = path_kernel(&PathRules::dirichlet(), 0.1, &[(0.3, 0.4), (0.5, 0.5)], m).unwrap();
    let b = path_kernel(&PathRules::dirichlet(), 0.1, &[(0.3, 0.4), (0.5, 0.5)], m).unwrap();
    assert_eq!(a, b);
    let other = PathMethod::MonteCarlo { paths: 10_000, steps: 6, seed: Some(43) };
    let c = path_kernel(&PathRules::dirichlet(), 0.1, &[(0.3, 0.4), (0.5, 0.5)], other).unwrap();
    assert_ne!(a.values, c.values);
}

#[test]
fn absorbing_walls_lose_mass() {
    let est = path_kernel(&PathRules::dirichlet(), 0.1, &[(0.5, 0.5)], PathMethod::MonteCarlo { paths: 50_000, steps: 16, seed: Some(3) }).unwrap();
    // Survival of Brownian motion with diffusion 2 started mid-interval, from
    // the sine series.
    let want: f64 = (0..50)
        .map(|k| {
            let n = (2 * k + 1) as f64;
            4.0 / (n * PI) * (n * PI * 0.5).sin() * (-(n * PI).powi(2) * 0.1 * (15.0 / 16.0)).exp()
        })
        .sum();
    assert!((est.surviving_mass[0] - want).abs() < 0.01, "{} vs {want}", est.surviving_mass[0]);
}
