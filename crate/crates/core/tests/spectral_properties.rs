use std::f64::consts::PI;

use bcspec_core::bc::{named_family, BoundaryUnitary, FamilyParams};
use bcspec_core::linalg::Mat2;
use bcspec_core::spectral::*;
use bcspec_core::Complex64;
use proptest::prelude::*;

/// `e^{iγ} [[a, -b̄], [b, ā]]` with `a = cos χ e^{iμ}`, `b = sin χ e^{iν}`.
fn unitary(gamma: f64, chi: f64, mu: f64, nu: f64) -> BoundaryUnitary {
    let a = Complex64::from_polar(chi.cos(), mu);
    let b = Complex64::from_polar(chi.sin(), nu);
    let m = Mat2::new(a, -b.conj(), b, a.conj()).scale(Complex64::from_polar(1.0, gamma));
    BoundaryUnitary::new(m).unwrap()
}

fn any_unitary() -> impl Strategy<Value = BoundaryUnitary> {
    (-PI..PI, 0.0..PI / 2.0, -PI..PI, -PI..PI).prop_map(|(g, c, m, n)| unitary(g, c, m, n))
}

/// Unitary with eigenphases kept away from π so Robin parameters stay
/// moderate (`|tan(θ/2)| ≤ 3`).
fn moderate_unitary() -> impl Strategy<Value = BoundaryUnitary> {
    let lim = 2.0 * 3f64.atan();
    (-lim..lim, -lim..lim, -PI..PI, 0.0..PI).prop_map(|(t0, t1, phi, chi)| {
        let v0 = [Complex64::new(chi.cos(), 0.0), Complex64::from_polar(chi.sin(), phi)];
        let v1 = [-v0[1].conj(), v0[0].conj()];
        let m = bcspec_core::linalg::outer(&v0, &v0).scale(Complex64::from_polar(1.0, t0))
            + bcspec_core::linalg::outer(&v1, &v1).scale(Complex64::from_polar(1.0, t1));
        BoundaryUnitary::new(m).unwrap()
    })
}

fn trapezoid_inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    let n = u.len();
    let h = 1.0 / (n - 1) as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..n {
        let w = if j == 0 || j == n - 1 { 0.5 * h } else { h };
        acc += u[j].conj() * v[j] * w;
    }
    acc
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn at_most_two_negative_levels(u in any_unitary()) {
        let sol = eigenvalues(&SpectralProblem::new(u, 50.0).with_grid(16)).unwrap();
        let neg: usize = sol.levels.iter().filter(|l| l.energy < 0.0).map(|l| l.multiplicity as usize).sum();
        prop_assert!(neg <= 2);
        prop_assert!(sol.levels.windows(2).all(|w| w[0].energy < w[1].energy));
    }

    #[test]
    fn secular_phase_is_common(u in any_unitary()) {
        prop_assert!(SecularFunction::new(&u).reality_defect() < 1e-12);
    }

    #[test]
    fn modes_satisfy_boundary_condition_and_stokes(u in any_unitary()) {
        let sol = eigenvalues(&SpectralProblem::new(u.clone(), 400.0).with_grid(16)).unwrap();
        let modes: Vec<&Eigenmode> = sol.levels.iter().flat_map(|l| l.modes.iter()).collect();
        for m in &modes {
            prop_assert!(mode_residual(&u, m) < 1e-8, "E = {}", m.energy);
        }
        for a in &modes {
            for b in &modes {
                let da = a.boundary_data();
                let db = b.boundary_data();
                let scale = 1.0 + a.energy.abs().max(b.energy.abs()).sqrt();
                prop_assert!(stokes_boundary_form(&da, &db).norm() < 1e-8 * scale * scale);
            }
        }
    }

    #[test]
    fn low_modes_are_orthonormal(u in moderate_unitary()) {
        let sol = eigenvalues(&SpectralProblem::new(u, 120.0).with_grid(4001)).unwrap();
        let fns: Vec<&Vec<Complex64>> = sol.levels.iter().flat_map(|l| l.eigenfunctions.iter()).collect();
        for (i, a) in fns.iter().enumerate() {
            for (j, b) in fns.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((trapezoid_inner(a, b) - want).norm() < 1e-6);
            }
        }
    }

    #[test]
    fn spectrum_is_symmetric_under_reflection_and_time_reversal(u in any_unitary()) {
        let sx = Mat2::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        );
        let m = *u.matrix();
        let reflected = BoundaryUnitary::new(sx * m * sx).unwrap();
        let transposed = BoundaryUnitary::new(Mat2::new(m.get(0, 0), m.get(1, 0), m.get(0, 1), m.get(1, 1))).unwrap();
        let spec = |v: BoundaryUnitary| eigenvalues(&SpectralProblem::new(v, 300.0).with_grid(16)).unwrap().energies_with_multiplicity();
        let e0 = spec(u);
        for other in [spec(reflected), spec(transposed)] {
            prop_assert_eq!(e0.len(), other.len());
            for (a, b) in e0.iter().zip(&other) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn finite_differences_agree(u in moderate_unitary()) {
        let exact = eigenvalues(&SpectralProblem::new(u.clone(), 250.0).with_grid(16)).unwrap().energies_with_multiplicity();
        let fd = fd_spectrum(&u, 2000, exact.len()).unwrap();
        for (e, f) in exact.iter().zip(&fd.levels) {
            prop_assert!((e - f).abs() <= 1e-3 * (1.0 + e.abs()), "{} vs {}", e, f);
        }
    }

    #[test]
    fn edge_levels_deepen_as_t_shrinks(t in 0.05f64..1.0) {
        let u = named_family("dirichlet", &FamilyParams::default()).unwrap();
        let rows = edge_state_scan(&u, &[t, 0.5 * t, -0.5 * t], 1e3).unwrap();
        prop_assert!(rows[1].levels[0] < rows[0].levels[0]);
        // -t flips the Robin sign: no bound states.
        prop_assert!(rows[2].levels.is_empty());
    }
}

#[test]
fn weyl_growth() {
    let u = unitary(0.3, 0.4, 1.1, -0.2);
    let sol = eigenvalues(&SpectralProblem::new(u, (200.0 * PI).powi(2)).with_grid(16)).unwrap();
    let e = sol.energies_with_multiplicity();
    assert!(e.len() >= 195);
    let n = 180;
    let ratio = e[n] / ((n as f64).powi(2) * PI * PI);
    assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
}

#[test]
fn finite_difference_order_is_two() {
    let u = unitary(0.9, 0.6, 0.4, -1.3);
    let exact = eigenvalues(&SpectralProblem::new(u.clone(), 200.0).with_grid(16)).unwrap().energies_with_multiplicity();
    let err = |n: usize| {
        let fd = fd_spectrum(&u, n, 3).unwrap();
        (0..3).map(|k| (fd.levels[k] - exact[k]).abs()).fold(0.0, f64::max)
    };
    let (e1, e2, e3) = (err(250), err(500), err(1000));
    for p in [(e1 / e2).log2(), (e2 / e3).log2()] {
        assert!((p - 2.0).abs() < 0.1, "order {p}");
    }
}

#[test]
fn flux_family_matches_magnetic_spectrum() {
    for eps in [0.3, PI / 2.0, 2.0] {
        let u = named_family("pseudo_periodic", &FamilyParams { eps, ..Default::default() }).unwrap();
        let got = eigenvalues(&SpectralProblem::new(u, 1500.0).with_grid(16)).unwrap().energies_with_multiplicity();
        let mut want: Vec<f64> = (-10..=10).map(|n| (2.0 * PI * n as f64 + eps).powi(2)).filter(|e| *e <= 1500.0).collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-9 * w.max(1.0), "{g} vs {w}");
        }
    }
}
