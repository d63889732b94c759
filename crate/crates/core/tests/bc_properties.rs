use std::f64::consts::PI;

use bcspec_core::bc::*;
use bcspec_core::linalg::Mat2;
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

fn hermitian() -> impl Strategy<Value = Mat2> {
    (-5.0..5.0, -5.0..5.0, -5.0..5.0, -5.0..5.0).prop_map(|(d0, d1, x, y): (f64, f64, f64, f64)| {
        Mat2::new(Complex64::new(d0, 0.0), Complex64::new(x, y), Complex64::new(x, -y), Complex64::new(d1, 0.0))
    })
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-3.0..3.0, -3.0..3.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn rho(max: f64) -> impl Strategy<Value = f64> {
    prop_oneof![9 => 0.01..max, 1 => Just(f64::INFINITY)]
}

/// Cross relations are self-adjoint only with equal reflectivities.
fn representable(max: f64) -> impl Strategy<Value = RepresentableFamily> {
    prop_oneof![
        (rho(max), rho(max)).prop_map(|(rho0, rho1)| RepresentableFamily::M0 { rho0, rho1 }),
        rho(max).prop_map(|r| RepresentableFamily::M1 { rho0: r, rho1: r }),
        (-PI..PI).prop_map(|eps| RepresentableFamily::PseudoPeriodic { eps }),
    ]
}

proptest! {
    #[test]
    fn cayley_round_trips(a in hermitian(), plus in any::<bool>()) {
        let branch = if plus { Branch::Plus } else { Branch::Minus };
        let back = cayley(&inverse_cayley(&HermitianBC { matrix: a, branch }), branch).unwrap();
        prop_assert!((back.matrix - a).max_abs() <= 1e-10 * (1.0 + a.max_abs()));
    }

    #[test]
    fn products_stay_unitary(u in any_unitary(), v in any_unitary()) {
        let w = u.compose(&v).unwrap();
        prop_assert!(validate_unitary(*w.matrix(), 1e-12).is_ok());
    }

    #[test]
    fn residual_is_linear(
        u in any_unitary(),
        z in proptest::array::uniform4(complex()),
        c in complex(),
    ) {
        let d = BoundaryData::new([z[0], z[1]], [z[2], z[3]]);
        let lhs = bc_residual(&u, &d.scale(c));
        let r = bc_residual(&u, &d);
        for k in 0..2 {
            prop_assert!((lhs[k] - r[k] * c).norm() <= 1e-13 * (1.0 + c.norm()) * (1.0 + r[k].norm()) * 10.0);
        }
    }

    #[test]
    fn classical_embedding_is_unitary(f in representable(1e3)) {
        let u = classical_to_quantum(&f).unwrap();
        prop_assert!(u.deviation() <= 1e-12);
    }

    #[test]
    fn embedded_points_have_zero_distance(f in representable(10.0)) {
        let u = classical_to_quantum(&f).unwrap();
        prop_assert!(manifold_distance(&u).distance <= 1e-6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn larger_budgets_never_increase_distance(u in any_unitary()) {
        let coarse = manifold_distance_with(&u, &SearchBudget::default()).distance;
        let fine = manifold_distance_with(&u, &SearchBudget::scaled(2)).distance;
        prop_assert!(fine <= coarse + 1e-9, "coarse {coarse}, fine {fine}");
    }
}
