//! Algebra of quantum boundary conditions on the unit interval.
//!
//! A self-adjoint extension of `-d²/dx²` is fixed by a 2×2 unitary `U`; a
//! wave function is in its domain when its boundary data satisfy
//! `φ - iφ̇ = U(φ + iφ̇)`. The normal derivative is taken outward:
//! `φ̇ = (-ψ'(0), ψ'(1))`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{Mat2, Vec2};
use crate::par;

/// Validation tolerance for matrices built from closed forms.
pub const DEFAULT_TOL: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BcError {
    #[error("matrix is not unitary: max |M M† - I| = {deviation:e} exceeds tolerance {tol:e}")]
    NotUnitary { deviation: f64, tol: f64 },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("Cayley transform becomes singular: U has eigenvalue {eigenvalue}")]
    SingularCayley { eigenvalue: f64 },
    #[error("unknown boundary-condition family `{0}`")]
    UnknownFamily(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

impl BcError {
    pub fn kind(&self) -> &'static str {
        match self {
            BcError::NotUnitary { .. } => "NotUnitary",
            BcError::InvalidTolerance(_) => "InvalidTolerance",
            BcError::SingularCayley { .. } => "SingularCayley",
            BcError::UnknownFamily(_) => "UnknownFamily",
            BcError::InvalidParams(_) => "InvalidParams",
        }
    }
}

/// A validated 2×2 unitary labelling one self-adjoint extension.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryUnitary {
    matrix: Mat2,
    label: Option<String>,
    tolerance: f64,
}

/// Accepts `m` iff `max |m m† - I| <= tol`.
pub fn validate_unitary(m: Mat2, tol: f64) -> Result<BoundaryUnitary, BcError> {
    if !(tol > 0.0) {
        return Err(BcError::InvalidTolerance(tol));
    }
    let deviation = m.unitarity_defect();
    // NaN entries must not slip through a failed comparison.
    if !(deviation <= tol) {
        return Err(BcError::NotUnitary { deviation, tol });
    }
    Ok(BoundaryUnitary { matrix: m, label: None, tolerance: tol })
}

impl BoundaryUnitary {
    /// Validates at [`DEFAULT_TOL`].
    pub fn new(m: Mat2) -> Result<Self, BcError> {
        validate_unitary(m, DEFAULT_TOL)
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.matrix
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn deviation(&self) -> f64 {
        self.matrix.unitarity_defect()
    }

    /// Group product `self · other`, validated at the looser of the two
    /// tolerances.
    pub fn compose(&self, other: &BoundaryUnitary) -> Result<BoundaryUnitary, BcError> {
        validate_unitary(self.matrix * other.matrix, self.tolerance.max(other.tolerance))
    }

    /// `U e^{it}`.
    pub fn rotate_phase(&self, t: f64) -> BoundaryUnitary {
        let phase = Complex64::from_polar(1.0, t);
        BoundaryUnitary {
            matrix: self.matrix.scale(phase),
            label: None,
            tolerance: self.tolerance,
        }
    }

    /// Eigen-decomposition `U = Σ e^{iθ_k} v_k v_k†` with `θ_k ∈ (-π, π]`.
    pub fn eigenphases(&self) -> [(f64, Vec2); 2] {
        let (vals, vecs) = self.matrix.normal_eigen();
        [(vals[0].arg(), vecs[0]), (vals[1].arg(), vecs[1])]
    }

    /// True when `λ` is an eigenvalue within `10·tol`.
    pub fn has_eigenvalue(&self, lambda: f64) -> bool {
        let shifted = self.matrix - Mat2::scalar(Complex64::new(lambda, 0.0));
        shifted.singular_values()[0] <= 10.0 * self.tolerance.max(DEFAULT_TOL)
    }
}

/// Boundary values `φ = (ψ(0), ψ(1))` and outward derivatives
/// `φ̇ = (-ψ'(0), ψ'(1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryData {
    pub phi: Vec2,
    pub phidot: Vec2,
}

impl BoundaryData {
    pub fn new(phi: Vec2, phidot: Vec2) -> Self {
        BoundaryData { phi, phidot }
    }

    /// From endpoint values and ordinary derivatives `ψ'(0), ψ'(1)`.
    pub fn from_derivatives(psi0: Complex64, psi1: Complex64, dpsi0: Complex64, dpsi1: Complex64) -> Self {
        BoundaryData { phi: [psi0, psi1], phidot: [-dpsi0, dpsi1] }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        BoundaryData {
            phi: [self.phi[0] * c, self.phi[1] * c],
            phidot: [self.phidot[0] * c, self.phidot[1] * c],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.phi.iter().chain(self.phidot.iter()).all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// `(φ - iφ̇) - U(φ + iφ̇)`; zero iff the data lie in the domain of `Δ^U`.
pub fn bc_residual(u: &BoundaryUnitary, d: &BoundaryData) -> Vec2 {
    let minus = [d.phi[0] - I * d.phidot[0], d.phi[1] - I * d.phidot[1]];
    let plus = [d.phi[0] + I * d.phidot[0], d.phi[1] + I * d.phidot[1]];
    let up = u.matrix.mul_vec(&plus);
    [minus[0] - up[0], minus[1] - up[1]]
}

/// Which Cayley relation a Hermitian matrix encodes: `φ̇ = A₊φ` or `φ = A₋φ̇`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermitianBC {
    pub matrix: Mat2,
    pub branch: Branch,
}

/// `A₊ = -i(I-U)(I+U)⁻¹` or `A₋ = i(I+U)(I-U)⁻¹`.
pub fn cayley(u: &BoundaryUnitary, branch: Branch) -> Result<HermitianBC, BcError> {
    let id = Mat2::identity();
    let m = u.matrix;
    let (forbidden, num, den, pre) = match branch {
        Branch::Plus => (-1.0, id - m, id + m, -I),
        Branch::Minus => (1.0, id + m, id - m, I),
    };
    // The forbidden eigenvalue shows up as a (near) singular denominator.
    let smin = den.singular_values()[0];
    if smin <= 10.0 * u.tolerance.max(DEFAULT_TOL) {
        return Err(BcError::SingularCayley { eigenvalue: forbidden });
    }
    let inv = den.inverse().ok_or(BcError::SingularCayley { eigenvalue: forbidden })?;
    let mut a = (num * inv).scale(pre);
    // Hermitian up to rounding; remove the rounding.
    a = (a + a.adjoint()).scale(Complex64::new(0.5, 0.0));
    Ok(HermitianBC { matrix: a, branch })
}

/// Inverse of [`cayley`]: `U = (I - iA)(I + iA)⁻¹` on the plus branch and
/// `U = (A + i)⁻¹(A - i)` on the minus branch. Total on Hermitian matrices.
pub fn inverse_cayley(a: &HermitianBC) -> BoundaryUnitary {
    let id = Mat2::identity();
    let ia = a.matrix.scale(I);
    let u = match a.branch {
        // I ± iA is invertible for Hermitian A (eigenvalues 1 ± iλ).
        Branch::Plus => (id - ia) * (id + ia).inverse().expect("I + iA is invertible"),
        Branch::Minus => {
            let shifted = a.matrix + Mat2::scalar(I);
            shifted.inverse().expect("A + iI is invertible") * (a.matrix - Mat2::scalar(I))
        }
    };
    let scale = 1.0 + a.matrix.max_abs();
    BoundaryUnitary { matrix: u, label: None, tolerance: DEFAULT_TOL.max(4.0 * f64::EPSILON * scale * scale) }
}

/// Named boundary-condition families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Dirichlet,
    Neumann,
    Periodic,
    PseudoPeriodic { eps: f64 },
    DeltaCircle { a: f64 },
    RobinM0 { rho0: f64, rho1: f64 },
    RobinM1 { rho0: f64, rho1: f64 },
}

/// Loose parameter bag for [`named_family`]; unused fields are ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyParams {
    pub eps: f64,
    pub a: f64,
    pub rho0: f64,
    pub rho1: f64,
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams { eps: 0.0, a: 0.0, rho0: 1.0, rho1: 1.0 }
    }
}

pub const FAMILY_NAMES: [&str; 7] =
    ["dirichlet", "neumann", "periodic", "pseudo_periodic", "delta_circle", "robin_m0", "robin_m1"];

impl Family {
    pub fn parse(name: &str, p: &FamilyParams) -> Result<Family, BcError> {
        let f = match name {
            "dirichlet" => Family::Dirichlet,
            "neumann" => Family::Neumann,
            "periodic" => Family::Periodic,
            "pseudo_periodic" => Family::PseudoPeriodic { eps: p.eps },
            "delta_circle" => Family::DeltaCircle { a: p.a },
            "robin_m0" => Family::RobinM0 { rho0: p.rho0, rho1: p.rho1 },
            "robin_m1" => Family::RobinM1 { rho0: p.rho0, rho1: p.rho1 },
            other => return Err(BcError::UnknownFamily(other.to_string())),
        };
        Ok(f)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Family::Dirichlet => "dirichlet",
            Family::Neumann => "neumann",
            Family::Periodic => "periodic",
            Family::PseudoPeriodic { .. } => "pseudo_periodic",
            Family::DeltaCircle { .. } => "delta_circle",
            Family::RobinM0 { .. } => "robin_m0",
            Family::RobinM1 { .. } => "robin_m1",
        }
    }

    /// Parameters in a fixed order, for reports.
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Family::Dirichlet | Family::Neumann | Family::Periodic => Vec::new(),
            Family::PseudoPeriodic { eps } => alloc::vec![("eps", eps)],
            Family::DeltaCircle { a } => alloc::vec![("a", a)],
            Family::RobinM0 { rho0, rho1 } | Family::RobinM1 { rho0, rho1 } => {
                alloc::vec![("rho0", rho0), ("rho1", rho1)]
            }
        }
    }

    pub fn unitary(&self) -> Result<BoundaryUnitary, BcError> {
        let z = Complex64::new(0.0, 0.0);
        let m = match *self {
            Family::Dirichlet => -Mat2::identity(),
            Family::Neumann => Mat2::identity(),
            Family::Periodic => Mat2::new(z, ONE, ONE, z),
            Family::PseudoPeriodic { eps } => {
                check_finite("eps", eps)?;
                Mat2::new(z, Complex64::from_polar(1.0, -eps), Complex64::from_polar(1.0, eps), z)
            }
            Family::DeltaCircle { a } => {
                check_finite("a", a)?;
                let ia = Complex64::new(0.0, a);
                let two = Complex64::new(2.0, 0.0);
                Mat2::new(ia, two, two, ia).scale((two - ia).inv())
            }
            Family::RobinM0 { rho0, rho1 } => {
                return classical_to_quantum(&RepresentableFamily::M0 { rho0, rho1 })
                    .map(|u| u.with_label(self.name()))
            }
            Family::RobinM1 { rho0, rho1 } => {
                return classical_to_quantum(&RepresentableFamily::M1 { rho0, rho1 })
                    .map(|u| u.with_label(self.name()))
            }
        };
        Ok(validate_unitary(m, DEFAULT_TOL)?.with_label(self.name()))
    }
}

fn check_finite(name: &str, v: f64) -> Result<(), BcError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(BcError::InvalidParams(alloc::format!("{name} must be finite, got {v}")))
    }
}

/// Looks a family up by its literal name and builds its unitary.
pub fn named_family(name: &str, params: &FamilyParams) -> Result<BoundaryUnitary, BcError> {
    Family::parse(name, params)?.unitary()
}

/// Where a particle re-emerges after touching the boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Isometry {
    Identity,
    /// Interval only: 0 ↔ 1.
    Swap,
    /// Disk only: rotation of the boundary circle by the given angle.
    Rotation(f64),
}

/// Normal-momentum scaling at the boundary; `f64::INFINITY` is total
/// absorption.
#[derive(Debug, Clone, PartialEq)]
pub enum Reflectivity {
    Uniform(f64),
    /// Interval endpoints 0 and 1.
    Endpoints([f64; 2]),
    /// Rectangle sides: left, right, bottom, top.
    Sides([f64; 4]),
}

impl Reflectivity {
    pub fn values(&self) -> &[f64] {
        match self {
            Reflectivity::Uniform(r) => core::slice::from_ref(r),
            Reflectivity::Endpoints(r) => r,
            Reflectivity::Sides(r) => r,
        }
    }

    /// Value at boundary piece `index` (endpoint or side); uniform ignores it.
    pub fn at(&self, index: usize) -> f64 {
        match self {
            Reflectivity::Uniform(r) => *r,
            Reflectivity::Endpoints(r) => r[index.min(1)],
            Reflectivity::Sides(r) => r[index.min(3)],
        }
    }
}

/// Classical boundary condition: isometry `α` and reflectivity density `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalBC {
    pub alpha: Isometry,
    pub rho: Reflectivity,
}

impl ClassicalBC {
    pub fn new(alpha: Isometry, rho: Reflectivity) -> Result<Self, BcError> {
        for &r in rho.values() {
            if !(r > 0.0) {
                return Err(BcError::InvalidParams(alloc::format!(
                    "reflectivity must be positive or +inf, got {r}"
                )));
            }
        }
        if let Isometry::Rotation(a) = alpha {
            check_finite("rotation angle", a)?;
        }
        Ok(ClassicalBC { alpha, rho })
    }

    pub fn elastic(alpha: Isometry) -> Self {
        ClassicalBC { alpha, rho: Reflectivity::Uniform(1.0) }
    }
}

/// Families of quantum conditions reachable from classical `(α, ρ)` data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RepresentableFamily {
    /// Local Robin relations `φ̇(j) = (1-ρ_j) φ(j)` (α = identity).
    M0 { rho0: f64, rho1: f64 },
    /// Cross relations `φ̇(0) = (1-ρ₁)φ(1)`, `φ̇(1) = (1-ρ₀)φ(0)` (α = swap).
    M1 { rho0: f64, rho1: f64 },
    /// Circle gluing threaded by flux `eps`.
    PseudoPeriodic { eps: f64 },
}

impl RepresentableFamily {
    pub fn name(&self) -> &'static str {
        match self {
            RepresentableFamily::M0 { .. } => "M0",
            RepresentableFamily::M1 { .. } => "M1",
            RepresentableFamily::PseudoPeriodic { .. } => "pseudo_periodic",
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            RepresentableFamily::M0 { rho0, rho1 } | RepresentableFamily::M1 { rho0, rho1 } => {
                alloc::vec![("rho0", rho0), ("rho1", rho1)]
            }
            RepresentableFamily::PseudoPeriodic { eps } => alloc::vec![("eps", eps)],
        }
    }
}

impl fmt::Display for RepresentableFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name())?;
        for (i, (k, v)) in self.params().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        write!(f, ")")
    }
}

fn check_rho(name: &str, r: f64) -> Result<(), BcError> {
    if r > 0.0 {
        Ok(())
    } else {
        Err(BcError::InvalidParams(alloc::format!("{name} must be positive or +inf, got {r}")))
    }
}

/// `e^{iφ}` for the scalar Robin relation `φ̇ = (1-ρ)φ`; `ρ = ∞` is the
/// Dirichlet limit `-1`.
fn robin_phase(rho: f64) -> Complex64 {
    if rho.is_infinite() {
        return -ONE;
    }
    let b = 1.0 - rho;
    (ONE - I * b) / (ONE + I * b)
}

/// Embeds a classical family into U(2).
pub fn classical_to_quantum(f: &RepresentableFamily) -> Result<BoundaryUnitary, BcError> {
    match *f {
        RepresentableFamily::M0 { rho0, rho1 } => {
            check_rho("rho0", rho0)?;
            check_rho("rho1", rho1)?;
            let m = if rho0.is_finite() && rho1.is_finite() {
                let a = Mat2::diag(Complex64::new(1.0 - rho0, 0.0), Complex64::new(1.0 - rho1, 0.0));
                *inverse_cayley(&HermitianBC { matrix: a, branch: Branch::Plus }).matrix()
            } else {
                Mat2::diag(robin_phase(rho0), robin_phase(rho1))
            };
            validate_unitary(m, DEFAULT_TOL)
        }
        RepresentableFamily::M1 { rho0, rho1 } => {
            check_rho("rho0", rho0)?;
            check_rho("rho1", rho1)?;
            if rho0 != rho1 {
                return Err(BcError::InvalidParams(alloc::format!(
                    "cross relation antidiag(1-rho1, 1-rho0) is self-adjoint only for rho0 = rho1 (got {rho0}, {rho1})"
                )));
            }
            let m = if rho0.is_infinite() {
                -Mat2::identity()
            } else {
                let b = Complex64::new(1.0 - rho0, 0.0);
                let z = Complex64::new(0.0, 0.0);
                let a = Mat2::new(z, b, b, z);
                *inverse_cayley(&HermitianBC { matrix: a, branch: Branch::Plus }).matrix()
            };
            validate_unitary(m, DEFAULT_TOL)
        }
        RepresentableFamily::PseudoPeriodic { eps } => {
            Family::PseudoPeriodic { eps }.unitary().map(|u| BoundaryUnitary { label: None, ..u })
        }
    }
}

/// Grid and refinement settings for [`manifold_distance_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBudget {
    /// Finite ρ grid points in (0, rho_max]; the ∞ point is added on top.
    pub rho_points: usize,
    pub rho_max: f64,
    pub eps_points: usize,
    /// Coordinate-descent stops when the step falls below this fraction of
    /// the parameter range.
    pub rel_step: f64,
    /// Grid minima refined per branch.
    pub starts: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { rho_points: 100, rho_max: 10.0, eps_points: 256, rel_step: 1e-8, starts: 3 }
    }
}

impl SearchBudget {
    /// Budget with every grid refined by an integer factor (grids stay nested).
    pub fn scaled(factor: usize) -> Self {
        let d = SearchBudget::default();
        SearchBudget { rho_points: d.rho_points * factor, eps_points: d.eps_points * factor, ..d }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldDistance {
    pub distance: f64,
    pub argmin: RepresentableFamily,
}

/// Frobenius distance from `u` to the classically representable set.
pub fn manifold_distance(u: &BoundaryUnitary) -> ManifoldDistance {
    manifold_distance_with(u, &SearchBudget::default())
}

// Each branch is searched in an angle variable in which the family is a
// smooth closed curve/torus patch, so the ρ = ∞ boundary is an ordinary point:
//   M0: diag(e^{iφ0}, e^{iφ1}), ρ = 1 + tan(φ/2), φ ∈ (-π/2, π]
//   M1: exp(-2iψ σx),           ρ = 1 - tan ψ,    ψ ∈ [-π/2, π/4)
//   pseudo-periodic: ε ∈ [0, 2π)
pub(crate) const M0_LO: f64 = -FRAC_PI_2;
pub(crate) const M0_HI: f64 = PI;
pub(crate) const M1_LO: f64 = -FRAC_PI_2;
pub(crate) const M1_HI: f64 = FRAC_PI_4;

pub(crate) fn m0_angle_to_rho(phi: f64) -> f64 {
    if phi >= PI - 1e-15 {
        f64::INFINITY
    } else {
        (1.0 + (0.5 * phi).tan()).max(f64::MIN_POSITIVE)
    }
}

fn rho_to_m0_angle(rho: f64) -> f64 {
    if rho.is_infinite() {
        PI
    } else {
        2.0 * (rho - 1.0).atan()
    }
}

pub(crate) fn m1_angle_to_rho(psi: f64) -> f64 {
    if psi <= -FRAC_PI_2 + 1e-15 {
        f64::INFINITY
    } else {
        (1.0 - psi.tan()).max(f64::MIN_POSITIVE)
    }
}

fn rho_to_m1_angle(rho: f64) -> f64 {
    if rho.is_infinite() {
        -FRAC_PI_2
    } else {
        (1.0 - rho).atan()
    }
}

pub(crate) fn m0_matrix(phi0: f64, phi1: f64) -> Mat2 {
    Mat2::diag(Complex64::from_polar(1.0, phi0), Complex64::from_polar(1.0, phi1))
}

pub(crate) fn m1_matrix(psi: f64) -> Mat2 {
    let c = Complex64::new((2.0 * psi).cos(), 0.0);
    let s = Complex64::new(0.0, -(2.0 * psi).sin());
    Mat2::new(c, s, s, c)
}

fn pp_matrix(eps: f64) -> Mat2 {
    let z = Complex64::new(0.0, 0.0);
    Mat2::new(z, Complex64::from_polar(1.0, -eps), Complex64::from_polar(1.0, eps), z)
}

/// Coordinate descent with step halving inside a box. Returns the refined
/// point and its objective value.
pub(crate) fn coordinate_descent<F: Fn(&[f64]) -> f64>(
    f: F,
    start: &[f64],
    lo: &[f64],
    hi: &[f64],
    rel_step: f64,
) -> (Vec<f64>, f64) {
    let mut x: Vec<f64> = start.to_vec();
    let mut fx = f(&x);
    let mut steps: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.05 * (b - a)).collect();
    let min_steps: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| rel_step * (b - a)).collect();
    let mut guard = 0;
    while steps.iter().zip(&min_steps).any(|(s, m)| s > m) && guard < 100_000 {
        guard += 1;
        for d in 0..x.len() {
            if steps[d] <= min_steps[d] {
                continue;
            }
            let mut improved = false;
            for dir in [1.0, -1.0] {
                let mut trial = x.clone();
                trial[d] = (x[d] + dir * steps[d]).clamp(lo[d], hi[d]);
                if trial[d] == x[d] {
                    continue;
                }
                let ft = f(&trial);
                if ft < fx {
                    x = trial;
                    fx = ft;
                    improved = true;
                    break;
                }
            }
            if !improved {
                steps[d] *= 0.5;
            }
        }
    }
    (x, fx)
}

/// Frobenius-distance minimisation over M0, M1 (ρ₀ = ρ₁) and the
/// pseudo-periodic circle: dense grid scan, then coordinate descent from the
/// best few grid points of each branch.
pub fn manifold_distance_with(u: &BoundaryUnitary, budget: &SearchBudget) -> ManifoldDistance {
    let target = *u.matrix();
    let dist = |m: Mat2| (target - m).frobenius_norm();

    // ρ grid: rho_max·j/n for j = 1..n, plus ∞.
    let n = budget.rho_points.max(1);
    let rhos: Vec<f64> = (1..=n)
        .map(|j| budget.rho_max * j as f64 / n as f64)
        .chain(core::iter::once(f64::INFINITY))
        .collect();
    let m0_angles: Vec<f64> = rhos.iter().map(|&r| rho_to_m0_angle(r)).collect();
    let m1_angles: Vec<f64> = rhos.iter().map(|&r| rho_to_m1_angle(r)).collect();
    let nr = rhos.len();

    // M0 grid, flattened and evaluated in index order.
    let m0_vals = par::map_indexed(nr * nr, |idx| {
        let (i, j) = (idx / nr, idx % nr);
        dist(m0_matrix(m0_angles[i], m0_angles[j]))
    });
    let m1_vals: Vec<f64> = m1_angles.iter().map(|&p| dist(m1_matrix(p))).collect();
    let ne = budget.eps_points.max(1);
    let eps_grid: Vec<f64> = (0..ne).map(|k| TAU * k as f64 / ne as f64).collect();
    let pp_vals: Vec<f64> = eps_grid.iter().map(|&e| dist(pp_matrix(e))).collect();

    let starts = budget.starts.max(1);
    let mut best: Option<ManifoldDistance> = None;
    let mut consider = |d: f64, fam: RepresentableFamily| match best {
        Some(b) if b.distance <= d => {}
        _ => best = Some(ManifoldDistance { distance: d, argmin: fam }),
    };

    for idx in smallest_indices(&m0_vals, starts) {
        let (i, j) = (idx / nr, idx % nr);
        consider(m0_vals[idx], RepresentableFamily::M0 { rho0: rhos[i], rho1: rhos[j] });
        let (x, fx) = coordinate_descent(
            |p| dist(m0_matrix(p[0], p[1])),
            &[m0_angles[i], m0_angles[j]],
            &[M0_LO, M0_LO],
            &[M0_HI, M0_HI],
            budget.rel_step,
        );
        consider(fx, RepresentableFamily::M0 { rho0: m0_angle_to_rho(x[0]), rho1: m0_angle_to_rho(x[1]) });
    }
    for idx in smallest_indices(&m1_vals, starts) {
        consider(m1_vals[idx], RepresentableFamily::M1 { rho0: rhos[idx], rho1: rhos[idx] });
        let (x, fx) =
            coordinate_descent(|p| dist(m1_matrix(p[0])), &[m1_angles[idx]], &[M1_LO], &[M1_HI], budget.rel_step);
        let r = m1_angle_to_rho(x[0]);
        consider(fx, RepresentableFamily::M1 { rho0: r, rho1: r });
    }
    for idx in smallest_indices(&pp_vals, starts) {
        consider(pp_vals[idx], RepresentableFamily::PseudoPeriodic { eps: eps_grid[idx] });
        // Search a window one grid cell wide on either side, unwrapped.
        let cell = TAU / ne as f64;
        let (x, fx) = coordinate_descent(
            |p| dist(pp_matrix(p[0])),
            &[eps_grid[idx]],
            &[eps_grid[idx] - cell],
            &[eps_grid[idx] + cell],
            budget.rel_step,
        );
        consider(fx, RepresentableFamily::PseudoPeriodic { eps: x[0] - TAU * (x[0] / TAU).floor() });
    }
    best.expect("non-empty search grid")
}

/// Indices of the `k` smallest values, ties broken by index.
pub(crate) fn smallest_indices(vals: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}
