//! Spectrum of `H = -d²/dx²` on [0, 1] under an arbitrary boundary unitary.
//!
//! Solutions of `-ψ'' = Eψ` are spanned by `c(x) = cos(√E x)` and
//! `s(x) = sin(√E x)/√E`, both entire in `E`. Expanding the 2×2 secular
//! determinant `det[(I-U)Φ - i(I+U)Φ̇]` by Cauchy–Binet gives
//!
//! ```text
//! D(E) = q₀ c(1) + (q₁ - E q₂) s(1) - q₃
//! ```
//!
//! with `q` built from the 2×2 minors of `[I-U, -i(I+U)]`. Self-adjointness
//! makes all four `q` share one complex phase, so after removing it `D` is a
//! real entire function of `E` and its zeros can be bracketed by sign.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::bc::{bc_residual, BoundaryData, BoundaryUnitary};
use crate::linalg::{Mat2, Vec2};
use crate::quad;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Smallest/largest singular value threshold for rank decisions at a root.
pub const RANK_TOL: f64 = 1e-8;

/// Default negative-energy search bound: edge states down to `E = -10⁶`.
pub const DEFAULT_KAPPA_MAX: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("invalid spectral problem: {0}")]
    InvalidProblem(String),
    #[error("search budget exceeded; energies in [{unswept_from}, {unswept_to}] were not swept")]
    SearchBudgetExceeded { partial: EigenSolution, unswept_from: f64, unswept_to: f64 },
    #[error("E = {energy} is not an eigenvalue (smallest secular singular value {sigma_min:e})")]
    NotAnEigenvalue { energy: f64, sigma_min: f64 },
    #[error("finite-difference assembly is not Hermitian (defect {defect:e})")]
    NonHermitianAssembly { defect: f64 },
    #[error("boundary unitary has no eigenvalue -1")]
    NoMinusOneEigenvalue,
}

impl SpectralError {
    pub fn kind(&self) -> &'static str {
        match self {
            SpectralError::InvalidProblem(_) => "InvalidProblem",
            SpectralError::SearchBudgetExceeded { .. } => "SearchBudgetExceeded",
            SpectralError::NotAnEigenvalue { .. } => "NotAnEigenvalue",
            SpectralError::NonHermitianAssembly { .. } => "NonHermitianAssembly",
            SpectralError::NoMinusOneEigenvalue => "NoMinusOneEigenvalue",
        }
    }
}

// ---------------------------------------------------------------------------
// Solution basis

/// `(cos(√E x), sin(√E x)/√E)` continued analytically to `E ≤ 0`.
fn entire_basis(e: f64, x: f64) -> (f64, f64) {
    if e > 0.0 {
        let k = e.sqrt();
        let kx = k * x;
        let s = if kx < 1e-4 { x * (1.0 - kx * kx / 6.0 + kx.powi(4) / 120.0) } else { kx.sin() / k };
        (kx.cos(), s)
    } else if e < 0.0 {
        let kappa = (-e).sqrt();
        let kx = kappa * x;
        let s = if kx < 1e-4 { x * (1.0 + kx * kx / 6.0 + kx.powi(4) / 120.0) } else { kx.sinh() / kappa };
        (kx.cosh(), s)
    } else {
        (1.0, x)
    }
}

/// `d/dE [sin√E/√E]` at `x = 1`.
fn ds_de(e: f64, c: f64, s: f64) -> f64 {
    if e.abs() < 1e-3 {
        -1.0 / 6.0 + e / 60.0 - e * e / 1680.0 + e * e * e / 90720.0
    } else {
        (c - s) / (2.0 * e)
    }
}

/// `tanh(κ)/κ`, finite at 0.
fn tanhc(kappa: f64) -> f64 {
    if kappa < 1e-4 {
        1.0 - kappa * kappa / 3.0
    } else {
        kappa.tanh() / kappa
    }
}

/// Basis used to represent solutions at a given energy. Deep below zero the
/// entire basis is numerically degenerate, so boundary-localised exponentials
/// take over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolutionBasis {
    /// `{cos(√E x), sin(√E x)/√E}`.
    Entire { energy: f64 },
    /// `{e^{-κx}, e^{-κ(1-x)}}`.
    Exponential { kappa: f64 },
}

impl SolutionBasis {
    pub fn for_energy(e: f64) -> Self {
        if e < -1.0 {
            SolutionBasis::Exponential { kappa: (-e).sqrt() }
        } else {
            SolutionBasis::Entire { energy: e }
        }
    }

    /// Basis function values and derivatives at `x`: `([f_a, f_b], [f_a', f_b'])`.
    pub fn eval(&self, x: f64) -> ([f64; 2], [f64; 2]) {
        match *self {
            SolutionBasis::Entire { energy } => {
                let (c, s) = entire_basis(energy, x);
                ([c, s], [-energy * s, c])
            }
            SolutionBasis::Exponential { kappa } => {
                let l = (-kappa * x).exp();
                let r = (-kappa * (1.0 - x)).exp();
                ([l, r], [-kappa * l, kappa * r])
            }
        }
    }

    /// Rows `φ(0), φ(1), φ̇(0), φ̇(1)` for each basis function.
    fn boundary_rows(&self) -> [[f64; 2]; 4] {
        let (v0, d0) = self.eval(0.0);
        let (v1, d1) = self.eval(1.0);
        [v0, v1, [-d0[0], -d0[1]], d1]
    }

    /// Exact L² Gram matrix of the basis on [0, 1].
    fn gram(&self) -> [[f64; 2]; 2] {
        match *self {
            SolutionBasis::Entire { energy } => {
                let (_, s1) = entire_basis(energy, 1.0);
                let (_, s2) = entire_basis(energy, 2.0);
                // ∫c² = (1 + S)/2, ∫s² = (1 - S)/(2E), ∫cs = s(1)²/2 with
                // S = sin(2k)/(2k).
                let big_s = 0.5 * s2;
                let ss = if energy.abs() < 0.5 {
                    // (1 - S)/(2E) = Σ_{n≥1} (-1)^{n+1} 2·4^{n-1} E^{n-1}/(2n+1)!
                    let mut term = 1.0 / 3.0;
                    let mut acc = term;
                    for n in 2..25 {
                        term *= -4.0 * energy / ((2 * n) as f64 * (2 * n + 1) as f64);
                        acc += term;
                    }
                    acc
                } else {
                    (1.0 - big_s) / (2.0 * energy)
                };
                let cc = 0.5 * (1.0 + big_s);
                let cs = 0.5 * s1 * s1;
                [[cc, cs], [cs, ss]]
            }
            SolutionBasis::Exponential { kappa } => {
                let self_ = -(-2.0 * kappa).exp_m1() / (2.0 * kappa);
                let cross = (-kappa).exp();
                [[self_, cross], [cross, self_]]
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Secular function

/// The secular determinant of one boundary unitary.
#[derive(Debug, Clone)]
pub struct SecularFunction {
    /// Columns of `[I-U, -i(I+U)]`.
    l: [[Complex64; 2]; 4],
    q: [Complex64; 4],
    r: [f64; 4],
    reality_defect: f64,
}

impl SecularFunction {
    pub fn new(u: &BoundaryUnitary) -> Self {
        let m = u.matrix();
        let id = Mat2::identity();
        let a = id - *m;
        let b = (id + *m).scale(-I);
        let l = [
            [a.get(0, 0), a.get(1, 0)],
            [a.get(0, 1), a.get(1, 1)],
            [b.get(0, 0), b.get(1, 0)],
            [b.get(0, 1), b.get(1, 1)],
        ];
        let p = |i: usize, j: usize| l[i][0] * l[j][1] - l[j][0] * l[i][1];
        let q = [p(0, 3) - p(1, 2), p(0, 1), p(2, 3), p(0, 2) - p(1, 3)];
        let (jmax, qmax) = q
            .iter()
            .enumerate()
            .map(|(j, z)| (j, z.norm()))
            .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        let phase = if qmax > 0.0 { q[jmax] / qmax } else { Complex64::new(1.0, 0.0) };
        let mut r = [0.0; 4];
        let mut defect: f64 = 0.0;
        for j in 0..4 {
            let z = q[j] * phase.conj();
            r[j] = z.re;
            defect = defect.max(z.im.abs());
        }
        SecularFunction { l, q, r, reality_defect: if qmax > 0.0 { defect / qmax } else { 0.0 } }
    }

    /// Imaginary residue of the phase-normalised coefficients relative to
    /// their size; zero up to rounding for self-adjoint conditions.
    pub fn reality_defect(&self) -> f64 {
        self.reality_defect
    }

    /// Complex determinant at spectral parameter `z` (`E = z²`).
    pub fn value(&self, z: Complex64) -> Complex64 {
        let e = z * z;
        let c = z.cos();
        let s = if z.norm() < 1e-4 {
            Complex64::new(1.0, 0.0) - e / 6.0 + e * e / 120.0
        } else {
            z.sin() / z
        };
        self.q[0] * c + (self.q[1] - e * self.q[2]) * s - self.q[3]
    }

    /// Real secular function `F(E)` (phase removed).
    pub fn real(&self, e: f64) -> f64 {
        let (c, s) = entire_basis(e, 1.0);
        self.r[0] * c + (self.r[1] - e * self.r[2]) * s - self.r[3]
    }

    /// `F(E)` times a positive weight that tames the `cosh κ` growth below
    /// zero, together with its derivative in `E`. Zeros and their orders are
    /// those of `F`.
    pub fn scaled(&self, e: f64) -> (f64, f64) {
        let [r0, r1, r2, r3] = self.r;
        if e >= 0.0 {
            let (c, s) = entire_basis(e, 1.0);
            let f = r0 * c + (r1 - e * r2) * s - r3;
            let df = -0.5 * r0 * s + (r1 - e * r2) * ds_de(e, c, s) - r2 * s;
            return (f, df);
        }
        let kappa = (-e).sqrt();
        if kappa < 1.0 {
            let (c, s) = entire_basis(e, 1.0);
            let f = r0 * c + (r1 - e * r2) * s - r3;
            let df = -0.5 * r0 * s + (r1 - e * r2) * ds_de(e, c, s) - r2 * s;
            let sech = 1.0 / c;
            // d sech(√-E)/dE = sech·tanh(κ)/(2κ)
            let g = f * sech;
            let dg = sech * (df + f * 0.5 * tanhc(kappa));
            return (g, dg);
        }
        // G(κ) = F/cosh κ = r0 + (r1 + κ² r2) tanh(κ)/κ - r3 sech κ
        let th = kappa.tanh();
        let sech = 1.0 / kappa.cosh();
        let a = r1 + kappa * kappa * r2;
        let g = r0 + a * th / kappa - r3 * sech;
        let dg_dk = 2.0 * kappa * r2 * th / kappa + a * (sech * sech / kappa - th / (kappa * kappa)) + r3 * sech * th;
        (g, dg_dk * (-0.5 / kappa))
    }

    /// Secular matrix `[(I-U)Φ - i(I+U)Φ̇]` in the column-normalised basis
    /// of [`SolutionBasis::for_energy`].
    pub fn matrix(&self, e: f64) -> (Mat2, SolutionBasis, [f64; 2]) {
        let basis = SolutionBasis::for_energy(e);
        let rows = basis.boundary_rows();
        let mut norms = [0.0; 2];
        for col in 0..2 {
            norms[col] = rows.iter().map(|r| r[col] * r[col]).sum::<f64>().sqrt();
        }
        let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
        for i in 0..2 {
            for col in 0..2 {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, row) in rows.iter().enumerate() {
                    acc += self.l[j][i] * (row[col] / norms[col]);
                }
                m[i][col] = acc;
            }
        }
        (Mat2(m), basis, norms)
    }

    /// Singular values of the normalised secular matrix, scaled so that a
    /// full-rank matrix has values of order one (`L L† = 4I`).
    pub fn singular_values(&self, e: f64) -> [f64; 2] {
        let (m, _, _) = self.matrix(e);
        let s = m.singular_values();
        [0.5 * s[0], 0.5 * s[1]]
    }
}

/// `D(z) = det[(I-U)Φ(z) - i(I+U)Φ̇(z)]` in the basis `{cos zx, sin(zx)/z}`.
pub fn secular_value(u: &BoundaryUnitary, z: Complex64) -> Complex64 {
    SecularFunction::new(u).value(z)
}

// ---------------------------------------------------------------------------
// Root finding

/// Illinois false position with periodic bisection; `fa` and `fb` must have
/// opposite signs. Runs to adjacent floating-point numbers.
pub(crate) fn bracketed_root<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64) -> f64 {
    let mut side = 0i8;
    for iter in 0..400 {
        let width = b - a;
        if width <= 2.0 * f64::EPSILON * a.abs().max(b.abs()) || width <= 1e-300 {
            break;
        }
        let mut m = if iter % 3 == 2 { 0.5 * (a + b) } else { (a * fb - b * fa) / (fb - fa) };
        if !(m > a && m < b) {
            m = 0.5 * (a + b);
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        } else {
            b = m;
            fb = fm;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        }
    }
    if fa.abs() <= fb.abs() {
        a
    } else {
        b
    }
}

/// One bound-state level.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub energy: f64,
    pub multiplicity: u8,
    /// Exactly normalised eigenmodes (one, or an orthonormal pair).
    pub modes: Vec<Eigenmode>,
    /// Samples of each mode on the solution grid, trapezoid-normalised.
    pub eigenfunctions: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub grid: Vec<f64>,
    pub levels: Vec<Level>,
}

impl EigenSolution {
    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }

    /// Energies repeated according to multiplicity.
    pub fn energies_with_multiplicity(&self) -> Vec<f64> {
        self.levels.iter().flat_map(|l| std::iter::repeat_n(l.energy, l.multiplicity as usize)).collect()
    }

    pub fn negative_levels(&self) -> Vec<f64> {
        self.levels.iter().filter(|l| l.energy < 0.0).map(|l| l.energy).collect()
    }
}

/// An eigenfunction `ψ = Σ c_j f_j` in an analytic basis, unit L² norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigenmode {
    pub energy: f64,
    pub basis: SolutionBasis,
    pub coeffs: Vec2,
}

impl Eigenmode {
    pub fn value(&self, x: f64) -> Complex64 {
        let (f, _) = self.basis.eval(x);
        self.coeffs[0] * f[0] + self.coeffs[1] * f[1]
    }

    pub fn derivative(&self, x: f64) -> Complex64 {
        let (_, d) = self.basis.eval(x);
        self.coeffs[0] * d[0] + self.coeffs[1] * d[1]
    }

    pub fn boundary_data(&self) -> BoundaryData {
        BoundaryData::from_derivatives(self.value(0.0), self.value(1.0), self.derivative(0.0), self.derivative(1.0))
    }

    pub fn sample(&self, grid: &[f64]) -> Vec<Complex64> {
        grid.iter().map(|&x| self.value(x)).collect()
    }
}

/// `u† G v` for a real symmetric Gram matrix.
fn gram_form(g: &[[f64; 2]; 2], u: &Vec2, v: &Vec2) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..2 {
        for j in 0..2 {
            acc += u[i].conj() * g[i][j] * v[j];
        }
    }
    acc
}

/// Configuration of one eigenvalue search.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProblem {
    pub u: BoundaryUnitary,
    pub search_e_max: f64,
    pub search_kappa_max: f64,
    pub grid_n: usize,
    /// Cap on secular-function samples in the scan.
    pub max_evaluations: usize,
}

impl SpectralProblem {
    pub fn new(u: BoundaryUnitary, search_e_max: f64) -> Self {
        SpectralProblem { u, search_e_max, search_kappa_max: DEFAULT_KAPPA_MAX, grid_n: 201, max_evaluations: 5_000_000 }
    }

    pub fn with_kappa_max(mut self, kappa_max: f64) -> Self {
        self.search_kappa_max = kappa_max;
        self
    }

    pub fn with_grid(mut self, grid_n: usize) -> Self {
        self.grid_n = grid_n;
        self
    }

    fn validate(&self) -> Result<(), SpectralError> {
        if !(self.search_e_max > 0.0) || !self.search_e_max.is_finite() {
            return Err(SpectralError::InvalidProblem(alloc::format!("search_E_max must be positive, got {}", self.search_e_max)));
        }
        if !(self.search_kappa_max > 0.0) || !self.search_kappa_max.is_finite() {
            return Err(SpectralError::InvalidProblem(alloc::format!(
                "search_kappa_max must be positive, got {}",
                self.search_kappa_max
            )));
        }
        if self.grid_n < 16 {
            return Err(SpectralError::InvalidProblem(alloc::format!("grid_n must be at least 16, got {}", self.grid_n)));
        }
        Ok(())
    }
}

/// Step of the real-k scan.
const K_STEP: f64 = PI / 16.0;

/// Scan points in E, ascending: negative side in κ (uniform to 20, then
/// geometric), positive side uniform in k.
fn scan_grid(e_max: f64, kappa_max: f64) -> Vec<f64> {
    let mut kappas = Vec::new();
    let mut kappa = 0.05;
    while kappa < kappa_max {
        kappas.push(kappa);
        kappa = if kappa < 20.0 { kappa + 0.05 } else { kappa * 1.01 };
    }
    kappas.push(kappa_max);
    let mut grid: Vec<f64> = kappas.iter().rev().map(|k| -k * k).collect();
    grid.push(0.0);
    let k_max = e_max.sqrt();
    let steps = (k_max / K_STEP).ceil() as usize;
    for j in 1..=steps {
        let k = (j as f64 * K_STEP).min(k_max);
        grid.push(k * k);
    }
    grid.dedup();
    grid
}

#[derive(Debug, Clone, Copy)]
struct RootCandidate {
    energy: f64,
    /// Found at an extremum of F without a sign change.
    tangential: bool,
    /// A critical point between two sign-change roots; a rank-0 test there
    /// decides whether the pair is one degenerate level.
    pair_center: Option<f64>,
}

/// Every zero of the secular function in `[lo, hi]` (ascending grid
/// `points`), with multiplicity from the secular matrix rank.
fn find_roots(sec: &SecularFunction, points: &[f64]) -> Vec<(f64, u8)> {
    let vals: Vec<(f64, f64)> = points.iter().map(|&e| sec.scaled(e)).collect();
    let h = |e: f64| sec.scaled(e).0;
    let dh = |e: f64| sec.scaled(e).1;
    let mut cands: Vec<RootCandidate> = Vec::new();
    let push = |c: RootCandidate, cands: &mut Vec<RootCandidate>| cands.push(c);

    for i in 0..points.len() {
        let (e0, (h0, d0)) = (points[i], vals[i]);
        if h0 == 0.0 {
            push(RootCandidate { energy: e0, tangential: false, pair_center: None }, &mut cands);
        }
        if i + 1 == points.len() {
            break;
        }
        let (e1, (h1, d1)) = (points[i + 1], vals[i + 1]);
        if d0 != 0.0 && d1 != 0.0 && (d0 < 0.0) != (d1 < 0.0) {
            let ec = bracketed_root(dh, e0, e1, d0, d1);
            let hc = h(ec);
            let left = h0 != 0.0 && hc != 0.0 && (h0 < 0.0) != (hc < 0.0);
            let right = hc != 0.0 && h1 != 0.0 && (hc < 0.0) != (h1 < 0.0);
            let pair = if left && right { Some(ec) } else { None };
            if left {
                let r = bracketed_root(h, e0, ec, h0, hc);
                push(RootCandidate { energy: r, tangential: false, pair_center: pair }, &mut cands);
            }
            if hc == 0.0 {
                push(RootCandidate { energy: ec, tangential: false, pair_center: None }, &mut cands);
            }
            if right {
                let r = bracketed_root(h, ec, e1, hc, h1);
                push(RootCandidate { energy: r, tangential: false, pair_center: pair }, &mut cands);
            }
            if !left && !right && hc != 0.0 {
                push(RootCandidate { energy: ec, tangential: true, pair_center: None }, &mut cands);
            }
        } else if h0 != 0.0 && h1 != 0.0 && (h0 < 0.0) != (h1 < 0.0) {
            let r = bracketed_root(h, e0, e1, h0, h1);
            push(RootCandidate { energy: r, tangential: false, pair_center: None }, &mut cands);
        }
    }

    let mut roots: Vec<(f64, u8)> = Vec::new();
    let mut i = 0;
    while i < cands.len() {
        let c = cands[i];
        if let Some(center) = c.pair_center {
            // Two sign changes around one extremum: either a split pair or a
            // degenerate level whose extremum value is rounding noise.
            let sv = sec.singular_values(center);
            if sv[1] <= RANK_TOL {
                roots.push((center, 2));
                i += 2;
                continue;
            }
        }
        let sv = sec.singular_values(c.energy);
        if c.tangential {
            if sv[0] <= RANK_TOL {
                roots.push((c.energy, if sv[1] <= RANK_TOL { 2 } else { 1 }));
            }
        } else {
            roots.push((c.energy, if sv[1] <= RANK_TOL { 2 } else { 1 }));
        }
        i += 1;
    }
    roots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    // A root sitting exactly on a grid point can be reported twice.
    roots.dedup_by(|b, a| (a.0 - b.0).abs() <= 4.0 * f64::EPSILON * a.0.abs().max(1e-300));
    roots
}

/// Null space of the secular matrix at `e` as exactly normalised modes.
fn modes_at(sec: &SecularFunction, e: f64, multiplicity: u8) -> Vec<Eigenmode> {
    let (m, basis, norms) = sec.matrix(e);
    let gram = basis.gram();
    let mut raw: Vec<Vec2> = Vec::new();
    if multiplicity >= 2 {
        raw.push([Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        raw.push([Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
    } else {
        let r0 = m.0[0];
        let r1 = m.0[1];
        let n0 = r0[0].norm_sqr() + r0[1].norm_sqr();
        let n1 = r1[0].norm_sqr() + r1[1].norm_sqr();
        let row = if n0 >= n1 { r0 } else { r1 };
        // Null vector in normalised coordinates, mapped back to raw basis
        // coefficients.
        let v = [-row[1] / norms[0], row[0] / norms[1]];
        raw.push(v);
    }
    // Gram–Schmidt in the exact L² inner product.
    let mut out: Vec<Vec2> = Vec::new();
    for mut v in raw {
        for w in &out {
            let proj = gram_form(&gram, w, &v);
            v = [v[0] - proj * w[0], v[1] - proj * w[1]];
        }
        let n = gram_form(&gram, &v, &v).re.sqrt();
        out.push([v[0] / n, v[1] / n]);
    }
    out.into_iter()
        .map(|coeffs| {
            let mut mode = Eigenmode { energy: e, basis, coeffs };
            fix_phase(&mut mode);
            mode
        })
        .collect()
}

/// Makes the mode real-positive at its largest sample on a coarse grid.
fn fix_phase(mode: &mut Eigenmode) {
    let mut best = Complex64::new(0.0, 0.0);
    for j in 0..=64 {
        let v = mode.value(j as f64 / 64.0);
        if v.norm() > best.norm() * (1.0 + 1e-9) {
            best = v;
        }
    }
    if best.norm() > 0.0 {
        let ph = best.conj() / best.norm();
        mode.coeffs = [mode.coeffs[0] * ph, mode.coeffs[1] * ph];
    }
}

/// Uniform grid of `n` points on [0, 1].
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

fn sample_normalised(mode: &Eigenmode, grid: &[f64], weights: &[f64]) -> Vec<Complex64> {
    let mut s = mode.sample(grid);
    let n2: f64 = s.iter().zip(weights).map(|(z, w)| z.norm_sqr() * w).sum();
    let inv = 1.0 / n2.sqrt();
    for z in s.iter_mut() {
        *z *= inv;
    }
    s
}

fn build_levels(sec: &SecularFunction, roots: &[(f64, u8)], grid: &[f64]) -> Vec<Level> {
    let weights = quad::trapezoid_weights(grid.len());
    roots
        .iter()
        .map(|&(e, mult)| {
            let modes = modes_at(sec, e, mult);
            let eigenfunctions = modes.iter().map(|m| sample_normalised(m, grid, &weights)).collect();
            Level { energy: e, multiplicity: mult, modes, eigenfunctions }
        })
        .collect()
}

/// All eigenvalues in `[-search_kappa_max², search_E_max]` with
/// multiplicities and sampled eigenfunctions.
pub fn eigenvalues(p: &SpectralProblem) -> Result<EigenSolution, SpectralError> {
    p.validate()?;
    let sec = SecularFunction::new(&p.u);
    let full = scan_grid(p.search_e_max, p.search_kappa_max);
    let grid = uniform_grid(p.grid_n);
    // Sampling plus root polishing costs roughly 3 evaluations per scan point.
    if 3 * full.len() > p.max_evaluations {
        let keep = (p.max_evaluations / 3).max(2).min(full.len());
        let swept = &full[..keep];
        let roots = find_roots(&sec, swept);
        let partial = EigenSolution { levels: build_levels(&sec, &roots, &grid), grid };
        return Err(SpectralError::SearchBudgetExceeded {
            partial,
            unswept_from: swept[keep - 1],
            unswept_to: p.search_e_max,
        });
    }
    let mut roots = find_roots(&sec, &full);
    roots.retain(|&(e, _)| e <= p.search_e_max);
    Ok(EigenSolution { levels: build_levels(&sec, &roots, &grid), grid })
}

/// The lowest `count` distinct levels, growing the energy window as needed.
pub fn lowest_levels(u: &BoundaryUnitary, count: usize, grid_n: usize) -> Result<EigenSolution, SpectralError> {
    let mut e_max = ((count as f64 + 2.0) * PI).powi(2);
    loop {
        let p = SpectralProblem::new(u.clone(), e_max).with_grid(grid_n);
        let mut sol = eigenvalues(&p)?;
        if sol.levels.len() >= count {
            sol.levels.truncate(count);
            return Ok(sol);
        }
        e_max *= 4.0;
    }
}

/// Eigenfunction(s) at a known eigenvalue, sampled on `grid_n` points and
/// trapezoid-normalised; an orthonormal pair when the level is degenerate.
pub fn eigenfunction(u: &BoundaryUnitary, e: f64, grid_n: usize) -> Result<Vec<Vec<Complex64>>, SpectralError> {
    if grid_n < 16 {
        return Err(SpectralError::InvalidProblem(alloc::format!("grid_n must be at least 16, got {grid_n}")));
    }
    let sec = SecularFunction::new(u);
    let sv = sec.singular_values(e);
    if sv[0] > 1e-6 {
        return Err(SpectralError::NotAnEigenvalue { energy: e, sigma_min: sv[0] });
    }
    let mult = if sv[1] <= RANK_TOL { 2 } else { 1 };
    let grid = uniform_grid(grid_n);
    let weights = quad::trapezoid_weights(grid_n);
    Ok(modes_at(&sec, e, mult).iter().map(|m| sample_normalised(m, &grid, &weights)).collect())
}

/// Stokes boundary form `i Σ [(φ̇₁)* φ₂ - (φ₁)* φ̇₂]`, which vanishes for any
/// two functions in the domain of a self-adjoint extension.
pub fn stokes_boundary_form(d1: &BoundaryData, d2: &BoundaryData) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..2 {
        acc += d1.phidot[j].conj() * d2.phi[j] - d1.phi[j].conj() * d2.phidot[j];
    }
    I * acc
}

/// Relative boundary-condition residual of a mode.
pub fn mode_residual(u: &BoundaryUnitary, mode: &Eigenmode) -> f64 {
    let r = bc_residual(u, &mode.boundary_data());
    let sup = (0..=256).map(|j| mode.value(j as f64 / 256.0).norm()).fold(0.0, f64::max);
    (r[0].norm_sqr() + r[1].norm_sqr()).sqrt() / sup.max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------------------
// Finite-difference cross-check

/// Lowest levels of the ghost-node finite-difference Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct FdSpectrum {
    pub n: usize,
    pub levels: Vec<f64>,
    pub hermiticity_defect: f64,
}

/// Second-order finite-difference operator on nodes `x_j = j/N`.
///
/// Ghost nodes are eliminated through the boundary relation: directions
/// where `U` has eigenvalue -1 are Dirichlet and drop out, the remaining
/// Robin directions `φ̇ = aφ` become boundary coordinates. Symmetrised with
/// trapezoid weights (½ at the ends) the operator is Hermitian. Nodes are
/// folded into pairs `(j, N-j)` so the whole matrix is block tridiagonal with
/// blocks of size at most two, boundary block first.
struct FdOperator {
    /// `(dim, diagonal block, coupling from the previous block)`.
    blocks: Vec<(usize, Mat2, Mat2)>,
    defect: f64,
}

fn negatives_hermitian(dim: usize, s: &Mat2) -> usize {
    if dim == 1 {
        return (s.0[0][0].re < 0.0) as usize;
    }
    let det = s.det().re;
    let tr = s.trace().re;
    if det < 0.0 {
        1
    } else if tr < 0.0 {
        2
    } else {
        0
    }
}

impl FdOperator {
    fn assemble(u: &BoundaryUnitary, n: usize) -> FdOperator {
        let h = 1.0 / n as f64;
        let h2 = h * h;
        let re = |x: f64| Complex64::new(x, 0.0);
        let mut robin: Vec<(f64, Vec2)> = Vec::new();
        for (theta, v) in u.eigenphases() {
            if (0.5 * theta).cos().abs() > 1e-10 {
                robin.push((-(0.5 * theta).tan(), v));
            }
        }
        // Endpoint row after ghost elimination: (2ψ_b - 2ψ_nb - 2h φ̇_b)/h²;
        // neighbour row: (-ψ_b + 2ψ_nb - ψ_nnb)/h².
        let (w_b, w_nb) = (0.5_f64, 1.0_f64);
        let s_b_nb = (w_b / w_nb).sqrt() * (-2.0 / h2);
        let s_nb_b = (w_nb / w_b).sqrt() * (-1.0 / h2);
        let mut defect = (s_b_nb - s_nb_b).abs() * h2;

        let mut a_full = Mat2::zero();
        for (a, v) in &robin {
            a_full = a_full + crate::linalg::outer(v, v).scale(re(*a));
        }
        let h_bb = Mat2::identity().scale(re(2.0 / h2)) - a_full.scale(re(2.0 / h));
        defect = defect.max(h_bb.hermitian_defect() * h2);

        let mut blocks = Vec::new();
        let m = robin.len();
        if m > 0 {
            let mut b = Mat2::zero();
            for k in 0..m {
                for l in 0..m {
                    b.0[k][l] = crate::linalg::dot(&robin[k].1, &h_bb.mul_vec(&robin[l].1));
                }
            }
            blocks.push((m, b, Mat2::zero()));
        }
        let diag = 2.0 / h2;
        let off = -1.0 / h2;
        let mut prev_nodes: Vec<usize> = Vec::new();
        let mut j = 1;
        while j <= n - j {
            let nodes: Vec<usize> = if j < n - j { vec![j, n - j] } else { vec![j] };
            let d = nodes.len();
            let mut a = Mat2::zero();
            for (p, &x) in nodes.iter().enumerate() {
                for (q, &y) in nodes.iter().enumerate() {
                    a.0[p][q] = if x == y {
                        re(diag)
                    } else if x.abs_diff(y) == 1 {
                        re(off)
                    } else {
                        re(0.0)
                    };
                }
            }
            let mut e = Mat2::zero();
            if j == 1 {
                for k in 0..m {
                    let v = robin[k].1;
                    e.0[k][0] = v[0] * s_nb_b;
                    if d == 2 {
                        e.0[k][1] = v[1] * s_nb_b;
                    }
                }
            } else {
                for (p, &x) in prev_nodes.iter().enumerate() {
                    for (q, &y) in nodes.iter().enumerate() {
                        if x.abs_diff(y) == 1 {
                            e.0[p][q] = re(off);
                        }
                    }
                }
            }
            blocks.push((d, a, e));
            prev_nodes = nodes;
            j += 1;
        }
        FdOperator { blocks, defect }
    }

    fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.0).sum()
    }

    fn gershgorin(&self) -> f64 {
        let mut r: f64 = 0.0;
        for (i, (_, a, e)) in self.blocks.iter().enumerate() {
            let next = self.blocks.get(i + 1).map(|b| b.2.frobenius_norm()).unwrap_or(0.0);
            r = r.max(a.max_abs() + a.frobenius_norm() + e.frobenius_norm() + next);
        }
        r
    }

    /// Number of eigenvalues strictly below `lambda`: block LDL† inertia.
    fn count_below(&self, lambda: f64) -> usize {
        let mut neg = 0;
        let mut prev: Option<(usize, Mat2)> = None;
        let tiny = f64::EPSILON * self.gershgorin();
        for &(d, a, e) in &self.blocks {
            let mut s = a;
            for k in 0..d {
                s.0[k][k] -= lambda;
            }
            if let Some((pd, sp)) = prev {
                // S_k = A_k - λ - E† S_{k-1}⁻¹ E
                let mut sp_pad = sp;
                if pd == 1 {
                    sp_pad.0[1][1] = Complex64::new(1.0, 0.0);
                }
                let inv = sp_pad.inverse().unwrap_or(Mat2::identity().scale(Complex64::new(1.0 / tiny, 0.0)));
                let corr = e.adjoint() * inv * e;
                for p in 0..d {
                    for q in 0..d {
                        s.0[p][q] -= corr.0[p][q];
                    }
                }
            }
            for k in 0..2 {
                if k >= d {
                    s.0[k][k] = Complex64::new(0.0, 0.0);
                }
            }
            if d == 1 {
                if s.0[0][0].re == 0.0 {
                    s.0[0][0].re = tiny;
                }
            } else if s.det().re == 0.0 {
                s.0[0][0].re += tiny;
                s.0[1][1].re += tiny;
            }
            neg += negatives_hermitian(d, &s);
            prev = Some((d, s));
        }
        neg
    }

    /// k-th eigenvalue (0-based, with multiplicity) by bisection on the count.
    fn eigenvalue(&self, k: usize) -> f64 {
        let bound = self.gershgorin();
        let mut lo = -bound - 1.0;
        let mut hi = bound + 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Lowest `n_levels` eigenvalues of the `N`-interval finite-difference
/// Hamiltonian with ghost nodes eliminated through the boundary relation.
pub fn fd_spectrum(u: &BoundaryUnitary, n: usize, n_levels: usize) -> Result<FdSpectrum, SpectralError> {
    if n < 32 {
        return Err(SpectralError::InvalidProblem(alloc::format!("finite-difference grid needs N >= 32, got {n}")));
    }
    let op = FdOperator::assemble(u, n);
    if op.defect > 1e-8 {
        return Err(SpectralError::NonHermitianAssembly { defect: op.defect });
    }
    let count = n_levels.min(op.dim());
    let levels = (0..count).map(|k| op.eigenvalue(k)).collect();
    Ok(FdSpectrum { n, levels, hermiticity_defect: op.defect })
}

// ---------------------------------------------------------------------------
// Edge states

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRow {
    pub t: f64,
    /// Negative levels of `U e^{it}` (with multiplicity); empty when none was
    /// found inside the κ search window.
    pub levels: Vec<f64>,
}

/// Negative levels of `U_t = U e^{it}` for each `t`, for `U` with an
/// eigenvalue -1.
pub fn edge_state_scan(u: &BoundaryUnitary, t_values: &[f64], kappa_max: f64) -> Result<Vec<EdgeRow>, SpectralError> {
    if !u.has_eigenvalue(-1.0) {
        return Err(SpectralError::NoMinusOneEigenvalue);
    }
    if let Some(t) = t_values.iter().find(|t| **t == 0.0 || !t.is_finite()) {
        return Err(SpectralError::InvalidProblem(alloc::format!("scan values must be finite and non-zero, got {t}")));
    }
    let rows = crate::par::map_indexed(t_values.len(), |i| {
        let t = t_values[i];
        let p = SpectralProblem::new(u.rotate_phase(t), 1.0).with_kappa_max(kappa_max).with_grid(16);
        eigenvalues(&p).map(|sol| {
            let levels =
                sol.levels.iter().filter(|l| l.energy < 0.0).flat_map(|l| std::iter::repeat_n(l.energy, l.multiplicity as usize)).collect();
            EdgeRow { t, levels }
        })
    });
    rows.into_iter().collect()
}
