//! Dense 2×2 complex algebra.
//!
//! Boundary conditions on the interval live in `C²`, so everything the crate
//! needs reduces to closed-form 2×2 operations.

use core::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

pub type Vec2 = [Complex64; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major 2×2 complex matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[Complex64; 2]; 2]);

impl Mat2 {
    pub const fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        Mat2([[a, b], [c, d]])
    }

    pub const fn identity() -> Self {
        Mat2([[ONE, ZERO], [ZERO, ONE]])
    }

    pub const fn zero() -> Self {
        Mat2([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub fn diag(a: Complex64, d: Complex64) -> Self {
        Mat2([[a, ZERO], [ZERO, d]])
    }

    pub fn scalar(s: Complex64) -> Self {
        Self::diag(s, s)
    }

    /// Builds a matrix from eight reals: row-major entries with real and
    /// imaginary parts interleaved.
    pub fn from_flat(r: &[f64; 8]) -> Self {
        Mat2([
            [Complex64::new(r[0], r[1]), Complex64::new(r[2], r[3])],
            [Complex64::new(r[4], r[5]), Complex64::new(r[6], r[7])],
        ])
    }

    /// Inverse of [`Mat2::from_flat`].
    pub fn to_flat(&self) -> [f64; 8] {
        let m = &self.0;
        [
            m[0][0].re, m[0][0].im, m[0][1].re, m[0][1].im, m[1][0].re, m[1][0].im, m[1][1].re,
            m[1][1].im,
        ]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[i][j]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        Mat2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn det(&self) -> Complex64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Inverse, or `None` when the determinant vanishes exactly.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == ZERO {
            return None;
        }
        let m = &self.0;
        let inv = d.inv();
        Some(Mat2([
            [m[1][1] * inv, -m[0][1] * inv],
            [-m[1][0] * inv, m[0][0] * inv],
        ]))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let m = &self.0;
        Mat2([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn mul_vec(&self, v: &Vec2) -> Vec2 {
        let m = &self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |M - M†|` entrywise.
    pub fn hermitian_defect(&self) -> f64 {
        (*self - self.adjoint()).max_abs()
    }

    /// `max |M M† - I|` entrywise.
    pub fn unitarity_defect(&self) -> f64 {
        (*self * self.adjoint() - Mat2::identity()).max_abs()
    }

    /// Eigen-decomposition of the Hermitian part `(M + M†)/2`.
    ///
    /// Eigenvalues come out ascending with orthonormal eigenvectors.
    pub fn hermitian_eigen(&self) -> ([f64; 2], [Vec2; 2]) {
        let h = (*self + self.adjoint()).scale(Complex64::new(0.5, 0.0));
        let a = h.0[0][0].re;
        let d = h.0[1][1].re;
        let b = h.0[0][1];
        let mean = 0.5 * (a + d);
        let half = 0.5 * (a - d);
        let rad = half.hypot(b.norm());
        let lo = mean - rad;
        let hi = mean + rad;
        if b.norm() <= f64::EPSILON * (a.abs() + d.abs()).max(f64::MIN_POSITIVE) {
            return if a <= d {
                ([a, d], [[ONE, ZERO], [ZERO, ONE]])
            } else {
                ([d, a], [[ZERO, ONE], [ONE, ZERO]])
            };
        }
        let vec_for = |lam: f64| -> Vec2 {
            // (a - λ) v0 + b v1 = 0 and b̄ v0 + (d - λ) v1 = 0; use the
            // better conditioned of the two rows.
            let c1 = [b, Complex64::new(lam - a, 0.0)];
            let c2 = [Complex64::new(lam - d, 0.0), b.conj()];
            let n1 = norm2(&c1);
            let n2 = norm2(&c2);
            if n1 >= n2 {
                [c1[0] / n1, c1[1] / n1]
            } else {
                [c2[0] / n2, c2[1] / n2]
            }
        };
        let v_lo = vec_for(lo);
        // Orthogonal complement keeps the pair exactly orthonormal.
        let v_hi = [-v_lo[1].conj(), v_lo[0].conj()];
        ([lo, hi], [v_lo, v_hi])
    }

    /// Eigen-decomposition of a normal matrix (unitaries in practice).
    ///
    /// Uses whichever of the Hermitian or anti-Hermitian parts separates the
    /// eigenvalues better; a scalar matrix returns the standard basis.
    pub fn normal_eigen(&self) -> ([Complex64; 2], [Vec2; 2]) {
        let re_part = *self;
        let im_part = self.scale(Complex64::new(0.0, -1.0));
        let (l1, v1) = re_part.hermitian_eigen();
        let (l2, v2) = im_part.hermitian_eigen();
        let gap1 = l1[1] - l1[0];
        let gap2 = l2[1] - l2[0];
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let vecs = if gap1.max(gap2) <= 1e-14 * scale {
            [[ONE, ZERO], [ZERO, ONE]]
        } else if gap1 >= gap2 {
            v1
        } else {
            v2
        };
        let vals = [
            rayleigh(self, &vecs[0]),
            rayleigh(self, &vecs[1]),
        ];
        (vals, vecs)
    }

    /// Singular values, ascending.
    pub fn singular_values(&self) -> [f64; 2] {
        // σ_max² + σ_min² = ‖M‖_F² and σ_max σ_min = |det M|; taking σ_min
        // from the determinant avoids the √ε floor of eig(M†M).
        let f2 = self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>();
        let det = self.det().norm();
        let disc = ((0.5 * f2).powi(2) - det * det).max(0.0).sqrt();
        let smax = (0.5 * f2 + disc).sqrt();
        let smin = if smax > 0.0 { det / smax } else { 0.0 };
        [smin, smax]
    }
}

fn rayleigh(m: &Mat2, v: &Vec2) -> Complex64 {
    let mv = m.mul_vec(v);
    v[0].conj() * mv[0] + v[1].conj() * mv[1]
}

pub fn norm2(v: &Vec2) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

/// `⟨u, v⟩` with the conjugate on the left.
pub fn dot(u: &Vec2, v: &Vec2) -> Complex64 {
    u[0].conj() * v[0] + u[1].conj() * v[1]
}

/// Outer product `u v†`.
pub fn outer(u: &Vec2, v: &Vec2) -> Mat2 {
    Mat2([
        [u[0] * v[0].conj(), u[0] * v[1].conj()],
        [u[1] * v[0].conj(), u[1] * v[1].conj()],
    ])
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2([
            [a[0][0] - b[0][0], a[0][1] - b[0][1]],
            [a[1][0] - b[1][0], a[1][1] - b[1][1]],
        ])
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-ONE)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        let h = Mat2::new(c(1.0, 0.0), c(1.0, 1.0), c(1.0, -1.0), c(-2.0, 0.0));
        let (vals, vecs) = h.hermitian_eigen();
        assert!(vals[0] < vals[1]);
        let rebuilt = outer(&vecs[0], &vecs[0]).scale(c(vals[0], 0.0))
            + outer(&vecs[1], &vecs[1]).scale(c(vals[1], 0.0));
        assert!((rebuilt - h).max_abs() < 1e-14);
        assert!(dot(&vecs[0], &vecs[1]).norm() < 1e-15);
    }

    #[test]
    fn normal_eigen_of_swap() {
        let swap = Mat2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        let (vals, vecs) = swap.normal_eigen();
        for k in 0..2 {
            let lhs = swap.mul_vec(&vecs[k]);
            assert!((lhs[0] - vals[k] * vecs[k][0]).norm() < 1e-14);
            assert!((lhs[1] - vals[k] * vecs[k][1]).norm() < 1e-14);
        }
        let mut re: [f64; 2] = [vals[0].re, vals[1].re];
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((re[0] + 1.0).abs() < 1e-14 && (re[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_values_of_rank_one() {
        let m = Mat2::new(c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0));
        let s = m.singular_values();
        assert!(s[0] < 1e-15);
        assert!((s[1] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn flat_round_trip() {
        let r = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        assert_eq!(Mat2::from_flat(&r).to_flat(), r);
    }
}
