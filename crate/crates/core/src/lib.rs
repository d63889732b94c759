//! Numerical laboratory for the self-adjoint extensions of `H = -d²/dx²` on
//! the unit interval.
//!
//! Every self-adjoint realization is labelled by a 2×2 unitary `U` acting on
//! the boundary data `φ = (ψ(0), ψ(1))`, `φ̇ = (-ψ'(0), ψ'(1))` through
//!
//! ```text
//! φ - i φ̇ = U (φ + i φ̇)
//! ```
//!
//! The crate is organised by subsystem:
//!
//! * [`bc`]: validation of boundary unitaries, Cayley transforms, named
//!   families and the distance to the classically representable set.
//! * [`spectral`]: secular determinant, exact eigenvalues and eigenfunctions,
//!   a finite-difference cross-check and edge-state scans.
//! * [`propagator`]: Euclidean heat kernels by spectral sums, images, lattice
//!   transfer matrices and Monte-Carlo path sums, plus the representability
//!   report.
//! * [`classical`]: event-driven bounce dynamics under `(α, ρ)` boundary maps.
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is enabled;
//! `parallel` additionally spreads grid scans and Monte-Carlo batches over a
//! rayon pool without changing any result.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bc;
pub mod classical;
pub mod linalg;
pub mod propagator;
pub mod spectral;

mod par;
mod quad;

pub use num_complex::Complex64;
