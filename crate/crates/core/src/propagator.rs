//! Euclidean propagators `K(x, y; τ)` of `e^{-τH}`.
//!
//! Four independent constructions:
//!
//! * spectral sums over the exact eigenmodes of any boundary unitary;
//! * the method of images, available for walls (Dirichlet/Neumann and mixed)
//!   and for the flux-threaded ring;
//! * a lattice transfer operator `e^{-τ H_N}` on `N` sites, with boundary
//!   rules absorb/reflect/wrap and an optional site potential;
//! * Monte-Carlo path sums over Gaussian walks obeying the same rules.
//!
//! [`representability_report`] compares the spectral kernel of an arbitrary
//! `U` with everything the path constructions can produce.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bc::{
    self, classical_to_quantum, manifold_distance, BoundaryUnitary, ClassicalBC, Family, Isometry,
    RepresentableFamily,
};
use crate::spectral::{self, SpectralError, SpectralProblem};
use crate::{par, quad};

/// Tail required of a spectral sum: the highest included level satisfies
/// `τ E ≥ 40`.
pub const SPECTRAL_TAIL_EXPONENT: f64 = 40.0;

/// Target size of the discarded Gaussian tail in image sums.
pub const IMAGE_TAIL: f64 = 1e-14;

/// Walkers per Monte-Carlo batch. Batches are the unit of seeding, so the
/// partition is fixed and results do not depend on scheduling.
pub const MC_BATCH: usize = 4096;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PropagatorError {
    #[error("tau must be positive and finite, got {0}")]
    InvalidTau(f64),
    #[error("grid needs at least 2 points, got {0}")]
    InvalidGrid(usize),
    #[error("spectral sum stops at E = {highest}, needs E >= {required} for the tail bound")]
    InsufficientModes { highest: f64, required: f64 },
    #[error("no image representation for family {0}")]
    UnsupportedFamily(String),
    #[error("path weight for reflectivity {0} is not defined (only 1 and +inf)")]
    UnsupportedRho(f64),
    #[error("invalid path rules: {0}")]
    InvalidRules(String),
    #[error("Monte-Carlo sampling needs an explicit seed")]
    BadSeed,
    #[error("kernels live on different grids or times")]
    GridMismatch,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Boundary(#[from] bc::BcError),
}

impl PropagatorError {
    pub fn kind(&self) -> &'static str {
        match self {
            PropagatorError::InvalidTau(_) => "InvalidTau",
            PropagatorError::InvalidGrid(_) => "InvalidGrid",
            PropagatorError::InsufficientModes { .. } => "InsufficientModes",
            PropagatorError::UnsupportedFamily(_) => "UnsupportedFamily",
            PropagatorError::UnsupportedRho(_) => "UnsupportedRho",
            PropagatorError::InvalidRules(_) => "InvalidRules",
            PropagatorError::BadSeed => "BadSeed",
            PropagatorError::GridMismatch => "GridMismatch",
            PropagatorError::Spectral(e) => e.kind(),
            PropagatorError::Boundary(e) => e.kind(),
        }
    }
}

fn check_tau(tau: f64) -> Result<(), PropagatorError> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(PropagatorError::InvalidTau(tau))
    }
}

fn check_grid(n: usize) -> Result<(), PropagatorError> {
    if n >= 2 {
        Ok(())
    } else {
        Err(PropagatorError::InvalidGrid(n))
    }
}

// ---------------------------------------------------------------------------
// Kernel container

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelMethod {
    Spectral,
    Images,
    Lattice,
    MonteCarlo,
    /// `Σ e^{-iE_n t} ψ_n ψ_n*`; the `tau` field then holds the real time `t`.
    SpectralRealTime,
}

impl KernelMethod {
    pub fn name(&self) -> &'static str {
        match self {
            KernelMethod::Spectral => "spectral",
            KernelMethod::Images => "images",
            KernelMethod::Lattice => "lattice",
            KernelMethod::MonteCarlo => "monte_carlo",
            KernelMethod::SpectralRealTime => "spectral_real_time",
        }
    }
}

/// Truncation data of a kernel; unused fields stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KernelMeta {
    pub modes: Option<usize>,
    pub highest_energy: Option<f64>,
    pub images: Option<usize>,
    pub lattice_sites: Option<usize>,
    pub steps: Option<usize>,
    pub paths: Option<usize>,
    pub seed: Option<u64>,
    /// Largest discarded weight (`e^{-τE}` of the last mode, image tail, …).
    pub truncation_bound: f64,
    /// Monte-Carlo standard errors, row-major like the values.
    pub std_errors: Option<Vec<f64>>,
}

/// `K(x_i, y_j)` on a uniform grid of [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatKernel {
    pub tau: f64,
    pub grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub method: KernelMethod,
    pub meta: KernelMeta,
}

impl HeatKernel {
    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n() + j]
    }

    /// `max |K(x,y) - K(y,x)*|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n();
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in 0..=i {
                d = d.max((self.at(i, j) - self.at(j, i).conj()).norm());
            }
        }
        d
    }

    /// `Σ_i K(x_i, x_i) w_i` with trapezoid weights.
    pub fn trace(&self) -> Complex64 {
        let w = quad::trapezoid_weights(self.n());
        (0..self.n()).map(|i| self.at(i, i) * w[i]).sum()
    }

    /// `∫ K(x_i, y) dy` for every row (Simpson on odd grids).
    pub fn row_integrals(&self) -> Vec<Complex64> {
        let n = self.n();
        let w = quad::simpson_weights(n);
        (0..n).map(|i| (0..n).map(|j| self.at(i, j) * w[j]).sum()).collect()
    }

    /// `∫ K₁(x, z) K₂(z, y) dz` by Simpson quadrature (trapezoid on even
    /// grids); the result carries `τ₁ + τ₂`.
    pub fn compose(&self, other: &HeatKernel) -> Result<HeatKernel, PropagatorError> {
        if self.grid != other.grid {
            return Err(PropagatorError::GridMismatch);
        }
        let n = self.n();
        let w = quad::simpson_weights(n);
        let mut values = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.at(i, k) * w[k];
                for j in 0..n {
                    values[i * n + j] += a * other.at(k, j);
                }
            }
        }
        Ok(HeatKernel {
            tau: self.tau + other.tau,
            grid: self.grid.clone(),
            values,
            method: self.method,
            meta: KernelMeta::default(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDistance {
    pub l2: f64,
    pub sup: f64,
}

/// Trapezoid L²(x, y) distance and sup distance of two kernels on the same
/// grid and time.
pub fn kernel_distance(a: &HeatKernel, b: &HeatKernel) -> Result<KernelDistance, PropagatorError> {
    if a.grid != b.grid || (a.tau - b.tau).abs() > 1e-12 * a.tau.abs().max(b.tau.abs()) {
        return Err(PropagatorError::GridMismatch);
    }
    let n = a.n();
    let w = quad::trapezoid_weights(n);
    let mut l2 = 0.0;
    let mut sup: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let d = (a.at(i, j) - b.at(i, j)).norm();
            l2 += w[i] * w[j] * d * d;
            sup = sup.max(d);
        }
    }
    Ok(KernelDistance { l2: l2.sqrt(), sup })
}

// ---------------------------------------------------------------------------
// Spectral sums

struct ModeSet {
    energies: Vec<f64>,
    modes: Vec<spectral::Eigenmode>,
    next_energy: f64,
}

/// Modes with `E ≤ e_cut`, plus the first level above it.
fn modes_below(u: &BoundaryUnitary, e_cut: f64) -> Result<ModeSet, PropagatorError> {
    let mut e_max = (e_cut.max(1.0).sqrt() + 2.0 * PI).powi(2);
    loop {
        let sol = spectral::eigenvalues(&SpectralProblem::new(u.clone(), e_max).with_grid(16))?;
        if let Some(next) = sol.levels.iter().find(|l| l.energy > e_cut) {
            let next_energy = next.energy;
            let mut energies = Vec::new();
            let mut modes = Vec::new();
            for l in sol.levels.iter().filter(|l| l.energy <= e_cut) {
                for m in &l.modes {
                    energies.push(l.energy);
                    modes.push(*m);
                }
            }
            return Ok(ModeSet { energies, modes, next_energy });
        }
        e_max *= 2.0;
    }
}

/// Lowest `count` modes (a degenerate level is never split).
fn lowest_modes(u: &BoundaryUnitary, count: usize) -> Result<ModeSet, PropagatorError> {
    let mut e_max = ((count as f64 + 3.0) * PI).powi(2);
    loop {
        let sol = spectral::eigenvalues(&SpectralProblem::new(u.clone(), e_max).with_grid(16))?;
        let total: usize = sol.levels.iter().map(|l| l.modes.len()).sum();
        if total > count {
            let mut energies = Vec::new();
            let mut modes = Vec::new();
            let mut next_energy = f64::INFINITY;
            for l in &sol.levels {
                if modes.len() >= count {
                    next_energy = l.energy;
                    break;
                }
                for m in &l.modes {
                    energies.push(l.energy);
                    modes.push(*m);
                }
            }
            return Ok(ModeSet { energies, modes, next_energy });
        }
        e_max *= 2.0;
    }
}

fn sum_modes(set: &ModeSet, grid: &[f64], weight: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
    let n = grid.len();
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    for (e, m) in set.energies.iter().zip(&set.modes) {
        let w = weight(*e);
        let s = m.sample(grid);
        for i in 0..n {
            let a = s[i] * w;
            for j in 0..n {
                values[i * n + j] += a * s[j].conj();
            }
        }
    }
    values
}

/// `K = Σ e^{-τE_n} ψ_n(x) ψ_n(y)*`. With `n_modes = None` every level up to
/// `40/τ` is included; with an explicit count the highest included level must
/// still reach `40/τ`.
pub fn spectral_kernel(
    u: &BoundaryUnitary,
    tau: f64,
    grid_n: usize,
    n_modes: Option<usize>,
) -> Result<HeatKernel, PropagatorError> {
    check_tau(tau)?;
    check_grid(grid_n)?;
    let required = SPECTRAL_TAIL_EXPONENT / tau;
    let set = match n_modes {
        None => modes_below(u, required)?,
        Some(count) => {
            let set = lowest_modes(u, count)?;
            let highest = set.energies.last().copied().unwrap_or(f64::NEG_INFINITY);
            if highest < required {
                return Err(PropagatorError::InsufficientModes { highest, required });
            }
            set
        }
    };
    let grid = spectral::uniform_grid(grid_n);
    let values = sum_modes(&set, &grid, |e| Complex64::new((-tau * e).exp(), 0.0));
    let meta = KernelMeta {
        modes: Some(set.modes.len()),
        highest_energy: set.energies.last().copied(),
        truncation_bound: (-tau * set.next_energy).exp(),
        ..Default::default()
    };
    Ok(HeatKernel { tau, grid, values, method: KernelMethod::Spectral, meta })
}

/// Real-time kernel `Σ e^{-iE_n t} ψ_n(x) ψ_n(y)*` over the lowest `n_modes`
/// modes. The sum does not converge pointwise; this is a band-limited
/// continuation of the spectral sum.
pub fn real_time_kernel(
    u: &BoundaryUnitary,
    t: f64,
    grid_n: usize,
    n_modes: usize,
) -> Result<HeatKernel, PropagatorError> {
    if !t.is_finite() {
        return Err(PropagatorError::InvalidTau(t));
    }
    check_grid(grid_n)?;
    let set = lowest_modes(u, n_modes)?;
    let grid = spectral::uniform_grid(grid_n);
    let values = sum_modes(&set, &grid, |e| Complex64::from_polar(1.0, -e * t));
    let meta = KernelMeta {
        modes: Some(set.modes.len()),
        highest_energy: set.energies.last().copied(),
        truncation_bound: 1.0,
        ..Default::default()
    };
    Ok(HeatKernel { tau: t, grid, values, method: KernelMethod::SpectralRealTime, meta })
}

// ---------------------------------------------------------------------------
// Images

/// Free kernel `(4πτ)^{-1/2} e^{-u²/4τ}`.
pub fn free_kernel(u: f64, tau: f64) -> f64 {
    (-u * u / (4.0 * tau)).exp() / (4.0 * PI * tau).sqrt()
}

/// Geometries with an image representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImageGeometry {
    /// Walls at 0 and 1; sign -1 absorbs, +1 reflects.
    Walls { s0: f64, s1: f64 },
    /// Ring with `ψ(x + 1) = e^{iε} ψ(x)`.
    Ring { eps: f64 },
}

impl ImageGeometry {
    pub fn from_family(f: &Family) -> Result<Self, PropagatorError> {
        match *f {
            Family::Dirichlet => Ok(ImageGeometry::Walls { s0: -1.0, s1: -1.0 }),
            Family::Neumann => Ok(ImageGeometry::Walls { s0: 1.0, s1: 1.0 }),
            Family::Periodic => Ok(ImageGeometry::Ring { eps: 0.0 }),
            Family::PseudoPeriodic { eps } => Ok(ImageGeometry::Ring { eps }),
            other => Err(PropagatorError::UnsupportedFamily(other.name().to_string())),
        }
    }

    /// Images on each side needed for a tail below [`IMAGE_TAIL`].
    pub fn images_needed(&self, tau: f64) -> usize {
        // Smallest |u| with G(u) below the target, then one period of slack.
        let log_target = -(IMAGE_TAIL * 1e-2).ln() - 0.5 * (4.0 * PI * tau).ln().min(0.0);
        let reach = (4.0 * tau * log_target.max(1.0)).sqrt();
        let period = match self {
            ImageGeometry::Walls { .. } => 2.0,
            ImageGeometry::Ring { .. } => 1.0,
        };
        (reach / period).ceil() as usize + 2
    }

    /// Image sum with `n_images` images on each side.
    pub fn value(&self, x: f64, y: f64, tau: f64, n_images: usize) -> Complex64 {
        let m = n_images as i64;
        match *self {
            ImageGeometry::Walls { s0, s1 } => {
                // Reflection in 0 carries s0, in 1 carries s1; a translation by
                // 2 is the product of both.
                let mut acc = 0.0;
                for n in -m..=m {
                    let t = (s0 * s1).powi(n.abs() as i32);
                    let shift = 2.0 * n as f64;
                    acc += t * free_kernel(x - y - shift, tau);
                    // x ↦ -x - 2n: an extra reflection in 0 after n translations.
                    acc += t * s0 * free_kernel(x + y + shift, tau);
                }
                Complex64::new(acc, 0.0)
            }
            ImageGeometry::Ring { eps } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in -m..=m {
                    acc += Complex64::from_polar(1.0, -eps * n as f64) * free_kernel(x - y + n as f64, tau);
                }
                acc
            }
        }
    }
}

/// Method of images for Dirichlet, Neumann, periodic and pseudo-periodic
/// conditions.
pub fn image_kernel(
    family: &Family,
    tau: f64,
    grid_n: usize,
    n_images: Option<usize>,
) -> Result<HeatKernel, PropagatorError> {
    let geom = ImageGeometry::from_family(family)?;
    check_tau(tau)?;
    check_grid(grid_n)?;
    let m = n_images.unwrap_or_else(|| geom.images_needed(tau));
    let grid = spectral::uniform_grid(grid_n);
    let mut values = Vec::with_capacity(grid_n * grid_n);
    for &x in &grid {
        for &y in &grid {
            values.push(geom.value(x, y, tau, m));
        }
    }
    let period = if matches!(geom, ImageGeometry::Walls { .. }) { 2.0 } else { 1.0 };
    let meta = KernelMeta {
        images: Some(m),
        truncation_bound: free_kernel(period * (m as f64 - 1.0), tau),
        ..Default::default()
    };
    Ok(HeatKernel { tau, grid, values, method: KernelMethod::Images, meta })
}

// ---------------------------------------------------------------------------
// Path sums

/// Delta weight `a δ(x - location)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SitePotential {
    pub location: f64,
    pub strength: f64,
}

/// Path constraints derived from classical boundary data.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRules {
    pub cbc: ClassicalBC,
    /// Phase `ε` per winding; only meaningful with swap gluing.
    pub flux_phase: f64,
    pub site_potential: Option<SitePotential>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Topology {
    Walls { absorb: [bool; 2] },
    Ring { eps: f64 },
}

impl PathRules {
    pub fn new(cbc: ClassicalBC) -> Self {
        PathRules { cbc, flux_phase: 0.0, site_potential: None }
    }

    pub fn dirichlet() -> Self {
        Self::new(ClassicalBC { alpha: Isometry::Identity, rho: bc::Reflectivity::Uniform(f64::INFINITY) })
    }

    pub fn neumann() -> Self {
        Self::new(ClassicalBC::elastic(Isometry::Identity))
    }

    pub fn wrap(eps: f64) -> Self {
        PathRules { flux_phase: eps, ..Self::new(ClassicalBC::elastic(Isometry::Swap)) }
    }

    pub fn with_site_potential(mut self, location: f64, strength: f64) -> Self {
        self.site_potential = Some(SitePotential { location, strength });
        self
    }

    fn topology(&self) -> Result<Topology, PropagatorError> {
        let rule = |r: f64| -> Result<bool, PropagatorError> {
            if r == 1.0 {
                Ok(false)
            } else if r == f64::INFINITY {
                Ok(true)
            } else {
                Err(PropagatorError::UnsupportedRho(r))
            }
        };
        if !self.flux_phase.is_finite() {
            return Err(PropagatorError::InvalidRules("flux phase must be finite".into()));
        }
        if let Some(p) = self.site_potential {
            if !(p.strength.is_finite() && (0.0..=1.0).contains(&p.location)) {
                return Err(PropagatorError::InvalidRules("site potential needs a finite strength inside [0, 1]".into()));
            }
        }
        match self.cbc.alpha {
            Isometry::Identity => {
                if self.flux_phase != 0.0 {
                    return Err(PropagatorError::InvalidRules("flux requires swap gluing".into()));
                }
                Ok(Topology::Walls { absorb: [rule(self.cbc.rho.at(0))?, rule(self.cbc.rho.at(1))?] })
            }
            Isometry::Swap => {
                for i in 0..2 {
                    let r = self.cbc.rho.at(i);
                    if r != 1.0 {
                        return Err(PropagatorError::UnsupportedRho(r));
                    }
                }
                Ok(Topology::Ring { eps: self.flux_phase })
            }
            Isometry::Rotation(_) => Err(PropagatorError::InvalidRules("rotations act on the disk, not the interval".into())),
        }
    }

    /// Image geometry with the same rules (no site potential).
    fn image_geometry(&self) -> Result<ImageGeometry, PropagatorError> {
        Ok(match self.topology()? {
            Topology::Walls { absorb } => ImageGeometry::Walls {
                s0: if absorb[0] { -1.0 } else { 1.0 },
                s1: if absorb[1] { -1.0 } else { 1.0 },
            },
            Topology::Ring { eps } => ImageGeometry::Ring { eps },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathMethod {
    /// Exact `e^{-τ H_N}` of the `N`-interval lattice operator.
    Lattice { sites: usize },
    /// `paths` Gaussian walks of `steps` steps each.
    MonteCarlo { paths: usize, steps: usize, seed: Option<u64> },
}

/// Kernel values at a list of `(x, y)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEstimate {
    pub points: Vec<(f64, f64)>,
    pub values: Vec<Complex64>,
    /// Standard error of each value (zero for the lattice).
    pub std_errors: Vec<f64>,
    /// Mean surviving path weight for each point's starting position.
    pub surviving_mass: Vec<f64>,
}

/// Lattice operator symmetrised by the node weights.
struct Lattice {
    n: usize,
    h: f64,
    topology: Topology,
    /// Grid index (`x = j h`) of each lattice node.
    index: Vec<usize>,
    weight: Vec<f64>,
    diag: Vec<f64>,
    /// `S[i][i+1]`.
    upper: Vec<Complex64>,
    /// `S[last][0]` on the ring.
    corner: Complex64,
    /// Smallest site-potential term (the kinetic part is positive semidefinite).
    potential_floor: f64,
}

impl Lattice {
    fn new(rules: &PathRules, n: usize) -> Result<Lattice, PropagatorError> {
        if n < 4 {
            return Err(PropagatorError::InvalidRules(alloc::format!("lattice needs at least 4 intervals, got {n}")));
        }
        let topology = rules.topology()?;
        let h = 1.0 / n as f64;
        let h2 = h * h;
        let (index, weight): (Vec<usize>, Vec<f64>) = match topology {
            Topology::Walls { absorb } => {
                let first = if absorb[0] { 1 } else { 0 };
                let last = if absorb[1] { n - 1 } else { n };
                (first..=last)
                    .map(|j| (j, if (j == 0 && !absorb[0]) || (j == n && !absorb[1]) { 0.5 } else { 1.0 }))
                    .unzip()
            }
            Topology::Ring { .. } => (0..n).map(|j| (j, 1.0)).unzip(),
        };
        let m = index.len();
        let mut diag = vec![2.0 / h2; m];
        // Unsymmetrised rows: end node (2ψ_b - 2ψ_nb)/h², neighbour
        // (-ψ_b + 2ψ_nb - …)/h²; scaling by √(w_i/w_j) makes both -√2/h².
        let upper: Vec<Complex64> = (0..m - 1)
            .map(|i| {
                let (wi, wj) = (weight[i], weight[i + 1]);
                let raw = if wi < wj { -2.0 / h2 } else { -1.0 / h2 };
                Complex64::new(raw * (wi / wj).sqrt(), 0.0)
            })
            .collect();
        let corner = match topology {
            Topology::Ring { eps } => Complex64::from_polar(-1.0 / h2, eps),
            Topology::Walls { .. } => Complex64::new(0.0, 0.0),
        };
        let mut potential_floor = 0.0;
        if let Some(p) = rules.site_potential {
            let j = (p.location * n as f64).round() as usize;
            let j = if matches!(topology, Topology::Ring { .. }) { j % n } else { j };
            if let Some(k) = index.iter().position(|&g| g == j) {
                let v = p.strength / (weight[k] * h);
                diag[k] += v;
                potential_floor = v.min(0.0);
            }
        }
        Ok(Lattice { n, h, topology, index, weight, diag, upper, corner, potential_floor })
    }

    fn len(&self) -> usize {
        self.index.len()
    }

    fn apply(&self, v: &[Complex64], out: &mut [Complex64]) {
        let m = self.len();
        for i in 0..m {
            let mut acc = v[i] * self.diag[i];
            if i + 1 < m {
                acc += self.upper[i] * v[i + 1];
            }
            if i > 0 {
                acc += self.upper[i - 1].conj() * v[i - 1];
            }
            out[i] = acc;
        }
        if self.corner != Complex64::new(0.0, 0.0) {
            out[m - 1] += self.corner * v[0];
            out[0] += self.corner.conj() * v[m - 1];
        }
    }

    fn spectral_bounds(&self) -> (f64, f64) {
        let m = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m {
            let mut r = 0.0;
            if i + 1 < m {
                r += self.upper[i].norm();
            }
            if i > 0 {
                r += self.upper[i - 1].norm();
            }
            if i == 0 || i == m - 1 {
                r += self.corner.norm();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo.max(self.potential_floor), hi)
    }

    /// Eigenvalues of `S` below `sigma`, from the inertia of an LDL†
    /// factorisation (the ring corner fills the last column).
    fn count_below(&self, sigma: f64) -> usize {
        let m = self.len();
        let tiny = 1e-300;
        let guard = |d: f64| if d == 0.0 { tiny } else { d };
        let mut neg = 0;
        let mut d = guard(self.diag[0] - sigma);
        // Entry (i, m-1) of the partially reduced matrix.
        let mut f = if m > 2 { self.corner.conj() } else { self.upper[0] + self.corner.conj() };
        let mut dl = self.diag[m - 1] - sigma;
        for i in 0..m.saturating_sub(2) {
            if d < 0.0 {
                neg += 1;
            }
            let b = self.upper[i];
            dl -= f.norm_sqr() / d;
            let next_f = if i + 1 == m - 2 { self.upper[m - 2] } else { Complex64::new(0.0, 0.0) };
            f = next_f - b.conj() * f / d;
            d = guard(self.diag[i + 1] - sigma - b.norm_sqr() / d);
        }
        if d < 0.0 {
            neg += 1;
        }
        dl -= f.norm_sqr() / d;
        if dl < 0.0 {
            neg += 1;
        }
        neg
    }

    /// Lowest eigenvalue by bisection on the inertia count.
    fn lowest_eigenvalue(&self) -> f64 {
        let (mut lo, mut hi) = self.spectral_bounds();
        hi += 1.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// `e^{-τS} v` by a Chebyshev series.
    fn exp_apply(&self, tau: f64, v: &[Complex64]) -> Vec<Complex64> {
        let (g_lo, hi) = self.spectral_bounds();
        let lo = (self.lowest_eigenvalue() - 1e-12 * (hi - g_lo)).max(g_lo);
        let c = 0.5 * (lo + hi);
        let r = 0.5 * (hi - lo);
        let z = tau * r;
        let coeffs = scaled_bessel(z);
        let pre = (-tau * lo).exp();
        let m = self.len();
        let mut t_prev: Vec<Complex64> = v.to_vec();
        let mut t_cur = vec![Complex64::new(0.0, 0.0); m];
        let mut sv = vec![Complex64::new(0.0, 0.0); m];
        // X = (S - c)/r
        self.apply(&t_prev, &mut sv);
        for i in 0..m {
            t_cur[i] = (sv[i] - t_prev[i] * c) / r;
        }
        let mut acc: Vec<Complex64> = t_prev.iter().map(|x| x * coeffs[0]).collect();
        if coeffs.len() > 1 {
            for i in 0..m {
                acc[i] -= t_cur[i] * (2.0 * coeffs[1]);
            }
        }
        let mut sign = -1.0;
        for ck in coeffs.iter().skip(2) {
            sign = -sign;
            self.apply(&t_cur, &mut sv);
            for i in 0..m {
                let next = (sv[i] - t_cur[i] * c) * (2.0 / r) - t_prev[i];
                t_prev[i] = t_cur[i];
                t_cur[i] = next;
            }
            let w = sign * 2.0 * ck;
            for i in 0..m {
                acc[i] += t_cur[i] * w;
            }
        }
        for a in acc.iter_mut() {
            *a *= pre;
        }
        acc
    }

    /// Lattice nodes (with interpolation weight and boundary phase) that
    /// represent position `x`. Absorbed walls contribute nothing.
    fn stencil(&self, x: f64) -> Vec<(usize, Complex64)> {
        let t = x.clamp(0.0, 1.0) * self.n as f64;
        let j0 = (t.floor() as usize).min(self.n - 1);
        let frac = t - j0 as f64;
        let mut out = Vec::new();
        for (j, w) in [(j0, 1.0 - frac), (j0 + 1, frac)] {
            if w <= 1e-12 {
                continue;
            }
            let (g, phase) = match self.topology {
                Topology::Ring { eps } if j == self.n => (0, Complex64::from_polar(1.0, eps)),
                _ => (j, Complex64::new(1.0, 0.0)),
            };
            if let Some(k) = self.index.iter().position(|&i| i == g) {
                out.push((k, phase * w));
            }
        }
        out
    }

    /// `K(x, y)` for all `x` in `xs` from one column solve per `y`-node.
    fn kernel_column(&self, tau: f64, y: f64, xs: &[f64]) -> Vec<Complex64> {
        let m = self.len();
        let ys = self.stencil(y);
        let mut col = vec![Complex64::new(0.0, 0.0); m];
        for &(k, wy) in &ys {
            let mut e = vec![Complex64::new(0.0, 0.0); m];
            e[k] = Complex64::new(1.0, 0.0);
            let c = self.exp_apply(tau, &e);
            // K(x_i, y_k) = (e^{-τS})_ik / (h √(w_i w_k)); y enters conjugated.
            for i in 0..m {
                col[i] += c[i] * wy.conj() / (self.h * (self.weight[i] * self.weight[k]).sqrt());
            }
        }
        xs.iter()
            .map(|&x| self.stencil(x).iter().map(|&(i, wx)| col[i] * wx).sum())
            .collect()
    }
}

/// `e^{-z} I_k(z)` for `k = 0, 1, …` until negligible (Miller's backward
/// recurrence normalised by `e^{z} = I_0 + 2 Σ I_k`).
pub(crate) fn scaled_bessel(z: f64) -> Vec<f64> {
    if z == 0.0 {
        return vec![1.0];
    }
    let keep = 40 + (10.0 * z.sqrt()).ceil() as usize + (z.min(40.0)) as usize;
    let start = keep + 30 + (2.0 * z.sqrt()).ceil() as usize;
    let mut vals = vec![0.0; start + 2];
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = vals[k + 1] + (2.0 * k as f64 / z) * vals[k];
        if vals[k - 1] > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = vals[0] + 2.0 * vals[1..=start].iter().sum::<f64>();
    let mut out: Vec<f64> = vals[..=keep].iter().map(|v| v / norm).collect();
    while out.len() > 1 && *out.last().unwrap() < 1e-18 * out[0].max(1e-300) && out.len() > 2 {
        out.pop();
    }
    out
}

fn start_groups(points: &[(f64, f64)]) -> Vec<(f64, Vec<usize>)> {
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, &(x, _)) in points.iter().enumerate() {
        match groups.iter_mut().find(|g| g.0 == x) {
            Some(g) => g.1.push(i),
            None => groups.push((x, vec![i])),
        }
    }
    groups
}

fn y_groups(points: &[(f64, f64)]) -> Vec<(f64, Vec<usize>)> {
    let swapped: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (y, x)).collect();
    start_groups(&swapped)
}

/// Per-batch Monte-Carlo sums for one start point and a set of end points.
#[derive(Clone)]
struct McSums {
    sum: Vec<Complex64>,
    sum_sq: Vec<f64>,
    mass: f64,
}

fn mc_batch(
    topo: Topology,
    geom: ImageGeometry,
    x: f64,
    ys: &[f64],
    tau: f64,
    steps: usize,
    walkers: usize,
    rng: &mut ChaCha8Rng,
) -> McSums {
    let dt = tau / steps as f64;
    let sigma = (2.0 * dt).sqrt();
    let n_img = geom.images_needed(dt);
    let mut out = McSums { sum: vec![Complex64::new(0.0, 0.0); ys.len()], sum_sq: vec![0.0; ys.len()], mass: 0.0 };
    for _ in 0..walkers {
        let mut pos = x;
        let mut w = 1.0;
        for _ in 1..steps {
            let xi: f64 = StandardNormal.sample(rng);
            let mut next = pos + sigma * xi;
            if let Topology::Walls { absorb } = topo {
                // Fold reflecting walls, kill on absorbing ones.
                while w > 0.0 && !(0.0..=1.0).contains(&next) {
                    if next < 0.0 {
                        if absorb[0] {
                            w = 0.0;
                        } else {
                            next = -next;
                        }
                    } else if absorb[1] {
                        w = 0.0;
                    } else {
                        next = 2.0 - next;
                    }
                }
                if w == 0.0 {
                    break;
                }
                // Brownian-bridge survival across the step.
                if absorb[0] {
                    w *= -(-pos * next / dt).exp_m1();
                }
                if absorb[1] {
                    w *= -(-(1.0 - pos) * (1.0 - next) / dt).exp_m1();
                }
            }
            pos = next;
        }
        out.mass += w;
        if w == 0.0 {
            continue;
        }
        for (k, &y) in ys.iter().enumerate() {
            let v = match geom {
                ImageGeometry::Ring { eps } => {
                    let winding = pos.floor();
                    Complex64::from_polar(w, eps * winding) * geom.value(pos - winding, y, dt, n_img)
                }
                ImageGeometry::Walls { .. } => geom.value(pos, y, dt, n_img) * w,
            };
            out.sum[k] += v;
            out.sum_sq[k] += v.norm_sqr();
        }
    }
    out
}

/// Path-sum kernel values at the given `(x, y)` points.
pub fn path_kernel(
    rules: &PathRules,
    tau: f64,
    points: &[(f64, f64)],
    method: PathMethod,
) -> Result<PathEstimate, PropagatorError> {
    check_tau(tau)?;
    if points.iter().any(|&(x, y)| !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y)) {
        return Err(PropagatorError::InvalidRules("points must lie in [0, 1]".into()));
    }
    match method {
        PathMethod::Lattice { sites } => {
            let lat = Lattice::new(rules, sites)?;
            let groups = y_groups(points);
            let cols = par::map_indexed(groups.len(), |g| {
                let (y, idx) = &groups[g];
                let xs: Vec<f64> = idx.iter().map(|&i| points[i].0).collect();
                lat.kernel_column(tau, *y, &xs)
            });
            let mut values = vec![Complex64::new(0.0, 0.0); points.len()];
            for ((_, idx), col) in groups.iter().zip(cols) {
                for (&i, v) in idx.iter().zip(col) {
                    values[i] = v;
                }
            }
            Ok(PathEstimate {
                points: points.to_vec(),
                values,
                std_errors: vec![0.0; points.len()],
                surviving_mass: vec![1.0; points.len()],
            })
        }
        PathMethod::MonteCarlo { paths, steps, seed } => {
            let seed = seed.ok_or(PropagatorError::BadSeed)?;
            if paths == 0 || steps == 0 {
                return Err(PropagatorError::InvalidRules("Monte Carlo needs paths > 0 and steps > 0".into()));
            }
            if rules.site_potential.is_some() {
                return Err(PropagatorError::InvalidRules("site potentials are only supported on the lattice".into()));
            }
            let topo = rules.topology()?;
            let geom = rules.image_geometry()?;
            let groups = start_groups(points);
            let batches = paths.div_ceil(MC_BATCH);
            let mut values = vec![Complex64::new(0.0, 0.0); points.len()];
            let mut std_errors = vec![0.0; points.len()];
            let mut surviving_mass = vec![0.0; points.len()];
            for (g, (x, idx)) in groups.iter().enumerate() {
                let ys: Vec<f64> = idx.iter().map(|&i| points[i].1).collect();
                let sums = par::map_indexed(batches, |b| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(((g as u64) << 32) | b as u64);
                    let walkers = MC_BATCH.min(paths - b * MC_BATCH);
                    mc_batch(topo, geom, *x, &ys, tau, steps, walkers, &mut rng)
                });
                let mut total = McSums { sum: vec![Complex64::new(0.0, 0.0); ys.len()], sum_sq: vec![0.0; ys.len()], mass: 0.0 };
                for s in &sums {
                    for k in 0..ys.len() {
                        total.sum[k] += s.sum[k];
                        total.sum_sq[k] += s.sum_sq[k];
                    }
                    total.mass += s.mass;
                }
                let n = paths as f64;
                for (k, &i) in idx.iter().enumerate() {
                    let mean = total.sum[k] / n;
                    let var = (total.sum_sq[k] / n - mean.norm_sqr()).max(0.0) * n / (n - 1.0).max(1.0);
                    values[i] = mean;
                    std_errors[i] = (var / n).sqrt();
                    surviving_mass[i] = total.mass / n;
                }
            }
            Ok(PathEstimate { points: points.to_vec(), values, std_errors, surviving_mass })
        }
    }
}

/// Path-sum kernel on a uniform grid.
pub fn path_kernel_grid(
    rules: &PathRules,
    tau: f64,
    grid_n: usize,
    method: PathMethod,
) -> Result<HeatKernel, PropagatorError> {
    check_grid(grid_n)?;
    let grid = spectral::uniform_grid(grid_n);
    let points: Vec<(f64, f64)> = grid.iter().flat_map(|&x| grid.iter().map(move |&y| (x, y))).collect();
    let est = path_kernel(rules, tau, &points, method)?;
    let (kind, meta) = match method {
        PathMethod::Lattice { sites } => {
            (KernelMethod::Lattice, KernelMeta { lattice_sites: Some(sites), ..Default::default() })
        }
        PathMethod::MonteCarlo { paths, steps, seed } => (
            KernelMethod::MonteCarlo,
            KernelMeta { paths: Some(paths), steps: Some(steps), seed, std_errors: Some(est.std_errors), ..Default::default() },
        ),
    };
    Ok(HeatKernel { tau, grid, values: est.values, method: kind, meta })
}

// ---------------------------------------------------------------------------
// Representability

/// Search grid of [`representability_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportBudget {
    pub grid_n: usize,
    pub eps_points: usize,
    pub a_points: usize,
    /// Delta strengths are scanned in `[-a_range, a_range]`.
    pub a_range: f64,
    /// Per-axis angle points for the Robin families.
    pub rho_points: usize,
    /// Include the delta-weighted ring among the candidates.
    pub delta_channel: bool,
}

impl Default for ReportBudget {
    fn default() -> Self {
        ReportBudget { grid_n: 41, eps_points: 64, a_points: 64, a_range: 20.0, rho_points: 32, delta_channel: true }
    }
}

impl ReportBudget {
    /// Every grid axis refined by an integer factor.
    pub fn scaled(&self, factor: usize) -> Self {
        ReportBudget {
            eps_points: self.eps_points * factor,
            a_points: self.a_points * factor,
            rho_points: self.rho_points * factor,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateFit {
    pub family: String,
    pub params: Vec<(String, f64)>,
    pub residual_l2: f64,
    pub residual_sup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentabilityReport {
    pub tau: f64,
    pub best: CandidateFit,
    /// Best fit within each candidate family, in search order.
    pub candidates: Vec<CandidateFit>,
    pub manifold_distance: f64,
    pub budget: ReportBudget,
    /// Path sums are not sampled here; kept for report symmetry.
    pub seed: Option<u64>,
}

/// Golden-section minimum of `f` on `[a, b]`.
fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Grid scan of `f`, then golden refinement within one cell of the best
/// point, clipped to `[lo, hi]`.
fn scan_1d<F: Fn(f64) -> f64 + Sync + Send>(f: F, grid: &[f64], cell: f64, lo: f64, hi: f64) -> (f64, f64) {
    let vals = par::map_indexed(grid.len(), |i| f(grid[i]));
    let best = bc::smallest_indices(&vals, 1)[0];
    let a = (grid[best] - cell).max(lo);
    let b = (grid[best] + cell).min(hi);
    let (x, fx) = golden_min(&f, a, b, 1e-10 * cell.max(1e-3));
    if fx < vals[best] {
        (x, fx)
    } else {
        (grid[best], vals[best])
    }
}

/// Spectral kernel of `U` against every path-representable kernel.
pub fn representability_report(
    u: &BoundaryUnitary,
    tau: f64,
    budget: &ReportBudget,
) -> Result<RepresentabilityReport, PropagatorError> {
    let n = budget.grid_n;
    let target = spectral_kernel(u, tau, n, None)?;
    let dist = |k: &HeatKernel| kernel_distance(&target, k).expect("same grid and tau");
    let spectral_dist = |v: &BoundaryUnitary| -> f64 {
        spectral_kernel(v, tau, n, None).map(|k| dist(&k).l2).unwrap_or(f64::INFINITY)
    };
    let mut candidates: Vec<CandidateFit> = Vec::new();
    let mut fit = |family: &str, params: Vec<(&str, f64)>, k: &HeatKernel| {
        let d = dist(k);
        candidates.push(CandidateFit {
            family: family.to_string(),
            params: params.into_iter().map(|(a, b)| (a.to_string(), b)).collect(),
            residual_l2: d.l2,
            residual_sup: d.sup,
        });
    };

    for f in [Family::Dirichlet, Family::Neumann, Family::Periodic] {
        fit(f.name(), Vec::new(), &image_kernel(&f, tau, n, None)?);
    }

    let ne = budget.eps_points.max(1);
    let eps_grid: Vec<f64> = (0..ne).map(|k| TAU * k as f64 / ne as f64).collect();
    let (eps, _) = scan_1d(
        |e| {
            image_kernel(&Family::PseudoPeriodic { eps: e }, tau, n, None).map(|k| dist(&k).l2).unwrap_or(f64::INFINITY)
        },
        &eps_grid,
        TAU / ne as f64,
        -PI,
        3.0 * PI,
    );
    let eps = eps - TAU * (eps / TAU).floor();
    fit("pseudo_periodic", vec![("eps", eps)], &image_kernel(&Family::PseudoPeriodic { eps }, tau, n, None)?);

    if budget.delta_channel {
        let na = budget.a_points.max(2);
        let a_grid: Vec<f64> =
            (0..na).map(|k| -budget.a_range + 2.0 * budget.a_range * k as f64 / (na - 1) as f64).collect();
        let cell = 2.0 * budget.a_range / (na - 1) as f64;
        let delta_u = |a: f64| Family::DeltaCircle { a }.unitary();
        let (a, _) = scan_1d(|a| delta_u(a).map(|v| spectral_dist(&v)).unwrap_or(f64::INFINITY), &a_grid, cell, -budget.a_range, budget.a_range);
        fit("delta_circle", vec![("a", a)], &spectral_kernel(&delta_u(a)?, tau, n, None)?);
    }

    // Robin M0 on the angle torus diag(e^{iφ0}, e^{iφ1}).
    let nr = budget.rho_points.max(2);
    let m0_u = |p0: f64, p1: f64| BoundaryUnitary::new(bc::m0_matrix(p0, p1));
    let angles: Vec<f64> =
        (0..nr).map(|k| bc::M0_LO + (bc::M0_HI - bc::M0_LO) * (k as f64 + 0.5) / nr as f64).collect();
    let m0_vals = par::map_indexed(nr * nr, |idx| {
        m0_u(angles[idx / nr], angles[idx % nr]).map(|v| spectral_dist(&v)).unwrap_or(f64::INFINITY)
    });
    let best = bc::smallest_indices(&m0_vals, 1)[0];
    let (p, _) = bc::coordinate_descent(
        |p| m0_u(p[0], p[1]).map(|v| spectral_dist(&v).powi(2)).unwrap_or(f64::INFINITY),
        &[angles[best / nr], angles[best % nr]],
        &[bc::M0_LO, bc::M0_LO],
        &[bc::M0_HI, bc::M0_HI],
        1e-10,
    );
    let rho = [bc::m0_angle_to_rho(p[0]), bc::m0_angle_to_rho(p[1])];
    fit("robin_m0", vec![("rho0", rho[0]), ("rho1", rho[1])], &spectral_kernel(&m0_u(p[0], p[1])?, tau, n, None)?);

    // Robin M1 (ρ0 = ρ1) on its angle circle.
    let m1_u = |psi: f64| BoundaryUnitary::new(bc::m1_matrix(psi));
    let psi_grid: Vec<f64> =
        (0..nr).map(|k| bc::M1_LO + (bc::M1_HI - bc::M1_LO) * (k as f64 + 0.5) / nr as f64).collect();
    let (psi, _) = scan_1d(
        |psi| m1_u(psi).map(|v| spectral_dist(&v)).unwrap_or(f64::INFINITY),
        &psi_grid,
        (bc::M1_HI - bc::M1_LO) / nr as f64,
        bc::M1_LO,
        bc::M1_HI,
    );
    let r = bc::m1_angle_to_rho(psi);
    let m1 = classical_to_quantum(&RepresentableFamily::M1 { rho0: r, rho1: r }).or_else(|_| m1_u(psi))?;
    fit("robin_m1", vec![("rho0", r), ("rho1", r)], &spectral_kernel(&m1, tau, n, None)?);

    let best = candidates
        .iter()
        .min_by(|a, b| a.residual_l2.partial_cmp(&b.residual_l2).unwrap_or(core::cmp::Ordering::Equal))
        .cloned()
        .expect("candidate list is never empty");
    Ok(RepresentabilityReport {
        tau,
        best,
        candidates,
        manifold_distance: manifold_distance(u).distance,
        budget: *budget,
        seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::{named_family, FamilyParams};

    fn fam(name: &str) -> BoundaryUnitary {
        named_family(name, &FamilyParams::default()).unwrap()
    }

    #[test]
    fn scaled_bessel_matches_series() {
        // e^{-z} I_k(z) from the power series at z = 2.5.
        let z: f64 = 2.5;
        let got = scaled_bessel(z);
        for k in 0..6 {
            let mut term = (0.5 * z).powi(k as i32) / (1..=k).map(|j| j as f64).product::<f64>();
            let mut sum = 0.0;
            for m in 0..60 {
                sum += term;
                term *= 0.25 * z * z / ((m + 1) as f64 * (m + 1 + k) as f64);
            }
            assert!((got[k] - (-z).exp() * sum).abs() < 1e-15, "k = {k}");
        }
        let big = scaled_bessel(5e5);
        let total = big[0] + 2.0 * big[1..].iter().sum::<f64>();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((big[0] - 1.0 / (2.0 * PI * 5e5).sqrt()).abs() < 1e-3 * big[0]);
    }

    #[test]
    fn dirichlet_images_vanish_at_wall() {
        for tau in [0.01, 0.1, 1.0] {
            let k = image_kernel(&Family::Dirichlet, tau, 21, None).unwrap();
            for j in 0..21 {
                assert!(k.at(0, j).norm() < 1e-14);
                assert!(k.at(20, j).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn neumann_images_flat_at_wall() {
        let g = ImageGeometry::from_family(&Family::Neumann).unwrap();
        let m = g.images_needed(0.1);
        let h = 1e-4;
        for y in [0.1, 0.5, 0.9] {
            let d = (g.value(h, y, 0.1, m) - g.value(-h, y, 0.1, m)).norm() / (2.0 * h);
            assert!(d < 1e-10);
        }
    }

    #[test]
    fn periodic_trace_is_poisson_sum() {
        for tau in [0.05, 0.2] {
            let k = image_kernel(&Family::Periodic, tau, 11, None).unwrap();
            // K(x, x) is constant on the ring.
            let want: f64 = (-20..=20).map(|n: i32| (-4.0 * PI * PI * (n * n) as f64 * tau).exp()).sum();
            assert!((k.trace().re - want).abs() < 1e-10);
        }
    }

    #[test]
    fn unsupported_families_have_no_images() {
        let e = image_kernel(&Family::DeltaCircle { a: 1.0 }, 0.1, 11, None).unwrap_err();
        assert_eq!(e.kind(), "UnsupportedFamily");
    }

    #[test]
    fn spectral_matches_images() {
        let cases = [
            (fam("dirichlet"), Family::Dirichlet),
            (fam("neumann"), Family::Neumann),
            (fam("periodic"), Family::Periodic),
        ];
        for (u, f) in cases {
            let a = spectral_kernel(&u, 0.1, 21, None).unwrap();
            let b = image_kernel(&f, 0.1, 21, None).unwrap();
            let d = kernel_distance(&a, &b).unwrap();
            assert!(d.sup < 1e-8 && d.l2 < 1e-8, "{}: {d:?}", f.name());
        }
    }

    #[test]
    fn insufficient_modes_reported() {
        let e = spectral_kernel(&fam("dirichlet"), 0.1, 11, Some(3)).unwrap_err();
        assert_eq!(e.kind(), "InsufficientModes");
        assert!(spectral_kernel(&fam("dirichlet"), 0.1, 11, Some(8)).is_ok());
    }

    #[test]
    fn lattice_matches_images() {
        let pts = [(0.5, 0.5), (0.25, 0.75), (0.0, 0.5)];
        for (rules, f) in [(PathRules::dirichlet(), Family::Dirichlet), (PathRules::neumann(), Family::Neumann)] {
            let est = path_kernel(&rules, 0.1, &pts, PathMethod::Lattice { sites: 400 }).unwrap();
            let g = ImageGeometry::from_family(&f).unwrap();
            for (p, v) in pts.iter().zip(&est.values) {
                let want = g.value(p.0, p.1, 0.1, 10);
                assert!((v - want).norm() < 2e-4, "{}: {v} vs {want}", f.name());
            }
        }
    }

    #[test]
    fn lattice_ground_state_is_exact() {
        let n = 200;
        let h = 1.0 / n as f64;
        let lat = Lattice::new(&PathRules::dirichlet(), n).unwrap();
        let want = 2.0 / (h * h) * (1.0 - (PI * h).cos());
        assert!((lat.lowest_eigenvalue() - want).abs() < 1e-9 * want);
        let ring = Lattice::new(&PathRules::wrap(1.0), n).unwrap();
        let want = 2.0 / (h * h) * (1.0 - (h * 1.0).cos());
        assert!((ring.lowest_eigenvalue() - want).abs() < 1e-8 * want);
    }

    #[test]
    fn weighted_ring_matches_delta_circle() {
        for a in [3.0, -2.0] {
            let u = Family::DeltaCircle { a }.unitary().unwrap();
            let sp = spectral_kernel(&u, 0.1, 11, None).unwrap();
            let rules = PathRules::wrap(0.0).with_site_potential(0.0, a);
            let lat = path_kernel_grid(&rules, 0.1, 11, PathMethod::Lattice { sites: 1000 }).unwrap();
            assert!(kernel_distance(&sp, &lat).unwrap().sup < 2e-6);
        }
    }

    #[test]
    fn generic_rho_is_refused() {
        let rules = PathRules::new(ClassicalBC { alpha: Isometry::Identity, rho: bc::Reflectivity::Uniform(0.5) });
        let e = path_kernel(&rules, 0.1, &[(0.5, 0.5)], PathMethod::Lattice { sites: 100 }).unwrap_err();
        assert_eq!(e.kind(), "UnsupportedRho");
        let e = path_kernel(&PathRules::neumann(), 0.1, &[(0.5, 0.5)], PathMethod::MonteCarlo {
            paths: 10,
            steps: 4,
            seed: None,
        })
        .unwrap_err();
        assert_eq!(e.kind(), "BadSeed");
    }

    #[test]
    fn neumann_walkers_keep_all_mass() {
        let est = path_kernel(&PathRules::neumann(), 0.1, &[(0.3, 0.6)], PathMethod::MonteCarlo {
            paths: 20_000,
            steps: 8,
            seed: Some(7),
        })
        .unwrap();
        assert_eq!(est.surviving_mass[0], 1.0);
    }

    #[test]
    fn kernel_distance_checks_grid() {
        let a = image_kernel(&Family::Dirichlet, 0.1, 11, None).unwrap();
        let b = image_kernel(&Family::Dirichlet, 0.1, 13, None).unwrap();
        assert_eq!(kernel_distance(&a, &b).unwrap_err(), PropagatorError::GridMismatch);
        let d = kernel_distance(&a, &a).unwrap();
        assert_eq!((d.l2, d.sup), (0.0, 0.0));
    }
}
