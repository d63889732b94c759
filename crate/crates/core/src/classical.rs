//! Free classical motion with boundary maps `(α, ρ)`.
//!
//! Flights are straight lines, so the integration is event driven: every
//! boundary hit is found in closed form and the bounce law is applied there.
//! At a hit point `x⁻` with exterior normal `n`:
//!
//! * the particle re-emerges at `x⁺ = α(x⁻)`;
//! * the normal velocity obeys `n(x⁺)·v_out = -ρ(x⁻) n(x⁻)·v_in`;
//! * the tangential velocity is pushed forward, `v_out,t = α_*(v_in,t)`.
//!
//! `ρ = ∞` absorbs the particle. Positions and velocities are planar; the
//! interval uses the first coordinate only.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::bc::{ClassicalBC, Isometry};

pub type Vec2r = [f64; 2];

/// Normal speeds below this fraction of `|v|` count as grazing.
pub const GRAZING_TOL: f64 = 1e-14;

/// Shortest admissible flight between consecutive bounces.
pub const STALL_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassicalError {
    #[error("invalid domain: {0}")]
    InvalidDomain(&'static str),
    #[error("invalid initial data: {0}")]
    InvalidState(&'static str),
    #[error("isometry does not act on this domain")]
    IncompatibleIsometry,
    #[error("reflectivity must be positive or +inf, got {0}")]
    InvalidReflectivity(f64),
    #[error("consecutive bounces {dt:e} apart at t = {t}")]
    StalledAtBoundary { t: f64, dt: f64 },
    #[error("variation covers {got} bounces, trajectory has {expected}")]
    VariationMismatch { expected: usize, got: usize },
}

impl ClassicalError {
    pub fn kind(&self) -> &'static str {
        match self {
            ClassicalError::InvalidDomain(_) => "InvalidDomain",
            ClassicalError::InvalidState(_) => "InvalidState",
            ClassicalError::IncompatibleIsometry => "IncompatibleIsometry",
            ClassicalError::InvalidReflectivity(_) => "InvalidReflectivity",
            ClassicalError::StalledAtBoundary { .. } => "StalledAtBoundary",
            ClassicalError::VariationMismatch { .. } => "VariationMismatch",
        }
    }
}

/// Flat domains: `[0, length]`, the disk of `radius` about the origin, or
/// `[0, width] × [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Interval { length: f64 },
    Disk { radius: f64 },
    Rectangle { width: f64, height: f64 },
}

impl Domain {
    pub fn unit_interval() -> Self {
        Domain::Interval { length: 1.0 }
    }

    pub fn validate(&self) -> Result<(), ClassicalError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        let good = match *self {
            Domain::Interval { length } => ok(length),
            Domain::Disk { radius } => ok(radius),
            Domain::Rectangle { width, height } => ok(width) && ok(height),
        };
        if good {
            Ok(())
        } else {
            Err(ClassicalError::InvalidDomain("dimensions must be positive and finite"))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Domain::Interval { .. } => "interval",
            Domain::Disk { .. } => "disk",
            Domain::Rectangle { .. } => "rectangle",
        }
    }

    pub fn is_interior(&self, x: Vec2r) -> bool {
        match *self {
            Domain::Interval { length } => x[0] > 0.0 && x[0] < length && x[1] == 0.0,
            Domain::Disk { radius } => x[0] * x[0] + x[1] * x[1] < radius * radius,
            Domain::Rectangle { width, height } => x[0] > 0.0 && x[0] < width && x[1] > 0.0 && x[1] < height,
        }
    }

    /// Exterior unit normal at boundary piece `side` through `x`.
    pub fn normal(&self, side: usize, x: Vec2r) -> Vec2r {
        match *self {
            Domain::Interval { .. } => [if side == 0 { -1.0 } else { 1.0 }, 0.0],
            Domain::Disk { radius } => [x[0] / radius, x[1] / radius],
            Domain::Rectangle { .. } => match side {
                0 => [-1.0, 0.0],
                1 => [1.0, 0.0],
                2 => [0.0, -1.0],
                _ => [0.0, 1.0],
            },
        }
    }

    /// Unit tangent (counter-clockwise on the disk); zero on the interval.
    pub fn tangent(&self, side: usize, x: Vec2r) -> Vec2r {
        match self {
            Domain::Interval { .. } => [0.0, 0.0],
            _ => {
                let n = self.normal(side, x);
                [-n[1], n[0]]
            }
        }
    }

    fn check_isometry(&self, alpha: &Isometry) -> Result<(), ClassicalError> {
        match (self, alpha) {
            (_, Isometry::Identity) => Ok(()),
            (Domain::Interval { .. } | Domain::Rectangle { .. }, Isometry::Swap) => Ok(()),
            (Domain::Disk { .. }, Isometry::Rotation(a)) if a.is_finite() => Ok(()),
            _ => Err(ClassicalError::IncompatibleIsometry),
        }
    }

    /// `α(x)` for a hit on `side`, and the side it lands on.
    fn image(&self, alpha: &Isometry, side: usize, x: Vec2r) -> (usize, Vec2r) {
        match (*self, alpha) {
            (_, Isometry::Identity) => (side, x),
            (Domain::Interval { length }, Isometry::Swap) => {
                if side == 0 {
                    (1, [length, 0.0])
                } else {
                    (0, [0.0, 0.0])
                }
            }
            (Domain::Rectangle { width, height }, Isometry::Swap) => match side {
                0 => (1, [width, x[1]]),
                1 => (0, [0.0, x[1]]),
                2 => (3, [x[0], height]),
                _ => (2, [x[0], 0.0]),
            },
            (Domain::Disk { .. }, Isometry::Rotation(a)) => (0, rotate(x, *a)),
            _ => (side, x),
        }
    }

    /// `α_*` on a tangent vector.
    fn push_forward(&self, alpha: &Isometry, w: Vec2r) -> Vec2r {
        match alpha {
            Isometry::Rotation(a) => rotate(w, *a),
            _ => w,
        }
    }

    /// Time to the next boundary hit and the sides hit then (two at a
    /// rectangle corner). `from_side` is the piece the flight starts on.
    fn next_hit(&self, x: Vec2r, v: Vec2r, from_side: Option<usize>) -> Option<(f64, Vec<usize>)> {
        let speed = norm(v);
        if speed == 0.0 {
            return None;
        }
        match *self {
            Domain::Interval { length } => {
                if v[0] > 0.0 {
                    Some(((length - x[0]) / v[0], vec![1]))
                } else {
                    Some((x[0] / -v[0], vec![0]))
                }
            }
            Domain::Disk { radius } => {
                let a = dot(v, v);
                let b = 2.0 * dot(x, v);
                let t = if from_side.is_some() {
                    // On the circle the other root is exactly zero.
                    -b / a
                } else {
                    let c = dot(x, x) - radius * radius;
                    let disc = (b * b - 4.0 * a * c).max(0.0);
                    if b > 0.0 {
                        -2.0 * c / (b + disc.sqrt())
                    } else {
                        (-b + disc.sqrt()) / (2.0 * a)
                    }
                };
                Some((t, vec![0]))
            }
            Domain::Rectangle { width, height } => {
                let dims = [width, height];
                let mut best: Option<(f64, usize)> = None;
                for axis in 0..2 {
                    if v[axis].abs() <= GRAZING_TOL * speed {
                        continue;
                    }
                    let (t, side) = if v[axis] > 0.0 {
                        ((dims[axis] - x[axis]) / v[axis], 2 * axis + 1)
                    } else {
                        (x[axis] / -v[axis], 2 * axis)
                    };
                    if best.is_none_or(|b| t < b.0) {
                        best = Some((t, side));
                    }
                }
                let (t, side) = best?;
                // The other wall counts as hit too when the hit point lies on
                // it to rounding: a corner.
                let other = 1 - side / 2;
                let reach = x[other] + t * v[other];
                let slack = 1e-12 * dims[other];
                let mut sides = vec![side];
                if v[other].abs() > GRAZING_TOL * speed {
                    if v[other] > 0.0 && dims[other] - reach <= slack {
                        sides.push(2 * other + 1);
                    } else if v[other] < 0.0 && reach <= slack {
                        sides.push(2 * other);
                    }
                }
                Some((t, sides))
            }
        }
    }

    /// Snap a computed hit point exactly onto the boundary piece.
    fn snap(&self, side: usize, x: Vec2r) -> Vec2r {
        match *self {
            Domain::Interval { length } => [if side == 0 { 0.0 } else { length }, 0.0],
            Domain::Disk { radius } => {
                let r = norm(x);
                [x[0] * radius / r, x[1] * radius / r]
            }
            Domain::Rectangle { width, height } => match side {
                0 => [0.0, x[1].clamp(0.0, height)],
                1 => [width, x[1].clamp(0.0, height)],
                2 => [x[0].clamp(0.0, width), 0.0],
                _ => [x[0].clamp(0.0, width), height],
            },
        }
    }
}

fn dot(a: Vec2r, b: Vec2r) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: Vec2r) -> f64 {
    a[0].hypot(a[1])
}

fn rotate(w: Vec2r, a: f64) -> Vec2r {
    let (s, c) = a.sin_cos();
    [c * w[0] - s * w[1], s * w[0] + c * w[1]]
}

fn axpy(a: f64, x: Vec2r, y: Vec2r) -> Vec2r {
    [a * x[0] + y[0], a * x[1] + y[1]]
}

/// Free flight from `position` at `t_start` with constant `velocity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub position: Vec2r,
    pub velocity: Vec2r,
}

impl Segment {
    pub fn end_position(&self) -> Vec2r {
        axpy(self.t_end - self.t_start, self.velocity, self.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounce {
    pub t: f64,
    pub side_in: usize,
    pub side_out: usize,
    pub point_in: Vec2r,
    pub point_out: Vec2r,
    pub v_in: Vec2r,
    pub v_out: Vec2r,
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Reached the requested final time.
    Time,
    /// Hit a piece with `ρ = ∞`.
    Absorbed,
    MaxBounces,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub domain: Domain,
    pub cbc: ClassicalBC,
    pub segments: Vec<Segment>,
    pub bounces: Vec<Bounce>,
    pub termination: Termination,
    /// Time and point of absorption.
    pub absorbed_at: Option<(f64, Vec2r)>,
}

impl Trajectory {
    /// Position and velocity at the end of the last segment.
    pub fn final_state(&self) -> (f64, Vec2r, Vec2r) {
        let s = self.segments.last().expect("trajectory has a segment");
        (s.t_end, s.end_position(), s.velocity)
    }

    /// Rows `(t, position, velocity, event)` for export: every flight start,
    /// every bounce (outgoing state) and the terminal state.
    pub fn rows(&self) -> Vec<TrajectoryRow> {
        let mut rows = Vec::new();
        let mut b = self.bounces.iter().peekable();
        for s in &self.segments {
            while let Some(bn) = b.next_if(|bn| bn.t <= s.t_start) {
                rows.push(TrajectoryRow { t: bn.t, position: bn.point_out, velocity: bn.v_out, event: Event::Bounce });
            }
            rows.push(TrajectoryRow { t: s.t_start, position: s.position, velocity: s.velocity, event: Event::Flight });
        }
        for bn in b {
            rows.push(TrajectoryRow { t: bn.t, position: bn.point_out, velocity: bn.v_out, event: Event::Bounce });
        }
        let (t, x, v) = self.final_state();
        let event = if self.absorbed_at.is_some() { Event::Absorbed } else { Event::Flight };
        rows.push(TrajectoryRow { t, position: x, velocity: v, event });
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Flight,
    Bounce,
    Absorbed,
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Event::Flight => "flight",
            Event::Bounce => "bounce",
            Event::Absorbed => "absorbed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub position: Vec2r,
    pub velocity: Vec2r,
    pub event: Event,
}

/// Boundary-piece index used to look up `ρ`: interval endpoints 0/1,
/// rectangle sides, a single piece for the disk.
fn rho_at(cbc: &ClassicalBC, side: usize) -> f64 {
    cbc.rho.at(side)
}

/// Event-driven evolution up to time `t_final` or `max_bounces` bounces.
pub fn evolve(
    domain: &Domain,
    cbc: &ClassicalBC,
    x0: Vec2r,
    v0: Vec2r,
    t_final: f64,
    max_bounces: usize,
) -> Result<Trajectory, ClassicalError> {
    domain.validate()?;
    domain.check_isometry(&cbc.alpha)?;
    for &r in cbc.rho.values() {
        if !(r > 0.0) {
            return Err(ClassicalError::InvalidReflectivity(r));
        }
    }
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(ClassicalError::InvalidState("final time must be positive and finite"));
    }
    if !v0.iter().all(|c| c.is_finite()) {
        return Err(ClassicalError::InvalidState("velocity must be finite"));
    }
    if matches!(domain, Domain::Interval { .. }) && v0[1] != 0.0 {
        return Err(ClassicalError::InvalidState("interval motion has no second component"));
    }
    if !domain.is_interior(x0) {
        return Err(ClassicalError::InvalidState("start point must be strictly interior"));
    }

    let mut traj = Trajectory {
        domain: *domain,
        cbc: cbc.clone(),
        segments: Vec::new(),
        bounces: Vec::new(),
        termination: Termination::Time,
        absorbed_at: None,
    };
    let mut t = 0.0;
    let mut x = x0;
    let mut v = v0;
    let mut on_side: Option<usize> = None;
    loop {
        let hit = domain.next_hit(x, v, on_side);
        let (dt, sides) = match hit {
            Some((dt, sides)) if t + dt < t_final => (dt, sides),
            _ => {
                traj.segments.push(Segment { t_start: t, t_end: t_final, position: x, velocity: v });
                return Ok(traj);
            }
        };
        if on_side.is_some() && dt < STALL_TOL {
            return Err(ClassicalError::StalledAtBoundary { t, dt });
        }
        if traj.bounces.len() + sides.len() > max_bounces {
            traj.segments.push(Segment { t_start: t, t_end: t + dt, position: x, velocity: v });
            traj.termination = Termination::MaxBounces;
            return Ok(traj);
        }
        let t_hit = t + dt;
        traj.segments.push(Segment { t_start: t, t_end: t_hit, position: x, velocity: v });
        let mut p = domain.snap(sides[0], axpy(dt, v, x));
        for &side in &sides {
            p = domain.snap(side, p);
            let rho = rho_at(cbc, side);
            if rho == f64::INFINITY {
                traj.termination = Termination::Absorbed;
                traj.absorbed_at = Some((t_hit, p));
                return Ok(traj);
            }
            let n_in = domain.normal(side, p);
            let vn = dot(n_in, v);
            let (side_out, p_out) = domain.image(&cbc.alpha, side, p);
            let n_out = domain.normal(side_out, p_out);
            let v_t = axpy(-vn, n_in, v);
            let v_out = axpy(-rho * vn, n_out, domain.push_forward(&cbc.alpha, v_t));
            traj.bounces.push(Bounce {
                t: t_hit,
                side_in: side,
                side_out,
                point_in: p,
                point_out: p_out,
                v_in: v,
                v_out,
                rho,
            });
            p = p_out;
            v = v_out;
            on_side = Some(side_out);
        }
        t = t_hit;
        x = p;
    }
}

/// `S = Σ |v|² Δt` over the segments (no ½ factor).
pub fn action(traj: &Trajectory) -> f64 {
    traj.segments.iter().map(|s| dot(s.velocity, s.velocity) * (s.t_end - s.t_start)).sum()
}

/// Displacements `δx(t_m⁻)`, `δx(t_m⁺)` at each bounce.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationField {
    pub before: Vec<Vec2r>,
    pub after: Vec<Vec2r>,
    /// `n·δx = 0` on both sides of each bounce.
    pub tangential: Vec<bool>,
}

impl VariationField {
    fn build(traj: &Trajectory, before: Vec<Vec2r>, after: Vec<Vec2r>) -> Self {
        let d = &traj.domain;
        let tangential = traj
            .bounces
            .iter()
            .zip(before.iter().zip(&after))
            .map(|(b, (dm, dp))| {
                let scale = 1.0 + norm(*dm).max(norm(*dp));
                dot(d.normal(b.side_in, b.point_in), *dm).abs() <= 1e-14 * scale
                    && dot(d.normal(b.side_out, b.point_out), *dp).abs() <= 1e-14 * scale
            })
            .collect();
        VariationField { before, after, tangential }
    }

    /// Admissible variation: `amplitudes[m]` times the unit tangent before
    /// bounce `m`, pushed forward by `α_*` after it.
    pub fn tangential(traj: &Trajectory, amplitudes: &[f64]) -> Result<Self, ClassicalError> {
        if amplitudes.len() != traj.bounces.len() {
            return Err(ClassicalError::VariationMismatch { expected: traj.bounces.len(), got: amplitudes.len() });
        }
        let d = &traj.domain;
        let before: Vec<Vec2r> = traj
            .bounces
            .iter()
            .zip(amplitudes)
            .map(|(b, a)| {
                let t = d.tangent(b.side_in, b.point_in);
                [a * t[0], a * t[1]]
            })
            .collect();
        let after = before.iter().map(|w| d.push_forward(&traj.cbc.alpha, *w)).collect();
        Ok(Self::build(traj, before, after))
    }

    /// Inadmissible variation along the exterior normal on both sides.
    pub fn normal(traj: &Trajectory) -> Self {
        let d = &traj.domain;
        let before = traj.bounces.iter().map(|b| d.normal(b.side_in, b.point_in)).collect();
        let after = traj.bounces.iter().map(|b| d.normal(b.side_out, b.point_out)).collect();
        Self::build(traj, before, after)
    }

    /// Arbitrary displacements; tangency is recomputed.
    pub fn from_parts(traj: &Trajectory, before: Vec<Vec2r>, after: Vec<Vec2r>) -> Result<Self, ClassicalError> {
        let n = traj.bounces.len();
        if before.len() != n || after.len() != n {
            return Err(ClassicalError::VariationMismatch { expected: n, got: before.len().min(after.len()) });
        }
        Ok(Self::build(traj, before, after))
    }
}

/// `Σ_m [δx(t_m⁺)·v_out - δx(t_m⁻)·v_in]` together with the per-bounce terms.
pub fn boundary_term(traj: &Trajectory, var: &VariationField) -> Result<(f64, Vec<f64>), ClassicalError> {
    let n = traj.bounces.len();
    if var.before.len() != n || var.after.len() != n {
        return Err(ClassicalError::VariationMismatch { expected: n, got: var.before.len() });
    }
    let terms: Vec<f64> = traj
        .bounces
        .iter()
        .enumerate()
        .map(|(m, b)| dot(var.after[m], b.v_out) - dot(var.before[m], b.v_in))
        .collect();
    Ok((terms.iter().sum(), terms))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BounceAudit {
    pub t: f64,
    /// `|n·v_out| / |n·v_in|`; equals `ρ(x⁻)`.
    pub normal_ratio: f64,
    pub rho: f64,
    /// `|v_out,t| / |v_in,t|`; 1 when both vanish to rounding.
    pub tangential_ratio: f64,
    /// Signed angle from `v_in,t` to `v_out,t`; 0 when both vanish.
    pub tangential_turn: f64,
    pub kinetic_in: f64,
    pub kinetic_out: f64,
}

impl BounceAudit {
    /// Kinetic energy retained, `|v_out|² / |v_in|²`.
    pub fn energy_factor(&self) -> f64 {
        self.kinetic_out / self.kinetic_in
    }
}

/// Normal and tangential momentum bookkeeping at each bounce.
pub fn momentum_audit(traj: &Trajectory) -> Vec<BounceAudit> {
    let d = &traj.domain;
    traj.bounces
        .iter()
        .map(|b| {
            let n_in = d.normal(b.side_in, b.point_in);
            let n_out = d.normal(b.side_out, b.point_out);
            let vn_in = dot(n_in, b.v_in);
            let vn_out = dot(n_out, b.v_out);
            let t_in = axpy(-vn_in, n_in, b.v_in);
            let t_out = axpy(-vn_out, n_out, b.v_out);
            let (a, c) = (norm(t_in), norm(t_out));
            // Rounding leaves ~1e-16 |v| of tangential noise on a radial hit.
            let tiny = 8.0 * f64::EPSILON * (norm(b.v_in) + norm(b.v_out));
            let (tangential_ratio, tangential_turn) = if a <= tiny && c <= tiny {
                (1.0, 0.0)
            } else {
                let cross = t_in[0] * t_out[1] - t_in[1] * t_out[0];
                (c / a, cross.atan2(dot(t_in, t_out)))
            };
            BounceAudit {
                t: b.t,
                normal_ratio: vn_out.abs() / vn_in.abs(),
                rho: b.rho,
                tangential_ratio,
                tangential_turn,
                kinetic_in: dot(b.v_in, b.v_in),
                kinetic_out: dot(b.v_out, b.v_out),
            }
        })
        .collect()
}

/// Kinetic energy is conserved at every bounce iff every `ρ` met was 1.
pub fn conserves_energy(audit: &[BounceAudit]) -> bool {
    audit.iter().all(|a| a.rho == 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bc::Reflectivity;
    use core::f64::consts::PI;

    fn interval(alpha: Isometry, rho: f64) -> ClassicalBC {
        ClassicalBC::new(alpha, Reflectivity::Uniform(rho)).unwrap()
    }

    #[test]
    fn elastic_interval() {
        let tr = evolve(&Domain::unit_interval(), &interval(Isometry::Identity, 1.0), [0.25, 0.0], [1.0, 0.0], 2.0, 10)
            .unwrap();
        let times: Vec<f64> = tr.bounces.iter().map(|b| b.t).collect();
        assert_eq!(times, vec![0.75, 1.75]);
        assert_eq!(tr.bounces[0].point_in, [1.0, 0.0]);
        assert_eq!(tr.bounces[1].point_in, [0.0, 0.0]);
        let (t, x, v) = tr.final_state();
        assert_eq!((t, x, v), (2.0, [0.25, 0.0], [1.0, 0.0]));
        assert_eq!(action(&tr), 2.0);
        assert_eq!(tr.termination, Termination::Time);
    }

    #[test]
    fn swap_wraps_around() {
        let tr =
            evolve(&Domain::unit_interval(), &interval(Isometry::Swap, 1.0), [0.25, 0.0], [1.0, 0.0], 1.0, 10).unwrap();
        assert_eq!(tr.bounces.len(), 1);
        let b = tr.bounces[0];
        assert_eq!((b.t, b.point_in, b.point_out), (0.75, [1.0, 0.0], [0.0, 0.0]));
        let (_, x, v) = tr.final_state();
        assert_eq!((x, v), ([0.25, 0.0], [1.0, 0.0]));
        assert_eq!(action(&tr.clone()), 1.0);
    }

    #[test]
    fn partial_reflection() {
        let tr = evolve(&Domain::unit_interval(), &interval(Isometry::Identity, 0.5), [0.5, 0.0], [1.0, 0.0], 3.0, 10)
            .unwrap();
        let got: Vec<(f64, f64)> = tr.bounces.iter().map(|b| (b.t, b.v_out[0])).collect();
        assert_eq!(got, vec![(0.5, -0.5), (2.5, 0.25)]);
        assert_eq!(tr.final_state().1, [0.125, 0.0]);
        assert_eq!(action(&tr), 1.03125);
        let audit = momentum_audit(&tr);
        assert!(audit.iter().all(|a| a.normal_ratio == 0.5 && a.tangential_ratio == 1.0));
        assert!(!conserves_energy(&audit));
        assert_eq!(audit[0].energy_factor(), 0.25);
    }

    #[test]
    fn single_flight_action() {
        let tr = evolve(&Domain::unit_interval(), &interval(Isometry::Identity, 1.0), [0.25, 0.0], [1.0, 0.0], 0.75, 10)
            .unwrap();
        assert!(tr.bounces.is_empty());
        assert_eq!(action(&tr), 0.75);
    }

    #[test]
    fn absorption_terminates() {
        let tr = evolve(
            &Domain::unit_interval(),
            &interval(Isometry::Identity, f64::INFINITY),
            [0.5, 0.0],
            [-2.0, 0.0],
            3.0,
            10,
        )
        .unwrap();
        assert_eq!(tr.termination, Termination::Absorbed);
        assert_eq!(tr.absorbed_at, Some((0.25, [0.0, 0.0])));
        assert_eq!(tr.rows().last().unwrap().event, Event::Absorbed);
    }

    #[test]
    fn interval_boundary_term_vanishes() {
        let tr = evolve(&Domain::unit_interval(), &interval(Isometry::Identity, 0.5), [0.5, 0.0], [1.0, 0.0], 3.0, 10)
            .unwrap();
        let var = VariationField::tangential(&tr, &[1.0, 1.0]).unwrap();
        assert_eq!(boundary_term(&tr, &var).unwrap().0, 0.0);
        let short = VariationField::tangential(&tr, &[1.0]);
        assert_eq!(short.unwrap_err().kind(), "VariationMismatch");
    }

    #[test]
    fn disk_normal_variation_is_detected() {
        let rho = 0.7;
        let bc = interval(Isometry::Identity, rho);
        let tr = evolve(&Domain::Disk { radius: 1.0 }, &bc, [0.1, 0.2], [1.0, 0.3], 5.0, 50).unwrap();
        let var = VariationField::normal(&tr);
        assert!(var.tangential.iter().all(|t| !t));
        let (_, terms) = boundary_term(&tr, &var).unwrap();
        for (b, term) in tr.bounces.iter().zip(terms) {
            let vn = dot(tr.domain.normal(0, b.point_in), b.v_in).abs();
            assert!((term + (1.0 + rho) * vn).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_rotation_turns_tangent() {
        let bc = interval(Isometry::Rotation(PI / 2.0), 1.0);
        let tr = evolve(&Domain::Disk { radius: 1.0 }, &bc, [0.0, 0.0], [0.6, 0.8], 4.0, 10).unwrap();
        let tr2 = evolve(&Domain::Disk { radius: 1.0 }, &bc, [0.2, -0.1], [0.9, 0.4], 4.0, 10).unwrap();
        for a in momentum_audit(&tr2) {
            assert!((a.tangential_ratio - 1.0).abs() < 1e-14);
            assert!((a.tangential_turn - PI / 2.0).abs() < 1e-12);
            assert!((a.normal_ratio - 1.0).abs() < 1e-14);
        }
        // A radial hit has no tangential part.
        assert!(momentum_audit(&tr).iter().all(|a| a.tangential_ratio == 1.0));
    }

    #[test]
    fn rectangle_corner_and_torus() {
        let dom = Domain::Rectangle { width: 2.0, height: 1.0 };
        let tr = evolve(&dom, &interval(Isometry::Identity, 1.0), [1.0, 0.5], [1.0, 0.5], 1.5, 10).unwrap();
        // Hits the corner (2, 1) at t = 1 and comes straight back.
        assert_eq!(tr.bounces.len(), 2);
        assert_eq!(tr.bounces[1].v_out, [-1.0, -0.5]);
        let torus = evolve(&dom, &interval(Isometry::Swap, 1.0), [0.5, 0.5], [1.0, 0.0], 2.0, 10).unwrap();
        assert_eq!(torus.final_state().1, [0.5, 0.5]);
        let sliding = evolve(&dom, &interval(Isometry::Identity, 1.0), [0.5, 0.5], [0.0, 1.0], 0.25, 10).unwrap();
        assert!(sliding.bounces.is_empty());
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let bc = interval(Isometry::Identity, 1.0);
        let kind = |r: Result<Trajectory, ClassicalError>| r.unwrap_err().kind();
        assert_eq!(kind(evolve(&Domain::unit_interval(), &bc, [0.0, 0.0], [1.0, 0.0], 1.0, 5)), "InvalidState");
        assert_eq!(kind(evolve(&Domain::Disk { radius: -1.0 }, &bc, [0.0, 0.0], [1.0, 0.0], 1.0, 5)), "InvalidDomain");
        let swap = interval(Isometry::Swap, 1.0);
        assert_eq!(kind(evolve(&Domain::Disk { radius: 1.0 }, &swap, [0.0, 0.0], [1.0, 0.0], 1.0, 5)), "IncompatibleIsometry");
        let bad = ClassicalBC { alpha: Isometry::Identity, rho: Reflectivity::Uniform(-1.0) };
        assert_eq!(kind(evolve(&Domain::unit_interval(), &bad, [0.5, 0.0], [1.0, 0.0], 1.0, 5)), "InvalidReflectivity");
    }

    #[test]
    fn max_bounces_stops_early() {
        let tr = evolve(&Domain::unit_interval(), &interval(Isometry::Identity, 1.0), [0.5, 0.0], [1.0, 0.0], 100.0, 3)
            .unwrap();
        assert_eq!(tr.bounces.len(), 3);
        assert_eq!(tr.termination, Termination::MaxBounces);
        assert_eq!(tr.final_state().0, 3.5);
    }
}
