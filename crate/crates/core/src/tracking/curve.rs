//! Reference curves on matrix groups, described by configuration and body
//! velocity.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::dynamics::rodrigues;
use crate::error::{Error, Result};
use crate::liealg::{hat, AlgebraVector};
use crate::tracking::group::{MatrixGroup, Se3Group};

/// A `C^1` curve `g: [0, tau] -> G` given by its configuration and its body
/// velocity `g^{-1} dg/dt`.
pub trait BodyPath: Send + Sync {
    fn algebra_dim(&self) -> usize;
    fn duration(&self) -> f64;
    fn config(&self, t: f64) -> DMatrix<f64>;
    fn body_velocity(&self, t: f64) -> AlgebraVector;

    /// Derivative of the body velocity (one-sided differences at the ends).
    fn body_acceleration(&self, t: f64) -> AlgebraVector {
        let tau = self.duration();
        let h = 1e-6 * tau.max(1.0);
        let (a, b) = ((t - h).max(0.0), (t + h).min(tau));
        let (va, vb) = (self.body_velocity(a), self.body_velocity(b));
        (&vb - &va).scale(&(1.0 / (b - a)))
    }
}

/// Cubic Hermite piece of an SE(3) curve in position and rotation vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HermiteSegment {
    pub t0: f64,
    pub t1: f64,
    pub r: [Vector3<f64>; 2],
    pub dr: [Vector3<f64>; 2],
    pub phi: [Vector3<f64>; 2],
    pub dphi: [Vector3<f64>; 2],
}

fn hermite(p: &[Vector3<f64>; 2], d: &[Vector3<f64>; 2], h: f64, s: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let (s2, s3) = (s * s, s * s * s);
    let value = p[0] * (2.0 * s3 - 3.0 * s2 + 1.0)
        + d[0] * (h * (s3 - 2.0 * s2 + s))
        + p[1] * (-2.0 * s3 + 3.0 * s2)
        + d[1] * (h * (s3 - s2));
    let deriv = (p[0] * (6.0 * s2 - 6.0 * s) + d[0] * (h * (3.0 * s2 - 4.0 * s + 1.0)) + p[1] * (-6.0 * s2 + 6.0 * s)
        + d[1] * (h * (3.0 * s2 - 2.0 * s)))
        / h;
    let second = (p[0] * (12.0 * s - 6.0) + d[0] * (h * (6.0 * s - 4.0)) + p[1] * (-12.0 * s + 6.0) + d[1] * (h * (6.0 * s - 2.0)))
        / (h * h);
    (value, deriv, second)
}

impl HermiteSegment {
    fn eval(&self, t: f64) -> [(Vector3<f64>, Vector3<f64>, Vector3<f64>); 2] {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        [hermite(&self.r, &self.dr, h, s), hermite(&self.phi, &self.dphi, h, s)]
    }
}

/// Right Jacobian of the rotation exponential: `A^T dA/dt = S(J_r(phi) dphi/dt)`.
pub fn right_jacobian(phi: &Vector3<f64>) -> Matrix3<f64> {
    let t2 = phi.norm_squared();
    let k = hat(phi);
    let (a, b) = if t2 < 1e-8 {
        (0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let t = t2.sqrt();
        ((1.0 - t.cos()) / t2, (t - t.sin()) / (t2 * t))
    };
    Matrix3::identity() - k * a + k * k * b
}

#[derive(Debug, Clone, PartialEq)]
pub enum CurveKind {
    /// Straight translation by `displacement`, fixed attitude.
    Line { displacement: Vector3<f64> },
    /// One turn of a circle in the horizontal plane through the origin,
    /// fixed attitude.
    Circle { radius: f64 },
    /// Circle plus climb of `pitch` per turn.
    Helix { radius: f64, pitch: f64 },
    /// Rotation by `angle` about the unit `axis` at constant rate.
    AttitudeSlew { axis: Vector3<f64>, angle: f64 },
    /// Piecewise cubic Hermite curve in position and rotation vector.
    Hermite(Vec<HermiteSegment>),
}

/// Reference curve on SE(3), defined on `[0, duration]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCurve {
    kind: CurveKind,
    duration: f64,
}

/// `(t, position, rotation vector)`.
pub type Waypoint = (f64, Vector3<f64>, Vector3<f64>);

/// Tolerance of the joint continuity check.
pub const JOINT_TOL: f64 = 1e-6;

impl ReferenceCurve {
    fn builtin(kind: CurveKind, duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidCurve(format!("duration must be positive, got {duration}")));
        }
        Ok(ReferenceCurve { kind, duration })
    }

    pub fn line(displacement: Vector3<f64>, duration: f64) -> Result<Self> {
        Self::builtin(CurveKind::Line { displacement }, duration)
    }

    pub fn circle(radius: f64, duration: f64) -> Result<Self> {
        Self::builtin(CurveKind::Circle { radius }, duration)
    }

    pub fn helix(radius: f64, pitch: f64, duration: f64) -> Result<Self> {
        Self::builtin(CurveKind::Helix { radius, pitch }, duration)
    }

    pub fn attitude_slew(axis: Vector3<f64>, angle: f64, duration: f64) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidCurve("slew axis must be nonzero".into()));
        }
        Self::builtin(CurveKind::AttitudeSlew { axis: axis / n, angle }, duration)
    }

    /// Piecewise Hermite curve; segments must tile `[0, tau]` and join with
    /// matching value and derivative.
    pub fn hermite(segments: Vec<HermiteSegment>) -> Result<Self> {
        let first = segments.first().ok_or_else(|| Error::InvalidCurve("no segments".into()))?;
        if first.t0 != 0.0 {
            return Err(Error::InvalidCurve("first segment must start at t = 0".into()));
        }
        for (i, s) in segments.iter().enumerate() {
            let finite = [s.t0, s.t1].iter().all(|x| x.is_finite())
                && [s.r, s.dr, s.phi, s.dphi].iter().flatten().all(|v| v.iter().all(|x| x.is_finite()));
            if !finite || s.t1 <= s.t0 {
                return Err(Error::InvalidCurve(format!("segment {} is degenerate or nonfinite", i + 1)));
            }
        }
        for (i, w) in segments.windows(2).enumerate() {
            let (a, b) = (&w[0], &w[1]);
            if (a.t1 - b.t0).abs() > JOINT_TOL {
                return Err(Error::InvalidCurve(format!("gap between segments {} and {}", i + 1, i + 2)));
            }
            let (left, right) = (a.eval(a.t1), b.eval(b.t0));
            for c in 0..2 {
                if (left[c].0 - right[c].0).norm() > JOINT_TOL {
                    return Err(Error::InvalidCurve(format!("curve is discontinuous at t = {}", b.t0)));
                }
                if (left[c].1 - right[c].1).norm() > JOINT_TOL {
                    return Err(Error::InvalidCurve(format!("derivative jumps at t = {} (not C1)", b.t0)));
                }
            }
        }
        let duration = segments.last().expect("nonempty").t1;
        Ok(ReferenceCurve {
            kind: CurveKind::Hermite(segments),
            duration,
        })
    }

    /// Interpolates waypoints `(t_i, r_i, phi_i)` with centred-difference
    /// tangents; `C^1` by construction.
    pub fn waypoints(points: &[Waypoint]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidCurve("need at least two waypoints".into()));
        }
        let n = points.len();
        let tangent = |i: usize, sel: fn(&Waypoint) -> Vector3<f64>| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (sel(&points[b]) - sel(&points[a])) / (points[b].0 - points[a].0)
        };
        let segments = (0..n - 1)
            .map(|i| HermiteSegment {
                t0: points[i].0,
                t1: points[i + 1].0,
                r: [points[i].1, points[i + 1].1],
                dr: [tangent(i, |p| p.1), tangent(i + 1, |p| p.1)],
                phi: [points[i].2, points[i + 1].2],
                dphi: [tangent(i, |p| p.2), tangent(i + 1, |p| p.2)],
            })
            .collect();
        Self::hermite(segments)
    }

    pub fn kind(&self) -> &CurveKind {
        &self.kind
    }

    fn segment(&self, segs: &[HermiteSegment], t: f64) -> usize {
        segs.iter().position(|s| t <= s.t1).unwrap_or(segs.len() - 1)
    }

    fn angle(&self, t: f64) -> (f64, f64) {
        (TAU * t / self.duration, TAU / self.duration)
    }

    /// Attitude, position, body velocity and its derivative at `t`.
    fn eval(&self, t: f64) -> (Matrix3<f64>, Vector3<f64>, AlgebraVector, AlgebraVector) {
        let i3 = Matrix3::identity();
        let z = Vector3::zeros();
        let planar = |radius: f64, climb: f64| {
            let (th, dth) = self.angle(t);
            let (s, c) = th.sin_cos();
            let r = Vector3::new(radius * s, radius * (1.0 - c), climb * th / TAU);
            let v = Vector3::new(radius * dth * c, radius * dth * s, climb * dth / TAU);
            let a = Vector3::new(-radius * dth * dth * s, radius * dth * dth * c, 0.0);
            (i3, r, AlgebraVector::join3(&z, &v), AlgebraVector::join3(&z, &a))
        };
        match &self.kind {
            CurveKind::Line { displacement } => {
                let v = displacement / self.duration;
                (i3, v * t, AlgebraVector::join3(&z, &v), AlgebraVector::zeros(6))
            }
            CurveKind::Circle { radius } => planar(*radius, 0.0),
            CurveKind::Helix { radius, pitch } => planar(*radius, *pitch),
            CurveKind::AttitudeSlew { axis, angle } => {
                let w = axis * (angle / self.duration);
                (rodrigues(&(w * t)), z, AlgebraVector::join3(&w, &z), AlgebraVector::zeros(6))
            }
            CurveKind::Hermite(segs) => {
                let seg = &segs[self.segment(segs, t)];
                let [(r, dr, _), (phi, dphi, _)] = seg.eval(t);
                let a = rodrigues(&phi);
                let w = right_jacobian(&phi) * dphi;
                let v = a.transpose() * dr;
                (a, r, AlgebraVector::join3(&w, &v), AlgebraVector::zeros(6))
            }
        }
    }

    pub fn group(&self) -> Se3Group {
        Se3Group
    }
}

impl BodyPath for ReferenceCurve {
    fn algebra_dim(&self) -> usize {
        6
    }

    fn duration(&self) -> f64 {
        self.duration
    }

    fn config(&self, t: f64) -> DMatrix<f64> {
        let (a, r, _, _) = self.eval(t);
        let mut g = DMatrix::identity(4, 4);
        g.view_mut((0, 0), (3, 3)).copy_from(&a);
        g.view_mut((0, 3), (3, 1)).copy_from(&r);
        g
    }

    fn body_velocity(&self, t: f64) -> AlgebraVector {
        self.eval(t).2
    }

    fn body_acceleration(&self, t: f64) -> AlgebraVector {
        match self.kind {
            CurveKind::Hermite(_) => {
                let tau = self.duration;
                let h = 1e-6 * tau.max(1.0);
                let (a, b) = ((t - h).max(0.0), (t + h).min(tau));
                (&self.body_velocity(b) - &self.body_velocity(a)).scale(&(1.0 / (b - a)))
            }
            _ => self.eval(t).3,
        }
    }
}

/// One-parameter subgroup `t -> g0 exp(t xi)` on any matrix group.
#[derive(Debug, Clone)]
pub struct ExpCurve {
    group: Arc<dyn MatrixGroup>,
    start: DMatrix<f64>,
    xi: AlgebraVector,
    duration: f64,
}

impl ExpCurve {
    pub fn new(group: Arc<dyn MatrixGroup>, xi: AlgebraVector, duration: f64) -> Result<Self> {
        crate::error::check_dim(group.algebra_dim(), xi.dim())?;
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidCurve(format!("duration must be positive, got {duration}")));
        }
        Ok(ExpCurve {
            start: group.identity(),
            group,
            xi,
            duration,
        })
    }

    pub fn starting_at(mut self, g0: DMatrix<f64>) -> Self {
        self.start = g0;
        self
    }
}

impl BodyPath for ExpCurve {
    fn algebra_dim(&self) -> usize {
        self.xi.dim()
    }

    fn duration(&self) -> f64 {
        self.duration
    }

    fn config(&self, t: f64) -> DMatrix<f64> {
        &self.start * self.group.exp(&self.xi.scale(&t))
    }

    fn body_velocity(&self, _t: f64) -> AlgebraVector {
        self.xi.clone()
    }

    fn body_acceleration(&self, _t: f64) -> AlgebraVector {
        AlgebraVector::zeros(self.xi.dim())
    }
}
