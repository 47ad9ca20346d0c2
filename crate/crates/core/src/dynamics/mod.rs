//! Controlled Kirchhoff equations on SE(3) in impulse coordinates.

mod signal;

use std::io::Write;

use nalgebra::{DMatrix, Matrix3, Matrix6, SVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

pub use signal::{ControlLaw, ControlSignal, Envelope, Term, TimeFn};

use crate::error::{check_dim, Error, Result};
use crate::liealg::{hat, vee, AlgebraVector, LieAlgebra};
use crate::mech::MechSystem;

/// Attitude, position and impulse of the body.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupState {
    pub a: Matrix3<f64>,
    pub r: Vector3<f64>,
    pub pi: Vector3<f64>,
    pub p: Vector3<f64>,
}

impl GroupState {
    pub fn at_rest() -> Self {
        GroupState {
            a: Matrix3::identity(),
            r: Vector3::zeros(),
            pi: Vector3::zeros(),
            p: Vector3::zeros(),
        }
    }

    pub fn new(a: Matrix3<f64>, r: Vector3<f64>, pi: Vector3<f64>, p: Vector3<f64>) -> Result<Self> {
        let s = GroupState { a, r, pi, p };
        if s.orthogonality_defect() > 1e-9 || a.determinant() <= 0.0 {
            return Err(Error::InvalidArgument("attitude is not a rotation".into()));
        }
        Ok(s)
    }

    /// `|A^T A - I|_F`
    pub fn orthogonality_defect(&self) -> f64 {
        (self.a.transpose() * self.a - Matrix3::identity()).norm()
    }

    /// Homogeneous 4x4 matrix of the configuration.
    pub fn config_matrix(&self) -> DMatrix<f64> {
        let mut g = DMatrix::identity(4, 4);
        g.view_mut((0, 0), (3, 3)).copy_from(&self.a);
        g.view_mut((0, 3), (3, 1)).copy_from(&self.r);
        g
    }

    pub fn from_config(g: &DMatrix<f64>, impulse: &AlgebraVector) -> Result<Self> {
        if g.shape() != (4, 4) {
            return Err(Error::InvalidArgument("configuration is not a 4x4 matrix".into()));
        }
        check_dim(6, impulse.dim())?;
        let a: Matrix3<f64> = g.fixed_view::<3, 3>(0, 0).into_owned();
        let r: Vector3<f64> = g.fixed_view::<3, 1>(0, 3).into_owned();
        let (pi, p) = impulse.split3();
        GroupState::new(a, r, pi, p)
    }

    fn to_flat(self) -> SVector<f64, 18> {
        let mut x = SVector::<f64, 18>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                x[3 * i + j] = self.a[(i, j)];
            }
            x[9 + i] = self.r[i];
            x[12 + i] = self.pi[i];
            x[15 + i] = self.p[i];
        }
        x
    }

    fn from_flat(x: &SVector<f64, 18>) -> Self {
        GroupState {
            a: Matrix3::from_fn(|i, j| x[3 * i + j]),
            r: Vector3::new(x[9], x[10], x[11]),
            pi: Vector3::new(x[12], x[13], x[14]),
            p: Vector3::new(x[15], x[16], x[17]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub a_dot: Matrix3<f64>,
    pub r_dot: Vector3<f64>,
    pub pi_dot: Vector3<f64>,
    pub p_dot: Vector3<f64>,
}

impl StateDerivative {
    fn to_flat(self) -> SVector<f64, 18> {
        GroupState {
            a: self.a_dot,
            r: self.r_dot,
            pi: self.pi_dot,
            p: self.p_dot,
        }
        .to_flat()
    }
}

fn is_se3(algebra: &LieAlgebra) -> bool {
    algebra.dim() == 6 && algebra.same_constants(&LieAlgebra::se3(), 1e-12)
}

/// Precomputed Kirchhoff model of a mechanical system on se(3).
#[derive(Debug, Clone)]
pub struct Kirchhoff {
    m: Matrix6<f64>,
    m_inv: Matrix6<f64>,
    inject: DMatrix<f64>,
    drift_const: Vector6<f64>,
    drift_linear: Matrix6<f64>,
}

fn to6(v: &AlgebraVector) -> Vector6<f64> {
    Vector6::from_iterator(v.iter().copied())
}

impl Kirchhoff {
    pub fn new(sys: &MechSystem) -> Result<Self> {
        if !is_se3(sys.algebra()) {
            return Err(Error::NotSe3);
        }
        let mm = sys.inertia().matrix();
        let mi = sys.inertia().inverse();
        let m = Matrix6::from_fn(|i, j| *mm.get(i, j));
        let m_inv = Matrix6::from_fn(|i, j| *mi.get(i, j));
        let k = sys.controls().len();
        let mut inject = DMatrix::zeros(6, k);
        for (a, y) in sys.controls().iter().enumerate() {
            inject.set_column(a, &(m * to6(y)));
        }
        let d = sys.drift_linear();
        let drift_linear = m * Matrix6::from_fn(|i, j| *d.get(i, j));
        Ok(Kirchhoff {
            m,
            m_inv,
            inject,
            drift_const: m * to6(sys.drift_const()),
            drift_linear,
        })
    }

    pub fn controls(&self) -> usize {
        self.inject.ncols()
    }

    pub fn inertia(&self) -> &Matrix6<f64> {
        &self.m
    }

    fn impulse(s: &GroupState) -> Vector6<f64> {
        Vector6::new(s.pi[0], s.pi[1], s.pi[2], s.p[0], s.p[1], s.p[2])
    }

    pub fn body_velocity(&self, s: &GroupState) -> (Vector3<f64>, Vector3<f64>) {
        let xi = self.m_inv * Self::impulse(s);
        (xi.fixed_rows::<3>(0).into_owned(), xi.fixed_rows::<3>(3).into_owned())
    }

    /// Impulse `(Pi, P)` of a body velocity.
    pub fn impulse_of(&self, xi: &AlgebraVector) -> Result<AlgebraVector> {
        check_dim(6, xi.dim())?;
        Ok(AlgebraVector((self.m * to6(xi)).iter().copied().collect()))
    }

    pub fn energy(&self, s: &GroupState) -> f64 {
        let mu = Self::impulse(s);
        0.5 * mu.dot(&(self.m_inv * mu))
    }

    pub fn rhs(&self, s: &GroupState, u: &[f64]) -> Result<StateDerivative> {
        check_dim(self.controls(), u.len())?;
        let xi = self.m_inv * Self::impulse(s);
        let w: Vector3<f64> = xi.fixed_rows::<3>(0).into_owned();
        let v: Vector3<f64> = xi.fixed_rows::<3>(3).into_owned();
        let mut force = self.drift_const + self.drift_linear * xi;
        for (a, &ua) in u.iter().enumerate() {
            if ua != 0.0 {
                force += self.inject.fixed_view::<6, 1>(0, a) * ua;
            }
        }
        Ok(StateDerivative {
            a_dot: s.a * hat(&w),
            r_dot: s.a * v,
            pi_dot: s.pi.cross(&w) + s.p.cross(&v) + force.fixed_rows::<3>(0),
            p_dot: s.p.cross(&w) + force.fixed_rows::<3>(3),
        })
    }
}

/// Body velocity `(omega, v) = M^{-1} (Pi, P)`.
pub fn body_velocity(sys: &MechSystem, s: &GroupState) -> Result<(Vector3<f64>, Vector3<f64>)> {
    Ok(Kirchhoff::new(sys)?.body_velocity(s))
}

/// Right-hand side of the controlled Kirchhoff equations with attitude and
/// position kinematics.
pub fn kirchhoff_rhs(sys: &MechSystem, s: &GroupState, u: &[f64]) -> Result<StateDerivative> {
    Kirchhoff::new(sys)?.rhs(s, u)
}

pub fn casimirs(s: &GroupState) -> (f64, f64) {
    (s.p.norm_squared(), s.pi.dot(&s.p))
}

/// Rotation angle of a rotation matrix, accurate near zero and pi.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let s = 0.5 * vee(&(r - r.transpose())).norm();
    let c = 0.5 * (r.trace() - 1.0);
    s.atan2(c)
}

/// `|r1 - r2| + angle(A1^T A2)`.
pub fn se3_distance(s1: &GroupState, s2: &GroupState) -> f64 {
    (s1.r - s2.r).norm() + rotation_angle(&(s1.a.transpose() * s2.a))
}

/// `exp(S(theta))` by the Rodrigues formula.
pub fn rodrigues(theta: &Vector3<f64>) -> Matrix3<f64> {
    let t2 = theta.norm_squared();
    let k = hat(theta);
    let (a, b) = if t2 < 1e-8 {
        (1.0 - t2 / 6.0 + t2 * t2 / 120.0, 0.5 - t2 / 24.0 + t2 * t2 / 720.0)
    } else {
        let t = t2.sqrt();
        (t.sin() / t, (1.0 - t.cos()) / t2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Nearest rotation in the Frobenius norm (polar factor).
pub fn polar_project(a: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = a.svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        u2.column_mut(2).neg_mut();
        r = u2 * vt;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classical RK4 with polar re-orthonormalization of the attitude.
    #[default]
    Rk4Reproject,
    /// First-order scheme with the exact exponential attitude update.
    LieEuler,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk4_reproject" | "rk4" => Ok(Method::Rk4Reproject),
            "lie_euler" => Ok(Method::LieEuler),
            _ => Err(Error::InvalidArgument(format!("unknown integration method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrateOptions {
    pub method: Method,
    /// Keep every n-th step (the final state is always kept).
    pub record_every: usize,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        IntegrateOptions {
            method: Method::Rk4Reproject,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<GroupState>,
    pub controls: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&GroupState> {
        self.states.last()
    }

    fn push(&mut self, t: f64, s: GroupState, u: Vec<f64>) {
        self.times.push(t);
        self.states.push(s);
        self.controls.push(u);
    }

    /// Writes the trajectory as CSV: time, attitude (row-major), position,
    /// angular and linear impulse, then one column per control channel.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let k = self.controls.first().map_or(0, Vec::len);
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = vec!["t".into()];
        for i in 1..=3 {
            for j in 1..=3 {
                header.push(format!("A{i}{j}"));
            }
        }
        header.extend(["rx", "ry", "rz", "Pi1", "Pi2", "Pi3", "P1", "P2", "P3"].map(String::from));
        header.extend((1..=k).map(|a| format!("u{a}")));
        out.write_record(&header)?;
        for ((t, s), u) in self.times.iter().zip(&self.states).zip(&self.controls) {
            let mut row = vec![*t];
            for i in 0..3 {
                for j in 0..3 {
                    row.push(s.a[(i, j)]);
                }
            }
            row.extend(s.r.iter().chain(s.pi.iter()).chain(s.p.iter()).copied());
            row.extend(u.iter().copied());
            out.write_record(row.iter().map(|x| format!("{x:.17e}")))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Integrates the controlled system from `s0` over `[0, t_final]`.
///
/// The step is shrunk to `t_final / ceil(t_final / dt)` so the grid ends
/// exactly at `t_final`.
pub fn integrate(
    sys: &MechSystem,
    s0: &GroupState,
    u: &dyn ControlLaw,
    t_final: f64,
    dt: f64,
    method: Method,
) -> Result<Trajectory> {
    integrate_with(
        &Kirchhoff::new(sys)?,
        s0,
        u,
        t_final,
        dt,
        IntegrateOptions {
            method,
            record_every: 1,
        },
    )
}

pub fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "need positive finite t_final and dt (got {t_final}, {dt})"
        )));
    }
    Ok(((t_final / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize)
}

pub fn integrate_with(
    model: &Kirchhoff,
    s0: &GroupState,
    u: &dyn ControlLaw,
    t_final: f64,
    dt: f64,
    opts: IntegrateOptions,
) -> Result<Trajectory> {
    check_dim(model.controls(), u.channels())?;
    let n = step_count(t_final, dt)?;
    let h = t_final / n as f64;
    let every = opts.record_every.max(1);
    let k = model.controls();

    let mut traj = Trajectory::default();
    let mut s = *s0;
    let mut u0 = vec![0.0; k];
    let mut um = vec![0.0; k];
    let mut u1 = vec![0.0; k];
    u.eval_into(0.0, &mut u0);
    traj.push(0.0, s, u0.clone());

    for i in 0..n {
        let t = i as f64 * h;
        let t_next = if i + 1 == n { t_final } else { (i + 1) as f64 * h };
        u.eval_into(t, &mut u0);
        s = match opts.method {
            Method::Rk4Reproject => {
                u.eval_into(t + 0.5 * h, &mut um);
                u.eval_into(t_next, &mut u1);
                let x = s.to_flat();
                let k1 = model.rhs(&s, &u0)?.to_flat();
                let k2 = model.rhs(&GroupState::from_flat(&(x + k1 * (0.5 * h))), &um)?.to_flat();
                let k3 = model.rhs(&GroupState::from_flat(&(x + k2 * (0.5 * h))), &um)?.to_flat();
                let k4 = model.rhs(&GroupState::from_flat(&(x + k3 * h)), &u1)?.to_flat();
                let mut next = GroupState::from_flat(&(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)));
                next.a = polar_project(&next.a);
                next
            }
            Method::LieEuler => {
                let d = model.rhs(&s, &u0)?;
                let (w, _) = model.body_velocity(&s);
                GroupState {
                    a: s.a * rodrigues(&(w * h)),
                    r: s.r + d.r_dot * h,
                    pi: s.pi + d.pi_dot * h,
                    p: s.p + d.p_dot * h,
                }
            }
        };
        if !s.to_flat().iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { time: t_next });
        }
        if (i + 1) % every == 0 || i + 1 == n {
            let mut uc = vec![0.0; k];
            u.eval_into(t_next, &mut uc);
            traj.push(t_next, s, uc);
        }
    }
    Ok(traj)
}

/// Largest relative drift of the conserved quantities of the uncontrolled
/// flow, plus the worst attitude orthogonality defect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Drift {
    pub energy: f64,
    pub p_squared: f64,
    pub pi_dot_p: f64,
    pub orthogonality: f64,
}

impl Drift {
    pub fn max_conserved(&self) -> f64 {
        self.energy.max(self.p_squared).max(self.pi_dot_p)
    }
}

pub fn conservation_drift(model: &Kirchhoff, traj: &Trajectory) -> Drift {
    let Some(s0) = traj.states.first() else {
        return Drift {
            energy: 0.0,
            p_squared: 0.0,
            pi_dot_p: 0.0,
            orthogonality: 0.0,
        };
    };
    let scale = (s0.pi.norm_squared() + s0.p.norm_squared()).max(f64::MIN_POSITIVE);
    let rel = |q0: f64, q: f64| (q - q0).abs() / q0.abs().max(f64::EPSILON * scale);
    let e0 = model.energy(s0);
    let (c0, d0) = casimirs(s0);
    let mut drift = Drift {
        energy: 0.0,
        p_squared: 0.0,
        pi_dot_p: 0.0,
        orthogonality: 0.0,
    };
    for s in &traj.states {
        let (c, d) = casimirs(s);
        drift.energy = drift.energy.max(rel(e0, model.energy(s)));
        drift.p_squared = drift.p_squared.max(rel(c0, c));
        drift.pi_dot_p = drift.pi_dot_p.max(rel(d0, d));
        drift.orthogonality = drift.orthogonality.max(s.orthogonality_defect());
    }
    drift
}
