//! Stage 2: realizing a prescribed body-velocity profile with the mechanical
//! system, using zero-mean pairs for symmetric-product directions.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{ControlLaw, ControlSignal, Envelope, Term};
use crate::error::{check_dim, Error, Result};
use crate::liealg::AlgebraVector;
use crate::linalg::{self, RANK_TOL};
use crate::mech::MechSystem;
use crate::tracking::curve::BodyPath;
use crate::tracking::kinematic::{independent_directions, split_product, KinematicPlan, DECOMPOSITION_TOL, PLAN_SAMPLES};

/// Body velocity `xi(t)` and its derivative on `[0, duration]`.
pub trait VelocityProfile: Send + Sync {
    fn algebra_dim(&self) -> usize;
    fn duration(&self) -> f64;
    fn velocity_and_rate(&self, t: f64) -> (AlgebraVector, AlgebraVector);
}

impl VelocityProfile for KinematicPlan {
    fn algebra_dim(&self) -> usize {
        self.curve().algebra_dim()
    }

    fn duration(&self) -> f64 {
        self.curve().duration()
    }

    fn velocity_and_rate(&self, t: f64) -> (AlgebraVector, AlgebraVector) {
        KinematicPlan::velocity_and_rate(self, t)
    }
}

/// The velocity profile of a curve itself.
pub struct CurveProfile(pub Arc<dyn BodyPath>);

impl VelocityProfile for CurveProfile {
    fn algebra_dim(&self) -> usize {
        self.0.algebra_dim()
    }

    fn duration(&self) -> f64 {
        self.0.duration()
    }

    fn velocity_and_rate(&self, t: f64) -> (AlgebraVector, AlgebraVector) {
        (self.0.body_velocity(t), self.0.body_acceleration(t))
    }
}

/// A control pair oscillated at `omega` to inject `<Y_a : Y_b>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPair {
    pub a: usize,
    pub b: usize,
    pub direction: AlgebraVector,
    pub omega: f64,
    pub balance: f64,
    pub delta: f64,
}

/// Open-loop controls on the physical channels.
///
/// With `u_a = mu W cos(W t)`, `u_b = nu W cos(W t)` the averaged force is
/// `-(mu nu / 2) <Y_a:Y_b> - (mu^2/4) <Y_a:Y_a> - (nu^2/4) <Y_b:Y_b>`; the
/// diagonal terms are cancelled on the direct channels.
pub struct MechanicalPlan {
    sys: MechSystem,
    profile: Arc<dyn VelocityProfile>,
    pairs: Vec<ProductPair>,
    /// `m x n`: product coefficients from the required force.
    pair_map: DMatrix<f64>,
    /// `k x n`: direct channels from a force in `span Y`.
    direct_map: DMatrix<f64>,
    /// `<Y_a : Y_a>` per channel.
    diagonal: Vec<DVector<f64>>,
    omega: f64,
    residual: f64,
}

impl std::fmt::Debug for MechanicalPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MechanicalPlan")
            .field("pairs", &self.pairs)
            .field("omega", &self.omega)
            .field("residual", &self.residual)
            .finish()
    }
}

/// Force the controls must supply along `xi`:
/// `dxi/dt + <xi : xi>/2 - Y(xi)`.
pub fn required_force(sys: &MechSystem, xi: &AlgebraVector, xi_dot: &AlgebraVector) -> Result<AlgebraVector> {
    let half = sys.symmetric_product(xi, xi)?.scale(&0.5);
    Ok(&(xi_dot + &half) - &sys.drift(xi)?)
}

struct Split {
    direct: DVector<f64>,
    /// `(mu, nu)` per pair.
    amplitudes: Vec<(f64, f64)>,
}

impl MechanicalPlan {
    pub fn pairs(&self) -> &[ProductPair] {
        &self.pairs
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn max_frequency(&self) -> f64 {
        self.pairs.iter().map(|p| p.omega).fold(0.0, f64::max)
    }

    fn split(&self, t: f64) -> Split {
        let (xi, xi_dot) = self.profile.velocity_and_rate(t);
        let f = required_force(&self.sys, &xi, &xi_dot)
            .expect("dimensions checked at construction")
            .to_dvector();
        let c = &self.pair_map * &f;
        let mut target = f;
        let mut amplitudes = Vec::with_capacity(self.pairs.len());
        for (p, pair) in self.pairs.iter().enumerate() {
            let (mu, _, nu, _) = split_product(-2.0 * c[p], 0.0, pair.balance, pair.delta);
            target -= pair.direction.to_dvector() * c[p];
            target += &self.diagonal[pair.a] * (0.25 * mu * mu) + &self.diagonal[pair.b] * (0.25 * nu * nu);
            amplitudes.push((mu, nu));
        }
        Split {
            direct: &self.direct_map * target,
            amplitudes,
        }
    }

    /// Residual of the decomposition at `t`, relative to `max(|f|, 1)`.
    fn decomposition_residual(&self, t: f64) -> f64 {
        let (xi, xi_dot) = self.profile.velocity_and_rate(t);
        let f = required_force(&self.sys, &xi, &xi_dot).expect("checked").to_dvector();
        let s = self.split(t);
        let mut rebuilt = DVector::zeros(f.len());
        for (a, y) in self.sys.controls().iter().enumerate() {
            rebuilt += y.to_dvector() * s.direct[a];
        }
        for (pair, (mu, nu)) in self.pairs.iter().zip(&s.amplitudes) {
            rebuilt -= pair.direction.to_dvector() * (0.5 * mu * nu);
            rebuilt -= &self.diagonal[pair.a] * (0.25 * mu * mu) + &self.diagonal[pair.b] * (0.25 * nu * nu);
        }
        (f.clone() - rebuilt).norm() / f.norm().max(1.0)
    }

    /// The controls as a signal of smooth and oscillating terms.
    pub fn signal(self: &Arc<Self>) -> ControlSignal {
        let k = self.sys.controls().len();
        let mut s = ControlSignal::zero(k);
        for a in 0..k {
            let plan = Arc::clone(self);
            s.push(a, Term::Fn(Arc::new(move |t| plan.split(t).direct[a])));
        }
        for (p, pair) in self.pairs.iter().enumerate() {
            for (channel, first) in [(pair.a, true), (pair.b, false)] {
                let plan = Arc::clone(self);
                let w = pair.omega;
                let envelope = Envelope::Fn(Arc::new(move |t| {
                    let (mu, nu) = plan.split(t).amplitudes[p];
                    w * if first { mu } else { nu }
                }));
                s.push(channel, Term::Osc { envelope, freq_hz: w / TAU, phase: 0.0 });
            }
        }
        s
    }
}

impl ControlLaw for MechanicalPlan {
    fn channels(&self) -> usize {
        self.sys.controls().len()
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let s = self.split(t);
        out.copy_from_slice(s.direct.as_slice());
        for (pair, (mu, nu)) in self.pairs.iter().zip(&s.amplitudes) {
            let c = (pair.omega * t).cos() * pair.omega;
            out[pair.a] += mu * c;
            out[pair.b] += nu * c;
        }
    }
}

/// Synthesizes physical controls whose averaged effect makes the system's
/// body velocity follow `profile`, starting from the profile's initial
/// velocity. Product pair `p` oscillates at `(p + 1) omega` (rad/s).
pub fn mechanical_synthesis(sys: &MechSystem, profile: Arc<dyn VelocityProfile>, omega: f64) -> Result<MechanicalPlan> {
    let n = sys.dim();
    check_dim(n, profile.algebra_dim())?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("oscillation frequency must be positive, got {omega}")));
    }
    let controls = sys.controls();
    let k = controls.len();
    let yvecs: Vec<DVector<f64>> = controls.iter().map(AlgebraVector::to_dvector).collect();
    let ybasis = linalg::orthonormal_basis(n, &yvecs, RANK_TOL);
    let mut perp = DMatrix::identity(n, n);
    for b in &ybasis {
        perp -= b * b.transpose();
    }

    let diagonal: Vec<DVector<f64>> = controls
        .iter()
        .map(|y| sys.symmetric_product(y, y).map(|v| v.to_dvector()))
        .collect::<Result<_>>()?;

    let mut candidates = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            candidates.push((a, b, sys.symmetric_product(&controls[a], &controls[b])?));
        }
    }
    let projected: Vec<DVector<f64>> = candidates.iter().map(|(_, _, d)| &perp * d.to_dvector()).collect();
    let chosen = independent_directions(&[], &projected);

    let tau = profile.duration();
    let times: Vec<f64> = (0..PLAN_SAMPLES).map(|s| tau * s as f64 / (PLAN_SAMPLES - 1) as f64).collect();
    let forces: Vec<DVector<f64>> = times
        .iter()
        .map(|&t| {
            let (xi, xd) = profile.velocity_and_rate(t);
            required_force(sys, &xi, &xd).map(|f| f.to_dvector())
        })
        .collect::<Result<_>>()?;

    let solve = |idx: &[usize]| -> DMatrix<f64> {
        if idx.is_empty() {
            return DMatrix::zeros(0, n);
        }
        let cols: Vec<DVector<f64>> = idx.iter().map(|&i| projected[i].clone()).collect();
        linalg::pinv(&linalg::columns(n, &cols)) * &perp
    };
    let full = solve(&chosen);
    let fscale = forces.iter().map(|f| f.norm()).fold(0.0, f64::max);
    let mut sup = vec![0.0f64; chosen.len()];
    for f in &forces {
        for (s, c) in sup.iter_mut().zip((&full * f).iter()) {
            *s = s.max(c.abs());
        }
    }
    let keep: Vec<(usize, f64)> = chosen
        .iter()
        .zip(&sup)
        .filter(|(_, &s)| s > 1e-12 * fscale.max(f64::MIN_POSITIVE))
        .map(|(&i, &s)| (i, s))
        .collect();
    let used: Vec<usize> = keep.iter().map(|&(i, _)| i).collect();
    let pair_map = solve(&used);

    let pairs: Vec<ProductPair> = keep
        .iter()
        .enumerate()
        .map(|(p, &(i, s))| {
            let (a, b, d) = &candidates[i];
            let (na, nb) = (controls[*a].norm(), controls[*b].norm());
            ProductPair {
                a: *a,
                b: *b,
                direction: d.clone(),
                omega: (p + 1) as f64 * omega,
                balance: if na > 0.0 && nb > 0.0 { nb / na } else { 1.0 },
                delta: 0.1 * 2.0 * s,
            }
        })
        .collect();

    let plan = MechanicalPlan {
        sys: sys.clone(),
        profile,
        pairs,
        pair_map,
        direct_map: linalg::pinv(&linalg::columns(n, &yvecs)),
        diagonal,
        omega,
        residual: 0.0,
    };
    let mut residual = 0.0f64;
    for &t in &times {
        let r = plan.decomposition_residual(t);
        if r > DECOMPOSITION_TOL.max(1e-7) {
            return Err(Error::DecompositionResidual { time: t, residual: r });
        }
        residual = residual.max(r);
    }
    Ok(MechanicalPlan { residual, ..plan })
}
