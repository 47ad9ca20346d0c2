//! Stage 1: tracking a curve with the driftless system `dg/dt = g sum w_a X_a`,
//! using sinusoidal pairs for first-order bracket directions.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::closure::{default_lie_depth, lie_closure, FieldFamily};
use crate::dynamics::{ControlLaw, ControlSignal, Envelope, Term};
use crate::error::{check_dim, Error, Result};
use crate::liealg::{AlgebraVector, LieAlgebra};
use crate::linalg::{self, RANK_TOL};
use crate::tracking::curve::BodyPath;

/// Samples used to validate decompositions along a curve.
pub const PLAN_SAMPLES: usize = 513;

/// Relative tolerance on decomposition residuals.
pub const DECOMPOSITION_TOL: f64 = 1e-8;

/// A generator pair oscillated at `omega` to produce `[X_a, X_b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketPair {
    pub a: usize,
    pub b: usize,
    pub direction: AlgebraVector,
    pub omega: f64,
    /// Amplitude split `|X_b| / |X_a|`, balancing the two channels'
    /// configuration oscillation.
    pub balance: f64,
    pub delta: f64,
}

/// Smooth factorization `alpha * beta = w` with `alpha > 0`, and the
/// derivatives of both factors.
pub(crate) fn split_product(w: f64, dw: f64, balance: f64, delta: f64) -> (f64, f64, f64, f64) {
    let q = w * w + delta * delta;
    let alpha = balance.sqrt() * q.powf(0.25);
    let dalpha = balance.sqrt() * 0.5 * w * dw * q.powf(-0.75);
    let beta = w / alpha;
    let dbeta = (dw * alpha - w * dalpha) / (alpha * alpha);
    (alpha, dalpha, beta, dbeta)
}

fn pair_balance(xa: &AlgebraVector, xb: &AlgebraVector) -> f64 {
    let (na, nb) = (xa.norm(), xb.norm());
    if na > 0.0 && nb > 0.0 {
        nb / na
    } else {
        1.0
    }
}

/// Chooses, in order, the candidate directions whose components orthogonal
/// to `base` are linearly independent.
pub(crate) fn independent_directions(base: &[DVector<f64>], candidates: &[DVector<f64>]) -> Vec<usize> {
    let scale = candidates.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut basis: Vec<DVector<f64>> = base.to_vec();
    let mut chosen = Vec::new();
    for (i, c) in candidates.iter().enumerate() {
        let mut r = c - linalg::project(&basis, c);
        r -= linalg::project(&basis, &r);
        let rn = r.norm();
        if rn > 1e-9 * scale.max(f64::MIN_POSITIVE) {
            basis.push(r / rn);
            chosen.push(i);
        }
    }
    chosen
}

fn projector_complement(n: usize, basis: &[DVector<f64>]) -> DMatrix<f64> {
    let mut p = DMatrix::identity(n, n);
    for b in basis {
        p -= b * b.transpose();
    }
    p
}

fn sample_times(tau: f64) -> impl Iterator<Item = f64> {
    (0..PLAN_SAMPLES).map(move |s| tau * s as f64 / (PLAN_SAMPLES - 1) as f64)
}

/// Result of the kinematic synthesis: generator controls `w_a(t)` realized
/// by smooth direct terms plus oscillating pairs.
pub struct KinematicPlan {
    curve: Arc<dyn BodyPath>,
    generators: Vec<AlgebraVector>,
    pairs: Vec<BracketPair>,
    /// `k x n`: direct coefficients from the curve velocity.
    direct_map: DMatrix<f64>,
    /// `k x m`: direct correction per unit pair coefficient.
    direct_pair: DMatrix<f64>,
    /// `m x n`: pair coefficients from the curve velocity.
    pair_map: DMatrix<f64>,
    omega: f64,
    residual: f64,
}

impl std::fmt::Debug for KinematicPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KinematicPlan")
            .field("generators", &self.generators.len())
            .field("pairs", &self.pairs)
            .field("omega", &self.omega)
            .field("residual", &self.residual)
            .finish()
    }
}

/// Smooth per-sample coefficients of a plan.
struct Coefficients {
    direct: DVector<f64>,
    direct_dot: DVector<f64>,
    w: DVector<f64>,
    w_dot: DVector<f64>,
}

impl KinematicPlan {
    pub fn generators(&self) -> &[AlgebraVector] {
        &self.generators
    }

    pub fn pairs(&self) -> &[BracketPair] {
        &self.pairs
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Largest sampled residual of the velocity decomposition.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn curve(&self) -> &Arc<dyn BodyPath> {
        &self.curve
    }

    /// Fastest oscillation frequency (rad/s); zero without pairs.
    pub fn max_frequency(&self) -> f64 {
        self.pairs.iter().map(|p| p.omega).fold(0.0, f64::max)
    }

    fn coefficients(&self, t: f64, with_rates: bool) -> Coefficients {
        let xi = self.curve.body_velocity(t).to_dvector();
        let w = &self.pair_map * &xi;
        let direct = &self.direct_map * &xi - &self.direct_pair * &w;
        let (direct_dot, w_dot) = if with_rates {
            let acc = self.curve.body_acceleration(t).to_dvector();
            let w_dot = &self.pair_map * &acc;
            (&self.direct_map * &acc - &self.direct_pair * &w_dot, w_dot)
        } else {
            (DVector::zeros(0), DVector::zeros(0))
        };
        Coefficients {
            direct,
            direct_dot,
            w,
            w_dot,
        }
    }

    /// Generator controls `u_a(t)` and, when requested, their derivatives.
    fn controls_with_rates(&self, t: f64, rates: bool) -> (DVector<f64>, DVector<f64>) {
        let c = self.coefficients(t, rates);
        let mut u = c.direct.clone();
        let mut du = if rates { c.direct_dot.clone() } else { DVector::zeros(0) };
        for (p, pair) in self.pairs.iter().enumerate() {
            let amp = (2.0 * pair.omega).sqrt();
            let wd = if rates { c.w_dot[p] } else { 0.0 };
            let (alpha, dalpha, beta, dbeta) = split_product(c.w[p], wd, pair.balance, pair.delta);
            let (s, co) = (pair.omega * t).sin_cos();
            u[pair.a] += amp * alpha * co;
            u[pair.b] += amp * beta * s;
            if rates {
                du[pair.a] += amp * (dalpha * co - alpha * pair.omega * s);
                du[pair.b] += amp * (dbeta * s + beta * pair.omega * co);
            }
        }
        (u, du)
    }

    fn combine(&self, coeffs: &DVector<f64>) -> AlgebraVector {
        let n = self.curve.algebra_dim();
        let mut out = AlgebraVector::zeros(n);
        for (c, x) in coeffs.iter().zip(&self.generators) {
            for i in 0..n {
                out[i] += c * x[i];
            }
        }
        out
    }

    /// Body velocity of the stage-1 trajectory.
    pub fn velocity(&self, t: f64) -> AlgebraVector {
        self.combine(&self.controls_with_rates(t, false).0)
    }

    /// Body velocity of the stage-1 trajectory and its time derivative.
    pub fn velocity_and_rate(&self, t: f64) -> (AlgebraVector, AlgebraVector) {
        let (u, du) = self.controls_with_rates(t, true);
        (self.combine(&u), self.combine(&du))
    }

    /// Averaged velocity `sum direct_a X_a + sum w_p [X_a, X_b]`.
    pub fn averaged_velocity(&self, t: f64) -> AlgebraVector {
        let c = self.coefficients(t, false);
        let mut out = self.combine(&c.direct);
        for (p, pair) in self.pairs.iter().enumerate() {
            out = &out + &pair.direction.scale(&c.w[p]);
        }
        out
    }

    /// The generator controls as a signal of smooth and oscillating terms.
    pub fn signal(self: &Arc<Self>) -> ControlSignal {
        let k = self.generators.len();
        let mut s = ControlSignal::zero(k);
        for a in 0..k {
            let plan = Arc::clone(self);
            s.push(a, Term::Fn(Arc::new(move |t| plan.coefficients(t, false).direct[a])));
        }
        for (p, pair) in self.pairs.iter().enumerate() {
            let amp = (2.0 * pair.omega).sqrt();
            let freq_hz = pair.omega / TAU;
            for (channel, phase, first) in [(pair.a, 0.0, true), (pair.b, -FRAC_PI_2, false)] {
                let plan = Arc::clone(self);
                let envelope = Envelope::Fn(Arc::new(move |t| {
                    let pr = &plan.pairs[p];
                    let (alpha, _, beta, _) = split_product(plan.coefficients(t, false).w[p], 0.0, pr.balance, pr.delta);
                    amp * if first { alpha } else { beta }
                }));
                s.push(channel, Term::Osc { envelope, freq_hz, phase });
            }
        }
        s
    }
}

impl ControlLaw for KinematicPlan {
    fn channels(&self) -> usize {
        self.generators.len()
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let (u, _) = self.controls_with_rates(t, false);
        out.copy_from_slice(u.as_slice());
    }
}

fn matrix_of(n: usize, vs: &[AlgebraVector]) -> DMatrix<f64> {
    linalg::columns(n, &vs.iter().map(AlgebraVector::to_dvector).collect::<Vec<_>>())
}

/// Synthesizes stage-1 controls on the generators `fam` so that the
/// driftless system follows `curve` as `omega` (rad/s) grows.
///
/// Directions outside `span fam` are produced by first-order brackets of
/// generator pairs; pair `p` oscillates at `(p + 1) omega`.
pub fn kinematic_synthesis(
    algebra: &LieAlgebra,
    fam: &FieldFamily,
    curve: Arc<dyn BodyPath>,
    omega: f64,
) -> Result<KinematicPlan> {
    let n = algebra.dim();
    check_dim(n, fam.dim())?;
    check_dim(n, curve.algebra_dim())?;
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("oscillation frequency must be positive, got {omega}")));
    }
    let tau = curve.duration();
    let samples: Vec<(f64, DVector<f64>)> = sample_times(tau)
        .map(|t| (t, curve.body_velocity(t).to_dvector()))
        .collect();
    if let Some((t, _)) = samples.iter().find(|(_, v)| v.iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidCurve(format!("velocity not defined at t = {t}")));
    }

    let lie = lie_closure(algebra, fam, default_lie_depth(n))?;
    let lie_basis = lie.span_basis();
    for (t, v) in &samples {
        let res = linalg::residual(&lie_basis, v);
        if res > DECOMPOSITION_TOL * v.norm().max(1.0) {
            return Err(Error::OutsideLieSpan { time: *t, residual: res });
        }
    }

    let generators = fam.members().to_vec();
    let k = generators.len();
    let gvecs: Vec<DVector<f64>> = generators.iter().map(AlgebraVector::to_dvector).collect();
    let gbasis = linalg::orthonormal_basis(n, &gvecs, RANK_TOL);
    let perp = projector_complement(n, &gbasis);

    let mut candidates = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let d = algebra.bracket(&generators[a], &generators[b])?;
            candidates.push((a, b, d));
        }
    }
    let projected: Vec<DVector<f64>> = candidates.iter().map(|(_, _, d)| &perp * d.to_dvector()).collect();
    let chosen = independent_directions(&[], &projected);

    let solve_pairs = |idx: &[usize]| -> DMatrix<f64> {
        if idx.is_empty() {
            return DMatrix::zeros(0, n);
        }
        let cols: Vec<DVector<f64>> = idx.iter().map(|&i| projected[i].clone()).collect();
        linalg::pinv(&linalg::columns(n, &cols)) * &perp
    };

    // drop pairs the curve never uses
    let pair_map = solve_pairs(&chosen);
    let mut sup = vec![0.0f64; chosen.len()];
    let vscale = samples.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
    for (_, v) in &samples {
        let w = &pair_map * v;
        for (s, x) in sup.iter_mut().zip(w.iter()) {
            *s = s.max(x.abs());
        }
    }
    let used: Vec<usize> = chosen
        .iter()
        .zip(&sup)
        .filter(|(_, &s)| s > 1e-12 * vscale.max(f64::MIN_POSITIVE))
        .map(|(&i, _)| i)
        .collect();
    let sup_used: Vec<f64> = chosen.iter().zip(&sup).filter(|(i, _)| used.contains(i)).map(|(_, &s)| s).collect();
    let pair_map = solve_pairs(&used);

    let pairs: Vec<BracketPair> = used
        .iter()
        .enumerate()
        .map(|(p, &i)| {
            let (a, b, d) = &candidates[i];
            BracketPair {
                a: *a,
                b: *b,
                direction: d.clone(),
                omega: (p + 1) as f64 * omega,
                balance: pair_balance(&generators[*a], &generators[*b]),
                delta: 0.1 * sup_used[p],
            }
        })
        .collect();

    let gmat = matrix_of(n, &generators);
    let direct_map = linalg::pinv(&gmat);
    let dirs: Vec<AlgebraVector> = pairs.iter().map(|p| p.direction.clone()).collect();
    let direct_pair = if dirs.is_empty() {
        DMatrix::zeros(k, 0)
    } else {
        &direct_map * matrix_of(n, &dirs)
    };

    let plan = KinematicPlan {
        curve,
        generators,
        pairs,
        direct_map,
        direct_pair,
        pair_map,
        omega,
        residual: 0.0,
    };
    let mut residual = 0.0f64;
    for (t, v) in &samples {
        let rebuilt = plan.averaged_velocity(*t).to_dvector();
        let res = (v - &rebuilt).norm();
        if res > DECOMPOSITION_TOL * v.norm().max(1.0) {
            return Err(Error::UnsupportedBracketDepth { time: *t, residual: res });
        }
        residual = residual.max(res);
    }
    Ok(KinematicPlan { residual, ..plan })
}
