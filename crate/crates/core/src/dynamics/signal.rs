//! Open-loop control signals.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type TimeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Anything that yields one value per control channel at time `t`.
pub trait ControlLaw: Send + Sync {
    fn channels(&self) -> usize;
    fn eval_into(&self, t: f64, out: &mut [f64]);

    fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.channels()];
        self.eval_into(t, &mut out);
        out
    }
}

/// Step used for numerical derivatives of closure terms.
const FD_STEP: f64 = 1e-6;

fn central_difference(f: &dyn Fn(f64) -> f64, t: f64) -> f64 {
    (f(t + FD_STEP) - f(t - FD_STEP)) / (2.0 * FD_STEP)
}

fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

fn poly_derivative(c: &[f64], t: f64) -> f64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (i, &a)| acc * t + i as f64 * a)
}

#[derive(Clone)]
pub enum Envelope {
    /// Coefficients in increasing powers of `t`.
    Poly(Vec<f64>),
    Fn(TimeFn),
}

impl Envelope {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Envelope::Poly(c) => poly_eval(c, t),
            Envelope::Fn(f) => f(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Envelope::Poly(c) => poly_derivative(c, t),
            Envelope::Fn(f) => central_difference(f.as_ref(), t),
        }
    }
}

impl fmt::Debug for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Envelope::Poly(c) => f.debug_tuple("Poly").field(c).finish(),
            Envelope::Fn(_) => f.write_str("Fn(..)"),
        }
    }
}

#[derive(Clone)]
pub enum Term {
    /// `sum c_i t^i`
    Poly(Vec<f64>),
    /// `envelope(t) * cos(2 pi freq_hz t + phase)`
    Osc { envelope: Envelope, freq_hz: f64, phase: f64 },
    Fn(TimeFn),
}

impl Term {
    pub fn constant(c: f64) -> Self {
        Term::Poly(vec![c])
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Term::Poly(c) => poly_eval(c, t),
            Term::Osc { envelope, freq_hz, phase } => envelope.eval(t) * (TAU * freq_hz * t + phase).cos(),
            Term::Fn(f) => f(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            Term::Poly(c) => poly_derivative(c, t),
            Term::Osc { envelope, freq_hz, phase } => {
                let w = TAU * freq_hz;
                let arg = w * t + phase;
                envelope.derivative(t) * arg.cos() - envelope.eval(t) * w * arg.sin()
            }
            Term::Fn(f) => central_difference(f.as_ref(), t),
        }
    }

    pub fn is_oscillatory(&self) -> bool {
        matches!(self, Term::Osc { .. })
    }

    fn is_finite(&self) -> bool {
        match self {
            Term::Poly(c) => c.iter().all(|x| x.is_finite()),
            Term::Osc { envelope, freq_hz, phase } => {
                freq_hz.is_finite()
                    && phase.is_finite()
                    && match envelope {
                        Envelope::Poly(c) => c.iter().all(|x| x.is_finite()),
                        Envelope::Fn(_) => true,
                    }
            }
            Term::Fn(_) => true,
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Poly(c) => f.debug_tuple("Poly").field(c).finish(),
            Term::Osc { envelope, freq_hz, phase } => f
                .debug_struct("Osc")
                .field("envelope", envelope)
                .field("freq_hz", freq_hz)
                .field("phase", phase)
                .finish(),
            Term::Fn(_) => f.write_str("Fn(..)"),
        }
    }
}

/// Per-channel sum of terms.
#[derive(Debug, Clone, Default)]
pub struct ControlSignal {
    channels: Vec<Vec<Term>>,
}

impl ControlSignal {
    pub fn zero(k: usize) -> Self {
        ControlSignal {
            channels: vec![Vec::new(); k],
        }
    }

    pub fn new(channels: Vec<Vec<Term>>) -> Result<Self> {
        if channels.iter().flatten().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("control signal has nonfinite coefficients".into()));
        }
        Ok(ControlSignal { channels })
    }

    pub fn constant(values: &[f64]) -> Self {
        ControlSignal {
            channels: values.iter().map(|&c| vec![Term::constant(c)]).collect(),
        }
    }

    /// Wraps a control law channel by channel.
    pub fn from_law(law: Arc<dyn ControlLaw>) -> Self {
        let channels = (0..law.channels())
            .map(|a| {
                let law = Arc::clone(&law);
                vec![Term::Fn(Arc::new(move |t| law.eval(t)[a]))]
            })
            .collect();
        ControlSignal { channels }
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn terms(&self, channel: usize) -> &[Term] {
        &self.channels[channel]
    }

    pub fn push(&mut self, channel: usize, term: Term) {
        self.channels[channel].push(term);
    }

    pub fn eval_channel(&self, a: usize, t: f64) -> f64 {
        self.channels[a].iter().map(|term| term.eval(t)).sum()
    }

    pub fn derivative(&self, t: f64) -> Vec<f64> {
        self.channels
            .iter()
            .map(|terms| terms.iter().map(|term| term.derivative(t)).sum())
            .collect()
    }

    /// Whether any channel carries an oscillation term.
    pub fn has_oscillation(&self) -> bool {
        self.channels.iter().flatten().any(Term::is_oscillatory)
    }

    pub fn max_freq_hz(&self) -> f64 {
        self.channels
            .iter()
            .flatten()
            .filter_map(|t| match t {
                Term::Osc { freq_hz, .. } => Some(freq_hz.abs()),
                _ => None,
            })
            .fold(0.0, f64::max)
    }

    /// Whether every channel is identically zero by construction.
    pub fn is_identically_zero(&self) -> bool {
        self.channels.iter().flatten().all(|t| match t {
            Term::Poly(c) => c.iter().all(|&x| x == 0.0),
            Term::Osc {
                envelope: Envelope::Poly(c),
                ..
            } => c.iter().all(|&x| x == 0.0),
            _ => false,
        })
    }
}

impl ControlLaw for ControlSignal {
    fn channels(&self) -> usize {
        self.channels.len()
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.eval_channel(a, t);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_and_oscillation() {
        let mut s = ControlSignal::zero(2);
        s.push(0, Term::Poly(vec![1.0, 2.0, 3.0]));
        s.push(
            1,
            Term::Osc {
                envelope: Envelope::Poly(vec![2.0]),
                freq_hz: 0.5,
                phase: 0.0,
            },
        );
        assert_eq!(s.eval(2.0), vec![17.0, 2.0 * (std::f64::consts::PI * 2.0).cos()]);
        let d = s.derivative(2.0);
        assert!((d[0] - 14.0).abs() < 1e-12);
        assert!((d[1] + 2.0 * std::f64::consts::PI * (std::f64::consts::PI * 2.0).sin()).abs() < 1e-12);
        assert!(s.has_oscillation());
        assert_eq!(s.max_freq_hz(), 0.5);
        assert!(!s.is_identically_zero());
        assert!(ControlSignal::zero(3).is_identically_zero());
    }

    #[test]
    fn closure_terms_differentiate_numerically() {
        let mut s = ControlSignal::zero(1);
        s.push(0, Term::Fn(Arc::new(|t: f64| t.sin())));
        assert!((s.derivative(0.3)[0] - 0.3f64.cos()).abs() < 1e-8);
        let wrapped = ControlSignal::from_law(Arc::new(s.clone()));
        assert_eq!(wrapped.eval(1.2), s.eval(1.2));
    }

    #[test]
    fn nonfinite_coefficients_rejected() {
        assert!(ControlSignal::new(vec![vec![Term::Poly(vec![f64::NAN])]]).is_err());
    }
}
