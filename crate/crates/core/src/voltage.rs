//! Cyclic applied-potential waveforms for accelerated stress tests.
//!
//! Four shapes: a symmetric triangle (lambda), a square wave (pi), an
//! asymmetric saw ramp with instantaneous reset (angle), and a constant
//! idle potential. Cycles start at the low potential. Discontinuities are
//! right-continuous: evaluating exactly at a jump returns the post-jump
//! value. [`VoltageProtocol::evaluate_left`] gives the limit from below,
//! which integrators use for the terminal stage of a step that ends on a
//! jump.

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Pseudo cycle length assigned to the constant protocol so that idle runs
/// report per-cycle diagnostics on the same basis as the triangle wave.
pub const CONSTANT_PSEUDO_PERIOD: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Waveform {
    /// Symmetric triangle: rises on `[0, p/2]`, falls on `[p/2, p]`.
    Lambda,
    /// Square wave: low on `[0, p/2)`, high on `[p/2, p)`.
    Pi,
    /// Linear ramp over the full period, then instantaneous reset.
    Angle,
    /// Constant potential.
    Constant,
}

/// A periodic applied-potential waveform `V(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageProtocol<T> {
    shape: Waveform,
    v_min: T,
    v_max: T,
    period: T,
}

impl<T: Scalar> VoltageProtocol<T> {
    fn checked(shape: Waveform, v_min: T, v_max: T, period: T) -> Result<Self> {
        if !(v_min <= v_max) {
            return Err(Error::Config(format!(
                "protocol requires V_min <= V_max, got {v_min} > {v_max}"
            )));
        }
        if !(period > T::zero() && period.is_finite()) {
            return Err(Error::Config(format!("protocol period must be positive, got {period}")));
        }
        Ok(VoltageProtocol { shape, v_min, v_max, period })
    }

    pub fn lambda(v_min: T, v_max: T, period: T) -> Result<Self> {
        Self::checked(Waveform::Lambda, v_min, v_max, period)
    }

    pub fn pi(v_min: T, v_max: T, period: T) -> Result<Self> {
        Self::checked(Waveform::Pi, v_min, v_max, period)
    }

    pub fn angle(v_min: T, v_max: T, period: T) -> Result<Self> {
        Self::checked(Waveform::Angle, v_min, v_max, period)
    }

    /// Angle protocol specified by its ramp slope; the period is
    /// `(V_max - V_min)/alpha`.
    pub fn angle_from_slope(v_min: T, v_max: T, alpha: T) -> Result<Self> {
        if !(alpha > T::zero()) {
            return Err(Error::Config(format!("ramp slope must be positive, got {alpha}")));
        }
        Self::checked(Waveform::Angle, v_min, v_max, (v_max - v_min) / alpha)
    }

    pub fn constant(v: T) -> Self {
        VoltageProtocol {
            shape: Waveform::Constant,
            v_min: v,
            v_max: v,
            period: lit(CONSTANT_PSEUDO_PERIOD),
        }
    }

    pub fn constant_with_period(v: T, period: T) -> Result<Self> {
        Self::checked(Waveform::Constant, v, v, period)
    }

    pub fn shape(&self) -> Waveform {
        self.shape
    }

    pub fn v_min(&self) -> T {
        self.v_min
    }

    pub fn v_max(&self) -> T {
        self.v_max
    }

    pub fn period(&self) -> T {
        self.period
    }

    pub fn name(&self) -> &'static str {
        match self.shape {
            Waveform::Lambda => "lambda",
            Waveform::Pi => "pi",
            Waveform::Angle => "angle",
            Waveform::Constant => "constant",
        }
    }

    /// Ramp slope magnitude, V/s: `2(V_max - V_min)/p` for the triangle,
    /// `(V_max - V_min)/p` for the saw, zero otherwise.
    pub fn slope(&self) -> T {
        let dv = self.v_max - self.v_min;
        match self.shape {
            Waveform::Lambda => lit::<T>(2.0) * dv / self.period,
            Waveform::Angle => dv / self.period,
            Waveform::Pi | Waveform::Constant => T::zero(),
        }
    }

    /// True for shapes with a jump discontinuity (square wave, saw reset).
    pub fn has_jump(&self) -> bool {
        matches!(self.shape, Waveform::Pi | Waveform::Angle)
    }

    /// Offsets within one cycle where `V` or its slope is discontinuous.
    /// The cycle boundary at offset 0 is always included except for the
    /// constant shape.
    pub fn breakpoints(&self) -> Vec<T> {
        let half = self.period * lit(0.5);
        match self.shape {
            Waveform::Lambda | Waveform::Pi => vec![T::zero(), half],
            Waveform::Angle => vec![T::zero()],
            Waveform::Constant => vec![],
        }
    }

    #[inline]
    fn reduce(&self, t: T) -> T {
        debug_assert!(t >= T::zero(), "protocols are defined for t >= 0");
        let cycles = (t / self.period).floor();
        let r = t - self.period * cycles;
        // Guard against r == period from rounding in the subtraction.
        if r >= self.period {
            T::zero()
        } else {
            r
        }
    }

    #[inline]
    fn clamp_range(&self, v: T) -> T {
        v.max(self.v_min).min(self.v_max)
    }

    /// Evaluate `V(t)` for `t >= 0`. Total, periodic, right-continuous at
    /// jumps, and always within `[V_min, V_max]`.
    pub fn evaluate(&self, t: T) -> T {
        let t_in = self.reduce(t);
        let p = self.period;
        let half = p * lit(0.5);
        let dv = self.v_max - self.v_min;
        let v = match self.shape {
            Waveform::Constant => self.v_min,
            Waveform::Lambda => {
                if t_in <= half {
                    self.v_min + dv * (t_in / half)
                } else {
                    self.v_min + dv * ((p - t_in) / half)
                }
            }
            Waveform::Pi => {
                if t_in < half {
                    self.v_min
                } else {
                    self.v_max
                }
            }
            Waveform::Angle => self.v_min + dv * (t_in / p),
        };
        self.clamp_range(v)
    }

    /// Limit of `V` from below at `t` (the value governing the interval that
    /// ends at `t`). Differs from [`evaluate`] only at jump instants; at
    /// `t = 0` the periodic extension's cycle-end limit is returned.
    ///
    /// [`evaluate`]: VoltageProtocol::evaluate
    pub fn evaluate_left(&self, t: T) -> T {
        let t_in = self.reduce(t);
        let half = self.period * lit(0.5);
        if t_in == T::zero() {
            match self.shape {
                Waveform::Pi | Waveform::Angle => self.v_max,
                Waveform::Lambda | Waveform::Constant => self.v_min,
            }
        } else if self.shape == Waveform::Pi && t_in == half {
            self.v_min
        } else {
            self.evaluate(t)
        }
    }
}

/// The four reference stress-test protocols:
/// triangle 0.6–1.0 V over 16 s, square 0.6/0.9 V over 10 s,
/// saw 0.6–0.95 V over 10 s (0.035 V/s), and constant 0.65 V idle.
pub fn default_protocols<T: Scalar>() -> Vec<VoltageProtocol<T>> {
    vec![
        VoltageProtocol::lambda(lit(0.6), lit(1.0), lit(16.0)).unwrap(),
        VoltageProtocol::pi(lit(0.6), lit(0.9), lit(10.0)).unwrap(),
        VoltageProtocol::angle(lit(0.6), lit(0.95), lit(10.0)).unwrap(),
        VoltageProtocol::constant(lit(0.65)),
    ]
}

/// Samples stage voltages for integrators whose steps are phase-locked to
/// the cycle. Positions are integer half-steps within one cycle, which keeps
/// branch selection at jumps exact regardless of floating-point time
/// accumulation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StageSampler<T> {
    proto: VoltageProtocol<T>,
    steps: u64,
}

impl<T: Scalar> StageSampler<T> {
    pub(crate) fn new(proto: &VoltageProtocol<T>, steps_per_cycle: u64) -> Self {
        debug_assert!(steps_per_cycle >= 2 && steps_per_cycle % 2 == 0);
        StageSampler { proto: *proto, steps: steps_per_cycle }
    }

    /// Voltage at half-step position `pos` in `[0, 2*steps]`. With `below`
    /// the limit from inside the elapsing interval is taken, which matters
    /// only when `pos` sits on a jump.
    pub(crate) fn at(&self, pos: u64, below: bool) -> T {
        let two_steps = 2 * self.steps;
        debug_assert!(pos <= two_steps);
        let p = self.proto;
        let dv = p.v_max - p.v_min;
        let v = match p.shape {
            Waveform::Constant => p.v_min,
            Waveform::Lambda => {
                let frac = if pos <= self.steps {
                    lit::<T>(pos as f64 / self.steps as f64)
                } else {
                    lit::<T>((two_steps - pos) as f64 / self.steps as f64)
                };
                p.v_min + dv * frac
            }
            Waveform::Pi => {
                let low = pos < self.steps
                    || (below && pos == self.steps)
                    || (!below && pos == two_steps);
                if low {
                    p.v_min
                } else {
                    p.v_max
                }
            }
            Waveform::Angle => {
                if pos < two_steps {
                    p.v_min + dv * lit::<T>(pos as f64 / two_steps as f64)
                } else if below {
                    p.v_max
                } else {
                    p.v_min
                }
            }
        };
        p.clamp_range(v)
    }
}
