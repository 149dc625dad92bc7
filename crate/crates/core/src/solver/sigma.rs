//! Jump coefficients `σ(u, h) = J(h) g(u)`.

use std::fmt;

use crate::measure::{LevyMeasure, MeasureError};

/// The mark factor `J(h) >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MarkFactor {
    /// `|h|`
    Abs,
    /// `c`
    Const(f64),
    /// `|h|^p`
    Power(f64),
}

impl MarkFactor {
    #[inline]
    pub fn eval(&self, h: f64) -> f64 {
        match *self {
            MarkFactor::Abs => h.abs(),
            MarkFactor::Const(c) => c,
            MarkFactor::Power(p) => h.abs().powf(p),
        }
    }
}

/// The state factor `g`, Lipschitz with `g(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateFactor {
    /// `slope · u`
    Linear(f64),
    /// `scale · tanh(u)`
    Tanh(f64),
    /// `scale · sin(u)`
    Sin(f64),
    Zero,
}

impl StateFactor {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            StateFactor::Linear(a) => a * u,
            StateFactor::Tanh(a) => a * u.tanh(),
            StateFactor::Sin(a) => a * u.sin(),
            StateFactor::Zero => 0.0,
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            StateFactor::Linear(a) | StateFactor::Tanh(a) | StateFactor::Sin(a) => a.abs(),
            StateFactor::Zero => 0.0,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, StateFactor::Linear(a) if *a != 0.0)
    }

    /// Whether `g >= 0` on `[0, ∞)`.
    pub fn nonnegative_on_positives(&self) -> bool {
        match *self {
            StateFactor::Linear(a) | StateFactor::Tanh(a) => a >= 0.0,
            StateFactor::Sin(_) => false,
            StateFactor::Zero => true,
        }
    }
}

/// `σ(u, h) = J(h) g(u)` together with `K1 = ∫J dν` and `K2 = ∫J² dν`.
#[derive(Clone, PartialEq)]
pub struct JumpCoefficient {
    pub mark: MarkFactor,
    pub state: StateFactor,
    k1: f64,
    k2: f64,
}

impl fmt::Debug for JumpCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpCoefficient")
            .field("mark", &self.mark)
            .field("state", &self.state)
            .field("k1", &self.k1)
            .field("k2", &self.k2)
            .finish()
    }
}

impl JumpCoefficient {
    pub fn new(mark: MarkFactor, state: StateFactor, measure: &LevyMeasure) -> Result<Self, MeasureError> {
        if let MarkFactor::Const(c) = mark {
            if !(c >= 0.0) {
                return Err(MeasureError::Invalid(format!("J must be nonnegative, got constant {c}")));
            }
        }
        let (k1, k2) = measure.jump_moments(|h| mark.eval(h))?;
        if !(k1.is_finite() && k2.is_finite()) {
            return Err(MeasureError::Divergent(format!("∫J dν = {k1}, ∫J² dν = {k2}")));
        }
        Ok(Self { mark, state, k1, k2 })
    }

    #[inline]
    pub fn eval(&self, u: f64, h: f64) -> f64 {
        self.mark.eval(h) * self.state.eval(u)
    }

    /// `Lip_σ = Lip_g`.
    pub fn lipschitz(&self) -> f64 {
        self.state.lipschitz()
    }

    /// `∫ J dν`.
    pub fn k1(&self) -> f64 {
        self.k1
    }

    /// `∫ J² dν`.
    pub fn k2(&self) -> f64 {
        self.k2
    }

    /// The constant `K` that bounds the relevant moment of `J`: `K2` for the
    /// compensated equation, `K1` for the non-compensated one.
    pub fn k_for(&self, compensated: bool) -> f64 {
        if compensated {
            self.k2
        } else {
            self.k1
        }
    }
}
