//! Initial-condition presets.

use std::f64::consts::PI;

use statrs::function::erf::erf;

/// A bounded, nonnegative, non-random initial datum `u0` on `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Constant(f64),
    /// `mass · N(center·1, variance·I)` density.
    GaussianBump { mass: f64, center: f64, variance: f64 },
    /// `value · 1_{[lo, hi]^d}`.
    Indicator { lo: f64, hi: f64, value: f64 },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Constant(1.0)
    }
}

impl InitialCondition {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            InitialCondition::Constant(c) => {
                if !(c >= 0.0 && c.is_finite()) {
                    return Err(format!("constant initial value must be finite and >= 0, got {c}"));
                }
            }
            InitialCondition::GaussianBump { mass, center, variance } => {
                if !(mass >= 0.0 && mass.is_finite()) {
                    return Err(format!("bump mass must be finite and >= 0, got {mass}"));
                }
                if !center.is_finite() {
                    return Err(format!("bump center must be finite, got {center}"));
                }
                if !(variance > 0.0 && variance.is_finite()) {
                    return Err(format!("bump variance must be positive, got {variance}"));
                }
            }
            InitialCondition::Indicator { lo, hi, value } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(format!("indicator needs lo < hi, got [{lo}, {hi}]"));
                }
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(format!("indicator value must be finite and >= 0, got {value}"));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        match *self {
            InitialCondition::Constant(c) => c,
            InitialCondition::GaussianBump { mass, center, variance } => {
                let d = y.len() as f64;
                let r2: f64 = y.iter().map(|v| (v - center).powi(2)).sum();
                mass * (2.0 * PI * variance).powf(-0.5 * d) * (-r2 / (2.0 * variance)).exp()
            }
            InitialCondition::Indicator { lo, hi, value } => {
                if y.iter().all(|&v| v >= lo && v <= hi) {
                    value
                } else {
                    0.0
                }
            }
        }
    }

    /// `sup |u0|` in dimension `d`.
    pub fn sup(&self, d: usize) -> f64 {
        match *self {
            InitialCondition::Constant(c) => c,
            InitialCondition::GaussianBump { mass, variance, .. } => mass * (2.0 * PI * variance).powf(-0.5 * d as f64),
            InitialCondition::Indicator { value, .. } => value,
        }
    }

    /// `∫ |u0|² dy` in dimension `d`; `None` when infinite.
    pub fn l2_norm_sq(&self, d: usize) -> Option<f64> {
        match *self {
            InitialCondition::Constant(c) => (c == 0.0).then_some(0.0),
            InitialCondition::GaussianBump { mass, variance, .. } => Some(mass * mass * (4.0 * PI * variance).powf(-0.5 * d as f64)),
            InitialCondition::Indicator { lo, hi, value } => Some(value * value * (hi - lo).powi(d as i32)),
        }
    }

    /// `(p(t) ∗ u0)(x)` when `p(t)` is the Gaussian kernel of variance `2t`.
    pub(crate) fn heat_convolution(&self, t: f64, x: &[f64]) -> f64 {
        match *self {
            InitialCondition::Constant(c) => c,
            InitialCondition::GaussianBump { mass, center, variance } => {
                let v = variance + 2.0 * t;
                let d = x.len() as f64;
                let r2: f64 = x.iter().map(|xi| (xi - center).powi(2)).sum();
                mass * (2.0 * PI * v).powf(-0.5 * d) * (-r2 / (2.0 * v)).exp()
            }
            InitialCondition::Indicator { lo, hi, value } => {
                let s = (4.0 * t).sqrt();
                value
                    * x.iter()
                        .map(|&xi| 0.5 * (erf((hi - xi) / s) - erf((lo - xi) / s)))
                        .product::<f64>()
            }
        }
    }
}
