//! Mild solutions of the stochastic heat equation driven by Poisson noise.
//!
//! [`event`] solves the non-compensated equation exactly at the event points
//! of a cloud. [`lattice`] solves the compensated equation by Picard iteration
//! on a space-time lattice.

pub mod event;
pub mod initial;
pub mod lattice;
pub mod sigma;

use thiserror::Error;

use crate::kernel::{KernelError, KernelMethod, StableKernel};
use crate::measure::{MeasureError, Window};
use crate::quad::{self, QuadError, Tolerance};

pub use event::{apply_a_alpha, solve_noncompensated, AAlpha, EventSolution};
pub use initial::InitialCondition;
pub use lattice::{solve_compensated, LatticeField, LatticeGrid, LatticePlan};
pub use sigma::{JumpCoefficient, MarkFactor, StateFactor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("quadrature of the deterministic part failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("non-finite value {value} at event {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("time {t} lies outside [0, {horizon}]")]
    OutsideWindow { t: f64, horizon: f64 },
    #[error("existence gate: {0}")]
    ExistenceGate(String),
    #[error("Picard iteration did not converge in {iterations} iterations (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("Picard iteration diverged after {iterations} iterations (residual {residual:e} grew 5 times in a row)")]
    Diverged { iterations: usize, residual: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
}

/// Inputs shared by both solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub lambda: f64,
    pub beta: f64,
    pub u0: InitialCondition,
    pub window: Window,
    pub dt: f64,
    pub dx: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub override_existence_gate: bool,
}

impl SolverConfig {
    pub fn new(window: Window) -> Self {
        Self {
            lambda: 0.1,
            beta: 1.0,
            u0: InitialCondition::default(),
            window,
            dt: window.horizon / 32.0,
            dx: 0.25,
            tolerance: 1e-10,
            max_iterations: 200,
            seed: 0,
            override_existence_gate: false,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(SolverError::Config(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(SolverError::Config(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.dt > 0.0 && self.dx > 0.0) {
            return Err(SolverError::Config(format!("lattice steps must be positive, got dt = {}, dx = {}", self.dt, self.dx)));
        }
        if !(self.tolerance > 0.0) {
            return Err(SolverError::Config(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::Config("max_iterations must be at least 1".into()));
        }
        self.u0.validate().map_err(SolverError::Config)
    }
}

/// Anything that can be evaluated as a random field `u(t, x)` on the window.
pub trait FieldEval: Sync {
    fn eval(&self, t: f64, x: &[f64]) -> Result<f64, SolverError>;
}

impl<F: Fn(f64, &[f64]) -> f64 + Sync> FieldEval for F {
    fn eval(&self, t: f64, x: &[f64]) -> Result<f64, SolverError> {
        Ok(self(t, x))
    }
}

/// `(p(t) ∗ u0)(x)`, with `u0(x)` at `t = 0`. Uses closed forms for Gaussian
/// kernels, kernel CDFs for indicators, and adaptive quadrature otherwise.
pub fn deterministic_part(kernel: &StableKernel, u0: &InitialCondition, t: f64, x: &[f64]) -> Result<f64, SolverError> {
    if x.len() != kernel.dim() {
        return Err(SolverError::Config(format!("point has dimension {}, kernel has {}", x.len(), kernel.dim())));
    }
    if t == 0.0 {
        return Ok(u0.eval(x));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(KernelError::NonPositiveTime(t).into());
    }
    if let InitialCondition::Constant(c) = *u0 {
        return Ok(c);
    }
    if kernel.method() == KernelMethod::Gaussian {
        return Ok(u0.heat_convolution(t, x));
    }
    if kernel.dim() != 1 {
        return Err(SolverError::Unsupported(format!("deterministic part for alpha = {} in d = {}", kernel.alpha(), kernel.dim())));
    }
    let x = x[0];
    match *u0 {
        InitialCondition::Indicator { lo, hi, value } => Ok(value * kernel.mass(t, x - hi, x - lo)),
        InitialCondition::GaussianBump { center, variance, .. } => {
            let w = t.powf(1.0 / kernel.alpha());
            let sd = variance.sqrt();
            let breaks = [center - sd, center, center + sd, x - w, x, x + w];
            let mut sorted = breaks.to_vec();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            let est = quad::integrate_line(|y| kernel.radial(t, (x - y).abs()) * u0.eval(&[y]), &sorted, Tolerance::new(1e-14, 1e-11))?;
            Ok(est.value)
        }
        InitialCondition::Constant(_) => unreachable!(),
    }
}

/// Whether a norm was taken along one path or over a replica ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    Path,
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormValue {
    pub value: f64,
    pub kind: NormKind,
}

/// A space-time grid on which norms are evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct NormGrid {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
}

impl NormGrid {
    /// `nt + 1` times on `[0, T]` and `nx + 1` points on `[-L, L]` (d = 1).
    pub fn uniform(window: &Window, nt: usize, nx: usize) -> Self {
        let times = (0..=nt).map(|j| window.horizon * j as f64 / nt as f64).collect();
        let l = window.half_width;
        let points = (0..=nx).map(|k| vec![-l + 2.0 * l * k as f64 / nx as f64]).collect();
        Self { times, points }
    }

    pub fn len(&self) -> usize {
        self.times.len() * self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Samples a field in time-major order.
    pub fn sample(&self, field: &dyn FieldEval) -> Result<Vec<f64>, SolverError> {
        let mut out = Vec::with_capacity(self.len());
        for &t in &self.times {
            for x in &self.points {
                out.push(field.eval(t, x)?);
            }
        }
        Ok(out)
    }
}

/// `sup_{t,x} e^{-βt} |u(t,x)|^p`, raised to `1/p` for `p = 2`, along one path.
pub fn path_norm(values: &[f64], grid: &NormGrid, p: u32, beta: f64) -> NormValue {
    let np = grid.points.len();
    let mut sup: f64 = 0.0;
    for (j, &t) in grid.times.iter().enumerate() {
        let w = (-beta * t).exp();
        for v in &values[j * np..(j + 1) * np] {
            sup = sup.max(w * v.abs().powi(p as i32));
        }
    }
    NormValue {
        value: finish_norm(sup, p),
        kind: NormKind::Path,
    }
}

/// `sup_{t,x} e^{-βt} E|u(t,x)|^p` over replicas sampled on the same grid,
/// raised to `1/p` for `p = 2`.
pub fn ensemble_norm(replicas: &[Vec<f64>], grid: &NormGrid, p: u32, beta: f64) -> Result<NormValue, SolverError> {
    if replicas.is_empty() {
        return Err(SolverError::Config("ensemble norm needs at least one replica".into()));
    }
    let np = grid.points.len();
    let n = replicas.len() as f64;
    let mut sup: f64 = 0.0;
    for (j, &t) in grid.times.iter().enumerate() {
        let w = (-beta * t).exp();
        for k in 0..np {
            let idx = j * np + k;
            let mean = replicas.iter().map(|r| r[idx].abs().powi(p as i32)).sum::<f64>() / n;
            sup = sup.max(w * mean);
        }
    }
    Ok(NormValue {
        value: finish_norm(sup, p),
        kind: NormKind::Ensemble,
    })
}

fn finish_norm(sup: f64, p: u32) -> f64 {
    if p == 2 {
        sup.sqrt()
    } else {
        sup
    }
}
