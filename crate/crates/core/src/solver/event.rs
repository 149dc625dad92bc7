//! Exact event-driven solution of the non-compensated mild equation
//!
//! `u(t,x) = (p(t) ∗ u0)(x) + λ Σ_{s_i < t} p(t - s_i, x - y_i) σ(u(s_i-, y_i), h_i)`.

use crate::csv::push_row;
use crate::kernel::{norm, StableKernel};
use crate::measure::PointCloud;

use super::{deterministic_part, FieldEval, InitialCondition, JumpCoefficient, SolverConfig, SolverError};

/// `p(t, x - y)` for `t > 0`.
pub(crate) fn kernel_between(kernel: &StableKernel, t: f64, x: &[f64], y: &[f64]) -> f64 {
    if x.len() == 1 {
        kernel.radial(t, (x[0] - y[0]).abs())
    } else {
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        kernel.radial(t, norm(&diff))
    }
}

/// Left-limit values `u(s_i-, y_i)` at every event of a cloud.
#[derive(Debug, Clone)]
pub struct EventSolution {
    cloud: PointCloud,
    kernel: StableKernel,
    sigma: JumpCoefficient,
    lambda: f64,
    u0: InitialCondition,
    det_left: Vec<f64>,
    u_left: Vec<f64>,
    jumps: Vec<f64>,
}

/// Solves the causal recursion in time order; each event sees only strictly
/// earlier events.
pub fn solve_noncompensated(
    cloud: &PointCloud,
    kernel: &StableKernel,
    sigma: &JumpCoefficient,
    config: &SolverConfig,
) -> Result<EventSolution, SolverError> {
    config.validate()?;
    if cloud.window().dim != kernel.dim() {
        return Err(SolverError::Config(format!(
            "cloud dimension {} does not match kernel dimension {}",
            cloud.window().dim,
            kernel.dim()
        )));
    }
    let events = cloud.events();
    let n = events.len();
    let mut det_left = Vec::with_capacity(n);
    let mut u_left = Vec::with_capacity(n);
    let mut jumps = Vec::with_capacity(n);
    for (i, e) in events.iter().enumerate() {
        let det = deterministic_part(kernel, &config.u0, e.s, &e.y)?;
        let mut acc = 0.0;
        for (j, prev) in events[..i].iter().enumerate() {
            if prev.s < e.s {
                acc += kernel_between(kernel, e.s - prev.s, &e.y, &prev.y) * jumps[j];
            }
        }
        let u = det + config.lambda * acc;
        if !u.is_finite() {
            return Err(SolverError::NonFinite { index: i, value: u });
        }
        let jump = sigma.eval(u, e.h);
        if !jump.is_finite() {
            return Err(SolverError::NonFinite { index: i, value: jump });
        }
        det_left.push(det);
        u_left.push(u);
        jumps.push(jump);
    }
    Ok(EventSolution {
        cloud: cloud.clone(),
        kernel: kernel.clone(),
        sigma: sigma.clone(),
        lambda: config.lambda,
        u0: config.u0.clone(),
        det_left,
        u_left,
        jumps,
    })
}

impl EventSolution {
    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn kernel(&self) -> &StableKernel {
        &self.kernel
    }

    pub fn sigma(&self) -> &JumpCoefficient {
        &self.sigma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `u(s_i-, y_i)` in event order.
    pub fn left_values(&self) -> &[f64] {
        &self.u_left
    }

    /// Deterministic part at each event.
    pub fn deterministic_values(&self) -> &[f64] {
        &self.det_left
    }

    /// `λ Σ_{s_i < t} p(t - s_i, x - y_i) σ(u(s_i-, y_i), h_i)`.
    pub fn stochastic_part(&self, t: f64, x: &[f64]) -> Result<f64, SolverError> {
        self.check_time(t)?;
        let mut acc = 0.0;
        for (e, &jump) in self.cloud.events().iter().zip(&self.jumps) {
            if e.s >= t {
                break;
            }
            acc += kernel_between(&self.kernel, t - e.s, x, &e.y) * jump;
        }
        let v = self.lambda * acc;
        if !v.is_finite() {
            return Err(SolverError::NonFinite {
                index: self.cloud.len(),
                value: v,
            });
        }
        Ok(v)
    }

    /// `u(t, x)` given a precomputed deterministic part.
    pub fn eval_with_deterministic(&self, t: f64, x: &[f64], det: f64) -> Result<f64, SolverError> {
        Ok(det + self.stochastic_part(t, x)?)
    }

    /// `u(t, x)` by the mild formula. Events at time exactly `t` are excluded.
    pub fn field_eval(&self, t: f64, x: &[f64]) -> Result<f64, SolverError> {
        self.check_time(t)?;
        let det = deterministic_part(&self.kernel, &self.u0, t, x)?;
        self.eval_with_deterministic(t, x, det)
    }

    fn check_time(&self, t: f64) -> Result<(), SolverError> {
        let horizon = self.cloud.window().horizon;
        if !(t >= 0.0 && t <= horizon) {
            return Err(SolverError::OutsideWindow { t, horizon });
        }
        Ok(())
    }

    /// The cloud CSV with an extra `u_left` column.
    pub fn to_csv(&self) -> String {
        let d = self.cloud.window().dim;
        let mut out = String::from("s");
        for i in 1..=d {
            out.push_str(&format!(",y{i}"));
        }
        out.push_str(",h,u_left\n");
        for (e, &u) in self.cloud.events().iter().zip(&self.u_left) {
            let mut row = vec![e.s];
            row.extend_from_slice(&e.y);
            row.push(e.h);
            row.push(u);
            push_row(&mut out, &row);
        }
        out
    }
}

impl FieldEval for EventSolution {
    fn eval(&self, t: f64, x: &[f64]) -> Result<f64, SolverError> {
        self.field_eval(t, x)
    }
}

/// The operator `u ↦ λ Σ_{s_i < t} p(t - s_i, x - y_i) σ(u(s_i-, y_i), h_i)`
/// frozen at an input field.
#[derive(Debug, Clone)]
pub struct AAlpha {
    cloud: PointCloud,
    kernel: StableKernel,
    lambda: f64,
    jumps: Vec<f64>,
}

/// Applies the jump operator to `input`, evaluating it at the event points.
/// The input is queried at `(s_i, y_i)`; for solutions built by this crate
/// that is the left limit.
pub fn apply_a_alpha(
    input: &dyn FieldEval,
    cloud: &PointCloud,
    kernel: &StableKernel,
    sigma: &JumpCoefficient,
    lambda: f64,
) -> Result<AAlpha, SolverError> {
    let mut jumps = Vec::with_capacity(cloud.len());
    for (i, e) in cloud.events().iter().enumerate() {
        let u = input.eval(e.s, &e.y)?;
        if !u.is_finite() {
            return Err(SolverError::NonFinite { index: i, value: u });
        }
        jumps.push(sigma.eval(u, e.h));
    }
    Ok(AAlpha {
        cloud: cloud.clone(),
        kernel: kernel.clone(),
        lambda,
        jumps,
    })
}

impl FieldEval for AAlpha {
    fn eval(&self, t: f64, x: &[f64]) -> Result<f64, SolverError> {
        let horizon = self.cloud.window().horizon;
        if !(t >= 0.0 && t <= horizon) {
            return Err(SolverError::OutsideWindow { t, horizon });
        }
        let mut acc = 0.0;
        for (e, &jump) in self.cloud.events().iter().zip(&self.jumps) {
            if e.s >= t {
                break;
            }
            acc += kernel_between(&self.kernel, t - e.s, x, &e.y) * jump;
        }
        Ok(self.lambda * acc)
    }
}
