//! Picard iteration for the compensated mild equation on a space-time lattice.
//!
//! The unknowns are the lattice values `U[j][k] = u(t_j, x_k)` and the event
//! left limits `V[i] = u(s_i-, y_i)`. One Picard step maps `(U, V)` to
//!
//! ```text
//! det + λ [ Σ_{s_i < t} p(t - s_i, x - y_i) J(h_i) g(V_i)
//!           - K1 Σ_m ℓ_m Σ_k' M(τ_m; x, cell k') g(U[m][k']) ]
//! ```
//!
//! where `ℓ_m` is the length of time cell `m` below `t`, `τ_m` the time from
//! its midpoint to `t`, and `M` the exact kernel mass of spatial cell `k'`.

use std::sync::Arc;

use crate::csv::push_row;
use crate::kernel::{upsilon, StableKernel};
use crate::measure::{PointCloud, Window};

use super::event::kernel_between;
use super::{deterministic_part, FieldEval, InitialCondition, JumpCoefficient, SolverConfig, SolverError};

/// Consecutive residual increases treated as divergence.
const DIVERGENCE_RUN: usize = 5;

/// Uniform lattice `t_j = j Δt`, `x_k = -L + k Δx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeGrid {
    pub nt: usize,
    pub nx: usize,
    pub dt: f64,
    pub dx: f64,
    pub horizon: f64,
    pub half_width: f64,
}

impl LatticeGrid {
    /// Rounds the requested steps down so the lattice ends exactly at `T`
    /// and `±L`.
    pub fn new(window: &Window, dt: f64, dx: f64) -> Result<Self, SolverError> {
        if window.dim != 1 {
            return Err(SolverError::Unsupported(format!("lattice solver needs d = 1, got d = {}", window.dim)));
        }
        if !(dt > 0.0 && dx > 0.0) {
            return Err(SolverError::Config(format!("lattice steps must be positive, got dt = {dt}, dx = {dx}")));
        }
        let nt = (window.horizon / dt - 1e-9).ceil().max(1.0) as usize;
        let nx = (2.0 * window.half_width / dx - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            nt,
            nx,
            dt: window.horizon / nt as f64,
            dx: 2.0 * window.half_width / nx as f64,
            horizon: window.horizon,
            half_width: window.half_width,
        })
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.nt {
            self.horizon
        } else {
            j as f64 * self.dt
        }
    }

    pub fn point(&self, k: usize) -> f64 {
        if k == self.nx {
            self.half_width
        } else {
            -self.half_width + k as f64 * self.dx
        }
    }

    /// Cell edges: `x_0 ± Δx/2` clipped to the window.
    fn edges(&self) -> Vec<f64> {
        let mut e = Vec::with_capacity(self.nx + 2);
        e.push(-self.half_width);
        for k in 0..self.nx {
            e.push(self.point(k) + 0.5 * self.dx);
        }
        e.push(self.half_width);
        e
    }

    fn points(&self) -> usize {
        self.nx + 1
    }
}

/// Everything about a compensated solve that does not depend on the cloud:
/// the lattice, the deterministic part on it and the compensator weights.
#[derive(Debug, Clone)]
pub struct LatticePlan {
    grid: LatticeGrid,
    kernel: StableKernel,
    u0: InitialCondition,
    edges: Vec<f64>,
    det: Vec<f64>,
    /// `weights[((dj - 1) * P + k) * P + k']` for full cells `dj = j - m`.
    weights: Vec<f64>,
    leakage: f64,
}

impl LatticePlan {
    pub fn new(kernel: &StableKernel, u0: &InitialCondition, window: &Window, dt: f64, dx: f64) -> Result<Self, SolverError> {
        u0.validate().map_err(SolverError::Config)?;
        let grid = LatticeGrid::new(window, dt, dx)?;
        if kernel.dim() != 1 {
            return Err(SolverError::Unsupported("lattice solver needs a one-dimensional kernel".into()));
        }
        let p = grid.points();
        let mut det = Vec::with_capacity((grid.nt + 1) * p);
        for j in 0..=grid.nt {
            for k in 0..p {
                det.push(deterministic_part(kernel, u0, grid.time(j), &[grid.point(k)])?);
            }
        }
        let edges = grid.edges();
        let mut weights = vec![0.0; grid.nt * p * p];
        let mut cdf = vec![0.0; edges.len()];
        for dj in 1..=grid.nt {
            let tau = (dj as f64 - 0.5) * grid.dt;
            for k in 0..p {
                let x = grid.point(k);
                for (c, &e) in cdf.iter_mut().zip(&edges) {
                    *c = kernel.cdf_unchecked(tau, x - e);
                }
                let row = &mut weights[((dj - 1) * p + k) * p..((dj - 1) * p + k + 1) * p];
                for (kp, w) in row.iter_mut().enumerate() {
                    *w = grid.dt * (cdf[kp] - cdf[kp + 1]);
                }
            }
        }
        let l = grid.half_width;
        let leakage = (0..p)
            .map(|k| {
                let x = grid.point(k);
                1.0 - kernel.mass(grid.horizon, x - l, x + l)
            })
            .fold(0.0, f64::max);
        Ok(Self {
            grid,
            kernel: kernel.clone(),
            u0: u0.clone(),
            edges,
            det,
            weights,
            leakage,
        })
    }

    pub fn from_config(kernel: &StableKernel, config: &SolverConfig) -> Result<Self, SolverError> {
        Self::new(kernel, &config.u0, &config.window, config.dt, config.dx)
    }

    pub fn grid(&self) -> &LatticeGrid {
        &self.grid
    }

    pub fn kernel(&self) -> &StableKernel {
        &self.kernel
    }

    /// Deterministic part on the lattice, time-major.
    pub fn deterministic(&self) -> &[f64] {
        &self.det
    }

    /// `1 - ∫_{-L}^{L} p(T, x - y) dy` at the worst lattice point.
    pub fn leakage(&self) -> f64 {
        self.leakage
    }

    /// `Σ_m ℓ_m Σ_k' M(τ_m; x, k') G[m][k']` at an arbitrary `(t, x)`.
    fn compensator_at(&self, t: f64, x: f64, g: &[f64]) -> f64 {
        let p = self.grid.points();
        let mut total = 0.0;
        let mut cdf = vec![0.0; self.edges.len()];
        for m in 0..self.grid.nt {
            let tm = self.grid.time(m);
            if tm >= t {
                break;
            }
            let len = self.grid.dt.min(t - tm);
            let tau = t - tm - 0.5 * len;
            for (c, &e) in cdf.iter_mut().zip(&self.edges) {
                *c = self.kernel.cdf_unchecked(tau, x - e);
            }
            let gm = &g[m * p..(m + 1) * p];
            let mut acc = 0.0;
            for kp in 0..p {
                acc += (cdf[kp] - cdf[kp + 1]) * gm[kp];
            }
            total += len * acc;
        }
        total
    }

    /// Compensator weights at `(t, x)` flattened over `(m, k')`.
    fn compensator_weights(&self, t: f64, x: f64) -> Vec<f64> {
        let p = self.grid.points();
        let mut out = Vec::new();
        let mut cdf = vec![0.0; self.edges.len()];
        for m in 0..self.grid.nt {
            let tm = self.grid.time(m);
            if tm >= t {
                break;
            }
            let len = self.grid.dt.min(t - tm);
            let tau = t - tm - 0.5 * len;
            for (c, &e) in cdf.iter_mut().zip(&self.edges) {
                *c = self.kernel.cdf_unchecked(tau, x - e);
            }
            for kp in 0..p {
                out.push(len * (cdf[kp] - cdf[kp + 1]));
            }
        }
        out
    }
}

/// Lattice solution of the compensated equation.
#[derive(Debug, Clone)]
pub struct LatticeField {
    plan: Arc<LatticePlan>,
    cloud: PointCloud,
    sigma: JumpCoefficient,
    lambda: f64,
    values: Vec<f64>,
    event_values: Vec<f64>,
    comp_g: Vec<f64>,
    jumps: Vec<f64>,
    iterations: usize,
    residual: f64,
    residual_history: Vec<f64>,
    gated: bool,
}

/// Checks the existence gate: `d = 1` and `Υ(β) < ∞`.
pub fn existence_gate(kernel: &StableKernel, config: &SolverConfig) -> Result<bool, SolverError> {
    if kernel.dim() != 1 {
        return Err(SolverError::Unsupported(format!(
            "the compensated equation has random-field solutions only in d = 1, got d = {}",
            kernel.dim()
        )));
    }
    let ups = upsilon(&kernel.symbol(), config.beta)?;
    if ups.is_finite() {
        return Ok(true);
    }
    if config.override_existence_gate {
        return Ok(false);
    }
    Err(SolverError::ExistenceGate(format!(
        "Υ(β) = ∞ for alpha = {} (Dalang condition fails for alpha <= 1), so the existence condition \
         C_{{d,α,β}}·λ·K·Lip_σ < 1 has no finite constant; rerun with the override flag to solve anyway (results labeled ungated)",
        kernel.alpha()
    )))
}

/// Gates, plans and solves.
pub fn solve_compensated(
    cloud: &PointCloud,
    kernel: &StableKernel,
    sigma: &JumpCoefficient,
    config: &SolverConfig,
) -> Result<LatticeField, SolverError> {
    config.validate()?;
    let gated = existence_gate(kernel, config)?;
    let plan = Arc::new(LatticePlan::from_config(kernel, config)?);
    solve_with_plan(&plan, cloud, sigma, config, gated)
}

/// Picard iteration reusing a prepared plan. `gated` labels the result.
pub fn solve_with_plan(
    plan: &Arc<LatticePlan>,
    cloud: &PointCloud,
    sigma: &JumpCoefficient,
    config: &SolverConfig,
    gated: bool,
) -> Result<LatticeField, SolverError> {
    let grid = plan.grid;
    let p = grid.points();
    let nt = grid.nt;
    let lambda = config.lambda;
    let k1 = sigma.k1();
    let events = cloud.events();
    let n = events.len();
    if cloud.window().dim != 1 {
        return Err(SolverError::Unsupported("lattice solver needs a one-dimensional cloud".into()));
    }

    // Cloud-dependent weights, fixed across iterations.
    let mut ev_det = Vec::with_capacity(n);
    let mut ev_ev: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    let mut ev_comp = Vec::with_capacity(n);
    // For event i: first lattice time strictly after s_i, and kernel values there.
    let mut ev_lat: Vec<(usize, Vec<f64>)> = Vec::with_capacity(n);
    for (i, e) in events.iter().enumerate() {
        let (s, y) = (e.s, e.y[0]);
        ev_det.push(deterministic_part(&plan.kernel, &plan.u0, s, &e.y)?);
        let mut pairs = Vec::new();
        for (j, prev) in events[..i].iter().enumerate() {
            if prev.s < s {
                pairs.push((j, kernel_between(&plan.kernel, s - prev.s, &e.y, &prev.y)));
            }
        }
        ev_ev.push(pairs);
        ev_comp.push(plan.compensator_weights(s, y));
        let j0 = (0..=nt).find(|&j| grid.time(j) > s).unwrap_or(nt + 1);
        let mut vals = Vec::with_capacity((nt + 1 - j0.min(nt + 1)) * p);
        for j in j0..=nt {
            let tau = grid.time(j) - s;
            for k in 0..p {
                vals.push(plan.kernel.radial(tau, (grid.point(k) - y).abs()));
            }
        }
        if let Some(bad) = vals.iter().position(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite { index: i, value: vals[bad] });
        }
        ev_lat.push((j0, vals));
    }

    let mut u = plan.det.clone();
    let mut v = ev_det.clone();
    let mut g = vec![0.0; u.len()];
    let mut jumps = vec![0.0; n];
    let mut history = Vec::new();
    let mut rising = 0;
    let mut u_new = vec![0.0; u.len()];
    let mut v_new = vec![0.0; n];
    let mut iterations = 0;
    loop {
        iterations += 1;
        for (gv, &uv) in g.iter_mut().zip(&u) {
            *gv = k1 * sigma.state.eval(uv);
        }
        for i in 0..n {
            jumps[i] = sigma.eval(v[i], events[i].h);
        }

        // Lattice update.
        u_new[..p].copy_from_slice(&plan.det[..p]);
        for j in 1..=nt {
            let row = &mut u_new[j * p..(j + 1) * p];
            let mut comp = vec![0.0; p];
            for m in 0..j {
                let gm = &g[m * p..(m + 1) * p];
                let wblock = &plan.weights[(j - m - 1) * p * p..(j - m) * p * p];
                for (k, c) in comp.iter_mut().enumerate() {
                    let w = &wblock[k * p..(k + 1) * p];
                    *c += w.iter().zip(gm).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            for (k, r) in row.iter_mut().enumerate() {
                *r = -comp[k];
            }
            for (i, (j0, vals)) in ev_lat.iter().enumerate() {
                if j >= *j0 && jumps[i] != 0.0 {
                    let off = (j - j0) * p;
                    for (k, r) in row.iter_mut().enumerate() {
                        *r += vals[off + k] * jumps[i];
                    }
                }
            }
            for (k, r) in row.iter_mut().enumerate() {
                *r = plan.det[j * p + k] + lambda * *r;
            }
        }

        // Event update.
        for i in 0..n {
            let mut acc: f64 = ev_ev[i].iter().map(|&(j, w)| w * jumps[j]).sum();
            acc -= ev_comp[i].iter().zip(&g).map(|(w, gv)| w * gv).sum::<f64>();
            v_new[i] = ev_det[i] + lambda * acc;
        }

        let mut residual: f64 = 0.0;
        for (a, b) in u_new.iter().zip(&u) {
            residual = residual.max((a - b).abs());
        }
        for (a, b) in v_new.iter().zip(&v) {
            residual = residual.max((a - b).abs());
        }
        if !residual.is_finite() {
            let index = v_new.iter().position(|x| !x.is_finite()).unwrap_or(n);
            return Err(SolverError::NonFinite { index, value: residual });
        }
        std::mem::swap(&mut u, &mut u_new);
        std::mem::swap(&mut v, &mut v_new);
        if let Some(&last) = history.last() {
            rising = if residual > last { rising + 1 } else { 0 };
        }
        history.push(residual);
        if residual <= config.tolerance {
            break;
        }
        if rising >= DIVERGENCE_RUN {
            return Err(SolverError::Diverged { iterations, residual });
        }
        if iterations >= config.max_iterations {
            return Err(SolverError::NotConverged { iterations, residual });
        }
    }

    // Freeze the integrand at the converged values for off-lattice queries.
    for (gv, &uv) in g.iter_mut().zip(&u) {
        *gv = k1 * sigma.state.eval(uv);
    }
    for i in 0..n {
        jumps[i] = sigma.eval(v[i], events[i].h);
    }
    let residual = *history.last().unwrap();
    Ok(LatticeField {
        plan: plan.clone(),
        cloud: cloud.clone(),
        sigma: sigma.clone(),
        lambda,
        values: u,
        event_values: v,
        comp_g: g,
        jumps,
        iterations,
        residual,
        residual_history: history,
        gated,
    })
}

impl LatticeField {
    pub fn grid(&self) -> &LatticeGrid {
        &self.plan.grid
    }

    pub fn plan(&self) -> &Arc<LatticePlan> {
        &self.plan
    }

    /// Lattice values, time-major.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.plan.grid.points() + k]
    }

    /// `u(s_i-, y_i)` in event order.
    pub fn event_values(&self) -> &[f64] {
        &self.event_values
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Sup-norm change of every Picard step.
    pub fn residual_history(&self) -> &[f64] {
        &self.residual_history
    }

    /// `false` when the existence gate was overridden.
    pub fn gated(&self) -> bool {
        self.gated
    }

    pub fn label(&self) -> &'static str {
        if self.gated {
            "gated"
        } else {
            "ungated"
        }
    }

    pub fn sigma(&self) -> &JumpCoefficient {
        &self.sigma
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    /// `u(t, x)` by the mild formula given its deterministic part.
    pub fn eval_with_deterministic(&self, t: f64, x: f64, det: f64) -> Result<f64, SolverError> {
        let horizon = self.plan.grid.horizon;
        if !(t >= 0.0 && t <= horizon) {
            return Err(SolverError::OutsideWindow { t, horizon });
        }
        let mut acc = 0.0;
        for (e, &jump) in self.cloud.events().iter().zip(&self.jumps) {
            if e.s >= t {
                break;
            }
            acc += self.plan.kernel.radial(t - e.s, (x - e.y[0]).abs()) * jump;
        }
        acc -= self.plan.compensator_at(t, x, &self.comp_g);
        let v = det + self.lambda * acc;
        if !v.is_finite() {
            return Err(SolverError::NonFinite {
                index: self.cloud.len(),
                value: v,
            });
        }
        Ok(v)
    }

    /// `u(t, x)` anywhere in the window.
    pub fn field_eval(&self, t: f64, x: f64) -> Result<f64, SolverError> {
        let det = deterministic_part(&self.plan.kernel, &self.plan.u0, t, &[x])?;
        self.eval_with_deterministic(t, x, det)
    }

    /// CSV `t,x,u` in time-major lattice order.
    pub fn to_csv(&self) -> String {
        let grid = &self.plan.grid;
        let mut out = String::from("t,x,u\n");
        for j in 0..=grid.nt {
            for k in 0..=grid.nx {
                push_row(&mut out, &[grid.time(j), grid.point(k), self.value(j, k)]);
            }
        }
        out
    }
}

impl FieldEval for LatticeField {
    fn eval(&self, t: f64, x: &[f64]) -> Result<f64, SolverError> {
        self.field_eval(t, x[0])
    }
}
