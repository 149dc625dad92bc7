//! Monte Carlo moments, coupled time increments, Kolmogorov–Čentsov
//! regression, the finite-horizon Lyapunov proxy and continuity verdicts.
//!
//! Replica `i` under master seed `m` samples its cloud from
//! `ChaCha8Rng::seed_from_u64(derive_seed(m, i))`. Replicas are solved in
//! parallel chunks and reduced sequentially in index order, so every estimate
//! is bit-identical for any worker count.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bounds::{self, BoundBreakdown, BoundsError, MeanInputs, MeanSquareInputs};
use crate::csv::{fmt_f64, push_row};
use crate::kernel::{fit_envelope, EnvelopeGrid, KernelError, StableKernel};
use crate::measure::{sample_prm, LevyMeasure, PointCloud};
use crate::seed::derive_seed;
use crate::solver::lattice::{existence_gate, solve_with_plan};
use crate::solver::{
    deterministic_part, solve_noncompensated, EventSolution, JumpCoefficient, LatticeField, LatticePlan, NormGrid,
    NormKind, NormValue, SolverConfig, SolverError,
};

const CHUNK: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("invalid analysis input: {0}")]
    Invalid(String),
    #[error("replica {index} failed: {source}")]
    Replica { index: usize, source: SolverError },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Which mild equation a scenario solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    /// Compensated noise, lattice Picard solver, `d = 1`.
    Compensated,
    /// Non-compensated noise, exact event recursion.
    NonCompensated,
}

impl Equation {
    pub fn name(&self) -> &'static str {
        match self {
            Equation::Compensated => "compensated",
            Equation::NonCompensated => "noncompensated",
        }
    }
}

/// Everything needed to solve one replica from a seed.
#[derive(Debug, Clone)]
pub struct Scenario {
    equation: Equation,
    kernel: StableKernel,
    measure: LevyMeasure,
    sigma: JumpCoefficient,
    config: SolverConfig,
    plan: Option<Arc<LatticePlan>>,
    gated: bool,
}

impl Scenario {
    /// Applies the existence gate and prepares the lattice plan once.
    pub fn compensated(
        kernel: StableKernel,
        measure: LevyMeasure,
        sigma: JumpCoefficient,
        config: SolverConfig,
    ) -> Result<Self, AnalysisError> {
        config.validate()?;
        let gated = existence_gate(&kernel, &config)?;
        let plan = Arc::new(LatticePlan::from_config(&kernel, &config)?);
        Ok(Self {
            equation: Equation::Compensated,
            kernel,
            measure,
            sigma,
            config,
            plan: Some(plan),
            gated,
        })
    }

    pub fn noncompensated(
        kernel: StableKernel,
        measure: LevyMeasure,
        sigma: JumpCoefficient,
        config: SolverConfig,
    ) -> Result<Self, AnalysisError> {
        config.validate()?;
        if config.window.dim != kernel.dim() {
            return Err(AnalysisError::Invalid(format!(
                "window dimension {} does not match kernel dimension {}",
                config.window.dim,
                kernel.dim()
            )));
        }
        Ok(Self {
            equation: Equation::NonCompensated,
            kernel,
            measure,
            sigma,
            config,
            plan: None,
            gated: true,
        })
    }

    pub fn equation(&self) -> Equation {
        self.equation
    }

    pub fn kernel(&self) -> &StableKernel {
        &self.kernel
    }

    pub fn measure(&self) -> &LevyMeasure {
        &self.measure
    }

    pub fn sigma(&self) -> &JumpCoefficient {
        &self.sigma
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// False when the existence gate was overridden.
    pub fn gated(&self) -> bool {
        self.gated
    }

    /// The cloud of replica `index`.
    pub fn cloud(&self, master_seed: u64, index: usize) -> PointCloud {
        let seed = derive_seed(master_seed, index as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sample_prm(&self.config.window, &self.measure, &mut rng).with_seed(seed)
    }

    pub fn solve(&self, cloud: &PointCloud) -> Result<Replica, SolverError> {
        match self.equation {
            Equation::Compensated => {
                let plan = self.plan.as_ref().expect("compensated scenarios carry a plan");
                solve_with_plan(plan, cloud, &self.sigma, &self.config, self.gated).map(Replica::Lattice)
            }
            Equation::NonCompensated => {
                solve_noncompensated(cloud, &self.kernel, &self.sigma, &self.config).map(Replica::Event)
            }
        }
    }

    pub fn solve_replica(&self, master_seed: u64, index: usize) -> Result<Replica, SolverError> {
        self.solve(&self.cloud(master_seed, index))
    }

    /// `∫ p(t, x - y) u0(y) dy`.
    pub fn deterministic(&self, t: f64, x: &[f64]) -> Result<f64, SolverError> {
        deterministic_part(&self.kernel, &self.config.u0, t, x)
    }

    fn check_point(&self, t: f64, x: &[f64]) -> Result<(), AnalysisError> {
        let w = &self.config.window;
        if !(t >= 0.0 && t <= w.horizon) {
            return Err(AnalysisError::Invalid(format!("t = {t} lies outside [0, {}]", w.horizon)));
        }
        if x.len() != w.dim {
            return Err(AnalysisError::Invalid(format!("x has {} coordinates, expected {}", x.len(), w.dim)));
        }
        Ok(())
    }

    /// Runs `f` on every replica and folds its `width` outputs into
    /// accumulators in index order.
    fn fold<F>(&self, replicas: usize, master_seed: u64, width: usize, f: F) -> Result<Vec<Accumulator>, AnalysisError>
    where
        F: Fn(&Replica) -> Result<Vec<f64>, SolverError> + Sync,
    {
        if replicas == 0 {
            return Err(AnalysisError::Invalid("at least one replica is required".into()));
        }
        let mut acc = vec![Accumulator::default(); width];
        let mut start = 0;
        while start < replicas {
            let end = (start + CHUNK).min(replicas);
            let chunk: Vec<Result<Vec<f64>, SolverError>> = (start..end)
                .into_par_iter()
                .map(|i| self.solve_replica(master_seed, i).and_then(|r| f(&r)))
                .collect();
            for (offset, res) in chunk.into_iter().enumerate() {
                let index = start + offset;
                let row = res.map_err(|source| AnalysisError::Replica { index, source })?;
                for (a, v) in acc.iter_mut().zip(row) {
                    a.push(v);
                }
            }
            start = end;
        }
        Ok(acc)
    }
}

/// One solved replica.
#[derive(Debug, Clone)]
pub enum Replica {
    Lattice(LatticeField),
    Event(EventSolution),
}

impl Replica {
    /// `u(t, x)` given the deterministic part at `(t, x)`.
    pub fn eval_with_deterministic(&self, t: f64, x: &[f64], det: f64) -> Result<f64, SolverError> {
        match self {
            Replica::Lattice(f) => f.eval_with_deterministic(t, x[0], det),
            Replica::Event(e) => e.eval_with_deterministic(t, x, det),
        }
    }
}

/// Running count, sum and sum of squares, shifted by the first value so
/// that identical inputs give an exact mean and a zero variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    n: usize,
    shift: f64,
    s1: f64,
    s2: f64,
}

impl Accumulator {
    pub fn push(&mut self, v: f64) {
        if self.n == 0 {
            self.shift = v;
        }
        let d = v - self.shift;
        self.n += 1;
        self.s1 += d;
        self.s2 += d * d;
    }

    /// Combines with an accumulator of later samples.
    pub fn merge(&mut self, other: &Accumulator) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let delta = other.shift - self.shift;
        let m = other.n as f64;
        self.s2 += other.s2 + 2.0 * delta * other.s1 + m * delta * delta;
        self.s1 += other.s1 + m * delta;
        self.n += other.n;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            return f64::NAN;
        }
        self.shift + self.s1 / self.n as f64
    }

    /// Sample variance, 0 for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        ((self.s2 - self.s1 * self.s1 / n) / (n - 1.0)).max(0.0)
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

#[inline]
fn abs_pow(v: f64, p: f64) -> f64 {
    let a = v.abs();
    if p == 1.0 {
        a
    } else if p == 2.0 {
        a * a
    } else {
        a.powf(p)
    }
}

fn check_p(p: f64) -> Result<(), AnalysisError> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(AnalysisError::Invalid(format!("moment order p must be positive, got {p}")));
    }
    Ok(())
}

/// Monte Carlo estimate of `E|u(t, x)|^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub replicas: usize,
    pub p: f64,
    pub t: f64,
    pub x: Vec<f64>,
}

impl MomentEstimate {
    fn from_acc(acc: &Accumulator, p: f64, t: f64, x: &[f64]) -> Self {
        Self {
            value: acc.mean(),
            stderr: acc.stderr(),
            replicas: acc.count(),
            p,
            t,
            x: x.to_vec(),
        }
    }
}

/// CSV `t,moment,stderr`.
pub fn moments_csv(moments: &[MomentEstimate]) -> String {
    let mut out = String::from("t,moment,stderr\n");
    for m in moments {
        push_row(&mut out, &[m.t, m.value, m.stderr]);
    }
    out
}

/// `E|u(t, x)|^p` over `replicas` independent replicas.
pub fn mc_moment(
    scenario: &Scenario,
    p: f64,
    t: f64,
    x: &[f64],
    replicas: usize,
    master_seed: u64,
) -> Result<MomentEstimate, AnalysisError> {
    Ok(mc_moments(scenario, p, &[t], x, replicas, master_seed)?.remove(0))
}

/// `E|u(t, x)|^p` at several times, all from the same replicas.
pub fn mc_moments(
    scenario: &Scenario,
    p: f64,
    times: &[f64],
    x: &[f64],
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<MomentEstimate>, AnalysisError> {
    check_p(p)?;
    if times.is_empty() {
        return Err(AnalysisError::Invalid("no evaluation times".into()));
    }
    let mut dets = Vec::with_capacity(times.len());
    for &t in times {
        scenario.check_point(t, x)?;
        dets.push(scenario.deterministic(t, x)?);
    }
    let acc = scenario.fold(replicas, master_seed, times.len(), |r| {
        times
            .iter()
            .zip(&dets)
            .map(|(&t, &det)| r.eval_with_deterministic(t, x, det).map(|u| abs_pow(u, p)))
            .collect()
    })?;
    Ok(acc.iter().zip(times).map(|(a, &t)| MomentEstimate::from_acc(a, p, t, x)).collect())
}

/// Coupled `E|u(t2, x) - u(t1, x)|^p`: both times come from the same cloud.
pub fn mc_increment(
    scenario: &Scenario,
    p: f64,
    t1: f64,
    t2: f64,
    x: &[f64],
    replicas: usize,
    master_seed: u64,
) -> Result<MomentEstimate, AnalysisError> {
    check_p(p)?;
    if !(t1 >= 0.0 && t2 >= t1) {
        return Err(AnalysisError::Invalid(format!("need 0 <= t1 <= t2, got t1 = {t1}, t2 = {t2}")));
    }
    let series = increment_series(scenario, &IncrementRequest::single(t1, t2, x, p), replicas, master_seed)?;
    Ok(MomentEstimate {
        value: series.estimates[0],
        stderr: series.stderrs[0],
        replicas,
        p,
        t: t2,
        x: x.to_vec(),
    })
}

/// `h_k = (t2 - t1) 2^{-k}`, `k = 0..=levels`.
pub fn dyadic_lags(t1: f64, t2: f64, levels: usize) -> Vec<f64> {
    (0..=levels).map(|k| (t2 - t1) * 0.5f64.powi(k as i32)).collect()
}

/// Lags and increment estimates from coupled replicas.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementSeries {
    pub t1: f64,
    pub x: Vec<f64>,
    pub p: f64,
    pub lags: Vec<f64>,
    pub estimates: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub replicas: usize,
}

impl IncrementSeries {
    /// Checks that lags strictly decrease and estimates are nonnegative.
    pub fn new(
        t1: f64,
        x: Vec<f64>,
        p: f64,
        lags: Vec<f64>,
        estimates: Vec<f64>,
        stderrs: Vec<f64>,
        replicas: usize,
    ) -> Result<Self, AnalysisError> {
        if lags.len() != estimates.len() || lags.len() != stderrs.len() {
            return Err(AnalysisError::Invalid("lags, estimates and stderrs differ in length".into()));
        }
        if lags.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(AnalysisError::Invalid("lags must strictly decrease".into()));
        }
        if let Some(bad) = estimates.iter().chain(&stderrs).find(|v| !(**v >= 0.0)) {
            return Err(AnalysisError::Invalid(format!("estimates and stderrs must be >= 0, got {bad}")));
        }
        Ok(Self {
            t1,
            x,
            p,
            lags,
            estimates,
            stderrs,
            replicas,
        })
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }
}

/// Which increments to estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementRequest {
    pub t1: f64,
    pub t2: f64,
    pub x: Vec<f64>,
    pub p: f64,
    /// Dyadic levels `K`; lags `h_0 = t2 - t1` down to `h_K`.
    pub levels: usize,
}

impl IncrementRequest {
    pub fn new(t1: f64, t2: f64, x: &[f64], p: f64) -> Self {
        Self {
            t1,
            t2,
            x: x.to_vec(),
            p,
            levels: 8,
        }
    }

    fn single(t1: f64, t2: f64, x: &[f64], p: f64) -> Self {
        Self {
            levels: 0,
            ..Self::new(t1, t2, x, p)
        }
    }
}

/// Coupled increment estimates at every dyadic lag.
pub fn increment_series(
    scenario: &Scenario,
    req: &IncrementRequest,
    replicas: usize,
    master_seed: u64,
) -> Result<IncrementSeries, AnalysisError> {
    Ok(increment_study(scenario, req, replicas, master_seed, false)?.0)
}

/// Increment series together with the ensemble norm
/// `sup e^{-βt} E|u|^p` (square-rooted for `p = 2`) from the same replicas.
/// The norm is taken on the lattice for compensated scenarios and on a
/// 33 × 41 grid otherwise (first coordinate varying, others 0).
pub fn increment_series_with_norm(
    scenario: &Scenario,
    req: &IncrementRequest,
    replicas: usize,
    master_seed: u64,
) -> Result<(IncrementSeries, NormValue), AnalysisError> {
    let (series, norm) = increment_study(scenario, req, replicas, master_seed, true)?;
    Ok((series, norm.expect("norm requested")))
}

fn increment_study(
    scenario: &Scenario,
    req: &IncrementRequest,
    replicas: usize,
    master_seed: u64,
    with_norm: bool,
) -> Result<(IncrementSeries, Option<NormValue>), AnalysisError> {
    let IncrementRequest { t1, t2, ref x, p, levels } = *req;
    check_p(p)?;
    if !(t1 >= 0.0 && t2 >= t1) {
        return Err(AnalysisError::Invalid(format!("need 0 <= t1 <= t2, got t1 = {t1}, t2 = {t2}")));
    }
    scenario.check_point(t1, x)?;
    scenario.check_point(t2, x)?;
    let lags = dyadic_lags(t1, t2, levels);
    if t1 == t2 {
        let n = lags.len();
        return Ok((
            IncrementSeries {
                t1,
                x: x.clone(),
                p,
                lags,
                estimates: vec![0.0; n],
                stderrs: vec![0.0; n],
                replicas,
            },
            if with_norm { Some(mc_norm(scenario, p, replicas, master_seed)?) } else { None },
        ));
    }
    let times: Vec<f64> = lags.iter().map(|h| t1 + h).collect();
    let det1 = scenario.deterministic(t1, x)?;
    let dets = times.iter().map(|&t| scenario.deterministic(t, x)).collect::<Result<Vec<_>, _>>()?;
    let probe = if with_norm { Some(NormProbe::new(scenario)?) } else { None };
    let width = lags.len() + probe.as_ref().map_or(0, |n| n.len());
    let acc = scenario.fold(replicas, master_seed, width, |r| {
        let u1 = r.eval_with_deterministic(t1, x, det1)?;
        let mut row = Vec::with_capacity(width);
        for (&t, &det) in times.iter().zip(&dets) {
            row.push(abs_pow(r.eval_with_deterministic(t, x, det)? - u1, p));
        }
        if let Some(probe) = &probe {
            probe.sample(r, p, &mut row)?;
        }
        Ok(row)
    })?;
    let n = lags.len();
    let series = IncrementSeries::new(
        t1,
        x.clone(),
        p,
        lags,
        acc[..n].iter().map(Accumulator::mean).collect(),
        acc[..n].iter().map(Accumulator::stderr).collect(),
        replicas,
    )?;
    let norm = probe.map(|probe| probe.finish(&acc[n..], p, scenario.config.beta));
    Ok((series, norm))
}

/// Ensemble norm `sup e^{-βt} E|u|^p` (square-rooted for `p = 2`) on the
/// grid described at [`increment_series_with_norm`].
pub fn mc_norm(scenario: &Scenario, p: f64, replicas: usize, master_seed: u64) -> Result<NormValue, AnalysisError> {
    check_p(p)?;
    let probe = NormProbe::new(scenario)?;
    let acc = scenario.fold(replicas, master_seed, probe.len(), |r| {
        let mut row = Vec::with_capacity(probe.len());
        probe.sample(r, p, &mut row)?;
        Ok(row)
    })?;
    Ok(probe.finish(&acc, p, scenario.config.beta))
}

/// Grid and deterministic values for ensemble norms.
struct NormProbe {
    times: Vec<f64>,
    points: Vec<Vec<f64>>,
    dets: Vec<f64>,
    lattice: bool,
}

impl NormProbe {
    fn new(scenario: &Scenario) -> Result<Self, AnalysisError> {
        if let Some(plan) = &scenario.plan {
            let g = plan.grid();
            return Ok(Self {
                times: (0..=g.nt).map(|j| g.time(j)).collect(),
                points: (0..=g.nx).map(|k| vec![g.point(k)]).collect(),
                dets: Vec::new(),
                lattice: true,
            });
        }
        let w = &scenario.config.window;
        let grid = NormGrid::uniform(w, 32, 40);
        let points: Vec<Vec<f64>> = grid
            .points
            .iter()
            .map(|p| {
                let mut v = vec![0.0; w.dim];
                v[0] = p[0];
                v
            })
            .collect();
        let mut dets = Vec::with_capacity(grid.times.len() * points.len());
        for &t in &grid.times {
            for x in &points {
                dets.push(scenario.deterministic(t, x)?);
            }
        }
        Ok(Self {
            times: grid.times,
            points,
            dets,
            lattice: false,
        })
    }

    fn len(&self) -> usize {
        self.times.len() * self.points.len()
    }

    fn sample(&self, r: &Replica, p: f64, row: &mut Vec<f64>) -> Result<(), SolverError> {
        match r {
            Replica::Lattice(f) if self.lattice => row.extend(f.values().iter().map(|&u| abs_pow(u, p))),
            _ => {
                let np = self.points.len();
                for (j, &t) in self.times.iter().enumerate() {
                    for (k, x) in self.points.iter().enumerate() {
                        row.push(abs_pow(r.eval_with_deterministic(t, x, self.dets[j * np + k])?, p));
                    }
                }
            }
        }
        Ok(())
    }

    fn finish(&self, acc: &[Accumulator], p: f64, beta: f64) -> NormValue {
        let np = self.points.len();
        let mut sup: f64 = 0.0;
        for (j, &t) in self.times.iter().enumerate() {
            let w = (-beta * t).exp();
            for a in &acc[j * np..(j + 1) * np] {
                sup = sup.max(w * a.mean());
            }
        }
        NormValue {
            value: if p == 2.0 { sup.sqrt() } else { sup },
            kind: NormKind::Ensemble,
        }
    }
}

/// CSV `lag,estimate,stderr`.
pub fn series_csv(series: &IncrementSeries) -> String {
    let mut out = String::from("lag,estimate,stderr\n");
    for i in 0..series.len() {
        push_row(&mut out, &[series.lags[i], series.estimates[i], series.stderrs[i]]);
    }
    out
}

/// Least-squares slope of `ln E` against `ln h`.
#[derive(Debug, Clone, PartialEq)]
pub struct HolderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the band: 3 standard errors of the slope.
    pub band: f64,
    pub points: usize,
    pub p: f64,
    /// `(m - 1)/p`, present only when `m - band > 1`.
    pub kc_exponent: Option<f64>,
    /// Whether the fit was weighted by the propagated stderrs.
    pub weighted: bool,
}

impl HolderFit {
    pub fn covers(&self, slope: f64) -> bool {
        (self.slope - slope).abs() <= self.band
    }

    pub fn conclusion(&self) -> String {
        match self.kc_exponent {
            Some(e) => format!("Hölder exponent up to {}", fmt_f64(e)),
            None => "no KC conclusion".to_string(),
        }
    }
}

/// Kolmogorov–Čentsov regression. Points with nonpositive estimates are
/// dropped. When every kept point has a positive stderr the fit is weighted
/// by `(E/se)²` and the slope variance follows from those weights; otherwise
/// it is unweighted with the residual variance.
pub fn holder_exponent(series: &IncrementSeries, p: f64) -> Result<HolderFit, AnalysisError> {
    check_p(p)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut rel = Vec::new();
    for i in 0..series.len() {
        let e = series.estimates[i];
        if e > 0.0 && series.lags[i] > 0.0 {
            xs.push(series.lags[i].ln());
            ys.push(e.ln());
            rel.push(series.stderrs[i] / e);
        }
    }
    if xs.len() < 4 {
        return Err(AnalysisError::Invalid(format!(
            "Hölder regression needs at least 4 positive estimates, got {}",
            xs.len()
        )));
    }
    let weighted = rel.iter().all(|r| *r > 0.0);
    let fit = if weighted {
        let w: Vec<f64> = rel.iter().map(|r| 1.0 / (r * r)).collect();
        weighted_line(&xs, &ys, &w, true)
    } else {
        weighted_line(&xs, &ys, &vec![1.0; xs.len()], false)
    };
    let band = 3.0 * fit.slope_se;
    Ok(HolderFit {
        slope: fit.slope,
        intercept: fit.intercept,
        band,
        points: xs.len(),
        p,
        kc_exponent: if fit.slope - band > 1.0 { Some((fit.slope - 1.0) / p) } else { None },
        weighted,
    })
}

struct LineFit {
    slope: f64,
    intercept: f64,
    slope_se: f64,
}

/// Weighted least squares. With `known_variance` the weights are inverse
/// variances; otherwise the residual variance is estimated.
fn weighted_line(xs: &[f64], ys: &[f64], w: &[f64], known_variance: bool) -> LineFit {
    // Shift by the first value so a constant series fits with slope exactly 0.
    let y0 = ys[0];
    let ys: Vec<f64> = ys.iter().map(|y| y - y0).collect();
    let sw: f64 = w.iter().sum();
    let xm = xs.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let ym = ys.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..xs.len() {
        sxx += w[i] * (xs[i] - xm) * (xs[i] - xm);
        sxy += w[i] * (xs[i] - xm) * (ys[i] - ym);
    }
    let slope = sxy / sxx;
    let intercept = y0 + ym - slope * xm;
    let slope_se = if known_variance {
        (1.0 / sxx).sqrt()
    } else if xs.len() > 2 {
        let rss: f64 = (0..xs.len())
            .map(|i| w[i] * (ys[i] - ym - slope * (xs[i] - xm)).powi(2))
            .sum();
        (rss / (xs.len() - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    LineFit {
        slope,
        intercept,
        slope_se,
    }
}

/// Slope of `ln E|u(t, x0)|^p` over the trailing part of a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovProxy {
    pub slope: f64,
    /// 3 standard errors of the slope.
    pub band: f64,
    pub points: usize,
    pub moments: Vec<MomentEstimate>,
}

impl LyapunovProxy {
    pub const LABEL: &'static str = "finite-horizon proxy for the upper Lyapunov exponent";
}

/// Least-squares slope of `ln values` against `times` over the trailing
/// `tail_fraction` of the points (at least 2). Weighted by `(value/se)²`
/// when all stderrs are positive.
pub fn log_slope(times: &[f64], values: &[f64], stderrs: &[f64], tail_fraction: f64) -> Result<(f64, f64, usize), AnalysisError> {
    if !(tail_fraction > 0.0 && tail_fraction < 1.0) {
        return Err(AnalysisError::Invalid(format!("tail fraction must lie in (0, 1), got {tail_fraction}")));
    }
    if times.len() != values.len() || times.len() != stderrs.len() {
        return Err(AnalysisError::Invalid("times, values and stderrs differ in length".into()));
    }
    let n = times.len();
    let keep = ((n as f64 * tail_fraction).ceil() as usize).max(2);
    if keep > n {
        return Err(AnalysisError::Invalid(format!("need at least 2 times, got {n}")));
    }
    let tail = n - keep..n;
    if let Some(i) = tail.clone().find(|&i| !(values[i] > 0.0)) {
        return Err(AnalysisError::Invalid(format!(
            "moment at t = {} is {}, the logarithm is undefined",
            times[i], values[i]
        )));
    }
    let xs = &times[tail.clone()];
    let ys: Vec<f64> = values[tail.clone()].iter().map(|v| v.ln()).collect();
    let rel: Vec<f64> = tail.map(|i| stderrs[i] / values[i]).collect();
    let fit = if rel.iter().all(|r| *r > 0.0) {
        let w: Vec<f64> = rel.iter().map(|r| 1.0 / (r * r)).collect();
        weighted_line(xs, &ys, &w, true)
    } else {
        weighted_line(xs, &ys, &vec![1.0; keep], false)
    };
    Ok((fit.slope, 3.0 * fit.slope_se, keep))
}

pub fn lyapunov_proxy(
    scenario: &Scenario,
    p: f64,
    x0: &[f64],
    times: &[f64],
    replicas: usize,
    tail_fraction: f64,
    master_seed: u64,
) -> Result<LyapunovProxy, AnalysisError> {
    let moments = mc_moments(scenario, p, times, x0, replicas, master_seed)?;
    let values: Vec<f64> = moments.iter().map(|m| m.value).collect();
    let stderrs: Vec<f64> = moments.iter().map(|m| m.stderr).collect();
    let (slope, band, points) = log_slope(times, &values, &stderrs, tail_fraction)?;
    Ok(LyapunovProxy {
        slope,
        band,
        points,
        moments,
    })
}

/// How the decreasing trend at the smallest lag is judged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrendRule {
    /// Smallest-lag estimate at most this fraction of the largest-lag one.
    FractionOfLargest(f64),
    /// Smallest-lag estimate at most this absolute threshold.
    Threshold(f64),
}

impl Default for TrendRule {
    fn default() -> Self {
        TrendRule::FractionOfLargest(0.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerdictRow {
    pub lag: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityReport {
    pub rows: Vec<VerdictRow>,
    pub domination: bool,
    pub trend: bool,
    pub trend_rule: TrendRule,
}

impl ContinuityReport {
    pub fn pass(&self) -> bool {
        self.domination && self.trend
    }

    pub fn verdict(&self) -> &'static str {
        if self.pass() {
            "PASS"
        } else {
            "FAIL"
        }
    }

    /// CSV `lag,estimate,stderr,bound,verdict`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag,estimate,stderr,bound,verdict\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt_f64(r.lag),
                fmt_f64(r.estimate),
                fmt_f64(r.stderr),
                fmt_f64(r.bound),
                if r.pass { "PASS" } else { "FAIL" }
            ));
        }
        out
    }
}

/// Per lag PASS iff `estimate <= bound + 3 stderr`; bounds are matched to
/// lags through their `t1`, `t2` inputs.
pub fn continuity_verdict(
    series: &IncrementSeries,
    analytic: &[BoundBreakdown],
    rule: TrendRule,
) -> Result<ContinuityReport, AnalysisError> {
    if analytic.len() != series.len() {
        return Err(AnalysisError::Invalid(format!(
            "{} lags but {} bounds",
            series.len(),
            analytic.len()
        )));
    }
    let mut rows = Vec::with_capacity(series.len());
    for (i, b) in analytic.iter().enumerate() {
        let input = |name: &str| b.inputs.iter().find(|(n, _)| *n == name).map(|(_, v)| *v);
        let (Some(b1), Some(b2)) = (input("t1"), input("t2")) else {
            return Err(AnalysisError::Invalid(format!("bound {i} does not echo t1 and t2")));
        };
        let lag = series.lags[i];
        let tol = 1e-12 * series.t1.abs().max(lag).max(1.0);
        if (b1 - series.t1).abs() > tol || (b2 - b1 - lag).abs() > tol {
            return Err(AnalysisError::Invalid(format!(
                "bound {i} is for (t1, t2) = ({b1}, {b2}) but the series has t1 = {}, lag = {lag}",
                series.t1
            )));
        }
        let (estimate, stderr) = (series.estimates[i], series.stderrs[i]);
        rows.push(VerdictRow {
            lag,
            estimate,
            stderr,
            bound: b.total,
            pass: estimate <= b.total + 3.0 * stderr,
        });
    }
    let domination = rows.iter().all(|r| r.pass);
    let trend = match (rows.first(), rows.last(), rule) {
        (Some(first), Some(last), TrendRule::FractionOfLargest(f)) => last.estimate <= f * first.estimate,
        (Some(_), Some(last), TrendRule::Threshold(th)) => last.estimate <= th,
        _ => true,
    };
    Ok(ContinuityReport {
        rows,
        domination,
        trend,
        trend_rule: rule,
    })
}

/// Analytic bounds at every lag of a series: `D0 + D1 + D2` with `p = 2` for
/// compensated scenarios, `D3 + D4 + D5` with `p = 1` otherwise. `norm` is
/// the ensemble norm estimate; `c_envelope` defaults to the constant fitted
/// on the standard grid.
pub fn analytic_bounds(
    scenario: &Scenario,
    series: &IncrementSeries,
    norm: f64,
    c_envelope: Option<f64>,
) -> Result<Vec<BoundBreakdown>, AnalysisError> {
    let c = resolve_envelope(scenario, c_envelope)?;
    series
        .lags
        .iter()
        .map(|&h| analytic_bound(scenario, series.t1, series.t1 + h, norm, Some(c)))
        .collect()
}

/// The increment moment order the analytic bound applies to.
pub fn bound_order(equation: Equation) -> f64 {
    match equation {
        Equation::Compensated => 2.0,
        Equation::NonCompensated => 1.0,
    }
}

fn resolve_envelope(scenario: &Scenario, c_envelope: Option<f64>) -> Result<f64, AnalysisError> {
    match (c_envelope, scenario.equation) {
        (Some(c), _) => Ok(c),
        (None, Equation::Compensated) => Ok(f64::NAN),
        (None, Equation::NonCompensated) => Ok(fit_envelope(&scenario.kernel, &EnvelopeGrid::standard())?.c),
    }
}

/// Analytic bound on the increment between `t1` and `t2`.
pub fn analytic_bound(
    scenario: &Scenario,
    t1: f64,
    t2: f64,
    norm: f64,
    c_envelope: Option<f64>,
) -> Result<BoundBreakdown, AnalysisError> {
    let cfg = &scenario.config;
    let lip = scenario.sigma.lipschitz();
    let d = cfg.window.dim;
    match scenario.equation {
        Equation::Compensated => {
            let inp = MeanSquareInputs {
                c0: bounds::square_mass(&cfg.u0, d)?,
                lambda: cfg.lambda,
                k: scenario.sigma.k_for(true),
                lip,
                norm_sq: norm * norm,
                beta: cfg.beta,
                t1,
                t2,
            };
            Ok(bounds::increment_bound_ms(&scenario.kernel.symbol(), &inp)?)
        }
        Equation::NonCompensated => {
            let inp = MeanInputs {
                d,
                alpha: scenario.kernel.alpha(),
                c_envelope: resolve_envelope(scenario, c_envelope)?,
                c0_sup: cfg.u0.sup(d),
                lambda: cfg.lambda,
                k: scenario.sigma.k_for(false),
                lip,
                norm,
                beta: cfg.beta,
                t1,
                t2,
            };
            Ok(bounds::increment_bound_mean(&inp)?)
        }
    }
}
