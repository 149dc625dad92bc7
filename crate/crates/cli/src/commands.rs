//! Subcommand bodies. Each writes one CSV, `effective.cfg` and a gnuplot
//! script, and returns the one-line summary.

use std::fs;
use std::path::{Path, PathBuf};

use levyheat::analysis::{
    analytic_bound, analytic_bounds, bound_order, continuity_verdict, holder_exponent, increment_series,
    increment_series_with_norm, lyapunov_proxy, mc_moments, mc_norm, moments_csv, IncrementRequest,
    LyapunovProxy, Replica, Scenario, TrendRule,
};
use levyheat::csv::{fmt_f64, push_row};
use levyheat::kernel::{KernelMethod, StableKernel};
use levyheat::measure::Window;
use levyheat::seed::derive_seed;
use levyheat::solver::NormGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::error::CliError;
use crate::plot;

pub struct Context {
    pub config: Config,
    pub out: PathBuf,
}

impl Context {
    fn seed(&self) -> Result<u64, CliError> {
        self.config.u64("seed")
    }

    fn emit(&self, command: &str, csv: &str) -> Result<(), CliError> {
        fs::create_dir_all(&self.out)?;
        let name = format!("{command}.csv");
        write(&self.out.join(&name), csv)?;
        write(&self.out.join(format!("{command}.gp")), &plot::script(command, &name))?;
        write(&self.out.join("effective.cfg"), &self.config.effective())
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display())))
}

fn kernel_err(e: levyheat::kernel::KernelError) -> CliError {
    CliError::Numerical(format!("kernel check failed: {e}"))
}

/// Scaling, Chapman–Kolmogorov and normalization residuals on random inputs.
pub fn kernel_check(ctx: &Context) -> Result<String, CliError> {
    let c = &ctx.config;
    let kernel = c.kernel()?;
    let samples = c.usize("check.samples")?;
    let pairs = c.usize("check.pairs")?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(ctx.seed()?, 0));
    let log_uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| lo * (hi / lo).powf(rng.random::<f64>());
    let scaling_tol = match kernel.method() {
        KernelMethod::FourierTable => 1e-6,
        _ => 1e-12,
    };
    let mut rows: Vec<(&str, usize, f64, f64)> = Vec::new();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let s = log_uniform(&mut rng, 0.1, 5.0);
        let t = log_uniform(&mut rng, 0.1, 5.0);
        let x = rng.random_range(-5.0..5.0);
        worst = worst.max(kernel.scaling_residual(s, t, x).map_err(kernel_err)?);
    }
    rows.push(("scaling", samples, worst, scaling_tol));
    if kernel.dim() == 1 {
        let (mut ck, mut norm): (f64, f64) = (0.0, 0.0);
        for _ in 0..pairs {
            let t = log_uniform(&mut rng, 0.1, 5.0);
            let s = log_uniform(&mut rng, 0.1, 5.0);
            ck = ck.max(kernel.chapman_kolmogorov_residual(t, s).map_err(kernel_err)?);
            norm = norm.max(kernel.normalization_residual(t).map_err(kernel_err)?);
        }
        rows.push(("chapman_kolmogorov", pairs, ck, 1e-6));
        rows.push(("normalization", pairs, norm, 1e-6));
    }
    let mut csv = String::from("check,samples,max_residual,tolerance,pass\n");
    let mut pass = true;
    for (name, n, r, tol) in &rows {
        let ok = r <= tol;
        pass &= ok;
        csv.push_str(&format!("{name},{n},{},{},{ok}\n", fmt_f64(*r), fmt_f64(*tol)));
    }
    ctx.emit("kernel-check", &csv)?;
    let max = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let summary = format!(
        "kernel-check alpha={} method={} {} max_residual={max:e} verdict={}",
        kernel.alpha(),
        method_name(&kernel),
        rows.iter().map(|(n, _, r, _)| format!("{n}={r:e}")).collect::<Vec<_>>().join(" "),
        if pass { "PASS" } else { "FAIL" }
    );
    if pass {
        Ok(summary)
    } else {
        Err(CliError::Numerical(summary))
    }
}

fn method_name(k: &StableKernel) -> &'static str {
    match k.method() {
        KernelMethod::Gaussian => "gaussian",
        KernelMethod::Cauchy => "cauchy",
        KernelMethod::FourierTable => "fourier-table",
    }
}

pub fn sample_prm(ctx: &Context) -> Result<String, CliError> {
    let c = &ctx.config;
    let window = c.window()?;
    let measure = c.measure()?;
    let replica = c.usize("solve.replica")?;
    let seed = derive_seed(ctx.seed()?, replica as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cloud = levyheat::measure::sample_prm(&window, &measure, &mut rng);
    ctx.emit("sample-prm", &cloud.to_csv())?;
    Ok(format!(
        "sample-prm events={} expected={} replica={replica}",
        cloud.len(),
        window.volume() * measure.total_mass()
    ))
}

pub fn solve(ctx: &Context) -> Result<String, CliError> {
    let c = &ctx.config;
    let scenario = c.scenario()?;
    let replica = c.usize("solve.replica")?;
    let solved = scenario
        .solve_replica(ctx.seed()?, replica)
        .map_err(|e| CliError::from(levyheat::analysis::AnalysisError::Replica { index: replica, source: e }))?;
    match solved {
        Replica::Lattice(f) => {
            ctx.emit("solve", &f.to_csv())?;
            Ok(format!(
                "solve equation=compensated events={} iterations={} residual={:e} label={}",
                f.cloud().len(),
                f.iterations(),
                f.residual(),
                f.label()
            ))
        }
        Replica::Event(e) => {
            let window: &Window = e.cloud().window();
            let grid = NormGrid::uniform(window, 32, 40);
            let mut csv = String::from("t,x,u\n");
            for &t in &grid.times {
                for p in &grid.points {
                    let mut x = vec![0.0; window.dim];
                    x[0] = p[0];
                    let u = e.field_eval(t, &x).map_err(|err| CliError::Numerical(err.to_string()))?;
                    push_row(&mut csv, &[t, x[0], u]);
                }
            }
            ctx.emit("solve", &csv)?;
            Ok(format!(
                "solve equation=noncompensated events={} iterations=1 residual=0 label=exact-event-recursion",
                e.cloud().len()
            ))
        }
    }
}

/// `moments.points` evenly spaced times in `(0, T]`.
fn time_grid(c: &Config, horizon: f64) -> Result<Vec<f64>, CliError> {
    let n = c.usize("moments.points")?;
    if n < 2 {
        return Err(CliError::Validation("key `moments.points` must be at least 2".into()));
    }
    Ok((1..=n).map(|i| horizon * i as f64 / n as f64).collect())
}

pub fn moments(ctx: &Context) -> Result<String, CliError> {
    let c = &ctx.config;
    let scenario = c.scenario()?;
    let p = c.moment_order()?;
    let times = time_grid(c, scenario.config().window.horizon)?;
    let m = mc_moments(&scenario, p, &times, &c.point()?, c.replicas()?, ctx.seed()?)?;
    ctx.emit("moments", &moments_csv(&m))?;
    let last = m.last().expect("nonempty grid");
    Ok(format!(
        "moments p={p} points={} replicas={} final_t={} final_moment={} stderr={}",
        m.len(),
        last.replicas,
        last.t,
        last.value,
        last.stderr
    ))
}

pub fn lyapunov(ctx: &Context) -> Result<String, CliError> {
    let c = &ctx.config;
    let scenario = c.scenario()?;
    let p = c.moment_order()?;
    let times = time_grid(c, scenario.config().window.horizon)?;
    let tail = c.f64("lyapunov.tail_fraction")?;
    let l = lyapunov_proxy(&scenario, p, &c.point()?, &times, c.replicas()?, tail, ctx.seed()?)?;
    ctx.emit("lyapunov", &moments_csv(&l.moments))?;
    Ok(format!(
        "lyapunov p={p} slope={} band={} points={} ({})",
        l.slope,
        l.band,
        l.points,
        LyapunovProxy::LABEL
    ))
}

fn request(c: &Config, p: f64) -> Result<IncrementRequest, CliError> {
    let mut req = IncrementRequest::new(c.f64("mc.t1")?, c.f64("mc.t2")?, &c.point()?, p);
    req.levels = c.usize("mc.levels")?;
    Ok(req)
}

/// Shared by `increments` and `verify`; `strict` rejects moment orders the
/// analytic bound does not cover.
fn continuity(ctx: &Context, command: &str, strict: bool) -> Result<(String, bool), CliError> {
    let c = &ctx.config;
    let scenario = c.scenario()?;
    let p = c.moment_order()?;
    let expected = bound_order(scenario.equation());
    if p != expected && strict {
        return Err(CliError::Validation(format!(
            "key `mc.p` = {p}: the {} bound is for p = {expected}",
            scenario.equation().name()
        )));
    }
    let req = request(c, p)?;
    let replicas = c.replicas()?;
    let seed = ctx.seed()?;
    if p != expected {
        let series = increment_series(&scenario, &req, replicas, seed)?;
        let mut csv = String::from("lag,estimate,stderr,bound,verdict\n");
        for i in 0..series.len() {
            csv.push_str(&format!(
                "{},{},{},,NA\n",
                fmt_f64(series.lags[i]),
                fmt_f64(series.estimates[i]),
                fmt_f64(series.stderrs[i])
            ));
        }
        ctx.emit(command, &csv)?;
        return Ok((format!("{command} p={p} lags={} verdict=NA (no analytic bound for this p)", series.len()), true));
    }
    let (series, norm) = increment_series_with_norm(&scenario, &req, replicas, seed)?;
    let norm = c.auto_f64("bounds.norm")?.unwrap_or(norm.value);
    let bounds = analytic_bounds(&scenario, &series, norm, c.auto_f64("bounds.c_envelope")?)?;
    let rule = TrendRule::FractionOfLargest(c.f64("verify.trend_fraction")?);
    let report = continuity_verdict(&series, &bounds, rule)?;
    ctx.emit(command, &report.to_csv())?;
    let summary = format!(
        "{command} equation={} p={p} lags={} replicas={replicas} norm={norm} domination={} trend={} verdict={}",
        scenario.equation().name(),
        series.len(),
        report.domination,
        report.trend,
        report.verdict()
    );
    Ok((summary, report.pass()))
}

pub fn increments(ctx: &Context) -> Result<String, CliError> {
    Ok(continuity(ctx, "increments", false)?.0)
}

pub fn verify(ctx: &Context) -> Result<String, CliError> {
    let (summary, pass) = continuity(ctx, "verify", true)?;
    if pass {
        Ok(summary)
    } else {
        Err(CliError::Verdict(summary))
    }
}

pub fn holder(ctx: &Context) -> Result<String, CliError> {
    let c = &ctx.config;
    let scenario = c.scenario()?;
    let p = c.moment_order()?;
    let series = increment_series(&scenario, &request(c, p)?, c.replicas()?, ctx.seed()?)?;
    let fit = holder_exponent(&series, p)?;
    let mut csv = String::from("lag,estimate,stderr,fitted\n");
    for i in 0..series.len() {
        let fitted = (fit.intercept + fit.slope * series.lags[i].ln()).exp();
        push_row(&mut csv, &[series.lags[i], series.estimates[i], series.stderrs[i], fitted]);
    }
    ctx.emit("holder", &csv)?;
    Ok(format!(
        "holder p={p} slope={} band={} points={} weighted={} conclusion={}",
        fit.slope,
        fit.band,
        fit.points,
        fit.weighted,
        fit.conclusion()
    ))
}

pub fn bounds(ctx: &Context) -> Result<String, CliError> {
    let c = &ctx.config;
    let scenario: Scenario = c.scenario()?;
    let p = bound_order(scenario.equation());
    let norm = match c.auto_f64("bounds.norm")? {
        Some(n) => n,
        None => mc_norm(&scenario, p, c.replicas()?, ctx.seed()?)?.value,
    };
    let b = analytic_bound(&scenario, c.f64("mc.t1")?, c.f64("mc.t2")?, norm, c.auto_f64("bounds.c_envelope")?)?;
    ctx.emit("bounds", &b.to_csv())?;
    let parts: Vec<String> = b.parts.iter().map(|(n, v)| format!("{n}={v}")).collect();
    Ok(format!("bounds equation={} {} total={}", scenario.equation().name(), parts.join(" "), b.total))
}
