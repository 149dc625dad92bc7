//! Analytic time-increment bounds, the contraction constant `C_{d,α,β}` and
//! the existence condition.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::csv::fmt_f64;
use crate::kernel::LevySymbol;
use crate::quad::{self, QuadError, Tolerance};
use crate::solver::InitialCondition;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("bound quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
}

/// Named nonnegative parts of an increment bound with the inputs that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundBreakdown {
    pub parts: Vec<(&'static str, f64)>,
    pub total: f64,
    pub inputs: Vec<(&'static str, f64)>,
}

impl BoundBreakdown {
    fn new(parts: Vec<(&'static str, f64)>, inputs: Vec<(&'static str, f64)>) -> Self {
        let total = parts.iter().map(|(_, v)| v).sum();
        Self { parts, total, inputs }
    }

    pub fn part(&self, name: &str) -> Option<f64> {
        self.parts.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    /// `part,value` rows, a `total` row, then an `input,value` block.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("part,value\n");
        for (name, v) in &self.parts {
            out.push_str(&format!("{name},{}\n", fmt_f64(*v)));
        }
        out.push_str(&format!("total,{}\n\ninput,value\n", fmt_f64(self.total)));
        for (name, v) in &self.inputs {
            out.push_str(&format!("{name},{}\n", fmt_f64(*v)));
        }
        out
    }
}

fn tolerance() -> Tolerance {
    Tolerance::new(1e-300, 1e-11)
}

fn gamma_exponent(d: usize, alpha: f64) -> Result<f64, BoundsError> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(BoundsError::Domain(format!("alpha must lie in (0, 2], got {alpha}")));
    }
    let df = d as f64;
    if d == 0 || !(df < 1.0 + alpha) {
        return Err(BoundsError::Domain(format!(
            "γ = (1 - d)/α = {} must exceed -1, i.e. d < 1 + alpha (d = {d}, alpha = {alpha})",
            (1.0 - df) / alpha
        )));
    }
    Ok((1.0 - df) / alpha)
}

/// `C_{d,α,β} = 2C(d,α) (d+α)/(d+α-1) Γ(γ+1) / β^{γ+1}` with `γ = (1-d)/α`.
pub fn c_dab(d: usize, alpha: f64, beta: f64, c_envelope: f64) -> Result<f64, BoundsError> {
    let g = gamma_exponent(d, alpha)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(BoundsError::Domain(format!("beta must be positive, got {beta}")));
    }
    if !(c_envelope > 0.0 && c_envelope.is_finite()) {
        return Err(BoundsError::Domain(format!("envelope constant must be positive, got {c_envelope}")));
    }
    let s = d as f64 + alpha;
    Ok(2.0 * c_envelope * s / (s - 1.0) * gamma(g + 1.0) / beta.powf(g + 1.0))
}

/// `C_{d,α,β} λ K Lip_σ < 1`.
pub fn existence_condition(lambda: f64, k: f64, lip: f64, c_dab_value: f64) -> bool {
    c_dab_value * lambda * k * lip < 1.0
}

/// `∫ |u0|² dy`, rejecting data that are not square integrable.
pub fn square_mass(u0: &InitialCondition, d: usize) -> Result<f64, BoundsError> {
    u0.l2_norm_sq(d)
        .ok_or_else(|| BoundsError::Domain("the mean-square bound needs a square-integrable u0; a nonzero constant is not".into()))
}

/// Inputs of [`increment_bound_ms`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSquareInputs {
    pub c0: f64,
    pub lambda: f64,
    pub k: f64,
    pub lip: f64,
    /// `‖u‖²_{2,β}`.
    pub norm_sq: f64,
    pub beta: f64,
    pub t1: f64,
    pub t2: f64,
}

/// Bound on `E|u(t2,x) - u(t1,x)|²` for the compensated equation, `d = 1`:
///
/// ```text
/// D0 = (c0/2π) ∫ e^{-2 t1 Ψ} (1 - e^{-rΨ})² dξ
/// D1 = (λ²K Lip²/2π) ‖u‖² e^{β t1} ∫ (1 - e^{-rΨ})² / (β + 2Ψ) dξ
/// D2 = (λ²K Lip²/2π) ‖u‖² e^{β t2} ∫ (1 - e^{-r(β + 2Ψ)}) / (β + 2Ψ) dξ
/// ```
///
/// with `r = t2 - t1` and `Ψ(ξ) = |ξ|^α`.
pub fn increment_bound_ms(symbol: &LevySymbol, inp: &MeanSquareInputs) -> Result<BoundBreakdown, BoundsError> {
    let alpha = symbol.alpha();
    if symbol.dim() != 1 {
        return Err(BoundsError::Domain(format!("the mean-square bound needs d = 1, got {}", symbol.dim())));
    }
    if !(alpha > 1.0) {
        return Err(BoundsError::Domain(format!("the ξ-integrals diverge for alpha <= 1 (alpha = {alpha})")));
    }
    let MeanSquareInputs {
        c0,
        lambda,
        k,
        lip,
        norm_sq,
        beta,
        t1,
        t2,
    } = *inp;
    check_times(t1, t2)?;
    if !(beta > 0.0) {
        return Err(BoundsError::Domain(format!("beta must be positive, got {beta}")));
    }
    for (name, v) in [("c0", c0), ("lambda", lambda), ("K", k), ("Lip", lip), ("norm", norm_sq)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(BoundsError::Domain(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let r = t2 - t1;
    let inputs = vec![
        ("t1", t1),
        ("t2", t2),
        ("beta", beta),
        ("lambda", lambda),
        ("K", k),
        ("Lip", lip),
        ("norm2beta_sq", norm_sq),
        ("c0", c0),
        ("alpha", alpha),
    ];
    if r == 0.0 {
        return Ok(BoundBreakdown::new(vec![("D0", 0.0), ("D1", 0.0), ("D2", 0.0)], inputs));
    }
    let psi = |xi: f64| xi.powf(alpha);
    let one_minus = |x: f64| -(-x).exp_m1();
    let scales = [(2.0 * t1).powf(-1.0 / alpha), r.powf(-1.0 / alpha), (0.5 * beta).powf(1.0 / alpha)];
    let i0 = line_integral(|xi| (-2.0 * t1 * psi(xi)).exp() * one_minus(r * psi(xi)).powi(2), &scales, alpha)?;
    let i1 = line_integral(|xi| one_minus(r * psi(xi)).powi(2) / (beta + 2.0 * psi(xi)), &scales, alpha)?;
    let i2 = line_integral(
        |xi| {
            let q = beta + 2.0 * psi(xi);
            one_minus(r * q) / q
        },
        &scales,
        alpha,
    )?;
    let pre = lambda * lambda * k * lip * lip / (2.0 * PI) * norm_sq;
    let d0 = c0 / (2.0 * PI) * i0;
    let d1 = pre * (beta * t1).exp() * i1;
    let d2 = pre * (beta * t2).exp() * i2;
    Ok(BoundBreakdown::new(vec![("D0", d0), ("D1", d1), ("D2", d2)], inputs))
}

/// `∫_R f(|ξ|) dξ = 2 ∫_0^∞ f`, for `f` decaying at least like `ξ^{-α}`.
/// Finite pieces end at the largest scale; the tail uses `ξ = a w^{-q}`,
/// `q = 1/(α - 1)`, which makes a `ξ^{-α}` tail bounded on `(0, 1]`.
fn line_integral<F: Fn(f64) -> f64>(f: F, scales: &[f64], alpha: f64) -> Result<f64, BoundsError> {
    let mut cuts: Vec<f64> = scales.iter().copied().filter(|s| s.is_finite() && *s > 0.0).collect();
    cuts.sort_by(f64::total_cmp);
    let a = *cuts.last().unwrap_or(&1.0);
    let mut pieces = Vec::new();
    let mut lo = 0.0;
    for &c in &cuts {
        if c > lo {
            pieces.push((lo, c));
            lo = c;
        }
    }
    let mut g = |x: f64| f(x);
    let head = quad::integrate_pieces(&mut g, &pieces, tolerance())?.value;
    let q = 1.0 / (alpha - 1.0);
    let tail = quad::integrate(
        |w: f64| {
            let xi = a * w.powf(-q);
            if !xi.is_finite() {
                return 0.0;
            }
            let v = f(xi);
            if v == 0.0 {
                0.0
            } else {
                v * a * q * w.powf(-q - 1.0)
            }
        },
        0.0,
        1.0,
        tolerance(),
    )?
    .value;
    Ok(2.0 * (head + tail))
}

fn check_times(t1: f64, t2: f64) -> Result<(), BoundsError> {
    if !(t1 > 0.0 && t1.is_finite() && t2 >= t1 && t2.is_finite()) {
        return Err(BoundsError::Domain(format!("need 0 < t1 <= t2, got t1 = {t1}, t2 = {t2}")));
    }
    Ok(())
}

/// Inputs of [`increment_bound_mean`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanInputs {
    pub d: usize,
    pub alpha: f64,
    pub c_envelope: f64,
    /// `sup |u0|`.
    pub c0_sup: f64,
    pub lambda: f64,
    pub k: f64,
    pub lip: f64,
    /// `‖u‖_{1,β}`.
    pub norm: f64,
    pub beta: f64,
    pub t1: f64,
    pub t2: f64,
}

/// Bound on `E|u(t2,x) - u(t1,x)|` for the non-compensated equation, with
/// `γ = (1-d)/α` and `F = (d+α)/(d+α-1)`:
///
/// ```text
/// D3 = 2 c0 C F |t2^γ - t1^γ|
/// D4 = 2 λK Lip C ‖u‖ F ∫_0^{t1} e^{βs} |(t2-s)^γ - (t1-s)^γ| ds
/// D5 = 2 λK Lip C ‖u‖ e^{β t2} F ∫_0^{t2-t1} z^γ e^{-βz} dz
/// ```
pub fn increment_bound_mean(inp: &MeanInputs) -> Result<BoundBreakdown, BoundsError> {
    let MeanInputs {
        d,
        alpha,
        c_envelope,
        c0_sup,
        lambda,
        k,
        lip,
        norm,
        beta,
        t1,
        t2,
    } = *inp;
    let g = gamma_exponent(d, alpha)?;
    let s = d as f64 + alpha;
    if !(s > 1.0) {
        return Err(BoundsError::Domain(format!("need d + alpha > 1, got {s}")));
    }
    check_times(t1, t2)?;
    if !(beta > 0.0) {
        return Err(BoundsError::Domain(format!("beta must be positive, got {beta}")));
    }
    for (name, v) in [("C", c_envelope), ("c0", c0_sup), ("lambda", lambda), ("K", k), ("Lip", lip), ("norm", norm)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(BoundsError::Domain(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let f = s / (s - 1.0);
    let r = t2 - t1;
    let inputs = vec![
        ("t1", t1),
        ("t2", t2),
        ("beta", beta),
        ("lambda", lambda),
        ("K", k),
        ("Lip", lip),
        ("norm1beta", norm),
        ("c0_sup", c0_sup),
        ("C_envelope", c_envelope),
        ("d", d as f64),
        ("alpha", alpha),
    ];
    let noise = 2.0 * lambda * k * lip * c_envelope * norm * f;
    let d3 = 2.0 * c0_sup * c_envelope * f * (t2.powf(g) - t1.powf(g)).abs();
    let d4 = if g == 0.0 || r == 0.0 { 0.0 } else { noise * d4_integral(g, beta, t1, r)? };
    let d5 = if r == 0.0 { 0.0 } else { noise * (beta * t2).exp() * d5_integral(g, beta, r)? };
    Ok(BoundBreakdown::new(vec![("D3", d3), ("D4", d4), ("D5", d5)], inputs))
}

/// `∫_0^r z^γ e^{-βz} dz`, with `z = v^{1/(γ+1)}` removing the singularity.
fn d5_integral(g: f64, beta: f64, r: f64) -> Result<f64, BoundsError> {
    let e = 1.0 / (g + 1.0);
    Ok(quad::integrate(|v: f64| (-beta * v.powf(e)).exp() * e, 0.0, r.powf(g + 1.0), tolerance())?.value)
}

/// `∫_0^{t1} e^{βs} |(t2-s)^γ - (t1-s)^γ| ds` for `-1 < γ < 0`, as
/// `∫ e^{β(t1-u)} u^γ du - ∫ e^{β(t1-u)} (r+u)^γ du` over `u ∈ [0, t1]`.
fn d4_integral(g: f64, beta: f64, t1: f64, r: f64) -> Result<f64, BoundsError> {
    let e = 1.0 / (g + 1.0);
    let singular = quad::integrate(|v: f64| (beta * (t1 - v.powf(e))).exp() * e, 0.0, t1.powf(g + 1.0), tolerance())?.value;
    let smooth = quad::integrate(|u: f64| (beta * (t1 - u)).exp() * (r + u).powf(g), 0.0, t1, tolerance())?.value;
    Ok((singular - smooth).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::gamma::gamma_lr;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn c_dab_examples() {
        assert!((c_dab(1, 1.0, 2.0, 1.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((c_dab(1, 2.0, 1.0, 1.0).unwrap() - 3.0).abs() < 1e-14);
        for (d, alpha) in [(1, 1.5), (2, 1.5), (2, 2.0)] {
            let g = (1.0 - d as f64) / alpha;
            let ratio = c_dab(d, alpha, 1.3, 0.7).unwrap() / c_dab(d, alpha, 2.6, 0.7).unwrap();
            assert!(rel(ratio, 2f64.powf(g + 1.0)) < 1e-13);
        }
        let err = c_dab(3, 1.5, 1.0, 1.0).unwrap_err();
        assert!(err.to_string().contains("γ"));
    }

    #[test]
    fn existence_examples() {
        assert!(existence_condition(0.1, 1.0, 1.0, 2.0));
        assert!(!existence_condition(1.0, 1.0, 1.0, 1.0));
        assert!(existence_condition(1e-300, 1e10, 1e10, 1e10));
    }

    fn ms_inputs(t1: f64, t2: f64) -> MeanSquareInputs {
        MeanSquareInputs {
            c0: 1.0,
            lambda: 0.1,
            k: 1.0,
            lip: 1.0,
            norm_sq: 1.0,
            beta: 2.0,
            t1,
            t2,
        }
    }

    #[test]
    fn ms_zero_lag_and_domain() {
        let s2 = LevySymbol::new(2.0, 1).unwrap();
        let b = increment_bound_ms(&s2, &ms_inputs(1.0, 1.0)).unwrap();
        assert!(b.parts.iter().all(|(_, v)| *v == 0.0));
        assert!(increment_bound_ms(&LevySymbol::new(1.0, 1).unwrap(), &ms_inputs(1.0, 1.5)).is_err());
        assert!(increment_bound_ms(&s2, &ms_inputs(1.0, 0.5)).is_err());
        assert!(square_mass(&InitialCondition::Constant(1.0), 1).is_err());
    }

    #[test]
    fn ms_dual_quadrature() {
        let s2 = LevySymbol::new(2.0, 1).unwrap();
        let inp = ms_inputs(1.0, 1.25);
        let b = increment_bound_ms(&s2, &inp).unwrap();
        // Fixed-grid Simpson on [0, 1] plus the tail under ξ = 1/w, with the
        // integrands written so they stay finite at w = 0.
        let r = 0.25;
        let n = 200_000;
        let simpson_two = |head: &dyn Fn(f64) -> f64, tail: &dyn Fn(f64) -> f64| {
            2.0 * (quad::simpson(head, 0.0, 1.0, n) + quad::simpson(tail, 0.0, 1.0, n))
        };
        let i0 = simpson_two(&|x: f64| (-2.0 * x * x).exp() * (1.0 - (-r * x * x).exp()).powi(2), &|w: f64| {
            if w == 0.0 {
                0.0
            } else {
                (-2.0 / (w * w)).exp() * (1.0 - (-r / (w * w)).exp()).powi(2) / (w * w)
            }
        });
        let i1 = simpson_two(&|x: f64| (1.0 - (-r * x * x).exp()).powi(2) / (2.0 + 2.0 * x * x), &|w: f64| {
            (1.0 - (-r / (w * w)).exp()).powi(2) / (2.0 * w * w + 2.0)
        });
        let i2 = simpson_two(&|x: f64| (1.0 - (-r * (2.0 + 2.0 * x * x)).exp()) / (2.0 + 2.0 * x * x), &|w: f64| {
            (1.0 - (-r * (2.0 + 2.0 / (w * w))).exp()) / (2.0 * w * w + 2.0)
        });
        let pre = 0.01 / (2.0 * PI);
        let oracle = i0 / (2.0 * PI) + pre * 2f64.exp() * i1 + pre * 2.5f64.exp() * i2;
        assert!(rel(b.total, oracle) < 1e-6, "{} vs {oracle}", b.total);
        // D2 ≤ 2πΥ(β) (λ²K Lip²/π) ‖u‖² e^{β t2}, Υ(2) = 1/4 for alpha = 2.
        let env = 2.0 * PI * 0.25 * (0.01 / PI) * 2.5f64.exp();
        assert!(b.part("D2").unwrap() <= env);
    }

    #[test]
    fn ms_fractional_dual_quadrature() {
        let s = LevySymbol::new(1.5, 1).unwrap();
        let inp = ms_inputs(0.5, 0.75);
        let b = increment_bound_ms(&s, &inp).unwrap();
        // Simpson on [0, 1] and on the tail under ξ = w^{-2}.
        let r = 0.25;
        let head = quad::simpson(
            |x: f64| {
                let p = x.powf(1.5);
                (1.0 - (-r * p).exp()).powi(2) / (2.0 + 2.0 * p)
            },
            0.0,
            1.0,
            200_000,
        );
        let tail = quad::simpson(|w: f64| 2.0 * (1.0 - (-r / w.powi(3)).exp()).powi(2) / (2.0 * w.powi(3) + 2.0), 0.0, 1.0, 200_000);
        let i1 = 2.0 * (head + tail);
        let pre = 0.01 / (2.0 * PI);
        let oracle = pre * 1f64.exp() * i1;
        assert!(rel(b.part("D1").unwrap(), oracle) < 1e-6, "{} vs {oracle}", b.part("D1").unwrap());
    }

    #[test]
    fn ms_decreases_to_zero() {
        let s = LevySymbol::new(1.5, 1).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..=20 {
            let b = increment_bound_ms(&s, &ms_inputs(0.5, 0.5 + 2f64.powi(-k))).unwrap();
            assert!(b.parts.iter().all(|(_, v)| *v >= 0.0));
            assert!(b.total < prev, "k = {k}");
            prev = b.total;
        }
        assert!(prev < 1e-3);
    }

    fn mean_inputs(d: usize, alpha: f64, t1: f64, t2: f64) -> MeanInputs {
        MeanInputs {
            d,
            alpha,
            c_envelope: 1.3,
            c0_sup: 0.4,
            lambda: 0.2,
            k: 1.0,
            lip: 1.0,
            norm: 0.5,
            beta: 1.5,
            t1,
            t2,
        }
    }

    #[test]
    fn mean_bound_one_dimension() {
        let inp = mean_inputs(1, 1.5, 0.5, 0.8);
        let b = increment_bound_mean(&inp).unwrap();
        assert_eq!(b.part("D3"), Some(0.0));
        assert_eq!(b.part("D4"), Some(0.0));
        // Closed form of the z^0 integral.
        let c = 2.0 * 0.2 * 1.3 * 0.5 * (1.5 * 0.8f64).exp() * (2.5 / 1.5) * (1.0 - (-1.5 * 0.3f64).exp()) / 1.5;
        assert!(rel(b.part("D5").unwrap(), c) < 1e-12);
    }

    #[test]
    fn mean_bound_two_dimensions() {
        let inp = mean_inputs(2, 1.5, 0.5, 0.8);
        let b = increment_bound_mean(&inp).unwrap();
        let g = -1.0 / 1.5;
        let f = 3.5 / 2.5;
        let d3 = 2.0 * 0.4 * 1.3 * f * (0.8f64.powf(g) - 0.5f64.powf(g)).abs();
        assert!(rel(b.part("D3").unwrap(), d3) < 1e-14);
        // D5 via the regularised lower incomplete gamma function.
        let inc = gamma(g + 1.0) * gamma_lr(g + 1.0, 1.5 * 0.3) / 1.5f64.powf(g + 1.0);
        let noise = 2.0 * 0.2 * 1.3 * 0.5 * f;
        assert!(rel(b.part("D5").unwrap(), noise * (1.5 * 0.8f64).exp() * inc) < 1e-9);
        // D4 by Simpson after u = t1 - s = v³, which cancels the u^{-2/3} singularity.
        let top = 0.5f64.cbrt();
        let s4 = quad::simpson(|v: f64| (1.5 * (0.5 - v.powi(3))).exp() * (3.0 - 3.0 * v * v * (0.3 + v.powi(3)).powf(g)), 0.0, top, 200_000);
        assert!(rel(b.part("D4").unwrap(), noise * s4) < 1e-8, "{} vs {}", b.part("D4").unwrap() / noise, s4);
    }

    #[test]
    fn mean_bound_decreases_to_zero() {
        for d in [1, 2] {
            let mut prev = f64::INFINITY;
            for k in 1..=20 {
                let b = increment_bound_mean(&mean_inputs(d, 1.5, 0.5, 0.5 + 2f64.powi(-k))).unwrap();
                assert!(b.parts.iter().all(|(_, v)| *v >= 0.0));
                assert!(b.total < prev, "d = {d}, k = {k}");
                prev = b.total;
            }
            let zero = increment_bound_mean(&mean_inputs(d, 1.5, 0.5, 0.5)).unwrap();
            assert_eq!(zero.total, 0.0);
        }
        assert!(increment_bound_mean(&mean_inputs(3, 1.5, 0.5, 0.6)).is_err());
    }

    #[test]
    fn breakdown_csv() {
        let b = increment_bound_mean(&mean_inputs(1, 1.5, 0.5, 0.8)).unwrap();
        let text = b.to_csv();
        assert!(text.starts_with("part,value\nD3,"));
        assert!(text.contains("\ntotal,"));
        assert!(text.contains("\n\ninput,value\nt1,5.0000000000000000e-1\n"));
    }
}
