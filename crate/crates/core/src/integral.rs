//! Non-compensated and compensated Poisson integrals of explicit integrands.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::measure::{LevyMeasure, MeasureError, PointCloud, Window};
use crate::quad::{self, QuadError, Tolerance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegralError {
    #[error("integrand is not finite at event {index} (s = {s}): {value}")]
    NonFinite { index: usize, s: f64, value: f64 },
    #[error("integrand fails its integrability class {class:?}: {reason}")]
    Class { class: IntegrabilityClass, reason: String },
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// `H1`: `∫E|f| < ∞`; `H2`: `∫E|f|² < ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrabilityClass {
    H1,
    H2,
}

pub type IntegrandFn = Arc<dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync>;

/// An integrand `f(s, y, h)` with its declared integrability class.
#[derive(Clone)]
pub struct IntegrandSpec {
    pub label: String,
    pub class: IntegrabilityClass,
    f: IntegrandFn,
}

impl fmt::Debug for IntegrandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntegrandSpec").field("label", &self.label).field("class", &self.class).finish()
    }
}

impl IntegrandSpec {
    pub fn new<F>(label: impl Into<String>, class: IntegrabilityClass, f: F) -> Self
    where
        F: Fn(f64, &[f64], f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            class,
            f: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("const({c})"), IntegrabilityClass::H2, move |_, _, _| c)
    }

    #[inline]
    pub fn eval(&self, s: f64, y: &[f64], h: f64) -> f64 {
        (self.f)(s, y, h)
    }

    /// `a·f + b·g`, declared in the weaker of the two classes.
    pub fn linear_combination(a: f64, f: &IntegrandSpec, b: f64, g: &IntegrandSpec) -> Self {
        let (ff, gf) = (f.f.clone(), g.f.clone());
        let class = if f.class == IntegrabilityClass::H2 && g.class == IntegrabilityClass::H2 {
            IntegrabilityClass::H2
        } else {
            IntegrabilityClass::H1
        };
        Self {
            label: format!("{a}*{}+{b}*{}", f.label, g.label),
            class,
            f: Arc::new(move |s, y, h| a * ff(s, y, h) + b * gf(s, y, h)),
        }
    }

    /// Checks the class by evaluating `∫|f|` or `∫|f|²` over the window.
    pub fn check_class(&self, window: &Window, measure: &LevyMeasure, tol: Tolerance) -> Result<f64, IntegralError> {
        let pw = match self.class {
            IntegrabilityClass::H1 => 1,
            IntegrabilityClass::H2 => 2,
        };
        let g = |s: f64, y: &[f64], h: f64| self.eval(s, y, h).abs().powi(pw);
        let v = space_time_mark_integral(&g, window, measure, window.horizon, tol).map_err(|e| IntegralError::Class {
            class: self.class,
            reason: e.to_string(),
        })?;
        if !v.is_finite() {
            return Err(IntegralError::Class {
                class: self.class,
                reason: format!("integral is {v}"),
            });
        }
        Ok(v)
    }
}

/// Default tolerance of the compensator triple integral.
pub fn default_tolerance() -> Tolerance {
    Tolerance::new(1e-12, 1e-8)
}

/// `Σ_{s_i ≤ t} f(s_i, y_i, h_i)`.
pub fn integrate_noncompensated(f: &IntegrandSpec, cloud: &PointCloud, t: f64) -> Result<f64, IntegralError> {
    let mut sum = 0.0;
    for (index, e) in cloud.events().iter().enumerate() {
        if e.s > t {
            break;
        }
        let v = f.eval(e.s, &e.y, e.h);
        if !v.is_finite() {
            return Err(IntegralError::NonFinite { index, s: e.s, value: v });
        }
        sum += v;
    }
    Ok(sum)
}

/// `∫_0^t ∫_{[-L,L]^d} ∫ f(s, y, h) ν(dh) dy ds`, the compensator of `f`.
pub fn compensator_integral(f: &IntegrandSpec, window: &Window, measure: &LevyMeasure, t: f64, tol: Tolerance) -> Result<f64, IntegralError> {
    space_time_mark_integral(&|s, y: &[f64], h| f.eval(s, y, h), window, measure, t, tol)
}

/// The event sum minus the compensator.
pub fn integrate_compensated(f: &IntegrandSpec, cloud: &PointCloud, measure: &LevyMeasure, t: f64, tol: Tolerance) -> Result<f64, IntegralError> {
    let sum = integrate_noncompensated(f, cloud, t)?;
    Ok(sum - compensator_integral(f, cloud.window(), measure, t, tol)?)
}

/// `∫_0^t ∫∫ |f|² ds dy ν(dh)`, the second moment of the compensated integral
/// of a deterministic `f`.
pub fn isometry_rhs(f: &IntegrandSpec, window: &Window, measure: &LevyMeasure, t: f64, tol: Tolerance) -> Result<f64, IntegralError> {
    space_time_mark_integral(
        &|s, y: &[f64], h| {
            let v = f.eval(s, y, h);
            v * v
        },
        window,
        measure,
        t,
        tol,
    )
}

fn space_time_mark_integral(
    f: &dyn Fn(f64, &[f64], f64) -> f64,
    window: &Window,
    measure: &LevyMeasure,
    t: f64,
    tol: Tolerance,
) -> Result<f64, IntegralError> {
    let t = t.min(window.horizon);
    if t <= 0.0 {
        return Ok(0.0);
    }
    let l = window.half_width;
    let mut bounds = vec![(0.0, t)];
    bounds.extend(std::iter::repeat((-l, l)).take(window.dim));
    let leaf = |coords: &[f64]| -> Result<f64, IntegralError> { Ok(measure.integrate(|h| f(coords[0], &coords[1..], h))?) };
    let mut prefix = Vec::with_capacity(bounds.len());
    nested(&bounds, &mut prefix, &leaf, tol)
}

fn nested(
    bounds: &[(f64, f64)],
    prefix: &mut Vec<f64>,
    leaf: &dyn Fn(&[f64]) -> Result<f64, IntegralError>,
    tol: Tolerance,
) -> Result<f64, IntegralError> {
    let depth = prefix.len();
    if depth == bounds.len() {
        return leaf(prefix);
    }
    let (a, b) = bounds[depth];
    let mut failure = None;
    let est = quad::integrate(
        |x| {
            if failure.is_some() {
                return 0.0;
            }
            prefix.push(x);
            let r = nested(bounds, prefix, leaf, tol);
            prefix.pop();
            r.unwrap_or_else(|e| {
                failure = Some(e);
                0.0
            })
        },
        a,
        b,
        tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(est?.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{sample_prm, Event};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit() -> Window {
        Window::new(1.0, 0.5, 1).unwrap()
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn noncompensated_examples() {
        let w = unit();
        let cloud = PointCloud::from_events(
            w,
            vec![
                Event { s: 0.3, y: vec![0.0], h: 2.0 },
                Event { s: 0.7, y: vec![0.0], h: -1.0 },
            ],
        )
        .unwrap();
        let one = IntegrandSpec::constant(1.0);
        assert_eq!(integrate_noncompensated(&one, &cloud, 0.5).unwrap(), 1.0);
        assert_eq!(integrate_noncompensated(&one, &cloud, 1.0).unwrap(), 2.0);
        let mark = IntegrandSpec::new("h", IntegrabilityClass::H2, |_, _, h| h);
        assert_eq!(integrate_noncompensated(&mark, &cloud, 1.0).unwrap(), 1.0);
        let bad = IntegrandSpec::new("1/(h+1)", IntegrabilityClass::H1, |_, _, h| 1.0 / (h + 1.0));
        assert!(matches!(
            integrate_noncompensated(&bad, &cloud, 1.0),
            Err(IntegralError::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn compensated_zero_integrand() {
        let m = LevyMeasure::atomic(&[(1.0, 2.5)]).unwrap();
        let cloud = sample_prm(&unit(), &m, &mut ChaCha8Rng::seed_from_u64(1));
        let zero = IntegrandSpec::constant(0.0);
        assert_eq!(integrate_compensated(&zero, &cloud, &m, 1.0, default_tolerance()).unwrap(), 0.0);
    }

    #[test]
    fn isometry_examples() {
        let tol = default_tolerance();
        let m = LevyMeasure::atomic(&[(1.0, 2.5)]).unwrap();
        let v = isometry_rhs(&IntegrandSpec::constant(1.0), &unit(), &m, 1.0, tol).unwrap();
        assert!((v - 2.5).abs() < 1e-12);
        let m2 = LevyMeasure::atomic(&[(2.0, 1.0)]).unwrap();
        let mark = IntegrandSpec::new("h", IntegrabilityClass::H2, |_, _, h| h);
        assert!((isometry_rhs(&mark, &unit(), &m2, 1.0, tol).unwrap() - 4.0).abs() < 1e-12);
        let m1 = LevyMeasure::uniform(0.0, 1.0, 1.0).unwrap();
        let time = IntegrandSpec::new("s", IntegrabilityClass::H2, |s, _, _| s);
        assert!((isometry_rhs(&time, &unit(), &m1, 1.0, tol).unwrap() - 1.0 / 3.0).abs() < 1e-10);
        // Oracle: ∫_0^1∫_{-1}^{1}∫_{-1}^{1} (s y h)^2 = (1/3)(2/3)(2/3)
        let w2 = Window::new(1.0, 1.0, 1).unwrap();
        let prod = IntegrandSpec::new("syh", IntegrabilityClass::H2, |s, y, h| s * y[0] * h);
        let u = LevyMeasure::uniform(-1.0, 1.0, 1.0).unwrap();
        assert!((isometry_rhs(&prod, &w2, &u, 1.0, tol).unwrap() - 4.0 / 27.0).abs() < 1e-9);
    }

    #[test]
    fn two_dimensional_compensator() {
        // Oracle: ∫_0^2 ∫_{[-1,1]^2} (1 + y1²) ds dy · 3 = 2 · (4 + 4/3) · 3
        let w = Window::new(2.0, 1.0, 2).unwrap();
        let m = LevyMeasure::atomic(&[(1.0, 3.0)]).unwrap();
        let f = IntegrandSpec::new("1+y1^2", IntegrabilityClass::H2, |_, y, _| 1.0 + y[0] * y[0]);
        let v = compensator_integral(&f, &w, &m, 2.0, default_tolerance()).unwrap();
        assert!((v - 2.0 * (4.0 + 4.0 / 3.0) * 3.0).abs() < 1e-9);
    }

    #[test]
    fn class_check_rejects_divergent_integrand() {
        let w = unit();
        let m = LevyMeasure::uniform(-1.0, 1.0, 1.0).unwrap();
        let f = IntegrandSpec::new("1/h", IntegrabilityClass::H2, |_, _, h: f64| 1.0 / h.abs().sqrt());
        assert!(f.check_class(&w, &m, default_tolerance()).is_err());
        let g = IntegrandSpec::new("h", IntegrabilityClass::H2, |_, _, h| h);
        assert!((g.check_class(&w, &m, default_tolerance()).unwrap() - 2.0 / 3.0).abs() < 1e-10);
    }

    /// Monte Carlo mean, zero-mean and isometry checks for three integrands.
    #[test]
    fn monte_carlo_laws() {
        let w = unit();
        let tol = default_tolerance();
        let cases: Vec<(IntegrandSpec, LevyMeasure)> = vec![
            (IntegrandSpec::constant(1.0), LevyMeasure::atomic(&[(1.0, 2.5)]).unwrap()),
            (
                IntegrandSpec::new("h", IntegrabilityClass::H2, |_, _, h| h),
                LevyMeasure::uniform(0.0, 2.0, 1.0).unwrap(),
            ),
            (
                IntegrandSpec::new("s+y", IntegrabilityClass::H2, |s, y, _| s + y[0]),
                LevyMeasure::atomic(&[(1.0, 1.0), (-1.0, 2.0)]).unwrap(),
            ),
        ];
        let n = 100_000;
        for (k, (f, m)) in cases.iter().enumerate() {
            let comp = compensator_integral(f, &w, m, 1.0, tol).unwrap();
            let iso = isometry_rhs(f, &w, m, 1.0, tol).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7 + k as u64);
            let mut raw = Vec::with_capacity(n);
            let mut centred = Vec::with_capacity(n);
            for _ in 0..n {
                let cloud = sample_prm(&w, m, &mut rng);
                let s = integrate_noncompensated(f, &cloud, 1.0).unwrap();
                raw.push(s);
                centred.push(s - comp);
            }
            let (mr, vr) = mean_var(&raw);
            assert!((mr - comp).abs() <= 3.0 * (vr / n as f64).sqrt(), "{}: mean {mr} vs {comp}", f.label);
            let (mc, vc) = mean_var(&centred);
            assert!(mc.abs() <= 3.0 * (vc / n as f64).sqrt(), "{}: centred mean {mc}", f.label);
            assert!((vc - iso).abs() <= 0.05 * iso, "{}: variance {vc} vs {iso}", f.label);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn linearity(a in -5.0f64..5.0, b in -5.0f64..5.0, seed in 0u64..1000) {
            let w = Window::new(2.0, 1.0, 1).unwrap();
            let m = LevyMeasure::uniform(-1.0, 2.0, 1.5).unwrap();
            let cloud = sample_prm(&w, &m, &mut ChaCha8Rng::seed_from_u64(seed));
            let f = IntegrandSpec::new("s*h", IntegrabilityClass::H2, |s, _, h| s * h);
            let g = IntegrandSpec::new("cos y", IntegrabilityClass::H2, |_, y, _| y[0].cos());
            let fg = IntegrandSpec::linear_combination(a, &f, b, &g);
            let lhs = integrate_noncompensated(&fg, &cloud, 1.5).unwrap();
            let rhs = a * integrate_noncompensated(&f, &cloud, 1.5).unwrap() + b * integrate_noncompensated(&g, &cloud, 1.5).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            let tol = default_tolerance();
            let lc = integrate_compensated(&fg, &cloud, &m, 1.5, tol).unwrap();
            let rc = a * integrate_compensated(&f, &cloud, &m, 1.5, tol).unwrap() + b * integrate_compensated(&g, &cloud, &m, 1.5, tol).unwrap();
            prop_assert!((lc - rc).abs() <= 1e-8 * (1.0 + lc.abs()));
        }
    }
}
