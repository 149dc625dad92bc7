//! Adaptive Gauss–Kronrod quadrature.
//!
//! Global adaptive bisection with the 7/15-point Gauss–Kronrod pair and the
//! QUADPACK error heuristic. Infinite ranges are mapped onto `[0, 1)` with
//! `x = a + u / (1 - u)`; the 15-point rule never evaluates the endpoint.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("quadrature did not converge: estimate {value:e}, error {error:e} after {intervals} intervals")]
    NotConverged {
        value: f64,
        error: f64,
        intervals: usize,
    },
    #[error("integrand returned a non-finite value at x = {x}")]
    NonFinite { x: f64 },
}

/// Tolerances for [`integrate`] and friends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 4000,
        }
    }

    pub fn with_max_intervals(mut self, n: usize) -> Self {
        self.max_intervals = n;
        self
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-12, 1e-10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    floor: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// One 15-point Kronrod panel. Returns (kronrod value, error estimate).
pub fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), QuadError> {
    kronrod15_floor(f, a, b).map(|(v, e, _)| (v, e))
}

/// As [`kronrod15`], also returning the roundoff floor `50 ε ∫|f|`.
fn kronrod15_floor<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64, f64), QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = checked(f, center)?;
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = checked(f, center - dx)?;
        let f2 = checked(f, center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * res_abs;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(floor);
    }
    Ok((value, err, floor))
}

fn checked<F: FnMut(f64) -> f64>(f: &mut F, x: f64) -> Result<f64, QuadError> {
    let y = f(x);
    if y.is_finite() {
        Ok(y)
    } else {
        Err(QuadError::NonFinite { x })
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate, QuadError> {
    integrate_pieces(&mut f, &[(a, b)], tol)
}

/// Integrates over the union of finite intervals, refining globally so the
/// error budget is shared between pieces.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(
    f: &mut F,
    pieces: &[(f64, f64)],
    tol: Tolerance,
) -> Result<Estimate, QuadError> {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut total_floor = 0.0;
    for &(a, b) in pieces {
        if a == b {
            continue;
        }
        let (value, error, floor) = kronrod15_floor(f, a, b)?;
        total += value;
        total_err += error;
        total_floor += floor;
        heap.push(Segment { a, b, value, error, floor });
    }
    // Bisection cannot push the error below the accumulated roundoff floor,
    // so an error within twice that floor counts as converged.
    let done = |total: f64, err: f64, floor: f64| err <= tol.abs.max(tol.rel * total.abs()).max(2.0 * floor);
    // Segments too narrow to split are parked here so they stop blocking the heap.
    let mut frozen_err = 0.0;
    loop {
        if done(total, total_err, total_floor) {
            return Ok(Estimate {
                value: total,
                error: total_err,
            });
        }
        if heap.len() >= tol.max_intervals {
            break;
        }
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if (seg.b - seg.a).abs() <= 1e-14 * (seg.a.abs() + seg.b.abs()).max(1e-300) || mid == seg.a || mid == seg.b {
            frozen_err += seg.error;
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1, r1) = kronrod15_floor(f, seg.a, mid)?;
        let (v2, e2, r2) = kronrod15_floor(f, mid, seg.b)?;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        total_floor += r1 + r2 - seg.floor;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
            floor: r1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
            floor: r2,
        });
    }
    let error: f64 = heap.iter().map(|s| s.error).sum::<f64>() + frozen_err;
    if done(total, total_err, total_floor) {
        return Ok(Estimate {
            value: total,
            error: total_err,
        });
    }
    Err(QuadError::NotConverged {
        value: total,
        error,
        intervals: heap.len(),
    })
}

/// Integrates over `[a, ∞)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, tol: Tolerance) -> Result<Estimate, QuadError> {
    let mut g = |u: f64| {
        let w = 1.0 - u;
        let x = a + u / w;
        let y = f(x);
        if y == 0.0 {
            0.0
        } else {
            y / (w * w)
        }
    };
    integrate_pieces(&mut g, &[(0.0, 1.0)], tol)
}

/// Integrates over the whole real line. `breaks` are points where the
/// integrand has features (peaks, kinks); the line is cut there and the
/// two unbounded ends are mapped.
pub fn integrate_line<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64], tol: Tolerance) -> Result<Estimate, QuadError> {
    let mut pts: Vec<f64> = breaks.iter().copied().filter(|x| x.is_finite()).collect();
    if pts.is_empty() {
        pts.push(0.0);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let lo = pts[0];
    let hi = pts[pts.len() - 1];
    // Tails are mapped onto unit parameter ranges placed past `hi` so one
    // heap refines the finite pieces and both tails together.
    let mut pieces = Vec::with_capacity(pts.len() + 1);
    for w in pts.windows(2) {
        pieces.push((w[0], w[1]));
    }
    // Right tail lives in parameter range [R0, R0+1), left tail in [L0, L0+1).
    let span = (hi - lo).abs() + 1.0;
    let r0 = hi + 10.0 * span;
    let l0 = r0 + 10.0;
    pieces.push((r0, r0 + 1.0));
    pieces.push((l0, l0 + 1.0));
    let mut g = |p: f64| {
        if p >= l0 {
            let u = p - l0;
            let w = 1.0 - u;
            let y = f(lo - u / w);
            if y == 0.0 {
                0.0
            } else {
                y / (w * w)
            }
        } else if p >= r0 {
            let u = p - r0;
            let w = 1.0 - u;
            let y = f(hi + u / w);
            if y == 0.0 {
                0.0
            } else {
                y / (w * w)
            }
        } else {
            f(p)
        }
    };
    integrate_pieces(&mut g, &pieces, tol)
}

/// Composite Simpson rule with `n` (rounded up to even) panels. Used as an
/// independent fixed-grid cross-check of the adaptive routines.
pub fn simpson<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n.max(2) };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// Composite 15-point Kronrod nodes and weights on `[a, b]` split into
/// `panels` equal pieces. Used for fixed tensor quadratures.
pub fn kronrod_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(15 * panels);
    let width = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + p as f64 * width;
        push_panel(&mut out, lo, lo + width);
    }
    out
}

pub(crate) fn push_panel(out: &mut Vec<(f64, f64)>, a: f64, b: f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    out.push((c, WGK[7] * h));
    for j in 0..7 {
        out.push((c - h * XGK[j], WGK[j] * h));
        out.push((c + h * XGK[j], WGK[j] * h));
    }
}
