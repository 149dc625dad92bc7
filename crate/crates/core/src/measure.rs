//! Lévy measures, space-time windows and Poisson random measures.
//!
//! Only finite-activity measures can be sampled exactly; an infinite-activity
//! density must be cut at some `ε > 0` before use.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::csv::{fmt_f64, parse_f64};
use crate::quad::{self, QuadError, Tolerance};

/// Knots of the inverse-CDF table used to draw marks from a density.
pub const DEFAULT_MARK_KNOTS: usize = 1 << 14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("invalid Lévy measure: {0}")]
    Invalid(String),
    #[error("∫(1 ∧ h²) ν(dh) diverges: {0}")]
    Divergent(String),
    #[error("Lévy measure has zero total mass")]
    ZeroMass,
    #[error("invalid window: {0}")]
    Window(String),
    #[error("event {index} is invalid: {reason}")]
    Event { index: usize, reason: String },
    #[error("cloud CSV line {line}: {reason}")]
    Csv { line: usize, reason: String },
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
}

/// A point mass `mass · δ_h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub h: f64,
    pub mass: f64,
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `ν(dh) = density(h) dh` on `[lo, hi] \ (-eps, eps)`.
#[derive(Clone)]
pub struct DensitySpec {
    pub label: String,
    pub density: DensityFn,
    pub lo: f64,
    pub hi: f64,
    pub eps: f64,
    pub knots: usize,
}

impl fmt::Debug for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensitySpec")
            .field("label", &self.label)
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("eps", &self.eps)
            .field("knots", &self.knots)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum MeasureForm {
    Atomic(Vec<Atom>),
    Density(DensitySpec),
}

/// A validated, finite Lévy measure on the real line.
#[derive(Debug, Clone)]
pub struct LevyMeasure {
    form: MeasureForm,
    total_mass: f64,
    small_jump_integral: f64,
    sampler: MarkSampler,
}

#[derive(Debug, Clone)]
enum MarkSampler {
    Atomic { cum: Vec<f64> },
    Table { edges: Vec<f64>, cum: Vec<f64> },
}

impl LevyMeasure {
    /// Checks the form, computes `ν(R)` and `∫(1 ∧ h²) dν`.
    pub fn validate(form: MeasureForm) -> Result<Self, MeasureError> {
        match form {
            MeasureForm::Atomic(atoms) => Self::from_atoms(atoms),
            MeasureForm::Density(spec) => Self::from_density(spec),
        }
    }

    /// Atomic measure from `(h, mass)` pairs.
    pub fn atomic(atoms: &[(f64, f64)]) -> Result<Self, MeasureError> {
        Self::from_atoms(atoms.iter().map(|&(h, mass)| Atom { h, mass }).collect())
    }

    /// Lebesgue density `height` on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, height: f64) -> Result<Self, MeasureError> {
        Self::from_density(DensitySpec {
            label: format!("uniform[{lo},{hi}]x{height}"),
            density: Arc::new(move |_| height),
            lo,
            hi,
            eps: 0.0,
            knots: DEFAULT_MARK_KNOTS,
        })
    }

    /// `scale · |h|^{-1-exponent}` on `eps <= |h| <= cutoff`, the truncated
    /// symmetric stable-like Lévy measure.
    pub fn power_law(scale: f64, exponent: f64, eps: f64, cutoff: f64) -> Result<Self, MeasureError> {
        if !(eps > 0.0) {
            return Err(MeasureError::Invalid("power-law measure needs a small-jump cut eps > 0".into()));
        }
        Self::from_density(DensitySpec {
            label: format!("power(scale={scale},exponent={exponent})"),
            density: Arc::new(move |h: f64| scale * h.abs().powf(-1.0 - exponent)),
            lo: -cutoff,
            hi: cutoff,
            eps,
            knots: DEFAULT_MARK_KNOTS,
        })
    }

    fn from_atoms(atoms: Vec<Atom>) -> Result<Self, MeasureError> {
        if atoms.is_empty() {
            return Err(MeasureError::ZeroMass);
        }
        for a in &atoms {
            if !a.h.is_finite() || !a.mass.is_finite() || a.mass < 0.0 {
                return Err(MeasureError::Invalid(format!("atom ({}, {}) is not a finite nonnegative mass", a.h, a.mass)));
            }
        }
        let total_mass: f64 = atoms.iter().map(|a| a.mass).sum();
        if !(total_mass > 0.0) {
            return Err(MeasureError::ZeroMass);
        }
        let small_jump_integral = atoms.iter().map(|a| a.mass * (a.h * a.h).min(1.0)).sum();
        let mut cum = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for a in &atoms {
            acc += a.mass;
            cum.push(acc);
        }
        Ok(Self {
            form: MeasureForm::Atomic(atoms),
            total_mass,
            small_jump_integral,
            sampler: MarkSampler::Atomic { cum },
        })
    }

    fn from_density(spec: DensitySpec) -> Result<Self, MeasureError> {
        if !(spec.lo.is_finite() && spec.hi.is_finite() && spec.lo < spec.hi) {
            return Err(MeasureError::Invalid(format!("support [{}, {}] is not a bounded interval", spec.lo, spec.hi)));
        }
        if !(spec.eps >= 0.0) {
            return Err(MeasureError::Invalid(format!("small-jump cut must be >= 0, got {}", spec.eps)));
        }
        if spec.knots < 2 {
            return Err(MeasureError::Invalid("mark table needs at least 2 knots".into()));
        }
        let pieces = support_pieces(spec.lo, spec.hi, spec.eps);
        if pieces.is_empty() {
            return Err(MeasureError::ZeroMass);
        }
        let density = spec.density.clone();
        let tol = Tolerance::new(1e-13, 1e-10);
        let with_kinks = split_at(&pieces, &[-1.0, 0.0, 1.0]);
        let small = quad::integrate_pieces(&mut |h: f64| (h * h).min(1.0) * density(h), &with_kinks, tol)
            .map_err(|e| MeasureError::Divergent(e.to_string()))?
            .value;
        let total = quad::integrate_pieces(&mut |h: f64| density(h), &with_kinks, tol)
            .map_err(|e| MeasureError::Divergent(format!("total mass: {e}")))?
            .value;
        if !small.is_finite() {
            return Err(MeasureError::Divergent("integral is not finite".into()));
        }
        if !(total > 0.0) {
            return Err(MeasureError::ZeroMass);
        }

        // Inverse-CDF table: knots spread over the pieces in proportion to length.
        let span: f64 = pieces.iter().map(|(a, b)| b - a).sum();
        let mut edges = Vec::with_capacity(spec.knots + pieces.len());
        let mut cum = Vec::with_capacity(spec.knots + pieces.len());
        let mut acc = 0.0;
        let mut f = |h: f64| {
            let v = density(h);
            if v.is_finite() && v > 0.0 {
                v
            } else {
                0.0
            }
        };
        for &(a, b) in &pieces {
            let n = (((b - a) / span) * spec.knots as f64).ceil().max(1.0) as usize;
            let w = (b - a) / n as f64;
            edges.push(a);
            cum.push(acc);
            for i in 0..n {
                let lo = a + i as f64 * w;
                let hi = if i + 1 == n { b } else { lo + w };
                let (m, _) = quad::kronrod15(&mut f, lo, hi)?;
                acc += m.max(0.0);
                edges.push(hi);
                cum.push(acc);
            }
        }
        Ok(Self {
            form: MeasureForm::Density(spec),
            total_mass: total,
            small_jump_integral: small,
            sampler: MarkSampler::Table { edges, cum },
        })
    }

    pub fn form(&self) -> &MeasureForm {
        &self.form
    }

    /// `ν(R)`.
    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// `∫(1 ∧ h²) ν(dh)`.
    pub fn small_jump_integral(&self) -> f64 {
        self.small_jump_integral
    }

    /// `∫ f dν`: an exact sum for atoms, adaptive quadrature for densities.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64, MeasureError> {
        match &self.form {
            MeasureForm::Atomic(atoms) => Ok(atoms.iter().map(|a| a.mass * f(a.h)).sum()),
            MeasureForm::Density(spec) => {
                let pieces = split_at(&support_pieces(spec.lo, spec.hi, spec.eps), &[-1.0, 0.0, 1.0]);
                let density = &spec.density;
                let est = quad::integrate_pieces(&mut |h: f64| f(h) * density(h), &pieces, Tolerance::new(1e-13, 1e-10))?;
                Ok(est.value)
            }
        }
    }

    /// `(∫ J dν, ∫ J² dν)`.
    pub fn jump_moments<F: Fn(f64) -> f64>(&self, j: F) -> Result<(f64, f64), MeasureError> {
        let k1 = self.integrate(&j)?;
        let k2 = self.integrate(|h| {
            let v = j(h);
            v * v
        })?;
        Ok((k1, k2))
    }

    /// `ν(B)`.
    pub fn mass_of(&self, marks: &MarkSet) -> Result<f64, MeasureError> {
        match (&self.form, marks) {
            (_, MarkSet::All) => Ok(self.total_mass),
            (MeasureForm::Atomic(atoms), set) => Ok(atoms.iter().filter(|a| set.contains(a.h)).map(|a| a.mass).sum()),
            (MeasureForm::Density(spec), set) => {
                let support = support_pieces(spec.lo, spec.hi, spec.eps);
                let mut pieces = Vec::new();
                for (lo, hi) in set.intervals() {
                    for &(a, b) in &support {
                        let (l, r) = (lo.max(a), hi.min(b));
                        if l < r {
                            pieces.push((l, r));
                        }
                    }
                }
                if pieces.is_empty() {
                    return Ok(0.0);
                }
                let density = &spec.density;
                Ok(quad::integrate_pieces(&mut |h: f64| density(h), &pieces, Tolerance::new(1e-13, 1e-10))?.value)
            }
        }
    }

    /// Draws one mark from `ν / ν(R)`.
    pub fn sample_mark<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match (&self.sampler, &self.form) {
            (MarkSampler::Atomic { cum }, MeasureForm::Atomic(atoms)) => {
                let u = rng.random::<f64>() * self.total_mass;
                let idx = cum.partition_point(|&c| c <= u).min(atoms.len() - 1);
                atoms[idx].h
            }
            (MarkSampler::Table { edges, cum }, _) => {
                let total = *cum.last().unwrap();
                let u = rng.random::<f64>() * total;
                let i = cum.partition_point(|&c| c <= u).clamp(1, cum.len() - 1);
                let (c0, c1) = (cum[i - 1], cum[i]);
                let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
                edges[i - 1] + frac * (edges[i] - edges[i - 1])
            }
            _ => unreachable!("sampler always matches the form"),
        }
    }
}

fn support_pieces(lo: f64, hi: f64, eps: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    if eps <= 0.0 {
        out.push((lo, hi));
        return out;
    }
    if lo < -eps {
        out.push((lo, hi.min(-eps)));
    }
    if hi > eps {
        out.push((lo.max(eps), hi));
    }
    out.retain(|(a, b)| a < b);
    out
}

fn split_at(pieces: &[(f64, f64)], cuts: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &(a, b) in pieces {
        let mut start = a;
        for &c in cuts {
            if c > start && c < b {
                out.push((start, c));
                start = c;
            }
        }
        out.push((start, b));
    }
    out
}

/// The truncated domain `[0, T] × [-L, L]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub horizon: f64,
    pub half_width: f64,
    pub dim: usize,
}

impl Window {
    pub fn new(horizon: f64, half_width: f64, dim: usize) -> Result<Self, MeasureError> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(MeasureError::Window(format!("horizon must be positive, got {horizon}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(MeasureError::Window(format!("half width must be positive, got {half_width}")));
        }
        if dim == 0 {
            return Err(MeasureError::Window("dimension must be at least 1".into()));
        }
        Ok(Self { horizon, half_width, dim })
    }

    /// Spatial volume `(2L)^d`.
    pub fn space_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.dim as i32)
    }

    /// `T (2L)^d`.
    pub fn volume(&self) -> f64 {
        self.horizon * self.space_volume()
    }

    pub fn contains_point(&self, y: &[f64]) -> bool {
        y.len() == self.dim && y.iter().all(|v| v.abs() <= self.half_width)
    }
}

/// Half-open spatial boxes `Π [lo_i, hi_i)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceSet {
    All,
    /// A union of pairwise disjoint boxes.
    Boxes(Vec<Vec<(f64, f64)>>),
}

impl SpaceSet {
    pub fn interval(lo: f64, hi: f64) -> Self {
        SpaceSet::Boxes(vec![vec![(lo, hi)]])
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        match self {
            SpaceSet::All => true,
            SpaceSet::Boxes(boxes) => boxes
                .iter()
                .any(|b| b.len() == y.len() && b.iter().zip(y).all(|(&(lo, hi), &v)| v >= lo && v < hi)),
        }
    }

    /// Lebesgue measure of the set intersected with the window.
    pub fn volume_in(&self, window: &Window) -> f64 {
        let l = window.half_width;
        match self {
            SpaceSet::All => window.space_volume(),
            SpaceSet::Boxes(boxes) => boxes
                .iter()
                .map(|b| b.iter().map(|&(lo, hi)| (hi.min(l) - lo.max(-l)).max(0.0)).product::<f64>())
                .sum(),
        }
    }
}

/// Half-open mark sets `[lo, hi)`.
#[derive(Debug, Clone, PartialEq)]
pub enum MarkSet {
    All,
    /// A union of pairwise disjoint intervals.
    Intervals(Vec<(f64, f64)>),
}

impl MarkSet {
    pub fn interval(lo: f64, hi: f64) -> Self {
        MarkSet::Intervals(vec![(lo, hi)])
    }

    pub fn contains(&self, h: f64) -> bool {
        match self {
            MarkSet::All => true,
            MarkSet::Intervals(v) => v.iter().any(|&(lo, hi)| h >= lo && h < hi),
        }
    }

    fn intervals(&self) -> Vec<(f64, f64)> {
        match self {
            MarkSet::All => vec![(f64::NEG_INFINITY, f64::INFINITY)],
            MarkSet::Intervals(v) => v.clone(),
        }
    }
}

/// One atom `(s, y, h)` of the Poisson random measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub s: f64,
    pub y: Vec<f64>,
    pub h: f64,
}

/// Events of one Poisson random measure realisation, sorted by time.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    window: Window,
    events: Vec<Event>,
    seed: Option<u64>,
}

impl PointCloud {
    /// Builds a cloud from arbitrary events, checking they lie in the window.
    /// Events are stably sorted by time, so equal times keep insertion order.
    pub fn from_events(window: Window, mut events: Vec<Event>) -> Result<Self, MeasureError> {
        for (index, e) in events.iter().enumerate() {
            if !(e.s >= 0.0 && e.s <= window.horizon) {
                return Err(MeasureError::Event {
                    index,
                    reason: format!("time {} outside [0, {}]", e.s, window.horizon),
                });
            }
            if !window.contains_point(&e.y) {
                return Err(MeasureError::Event {
                    index,
                    reason: format!("position {:?} outside the window", e.y),
                });
            }
            if !e.h.is_finite() {
                return Err(MeasureError::Event {
                    index,
                    reason: "mark is not finite".into(),
                });
            }
        }
        events.sort_by(|a, b| a.s.total_cmp(&b.s));
        Ok(Self {
            window,
            events,
            seed: None,
        })
    }

    pub fn empty(window: Window) -> Self {
        Self {
            window,
            events: Vec::new(),
            seed: None,
        }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// CSV with header `s,y1..yd,h`, one row per event in time order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s");
        for i in 1..=self.window.dim {
            out.push_str(&format!(",y{i}"));
        }
        out.push_str(",h\n");
        for e in &self.events {
            let mut row = vec![e.s];
            row.extend_from_slice(&e.y);
            row.push(e.h);
            crate::csv::push_row(&mut out, &row);
        }
        out
    }

    /// Reads the format written by [`PointCloud::to_csv`]. Rows must already
    /// be in nondecreasing time order.
    pub fn from_csv(window: Window, text: &str) -> Result<Self, MeasureError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(MeasureError::Csv {
            line: 1,
            reason: "missing header".into(),
        })?;
        let expected = {
            let mut h = String::from("s");
            for i in 1..=window.dim {
                h.push_str(&format!(",y{i}"));
            }
            h.push_str(",h");
            h
        };
        if header.trim() != expected {
            return Err(MeasureError::Csv {
                line: 1,
                reason: format!("expected header `{expected}`, found `{header}`"),
            });
        }
        let mut events = Vec::new();
        let mut last = f64::NEG_INFINITY;
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Result<Vec<f64>, _> = line
                .split(',')
                .map(|f| parse_f64(f).ok_or_else(|| format!("cannot parse `{f}`")))
                .collect();
            let fields = fields.map_err(|reason| MeasureError::Csv { line: i + 1, reason })?;
            if fields.len() != window.dim + 2 {
                return Err(MeasureError::Csv {
                    line: i + 1,
                    reason: format!("expected {} fields, found {}", window.dim + 2, fields.len()),
                });
            }
            let s = fields[0];
            if s < last {
                return Err(MeasureError::Csv {
                    line: i + 1,
                    reason: format!("time {} precedes previous row {}", fmt_f64(s), fmt_f64(last)),
                });
            }
            last = s;
            events.push(Event {
                s,
                y: fields[1..=window.dim].to_vec(),
                h: fields[window.dim + 1],
            });
        }
        Self::from_events(window, events)
    }
}

/// Samples a Poisson random measure with intensity `ds dy ν(dh)` on the
/// window: a Poisson(`T (2L)^d ν(R)`) number of events with uniform times
/// and positions and i.i.d. marks from `ν / ν(R)`.
pub fn sample_prm<R: Rng + ?Sized>(window: &Window, measure: &LevyMeasure, rng: &mut R) -> PointCloud {
    let mean = window.volume() * measure.total_mass();
    let n = if mean > 0.0 {
        Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0)
    } else {
        0
    };
    let l = window.half_width;
    let mut events = Vec::with_capacity(n);
    for _ in 0..n {
        let s = rng.random::<f64>() * window.horizon;
        let y = (0..window.dim).map(|_| (2.0 * rng.random::<f64>() - 1.0) * l).collect();
        let h = measure.sample_mark(rng);
        events.push(Event { s, y, h });
    }
    events.sort_by(|a, b| a.s.total_cmp(&b.s));
    PointCloud {
        window: *window,
        events,
        seed: None,
    }
}

/// `#{i : s_i <= t, y_i ∈ A, h_i ∈ B}`.
pub fn count_events(cloud: &PointCloud, t: f64, space: &SpaceSet, marks: &MarkSet) -> usize {
    cloud
        .events
        .iter()
        .take_while(|e| e.s <= t)
        .filter(|e| space.contains(&e.y) && marks.contains(e.h))
        .count()
}

/// `t · |A| · ν(B)`, the mean of [`count_events`]. `|A|` is taken inside
/// the window.
pub fn compensator(t: f64, space: &SpaceSet, marks: &MarkSet, window: &Window, measure: &LevyMeasure) -> Result<f64, MeasureError> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    Ok(t * space.volume_in(window) * measure.mass_of(marks)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn unit_window() -> Window {
        Window::new(1.0, 0.5, 1).unwrap()
    }

    #[test]
    fn validate_examples() {
        let m = LevyMeasure::atomic(&[(1.0, 2.0)]).unwrap();
        assert_eq!(m.total_mass(), 2.0);
        assert_eq!(m.small_jump_integral(), 2.0);
        let m = LevyMeasure::atomic(&[(0.5, 4.0)]).unwrap();
        assert_eq!(m.small_jump_integral(), 1.0);
        let m = LevyMeasure::uniform(-1.0, 1.0, 1.0).unwrap();
        assert!((m.total_mass() - 2.0).abs() < 1e-12);
        assert!((m.small_jump_integral() - 2.0 / 3.0).abs() < 1e-12);
        let (k1, k2) = m.jump_moments(|h| h.abs()).unwrap();
        assert!((k1 - 1.0).abs() < 1e-12 && (k2 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn validate_rejects() {
        assert!(matches!(LevyMeasure::atomic(&[(1.0, 0.0)]), Err(MeasureError::ZeroMass)));
        assert!(matches!(LevyMeasure::atomic(&[]), Err(MeasureError::ZeroMass)));
        assert!(LevyMeasure::atomic(&[(1.0, -1.0)]).is_err());
        let spec = DensitySpec {
            label: "h^-3".into(),
            density: Arc::new(|h: f64| h.abs().powi(-3)),
            lo: -1.0,
            hi: 1.0,
            eps: 0.0,
            knots: 64,
        };
        assert!(matches!(LevyMeasure::validate(MeasureForm::Density(spec)), Err(MeasureError::Divergent(_))));
        assert!(LevyMeasure::power_law(1.0, 1.5, 0.0, 1.0).is_err());
        let m = LevyMeasure::power_law(1.0, 1.5, 0.01, 1.0).unwrap();
        // 2 ∫_{0.01}^1 h^{-2.5} dh = (2/1.5)(0.01^{-1.5} - 1)
        assert!((m.total_mass() - (2.0 / 1.5) * (1000.0 - 1.0)).abs() < 1e-6);
    }

    #[test]
    fn marks_follow_the_measure() {
        let m = LevyMeasure::atomic(&[(1.0, 1.0), (-2.0, 3.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 40_000;
        let neg = (0..n).filter(|_| m.sample_mark(&mut rng) == -2.0).count() as f64 / n as f64;
        assert!((neg - 0.75).abs() < 3.0 * (0.75 * 0.25 / n as f64).sqrt());

        let u = LevyMeasure::uniform(-1.0, 3.0, 0.5).unwrap();
        let draws: Vec<f64> = (0..n).map(|_| u.sample_mark(&mut rng)).collect();
        assert!(draws.iter().all(|&h| (-1.0..=3.0).contains(&h)));
        let mean = draws.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 3.0 * (16.0 / 12.0 / n as f64).sqrt());
    }

    #[test]
    fn compensator_examples() {
        let w = unit_window();
        let m = LevyMeasure::atomic(&[(1.0, 2.5)]).unwrap();
        let c = compensator(1.0, &SpaceSet::All, &MarkSet::All, &w, &m).unwrap();
        assert!((c - 2.5).abs() < 1e-15);
        assert_eq!(compensator(0.0, &SpaceSet::All, &MarkSet::All, &w, &m).unwrap(), 0.0);
        let w2 = Window::new(2.0, 1.0, 1).unwrap();
        let m3 = LevyMeasure::atomic(&[(1.0, 3.0)]).unwrap();
        let c = compensator(2.0, &SpaceSet::interval(-1.0, 1.0), &MarkSet::interval(0.5, 1.5), &w2, &m3).unwrap();
        assert_eq!(c, 12.0);
    }

    #[test]
    fn counting_examples() {
        let w = Window::new(1.0, 1.0, 1).unwrap();
        let empty = PointCloud::empty(w);
        assert_eq!(count_events(&empty, 1.0, &SpaceSet::All, &MarkSet::All), 0);
        let m = LevyMeasure::atomic(&[(1.0, 5.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cloud = sample_prm(&w, &m, &mut rng);
        assert_eq!(count_events(&cloud, 1.0, &SpaceSet::All, &MarkSet::All), cloud.len());
        let a1 = SpaceSet::interval(-1.0, 0.2);
        let a2 = SpaceSet::interval(0.2, 1.01);
        let both = SpaceSet::Boxes(vec![vec![(-1.0, 0.2)], vec![(0.2, 1.01)]]);
        for t in [0.1, 0.5, 1.0] {
            let sum = count_events(&cloud, t, &a1, &MarkSet::All) + count_events(&cloud, t, &a2, &MarkSet::All);
            assert_eq!(sum, count_events(&cloud, t, &both, &MarkSet::All));
        }
    }

    #[test]
    fn sampler_is_deterministic_and_in_window() {
        let w = Window::new(2.0, 1.5, 2).unwrap();
        let m = LevyMeasure::uniform(-1.0, 1.0, 2.0).unwrap();
        let a = sample_prm(&w, &m, &mut ChaCha8Rng::seed_from_u64(11));
        let b = sample_prm(&w, &m, &mut ChaCha8Rng::seed_from_u64(11));
        assert_eq!(a, b);
        assert!(a.events().windows(2).all(|p| p[0].s <= p[1].s));
        assert!(a.events().iter().all(|e| w.contains_point(&e.y) && e.s <= 2.0));
    }

    #[test]
    fn tiny_mass_gives_empty_cloud() {
        let w = unit_window();
        let m = LevyMeasure::atomic(&[(1.0, 1e-12)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!((0..1000).all(|_| sample_prm(&w, &m, &mut rng).is_empty()));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let w = Window::new(1.0, 2.0, 2).unwrap();
        let m = LevyMeasure::uniform(-1.0, 1.0, 3.0).unwrap();
        let cloud = sample_prm(&w, &m, &mut ChaCha8Rng::seed_from_u64(4));
        let text = cloud.to_csv();
        assert!(text.starts_with("s,y1,y2,h\n"));
        let back = PointCloud::from_csv(w, &text).unwrap();
        assert_eq!(back.events(), cloud.events());
        assert_eq!(back.to_csv(), text);

        assert!(PointCloud::from_csv(w, "s,y1,h\n").is_err());
        let unsorted = "s,y1,y2,h\n0.5,0,0,1\n0.2,0,0,1\n";
        assert!(matches!(PointCloud::from_csv(w, unsorted), Err(MeasureError::Csv { line: 3, .. })));
        let outside = "s,y1,y2,h\n0.5,9,0,1\n";
        assert!(matches!(PointCloud::from_csv(w, outside), Err(MeasureError::Event { index: 0, .. })));
    }

    #[test]
    fn ties_keep_insertion_order() {
        let w = unit_window();
        let events = vec![
            Event { s: 0.5, y: vec![0.1], h: 1.0 },
            Event { s: 0.2, y: vec![0.0], h: 2.0 },
            Event { s: 0.5, y: vec![-0.1], h: 3.0 },
        ];
        let cloud = PointCloud::from_events(w, events).unwrap();
        let marks: Vec<f64> = cloud.events().iter().map(|e| e.h).collect();
        assert_eq!(marks, vec![2.0, 1.0, 3.0]);
    }
}
