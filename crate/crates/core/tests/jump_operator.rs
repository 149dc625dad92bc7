//! Ensemble checks of the jump operator `A^α` in the `‖·‖_{1,β}` norm.

use levyheat::bounds::c_dab;
use levyheat::kernel::{fit_envelope, EnvelopeGrid};
use levyheat::measure::sample_prm;
use levyheat::solver::{apply_a_alpha, JumpCoefficient, MarkFactor, NormGrid, StateFactor};
use levyheat::{derive_seed, LevyMeasure, StableKernel, Window};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const BETA: f64 = 1.0;
const LAMBDA: f64 = 0.2;
const REPLICAS: usize = 4000;

struct Setup {
    kernel: StableKernel,
    measure: LevyMeasure,
    sigma: JumpCoefficient,
    window: Window,
    grid: NormGrid,
    c_dab: f64,
}

fn setup() -> Setup {
    let kernel = StableKernel::stable(1.0, 1).unwrap();
    let measure = LevyMeasure::atomic(&[(1.0, 1.0), (-0.5, 2.0)]).unwrap();
    let sigma = JumpCoefficient::new(MarkFactor::Abs, StateFactor::Tanh(1.0), &measure).unwrap();
    let window = Window::new(1.0, 3.0, 1).unwrap();
    let grid = NormGrid::uniform(&window, 10, 12);
    let c = fit_envelope(&kernel, &EnvelopeGrid::standard()).unwrap().c;
    Setup {
        c_dab: c_dab(1, 1.0, BETA, c).unwrap(),
        kernel,
        measure,
        sigma,
        window,
        grid,
    }
}

/// `sup e^{-βt} (mean - 3 se)` over the grid: a lower confidence bound on
/// the ensemble norm.
fn norm_lower(samples: &[Vec<f64>], grid: &NormGrid) -> (f64, f64) {
    let np = grid.points.len();
    let n = samples.len() as f64;
    let (mut lower, mut point): (f64, f64) = (0.0, 0.0);
    for (j, &t) in grid.times.iter().enumerate() {
        let w = (-BETA * t).exp();
        for k in 0..np {
            let idx = j * np + k;
            let mean = samples.iter().map(|r| r[idx].abs()).sum::<f64>() / n;
            let var = samples.iter().map(|r| (r[idx].abs() - mean).powi(2)).sum::<f64>() / (n - 1.0);
            point = point.max(w * mean);
            lower = lower.max(w * (mean - 3.0 * (var / n).sqrt()));
        }
    }
    (lower, point)
}

fn path_sup(f: impl Fn(f64, f64) -> f64, grid: &NormGrid) -> f64 {
    let mut sup: f64 = 0.0;
    for &t in &grid.times {
        for x in &grid.points {
            sup = sup.max((-BETA * t).exp() * f(t, x[0]).abs());
        }
    }
    sup
}

#[test]
fn contraction_in_first_moment_norm() {
    let s = setup();
    let u = |t: f64, x: f64| 2.0 * (t + x).sin() + 0.5;
    let v = |t: f64, x: f64| (0.3 * x).cos() * t;
    let mut diffs = Vec::with_capacity(REPLICAS);
    for i in 0..REPLICAS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(31, i as u64));
        let cloud = sample_prm(&s.window, &s.measure, &mut rng);
        let au = apply_a_alpha(&|t: f64, x: &[f64]| u(t, x[0]), &cloud, &s.kernel, &s.sigma, LAMBDA).unwrap();
        let av = apply_a_alpha(&|t: f64, x: &[f64]| v(t, x[0]), &cloud, &s.kernel, &s.sigma, LAMBDA).unwrap();
        let a = s.grid.sample(&au).unwrap();
        let b = s.grid.sample(&av).unwrap();
        diffs.push(a.iter().zip(&b).map(|(p, q)| p - q).collect::<Vec<_>>());
    }
    let (lower, point) = norm_lower(&diffs, &s.grid);
    let input = path_sup(|t, x| u(t, x) - v(t, x), &s.grid);
    let factor = s.c_dab * LAMBDA * s.sigma.k1() * s.sigma.lipschitz();
    assert!(point > 0.0);
    assert!(lower <= factor * input, "‖Au - Av‖ >= {lower} (estimate {point}) but bound is {}", factor * input);
}

#[test]
fn operator_norm_bound() {
    let s = setup();
    let u = |t: f64, x: f64| 1.0 + t * (x / 3.0).cos();
    let mut samples = Vec::with_capacity(REPLICAS);
    for i in 0..REPLICAS {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(32, i as u64));
        let cloud = sample_prm(&s.window, &s.measure, &mut rng);
        let au = apply_a_alpha(&|t: f64, x: &[f64]| u(t, x[0]), &cloud, &s.kernel, &s.sigma, LAMBDA).unwrap();
        samples.push(s.grid.sample(&au).unwrap());
    }
    let (lower, _) = norm_lower(&samples, &s.grid);
    let bound = s.c_dab * LAMBDA * s.sigma.k1() * (1.0 + s.sigma.lipschitz() * path_sup(u, &s.grid));
    assert!(lower <= bound, "‖Au‖ >= {lower} but bound is {bound}");
}

#[test]
fn zero_input_maps_to_zero() {
    let s = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cloud = sample_prm(&s.window, &s.measure, &mut rng);
    let a = apply_a_alpha(&|_: f64, _: &[f64]| 0.0, &cloud, &s.kernel, &s.sigma, LAMBDA).unwrap();
    assert!(s.grid.sample(&a).unwrap().iter().all(|&v| v == 0.0));
}
