//! Distributional checks of the Poisson random measure sampler.

use levyheat::measure::{compensator, count_events, sample_prm, MarkSet, SpaceSet};
use levyheat::{derive_seed, LevyMeasure, Window};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

const CLOUDS: usize = 10_000;

fn clouds(window: &Window, measure: &LevyMeasure, master: u64) -> Vec<levyheat::PointCloud> {
    (0..CLOUDS)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master, i as u64));
            sample_prm(window, measure, &mut rng)
        })
        .collect()
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

#[test]
fn counts_have_poisson_mean_and_variance_on_sets() {
    let window = Window::new(2.0, 1.5, 1).unwrap();
    let measure = LevyMeasure::uniform(-1.0, 2.0, 0.8).unwrap();
    let cs = clouds(&window, &measure, 3);
    let sets = [
        (1.0, SpaceSet::interval(-1.0, 0.5), MarkSet::interval(0.0, 1.5)),
        (2.0, SpaceSet::All, MarkSet::All),
        (0.5, SpaceSet::interval(0.0, 1.5), MarkSet::interval(-1.0, 0.0)),
    ];
    for (t, space, marks) in &sets {
        let mu = compensator(*t, space, marks, &window, &measure).unwrap();
        let counts: Vec<f64> = cs.iter().map(|c| count_events(c, *t, space, marks) as f64).collect();
        let (m, v) = mean_var(&counts);
        let se_mean = (mu / CLOUDS as f64).sqrt();
        // Var of the sample variance of a Poisson law: (μ + 2μ²(n/(n-1)))/n ≈ (μ + 2μ²)/n.
        let se_var = ((mu + 2.0 * mu * mu) / CLOUDS as f64).sqrt();
        assert!((m - mu).abs() <= 3.0 * se_mean, "mean {m} vs {mu}");
        assert!((v - mu).abs() <= 3.0 * se_var, "variance {v} vs {mu}");
    }
}

#[test]
fn total_count_passes_chi_squared() {
    let window = Window::new(1.0, 1.0, 1).unwrap();
    let measure = LevyMeasure::atomic(&[(1.0, 1.2), (-1.0, 0.8)]).unwrap();
    let mu = window.volume() * measure.total_mass();
    let cs = clouds(&window, &measure, 4);
    let law = Poisson::new(mu).unwrap();
    // Bins 0..=8 and a tail bin.
    let mut observed = [0usize; 10];
    for c in &cs {
        observed[c.len().min(9)] += 1;
    }
    let mut expected = [0.0; 10];
    for k in 0..9 {
        expected[k] = law.pmf(k as u64) * CLOUDS as f64;
    }
    expected[9] = CLOUDS as f64 - expected[..9].iter().sum::<f64>();
    let stat: f64 = observed.iter().zip(&expected).map(|(&o, &e)| (o as f64 - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(stat);
    assert!(p > 1e-3, "chi-squared {stat}, p = {p}");
}

#[test]
fn disjoint_sets_are_uncorrelated() {
    let window = Window::new(1.0, 2.0, 1).unwrap();
    let measure = LevyMeasure::uniform(-1.0, 1.0, 1.5).unwrap();
    let cs = clouds(&window, &measure, 5);
    let a: Vec<f64> = cs
        .iter()
        .map(|c| count_events(c, 1.0, &SpaceSet::interval(-2.0, 0.0), &MarkSet::All) as f64)
        .collect();
    let b: Vec<f64> = cs
        .iter()
        .map(|c| count_events(c, 1.0, &SpaceSet::interval(0.0, 2.0), &MarkSet::All) as f64)
        .collect();
    let (ma, va) = mean_var(&a);
    let (mb, vb) = mean_var(&b);
    let cov = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (CLOUDS as f64 - 1.0);
    let corr = cov / (va * vb).sqrt();
    // Under independence the sample correlation has standard error ≈ 1/√n.
    assert!(corr.abs() <= 3.0 / (CLOUDS as f64).sqrt(), "correlation {corr}");
    // Overlapping sets are positively correlated: sanity check of the statistic.
    let c: Vec<f64> = cs
        .iter()
        .map(|c| count_events(c, 1.0, &SpaceSet::interval(-1.0, 1.0), &MarkSet::All) as f64)
        .collect();
    let (mc, vc) = mean_var(&c);
    let cov_ac = a.iter().zip(&c).map(|(x, y)| (x - ma) * (y - mc)).sum::<f64>() / (CLOUDS as f64 - 1.0);
    assert!(cov_ac / (va * vc).sqrt() > 0.3);
}

#[test]
fn marks_follow_the_normalised_measure() {
    let window = Window::new(1.0, 1.0, 1).unwrap();
    let measure = LevyMeasure::atomic(&[(1.0, 3.0), (2.0, 1.0)]).unwrap();
    let cs = clouds(&window, &measure, 6);
    let (mut ones, mut total) = (0usize, 0usize);
    for c in &cs {
        for e in c.events() {
            total += 1;
            if e.h == 1.0 {
                ones += 1;
            } else {
                assert_eq!(e.h, 2.0);
            }
        }
    }
    let frac = ones as f64 / total as f64;
    let se = (0.75 * 0.25 / total as f64).sqrt();
    assert!((frac - 0.75).abs() <= 3.0 * se, "fraction {frac}");
}
