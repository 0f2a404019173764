use proptest::prelude::*;
use wmguard::watermark::{max_window_power, replay_difference_energy, running_power, window_stride, ChaoticWatermark, WatermarkSignal, WatermarkSource};

fn bernoulli(m: usize, seed: u64) -> WatermarkSource {
    WatermarkSource::Bernoulli { m, dwell: 0.1, seed }
}

/// Every window with at least `lmin` steps, on the full grid.
fn brute_window_power(power: &[f64], step: f64, lmin: usize) -> f64 {
    let mut best = 0.0_f64;
    for i in 0..power.len() {
        for j in (i + lmin)..=power.len() {
            let mean = power[i..j].iter().sum::<f64>() * step / ((j - i) as f64 * step);
            best = best.max(mean);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bernoulli_samples_are_random_access(seed in any::<u64>(), m in 1usize..4, k in 0usize..5000) {
        let src = bernoulli(m, seed);
        let sig = src.realize(1e-2, 5001).unwrap();
        let t = k as f64 * 1e-2;
        prop_assert_eq!(src.sample(t).unwrap(), sig.at(k).to_vec());
    }

    #[test]
    fn bernoulli_power_is_exactly_one(seed in any::<u64>(), m in 1usize..5) {
        let sig = bernoulli(m, seed).realize(1e-3, 2000).unwrap();
        for p in sig.power() {
            prop_assert!((p - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn window_scan_matches_brute_force(power in prop::collection::vec(0.0..3.0f64, 20..120), lmin in 2usize..10) {
        let data: Vec<f64> = power.iter().map(|p| p.sqrt()).collect();
        let sig = WatermarkSignal { step: 0.5, m: 1, data };
        let scan = max_window_power(&sig, lmin as f64 * 0.5, 1);
        let brute = brute_window_power(&sig.power(), 0.5, lmin);
        prop_assert!((scan - brute).abs() <= 1e-12 * (1.0 + brute), "{scan} vs {brute}");
    }
}

#[test]
fn bernoulli_intervals_are_uncorrelated() {
    let n = 4000;
    let sig = bernoulli(1, 99).realize(0.1, n).unwrap();
    let x: Vec<f64> = (0..n).map(|k| sig.at(k)[0]).collect();
    let bound = 3.0 / (n as f64).sqrt();
    let mean = x.iter().sum::<f64>() / n as f64;
    assert!(mean.abs() <= bound, "mean {mean}");
    for lag in 1..=10 {
        let r = (0..n - lag).map(|k| x[k] * x[k + lag]).sum::<f64>() / (n - lag) as f64;
        assert!(r.abs() <= bound, "lag {lag}: {r}");
    }
}

#[test]
fn replay_energy_of_bernoulli_matches_expectation() {
    // Independent ±1 levels differ with probability ½ by 2, so the expected
    // energy of ξ(s) − ξ(s − T) over a window of length w is 2w.
    let (t, w) = (10.0, 10.0);
    let seeds = 200;
    let total: f64 = (0..seeds)
        .map(|seed| {
            let sig = bernoulli(1, seed).realize(1e-2, 2001).unwrap();
            replay_difference_energy(&sig, t, (t, t + w)).unwrap()
        })
        .sum();
    let mean = total / seeds as f64;
    // Per-seed standard deviation is 2·√(w/dwell)·dwell = 2.
    let tol = 4.0 * 2.0 / (seeds as f64).sqrt();
    assert!((mean - 2.0 * w).abs() <= tol, "mean {mean}");
}

#[test]
fn replay_energy_vanishes_for_periodic_signals() {
    let data: Vec<f64> = (0..3000).map(|k| ((k % 100) as f64 * 0.1).sin()).collect();
    let sig = WatermarkSignal { step: 0.01, m: 1, data };
    assert!(replay_difference_energy(&sig, 1.0, (1.0, 25.0)).unwrap() < 1e-20);
    assert!(replay_difference_energy(&sig, 1.0, (0.5, 2.0)).is_err());
}

#[test]
fn chaotic_source_is_deterministic_and_bounded() {
    let c = ChaoticWatermark::rossler_prototype4().calibrated(1e-2, 200.0, 10.0, 0.95).unwrap();
    let src = WatermarkSource::Chaotic(c);
    let a = src.realize(1e-2, 20_000).unwrap();
    let b = src.with_seed(7).realize(1e-2, 20_000).unwrap();
    assert_eq!(a, b);
    let calibrated = max_window_power(&a, 10.0, window_stride(1e-2, 10.0));
    assert!((calibrated - 0.95).abs() <= 1e-9, "{calibrated}");
    // The full-resolution scan sees slightly more, but stays within the 5 % budget.
    let exact = max_window_power(&a, 10.0, 1);
    assert!(exact >= calibrated && exact <= 1.05, "{exact}");
    let run = running_power(&a);
    assert!(run.iter().all(|p| p.is_finite() && *p >= 0.0));
    assert!(src.sample(1.0).is_err());
}
