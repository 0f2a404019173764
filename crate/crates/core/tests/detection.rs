use proptest::prelude::*;
use wmguard::bench::{ExperimentConfig, GainSource, Study, WatermarkSpec};
use wmguard::detection::{d_index, monitoring_signal_from, verdict};
use wmguard::parallel::Execution;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// A delayed innovation gives the same monitoring signal, delayed.
    #[test]
    fn monitoring_signal_commutes_with_shifts(
        e in prop::collection::vec(-2.0..2.0f64, 50..200),
        shift in 1usize..40,
        w in 2usize..20,
    ) {
        let step = 0.01;
        let window = w as f64 * step;
        let mut shifted = vec![0.0; shift];
        shifted.extend_from_slice(&e);
        let g = monitoring_signal_from(&e, 1, step, window).unwrap();
        let gs = monitoring_signal_from(&shifted, 1, step, window).unwrap();
        for k in w..e.len() {
            prop_assert!((g.values[k] - gs.values[k + shift]).abs() <= 1e-12);
        }
    }

    #[test]
    fn monitoring_signal_of_a_constant_is_its_square(c in -3.0..3.0f64, w in 2usize..30) {
        let e = vec![c; 100];
        let g = monitoring_signal_from(&e, 1, 0.1, w as f64 * 0.1).unwrap();
        for v in &g.values[g.warmup..] {
            prop_assert!((v - c * c).abs() <= 1e-12 * (1.0 + c * c));
        }
    }
}

fn step_signal(jump_at: usize, len: usize) -> Vec<f64> {
    (0..len).map(|k| if k >= jump_at { 1.0 } else { 0.01 }).collect()
}

#[test]
fn verdict_distinguishes_detections_from_false_alarms() {
    let g = monitoring_signal_from(&step_signal(500, 1000), 1, 0.01, 0.1).unwrap();
    let v = verdict(&g, 0.5, Some(5.0), 1.0);
    assert!(v.detected && !v.false_positive);
    let delay = v.delay.unwrap();
    assert!(delay > 0.0 && delay <= 0.1, "{delay}");

    let v = verdict(&g, 0.5, Some(7.0), 1.0);
    assert!(v.false_positive);
    assert!((v.first_false_alarm.unwrap() - 5.0).abs() <= 0.1);
    assert_eq!(v.delay, Some(0.0));

    let v = verdict(&g, 0.5, None, 1.0);
    assert!(v.false_positive && !v.detected);
    // Alarms before `ignore_before` do not count.
    assert!(!verdict(&g, 0.5, None, 9.99).false_positive || g.values[g.index_of(9.99)] > 0.5);
}

#[test]
fn d_index_is_a_ratio_of_maxima() {
    let g = monitoring_signal_from(&step_signal(500, 1000), 1, 0.01, 0.1).unwrap();
    let d = d_index(&g, (1.0, 4.0), (5.0, 9.0)).unwrap();
    assert!((d - 1e4).abs() < 1e-6 * 1e4, "{d}");
    assert!(d_index(&g, (1.0, 4.0), (5.0, 20.0)).is_err());
}

#[test]
fn calibrated_threshold_has_few_false_positives() {
    let cfg = ExperimentConfig {
        gains: GainSource::PublishedInitial,
        watermark: WatermarkSpec::Bernoulli { dwell: 0.1 },
        attack: None,
        ..ExperimentConfig::default()
    };
    let study = Study::prepare(&cfg).unwrap();
    let thr = study.threshold(Execution::Parallel).unwrap();
    let runs = 100;
    let alarms = wmguard::parallel::map_indexed(runs, Execution::Parallel, |i| {
        let (_, g) = study.simulate_run(10_000 + i as u64, false).unwrap();
        verdict(&g, thr, None, cfg.detector.transient).false_positive
    });
    let rate = alarms.iter().filter(|a| **a).count() as f64 / runs as f64;
    assert!(rate <= 0.01, "false-positive rate {rate}");
}
