//! Innovation-energy detector: the sliding-window monitoring signal, threshold
//! calibration from attack-free runs, verdicts, diagnostic lower bounds under
//! replay, and aggregate statistics.

use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gains::{CertificateKind, GainCertificate};
use crate::linalg::norm2_sq;
use crate::sim::ClosedLoopTrace;
use crate::watermark::WatermarkSignal;

/// Minimum number of attack-free traces for calibration.
pub const MIN_CALIBRATION_TRACES: usize = 5;

/// Denominator guard of the D index.
pub const D_INDEX_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdMode {
    Manual(f64),
    /// `ϑ = (1 + margin) · max g` over attack-free runs.
    Calibrated { margin: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Window length `σ` in seconds.
    pub window: f64,
    pub threshold: ThresholdMode,
    /// Samples before this time are ignored for calibration and alarms.
    pub transient: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            window: 2.0,
            threshold: ThresholdMode::Calibrated { margin: 0.1 },
            transient: 20.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0 && self.window.is_finite()) {
            return Err(Error::InvalidArgument(format!("window must be > 0, got {}", self.window)));
        }
        match self.threshold {
            ThresholdMode::Manual(t) if !(t >= 0.0) => {
                Err(Error::InvalidArgument(format!("threshold must be ≥ 0, got {t}")))
            }
            ThresholdMode::Calibrated { margin } if !(margin >= 0.0) => {
                Err(Error::InvalidArgument(format!("margin must be ≥ 0, got {margin}")))
            }
            _ => Ok(()),
        }
    }
}

/// `g(t) = (1/σ)∫_{t−σ}^t ‖Ỹ‖² ds` on the trace grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitoringSignal {
    pub step: f64,
    pub window: f64,
    pub values: Vec<f64>,
    /// Points before this index integrate over `[0, t]` only (warm-up).
    pub warmup: usize,
}

impl MonitoringSignal {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.step).round().max(0.0) as usize).min(self.len().saturating_sub(1))
    }

    /// Largest value over grid points with `t ∈ [a, b]`.
    pub fn max_over(&self, a: f64, b: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.values[self.index_of(a)..=self.index_of(b)]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Monitoring signal of a row-major innovation sequence with `p` channels,
/// trapezoidal in time. Before `σ` the integral runs over `[0, t]` and is
/// still divided by `σ`.
pub fn monitoring_signal_from(innovation: &[f64], p: usize, step: f64, window: f64) -> Result<MonitoringSignal> {
    if p == 0 || !innovation.len().is_multiple_of(p) {
        return Err(Error::ShapeError(format!("innovation length {} is not a multiple of {p}", innovation.len())));
    }
    let w = (window / step).round() as usize;
    if w < 2 || ((w as f64) * step - window).abs() > 1e-9 * window.max(1.0) {
        return Err(Error::ShapeError(format!(
            "window {window} must be a multiple of the step {step} spanning at least 2 steps"
        )));
    }
    let len = innovation.len() / p;
    let e: Vec<f64> = innovation.chunks(p).map(norm2_sq).collect();
    let mut prefix = vec![0.0; len];
    for k in 1..len {
        prefix[k] = prefix[k - 1] + 0.5 * step * (e[k - 1] + e[k]);
    }
    let values = (0..len)
        .map(|k| (prefix[k] - prefix[k.saturating_sub(w)]) / window)
        .collect();
    Ok(MonitoringSignal {
        step,
        window,
        values,
        warmup: w.min(len),
    })
}

pub fn monitoring_signal(trace: &ClosedLoopTrace, window: f64) -> Result<MonitoringSignal> {
    monitoring_signal_from(&trace.innovation, trace.p, trace.step, window)
}

/// `ϑ = (1 + margin) · max g(t)` over `t ≥ transient` and all signals.
pub fn calibrate_threshold_from(signals: &[MonitoringSignal], transient: f64, margin: f64) -> Result<f64> {
    if signals.len() < MIN_CALIBRATION_TRACES {
        return Err(Error::EmptyCalibrationSet {
            needed: MIN_CALIBRATION_TRACES,
            got: signals.len(),
        });
    }
    if !(margin >= 0.0) {
        return Err(Error::InvalidArgument(format!("margin must be ≥ 0, got {margin}")));
    }
    let mut peak = 0.0_f64;
    for g in signals {
        let start = g.index_of(transient).max(g.warmup);
        if start >= g.len() {
            return Err(Error::InvalidArgument("calibration trace ends inside the transient".into()));
        }
        peak = g.values[start..].iter().copied().fold(peak, f64::max);
    }
    Ok((1.0 + margin) * peak)
}

/// Threshold from attack-free traces; `[0, transient)` is excluded.
pub fn calibrate_threshold(traces: &[ClosedLoopTrace], window: f64, margin: f64, transient: f64) -> Result<f64> {
    if traces.len() < MIN_CALIBRATION_TRACES {
        return Err(Error::EmptyCalibrationSet {
            needed: MIN_CALIBRATION_TRACES,
            got: traces.len(),
        });
    }
    let signals = traces
        .iter()
        .map(|t| monitoring_signal(t, window))
        .collect::<Result<Vec<_>>>()?;
    calibrate_threshold_from(&signals, transient, margin)
}

/// Outcome of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunVerdict {
    pub detected: bool,
    /// First alarm at or after the attack onset.
    pub detection_time: Option<f64>,
    /// `detection_time − T`.
    pub delay: Option<f64>,
    /// An alarm was raised before the onset (or anywhere, without an attack).
    pub false_positive: bool,
    pub first_false_alarm: Option<f64>,
}

/// Applies `g(t) > ϑ`. Warm-up points and `t < ignore_before` never alarm.
pub fn verdict(g: &MonitoringSignal, threshold: f64, attack_onset: Option<f64>, ignore_before: f64) -> RunVerdict {
    let start = g.index_of(ignore_before).max(g.warmup);
    let onset_k = attack_onset.map(|t| (t / g.step).round() as usize);
    let mut out = RunVerdict {
        detected: false,
        detection_time: None,
        delay: None,
        false_positive: false,
        first_false_alarm: None,
    };
    for k in start..g.len() {
        if g.values[k] <= threshold {
            continue;
        }
        match (onset_k, attack_onset) {
            (Some(ko), Some(t0)) if k >= ko => {
                let t = g.time(k);
                out.detected = true;
                out.detection_time = Some(t);
                out.delay = Some((t - t0).max(0.0));
                break;
            }
            _ => {
                if !out.false_positive {
                    out.false_positive = true;
                    out.first_false_alarm = Some(g.time(k));
                }
                if onset_k.is_none() {
                    break;
                }
            }
        }
    }
    out
}

/// Optimistic lower bound on `g(t)` during replay,
/// `((γ⁻ − ε)/σ)·∫_Θ^t ‖ξ(s) − ξ(s−T)‖² ds − g_n`, with `Θ = T` on
/// `[T, T+σ)` and `Θ = t − σ` afterwards. The initial-mismatch term is not
/// available in closed form and is omitted, so the value can exceed the true
/// bound. Entries outside `[T, min(2T, end))` are `None`.
pub fn theorem1_bounds(
    xi: &WatermarkSignal,
    cert: &GainCertificate,
    replay: f64,
    window: f64,
    g_n: f64,
    eps: f64,
) -> Result<Vec<Option<f64>>> {
    if cert.kind() != CertificateKind::L2MinusLower {
        return Err(Error::InvalidArgument("the bound needs a lower-gain certificate".into()));
    }
    if !(window > 0.0 && replay > 0.0) {
        return Err(Error::InvalidArgument("window and replay time must be > 0".into()));
    }
    let h = xi.step;
    let len = xi.len();
    let kt = (replay / h).round() as usize;
    let w = (window / h).round() as usize;
    let end = (2 * kt).min(len);
    let d: Vec<f64> = (0..len)
        .map(|k| {
            if k < kt {
                0.0
            } else {
                xi.at(k).iter().zip(xi.at(k - kt)).map(|(a, b)| (a - b) * (a - b)).sum()
            }
        })
        .collect();
    let mut prefix = vec![0.0; len];
    for k in 1..len {
        prefix[k] = prefix[k - 1] + 0.5 * h * (d[k - 1] + d[k]);
    }
    let gain = cert.gamma_sq() - eps;
    Ok((0..len)
        .map(|k| {
            if k < kt || k >= end {
                return None;
            }
            let theta = if k < kt + w { kt } else { k - w };
            Some(gain / window * (prefix[k] - prefix[theta]) - g_n)
        })
        .collect())
}

/// `max g` over `post` divided by `max g` over `pre`.
pub fn d_index(g: &MonitoringSignal, pre: (f64, f64), post: (f64, f64)) -> Result<f64> {
    let end = g.time(g.len().saturating_sub(1));
    for (a, b) in [pre, post] {
        if !(a <= b && a >= 0.0 && b <= end + 0.5 * g.step) {
            return Err(Error::InvalidArgument(format!("window [{a}, {b}] outside the signal [0, {end}]")));
        }
    }
    let den = g.max_over(pre.0, pre.1);
    if !(den >= D_INDEX_GUARD) {
        return Err(Error::DegenerateWindow(den));
    }
    Ok(g.max_over(post.0, post.1) / den)
}

/// One Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub detected: bool,
    pub delay: Option<f64>,
    pub false_positive: bool,
    #[serde(rename = "D")]
    pub d_index: Option<f64>,
}

/// Per-run records and aggregate statistics of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub runs: Vec<RunRecord>,
    pub threshold: f64,
}

impl DetectionReport {
    pub fn new(mut runs: Vec<RunRecord>, threshold: f64) -> Self {
        runs.sort_by_key(|r| r.run);
        Self { runs, threshold }
    }

    pub fn rate(&self) -> f64 {
        if self.runs.is_empty() {
            return 0.0;
        }
        self.runs.iter().filter(|r| r.detected).count() as f64 / self.runs.len() as f64
    }

    pub fn false_positive_rate(&self) -> f64 {
        if self.runs.is_empty() {
            return 0.0;
        }
        self.runs.iter().filter(|r| r.false_positive).count() as f64 / self.runs.len() as f64
    }

    fn delays(&self) -> impl Iterator<Item = f64> + '_ {
        self.runs.iter().filter(|r| r.detected).filter_map(|r| r.delay)
    }

    /// Mean delay over detected runs; `None` when nothing was detected.
    pub fn avg_delay(&self) -> Option<f64> {
        let (s, c) = self.delays().fold((0.0, 0usize), |(s, c), d| (s + d, c + 1));
        (c > 0).then(|| s / c as f64)
    }

    pub fn max_delay(&self) -> Option<f64> {
        self.delays().reduce(f64::max)
    }

    /// Mean D index over runs where it is defined.
    pub fn mean_d_index(&self) -> Option<f64> {
        let (s, c) = self
            .runs
            .iter()
            .filter_map(|r| r.d_index)
            .fold((0.0, 0usize), |(s, c), d| (s + d, c + 1));
        (c > 0).then(|| s / c as f64)
    }

    /// Per-run CSV with columns `run, seed, detected, delay, false_positive, D`.
    pub fn write_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.runs {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: io::Read>(input: R, threshold: f64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let runs = r.deserialize().collect::<std::result::Result<Vec<RunRecord>, _>>()?;
        Ok(Self::new(runs, threshold))
    }

    /// One-line summary CSV: `runs, threshold, rate, avg_delay, max_delay,
    /// false_positive_rate, mean_D`.
    pub fn write_summary_csv<W: io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["runs", "threshold", "rate", "avg_delay", "max_delay", "false_positive_rate", "mean_D"])?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        w.write_record([
            self.runs.len().to_string(),
            self.threshold.to_string(),
            self.rate().to_string(),
            opt(self.avg_delay()),
            opt(self.max_delay()),
            self.false_positive_rate().to_string(),
            opt(self.mean_d_index()),
        ])?;
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymmetricMatrix;

    fn signal(values: Vec<f64>, step: f64, window: f64) -> MonitoringSignal {
        MonitoringSignal {
            step,
            window,
            warmup: (window / step).round() as usize,
            values,
        }
    }

    #[test]
    fn zero_innovation_gives_zero() {
        let g = monitoring_signal_from(&vec![0.0; 500], 1, 0.01, 2.0).unwrap();
        assert!(g.values.iter().all(|v| *v == 0.0));
        assert_eq!(g.warmup, 200);
    }

    #[test]
    fn constant_innovation_energy() {
        let inn: Vec<f64> = (0..1000).flat_map(|_| [0.3, -0.4]).collect();
        let g = monitoring_signal_from(&inn, 2, 0.01, 2.0).unwrap();
        for k in 200..1000 {
            assert!((g.values[k] - 0.25).abs() < 1e-12);
        }
        // Ramp-in before σ.
        assert!((g.values[100] - 0.125).abs() < 1e-12);
    }

    #[test]
    fn sine_mean_square() {
        let n = 6000;
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let inn: Vec<f64> = (0..3 * n).map(|k| (k as f64 * step).sin()).collect();
        let g = monitoring_signal_from(&inn, 1, step, 2.0 * std::f64::consts::PI).unwrap();
        for k in (n..3 * n).step_by(97) {
            assert!((g.values[k] - 0.5).abs() < 1e-6, "{}", g.values[k]);
        }
    }

    #[test]
    fn short_window_rejected() {
        assert!(matches!(
            monitoring_signal_from(&[0.0; 10], 1, 0.1, 0.1),
            Err(Error::ShapeError(_))
        ));
    }

    #[test]
    fn calibration_needs_five() {
        let g = signal(vec![1.0; 10], 1.0, 2.0);
        let r = calibrate_threshold_from(&vec![g.clone(); 4], 0.0, 0.1);
        assert!(matches!(r, Err(Error::EmptyCalibrationSet { needed: 5, got: 4 })));
        let t = calibrate_threshold_from(&vec![g; 5], 0.0, 0.1).unwrap();
        assert!((t - 1.1).abs() < 1e-12);
    }

    #[test]
    fn calibration_zero_for_silent_traces() {
        let g = signal(vec![0.0; 100], 1.0, 2.0);
        assert_eq!(calibrate_threshold_from(&vec![g; 5], 20.0, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn verdict_delay_and_false_positive() {
        let step = 0.1;
        let mut v = vec![0.0; 1001];
        for (k, x) in v.iter_mut().enumerate() {
            if k >= 719 {
                *x = 2.0;
            }
        }
        let g = signal(v.clone(), step, 2.0);
        let r = verdict(&g, 1.0, Some(70.0), 20.0);
        assert!(r.detected && !r.false_positive);
        assert!((r.delay.unwrap() - 1.9).abs() < 1e-9);

        v[300] = 5.0;
        let g = signal(v, step, 2.0);
        let r = verdict(&g, 1.0, Some(70.0), 20.0);
        assert!(r.detected && r.false_positive);
        assert!((r.first_false_alarm.unwrap() - 30.0).abs() < 1e-9);

        let quiet = signal(vec![0.5; 1001], step, 2.0);
        let r = verdict(&quiet, 1.0, Some(70.0), 20.0);
        assert!(!r.detected && !r.false_positive && r.delay.is_none());
    }

    #[test]
    fn d_index_examples() {
        let g = signal(vec![0.7; 1001], 0.1, 2.0);
        assert!((d_index(&g, (20.0, 69.0), (70.0, 100.0)).unwrap() - 1.0).abs() < 1e-12);
        let v: Vec<f64> = (0..1001).map(|k| if k >= 700 { 1.4 } else { 0.7 }).collect();
        let g = signal(v, 0.1, 2.0);
        assert!((d_index(&g, (20.0, 69.0), (70.0, 100.0)).unwrap() - 2.0).abs() < 1e-12);
        let z = signal(vec![0.0; 1001], 0.1, 2.0);
        assert!(matches!(d_index(&z, (20.0, 69.0), (70.0, 100.0)), Err(Error::DegenerateWindow(_))));
    }

    #[test]
    fn bound_vacuous_without_watermark() {
        let xi = WatermarkSignal::zeros(0.01, 1, 10_001);
        let cert = GainCertificate::new(
            CertificateKind::L2MinusLower,
            SymmetricMatrix::new(crate::linalg::Matrix::from_element(1, 1, -1.0)).unwrap(),
            3.0,
        )
        .unwrap();
        let b = theorem1_bounds(&xi, &cert, 70.0, 2.0, 0.25, 1e-6).unwrap();
        assert!(b[..7000].iter().all(Option::is_none));
        assert!(b[7000..].iter().all(|v| (v.unwrap() + 0.25).abs() < 1e-15));
    }

    #[test]
    fn report_aggregates() {
        let rec = |run, detected, delay, fp| RunRecord {
            run,
            seed: 100 + run as u64,
            detected,
            delay,
            false_positive: fp,
            d_index: Some(run as f64),
        };
        let rep = DetectionReport::new(
            vec![rec(2, false, None, true), rec(0, true, Some(1.0), false), rec(1, true, Some(3.0), false)],
            0.5,
        );
        assert_eq!(rep.runs[0].run, 0);
        assert!((rep.rate() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(rep.avg_delay(), Some(2.0));
        assert_eq!(rep.max_delay(), Some(3.0));
        assert_eq!(rep.mean_d_index(), Some(1.0));
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("run,seed,detected,delay,false_positive,D\n"));
        assert_eq!(DetectionReport::read_csv(buf.as_slice(), 0.5).unwrap(), rep);
    }
}
