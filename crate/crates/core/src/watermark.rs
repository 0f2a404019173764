//! Watermark signals `ξ(t)` for the control input `v = Gξ`: a chaotic
//! oscillator output, a Bernoulli switching sequence, or nothing.
//!
//! Every source satisfies the average-power bound `(1/t)∫‖ξ‖² ≤ 1`; see
//! [`max_window_power`] for the numerical check.

use std::fmt;
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{gemv, norm2_sq, Dynamics, Matrix};

/// Oscillator states beyond this norm abort generation.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// Power level targeted by [`ChaoticWatermark::calibrated`] (5 % below 1).
pub const CALIBRATION_TARGET: f64 = 0.95;

/// `θ̇ = Aθ + φ(θ)`, `ξ = Λθ`.
#[derive(Clone)]
pub struct ChaoticWatermark {
    a: Matrix,
    phi: Arc<Dynamics>,
    lambda: Matrix,
    theta0: Vec<f64>,
}

impl fmt::Debug for ChaoticWatermark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ChaoticWatermark")
            .field("a", &self.a)
            .field("lambda", &self.lambda)
            .field("theta0", &self.theta0)
            .finish_non_exhaustive()
    }
}

impl ChaoticWatermark {
    pub fn new(a: Matrix, phi: Arc<Dynamics>, lambda: Matrix, theta0: Vec<f64>) -> Result<Self> {
        let k = a.nrows();
        if !a.is_square() || lambda.ncols() != k || theta0.len() != k {
            return Err(Error::ShapeError(format!(
                "oscillator needs square A, Λ with {} columns and θ₀ of length {}",
                a.ncols(),
                a.ncols()
            )));
        }
        if lambda.nrows() == 0 {
            return Err(Error::ShapeError("Λ must have at least one row".into()));
        }
        Ok(Self { a, phi, lambda, theta0 })
    }

    /// Rössler prototype-4 oscillator `θ̇₁ = −θ₂ − θ₃`, `θ̇₂ = θ₁`,
    /// `θ̇₃ = 0.5θ₂ − 0.5θ₃ − 0.5θ₂²`, with `Λ = [0.5, 0, 0]` and
    /// `θ₀ = [1, 0, 0]`.
    pub fn rossler_prototype4() -> Self {
        #[rustfmt::skip]
        let a = Matrix::from_row_slice(3, 3, &[
            0.0, -1.0, -1.0,
            1.0, 0.0, 0.0,
            0.0, 0.5, -0.5,
        ]);
        let phi: Arc<Dynamics> = Arc::new(|th: &[f64], out: &mut [f64]| {
            out[0] = 0.0;
            out[1] = 0.0;
            out[2] = -0.5 * th[1] * th[1];
        });
        let lambda = Matrix::from_row_slice(1, 3, &[0.5, 0.0, 0.0]);
        Self::new(a, phi, lambda, vec![1.0, 0.0, 0.0]).expect("Rössler oscillator is well formed")
    }

    pub fn m(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn lambda(&self) -> &Matrix {
        &self.lambda
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    pub fn with_lambda(mut self, lambda: Matrix) -> Result<Self> {
        if lambda.ncols() != self.a.nrows() {
            return Err(Error::ShapeError("Λ column count must match the oscillator order".into()));
        }
        self.lambda = lambda;
        Ok(self)
    }

    pub fn with_theta0(mut self, theta0: Vec<f64>) -> Result<Self> {
        if theta0.len() != self.a.nrows() {
            return Err(Error::ShapeError("θ₀ length must match the oscillator order".into()));
        }
        self.theta0 = theta0;
        Ok(self)
    }

    fn field(&self, th: &[f64], out: &mut [f64], tmp: &mut [f64]) {
        gemv(&self.a, th, out);
        (self.phi)(th, tmp);
        for (o, t) in out.iter_mut().zip(tmp.iter()) {
            *o += t;
        }
    }

    /// Oscillator states on the grid `k·step`, `k < len`, by classic RK4.
    pub fn states(&self, step: f64, len: usize) -> Result<Vec<Vec<f64>>> {
        let k = self.theta0.len();
        let mut th = self.theta0.clone();
        let mut out = Vec::with_capacity(len);
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        let (mut tmp, mut stage) = (vec![0.0; k], vec![0.0; k]);
        for i in 0..len {
            let nrm = norm2_sq(&th).sqrt();
            if !(nrm <= DIVERGENCE_BOUND) {
                return Err(Error::DivergenceDetected { time: i as f64 * step, norm: nrm });
            }
            out.push(th.clone());
            self.field(&th, &mut k1, &mut tmp);
            for j in 0..k {
                stage[j] = th[j] + 0.5 * step * k1[j];
            }
            self.field(&stage, &mut k2, &mut tmp);
            for j in 0..k {
                stage[j] = th[j] + 0.5 * step * k2[j];
            }
            self.field(&stage, &mut k3, &mut tmp);
            for j in 0..k {
                stage[j] = th[j] + step * k3[j];
            }
            self.field(&stage, &mut k4, &mut tmp);
            for j in 0..k {
                th[j] += step / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        Ok(out)
    }

    /// Rescales `Λ` so that the largest mean power over windows of at least
    /// `min_window` seconds during a `pilot`-second run equals `target`.
    pub fn calibrated(self, step: f64, pilot: f64, min_window: f64, target: f64) -> Result<Self> {
        let len = (pilot / step).round() as usize + 1;
        let sig = WatermarkSource::Chaotic(self.clone()).realize(step, len)?;
        let power = max_window_power(&sig, min_window, window_stride(step, min_window));
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidArgument(format!("pilot run has power {power}")));
        }
        let scale = (target / power).sqrt();
        let lambda = &self.lambda * scale;
        self.with_lambda(lambda)
    }
}

/// Stride (in grid steps) used when scanning long windows: 1 % of the
/// minimum window length.
pub fn window_stride(step: f64, min_window: f64) -> usize {
    ((0.01 * min_window / step).floor() as usize).max(1)
}

#[derive(Debug, Clone)]
pub enum WatermarkSource {
    None { m: usize },
    /// Each component is `±1/√m`, redrawn every `dwell` seconds with
    /// independent fair signs.
    Bernoulli { m: usize, dwell: f64, seed: u64 },
    Chaotic(ChaoticWatermark),
}

impl WatermarkSource {
    pub fn m(&self) -> usize {
        match self {
            Self::None { m } | Self::Bernoulli { m, .. } => *m,
            Self::Chaotic(c) => c.m(),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, Self::None { .. })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            Self::Bernoulli { m, dwell, .. } => Self::Bernoulli {
                m: *m,
                dwell: *dwell,
                seed,
            },
            other => other.clone(),
        }
    }

    /// Bernoulli sample at time `t`; random access into a ChaCha keystream,
    /// one 32-bit word per component per dwell interval.
    fn bernoulli_at(m: usize, dwell: f64, t: f64, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        let j = interval_index(t, dwell);
        rng.set_word_pos(j as u128 * m as u128);
        let level = 1.0 / (m as f64).sqrt();
        for o in out.iter_mut().take(m) {
            *o = if rng.next_u32() & 1 == 1 { level } else { -level };
        }
    }

    /// `ξ(t)` for the stateless sources. Chaotic sources depend on the
    /// integration grid and are evaluated through [`Self::realize`].
    pub fn sample(&self, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.m()];
        match self {
            Self::None { .. } => {}
            Self::Bernoulli { m, dwell, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Self::bernoulli_at(*m, *dwell, t, &mut rng, &mut out);
            }
            Self::Chaotic(_) => {
                return Err(Error::InvalidArgument(
                    "chaotic watermarks are sampled on a simulation grid".into(),
                ))
            }
        }
        Ok(out)
    }

    /// Samples `ξ(k·step)` for `k < len`; the simulation holds each sample
    /// over its step.
    pub fn realize(&self, step: f64, len: usize) -> Result<WatermarkSignal> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be > 0, got {step}")));
        }
        let m = self.m();
        let mut data = vec![0.0; m * len];
        match self {
            Self::None { .. } => {}
            Self::Bernoulli { m, dwell, seed } => {
                if !(*dwell > 0.0) {
                    return Err(Error::InvalidArgument(format!("dwell must be > 0, got {dwell}")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                for (k, chunk) in data.chunks_mut(*m).enumerate() {
                    Self::bernoulli_at(*m, *dwell, k as f64 * step, &mut rng, chunk);
                }
            }
            Self::Chaotic(c) => {
                for (k, th) in c.states(step, len)?.iter().enumerate() {
                    gemv(&c.lambda, th, &mut data[k * m..(k + 1) * m]);
                }
            }
        }
        Ok(WatermarkSignal { step, m, data })
    }
}

fn interval_index(t: f64, dwell: f64) -> u64 {
    // The relative nudge keeps grid points that sit on a boundary in the
    // interval they open.
    let r = t / dwell;
    (r + 1e-9 * r.abs().max(1.0)).floor().max(0.0) as u64
}

/// A watermark sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WatermarkSignal {
    pub step: f64,
    pub m: usize,
    /// Row-major samples, `m` per grid point.
    pub data: Vec<f64>,
}

impl WatermarkSignal {
    pub fn zeros(step: f64, m: usize, len: usize) -> Self {
        Self {
            step,
            m,
            data: vec![0.0; m * len],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.m).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn at(&self, k: usize) -> &[f64] {
        &self.data[k * self.m..(k + 1) * self.m]
    }

    /// `‖ξ(k·step)‖²` per grid point.
    pub fn power(&self) -> Vec<f64> {
        (0..self.len()).map(|k| norm2_sq(self.at(k))).collect()
    }
}

/// Running power `(1/t)∫₀ᵗ‖ξ‖²` at every grid point `t > 0`, with the
/// samples held over their steps.
pub fn running_power(sig: &WatermarkSignal) -> Vec<f64> {
    let mut acc = 0.0;
    sig.power()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            acc += p;
            acc / (k + 1) as f64
        })
        .collect()
}

/// Largest mean power `(1/w)∫ₛ^{s+w}‖ξ‖²` over windows with `w ≥ min_window`
/// seconds whose endpoints lie on every `stride`-th grid point. Any longer
/// window splits into pieces of length in `[L, 2L)`, and its mean is a
/// weighted average of theirs, so only those lengths are scanned.
pub fn max_window_power(sig: &WatermarkSignal, min_window: f64, stride: usize) -> f64 {
    let stride = stride.max(1);
    let mut prefix = Vec::with_capacity(sig.len() / stride + 2);
    let mut acc = 0.0;
    prefix.push(0.0);
    for (k, p) in sig.power().iter().enumerate() {
        acc += p * sig.step;
        if (k + 1) % stride == 0 {
            prefix.push(acc);
        }
    }
    let h = sig.step * stride as f64;
    let lmin = ((min_window / h).ceil() as usize).max(1);
    let points = prefix.len();
    if points <= lmin {
        return if points > 1 { prefix[points - 1] / (h * (points - 1) as f64) } else { 0.0 };
    }
    let mut best = 0.0_f64;
    for i in 0..points - lmin {
        for w in lmin..(2 * lmin).min(points - i) {
            best = best.max((prefix[i + w] - prefix[i]) / (w as f64 * h));
        }
    }
    best
}

/// `∫ₐᵇ‖ξ(s) − ξ(s − T)‖² ds` by the trapezoidal rule on the signal grid.
pub fn replay_difference_energy(sig: &WatermarkSignal, replay: f64, window: (f64, f64)) -> Result<f64> {
    let (a, b) = window;
    if !(b > a && a >= replay && replay >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "window [{a}, {b}] must satisfy b > a ≥ T = {replay}"
        )));
    }
    let h = sig.step;
    let ia = (a / h).round() as usize;
    let ib = (b / h).round() as usize;
    let shift = (replay / h).round() as usize;
    if ib >= sig.len() {
        return Err(Error::InvalidArgument(format!("window end {b} beyond the signal")));
    }
    let diff = |k: usize| -> f64 {
        sig.at(k)
            .iter()
            .zip(sig.at(k - shift))
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    };
    let mut total = 0.0;
    for k in ia..ib {
        total += 0.5 * h * (diff(k) + diff(k + 1));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn none_is_zero() {
        let s = WatermarkSource::None { m: 2 };
        assert_eq!(s.sample(3.7).unwrap(), vec![0.0, 0.0]);
        let sig = s.realize(1e-2, 100).unwrap();
        assert!(sig.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn bernoulli_levels_and_unit_power() {
        for m in [1, 2, 3, 5] {
            let s = WatermarkSource::Bernoulli { m, dwell: 0.1, seed: 9 };
            let sig = s.realize(1e-3, 5000).unwrap();
            let level = 1.0 / (m as f64).sqrt();
            assert!(sig.data.iter().all(|v| (v.abs() - level).abs() < 1e-15));
            assert!(sig.power().iter().all(|p| (p - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn bernoulli_holds_over_dwell_and_matches_sample() {
        let s = WatermarkSource::Bernoulli { m: 1, dwell: 0.1, seed: 3 };
        let sig = s.realize(1e-3, 1000).unwrap();
        for k in 0..1000 {
            assert_eq!(sig.at(k)[0], sig.at(100 * (k / 100))[0], "k = {k}");
            assert_eq!(sig.at(k)[0], s.sample(k as f64 * 1e-3).unwrap()[0]);
        }
        let flips = (1..10).filter(|j| sig.at(100 * j)[0] != sig.at(100 * (j - 1))[0]).count();
        assert!(flips > 0);
    }

    #[test]
    fn bernoulli_seed_changes_sequence() {
        let a = WatermarkSource::Bernoulli { m: 1, dwell: 0.1, seed: 1 }.realize(0.1, 64).unwrap();
        let b = WatermarkSource::Bernoulli { m: 1, dwell: 0.1, seed: 2 }.realize(0.1, 64).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn constant_signal_window_power() {
        let sig = WatermarkSignal {
            step: 0.01,
            m: 1,
            data: vec![0.5; 5000],
        };
        let p = max_window_power(&sig, 10.0, 1);
        assert!((p - 0.25).abs() < 1e-12);
    }

    #[test]
    fn window_power_finds_burst() {
        // Power 4 on [10, 15), zero elsewhere: best 10 s window averages 2.
        let step = 0.01;
        let data: Vec<f64> = (0..5000).map(|k| if (1000..1500).contains(&k) { 2.0 } else { 0.0 }).collect();
        let sig = WatermarkSignal { step, m: 1, data };
        let p = max_window_power(&sig, 10.0, 1);
        assert!((p - 2.0).abs() < 1e-9, "{p}");
    }

    #[test]
    fn rossler_stays_bounded() {
        let c = ChaoticWatermark::rossler_prototype4();
        let states = c.states(1e-3, 200_000).unwrap();
        let worst = states.iter().map(|s| norm2_sq(s).sqrt()).fold(0.0, f64::max);
        assert!(worst < 50.0, "{worst}");
    }

    #[test]
    fn calibration_hits_target() {
        let c = ChaoticWatermark::rossler_prototype4().calibrated(1e-2, 300.0, 10.0, 0.95).unwrap();
        let sig = WatermarkSource::Chaotic(c).realize(1e-2, 30_001).unwrap();
        let p = max_window_power(&sig, 10.0, 1);
        assert!((p - 0.95).abs() < 1e-2, "{p}");
    }

    #[test]
    fn periodic_signal_has_zero_replay_energy() {
        let step = 1e-3;
        let period = 7.0;
        let data: Vec<f64> = (0..20_001)
            .map(|k| (2.0 * std::f64::consts::PI * (k as f64 * step) / period).sin())
            .collect();
        let sig = WatermarkSignal { step, m: 1, data };
        let e = replay_difference_energy(&sig, period, (7.0, 20.0)).unwrap();
        assert!(e < 1e-12, "{e}");
    }

    #[test]
    fn replay_energy_rejects_bad_window() {
        let sig = WatermarkSignal::zeros(0.1, 1, 100);
        assert!(replay_difference_energy(&sig, 5.0, (4.0, 6.0)).is_err());
        assert!(replay_difference_energy(&sig, 5.0, (6.0, 6.0)).is_err());
    }

    #[test]
    fn chaotic_replay_energy_positive() {
        let c = ChaoticWatermark::rossler_prototype4();
        let sig = WatermarkSource::Chaotic(c).realize(1e-2, 10_001).unwrap();
        assert!(replay_difference_energy(&sig, 70.0, (70.0, 100.0)).unwrap() > 0.0);
    }
}
