//! Fixed-step simulation of the plant, observer and controller loop under
//! bounded noise, an optional watermark and an optional replay attack.
//!
//! Plant and observer are integrated jointly by classic RK4. Within a step
//! the noise `ω`, `ν`, the watermark sample `ξ` and the attacker's
//! contamination are held constant; the control `u = −Kx̂ + Gξ` and the
//! measurement `y = Cx + Du + ν` are evaluated at every stage. The measured
//! output is recorded stage by stage, so a replayed segment drives the
//! observer with exactly the data it saw during recording.

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gains::LoopMatrices;
use crate::linalg::{gemv, gemv_add, norm2, norm2_sq};
use crate::plant::NonlinearPlant;
use crate::watermark::{WatermarkSignal, WatermarkSource};

/// State norms above this abort the simulation.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// Fraction of `T` searched for a state-matched replay onset.
pub const ONSET_SEARCH_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// `‖ω‖∞` bound on the process noise.
    pub omega_bound: f64,
    /// `‖ν‖∞` bound on the measurement noise.
    pub nu_bound: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn uniform(bound: f64, seed: u64) -> Self {
        Self {
            omega_bound: bound,
            nu_bound: bound,
            seed,
        }
    }

    pub fn none() -> Self {
        Self::uniform(0.0, 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StartMode {
    Immediate,
    /// Delay the onset until the current estimated output is within
    /// `tolerance` of the first recorded measurement.
    StateMatched { tolerance: f64 },
}

/// Signal the attacker adds to the plant input during replay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Contamination {
    None,
    Constant(f64),
    /// `slope · (t − onset)`.
    Ramp { slope: f64 },
}

impl Contamination {
    fn at(&self, since_onset: f64) -> f64 {
        match *self {
            Self::None => 0.0,
            Self::Constant(c) => c,
            Self::Ramp { slope } => slope * since_onset,
        }
    }
}

/// Record on `[0, T)`, replay the recording on `[T, replay_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackScenario {
    pub replay_start: f64,
    /// Defaults to `min(2T, horizon)`.
    pub replay_end: Option<f64>,
    pub start_mode: StartMode,
    pub contamination: Contamination,
}

impl AttackScenario {
    /// Immediate replay at `t` with the default constant contamination 0.5.
    pub fn replay_at(t: f64) -> Self {
        Self {
            replay_start: t,
            replay_end: None,
            start_mode: StartMode::Immediate,
            contamination: Contamination::Constant(0.5),
        }
    }

    pub fn end(&self, horizon: f64) -> f64 {
        self.replay_end.unwrap_or(2.0 * self.replay_start).min(horizon)
    }

    fn validate(&self, horizon: f64) -> Result<()> {
        if !(self.replay_start > 0.0) {
            return Err(Error::InvalidArgument(format!("replay start must be > 0, got {}", self.replay_start)));
        }
        if !(self.end(horizon) > self.replay_start) {
            return Err(Error::InvalidArgument(format!(
                "replay end {} must exceed the start {}",
                self.end(horizon),
                self.replay_start
            )));
        }
        if let Some(e) = self.replay_end {
            if e > 2.0 * self.replay_start {
                return Err(Error::InvalidArgument("replay cannot outlast the recording".into()));
            }
        }
        if let StartMode::StateMatched { tolerance } = self.start_mode {
            if !(tolerance >= 0.0) {
                return Err(Error::InvalidArgument("state-matching tolerance must be ≥ 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialState {
    /// Noise-free equilibrium of `ẋ = f(x) − BKx` for both plant and observer.
    #[default]
    Equilibrium,
    Zero,
    Given { x0: Vec<f64>, xhat0: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct ClosedLoopConfig {
    pub plant: NonlinearPlant,
    pub gains: LoopMatrices,
    pub step: f64,
    pub horizon: f64,
    pub noise: NoiseConfig,
    pub watermark: WatermarkSource,
    pub attack: Option<AttackScenario>,
    pub initial: InitialState,
    /// Seconds simulated before `t = 0` (noise and watermark on, no attack,
    /// nothing recorded), so that recording starts in steady state.
    pub settle: f64,
}

impl ClosedLoopConfig {
    /// Defaults: step 1 ms, horizon 100 s, no noise, no watermark, no attack,
    /// start at the closed-loop equilibrium.
    pub fn new(plant: NonlinearPlant, gains: LoopMatrices) -> Self {
        let m = plant.m();
        Self {
            plant,
            gains,
            step: 1e-3,
            horizon: 100.0,
            noise: NoiseConfig::none(),
            watermark: WatermarkSource::None { m },
            attack: None,
            initial: InitialState::Equilibrium,
            settle: 0.0,
        }
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.gains.check(&self.plant)?;
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument(format!("step must be > 0, got {}", self.step)));
        }
        if !(self.horizon >= self.step && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon {} shorter than the step", self.horizon)));
        }
        if !(self.settle >= 0.0 && self.settle.is_finite()) {
            return Err(Error::InvalidArgument(format!("settle time must be ≥ 0, got {}", self.settle)));
        }
        if !(self.noise.omega_bound >= 0.0 && self.noise.nu_bound >= 0.0) {
            return Err(Error::InvalidArgument("noise bounds must be ≥ 0".into()));
        }
        if self.watermark.m() != self.plant.m() {
            return Err(Error::ShapeError(format!(
                "watermark has {} channels, plant has {} inputs",
                self.watermark.m(),
                self.plant.m()
            )));
        }
        if let Some(a) = &self.attack {
            a.validate(self.horizon)?;
        }
        if let InitialState::Given { x0, xhat0 } = &self.initial {
            if x0.len() != self.plant.n() || xhat0.len() != self.plant.n() {
                return Err(Error::ShapeError("initial states must have the plant dimension".into()));
            }
        }
        Ok(())
    }

    fn initial_states(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.plant.n();
        Ok(match &self.initial {
            InitialState::Equilibrium => {
                let x = self.plant.closed_loop_equilibrium(&self.gains.k)?;
                (x.clone(), x)
            }
            InitialState::Zero => (vec![0.0; n], vec![0.0; n]),
            InitialState::Given { x0, xhat0 } => (x0.clone(), xhat0.clone()),
        })
    }
}

/// Time-indexed record of one run. Signals are stored row-major, one row per
/// grid point `k·step`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopTrace {
    pub step: f64,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub xhat: Vec<f64>,
    pub y: Vec<f64>,
    pub y_received: Vec<f64>,
    pub u_sent: Vec<f64>,
    pub u_applied: Vec<f64>,
    pub xi: Vec<f64>,
    /// `y_received − ŷ`.
    pub innovation: Vec<f64>,
    /// Actual replay onset, when an attack was configured.
    pub replay_onset: Option<f64>,
    pub replay_end: Option<f64>,
    /// Grid index range `[onset, end)` of the replay.
    pub replay_window: Option<(usize, usize)>,
    /// A state-matched onset search found no match and fell back to `T`.
    pub onset_fallback: bool,
}

impl ClosedLoopTrace {
    fn with_capacity(step: f64, n: usize, m: usize, p: usize, len: usize) -> Self {
        Self {
            step,
            n,
            m,
            p,
            times: Vec::with_capacity(len),
            x: Vec::with_capacity(len * n),
            xhat: Vec::with_capacity(len * n),
            y: Vec::with_capacity(len * p),
            y_received: Vec::with_capacity(len * p),
            u_sent: Vec::with_capacity(len * m),
            u_applied: Vec::with_capacity(len * m),
            xi: Vec::with_capacity(len * m),
            innovation: Vec::with_capacity(len * p),
            replay_onset: None,
            replay_end: None,
            replay_window: None,
            onset_fallback: false,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn x_at(&self, k: usize) -> &[f64] {
        &self.x[k * self.n..(k + 1) * self.n]
    }

    pub fn xhat_at(&self, k: usize) -> &[f64] {
        &self.xhat[k * self.n..(k + 1) * self.n]
    }

    pub fn y_at(&self, k: usize) -> &[f64] {
        &self.y[k * self.p..(k + 1) * self.p]
    }

    pub fn y_received_at(&self, k: usize) -> &[f64] {
        &self.y_received[k * self.p..(k + 1) * self.p]
    }

    pub fn innovation_at(&self, k: usize) -> &[f64] {
        &self.innovation[k * self.p..(k + 1) * self.p]
    }

    pub fn xi_at(&self, k: usize) -> &[f64] {
        &self.xi[k * self.m..(k + 1) * self.m]
    }

    /// `ŷ = y_received − innovation` at grid point `k`.
    pub fn yhat_at(&self, k: usize) -> Vec<f64> {
        self.y_received_at(k)
            .iter()
            .zip(self.innovation_at(k))
            .map(|(a, b)| a - b)
            .collect()
    }

    /// Grid index of time `t` (nearest point, clamped to the trace).
    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.step).round().max(0.0) as usize).min(self.len().saturating_sub(1))
    }

    /// The watermark samples as a [`WatermarkSignal`].
    pub fn watermark(&self) -> WatermarkSignal {
        WatermarkSignal {
            step: self.step,
            m: self.m,
            data: self.xi.clone(),
        }
    }

    /// Grid index range `[start, end)` of the replay window.
    pub fn replay_range(&self) -> Option<(usize, usize)> {
        self.replay_window
    }

    /// `sup ‖x − x̂‖` over grid points with `t ∈ [a, b]`.
    pub fn max_estimation_error(&self, a: f64, b: f64) -> f64 {
        (self.index_of(a)..=self.index_of(b))
            .map(|k| {
                let e: Vec<f64> = self.x_at(k).iter().zip(self.xhat_at(k)).map(|(x, xh)| x - xh).collect();
                norm2(&e)
            })
            .fold(0.0, f64::max)
    }
}

/// Measurement buffer of the attacker: stores the four RK4-stage samples of
/// `y` for every step, and serves them back shifted by the replay onset.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    p: usize,
    stages: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(p: usize, capacity: usize) -> Self {
        Self {
            p,
            stages: Vec::with_capacity(capacity * 4 * p),
        }
    }

    pub fn recorded_steps(&self) -> usize {
        self.stages.len() / (4 * self.p.max(1))
    }

    /// Appends the stage samples `[y₁, y₂, y₃, y₄]` of the next step.
    pub fn record(&mut self, stages: &[f64]) {
        debug_assert_eq!(stages.len(), 4 * self.p);
        self.stages.extend_from_slice(stages);
    }

    /// First-stage sample (the grid-point measurement) of step `k`.
    pub fn sample(&self, k: usize) -> &[f64] {
        &self.stages[4 * k * self.p..(4 * k + 1) * self.p]
    }

    fn stage(&self, k: usize, s: usize) -> &[f64] {
        let o = (4 * k + s) * self.p;
        &self.stages[o..o + self.p]
    }
}

/// Measurement delivered to the observer at step `k`, stage `s`: the live
/// sample outside the replay window `[onset, end)`, the recording of step
/// `k − onset` inside it.
pub fn record_replay_feed<'a>(
    buffer: &'a ReplayBuffer,
    live: &'a [f64],
    k: usize,
    s: usize,
    window: Option<(usize, usize)>,
) -> &'a [f64] {
    match window {
        Some((onset, end)) if k >= onset && k < end => buffer.stage(k - onset, s),
        _ => live,
    }
}

struct Workspace {
    m: usize,
    p: usize,
    fx: Vec<f64>,
    fxh: Vec<f64>,
    u: Vec<f64>,
    ua: Vec<f64>,
    yhat: Vec<f64>,
    innov: Vec<f64>,
}

/// Simulates the loop; divergence is reported as an error.
pub fn simulate(config: &ClosedLoopConfig) -> Result<ClosedLoopTrace> {
    let (trace, err) = simulate_partial(config)?;
    match err {
        Some(e) => Err(e),
        None => Ok(trace),
    }
}

/// Simulates the loop and returns the trace up to the point of divergence
/// together with the divergence error, if any. Configuration errors are
/// returned directly.
pub fn simulate_partial(config: &ClosedLoopConfig) -> Result<(ClosedLoopTrace, Option<Error>)> {
    config.validate()?;
    let plant = &config.plant;
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    let h = config.step;
    let steps = config.steps();
    let len = steps + 1;
    let pre = (config.settle / h).round() as usize;
    let wm = config.watermark.realize(h, pre + len)?;
    let (k_gain, l_gain, g_gain) = (&config.gains.k, &config.gains.l, &config.gains.g);
    let (bm, cm, dm) = (plant.b(), plant.c(), plant.d());

    let attack = config.attack;
    let k_start = attack.map(|a| (a.replay_start / h).round() as usize);
    // A replay that lasts until the horizon also feeds the final sample.
    let k_end = attack.map(|a| {
        let e = a.end(config.horizon);
        if e >= config.horizon {
            len
        } else {
            (e / h).round() as usize
        }
    });
    let search_until = attack.map(|a| {
        let ks = (a.replay_start / h).round() as usize;
        ks + (ONSET_SEARCH_FRACTION * a.replay_start / h).round() as usize
    });

    let (mut x, mut xh) = config.initial_states()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.noise.seed);
    let mut omega = vec![0.0; n];
    let mut nu = vec![0.0; p];
    let mut trace = ClosedLoopTrace::with_capacity(h, n, m, p, len);
    let mut buffer = ReplayBuffer::new(p, k_start.unwrap_or(0).min(len));
    let mut window: Option<(usize, usize)> = None;
    let mut ws = Workspace {
        m,
        p,
        fx: vec![0.0; n],
        fxh: vec![0.0; n],
        u: vec![0.0; m],
        ua: vec![0.0; m],
        yhat: vec![0.0; p],
        innov: vec![0.0; p],
    };
    let mut gxi = vec![0.0; m];
    let mut contamination;
    let mut stage_y = vec![0.0; 4 * p];
    let mut dx = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut dxh = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let (mut xs, mut xhs) = (vec![0.0; n], vec![0.0; n]);

    // Evaluates one stage: derivatives into (dx, dxh), measured output into y.
    let eval = |ws: &mut Workspace,
                x: &[f64],
                xh: &[f64],
                gxi: &[f64],
                contamination: f64,
                omega: &[f64],
                nu: &[f64],
                received: Option<&[f64]>,
                y: &mut [f64],
                dx: &mut [f64],
                dxh: &mut [f64]| {
        gemv(k_gain, xh, &mut ws.u);
        for j in 0..ws.m {
            ws.u[j] = -ws.u[j] + gxi[j];
            ws.ua[j] = ws.u[j] + contamination;
        }
        gemv(cm, x, y);
        gemv_add(dm, &ws.ua, y);
        for (yi, vi) in y.iter_mut().zip(nu) {
            *yi += vi;
        }
        gemv(cm, xh, &mut ws.yhat);
        gemv_add(dm, &ws.u, &mut ws.yhat);
        let yr = received.unwrap_or(y);
        for i in 0..ws.p {
            ws.innov[i] = yr[i] - ws.yhat[i];
        }
        plant.f(x, &mut ws.fx);
        plant.f(xh, &mut ws.fxh);
        dx.copy_from_slice(&ws.fx);
        gemv_add(bm, &ws.ua, dx);
        for (d, w) in dx.iter_mut().zip(omega) {
            *d += w;
        }
        dxh.copy_from_slice(&ws.fxh);
        gemv_add(bm, &ws.u, dxh);
        gemv_add(l_gain, &ws.innov, dxh);
    };

    let mut divergence = None;
    for kt in 0..pre + len {
        // The first `pre` steps settle the loop before recording starts.
        let settling = kt < pre;
        let k = kt.saturating_sub(pre);
        let t = (kt as f64 - pre as f64) * h;
        let nrm = norm2_sq(&x).max(norm2_sq(&xh)).sqrt();
        if !(nrm <= DIVERGENCE_NORM) {
            divergence = Some(Error::DivergenceDetected { time: t, norm: nrm });
            break;
        }
        gemv(g_gain, wm.at(kt), &mut gxi);

        // Replay onset.
        if let (false, Some(a), Some(ks), Some(ke), None) = (settling, attack, k_start, k_end, window) {
            let onset = match a.start_mode {
                StartMode::Immediate => (k == ks).then_some(k),
                StartMode::StateMatched { tolerance } => {
                    if k >= ks && buffer.recorded_steps() > 0 {
                        gemv(k_gain, &xh, &mut ws.u);
                        for j in 0..m {
                            ws.u[j] = -ws.u[j] + gxi[j];
                        }
                        gemv(cm, &xh, &mut ws.yhat);
                        gemv_add(dm, &ws.u, &mut ws.yhat);
                        let gap: f64 = ws
                            .yhat
                            .iter()
                            .zip(buffer.sample(0))
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum::<f64>()
                            .sqrt();
                        if gap <= tolerance {
                            Some(k)
                        } else if k >= search_until.unwrap_or(ks) || k + 1 >= ke {
                            trace.onset_fallback = true;
                            Some(ks)
                        } else {
                            None
                        }
                    } else {
                        None
                    }
                }
            };
            if let Some(o) = onset {
                // The recording covers [0, T); it cannot be replayed for longer.
                let ke = ke.min(o + buffer.recorded_steps());
                window = Some((o, ke));
                trace.replay_onset = Some(o as f64 * h);
                trace.replay_end = Some((ke as f64 * h).min(config.horizon));
                trace.replay_window = Some((o, ke));
            }
        }
        contamination = match window {
            Some((o, e)) if k >= o && k < e => attack.map_or(0.0, |a| a.contamination.at((k - o) as f64 * h)),
            _ => 0.0,
        };

        for w in omega.iter_mut() {
            *w = draw(&mut rng, config.noise.omega_bound);
        }
        for v in nu.iter_mut() {
            *v = draw(&mut rng, config.noise.nu_bound);
        }

        // Stage 1 at the grid point; its values go into the trace.
        let replay_row = window.filter(|&(o, e)| k >= o && k < e).map(|(o, _)| k - o);
        let fed = |s: usize| replay_row.map(|j| buffer.stage(j, s));
        eval(&mut ws, &x, &xh, &gxi, contamination, &omega, &nu, fed(0), &mut stage_y[..p], &mut dx[0], &mut dxh[0]);
        if !settling {
            record_point(&mut trace, t, &x, &xh, &stage_y[..p], record_replay_feed(&buffer, &stage_y[..p], k, 0, window), &ws, wm.at(kt));
            if k == steps {
                break;
            }
        }


        for s in 1..4 {
            let c = if s == 3 { h } else { 0.5 * h };
            for i in 0..n {
                xs[i] = x[i] + c * dx[s - 1][i];
                xhs[i] = xh[i] + c * dxh[s - 1][i];
            }
            eval(
                &mut ws,
                &xs,
                &xhs,
                &gxi,
                contamination,
                &omega,
                &nu,
                fed(s),
                &mut stage_y[s * p..(s + 1) * p],
                &mut dx[s],
                &mut dxh[s],
            );
        }
        for i in 0..n {
            x[i] += h / 6.0 * (dx[0][i] + 2.0 * dx[1][i] + 2.0 * dx[2][i] + dx[3][i]);
            xh[i] += h / 6.0 * (dxh[0][i] + 2.0 * dxh[1][i] + 2.0 * dxh[2][i] + dxh[3][i]);
        }
        if !settling && k_start.is_some_and(|ks| k < ks) {
            buffer.record(&stage_y);
        }
    }
    if attack.is_some() && trace.replay_onset.is_none() && divergence.is_none() {
        trace.onset_fallback = true;
    }
    Ok((trace, divergence))
}

#[allow(clippy::too_many_arguments)]
fn record_point(
    trace: &mut ClosedLoopTrace,
    t: f64,
    x: &[f64],
    xh: &[f64],
    y: &[f64],
    received: &[f64],
    ws: &Workspace,
    xi: &[f64],
) {
    trace.times.push(t);
    trace.x.extend_from_slice(x);
    trace.xhat.extend_from_slice(xh);
    trace.y.extend_from_slice(y);
    trace.y_received.extend_from_slice(received);
    trace.u_sent.extend_from_slice(&ws.u);
    trace.u_applied.extend_from_slice(&ws.ua);
    trace.xi.extend_from_slice(xi);
    trace.innovation.extend_from_slice(&ws.innov);
}

fn draw(rng: &mut ChaCha8Rng, bound: f64) -> f64 {
    if bound > 0.0 {
        rng.random_range(-bound..=bound)
    } else {
        0.0
    }
}

/// Writes the trace as CSV with columns `t, x1.., xhat1.., y1..,
/// y_received1.., u1.., xi1.., g`; `u` is the input applied to the plant.
/// The `g` column is left empty when no monitoring signal is given.
pub fn write_trace_csv<W: io::Write>(trace: &ClosedLoopTrace, g: Option<&[f64]>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(trace_header(trace.n, trace.p, trace.m))?;
    let mut row: Vec<String> = Vec::new();
    for k in 0..trace.len() {
        row.clear();
        row.push(fmt(trace.times[k]));
        let blocks: [&[f64]; 6] = [
            trace.x_at(k),
            trace.xhat_at(k),
            trace.y_at(k),
            trace.y_received_at(k),
            &trace.u_applied[k * trace.m..(k + 1) * trace.m],
            trace.xi_at(k),
        ];
        for b in blocks {
            row.extend(b.iter().map(|v| fmt(*v)));
        }
        row.push(g.and_then(|g| g.get(k)).map_or_else(String::new, |v| fmt(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_header(n: usize, p: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for (name, count) in [("x", n), ("xhat", n), ("y", p), ("y_received", p), ("u", m), ("xi", m)] {
        h.extend((1..=count).map(|i| format!("{name}{i}")));
    }
    h.push("g".into());
    h
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

/// Trace table read back from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTable {
    pub header: Vec<String>,
    /// Row-major values; empty cells read as NaN.
    pub rows: Vec<Vec<f64>>,
}

impl TraceTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_trace_csv<R: io::Read>(input: R) -> Result<TraceTable> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                if s.is_empty() {
                    Ok(f64::NAN)
                } else {
                    s.parse::<f64>()
                        .map_err(|e| Error::InvalidArgument(format!("row {}: {e}", i + 1)))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(TraceTable { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn s(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn scalar_config() -> ClosedLoopConfig {
        let plant = NonlinearPlant::linear(s(-1.0), s(1.0), s(1.0), s(1.0)).unwrap();
        let gains = LoopMatrices::new(s(0.5), s(0.5), s(1.0), 1e-3).unwrap();
        let mut c = ClosedLoopConfig::new(plant, gains);
        c.step = 1e-2;
        c.horizon = 10.0;
        c
    }

    #[test]
    fn equilibrium_start_has_zero_innovation() {
        let tr = simulate(&scalar_config()).unwrap();
        assert_eq!(tr.len(), 1001);
        assert!(tr.innovation.iter().all(|v| *v == 0.0));
        assert!(tr.x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn noise_is_bounded_and_deterministic() {
        let mut c = scalar_config();
        c.noise = NoiseConfig::uniform(0.05, 11);
        let a = simulate(&c).unwrap();
        let b = simulate(&c).unwrap();
        assert_eq!(a, b);
        // With x = x̂ = 0 at the first step the innovation is the sensor noise.
        assert!(a.innovation[0].abs() <= 0.05);
        c.noise.seed = 12;
        assert_ne!(simulate(&c).unwrap().x, a.x);
    }

    #[test]
    fn divergence_is_caught() {
        let plant = NonlinearPlant::linear(s(5.0), s(1.0), s(1.0), s(0.0)).unwrap();
        let gains = LoopMatrices::new(s(0.0), s(0.0), s(1.0), 1e-3).unwrap();
        let mut c = ClosedLoopConfig::new(plant, gains);
        c.initial = InitialState::Given { x0: vec![1.0], xhat0: vec![1.0] };
        c.step = 1e-2;
        c.horizon = 10.0;
        let (partial, err) = simulate_partial(&c).unwrap();
        assert!(matches!(err, Some(Error::DivergenceDetected { .. })));
        assert!(partial.len() < 1001 && !partial.is_empty());
        assert!(simulate(&c).is_err());
    }

    #[test]
    fn replay_feed_switches_inside_window() {
        let mut c = scalar_config();
        c.noise = NoiseConfig::uniform(0.1, 3);
        c.attack = Some(AttackScenario::replay_at(4.0));
        let tr = simulate(&c).unwrap();
        let (o, e) = tr.replay_range().unwrap();
        assert_eq!((o, e), (400, 800));
        let mut c2 = c.clone();
        c2.horizon = 6.0;
        let tr2 = simulate(&c2).unwrap();
        assert_eq!(tr2.y_received_at(600), tr2.y_at(200));
        for k in 0..tr.len() {
            if k >= o && k < e {
                assert_eq!(tr.y_received_at(k), tr.y_at(k - o));
            } else {
                assert_eq!(tr.y_received_at(k), tr.y_at(k));
            }
        }
        assert!(tr.u_applied[500] - tr.u_sent[500] == 0.5);
    }

    #[test]
    fn replay_is_limited_to_the_recording() {
        let mut c = scalar_config();
        c.noise = NoiseConfig::uniform(0.1, 3);
        c.horizon = 8.0;
        c.attack = Some(AttackScenario::replay_at(4.0));
        let tr = simulate(&c).unwrap();
        assert_eq!(tr.replay_range(), Some((400, 800)));
        assert_eq!(tr.y_received_at(800), tr.y_at(800));
    }

    #[test]
    fn bad_attack_rejected() {
        let mut c = scalar_config();
        c.attack = Some(AttackScenario::replay_at(0.0));
        assert!(simulate(&c).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut c = scalar_config();
        c.horizon = 0.5;
        c.noise = NoiseConfig::uniform(0.05, 1);
        let tr = simulate(&c).unwrap();
        let g: Vec<f64> = (0..tr.len()).map(|k| k as f64).collect();
        let mut buf = Vec::new();
        write_trace_csv(&tr, Some(&g), &mut buf).unwrap();
        let table = read_trace_csv(buf.as_slice()).unwrap();
        assert_eq!(table.header, trace_header(1, 1, 1));
        assert_eq!(table.column("t").unwrap(), tr.times);
        assert_eq!(table.column("y_received1").unwrap(), tr.y_received);
        assert_eq!(table.column("g").unwrap(), g);
    }
}
