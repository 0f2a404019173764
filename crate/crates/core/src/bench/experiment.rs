//! Experiment configuration and the Monte-Carlo harness.
//!
//! Keys, by section (all optional; defaults reproduce the robot study):
//!
//! - `model`: `kind = robot | linear` (linear reads `[matrix A|B|C|D]`)
//! - `gains`: `source = bootstrap | optimized | published_initial |
//!   published_optimized | matrices | report`, `path` (for `report`,
//!   relative to the config file); `matrices` reads `[matrix K|L|G]`
//! - `design`: `algorithm = 1 | 2`, `alpha`, `beta0`, `iterations`, `g_init`,
//!   `epsilon`, `eps1`
//! - `watermark`: `kind = none | bernoulli | chaotic`, `dwell`, `lambda`
//!   (fixed chaotic output scale; otherwise calibrated), `pilot`,
//!   `min_window`, `target`
//! - `simulation`: `step`, `horizon`, `noise` (both bounds), `omega_bound`,
//!   `nu_bound`, `settle`, `initial = equilibrium | zero`
//! - `attack`: `enabled`, `start`, `end`, `mode = immediate | state_matched`,
//!   `tolerance`, `contamination`, `ramp`
//! - `detector`: `window`, `threshold` (a number, or `calibrated`),
//!   `margin`, `transient`
//! - `montecarlo`: `runs`, `base_seed`, `calibration_runs`, `calibration_seed`
//! - `output`: `dir`

use std::io;
use std::path::{Path, PathBuf};

use super::config::ConfigDoc;
use super::report::DesignArtifact;
use super::robot::{builtin_robot_model, published_initial_gains, published_optimized_gains};
use crate::codesign::{algorithm1, algorithm2, bootstrap_gains, DesignOptions, DesignReport};
use crate::detection::{
    d_index, monitoring_signal, verdict, DetectionReport, DetectorConfig, MonitoringSignal, RunRecord, ThresholdMode,
    MIN_CALIBRATION_TRACES,
};
use crate::error::{Error, Result};
use crate::gains::LoopMatrices;
use crate::linalg::Matrix;
use crate::parallel::{map_indexed, Execution};
use crate::plant::NonlinearPlant;
use crate::sim::{
    simulate, write_trace_csv, AttackScenario, ClosedLoopConfig, ClosedLoopTrace, Contamination, InitialState,
    NoiseConfig, StartMode,
};
use crate::watermark::{ChaoticWatermark, WatermarkSource, CALIBRATION_TARGET};

/// XOR-ed into the run seed to derive the watermark stream, so noise and
/// watermark draws never share a keystream.
const WATERMARK_STREAM: u64 = 0x5741_5445_524d_4b31;

const SCHEMA: &[(&str, &[&str])] = &[
    ("model", &["kind"]),
    ("gains", &["source", "path"]),
    ("design", &["algorithm", "alpha", "beta0", "iterations", "g_init", "epsilon", "eps1"]),
    ("watermark", &["kind", "dwell", "lambda", "pilot", "min_window", "target"]),
    ("simulation", &["step", "horizon", "noise", "omega_bound", "nu_bound", "settle", "initial"]),
    ("attack", &["enabled", "start", "end", "mode", "tolerance", "contamination", "ramp"]),
    ("detector", &["window", "threshold", "margin", "transient"]),
    ("montecarlo", &["runs", "base_seed", "calibration_runs", "calibration_seed"]),
    ("output", &["dir"]),
];

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Robot,
    Linear { a: Matrix, b: Matrix, c: Matrix, d: Matrix },
}

impl ModelSpec {
    pub fn build(&self) -> Result<NonlinearPlant> {
        match self {
            Self::Robot => Ok(builtin_robot_model()),
            Self::Linear { a, b, c, d } => NonlinearPlant::linear(a.clone(), b.clone(), c.clone(), d.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GainSource {
    /// Bootstrap `(K₀, L₀)` from the LMI initialization, with `G = g_init`.
    Bootstrap,
    /// Runs the configured design algorithm.
    Optimized,
    PublishedInitial,
    PublishedOptimized,
    Explicit { k: Matrix, l: Matrix, g: Matrix },
    Report(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Watermark gain only, with the bootstrap `K₀, L₀` fixed.
    One,
    /// Joint design of `K, L, G`.
    Two,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSettings {
    pub algorithm: Algorithm,
    pub alpha: f64,
    pub beta0: f64,
    pub iterations: usize,
    pub g_init: f64,
    pub options: DesignOptions,
}

impl Default for DesignSettings {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Two,
            alpha: 4.0,
            beta0: 0.01,
            iterations: 30,
            g_init: 1.0,
            options: DesignOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WatermarkSpec {
    None,
    Bernoulli { dwell: f64 },
    /// Rössler oscillator; `lambda = None` calibrates the output scale on a
    /// pilot run so the worst running power is `target`.
    Chaotic { lambda: Option<f64>, pilot: f64, min_window: f64, target: f64 },
}

impl WatermarkSpec {
    pub fn chaotic() -> Self {
        Self::Chaotic {
            lambda: None,
            pilot: 1000.0,
            min_window: 10.0,
            target: CALIBRATION_TARGET,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Bernoulli { .. } => "bernoulli",
            Self::Chaotic { .. } => "chaotic",
        }
    }

    /// Builds the source for an `m`-input plant.
    pub fn build(&self, m: usize, step: f64) -> Result<WatermarkSource> {
        match self {
            Self::None => Ok(WatermarkSource::None { m }),
            Self::Bernoulli { dwell } => Ok(WatermarkSource::Bernoulli { m, dwell: *dwell, seed: 0 }),
            Self::Chaotic { lambda, pilot, min_window, target } => {
                if m != 1 {
                    return Err(Error::InvalidArgument(format!(
                        "the chaotic watermark drives one input, plant has {m}"
                    )));
                }
                let base = ChaoticWatermark::rossler_prototype4();
                let w = match lambda {
                    Some(l) => base.with_lambda(Matrix::from_row_slice(1, 3, &[*l, 0.0, 0.0]))?,
                    None => base.calibrated(step, *pilot, *min_window, *target)?,
                };
                Ok(WatermarkSource::Chaotic(w))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub step: f64,
    pub horizon: f64,
    pub omega_bound: f64,
    pub nu_bound: f64,
    pub settle: f64,
    pub initial: InitialState,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            step: 1e-3,
            horizon: 100.0,
            omega_bound: 0.05,
            nu_bound: 0.05,
            settle: 0.0,
            initial: InitialState::Equilibrium,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub gains: GainSource,
    pub design: DesignSettings,
    pub watermark: WatermarkSpec,
    pub sim: SimSettings,
    pub attack: Option<AttackScenario>,
    pub detector: DetectorConfig,
    pub runs: usize,
    pub base_seed: u64,
    pub calibration_runs: usize,
    /// First calibration seed; defaults to `base_seed + 1_000_000`, disjoint
    /// from the study seeds for any practical run count.
    pub calibration_seed: Option<u64>,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    /// The robot study: optimized gains, chaotic watermark, replay at 70 s.
    fn default() -> Self {
        Self {
            model: ModelSpec::Robot,
            gains: GainSource::Optimized,
            design: DesignSettings::default(),
            watermark: WatermarkSpec::chaotic(),
            sim: SimSettings::default(),
            attack: Some(AttackScenario::replay_at(70.0)),
            detector: DetectorConfig::default(),
            runs: 100,
            base_seed: 0,
            calibration_runs: 10,
            calibration_seed: None,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be ≥ 1".into()));
        }
        if let GainSource::Report(p) = &self.gains {
            if !p.is_file() {
                return Err(Error::InvalidArgument(format!("design report {} does not exist", p.display())));
            }
        }
        if matches!(self.detector.threshold, ThresholdMode::Calibrated { .. })
            && self.calibration_runs < MIN_CALIBRATION_TRACES
        {
            return Err(Error::EmptyCalibrationSet {
                needed: MIN_CALIBRATION_TRACES,
                got: self.calibration_runs,
            });
        }
        self.detector.validate()
    }

    pub fn calibration_seed(&self) -> u64 {
        self.calibration_seed.unwrap_or(self.base_seed.wrapping_add(1_000_000))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let doc = ConfigDoc::read(path)?;
        Self::from_doc(&doc, path.parent().unwrap_or(Path::new(".")))
    }

    /// Reads a parsed document; relative paths resolve against `base_dir`.
    pub fn from_doc(doc: &ConfigDoc, base_dir: &Path) -> Result<Self> {
        doc.check_schema(SCHEMA)?;
        let mut c = Self::default();
        let err = |s: &str, k: &str, msg: String| doc.error(doc.line_of(s, k), &format!("{s}.{k}"), msg);
        let word = |s: &str, k: &str| doc.get::<String>(s, k);
        let need_matrix = |name: &str, section: &str| {
            doc.matrix(name)
                .cloned()
                .ok_or_else(|| doc.error(doc.line_of(section, "kind"), name, "missing matrix section"))
        };

        match word("model", "kind")?.as_deref() {
            None | Some("robot") => {}
            Some("linear") => {
                c.model = ModelSpec::Linear {
                    a: need_matrix("A", "model")?,
                    b: need_matrix("B", "model")?,
                    c: need_matrix("C", "model")?,
                    d: need_matrix("D", "model")?,
                }
            }
            Some(o) => return Err(err("model", "kind", format!("unknown model '{o}'"))),
        }

        c.gains = match word("gains", "source")?.as_deref() {
            None | Some("optimized") => GainSource::Optimized,
            Some("bootstrap") => GainSource::Bootstrap,
            Some("published_initial") => GainSource::PublishedInitial,
            Some("published_optimized") => GainSource::PublishedOptimized,
            Some("matrices") => GainSource::Explicit {
                k: need_matrix("K", "gains")?,
                l: need_matrix("L", "gains")?,
                g: need_matrix("G", "gains")?,
            },
            Some("report") => {
                let p: String = doc
                    .get("gains", "path")?
                    .ok_or_else(|| err("gains", "path", "required for source = report".into()))?;
                let p = base_dir.join(p);
                if !p.is_file() {
                    return Err(err("gains", "path", format!("{} does not exist", p.display())));
                }
                GainSource::Report(p)
            }
            Some(o) => return Err(err("gains", "source", format!("unknown gain source '{o}'"))),
        };
        if matches!(c.gains, GainSource::PublishedInitial | GainSource::PublishedOptimized) && c.model != ModelSpec::Robot {
            return Err(err("gains", "source", "published gains exist for the robot model only".into()));
        }

        let d = &mut c.design;
        d.algorithm = match doc.get_or::<u32>("design", "algorithm", 2)? {
            1 => Algorithm::One,
            2 => Algorithm::Two,
            o => return Err(err("design", "algorithm", format!("must be 1 or 2, got {o}"))),
        };
        d.alpha = doc.real("design", "alpha", d.alpha)?;
        d.beta0 = doc.real("design", "beta0", d.beta0)?;
        d.iterations = doc.get_or("design", "iterations", d.iterations)?;
        d.g_init = doc.real("design", "g_init", d.g_init)?;
        d.options.epsilon = doc.real("design", "epsilon", d.options.epsilon)?;
        d.options.eps1 = doc.real("design", "eps1", d.options.eps1)?;
        for (k, v) in [("alpha", d.alpha), ("epsilon", d.options.epsilon), ("eps1", d.options.eps1)] {
            if v <= 0.0 {
                return Err(err("design", k, format!("must be > 0, got {v}")));
            }
        }

        c.watermark = match word("watermark", "kind")?.as_deref() {
            None | Some("chaotic") => {
                let lambda = doc.get::<f64>("watermark", "lambda")?;
                WatermarkSpec::Chaotic {
                    lambda,
                    pilot: doc.real("watermark", "pilot", 1000.0)?,
                    min_window: doc.real("watermark", "min_window", 10.0)?,
                    target: doc.real("watermark", "target", CALIBRATION_TARGET)?,
                }
            }
            Some("bernoulli") => {
                let dwell = doc.real("watermark", "dwell", 0.1)?;
                if dwell <= 0.0 {
                    return Err(err("watermark", "dwell", format!("must be > 0, got {dwell}")));
                }
                WatermarkSpec::Bernoulli { dwell }
            }
            Some("none") => WatermarkSpec::None,
            Some(o) => return Err(err("watermark", "kind", format!("unknown watermark '{o}'"))),
        };

        let s = &mut c.sim;
        s.step = doc.real("simulation", "step", s.step)?;
        s.horizon = doc.real("simulation", "horizon", s.horizon)?;
        let noise = doc.real("simulation", "noise", s.omega_bound)?;
        s.omega_bound = doc.real("simulation", "omega_bound", noise)?;
        s.nu_bound = doc.real("simulation", "nu_bound", noise)?;
        s.settle = doc.real("simulation", "settle", s.settle)?;
        s.initial = match word("simulation", "initial")?.as_deref() {
            None | Some("equilibrium") => InitialState::Equilibrium,
            Some("zero") => InitialState::Zero,
            Some(o) => return Err(err("simulation", "initial", format!("unknown initial state '{o}'"))),
        };
        for (k, v, strict) in [
            ("step", s.step, true),
            ("horizon", s.horizon, true),
            ("omega_bound", s.omega_bound, false),
            ("nu_bound", s.nu_bound, false),
            ("settle", s.settle, false),
        ] {
            if v < 0.0 || (strict && v == 0.0) {
                return Err(err("simulation", k, format!("out of range: {v}")));
            }
        }

        if doc.get_or("attack", "enabled", true)? {
            let mut a = AttackScenario::replay_at(doc.real("attack", "start", 70.0)?);
            a.replay_end = doc.get("attack", "end")?;
            a.start_mode = match word("attack", "mode")?.as_deref() {
                None | Some("immediate") => StartMode::Immediate,
                Some("state_matched") => StartMode::StateMatched {
                    tolerance: doc.real("attack", "tolerance", 1e-2)?,
                },
                Some(o) => return Err(err("attack", "mode", format!("unknown start mode '{o}'"))),
            };
            a.contamination = match (doc.get::<f64>("attack", "contamination")?, doc.get::<f64>("attack", "ramp")?) {
                (Some(_), Some(_)) => {
                    return Err(err("attack", "ramp", "contamination and ramp are exclusive".into()));
                }
                (_, Some(slope)) => Contamination::Ramp { slope },
                (Some(0.0), None) => Contamination::None,
                (Some(v), None) => Contamination::Constant(v),
                (None, None) => a.contamination,
            };
            c.attack = Some(a);
        } else {
            c.attack = None;
        }

        let det = &mut c.detector;
        det.window = doc.real("detector", "window", det.window)?;
        det.transient = doc.real("detector", "transient", det.transient)?;
        let margin = doc.real("detector", "margin", 0.1)?;
        det.threshold = match word("detector", "threshold")?.as_deref() {
            None | Some("calibrated") => ThresholdMode::Calibrated { margin },
            Some(v) => match v.parse::<f64>() {
                Ok(t) if t >= 0.0 && t.is_finite() => ThresholdMode::Manual(t),
                _ => return Err(err("detector", "threshold", format!("expected a number ≥ 0 or 'calibrated', got '{v}'"))),
            },
        };

        c.runs = doc.get_or("montecarlo", "runs", c.runs)?;
        if c.runs == 0 {
            return Err(err("montecarlo", "runs", "must be ≥ 1".into()));
        }
        c.base_seed = doc.get_or("montecarlo", "base_seed", c.base_seed)?;
        c.calibration_runs = doc.get_or("montecarlo", "calibration_runs", c.calibration_runs)?;
        c.calibration_seed = doc.get("montecarlo", "calibration_seed")?;
        c.output = doc.get::<String>("output", "dir")?.map(|p| base_dir.join(p));

        c.detector
            .validate()
            .map_err(|e| doc.error(doc.line_of("detector", "window"), "detector", e.to_string()))?;
        Ok(c)
    }
}

/// Gains of a study, with the design that produced them when one was run.
#[derive(Debug, Clone)]
pub struct ResolvedGains {
    pub gains: LoopMatrices,
    pub design: Option<DesignReport>,
}

/// Runs the configured design algorithm.
pub fn run_design(plant: &NonlinearPlant, s: &DesignSettings) -> Result<DesignReport> {
    let m = plant.m();
    let g0 = Matrix::identity(m, m) * s.g_init;
    match s.algorithm {
        Algorithm::Two => algorithm2(plant, &g0, s.alpha, s.beta0, s.iterations, &s.options),
        Algorithm::One => {
            let (k0, _, l0, _) = bootstrap_gains(plant, &g0, s.alpha, &s.options)?;
            algorithm1(plant, &k0, &l0, &g0, None, s.alpha, s.iterations, &s.options)
        }
    }
}

pub fn resolve_gains(plant: &NonlinearPlant, config: &ExperimentConfig) -> Result<ResolvedGains> {
    let eps = config.design.options.epsilon;
    let plain = |k, l, g| -> Result<ResolvedGains> {
        let gains = LoopMatrices::new(k, l, g, eps)?;
        gains.check(plant)?;
        Ok(ResolvedGains { gains, design: None })
    };
    match &config.gains {
        GainSource::Bootstrap => {
            let m = plant.m();
            let g0 = Matrix::identity(m, m) * config.design.g_init;
            let (k, _, l, _) = bootstrap_gains(plant, &g0, config.design.alpha, &config.design.options)?;
            plain(k, l, g0)
        }
        GainSource::Optimized => {
            let report = run_design(plant, &config.design)?;
            Ok(ResolvedGains {
                gains: report.gains.clone(),
                design: Some(report),
            })
        }
        GainSource::PublishedInitial => {
            let (k, l, g) = published_initial_gains();
            plain(k, l, g)
        }
        GainSource::PublishedOptimized => {
            let (k, l, g) = published_optimized_gains();
            plain(k, l, g)
        }
        GainSource::Explicit { k, l, g } => plain(k.clone(), l.clone(), g.clone()),
        GainSource::Report(path) => {
            let a = DesignArtifact::load(path)?;
            plain(a.gains.k, a.gains.l, a.gains.g)
        }
    }
}

/// Everything a study needs, resolved once and shared by all runs.
#[derive(Debug, Clone)]
pub struct Study {
    pub config: ExperimentConfig,
    pub plant: NonlinearPlant,
    pub gains: LoopMatrices,
    pub design: Option<DesignReport>,
    pub watermark: WatermarkSource,
}

impl Study {
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let plant = config.model.build()?;
        let ResolvedGains { gains, design } = resolve_gains(&plant, config)?;
        Self::with_gains(config, plant, gains, design)
    }

    /// A study with gains supplied by the caller (the gain source of the
    /// config is ignored).
    pub fn with_gains(
        config: &ExperimentConfig,
        plant: NonlinearPlant,
        gains: LoopMatrices,
        design: Option<DesignReport>,
    ) -> Result<Self> {
        config.validate()?;
        gains.check(&plant)?;
        let watermark = config.watermark.build(plant.m(), config.sim.step)?;
        Ok(Self {
            config: config.clone(),
            plant,
            gains,
            design,
            watermark,
        })
    }

    /// Closed-loop configuration of one run; `attack = false` gives the
    /// attack-free run used for calibration.
    pub fn closed_loop(&self, seed: u64, attack: bool) -> ClosedLoopConfig {
        let s = &self.config.sim;
        let mut c = ClosedLoopConfig::new(self.plant.clone(), self.gains.clone());
        c.step = s.step;
        c.horizon = s.horizon;
        c.noise = NoiseConfig {
            omega_bound: s.omega_bound,
            nu_bound: s.nu_bound,
            seed,
        };
        c.settle = s.settle;
        c.initial = s.initial.clone();
        c.watermark = self.watermark.with_seed(seed ^ WATERMARK_STREAM);
        c.attack = if attack { self.config.attack } else { None };
        c
    }

    pub fn simulate_run(&self, seed: u64, attack: bool) -> Result<(ClosedLoopTrace, MonitoringSignal)> {
        let trace = simulate(&self.closed_loop(seed, attack))?;
        let g = monitoring_signal(&trace, self.config.detector.window)?;
        Ok((trace, g))
    }

    /// Maximum of `g` after the transient over the attack-free calibration
    /// runs.
    pub fn calibration_max(&self, exec: Execution) -> Result<f64> {
        let cfg = &self.config;
        let base = cfg.calibration_seed();
        let maxima = map_indexed(cfg.calibration_runs, exec, |j| -> Result<f64> {
            let (_, g) = self.simulate_run(base.wrapping_add(j as u64), false).map_err(|e| Error::Run {
                run: j,
                source: Box::new(e),
            })?;
            Ok(g.max_over(cfg.detector.transient, f64::INFINITY))
        });
        let maxima = maxima.into_iter().collect::<Result<Vec<f64>>>()?;
        if maxima.len() < MIN_CALIBRATION_TRACES {
            return Err(Error::EmptyCalibrationSet {
                needed: MIN_CALIBRATION_TRACES,
                got: maxima.len(),
            });
        }
        Ok(maxima.into_iter().fold(0.0, f64::max))
    }

    pub fn threshold(&self, exec: Execution) -> Result<f64> {
        match self.config.detector.threshold {
            ThresholdMode::Manual(t) => Ok(t),
            ThresholdMode::Calibrated { margin } => Ok((1.0 + margin) * self.calibration_max(exec)?),
        }
    }

    /// Verdict and D index of one run against `threshold`.
    pub fn evaluate(&self, run: usize, seed: u64, g: &MonitoringSignal, threshold: f64) -> RunRecord {
        let cfg = &self.config;
        let onset = cfg.attack.map(|a| a.replay_start);
        let v = verdict(g, threshold, onset, cfg.detector.transient);
        let d = onset.and_then(|t| {
            d_index(g, (cfg.detector.transient, t - 1.0), (t, cfg.sim.horizon)).ok()
        });
        RunRecord {
            run,
            seed,
            detected: v.detected,
            delay: v.delay,
            false_positive: v.false_positive,
            d_index: d,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloOutcome {
    pub report: DetectionReport,
    /// Trace and monitoring signal of run 0, for plotting.
    pub sample: Option<(ClosedLoopTrace, MonitoringSignal)>,
}

/// Runs the study: threshold (calibrated or manual), then `runs` attacked
/// simulations with seeds `base_seed + run`.
pub fn run_study(study: &Study, exec: Execution) -> Result<MonteCarloOutcome> {
    let threshold = study.threshold(exec)?;
    let cfg = &study.config;
    let results = map_indexed(cfg.runs, exec, |run| -> Result<(RunRecord, Option<(ClosedLoopTrace, MonitoringSignal)>)> {
        let seed = cfg.base_seed.wrapping_add(run as u64);
        let (trace, g) = study.simulate_run(seed, true).map_err(|e| Error::Run {
            run,
            source: Box::new(e),
        })?;
        let rec = study.evaluate(run, seed, &g, threshold);
        Ok((rec, (run == 0).then_some((trace, g))))
    });
    let mut records = Vec::with_capacity(cfg.runs);
    let mut sample = None;
    for r in results {
        let (rec, s) = r?;
        records.push(rec);
        if s.is_some() {
            sample = s;
        }
    }
    Ok(MonteCarloOutcome {
        report: DetectionReport::new(records, threshold),
        sample,
    })
}

/// Resolves the configuration and runs the study.
pub fn run_montecarlo(config: &ExperimentConfig, exec: Execution) -> Result<MonteCarloOutcome> {
    run_study(&Study::prepare(config)?, exec)
}

pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SAMPLE_TRACE_FILE: &str = "trace_run0.csv";

/// Writes `runs.csv`, `summary.csv` and (when available) the run-0 trace
/// with its monitoring signal into `dir`.
pub fn write_montecarlo_artifacts(outcome: &MonteCarloOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    let create = |name: &str| -> Result<(PathBuf, io::BufWriter<std::fs::File>)> {
        let p = dir.join(name);
        Ok((p.clone(), io::BufWriter::new(std::fs::File::create(p)?)))
    };
    let (p, f) = create(RUNS_FILE)?;
    outcome.report.write_csv(f)?;
    paths.push(p);
    let (p, f) = create(SUMMARY_FILE)?;
    outcome.report.write_summary_csv(f)?;
    paths.push(p);
    if let Some((trace, g)) = &outcome.sample {
        let (p, f) = create(SAMPLE_TRACE_FILE)?;
        write_trace_csv(trace, Some(&g.values), f)?;
        paths.push(p);
    }
    Ok(paths)
}
