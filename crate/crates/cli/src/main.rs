//! `wmguard` command-line front end.
//!
//! Exit codes: 0 success, 1 malformed input or runtime error, 2 infeasible
//! design, 3 validation failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wmguard::bench::{
    beta_rows, run_design, run_study, verify_design, write_design_report, write_montecarlo_artifacts, Algorithm,
    DesignArtifact, ExperimentConfig, Study, WatermarkSpec,
};
use wmguard::detection::ThresholdMode;
use wmguard::parallel::Execution;
use wmguard::sim::write_trace_csv;
use wmguard::Error;

#[derive(Parser, Debug)]
#[command(name = "wmguard", version, about = "Watermark co-design and replay-attack detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment configuration file (defaults to the built-in robot study).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; run `i` uses `seed + i`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run everything on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum WatermarkArg {
    None,
    Bernoulli,
    Chaotic,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the iterative design and write the β trace and gain matrices.
    Design {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
        algorithm: Option<u32>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Simulate one closed-loop run and write its trace as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        watermark: Option<WatermarkArg>,
        /// Simulate without the replay attack.
        #[arg(long)]
        no_attack: bool,
    },
    /// Monte-Carlo detection study.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        watermark: Option<WatermarkArg>,
    },
    /// Check the certificates of a design report on random trajectory pairs.
    VerifyGain {
        #[command(flatten)]
        common: Common,
        /// Design report (`design.cfg`) to verify.
        #[arg(long)]
        report: PathBuf,
        /// Number of trajectory pairs per certificate.
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Calibrate the detector threshold from attack-free runs.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Number of attack-free runs.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        margin: Option<f64>,
    },
}

enum Failure {
    Input(String),
    Infeasible(String),
    Validation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InitInfeasible(_) | Error::SolverFailure { .. } => Failure::Infeasible(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut c = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        c.base_seed = s;
    }
    Ok(c)
}

fn exec(common: &Common) -> Execution {
    if common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn apply_watermark(c: &mut ExperimentConfig, w: Option<WatermarkArg>) {
    match w {
        Some(WatermarkArg::None) => c.watermark = WatermarkSpec::None,
        Some(WatermarkArg::Bernoulli) if !matches!(c.watermark, WatermarkSpec::Bernoulli { .. }) => {
            c.watermark = WatermarkSpec::Bernoulli { dwell: 0.1 }
        }
        Some(WatermarkArg::Chaotic) if !matches!(c.watermark, WatermarkSpec::Chaotic { .. }) => {
            c.watermark = WatermarkSpec::chaotic()
        }
        _ => {}
    }
}

fn out_dir(common: &Common, c: &ExperimentConfig, fallback: &str) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| c.output.clone())
        .unwrap_or_else(|| PathBuf::from(fallback))
}

fn design(common: Common, algorithm: Option<u32>, alpha: Option<f64>, iters: Option<usize>) -> Outcome {
    let mut c = load_config(&common)?;
    match algorithm {
        Some(1) => c.design.algorithm = Algorithm::One,
        Some(_) => c.design.algorithm = Algorithm::Two,
        None => {}
    }
    if let Some(a) = alpha {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Failure::Input(format!("--alpha must be > 0, got {a}")));
        }
        c.design.alpha = a;
    }
    if let Some(n) = iters {
        c.design.iterations = n;
    }
    let plant = c.model.build()?;
    let report = run_design(&plant, &c.design)?;
    let dir = out_dir(&common, &c, "design");
    let (trace, cfg) = write_design_report(&report, &dir)?;
    for r in beta_rows(&report) {
        println!("iter {:>3}  beta {:.6}  margin {:+.3e}  {}", r.iter, r.beta, r.margin, r.status);
    }
    if let Some((i, s)) = report.terminated {
        println!("stopped at iteration {i}: {s}");
    }
    println!("final beta {:.6} (alpha {})", report.final_beta(), report.alpha);
    println!("wrote {} and {}", trace.display(), cfg.display());
    Ok(())
}

fn simulate(common: Common, watermark: Option<WatermarkArg>, no_attack: bool) -> Outcome {
    let mut c = load_config(&common)?;
    apply_watermark(&mut c, watermark);
    let study = Study::prepare(&c)?;
    let (trace, g) = study.simulate_run(c.base_seed, !no_attack)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("trace.csv"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(Error::from)?;
    }
    let f = std::fs::File::create(&out).map_err(Error::from)?;
    write_trace_csv(&trace, Some(&g.values), std::io::BufWriter::new(f))?;
    if trace.onset_fallback {
        println!("state-matched onset not found; replay started at T");
    }
    println!("wrote {} ({} samples)", out.display(), trace.len());
    Ok(())
}

fn montecarlo(common: Common, runs: Option<usize>, watermark: Option<WatermarkArg>) -> Outcome {
    let mut c = load_config(&common)?;
    if let Some(r) = runs {
        if r == 0 {
            return Err(Failure::Input("--runs must be ≥ 1".into()));
        }
        c.runs = r;
    }
    apply_watermark(&mut c, watermark);
    let study = Study::prepare(&c)?;
    let outcome = run_study(&study, exec(&common))?;
    let r = &outcome.report;
    let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
    println!("threshold {:.6e}", r.threshold);
    println!("runs {}  detection rate {:.3}  false positives {:.3}", r.runs.len(), r.rate(), r.false_positive_rate());
    println!("avg delay {}  max delay {}  mean D {}", opt(r.avg_delay()), opt(r.max_delay()), opt(r.mean_d_index()));
    let dir = out_dir(&common, &c, "montecarlo");
    for p in write_montecarlo_artifacts(&outcome, &dir)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn verify_gain(common: Common, report: &Path, pairs: usize, tolerance: f64) -> Outcome {
    let c = load_config(&common)?;
    let plant = c.model.build()?;
    let design = DesignArtifact::load(report)?;
    design.gains.check(&plant)?;
    let v = verify_design(&plant, &design, pairs, c.base_seed, tolerance, exec(&common))?;
    print!("{v}");
    if v.passed() {
        println!("certificates verified");
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "certificate check failed (detection slack {:.3e}, performance slack {:.3e}, tolerance {tolerance:.1e})",
            v.detection.worst_slack, v.performance.worst_slack
        )))
    }
}

fn calibrate(common: Common, runs: Option<usize>, margin: Option<f64>) -> Outcome {
    let mut c = load_config(&common)?;
    if let Some(r) = runs {
        c.calibration_runs = r;
    }
    let margin = match (margin, c.detector.threshold) {
        (Some(m), _) => m,
        (None, ThresholdMode::Calibrated { margin }) => margin,
        (None, ThresholdMode::Manual(_)) => 0.1,
    };
    if !(margin >= 0.0) {
        return Err(Failure::Input(format!("--margin must be ≥ 0, got {margin}")));
    }
    c.detector.threshold = ThresholdMode::Calibrated { margin };
    let study = Study::prepare(&c)?;
    let max = study.calibration_max(exec(&common))?;
    let threshold = (1.0 + margin) * max;
    println!("attack-free max g {max:.6e} over {} runs", c.calibration_runs);
    println!("threshold {threshold:.6e} (margin {margin})");
    if let Some(out) = &common.out {
        let text = format!("[detector]\nthreshold = {threshold:?}\nwindow = {:?}\ntransient = {:?}\n", c.detector.window, c.detector.transient);
        std::fs::write(out, text).map_err(Error::from)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Design { common, algorithm, alpha, iters } => design(common, algorithm, alpha, iters),
        Command::Simulate { common, watermark, no_attack } => simulate(common, watermark, no_attack),
        Command::Montecarlo { common, runs, watermark } => montecarlo(common, runs, watermark),
        Command::VerifyGain { common, report, runs, tolerance } => verify_gain(common, &report, runs, tolerance),
        Command::Calibrate { common, runs, margin } => calibrate(common, runs, margin),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Infeasible(m)) => {
            eprintln!("infeasible design: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Validation(m)) => {
            eprintln!("validation failed: {m}");
            ExitCode::from(3)
        }
    }
}
