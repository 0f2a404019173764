use std::path::PathBuf;

use wmguard::bench::{
    beta_rows, read_beta_trace_csv, run_design, run_montecarlo, write_beta_trace_csv, write_design_report,
    write_montecarlo_artifacts, Algorithm, ConfigDoc, DesignArtifact, DesignSettings, ExperimentConfig, RUNS_FILE,
    SAMPLE_TRACE_FILE, SUMMARY_FILE,
};
use wmguard::codesign::vertex_stability;
use wmguard::detection::DetectionReport;
use wmguard::parallel::Execution;
use wmguard::sim::read_trace_csv;
use wmguard::Error;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn scalar_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::load(&configs().join("scalar.cfg")).unwrap();
    c.runs = 6;
    c
}

#[test]
fn shipped_configs_load() {
    for name in ["robot.cfg", "scalar.cfg"] {
        let c = ExperimentConfig::load(&configs().join(name)).unwrap();
        c.validate().unwrap();
    }
}

fn config_error(text: &str) -> (usize, String) {
    let doc = ConfigDoc::parse(text, "t.cfg").unwrap();
    match ExperimentConfig::from_doc(&doc, &configs()) {
        Err(Error::Config { line, field, .. }) => (line, field),
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn config_errors_point_at_the_field() {
    assert_eq!(config_error("[simulation]\nstep = fast\n"), (2, "simulation.step".into()));
    assert_eq!(config_error("[simulation]\nhorizon = 10\nstpe = 1\n"), (3, "simulation.stpe".into()));
    assert_eq!(config_error("\n[bogus]\n").0, 2);
    let (line, field) = config_error("[watermark]\nkind = sawtooth\n");
    assert_eq!((line, field.as_str()), (2, "watermark.kind"));
}

#[test]
fn design_report_round_trips() {
    let plant = scalar_config().model.build().unwrap();
    let report = run_design(&plant, &scalar_config().design).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (trace, design) = write_design_report(&report, dir.path()).unwrap();
    let rows = read_beta_trace_csv(std::fs::File::open(trace).unwrap()).unwrap();
    assert_eq!(rows, beta_rows(&report));
    let art = DesignArtifact::load(&design).unwrap();
    assert_eq!(art, DesignArtifact::from(&report));

    let mut buf = Vec::new();
    write_beta_trace_csv(&rows, &mut buf).unwrap();
    assert!(String::from_utf8(buf).unwrap().starts_with("iter,beta,margin,status\n"));
}

#[test]
fn robot_codesign_improves_on_watermark_only_design() {
    let cfg = ExperimentConfig::default();
    let plant = cfg.model.build().unwrap();
    let joint = run_design(&plant, &cfg.design).unwrap();
    let only = run_design(
        &plant,
        &DesignSettings {
            algorithm: Algorithm::One,
            ..cfg.design.clone()
        },
    )
    .unwrap();
    for r in [&joint, &only] {
        let b = r.betas();
        assert!(b.windows(2).all(|w| w[1] >= w[0] - 1e-5), "{b:?}");
        assert!(r.final_beta() <= r.alpha + 1e-5);
    }
    assert!(joint.final_beta() > only.final_beta(), "{} vs {}", joint.final_beta(), only.final_beta());
    let (ctrl, obs) = vertex_stability(&plant, &joint.gains.k, &joint.gains.l).unwrap();
    assert!(ctrl && obs);
}

#[test]
fn montecarlo_is_identical_in_both_execution_modes() {
    let c = scalar_config();
    let a = run_montecarlo(&c, Execution::Sequential).unwrap();
    let b = run_montecarlo(&c, Execution::Parallel).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.report.runs.len(), c.runs);
}

#[test]
fn montecarlo_artifacts_round_trip() {
    let c = scalar_config();
    let out = run_montecarlo(&c, Execution::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_montecarlo_artifacts(&out, dir.path()).unwrap();
    for f in [RUNS_FILE, SUMMARY_FILE, SAMPLE_TRACE_FILE] {
        assert!(paths.contains(&dir.path().join(f)), "{f} missing");
    }
    let runs = std::fs::File::open(dir.path().join(RUNS_FILE)).unwrap();
    let back = DetectionReport::read_csv(runs, out.report.threshold).unwrap();
    assert_eq!(back, out.report);

    let table = read_trace_csv(std::fs::File::open(dir.path().join(SAMPLE_TRACE_FILE)).unwrap()).unwrap();
    let (trace, g) = out.sample.as_ref().unwrap();
    assert_eq!(table.column("t").unwrap().len(), trace.len());
    assert_eq!(table.column("g").unwrap(), g.values);
}
