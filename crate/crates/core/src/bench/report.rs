//! Design-report files (β trace CSV plus matrices in the config format) and
//! certificate verification.

use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ConfigDoc, ConfigWriter};
use crate::codesign::{DesignMode, DesignReport};
use crate::error::Result;
use crate::gains::{
    lti_frequency_gain_oracle, default_grid, performance_channel, random_trajectory_pairs, verify_dissipation,
    watermark_channel, CertificateKind, DissipationReport, GainCertificate, GainKind, LoopMatrices, PairOptions,
};
use crate::linalg::SymmetricMatrix;
use crate::parallel::Execution;
use crate::plant::NonlinearPlant;
use crate::sdp::SolveStatus;

pub const BETA_TRACE_FILE: &str = "beta_trace.csv";
pub const DESIGN_FILE: &str = "design.cfg";

/// One row of the β trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaRow {
    pub iter: usize,
    pub beta: f64,
    pub margin: f64,
    pub status: SolveStatus,
}

pub fn beta_rows(report: &DesignReport) -> Vec<BetaRow> {
    report
        .iterations
        .iter()
        .map(|r| BetaRow {
            iter: r.index,
            beta: r.beta,
            margin: r.margin,
            status: r.status,
        })
        .collect()
}

/// CSV with columns `iter, beta, margin, status`.
pub fn write_beta_trace_csv<W: io::Write>(rows: &[BetaRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_beta_trace_csv<R: io::Read>(input: R) -> Result<Vec<BetaRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// The part of a design needed downstream: gains and both certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignArtifact {
    pub mode: DesignMode,
    pub alpha: f64,
    pub gains: LoopMatrices,
    /// Minus-kind certificate `(Q, β)` of the watermark-to-estimate channel.
    pub detection: GainCertificate,
    /// Plus-kind certificate `(P_s⁻¹, α)` of the watermark-to-output channel.
    pub performance: GainCertificate,
    pub converged: bool,
}

impl From<&DesignReport> for DesignArtifact {
    fn from(r: &DesignReport) -> Self {
        Self {
            mode: r.mode,
            alpha: r.alpha,
            gains: r.gains.clone(),
            detection: r.detection.clone(),
            performance: r.performance.clone(),
            converged: r.converged,
        }
    }
}

fn mode_name(m: DesignMode) -> &'static str {
    match m {
        DesignMode::WatermarkOnly => "watermark_only",
        DesignMode::CoDesign => "codesign",
    }
}

impl DesignArtifact {
    pub fn to_text(&self) -> String {
        let mut w = ConfigWriter::new();
        w.section("design")
            .entry("mode", mode_name(self.mode))
            .entry("alpha", format!("{:?}", self.alpha))
            .entry("epsilon", format!("{:?}", self.gains.epsilon))
            .entry("converged", self.converged);
        w.section("certificate")
            .entry("detection_gamma", format!("{:?}", self.detection.gamma_sq()))
            .entry("performance_gamma", format!("{:?}", self.performance.gamma_sq()));
        w.matrix("K", &self.gains.k)
            .matrix("L", &self.gains.l)
            .matrix("G", &self.gains.g)
            .matrix("Q", self.detection.lyapunov().as_matrix())
            .matrix("P", self.performance.lyapunov().as_matrix());
        w.finish()
    }

    pub fn from_doc(doc: &ConfigDoc) -> Result<Self> {
        doc.check_schema(&[
            ("design", &["mode", "alpha", "epsilon", "converged"]),
            ("certificate", &["detection_gamma", "performance_gamma"]),
        ])?;
        let mode = match doc.get::<String>("design", "mode")?.as_deref() {
            Some("watermark_only") => DesignMode::WatermarkOnly,
            Some("codesign") | None => DesignMode::CoDesign,
            Some(other) => {
                return Err(doc.error(doc.line_of("design", "mode"), "design.mode", format!("unknown mode '{other}'")))
            }
        };
        let need = |name: &str| {
            doc.matrix(name)
                .cloned()
                .ok_or_else(|| doc.error(0, name, "missing matrix section"))
        };
        let alpha = doc.real("design", "alpha", f64::NAN)?;
        let epsilon = doc.real("design", "epsilon", 1e-3)?;
        let gains = LoopMatrices::new(need("K")?, need("L")?, need("G")?, epsilon)
            .map_err(|e| doc.error(doc.line_of("design", "epsilon"), "gains", e.to_string()))?;
        let cert = |kind, name: &str, key: &str| -> Result<GainCertificate> {
            let line = doc.line_of("certificate", key);
            let gamma = doc
                .get::<f64>("certificate", key)?
                .ok_or_else(|| doc.error(line, &format!("certificate.{key}"), "missing"))?;
            let lyap = SymmetricMatrix::new(need(name)?).map_err(|e| doc.error(0, name, e.to_string()))?;
            GainCertificate::new(kind, lyap, gamma).map_err(|e| doc.error(line, &format!("certificate.{key}"), e.to_string()))
        };
        Ok(Self {
            mode,
            alpha,
            detection: cert(CertificateKind::L2MinusLower, "Q", "detection_gamma")?,
            performance: cert(CertificateKind::L2PlusUpper, "P", "performance_gamma")?,
            gains,
            converged: doc.get_or("design", "converged", false)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_doc(&ConfigDoc::read(path)?)
    }
}

/// Writes `beta_trace.csv` and `design.cfg` into `dir`; returns their paths.
pub fn write_design_report(report: &DesignReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let trace = dir.join(BETA_TRACE_FILE);
    write_beta_trace_csv(&beta_rows(report), std::fs::File::create(&trace)?)?;
    let design = dir.join(DESIGN_FILE);
    std::fs::write(&design, DesignArtifact::from(report).to_text())?;
    Ok((trace, design))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub detection: DissipationReport,
    pub performance: DissipationReport,
    /// Frequency-domain `inf` gain of the watermark channel (LTI plants only).
    pub oracle_inf: Option<f64>,
    /// Frequency-domain `sup` gain of the performance channel (LTI plants only).
    pub oracle_sup: Option<f64>,
    pub detection_gamma: f64,
    pub performance_gamma: f64,
    pub tolerance: f64,
}

impl VerificationReport {
    /// Both dissipation checks hold within tolerance and, when available,
    /// the certified levels are consistent with the frequency-domain gains.
    pub fn passed(&self) -> bool {
        let tol = self.tolerance;
        self.detection.passes(tol)
            && self.performance.passes(tol)
            && self.oracle_inf.is_none_or(|g| self.detection_gamma <= g + tol * (1.0 + g))
            && self.oracle_sup.is_none_or(|g| self.performance_gamma >= g - tol * (1.0 + g))
    }
}

/// Checks both certificates of a design on random trajectory pairs of the
/// corresponding closed-loop channels; for LTI plants also against the
/// frequency-domain oracle.
pub fn verify_design(
    plant: &NonlinearPlant,
    design: &DesignArtifact,
    pairs: usize,
    seed: u64,
    tolerance: f64,
    exec: Execution,
) -> Result<VerificationReport> {
    let det_sys = watermark_channel(plant, &design.gains)?;
    let perf_sys = performance_channel(plant, &design.gains)?;
    let mut opts = PairOptions::new(plant.n());
    opts.count = pairs;
    opts.seed = seed;
    opts.execution = exec;
    let check = |sys: &NonlinearPlant, cert: &GainCertificate| -> Result<DissipationReport> {
        verify_dissipation(cert, &random_trajectory_pairs(sys, &opts)?, exec)
    };
    let detection = check(&det_sys, &design.detection)?;
    let performance = check(&perf_sys, &design.performance)?;
    let (oracle_inf, oracle_sup) = if det_sys.jacobian().num_directions() == 0 {
        let grid = default_grid();
        let oracle = |s: &NonlinearPlant, kind| {
            lti_frequency_gain_oracle(s.jacobian().base(), s.b(), s.c(), s.d(), kind, &grid)
        };
        (Some(oracle(&det_sys, GainKind::Inf)?), Some(oracle(&perf_sys, GainKind::Sup)?))
    } else {
        (None, None)
    };
    Ok(VerificationReport {
        detection,
        performance,
        oracle_inf,
        oracle_sup,
        detection_gamma: design.detection.gamma_sq(),
        performance_gamma: design.performance.gamma_sq(),
        tolerance,
    })
}

impl std::fmt::Display for VerificationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "detection certificate: worst slack {:.3e} over {} pairs",
            self.detection.worst_slack, self.detection.pairs
        )?;
        writeln!(
            f,
            "performance certificate: worst slack {:.3e} over {} pairs",
            self.performance.worst_slack, self.performance.pairs
        )?;
        if let (Some(i), Some(s)) = (self.oracle_inf, self.oracle_sup) {
            writeln!(f, "frequency-domain gains: inf {i:.6}, sup {s:.6}")?;
        }
        Ok(())
    }
}
