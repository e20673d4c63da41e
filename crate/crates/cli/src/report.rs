//! On-disk formats: certificate JSON, trajectory CSV, simulation report JSON.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use netcbc_core::simulator::{StepEnvelope, TrajectoryRow};
use netcbc_core::{FeedbackGain, QuadraticCbc, SimulationReport, SynthesisResult};
use serde::{Deserialize, Serialize};

use crate::config::{from_dmatrix, to_dmatrix, Matrix, SimulationSection, VariantName};
use crate::error::{io_error, CliError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantEcho {
    pub a: Matrix,
    pub b: Matrix,
    /// Sampling time when the plant came from the motor model.
    pub ts: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub variant: VariantName,
    pub p: Matrix,
    pub gain: Matrix,
    pub eta: f64,
    pub beta: f64,
    pub beta_certified: bool,
    pub c: f64,
    pub horizon: usize,
    pub epsilon: f64,
    pub epsilon_raw: f64,
    pub guarantee: f64,
    pub mu_theta: f64,
    pub mu_phi: f64,
    pub sigma_w: Matrix,
    pub residual_max_eig: f64,
    /// Spectral radius of the drift operator at `gain`, when synthesized.
    pub rho: Option<f64>,
    pub lyapunov_rhs: Option<Matrix>,
    pub scale: Option<f64>,
    pub condition_estimate: Option<f64>,
    pub ill_conditioned: Option<bool>,
    pub input_lower: Vec<f64>,
    pub input_upper: Vec<f64>,
    pub plant: PlantEcho,
    pub search_trace: Vec<f64>,
    pub refine_trace: Vec<f64>,
}

impl CertificateFile {
    pub fn from_cbc(
        cbc: &QuadraticCbc,
        gain: &FeedbackGain,
        horizon: usize,
        bound: netcbc_core::ProbabilityBound,
        input: &netcbc_core::BoxRegion,
        plant: PlantEcho,
    ) -> Self {
        Self {
            variant: cbc.variant.into(),
            p: from_dmatrix(&cbc.p),
            gain: from_dmatrix(gain.matrix()),
            eta: cbc.eta,
            beta: cbc.beta,
            beta_certified: cbc.beta_certified,
            c: cbc.c,
            horizon,
            epsilon: bound.epsilon,
            epsilon_raw: bound.raw,
            guarantee: bound.guarantee(),
            mu_theta: cbc.mu_theta,
            mu_phi: cbc.mu_phi,
            sigma_w: from_dmatrix(&cbc.sigma_w),
            residual_max_eig: cbc.residual_max_eig,
            rho: None,
            lyapunov_rhs: None,
            scale: None,
            condition_estimate: None,
            ill_conditioned: None,
            input_lower: input.lower().to_vec(),
            input_upper: input.upper().to_vec(),
            plant,
            search_trace: Vec::new(),
            refine_trace: Vec::new(),
        }
    }

    pub fn from_synthesis(
        result: &SynthesisResult,
        horizon: usize,
        input: &netcbc_core::BoxRegion,
        plant: PlantEcho,
    ) -> Self {
        let mut file = Self::from_cbc(&result.cbc, &result.gain, horizon, result.bound, input, plant);
        file.rho = Some(result.rho);
        file.lyapunov_rhs = Some(from_dmatrix(&result.q));
        file.scale = Some(result.scale);
        file.condition_estimate = Some(result.condition_estimate);
        file.ill_conditioned = Some(result.ill_conditioned);
        file.search_trace = result.trace.clone();
        file.refine_trace = result.refine_trace.clone();
        file
    }

    pub fn p_matrix(&self) -> Result<DMatrix<f64>, CliError> {
        to_dmatrix(&self.p, "certificate.p")
    }

    pub fn gain_matrix(&self) -> Result<FeedbackGain, CliError> {
        Ok(FeedbackGain::new(to_dmatrix(&self.gain, "certificate.gain")?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes") + "\n"
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|source| CliError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Gain-only input for `simulate`: either a certificate file or a bare matrix.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GainSource {
    Certificate(Box<CertificateFile>),
    Bare { gain: Matrix },
}

impl GainSource {
    pub fn load(path: &Path) -> Result<(FeedbackGain, Option<f64>), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let source: GainSource = serde_json::from_str(&text).map_err(|source| CliError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        match source {
            GainSource::Certificate(c) => Ok((c.gain_matrix()?, Some(c.epsilon))),
            GainSource::Bare { gain } => Ok((FeedbackGain::new(to_dmatrix(&gain, "gain")?), None)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeEcho {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl From<&StepEnvelope> for EnvelopeEcho {
    fn from(e: &StepEnvelope) -> Self {
        Self {
            min: e.min.clone(),
            max: e.max.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationFile {
    pub mode: String,
    pub config: SimulationSection,
    pub trajectories: usize,
    pub horizon: usize,
    pub seed: u64,
    pub violations: usize,
    pub exits: usize,
    pub empirical_p: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub confidence: f64,
    pub bound_epsilon: Option<f64>,
    pub bound_flagged: bool,
    pub bound_breached: bool,
    pub first_violation_steps: Vec<usize>,
    pub per_step_envelope: Vec<EnvelopeEcho>,
}

impl SimulationFile {
    pub fn new(report: &SimulationReport, config: &SimulationSection, mode: &str) -> Self {
        Self {
            mode: mode.to_string(),
            config: config.clone(),
            trajectories: report.trajectories,
            horizon: report.horizon,
            seed: report.seed,
            violations: report.violations,
            exits: report.exits,
            empirical_p: report.empirical_p,
            ci_lower: report.ci_lower,
            ci_upper: report.ci_upper,
            confidence: netcbc_core::simulator::CONFIDENCE,
            bound_epsilon: report.bound_epsilon,
            bound_flagged: report.bound_flagged(),
            bound_breached: report.bound_breached(),
            first_violation_steps: report.first_violation_steps.clone(),
            per_step_envelope: report.per_step_envelope.iter().map(Into::into).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn flag(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "1",
        Some(false) => "0",
        None => "",
    }
}

/// One row per (trajectory, step).
pub fn trajectories_csv(records: &[Vec<TrajectoryRow>], n: usize, m: usize) -> String {
    let mut out = String::from("trajectory,k");
    for (prefix, dim) in [("x", n), ("x_hat", n), ("u", m), ("u_hat", m)] {
        for i in 1..=dim {
            let _ = write!(out, ",{prefix}{i}");
        }
    }
    out.push_str(",theta,phi,violated\n");
    for (t, rows) in records.iter().enumerate() {
        for row in rows {
            let _ = write!(out, "{t},{}", row.k);
            let s = &row.state;
            for v in s.x.iter().chain(&s.x_hat).chain(&s.u).chain(&s.u_hat) {
                let _ = write!(out, ",{v:e}");
            }
            let _ = writeln!(
                out,
                ",{},{},{}",
                flag(row.theta),
                flag(row.phi),
                u8::from(row.violated)
            );
        }
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(io_error(dir))?;
        }
    }
    std::fs::write(path, text).map_err(io_error(path))
}

/// `1 − ε` truncated (not rounded) to four decimals, so the printed figure
/// never overstates the guarantee.
pub fn guarantee_floor(guarantee: f64) -> f64 {
    (guarantee * 1e4 + 1e-9).floor() / 1e4
}

pub fn format_guarantee(guarantee: f64) -> String {
    format!("guarantee ≥ {:.4}", guarantee_floor(guarantee))
}
