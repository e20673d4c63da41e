//! Run configuration as read from JSON. Matrices are row-major nested arrays.
//! Every section has defaults, so `{}` describes the motor case study.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use netcbc_core::simulator::InitMode;
use netcbc_core::synthesis::GainSearchMethod;
use netcbc_core::{
    BoxRegion, CoeffVariant, DtSls, NetworkParams, SafetySpec, SimConfig, SynthesisConfig, Tolerances,
};
use serde::{Deserialize, Serialize};

use crate::error::{io_error, CliError};
use crate::motor::{build_motor, MotorParams};

pub type Matrix = Vec<Vec<f64>>;

pub fn to_dmatrix(rows: &Matrix, what: &str) -> Result<DMatrix<f64>, CliError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Config(format!("{what} must be a non-empty rectangular matrix")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CliError::Config(format!("{what} has non-finite entries")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Matrix {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitPlant {
    pub a: Matrix,
    pub b: Matrix,
    /// Process-noise covariance; identity when omitted.
    #[serde(default)]
    pub sigma_w1: Option<Matrix>,
    /// Measurement-noise covariance; identity when omitted.
    #[serde(default)]
    pub sigma_w2: Option<Matrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantConfig {
    Motor(MotorParams),
    Explicit(ExplicitPlant),
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig::Motor(MotorParams::default())
    }
}

impl PlantConfig {
    pub fn build(&self) -> Result<DtSls, CliError> {
        match self {
            PlantConfig::Motor(p) => build_motor(p),
            PlantConfig::Explicit(p) => {
                let a = to_dmatrix(&p.a, "plant.a")?;
                let b = to_dmatrix(&p.b, "plant.b")?;
                let n = a.nrows();
                let cov = |m: &Option<Matrix>, what| match m {
                    Some(m) => to_dmatrix(m, what),
                    None => Ok(DMatrix::identity(n, n)),
                };
                Ok(DtSls::new(a, b, cov(&p.sigma_w1, "plant.sigma_w1")?, cov(&p.sigma_w2, "plant.sigma_w2")?)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub mu_theta: f64,
    pub mu_phi: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            mu_theta: 0.9,
            mu_phi: 0.9,
        }
    }
}

impl NetworkConfig {
    pub fn build(&self) -> Result<NetworkParams, CliError> {
        Ok(NetworkParams::new(self.mu_theta, self.mu_phi)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxConfig {
    fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        Self {
            lower: vec![lo; dim],
            upper: vec![hi; dim],
        }
    }

    pub fn build(&self) -> Result<BoxRegion, CliError> {
        Ok(BoxRegion::new(self.lower.clone(), self.upper.clone())?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecConfig {
    pub state: BoxConfig,
    pub initial: BoxConfig,
    #[serde(rename = "unsafe")]
    pub unsafe_set: Vec<BoxConfig>,
    pub input: BoxConfig,
    pub horizon: usize,
}

impl Default for SpecConfig {
    fn default() -> Self {
        Self {
            state: BoxConfig::cube(2, -2.0, 2.0),
            initial: BoxConfig::cube(2, -0.2, 0.2),
            unsafe_set: vec![
                BoxConfig {
                    lower: vec![-2.0, -2.0],
                    upper: vec![-1.2, 2.0],
                },
                BoxConfig {
                    lower: vec![1.2, -2.0],
                    upper: vec![2.0, 2.0],
                },
            ],
            input: BoxConfig::cube(2, -0.05, 0.05),
            horizon: 100,
        }
    }
}

impl SpecConfig {
    pub fn build(&self) -> Result<SafetySpec, CliError> {
        let unsafe_set = self
            .unsafe_set
            .iter()
            .map(BoxConfig::build)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SafetySpec::new(
            self.state.build()?,
            self.initial.build()?,
            unsafe_set,
            self.input.build()?,
            self.horizon,
        )?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    /// Fluctuation weights `(1 − μ)²/μ²` on the μ-scaled blocks.
    Paper,
    /// Fluctuation weights `1/μ − 1` from the δ-variable variance.
    #[default]
    Exact,
}

impl From<VariantName> for CoeffVariant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Paper => CoeffVariant::PaperLiteral,
            VariantName::Exact => CoeffVariant::DerivationExact,
        }
    }
}

impl From<CoeffVariant> for VariantName {
    fn from(v: CoeffVariant) -> Self {
        match v {
            CoeffVariant::PaperLiteral => VariantName::Paper,
            CoeffVariant::DerivationExact => VariantName::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchName {
    #[default]
    NelderMead,
    RandomRestartCoordinate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    pub symmetry: f64,
    pub psd: f64,
    pub inequality: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        Self {
            symmetry: t.symmetry,
            psd: t.psd,
            inequality: t.inequality,
        }
    }
}

impl From<ToleranceConfig> for Tolerances {
    fn from(t: ToleranceConfig) -> Self {
        Tolerances {
            symmetry: t.symmetry,
            psd: t.psd,
            inequality: t.inequality,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisSection {
    pub variant: VariantName,
    /// Lyapunov right-hand side `Q`; identity when omitted.
    pub lyapunov_rhs: Option<Matrix>,
    pub gain_search: SearchName,
    pub budget: usize,
    pub restarts: usize,
    pub seed: u64,
    pub rho_target: f64,
    pub refine_budget: usize,
    pub refine_rhs: bool,
    pub tol: ToleranceConfig,
}

impl Default for SynthesisSection {
    fn default() -> Self {
        let d = SynthesisConfig::default();
        Self {
            variant: d.variant.into(),
            lyapunov_rhs: None,
            gain_search: SearchName::NelderMead,
            budget: d.budget,
            restarts: d.restarts,
            seed: d.seed,
            rho_target: d.rho_target,
            refine_budget: 1500,
            refine_rhs: true,
            tol: ToleranceConfig::default(),
        }
    }
}

impl SynthesisSection {
    pub fn build(&self) -> Result<SynthesisConfig, CliError> {
        let lyapunov_rhs = match &self.lyapunov_rhs {
            Some(q) => Some(to_dmatrix(q, "synthesis.lyapunov_rhs")?),
            None => None,
        };
        let cfg = SynthesisConfig {
            variant: self.variant.into(),
            lyapunov_rhs,
            gain_search: match self.gain_search {
                SearchName::NelderMead => GainSearchMethod::NelderMead,
                SearchName::RandomRestartCoordinate => GainSearchMethod::RandomRestartCoordinate,
            },
            budget: self.budget,
            restarts: self.restarts,
            seed: self.seed,
            rho_target: self.rho_target,
            refine_budget: self.refine_budget,
            refine_rhs: self.refine_rhs,
            tol: self.tol.into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    UniformOverX0,
    FixedPoints(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub trajectories: usize,
    pub horizon: usize,
    pub seed: u64,
    pub init: InitConfig,
    pub record_full: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            trajectories: 10,
            horizon: 100,
            seed: 1,
            init: InitConfig::UniformOverX0,
            record_full: true,
        }
    }
}

impl SimulationSection {
    pub fn build(&self) -> SimConfig {
        SimConfig {
            trajectories: self.trajectories,
            horizon: self.horizon,
            seed: self.seed,
            init_mode: match &self.init {
                InitConfig::UniformOverX0 => InitMode::UniformOverX0,
                InitConfig::FixedPoints(p) => InitMode::FixedPoints(p.clone()),
            },
            record_full: self.record_full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantConfig,
    pub network: NetworkConfig,
    pub spec: SpecConfig,
    pub synthesis: SynthesisSection,
    pub simulation: SimulationSection,
    pub output: OutputSection,
}

/// Everything the core needs, built from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Problem {
    pub sys: DtSls,
    pub net: NetworkParams,
    pub spec: SafetySpec,
    pub synthesis: SynthesisConfig,
    pub sim: SimConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Parse { source, .. } => CliError::Parse {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|source| CliError::Parse {
            path: PathBuf::from("<config>"),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.to_json() + "\n").map_err(io_error(path))
    }

    pub fn build(&self) -> Result<Problem, CliError> {
        let sys = self.plant.build()?;
        let spec = self.spec.build()?;
        if spec.n() != sys.n() || spec.m() != sys.m() {
            return Err(CliError::Config(format!(
                "spec is for n = {}, m = {} but the plant has n = {}, m = {}",
                spec.n(),
                spec.m(),
                sys.n(),
                sys.m()
            )));
        }
        let sim = self.simulation.build();
        sim.validate(sys.n())?;
        Ok(Problem {
            sys,
            net: self.network.build()?,
            spec,
            synthesis: self.synthesis.build()?,
            sim,
        })
    }
}
