//! Subcommand bodies, kept free of argument parsing so tests can call them.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use netcbc_core::linalg::min_eigenvalue;
use netcbc_core::simulator::{aggregate, simulate_trajectory};
use netcbc_core::{
    check_inequality, compute_beta, compute_c, compute_eta, epsilon_from_levels, synthesize, validate_cbc,
    AugmentedSystem, DtSls, Error, FeedbackGain, NetworkParams, SafetySpec, SimConfig, SimulationReport,
    SynthesisResult,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{from_dmatrix, Matrix, PlantConfig, Problem, RunConfig, VariantName};
use crate::error::CliError;
use crate::report::{format_guarantee, trajectories_csv, write_text, CertificateFile, PlantEcho, SimulationFile};

/// Monte Carlo over trajectories on the rayon pool. Each trajectory owns a
/// generator derived from `(seed, index)`, so the report equals the serial one.
pub fn run_monte_carlo_parallel(
    sys: &DtSls,
    gain: &FeedbackGain,
    net: &NetworkParams,
    spec: &SafetySpec,
    cfg: &SimConfig,
    bound_epsilon: Option<f64>,
) -> Result<SimulationReport, CliError> {
    cfg.validate(sys.n())?;
    gain.check_against(sys)?;
    let outcomes = (0..cfg.trajectories)
        .into_par_iter()
        .map(|i| simulate_trajectory(sys, gain, net, spec, cfg, i))
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(aggregate(outcomes, cfg, sys.n(), bound_epsilon))
}

pub fn plant_echo(cfg: &RunConfig, sys: &DtSls) -> PlantEcho {
    PlantEcho {
        a: from_dmatrix(sys.a()),
        b: from_dmatrix(sys.b()),
        ts: match &cfg.plant {
            PlantConfig::Motor(p) => Some(p.ts),
            PlantConfig::Explicit(_) => None,
        },
    }
}

/// Paths of the files a run wrote.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub certificate: Option<PathBuf>,
    pub trajectories: Option<PathBuf>,
    pub simulation: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

pub struct CertifyOutcome {
    pub result: SynthesisResult,
    pub certificate: CertificateFile,
    pub report: SimulationReport,
    pub summary: String,
    pub artifacts: Artifacts,
}

fn ts_line(cfg: &RunConfig) -> String {
    match &cfg.plant {
        PlantConfig::Motor(p) => format!(
            "plant: motor, Ts = {:e} s ({:?} discretization), noise std {}\n",
            p.ts, p.discretization, p.noise_std
        ),
        PlantConfig::Explicit(_) => "plant: explicit matrices\n".to_string(),
    }
}

fn write_simulation(
    dir: &Path,
    report: &SimulationReport,
    cfg: &RunConfig,
    sys: &DtSls,
    mode: &str,
    artifacts: &mut Artifacts,
) -> Result<(), CliError> {
    if let Some(records) = &report.records {
        let path = dir.join("trajectories.csv");
        write_text(&path, &trajectories_csv(records, sys.n(), sys.m()))?;
        artifacts.trajectories = Some(path);
    }
    let path = dir.join("simulation.json");
    write_text(&path, &SimulationFile::new(report, &cfg.simulation, mode).to_json())?;
    artifacts.simulation = Some(path);
    Ok(())
}

fn simulation_lines(report: &SimulationReport) -> String {
    format!(
        "simulation: {} trajectories x {} steps, seed {}: {} violations, {} exits from X, \
         empirical p = {:.4} (99% CI [{:.4}, {:.4}])\n",
        report.trajectories,
        report.horizon,
        report.seed,
        report.violations,
        report.exits,
        report.empirical_p,
        report.ci_lower,
        report.ci_upper
    )
}

/// Synthesis, simulation with the synthesized gain, and all artifacts.
pub fn certify(cfg: &RunConfig) -> Result<CertifyOutcome, CliError> {
    let Problem {
        sys,
        net,
        spec,
        synthesis,
        sim,
    } = cfg.build()?;
    let result = synthesize(&sys, &net, &spec, &synthesis)?;
    let certificate =
        CertificateFile::from_synthesis(&result, spec.horizon(), spec.input(), plant_echo(cfg, &sys));
    let report = run_monte_carlo_parallel(&sys, &result.gain, &net, &spec, &sim, Some(result.bound.epsilon))?;

    let dir = &cfg.output.dir;
    let mut artifacts = Artifacts::default();
    let cert_path = dir.join("certificate.json");
    write_text(&cert_path, &certificate.to_json())?;
    artifacts.certificate = Some(cert_path);
    write_simulation(dir, &report, cfg, &sys, "closed-loop", &mut artifacts)?;

    let mut summary = String::new();
    summary.push_str(&ts_line(cfg));
    summary.push_str(&format!(
        "network: mu_theta = {}, mu_phi = {}; variant {:?}\n",
        net.mu_theta(),
        net.mu_phi(),
        VariantName::from(synthesis.variant)
    ));
    summary.push_str(&format!(
        "input set U: {:?} .. {:?}\n",
        spec.input().lower(),
        spec.input().upper()
    ));
    summary.push_str(&format!("gain F = {:?}\n", certificate.gain));
    summary.push_str(&format!(
        "drift operator radius {:.6}; residual max eig {:.3e}\n",
        result.rho, result.cbc.residual_max_eig
    ));
    summary.push_str(&format!(
        "eta = {:.6e}, beta = {:.6e}{}, c = {:.6e}, T = {}\n",
        result.cbc.eta,
        result.cbc.beta,
        if result.cbc.beta_certified { "" } else { " (uncertified)" },
        result.cbc.c,
        spec.horizon()
    ));
    summary.push_str(&format!(
        "epsilon = {:.6}; {}\n",
        result.bound.epsilon,
        format_guarantee(result.bound.guarantee())
    ));
    if result.ill_conditioned {
        summary.push_str("warning: Lyapunov operator is ill-conditioned\n");
    }
    summary.push_str(&simulation_lines(&report));
    if report.bound_breached() {
        summary.push_str("warning: violation frequency significantly exceeds epsilon\n");
    } else if report.bound_flagged() {
        summary.push_str("note: empirical violation frequency above epsilon (not significant)\n");
    }
    let summary_path = dir.join("summary.txt");
    write_text(&summary_path, &summary)?;
    artifacts.summary = Some(summary_path);

    Ok(CertifyOutcome {
        result,
        certificate,
        report,
        summary,
        artifacts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub valid: bool,
    pub variant: VariantName,
    pub ts: Option<f64>,
    pub residual_max_eig: f64,
    pub p_min_eig: f64,
    pub eta: f64,
    pub beta: f64,
    pub c: f64,
    pub horizon: usize,
    /// `None` when `β = 0`.
    pub epsilon: Option<f64>,
    pub guarantee: Option<f64>,
    pub failures: Vec<String>,
}

/// Checks a supplied `(P, F)` against every certificate condition. Each
/// quantity is computed even when an earlier condition fails.
pub fn verify(cfg: &RunConfig, p: &DMatrix<f64>, gain: &FeedbackGain) -> Result<Verdict, CliError> {
    let Problem {
        sys,
        net,
        spec,
        synthesis,
        ..
    } = cfg.build()?;
    let aug = AugmentedSystem::build(&sys, gain, &net, synthesis.variant)?;
    let k = aug.kappa();
    if p.shape() != (k, k) {
        return Err(CliError::Config(format!(
            "P is {}x{}, expected {k}x{k}",
            p.nrows(),
            p.ncols()
        )));
    }
    let residual = check_inequality(&aug, p, synthesis.tol.inequality)?;
    let c = compute_c(&aug, p, aug.noise_covariance())?;
    let eta = compute_eta(p, &spec)?;
    let beta = compute_beta(p, &spec)?.value;
    let bound = epsilon_from_levels(eta, c, beta, spec.horizon()).ok();
    let (valid, failures) = match validate_cbc(&aug, p, &spec, &synthesis.tol) {
        Ok(_) => (true, Vec::new()),
        Err(Error::ConditionsFailed(f)) => (false, f.iter().map(ToString::to_string).collect()),
        Err(e) => (false, vec![e.to_string()]),
    };
    Ok(Verdict {
        valid,
        variant: synthesis.variant.into(),
        ts: plant_echo(cfg, &sys).ts,
        residual_max_eig: residual.max_eig,
        p_min_eig: min_eigenvalue(p),
        eta,
        beta,
        c,
        horizon: spec.horizon(),
        epsilon: bound.map(|b| b.epsilon),
        guarantee: bound.map(|b| b.guarantee()),
        failures,
    })
}

pub fn verdict_summary(v: &Verdict) -> String {
    let mut out = format!(
        "{}\nresidual max eig {:.3e}, min eig(P) {:.3e}\neta = {:.6e}, beta = {:.6e}, c = {:.6e}, T = {}\n",
        if v.valid { "certificate valid" } else { "certificate INVALID" },
        v.residual_max_eig,
        v.p_min_eig,
        v.eta,
        v.beta,
        v.c,
        v.horizon
    );
    if let (Some(eps), Some(g)) = (v.epsilon, v.guarantee) {
        out.push_str(&format!("epsilon = {eps:.6}; {}\n", format_guarantee(g)));
    }
    for f in &v.failures {
        out.push_str(&format!("failed: {f}\n"));
    }
    out
}

/// What drives the input in `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LoopMode {
    /// The supplied gain, closed over the network.
    ClosedLoop,
    /// `u ≡ 0`: actuator never receives a non-zero command.
    ZeroInput,
    /// `F = 0` with predictor and network loop running.
    ZeroGain,
}

impl LoopMode {
    pub fn name(self) -> &'static str {
        match self {
            LoopMode::ClosedLoop => "closed-loop",
            LoopMode::ZeroInput => "zero-input",
            LoopMode::ZeroGain => "zero-gain",
        }
    }
}

pub struct SimulateOutcome {
    pub report: SimulationReport,
    pub summary: String,
    pub artifacts: Artifacts,
}

/// Monte Carlo with a given gain (or one of the open-loop modes).
pub fn simulate(
    cfg: &RunConfig,
    gain: Option<&FeedbackGain>,
    bound_epsilon: Option<f64>,
    mode: LoopMode,
) -> Result<SimulateOutcome, CliError> {
    let Problem { sys, net, spec, sim, .. } = cfg.build()?;
    let zero = FeedbackGain::zeros(sys.m(), sys.n());
    let (gain, spec) = match mode {
        LoopMode::ClosedLoop => (
            gain.ok_or_else(|| CliError::Config("closed-loop simulation needs a gain".into()))?,
            spec,
        ),
        LoopMode::ZeroGain => (&zero, spec),
        // a degenerate U = {0} pins u(0) = û(0) = 0; with F = 0 they stay there
        LoopMode::ZeroInput => {
            let origin = netcbc_core::BoxRegion::cube(sys.m(), 0.0, 0.0)?;
            (&zero, spec.with_input(origin))
        }
    };
    let report = run_monte_carlo_parallel(&sys, gain, &net, &spec, &sim, bound_epsilon)?;
    let mut artifacts = Artifacts::default();
    write_simulation(&cfg.output.dir, &report, cfg, &sys, mode.name(), &mut artifacts)?;
    let mut summary = ts_line(cfg);
    summary.push_str(&format!("mode: {}\n", mode.name()));
    summary.push_str(&simulation_lines(&report));
    if let Some(eps) = bound_epsilon {
        summary.push_str(&format!("certified epsilon = {eps:.6}\n"));
    }
    Ok(SimulateOutcome {
        report,
        summary,
        artifacts,
    })
}

/// Certificate matrix published with the motor case study.
pub fn published_p() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        8,
        8,
        &[
            0.92, 0.68, -0.58, -0.031, 0.34, -0.061, -0.073, -0.074, //
            0.68, 3.7, -0.41, -0.85, 0.21, 0.33, 0.036, 0.12, //
            -0.58, -0.41, 0.94, 0.22, -0.088, -0.056, 0.43, -0.034, //
            -0.031, -0.85, 0.22, 1.2, -0.071, 0.066, 0.23, 0.14, //
            0.34, 0.21, -0.088, -0.071, 1.5, -0.013, -0.85, -0.093, //
            -0.061, 0.33, -0.056, 0.066, -0.013, 0.91, -0.13, -0.13, //
            -0.073, 0.036, 0.43, 0.23, -0.85, -0.13, 1.5, -0.053, //
            -0.074, 0.12, -0.034, 0.14, -0.093, -0.13, -0.053, 0.88,
        ],
    )
}

/// Feedback gain published with the motor case study.
pub fn published_gain() -> FeedbackGain {
    FeedbackGain::new(DMatrix::from_row_slice(2, 2, &[-0.68, -0.70, 0.79, -0.60]))
}

/// Published level sets and drift constant, for the `bound` arithmetic.
pub const PUBLISHED_ETA: f64 = 0.0001306;
pub const PUBLISHED_C: f64 = 0.000166;
pub const PUBLISHED_BETA: f64 = 0.7233;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PublishedCandidate {
    pub p: Matrix,
    pub gain: Matrix,
    pub verdict: Verdict,
    /// Radius of the drift operator at the published gain.
    pub rho: f64,
    pub published_eta: f64,
    pub published_beta: f64,
    pub published_c: f64,
}

/// Runs [`verify`] on the published `(P, F)` at the configured plant and
/// records the verdict without asserting it.
pub fn export_published_candidate(cfg: &RunConfig) -> Result<PublishedCandidate, CliError> {
    let p = published_p();
    let gain = published_gain();
    let verdict = verify(cfg, &p, &gain)?;
    let problem = cfg.build()?;
    let aug = AugmentedSystem::build(&problem.sys, &gain, &problem.net, problem.synthesis.variant)?;
    Ok(PublishedCandidate {
        p: from_dmatrix(&p),
        gain: from_dmatrix(gain.matrix()),
        verdict,
        rho: netcbc_core::operator_spectral_radius(&aug).value,
        published_eta: PUBLISHED_ETA,
        published_beta: PUBLISHED_BETA,
        published_c: PUBLISHED_C,
    })
}
