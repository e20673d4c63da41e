//! Certificate synthesis: a derivative-free search over the feedback gain
//! wrapped around an exact solve of `P − L(P) = Q`.
//!
//! For a fixed gain the drift inequality is linear in `P`, and it admits a
//! positive definite solution exactly when the drift operator is a
//! contraction. The outer search therefore minimizes the operator's spectral
//! radius; an optional second pass then minimizes the bound `ε` itself over
//! gains (and, optionally, a diagonal `Q`) that stay feasible.

mod lyapunov;
pub mod search;

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use nalgebra::DMatrix;

pub use lyapunov::{
    operator_matrix, operator_spectral_radius, solve_generalized_lyapunov, LyapunovSolution,
    RadiusMethod, SpectralRadius, ILL_CONDITIONED,
};
use search::{coordinate_search, nelder_mead, Minimum, StopRule};

use crate::certificate::{
    compute_beta, epsilon_from_levels, probability_bound, validate_cbc, BoundEstimate,
    ProbabilityBound, QuadraticCbc, SafetySpec, Tolerances,
};
use crate::error::{Error, Result, Stage};
use crate::model::{AugmentedSystem, CoeffVariant, DtSls, FeedbackGain, NetworkParams};
use crate::random::{stream_rng, uniform01};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainSearchMethod {
    #[default]
    NelderMead,
    RandomRestartCoordinate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub variant: CoeffVariant,
    /// Right-hand side `Q` of the Lyapunov solve; identity when `None`.
    pub lyapunov_rhs: Option<DMatrix<f64>>,
    pub gain_search: GainSearchMethod,
    /// Objective evaluations allowed to the gain search (all restarts together).
    pub budget: usize,
    /// Random restarts after the start from `F = 0`.
    pub restarts: usize,
    pub seed: u64,
    pub rho_target: f64,
    /// Evaluations for the `ε` refinement pass; 0 disables it.
    pub refine_budget: usize,
    /// Let the refinement pass also reweight a diagonal `Q`.
    pub refine_rhs: bool,
    pub tol: Tolerances,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            variant: CoeffVariant::default(),
            lyapunov_rhs: None,
            gain_search: GainSearchMethod::default(),
            budget: 2000,
            restarts: 4,
            seed: 0,
            rho_target: 0.999,
            refine_budget: 0,
            refine_rhs: false,
            tol: Tolerances::default(),
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget < 1 {
            return Err(Error::Domain {
                what: "budget",
                value: self.budget as f64,
                domain: "[1, inf)",
            });
        }
        if !(self.rho_target > 0.0 && self.rho_target < 1.0) {
            return Err(Error::Domain {
                what: "rho_target",
                value: self.rho_target,
                domain: "(0, 1)",
            });
        }
        Ok(())
    }
}

/// Outcome of the gain search.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSearch {
    pub gain: FeedbackGain,
    pub radius: f64,
    /// Best radius after each iteration, restarts concatenated.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

fn gain_from(x: &[f64], m: usize, n: usize) -> FeedbackGain {
    FeedbackGain::new(DMatrix::from_row_slice(m, n, x))
}

fn radius_objective(sys: &DtSls, net: &NetworkParams, variant: CoeffVariant, x: &[f64]) -> f64 {
    let gain = gain_from(x, sys.m(), sys.n());
    match AugmentedSystem::build(sys, &gain, net, variant) {
        Ok(aug) => operator_spectral_radius(&aug).value,
        Err(_) => f64::INFINITY,
    }
}

/// Minimizes the drift operator's spectral radius over `F`, starting at
/// `F = 0` and then from seeded random points in `[−1, 1]^{m×n}`.
pub fn search_gain(sys: &DtSls, net: &NetworkParams, cfg: &SynthesisConfig) -> Result<GainSearch> {
    cfg.validate()?;
    let (m, n) = (sys.m(), sys.n());
    let dim = m * n;
    let starts = cfg.restarts + 1;
    let mut remaining = cfg.budget;
    let mut best: Option<Minimum> = None;
    let mut trace = Vec::new();
    let mut evaluations = 0;
    for r in 0..starts {
        if remaining == 0 {
            break;
        }
        let share = remaining / (starts - r);
        let share = share.max(1);
        let x0: Vec<f64> = if r == 0 {
            alloc::vec![0.0; dim]
        } else {
            let mut rng = stream_rng(cfg.seed, r as u64);
            (0..dim).map(|_| 2.0 * uniform01(&mut rng) - 1.0).collect()
        };
        let rule = StopRule {
            budget: share,
            target: cfg.rho_target,
            ftol: 1e-12,
        };
        let objective = |x: &[f64]| radius_objective(sys, net, cfg.variant, x);
        let run = match cfg.gain_search {
            GainSearchMethod::NelderMead => nelder_mead(objective, &x0, 0.25, rule),
            GainSearchMethod::RandomRestartCoordinate => coordinate_search(objective, &x0, 0.25, rule),
        };
        remaining -= run.evaluations.min(remaining);
        evaluations += run.evaluations;
        trace.extend_from_slice(&run.trace);
        // strict improvement only, so ties go to the earlier restart
        let better = best.as_ref().is_none_or(|b| run.value < b.value);
        if better {
            best = Some(run);
        }
        if best.as_ref().is_some_and(|b| b.value <= cfg.rho_target) {
            break;
        }
    }
    let best = best.ok_or(Error::Infeasible {
        radius: f64::INFINITY,
    })?;
    if !(best.value < 1.0) {
        return Err(Error::Infeasible { radius: best.value });
    }
    Ok(GainSearch {
        gain: gain_from(&best.x, m, n),
        radius: best.value,
        trace,
        evaluations,
    })
}

/// Full synthesis output.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub gain: FeedbackGain,
    pub cbc: QuadraticCbc,
    /// Spectral radius of the drift operator at `gain`.
    pub rho: f64,
    pub bound: ProbabilityBound,
    /// Gain-search objective per iteration.
    pub trace: Vec<f64>,
    /// Refinement-pass `ε` per iteration (empty if disabled).
    pub refine_trace: Vec<f64>,
    /// Right-hand side used for the final Lyapunov solve.
    pub q: DMatrix<f64>,
    /// Factor applied to the Lyapunov solution so that `β = 1`.
    pub scale: f64,
    pub condition_estimate: f64,
    pub ill_conditioned: bool,
}

struct Candidate {
    aug: AugmentedSystem,
    solution: LyapunovSolution,
}

fn solve_for(
    sys: &DtSls,
    gain: &FeedbackGain,
    net: &NetworkParams,
    variant: CoeffVariant,
    q: &DMatrix<f64>,
) -> Result<Candidate> {
    let aug = AugmentedSystem::build(sys, gain, net, variant)?;
    let solution = solve_generalized_lyapunov(&aug, q)?;
    Ok(Candidate { aug, solution })
}

/// Raw `(η + cT)/β` for a candidate, used as the refinement objective.
fn raw_epsilon(candidate: &Candidate, spec: &SafetySpec) -> Option<f64> {
    let p = &candidate.solution.p;
    let eta = crate::certificate::compute_eta(p, spec).ok()?;
    let BoundEstimate { value: beta, .. } = compute_beta(p, spec).ok()?;
    let c = crate::certificate::compute_c(&candidate.aug, p, candidate.aug.noise_covariance()).ok()?;
    if !(beta > 0.0) {
        return None;
    }
    Some(epsilon_from_levels(eta, c, beta, spec.horizon()).ok()?.raw)
}

/// Gain search, optional `ε` refinement, Lyapunov solve, normalization,
/// validation and bound.
pub fn synthesize(
    sys: &DtSls,
    net: &NetworkParams,
    spec: &SafetySpec,
    cfg: &SynthesisConfig,
) -> Result<SynthesisResult> {
    cfg.validate()?;
    if spec.unsafe_set().is_empty() {
        return Err(Error::EmptyUnsafeSet.at(Stage::Validation));
    }
    let k = sys.kappa();
    let base_q = match &cfg.lyapunov_rhs {
        Some(q) => q.clone(),
        None => DMatrix::identity(k, k),
    };
    let searched = search_gain(sys, net, cfg).map_err(|e| e.at(Stage::GainSearch))?;
    let mut gain = searched.gain;
    let mut q = base_q;
    let mut refine_trace = Vec::new();

    if cfg.refine_budget > 0 {
        let (m, n) = (sys.m(), sys.n());
        let dim_f = m * n;
        let mut x0: Vec<f64> = gain.matrix().transpose().iter().copied().collect();
        let q_diag: Vec<f64> = q.diagonal().iter().copied().collect();
        let refine_rhs = cfg.refine_rhs && q_diag.iter().all(|v| *v > 0.0);
        if refine_rhs {
            x0.extend(q_diag.iter().map(|v| v.ln()));
        }
        let fixed_q = q.clone();
        let build_q = |x: &[f64]| -> DMatrix<f64> {
            if refine_rhs {
                DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    k,
                    x[dim_f..].iter().map(|v| v.clamp(-30.0, 30.0).exp()),
                ))
            } else {
                fixed_q.clone()
            }
        };
        let objective = |x: &[f64]| -> f64 {
            let g = gain_from(&x[..dim_f], m, n);
            match solve_for(sys, &g, net, cfg.variant, &build_q(x)) {
                Ok(cand) => raw_epsilon(&cand, spec).unwrap_or(f64::INFINITY),
                Err(_) => f64::INFINITY,
            }
        };
        let rule = StopRule {
            budget: cfg.refine_budget,
            target: f64::NEG_INFINITY,
            ftol: 1e-10,
        };
        let run = nelder_mead(objective, &x0, 0.1, rule);
        refine_trace = run.trace;
        if run.value.is_finite() {
            gain = gain_from(&run.x[..dim_f], m, n);
            q = build_q(&run.x);
        }
    }

    let candidate = solve_for(sys, &gain, net, cfg.variant, &q).map_err(|e| e.at(Stage::Lyapunov))?;
    let beta = compute_beta(&candidate.solution.p, spec).map_err(|e| e.at(Stage::Validation))?;
    let scale = if beta.value > 0.0 { 1.0 / beta.value } else { 1.0 };
    let p = &candidate.solution.p * scale;
    let cbc = validate_cbc(&candidate.aug, &p, spec, &cfg.tol).map_err(|e| e.at(Stage::Validation))?;
    let bound = probability_bound(&cbc, spec.horizon()).map_err(|e| e.at(Stage::Bound))?;
    Ok(SynthesisResult {
        gain,
        cbc,
        rho: candidate.solution.radius.value,
        bound,
        trace: searched.trace,
        refine_trace,
        q: q * scale,
        scale,
        condition_estimate: candidate.solution.condition_estimate,
        ill_conditioned: candidate.solution.ill_conditioned,
    })
}
