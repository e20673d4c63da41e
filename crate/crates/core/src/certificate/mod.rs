//! Barrier-certificate conditions for a quadratic `B(z) = zᵀPz`.
//!
//! For the augmented loop the conditional expectation is
//! `E[B(z⁺) | z] = zᵀ L(P) z + c`, with the drift operator
//! `L(P) = Ã0ᵀPÃ0 + c1·Ã1ᵀPÃ1 + c2·Ã2ᵀPÃ2` and
//! `c = Tr(Ẽ0ᵀPẼ0 Σw) + c1·Tr(Ẽ1ᵀPẼ1 Σw)`. The drift condition therefore
//! reduces to `L(P) ⪯ P`; `η` and `β` are exact extrema over boxes.

mod levels;
mod region;

use alloc::vec::Vec;
use nalgebra::DMatrix;

pub use levels::{box_max, box_min, projected_gradient_min, BoundEstimate, MAX_ACTIVE_SET_DIM, MAX_VERTEX_DIM};
pub use region::{BoxRegion, SafetySpec};

use crate::error::{Condition, ConditionFailure, Error, Result};
use crate::linalg::{check_dims, max_eigenvalue, min_eigenvalue, require_symmetric, symmetrize};
use crate::model::{AugmentedSystem, CoeffVariant};

/// Numerical tolerances for certificate checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative symmetry tolerance for `P`.
    pub symmetry: f64,
    /// Smallest admissible eigenvalue of `P` (relative to its scale).
    pub psd: f64,
    /// Largest admissible eigenvalue of `L(P) − P`.
    pub inequality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            symmetry: 1e-12,
            psd: -1e-10,
            inequality: 1e-8,
        }
    }
}

/// `L(P) = Ã0ᵀPÃ0 + c1·Ã1ᵀPÃ1 + c2·Ã2ᵀPÃ2`, weights per the system's variant.
pub fn drift_operator(aug: &AugmentedSystem, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = aug.kappa();
    check_dims("P", p, k, k)?;
    require_symmetric("P", p, Tolerances::default().symmetry)?;
    Ok(drift_unchecked(aug, p))
}

pub(crate) fn drift_unchecked(aug: &AugmentedSystem, p: &DMatrix<f64>) -> DMatrix<f64> {
    let (c1, c2) = aug.fluctuation_weights();
    let mut out = aug.a0().transpose() * p * aug.a0();
    if c1 != 0.0 {
        out += (aug.a1().transpose() * p * aug.a1()) * c1;
    }
    if c2 != 0.0 {
        out += (aug.a2().transpose() * p * aug.a2()) * c2;
    }
    symmetrize(&out)
}

/// Left-hand side of the drift inequality and its verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// `L(P) − P`
    pub residual: DMatrix<f64>,
    pub max_eig: f64,
    pub tol: f64,
    pub satisfied: bool,
}

pub fn check_inequality(aug: &AugmentedSystem, p: &DMatrix<f64>, tol: f64) -> Result<ResidualReport> {
    let residual = drift_operator(aug, p)? - p;
    let residual = symmetrize(&residual);
    let max_eig = max_eigenvalue(&residual);
    Ok(ResidualReport {
        residual,
        max_eig,
        tol,
        satisfied: max_eig <= tol,
    })
}

/// Drift constant `c = Tr(Ẽ0ᵀPẼ0 Σw) + c1·Tr(Ẽ1ᵀPẼ1 Σw)`.
pub fn compute_c(aug: &AugmentedSystem, p: &DMatrix<f64>, sigma_w: &DMatrix<f64>) -> Result<f64> {
    let k = aug.kappa();
    let nw = aug.e0().ncols();
    check_dims("P", p, k, k)?;
    check_dims("sigma_w", sigma_w, nw, nw)?;
    let (c1, _) = aug.fluctuation_weights();
    let mean_part = (aug.e0().transpose() * p * aug.e0() * sigma_w).trace();
    let fluct_part = if c1 != 0.0 {
        (aug.e1().transpose() * p * aug.e1() * sigma_w).trace()
    } else {
        0.0
    };
    Ok(mean_part + c1 * fluct_part)
}

fn check_spec_dims(p: &DMatrix<f64>, spec: &SafetySpec) -> Result<()> {
    let k = 2 * (spec.n() + spec.m());
    check_dims("P", p, k, k)
}

/// `η = max zᵀPz` over `X0 × X × U × U`.
pub fn compute_eta(p: &DMatrix<f64>, spec: &SafetySpec) -> Result<f64> {
    check_spec_dims(p, spec)?;
    Ok(box_max(p, &spec.initial_domain())?.0)
}

/// `β = min zᵀPz` over `X1_j × X × U × U`, minimized over all unsafe boxes.
pub fn compute_beta(p: &DMatrix<f64>, spec: &SafetySpec) -> Result<BoundEstimate> {
    check_spec_dims(p, spec)?;
    let domains = spec.unsafe_domains();
    if domains.is_empty() {
        return Err(Error::EmptyUnsafeSet);
    }
    let mut out = BoundEstimate {
        value: f64::INFINITY,
        certified: true,
    };
    for domain in &domains {
        let (est, _) = box_min(p, domain)?;
        out.value = out.value.min(est.value);
        out.certified &= est.certified;
    }
    Ok(out)
}

/// Finite-horizon bound on the probability of reaching the unsafe set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityBound {
    /// `(η + c·T) / β` before clamping.
    pub raw: f64,
    /// `min(1, raw)`
    pub epsilon: f64,
}

impl ProbabilityBound {
    /// Lower bound `1 − ε` on the probability of staying safe.
    pub fn guarantee(&self) -> f64 {
        1.0 - self.epsilon
    }
}

pub fn epsilon_from_levels(eta: f64, c: f64, beta: f64, horizon: usize) -> Result<ProbabilityBound> {
    if !(beta > 0.0) {
        return Err(Error::VacuousCertificate);
    }
    for (what, value) in [("eta", eta), ("c", c)] {
        if !(value >= 0.0) || !value.is_finite() {
            return Err(Error::Domain {
                what,
                value,
                domain: "[0, inf)",
            });
        }
    }
    let raw = (eta + c * horizon as f64) / beta;
    Ok(ProbabilityBound {
        raw,
        epsilon: raw.clamp(0.0, 1.0),
    })
}

/// A validated quadratic barrier certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCbc {
    pub p: DMatrix<f64>,
    pub eta: f64,
    pub beta: f64,
    /// `false` if `β` came from the non-exact fallback.
    pub beta_certified: bool,
    pub c: f64,
    pub variant: CoeffVariant,
    pub mu_theta: f64,
    pub mu_phi: f64,
    pub sigma_w: DMatrix<f64>,
    /// Largest eigenvalue of `L(P) − P`.
    pub residual_max_eig: f64,
}

impl QuadraticCbc {
    pub fn barrier(&self, z: &nalgebra::DVector<f64>) -> f64 {
        crate::linalg::quad_form(&self.p, z)
    }
}

pub fn probability_bound(cbc: &QuadraticCbc, horizon: usize) -> Result<ProbabilityBound> {
    epsilon_from_levels(cbc.eta, cbc.c, cbc.beta, horizon)
}

/// Runs every certificate condition and assembles the certificate; failed
/// conditions are all reported together with their margins.
pub fn validate_cbc(
    aug: &AugmentedSystem,
    p: &DMatrix<f64>,
    spec: &SafetySpec,
    tol: &Tolerances,
) -> Result<QuadraticCbc> {
    let k = aug.kappa();
    let spec_k = 2 * (spec.n() + spec.m());
    let plant_mismatch = aug
        .plant()
        .is_some_and(|(sys, _)| sys.n() != spec.n() || sys.m() != spec.m());
    if spec_k != k || plant_mismatch {
        return Err(Error::InvalidSpec(alloc::format!(
            "spec with n={}, m={} does not match an augmented system of dimension {k}",
            spec.n(),
            spec.m()
        )));
    }
    check_dims("P", p, k, k)?;
    require_symmetric("P", p, tol.symmetry)?;

    let mut failures = Vec::new();
    let min_eig = min_eigenvalue(p);
    if min_eig < tol.psd * p.amax().max(1.0) {
        failures.push(ConditionFailure {
            condition: Condition::PositiveSemidefinite,
            margin: -min_eig,
        });
    }
    let report = check_inequality(aug, p, tol.inequality)?;
    if !report.satisfied {
        failures.push(ConditionFailure {
            condition: Condition::DriftInequality,
            margin: report.max_eig - tol.inequality,
        });
    }
    let sigma_w = aug.noise_covariance().clone();
    let c = compute_c(aug, p, &sigma_w)?;
    let eta = compute_eta(p, spec)?;
    let beta = compute_beta(p, spec)?;
    if !(beta.value > eta) {
        failures.push(ConditionFailure {
            condition: Condition::LevelSeparation,
            margin: eta - beta.value,
        });
    }
    if !failures.is_empty() {
        return Err(Error::ConditionsFailed(failures));
    }
    Ok(QuadraticCbc {
        p: p.clone(),
        eta,
        beta: beta.value,
        beta_certified: beta.certified,
        c,
        variant: aug.variant(),
        mu_theta: aug.network().mu_theta(),
        mu_phi: aug.network().mu_phi(),
        sigma_w,
        residual_max_eig: report.max_eig,
    })
}
