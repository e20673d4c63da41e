//! The drift operator as a linear map on symmetric matrices, its spectral
//! radius, and the exact solve of `P − L(P) = Q`.

#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use nalgebra::{DMatrix, DVector};

use crate::certificate::drift_unchecked;
use crate::error::{Error, Result};
use crate::linalg::{check_dims, min_eigenvalue, require_symmetric, sym_basis, sym_dim, sym_to_vec, vec_to_sym};
use crate::model::AugmentedSystem;

const POWER_ITERATIONS: usize = 200;
const POWER_RTOL: f64 = 1e-12;
/// Condition estimate above which a solve is flagged.
pub const ILL_CONDITIONED: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusMethod {
    PowerIteration,
    /// Eigenvalues of the dense operator matrix, used when power iteration stalls.
    DenseSpectrum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralRadius {
    pub value: f64,
    pub method: RadiusMethod,
    /// `false` if neither method converged and `value` is the last power-iteration estimate.
    pub converged: bool,
}

/// Matrix of `vec(P) ↦ vec(L(P))` in upper-triangular coordinates.
pub fn operator_matrix(aug: &AugmentedSystem) -> DMatrix<f64> {
    let k = aug.kappa();
    let d = sym_dim(k);
    let mut m = DMatrix::zeros(d, d);
    let mut col = 0;
    for i in 0..k {
        for j in i..k {
            let image = drift_unchecked(aug, &sym_basis(k, i, j));
            m.set_column(col, &sym_to_vec(&image));
            col += 1;
        }
    }
    m
}

/// Spectral radius of the drift operator. `L` maps the PSD cone into itself,
/// so its spectral radius is attained on that cone and power iteration from
/// the identity converges to it.
pub fn operator_spectral_radius(aug: &AugmentedSystem) -> SpectralRadius {
    let k = aug.kappa();
    let mut x = DMatrix::<f64>::identity(k, k);
    x /= x.norm();
    let mut estimate = 0.0_f64;
    for iter in 0..POWER_ITERATIONS {
        let y = drift_unchecked(aug, &x);
        let norm = y.norm();
        if norm == 0.0 || !norm.is_finite() {
            // nilpotent on the identity orbit, or overflow
            if norm == 0.0 {
                return SpectralRadius {
                    value: 0.0,
                    method: RadiusMethod::PowerIteration,
                    converged: true,
                };
            }
            break;
        }
        let converged = iter > 0 && (norm - estimate).abs() <= POWER_RTOL * norm;
        estimate = norm;
        if converged {
            return SpectralRadius {
                value: estimate,
                method: RadiusMethod::PowerIteration,
                converged: true,
            };
        }
        x = y / norm;
    }
    match dense_radius(aug) {
        Some(value) => SpectralRadius {
            value,
            method: RadiusMethod::DenseSpectrum,
            converged: true,
        },
        None => SpectralRadius {
            value: estimate,
            method: RadiusMethod::PowerIteration,
            converged: false,
        },
    }
}

fn dense_radius(aug: &AugmentedSystem) -> Option<f64> {
    let m = operator_matrix(aug);
    // QR sweeps can stall at machine epsilon on clustered spectra
    [f64::EPSILON, 1e-14, 1e-12].into_iter().find_map(|eps| {
        let schur = nalgebra::linalg::Schur::try_new(m.clone(), eps, 10_000)?;
        let eig = schur.complex_eigenvalues();
        Some(eig.iter().map(|z| z.re.hypot(z.im)).fold(0.0, f64::max))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSolution {
    pub p: DMatrix<f64>,
    pub radius: SpectralRadius,
    /// Ratio of extreme singular values of `I − M`.
    pub condition_estimate: f64,
    pub ill_conditioned: bool,
}

/// Unique symmetric `P` with `P − L(P) = Q`.
pub fn solve_generalized_lyapunov(aug: &AugmentedSystem, q: &DMatrix<f64>) -> Result<LyapunovSolution> {
    let k = aug.kappa();
    check_dims("Q", q, k, k)?;
    require_symmetric("Q", q, 1e-12)?;
    let q_min = min_eigenvalue(q);
    if !(q_min > 0.0) {
        return Err(Error::NotPsd {
            what: "Q (must be positive definite)",
            min_eig: q_min,
        });
    }
    let radius = operator_spectral_radius(aug);
    if !(radius.value < 1.0) {
        return Err(Error::Infeasible {
            radius: radius.value,
        });
    }
    let d = sym_dim(k);
    let system = DMatrix::<f64>::identity(d, d) - operator_matrix(aug);
    let rhs: DVector<f64> = sym_to_vec(q);
    let singular = system.clone().singular_values();
    let smax = singular.max();
    let smin = singular.min();
    let condition_estimate = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let sol = system.lu().solve(&rhs).ok_or(Error::Singular)?;
    Ok(LyapunovSolution {
        p: vec_to_sym(&sol, k),
        radius,
        condition_estimate,
        ill_conditioned: condition_estimate > ILL_CONDITIONED,
    })
}
