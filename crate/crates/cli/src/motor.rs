//! Permanent magnet synchronous motor in the rotor (d, q) frame, discretized
//! with sampling time `ts`. The state is the pair of stator currents and the
//! input the pair of stator voltages.

use nalgebra::DMatrix;
use netcbc_core::DtSls;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// How the continuous motor is turned into `(A, B)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Discretization {
    /// The closed-form matrices as published with the case study.
    ///
    /// Note the `Ld/R` and `Lq/R` prefactors: the diagonal of `A` tends to
    /// `Ld/R`, `Lq/R` rather than 1 as `ts → 0`, so this is not the
    /// discretization of the motor ODE. It is kept verbatim.
    #[default]
    Printed,
    /// Exact zero-order-hold discretization of
    /// `Ld i_d' = −R i_d + ω Lq i_q + v_d`, `Lq i_q' = −R i_q − ω Ld i_d + v_q`.
    Zoh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotorParams {
    /// Stator resistance in ohm.
    pub r: f64,
    /// Electrical angular frequency in rad/s.
    pub omega_el: f64,
    /// d-axis inductance in henry.
    pub ld: f64,
    /// q-axis inductance in henry.
    pub lq: f64,
    /// Sampling time in seconds.
    pub ts: f64,
    /// Standard deviation of each process and measurement noise channel.
    pub noise_std: f64,
    pub discretization: Discretization,
}

impl Default for MotorParams {
    fn default() -> Self {
        Self {
            r: 0.025,
            omega_el: 6283.2,
            ld: 1e-4,
            lq: 1.2e-4,
            ts: 1e-4,
            noise_std: 0.01,
            discretization: Discretization::Printed,
        }
    }
}

impl MotorParams {
    pub fn validate(&self) -> Result<(), CliError> {
        for (name, v) in [
            ("r", self.r),
            ("omega_el", self.omega_el),
            ("ld", self.ld),
            ("lq", self.lq),
            ("ts", self.ts),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Config(format!("motor parameter {name} must be positive, got {v}")));
            }
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(CliError::Config(format!(
                "motor noise_std must be non-negative, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }
}

/// `(A, B)` from the published closed-form expressions.
pub fn printed_matrices(p: &MotorParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let (r, w, ld, lq, ts) = (p.r, p.omega_el, p.ld, p.lq, p.ts);
    let ed = (-r / ld * ts).exp();
    let eq = (-r / lq * ts).exp();
    let a = DMatrix::from_row_slice(
        2,
        2,
        &[
            ld / r * ed,
            lq * w / r * (1.0 - ed),
            -ld * w / r * (1.0 - eq),
            lq / r * eq,
        ],
    );
    let b = DMatrix::from_row_slice(
        2,
        2,
        &[
            (1.0 - ed) / r,
            lq / r * (1.0 - ed),
            ld / r * (1.0 - eq),
            (1.0 - eq) / r,
        ],
    );
    (a, b)
}

/// Zero-order-hold `(A, B)` via the exponential of the block matrix
/// `[[Ac, Bc], [0, 0]]·ts`.
pub fn zoh_matrices(p: &MotorParams) -> (DMatrix<f64>, DMatrix<f64>) {
    let (r, w, ld, lq) = (p.r, p.omega_el, p.ld, p.lq);
    let mut m = DMatrix::zeros(4, 4);
    m[(0, 0)] = -r / ld;
    m[(0, 1)] = w * lq / ld;
    m[(1, 0)] = -w * ld / lq;
    m[(1, 1)] = -r / lq;
    m[(0, 2)] = 1.0 / ld;
    m[(1, 3)] = 1.0 / lq;
    let e = (m * p.ts).exp();
    (e.view((0, 0), (2, 2)).into_owned(), e.view((0, 2), (2, 2)).into_owned())
}

pub fn build_motor(p: &MotorParams) -> Result<DtSls, CliError> {
    p.validate()?;
    let (a, b) = match p.discretization {
        Discretization::Printed => printed_matrices(p),
        Discretization::Zoh => zoh_matrices(p),
    };
    let cov = DMatrix::identity(2, 2) * (p.noise_std * p.noise_std);
    Ok(DtSls::new(a, b, cov.clone(), cov)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_sampling_time_collapses_to_prefactors() {
        let p = MotorParams {
            ts: 1e-12,
            ..Default::default()
        };
        let (a, b) = printed_matrices(&p);
        assert!((a[(0, 0)] - 0.004).abs() < 1e-9);
        assert!((a[(1, 1)] - 0.0048).abs() < 1e-9);
        assert!(b.amax() < 1e-6);
    }

    #[test]
    fn default_matrices_are_finite_with_positive_input_gain() {
        let sys = build_motor(&MotorParams::default()).unwrap();
        assert!(sys.a().iter().all(|v| v.is_finite()));
        assert!(sys.b().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn zoh_matches_truncated_exponential_series() {
        let p = MotorParams {
            ts: 1e-6,
            discretization: Discretization::Zoh,
            ..Default::default()
        };
        let (a, b) = zoh_matrices(&p);
        let ac = DMatrix::from_row_slice(
            2,
            2,
            &[-p.r / p.ld, p.omega_el * p.lq / p.ld, -p.omega_el * p.ld / p.lq, -p.r / p.lq],
        );
        let bc = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[1.0 / p.ld, 1.0 / p.lq]));
        // Σ_k Ac^k ts^k / k! and Σ_k Ac^k Bc ts^{k+1} / (k+1)!, six terms
        let mut term = DMatrix::<f64>::identity(2, 2);
        let mut a_series = term.clone();
        let mut b_series = &bc * p.ts;
        for k in 1..6 {
            term = &term * &ac * (p.ts / k as f64);
            a_series += &term;
            b_series += &term * &bc * (p.ts / (k + 1) as f64);
        }
        assert!((a - a_series).amax() < 1e-14);
        assert!((b - b_series).amax() < 1e-14 * (1.0 / p.ld));
    }

    #[test]
    fn rejects_non_positive_parameters() {
        let p = MotorParams {
            lq: 0.0,
            ..Default::default()
        };
        assert!(build_motor(&p).is_err());
    }
}
