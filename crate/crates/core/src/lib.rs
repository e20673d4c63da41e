//! Safety certification for discrete-time stochastic linear systems whose
//! sensor-to-controller and controller-to-actuator links drop packets.
//!
//! The closed loop (plant, predictor, zero-order-hold actuator, predicted
//! input) is stacked into a jump-linear system `z(k+1) = Ã(k) z(k) + Ẽ(k) w(k)`
//! with Bernoulli packet outcomes. A quadratic barrier `B(z) = zᵀPz` is
//! synthesized for it and turned into a finite-horizon bound
//!
//! ```text
//!     P{ x(k) ∈ X1 for some k ≤ T } ≤ (η + c·T) / β
//! ```
//!
//! where `η` bounds `B` on the initial region, `β` bounds it from below on the
//! unsafe region and `c` is the one-step expected drift.
//!
//! Modules:
//!
//! * [`model`]: plant, network and the augmented jump-linear closed loop.
//! * [`certificate`]: drift operator, level sets `η`/`β`, drift constant `c`
//!   and the probability bound.
//! * [`synthesis`]: gain search plus exact generalized Lyapunov solve.
//! * [`simulator`]: seeded Monte Carlo of the networked loop.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod certificate;
pub mod error;
pub mod linalg;
pub mod model;
pub mod random;
pub mod simulator;
pub mod synthesis;

pub use certificate::{
    check_inequality, compute_beta, compute_c, compute_eta, drift_operator, epsilon_from_levels,
    probability_bound, validate_cbc, BoundEstimate, BoxRegion, ProbabilityBound, QuadraticCbc,
    ResidualReport, SafetySpec, Tolerances,
};
pub use error::{Error, Result};
pub use model::{AugmentedSystem, CoeffVariant, DtSls, FeedbackGain, NetworkParams};
pub use simulator::{run_monte_carlo, LoopState, SimConfig, SimulationReport, StepDraws};
pub use synthesis::{
    operator_spectral_radius, search_gain, solve_generalized_lyapunov, synthesize,
    SynthesisConfig, SynthesisResult,
};
