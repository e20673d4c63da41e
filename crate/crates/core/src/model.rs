//! Plant, network and the stacked closed loop.
//!
//! The augmented state is `z = [x; x̂; u; û] ∈ ℝ^κ`, `κ = 2(n+m)`, and the
//! augmented noise is `w = [w1; w2] ∈ ℝ^{2n}`. With packet outcomes `θ(k)`
//! (sensor → controller) and `Φ(k)` (controller → actuator) the loop is
//!
//! ```text
//!     x(k+1)  = A x + B u + w1
//!     x̂(k+1)  = θ A x + (1−θ) A x̂ + B û + θ A w2
//!     u(k+1)  = Φ F (A x̂ + B û) + (1−Φ) u
//!     û(k+1)  = F (A x̂ + B û)
//! ```
//!
//! Writing `θ = μθ(1 − δθ)` and `Φ = μΦ(1 − δΦ)` splits the transition into a
//! mean part and zero-mean fluctuations, `Ã(k) = Ã0 + Ã1 δθ + Ã2 δΦ` and
//! `Ẽ(k) = Ẽ0 + Ẽ1 δθ`, with `Var[δ] = 1/μ − 1`.

use nalgebra::DMatrix;
use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::linalg::{block_diag, check_dims, require_psd, set_block};
use crate::random::uniform01;

/// Plant matrices and noise covariances of a discrete-time stochastic linear system.
#[derive(Debug, Clone, PartialEq)]
pub struct DtSls {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    sigma_w1: DMatrix<f64>,
    sigma_w2: DMatrix<f64>,
}

impl DtSls {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        sigma_w1: DMatrix<f64>,
        sigma_w2: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        check_dims("A", &a, n, n)?;
        if b.nrows() != n {
            return Err(Error::Dimension {
                block: "B",
                expected_rows: n,
                expected_cols: b.ncols(),
                rows: b.nrows(),
                cols: b.ncols(),
            });
        }
        check_dims("sigma_w1", &sigma_w1, n, n)?;
        check_dims("sigma_w2", &sigma_w2, n, n)?;
        require_psd("sigma_w1", &sigma_w1, 1e-12, -1e-12)?;
        require_psd("sigma_w2", &sigma_w2, 1e-12, -1e-12)?;
        Ok(Self {
            a,
            b,
            sigma_w1,
            sigma_w2,
        })
    }

    /// Both noises standard normal.
    pub fn with_identity_noise(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        Self::new(a, b, DMatrix::identity(n, n), DMatrix::identity(n, n))
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn sigma_w1(&self) -> &DMatrix<f64> {
        &self.sigma_w1
    }

    pub fn sigma_w2(&self) -> &DMatrix<f64> {
        &self.sigma_w2
    }

    /// Covariance of `w = [w1; w2]` (the two noises are independent).
    pub fn noise_covariance(&self) -> DMatrix<f64> {
        block_diag(&self.sigma_w1, &self.sigma_w2)
    }

    /// Augmented dimension `κ = 2(n+m)`.
    pub fn kappa(&self) -> usize {
        2 * (self.n() + self.m())
    }
}

/// Delivery probabilities of the two network links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkParams {
    mu_theta: f64,
    mu_phi: f64,
}

impl NetworkParams {
    pub fn new(mu_theta: f64, mu_phi: f64) -> Result<Self> {
        check_probability("mu_theta", mu_theta)?;
        check_probability("mu_phi", mu_phi)?;
        Ok(Self { mu_theta, mu_phi })
    }

    /// Loss-free links.
    pub fn reliable() -> Self {
        Self {
            mu_theta: 1.0,
            mu_phi: 1.0,
        }
    }

    pub fn mu_theta(&self) -> f64 {
        self.mu_theta
    }

    pub fn mu_phi(&self) -> f64 {
        self.mu_phi
    }
}

fn check_probability(what: &'static str, mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::Domain {
            what,
            value: mu,
            domain: "(0, 1]",
        });
    }
    Ok(())
}

/// Output-feedback gain `F ∈ ℝ^{m×n}` (`u = F y`).
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackGain {
    f: DMatrix<f64>,
}

impl FeedbackGain {
    pub fn new(f: DMatrix<f64>) -> Self {
        Self { f }
    }

    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            f: DMatrix::zeros(m, n),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn check_against(&self, sys: &DtSls) -> Result<()> {
        check_dims("F", &self.f, sys.m(), sys.n())
    }
}

/// Which multiplier is applied to the fluctuation blocks in the drift
/// operator and in the drift constant `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum CoeffVariant {
    /// `(1−μ)²` on the unscaled difference blocks (`[−A A]`, `[−FA I −FB]`).
    PaperLiteral,
    /// `Var[δ] = 1/μ − 1` on the μ-scaled blocks `Ã1`, `Ã2`, `Ẽ1`; this is the
    /// exact conditional expectation under Bernoulli losses.
    #[default]
    DerivationExact,
}

impl CoeffVariant {
    /// Weight applied to the μ-scaled fluctuation block for delivery probability `mu`.
    pub fn weight(self, mu: f64) -> f64 {
        match self {
            // (1−μ)² · (D/μ)ᵀ P (D/μ) with D the μ-scaled block
            CoeffVariant::PaperLiteral => (1.0 - mu) * (1.0 - mu) / (mu * mu),
            CoeffVariant::DerivationExact => 1.0 / mu - 1.0,
        }
    }
}

/// The decomposed jump-linear closed loop.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    a0: DMatrix<f64>,
    a1: DMatrix<f64>,
    a2: DMatrix<f64>,
    e0: DMatrix<f64>,
    e1: DMatrix<f64>,
    var_theta: f64,
    var_phi: f64,
    variant: CoeffVariant,
    net: NetworkParams,
    noise_cov: DMatrix<f64>,
    plant: Option<(DtSls, FeedbackGain)>,
}

impl AugmentedSystem {
    pub fn build(
        sys: &DtSls,
        gain: &FeedbackGain,
        net: &NetworkParams,
        variant: CoeffVariant,
    ) -> Result<Self> {
        gain.check_against(sys)?;
        let (n, m) = (sys.n(), sys.m());
        let kappa = sys.kappa();
        let a = sys.a();
        let b = sys.b();
        let f = gain.matrix();
        let fa = f * a;
        let fb = f * b;
        let eye_m = DMatrix::<f64>::identity(m, m);
        let eye_n = DMatrix::<f64>::identity(n, n);
        let (mt, mp) = (net.mu_theta(), net.mu_phi());
        let [ox, oxh, ou, ouh] = offsets(n, m);

        let mut a0 = DMatrix::zeros(kappa, kappa);
        set_block(&mut a0, ox, ox, a);
        set_block(&mut a0, ox, ou, b);
        set_block(&mut a0, oxh, ox, &(a * mt));
        set_block(&mut a0, oxh, oxh, &(a * (1.0 - mt)));
        set_block(&mut a0, oxh, ouh, b);
        set_block(&mut a0, ou, oxh, &(&fa * mp));
        set_block(&mut a0, ou, ou, &(&eye_m * (1.0 - mp)));
        set_block(&mut a0, ou, ouh, &(&fb * mp));
        set_block(&mut a0, ouh, oxh, &fa);
        set_block(&mut a0, ouh, ouh, &fb);

        let mut a1 = DMatrix::zeros(kappa, kappa);
        set_block(&mut a1, oxh, ox, &(a * -mt));
        set_block(&mut a1, oxh, oxh, &(a * mt));

        let mut a2 = DMatrix::zeros(kappa, kappa);
        set_block(&mut a2, ou, oxh, &(&fa * -mp));
        set_block(&mut a2, ou, ou, &(&eye_m * mp));
        set_block(&mut a2, ou, ouh, &(&fb * -mp));

        let mut e0 = DMatrix::zeros(kappa, 2 * n);
        set_block(&mut e0, ox, 0, &eye_n);
        set_block(&mut e0, oxh, n, &(a * mt));

        let mut e1 = DMatrix::zeros(kappa, 2 * n);
        set_block(&mut e1, oxh, n, &(a * -mt));

        Ok(Self {
            a0,
            a1,
            a2,
            e0,
            e1,
            var_theta: 1.0 / mt - 1.0,
            var_phi: 1.0 / mp - 1.0,
            variant,
            net: *net,
            noise_cov: sys.noise_covariance(),
            plant: Some((sys.clone(), gain.clone())),
        })
    }

    /// Assembles a system from raw blocks without an underlying plant
    /// (`Ã1`, `Ã2`, `Ẽ1` are taken as already μ-scaled). Realized transitions
    /// of such a system are computed from the decomposition.
    pub fn from_blocks(
        a0: DMatrix<f64>,
        a1: DMatrix<f64>,
        a2: DMatrix<f64>,
        e0: DMatrix<f64>,
        e1: DMatrix<f64>,
        noise_cov: DMatrix<f64>,
        net: &NetworkParams,
        variant: CoeffVariant,
    ) -> Result<Self> {
        let k = a0.nrows();
        check_dims("A0", &a0, k, k)?;
        check_dims("A1", &a1, k, k)?;
        check_dims("A2", &a2, k, k)?;
        let nw = e0.ncols();
        check_dims("E0", &e0, k, nw)?;
        check_dims("E1", &e1, k, nw)?;
        check_dims("sigma_w", &noise_cov, nw, nw)?;
        require_psd("sigma_w", &noise_cov, 1e-12, -1e-12)?;
        Ok(Self {
            a0,
            a1,
            a2,
            e0,
            e1,
            var_theta: 1.0 / net.mu_theta() - 1.0,
            var_phi: 1.0 / net.mu_phi() - 1.0,
            variant,
            net: *net,
            noise_cov,
            plant: None,
        })
    }

    /// Realized `Ã(k)`, `Ẽ(k)` for the packet outcomes, assembled directly from
    /// the undecomposed block structure.
    pub fn realize_transition(&self, theta: bool, phi: bool) -> (DMatrix<f64>, DMatrix<f64>) {
        let Some((sys, gain)) = &self.plant else {
            return self.compose_transition(
                delta_from_outcome(theta, self.net.mu_theta()),
                delta_from_outcome(phi, self.net.mu_phi()),
            );
        };
        let (n, m) = (sys.n(), sys.m());
        let kappa = self.kappa();
        let a = sys.a();
        let b = sys.b();
        let f = gain.matrix();
        let fa = f * a;
        let fb = f * b;
        let th = if theta { 1.0 } else { 0.0 };
        let ph = if phi { 1.0 } else { 0.0 };
        let [ox, oxh, ou, ouh] = offsets(n, m);

        let mut ak = DMatrix::zeros(kappa, kappa);
        set_block(&mut ak, ox, ox, a);
        set_block(&mut ak, ox, ou, b);
        set_block(&mut ak, oxh, ox, &(a * th));
        set_block(&mut ak, oxh, oxh, &(a * (1.0 - th)));
        set_block(&mut ak, oxh, ouh, b);
        set_block(&mut ak, ou, oxh, &(&fa * ph));
        set_block(&mut ak, ou, ou, &(DMatrix::<f64>::identity(m, m) * (1.0 - ph)));
        set_block(&mut ak, ou, ouh, &(&fb * ph));
        set_block(&mut ak, ouh, oxh, &fa);
        set_block(&mut ak, ouh, ouh, &fb);

        let mut ek = DMatrix::zeros(kappa, 2 * n);
        set_block(&mut ek, ox, 0, &DMatrix::<f64>::identity(n, n));
        set_block(&mut ek, oxh, n, &(a * th));
        (ak, ek)
    }

    /// `Ã0 + Ã1 δθ + Ã2 δΦ` and `Ẽ0 + Ẽ1 δθ`.
    pub fn compose_transition(&self, delta_theta: f64, delta_phi: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let ak = &self.a0 + &self.a1 * delta_theta + &self.a2 * delta_phi;
        let ek = &self.e0 + &self.e1 * delta_theta;
        (ak, ek)
    }

    pub fn kappa(&self) -> usize {
        self.a0.nrows()
    }

    pub fn a0(&self) -> &DMatrix<f64> {
        &self.a0
    }

    pub fn a1(&self) -> &DMatrix<f64> {
        &self.a1
    }

    pub fn a2(&self) -> &DMatrix<f64> {
        &self.a2
    }

    pub fn e0(&self) -> &DMatrix<f64> {
        &self.e0
    }

    pub fn e1(&self) -> &DMatrix<f64> {
        &self.e1
    }

    pub fn var_theta(&self) -> f64 {
        self.var_theta
    }

    pub fn var_phi(&self) -> f64 {
        self.var_phi
    }

    pub fn variant(&self) -> CoeffVariant {
        self.variant
    }

    /// Plant and gain the system was built from, if any.
    pub fn plant(&self) -> Option<(&DtSls, &FeedbackGain)> {
        self.plant.as_ref().map(|(s, g)| (s, g))
    }

    /// Covariance of the augmented noise `w`.
    pub fn noise_covariance(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn network(&self) -> &NetworkParams {
        &self.net
    }

    /// Multipliers `(c1, c2)` of `Ã1ᵀPÃ1` and `Ã2ᵀPÃ2` in the drift operator.
    pub fn fluctuation_weights(&self) -> (f64, f64) {
        (
            self.variant.weight(self.net.mu_theta()),
            self.variant.weight(self.net.mu_phi()),
        )
    }

    /// Same system with a different coefficient variant.
    pub fn with_variant(&self, variant: CoeffVariant) -> Self {
        Self {
            variant,
            ..self.clone()
        }
    }
}

/// Start rows of the `x`, `x̂`, `u`, `û` blocks inside `z`.
pub fn offsets(n: usize, m: usize) -> [usize; 4] {
    [0, n, 2 * n, 2 * n + m]
}

/// `δ` corresponding to a packet outcome: `1` when lost, `1 − 1/μ` when delivered.
pub fn delta_from_outcome(delivered: bool, mu: f64) -> f64 {
    if delivered {
        1.0 - 1.0 / mu
    } else {
        1.0
    }
}

/// Draws `δ`: `1` with probability `1 − μ`, `1 − 1/μ` with probability `μ`.
pub fn sample_delta<R: RngCore + ?Sized>(mu: f64, rng: &mut R) -> Result<f64> {
    check_probability("mu", mu)?;
    Ok(delta_from_outcome(uniform01(rng) < mu, mu))
}
