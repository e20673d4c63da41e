#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use netcbc_core::random::{stream_rng, uniform01};
use netcbc_core::{AugmentedSystem, BoxRegion, CoeffVariant, DtSls, FeedbackGain, NetworkParams, SafetySpec};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, 0xACCE55)
}

pub fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(rng)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| uniform(rng, -scale, scale))
}

/// `G Gᵀ / k` with `G` of the given rank.
pub fn random_psd(rng: &mut ChaCha8Rng, k: usize, rank: usize) -> DMatrix<f64> {
    let g = random_matrix(rng, k, rank, 1.0);
    &g * g.transpose() / rank as f64
}

/// Motor plant with the closed-form matrices and default constants.
pub fn motor(ts: f64, noise_var: f64) -> DtSls {
    let (r, w, ld, lq) = (0.025, 6283.2, 1e-4, 1.2e-4);
    let ed = (-r / ld * ts).exp();
    let eq = (-r / lq * ts).exp();
    let a = DMatrix::from_row_slice(
        2,
        2,
        &[ld / r * ed, lq * w / r * (1.0 - ed), -ld * w / r * (1.0 - eq), lq / r * eq],
    );
    let b = DMatrix::from_row_slice(
        2,
        2,
        &[(1.0 - ed) / r, lq / r * (1.0 - ed), ld / r * (1.0 - eq), (1.0 - eq) / r],
    );
    let cov = DMatrix::identity(2, 2) * noise_var;
    DtSls::new(a, b, cov.clone(), cov).unwrap()
}

pub fn motor_spec(u: f64) -> SafetySpec {
    SafetySpec::new(
        BoxRegion::cube(2, -2.0, 2.0).unwrap(),
        BoxRegion::cube(2, -0.2, 0.2).unwrap(),
        vec![
            BoxRegion::new(vec![-2.0, -2.0], vec![-1.2, 2.0]).unwrap(),
            BoxRegion::new(vec![1.2, -2.0], vec![2.0, 2.0]).unwrap(),
        ],
        BoxRegion::cube(2, -u, u).unwrap(),
        100,
    )
    .unwrap()
}

pub fn published_gain() -> FeedbackGain {
    FeedbackGain::new(DMatrix::from_row_slice(2, 2, &[-0.68, -0.70, 0.79, -0.60]))
}

pub fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize, a_scale: f64) -> (DtSls, FeedbackGain, NetworkParams) {
    let a = random_matrix(rng, n, n, a_scale);
    let b = random_matrix(rng, n, m, 1.0);
    let s1 = random_psd(rng, n, n);
    let s2 = random_psd(rng, n, n);
    let sys = DtSls::new(a, b, s1, s2).unwrap();
    let gain = FeedbackGain::new(random_matrix(rng, m, n, 0.5));
    let net = NetworkParams::new(uniform(rng, 0.5, 1.0), uniform(rng, 0.5, 1.0)).unwrap();
    (sys, gain, net)
}

/// `E[Ã(k)ᵀ P Ã(k)]` over the four packet outcomes, weighted by their
/// probabilities. Transitions are assembled from the undecomposed blocks.
pub fn drift_by_enumeration(aug: &AugmentedSystem, p: &DMatrix<f64>) -> DMatrix<f64> {
    let net = aug.network();
    let mut out = DMatrix::zeros(p.nrows(), p.ncols());
    for (theta, pt) in [(true, net.mu_theta()), (false, 1.0 - net.mu_theta())] {
        for (phi, pp) in [(true, net.mu_phi()), (false, 1.0 - net.mu_phi())] {
            let (a, _) = aug.realize_transition(theta, phi);
            out += (a.transpose() * p * &a) * (pt * pp);
        }
    }
    out
}

/// `E[tr(Ẽ(k)ᵀ P Ẽ(k) Σ)]` over the four packet outcomes.
pub fn drift_constant_by_enumeration(aug: &AugmentedSystem, p: &DMatrix<f64>) -> f64 {
    let net = aug.network();
    let sigma = aug.noise_covariance();
    let mut out = 0.0;
    for (theta, pt) in [(true, net.mu_theta()), (false, 1.0 - net.mu_theta())] {
        for (phi, pp) in [(true, net.mu_phi()), (false, 1.0 - net.mu_phi())] {
            let (_, e) = aug.realize_transition(theta, phi);
            out += (e.transpose() * p * &e * sigma).trace() * pt * pp;
        }
    }
    out
}

/// `Σ_{k<terms} L^k(Q)` with `L` evaluated by enumeration.
pub fn neumann_series(aug: &AugmentedSystem, q: &DMatrix<f64>, terms: usize) -> DMatrix<f64> {
    let mut term = q.clone();
    let mut sum = q.clone();
    for _ in 1..terms {
        term = drift_by_enumeration(aug, &term);
        sum += &term;
    }
    sum
}

pub fn quad(p: &DMatrix<f64>, z: &DVector<f64>) -> f64 {
    (z.transpose() * p * z)[(0, 0)]
}

/// Point in `region` whose coordinates sit on the lower face, the upper face
/// or uniformly inside with equal probability. Vertices and faces get hit
/// often, which uniform sampling alone would never do in 6 dimensions.
pub fn face_biased_point(rng: &mut ChaCha8Rng, region: &BoxRegion) -> DVector<f64> {
    DVector::from_iterator(
        region.dim(),
        region.lower().iter().zip(region.upper()).map(|(&l, &u)| {
            let r = uniform01(rng);
            if r < 1.0 / 3.0 {
                l
            } else if r < 2.0 / 3.0 {
                u
            } else {
                uniform(rng, l, u)
            }
        }),
    )
}

/// Projected gradient descent of `zᵀPz` over `region` from `z`.
pub fn polish_min(p: &DMatrix<f64>, region: &BoxRegion, mut z: DVector<f64>, iters: usize) -> f64 {
    let lmax = p.symmetric_eigenvalues().max().max(1e-12);
    let step = 0.5 / lmax;
    for _ in 0..iters {
        let g = p * &z * 2.0;
        z -= g * step;
        for i in 0..z.len() {
            z[i] = z[i].clamp(region.lower()[i], region.upper()[i]);
        }
    }
    quad(p, &z)
}

/// Random well-posed spec with `n` states and `m` inputs: `X = [−2, 2]ⁿ`,
/// `X0` a small box around a random centre, one unsafe slab on coordinate 0.
pub fn random_spec(rng: &mut ChaCha8Rng, n: usize, m: usize) -> SafetySpec {
    let state = BoxRegion::cube(n, -2.0, 2.0).unwrap();
    let lo: Vec<f64> = (0..n).map(|_| uniform(rng, -0.8, 0.3)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + uniform(rng, 0.1, 0.5)).collect();
    let initial = BoxRegion::new(lo, hi).unwrap();
    let cut = uniform(rng, 1.0, 1.7);
    let mut bad_lo = vec![-2.0; n];
    bad_lo[0] = cut;
    let bad = BoxRegion::new(bad_lo, vec![2.0; n]).unwrap();
    let ulim = uniform(rng, 0.2, 1.5);
    let input = BoxRegion::cube(m, -ulim, ulim).unwrap();
    SafetySpec::new(state, initial, vec![bad], input, 50).unwrap()
}

pub fn variant_of(i: usize) -> CoeffVariant {
    if i % 2 == 0 {
        CoeffVariant::DerivationExact
    } else {
        CoeffVariant::PaperLiteral
    }
}
