//! Deterministic random streams.
//!
//! Uniforms take the top 53 bits of a `u64` draw. Standard normals use the
//! Marsaglia polar method on those uniforms, caching the second variate of
//! each accepted pair, so a given generator state always yields the same
//! sequence.

#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;
use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::Result;
use crate::linalg::psd_factor;

/// Uniform on `[0, 1)`.
pub fn uniform01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// SplitMix64 finalizer.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent generator for stream `index` under `seed`; the same pair
/// always gives the same stream regardless of evaluation order.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(index.wrapping_add(0xA076_1D64_78BD_642F))))
}

/// Standard-normal stream over a uniform source.
#[derive(Debug, Clone)]
pub struct NormalStream<R> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> NormalStream<R> {
    pub fn new(rng: R) -> Self {
        Self { rng, spare: None }
    }

    pub fn rng(&mut self) -> &mut R {
        &mut self.rng
    }

    pub fn uniform(&mut self) -> f64 {
        uniform01(&mut self.rng)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        loop {
            let u = 2.0 * uniform01(&mut self.rng) - 1.0;
            let v = 2.0 * uniform01(&mut self.rng) - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let scale = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * scale);
                return u * scale;
            }
        }
    }
}

/// Gaussian vectors with a fixed covariance; the symmetric factor is computed once.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    factor: DMatrix<f64>,
    zero: bool,
}

impl GaussianSampler {
    pub fn new(covariance: &DMatrix<f64>) -> Result<Self> {
        let factor = psd_factor("covariance", covariance)?;
        let zero = factor.amax() == 0.0;
        Ok(Self { factor, zero })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: RngCore>(&self, normals: &mut NormalStream<R>) -> DVector<f64> {
        let d = self.dim();
        let base = DVector::from_fn(d, |_, _| normals.standard_normal());
        if self.zero {
            return DVector::zeros(d);
        }
        &self.factor * base
    }
}
