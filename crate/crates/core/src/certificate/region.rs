use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Axis-aligned box `{ z : lower ≤ z ≤ upper }`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidBox(format!(
                "lower has {} entries, upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(Error::InvalidBox(format!("coordinate {i} is unbounded")));
            }
            if l > u {
                return Err(Error::InvalidBox(format!(
                    "coordinate {i}: lower {l} exceeds upper {u}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(alloc::vec![lo; dim], alloc::vec![hi; dim])
    }

    /// Cartesian product in the given order.
    pub fn product(parts: &[&BoxRegion]) -> Self {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for part in parts {
            lower.extend_from_slice(&part.lower);
            upper.extend_from_slice(&part.upper);
        }
        Self { lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    /// Closed boxes intersect iff every coordinate interval overlaps.
    pub fn intersects(&self, other: &BoxRegion) -> bool {
        self.dim() == other.dim()
            && (0..self.dim())
                .all(|i| self.lower[i] <= other.upper[i] && other.lower[i] <= self.upper[i])
    }

    pub fn is_subset_of(&self, other: &BoxRegion) -> bool {
        self.dim() == other.dim()
            && (0..self.dim())
                .all(|i| other.lower[i] <= self.lower[i] && self.upper[i] <= other.upper[i])
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Coordinate-wise projection onto the box.
    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }
}

/// Safety specification: state set `X`, initial set `X0`, unsafe set `X1`
/// (a union of boxes), input set `U` and horizon `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetySpec {
    state: BoxRegion,
    initial: BoxRegion,
    unsafe_set: Vec<BoxRegion>,
    input: BoxRegion,
    horizon: usize,
}

impl SafetySpec {
    pub fn new(
        state: BoxRegion,
        initial: BoxRegion,
        unsafe_set: Vec<BoxRegion>,
        input: BoxRegion,
        horizon: usize,
    ) -> Result<Self> {
        let n = state.dim();
        if initial.dim() != n {
            return Err(Error::InvalidSpec(format!(
                "initial set has dimension {}, state set {n}",
                initial.dim()
            )));
        }
        if !initial.is_subset_of(&state) {
            return Err(Error::InvalidSpec("initial set is not contained in the state set".into()));
        }
        for (j, bad) in unsafe_set.iter().enumerate() {
            if bad.dim() != n {
                return Err(Error::InvalidSpec(format!(
                    "unsafe box {j} has dimension {}, state set {n}",
                    bad.dim()
                )));
            }
            if !bad.intersects(&state) {
                return Err(Error::InvalidSpec(format!(
                    "unsafe box {j} does not meet the state set"
                )));
            }
            if bad.intersects(&initial) {
                return Err(Error::InvalidSpec(format!(
                    "unsafe box {j} overlaps the initial set"
                )));
            }
        }
        Ok(Self {
            state,
            initial,
            unsafe_set,
            input,
            horizon,
        })
    }

    pub fn state(&self) -> &BoxRegion {
        &self.state
    }

    pub fn initial(&self) -> &BoxRegion {
        &self.initial
    }

    pub fn unsafe_set(&self) -> &[BoxRegion] {
        &self.unsafe_set
    }

    pub fn input(&self) -> &BoxRegion {
        &self.input
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn with_horizon(&self, horizon: usize) -> Self {
        Self {
            horizon,
            ..self.clone()
        }
    }

    pub fn with_input(&self, input: BoxRegion) -> Self {
        Self {
            input,
            ..self.clone()
        }
    }

    pub fn n(&self) -> usize {
        self.state.dim()
    }

    pub fn m(&self) -> usize {
        self.input.dim()
    }

    /// `X0 × X × U × U`.
    pub fn initial_domain(&self) -> BoxRegion {
        BoxRegion::product(&[&self.initial, &self.state, &self.input, &self.input])
    }

    /// `X1_j × X × U × U` for every unsafe box; coordinates of `X1_j` outside
    /// `X` are cut back to `X`.
    pub fn unsafe_domains(&self) -> Vec<BoxRegion> {
        self.unsafe_set
            .iter()
            .map(|bad| {
                let lower = bad
                    .lower
                    .iter()
                    .zip(&self.state.lower)
                    .map(|(a, b)| a.max(*b))
                    .collect();
                let upper = bad
                    .upper
                    .iter()
                    .zip(&self.state.upper)
                    .map(|(a, b)| a.min(*b))
                    .collect();
                let clipped = BoxRegion { lower, upper };
                BoxRegion::product(&[&clipped, &self.state, &self.input, &self.input])
            })
            .collect()
    }

    /// `X × X × U × U`.
    pub fn full_domain(&self) -> BoxRegion {
        BoxRegion::product(&[&self.state, &self.state, &self.input, &self.input])
    }

    /// Whether a plant state lies in the unsafe set.
    pub fn is_unsafe(&self, x: &[f64]) -> bool {
        self.unsafe_set.iter().any(|b| b.contains(x))
    }
}
