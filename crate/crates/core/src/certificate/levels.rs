//! Exact extrema of a convex quadratic `zᵀPz` over boxes.
//!
//! The maximum sits at a vertex, so it is found by walking all `2^κ` vertices
//! in Gray-code order with rank-one updates. The minimum is found by
//! enumerating every assignment of coordinates to {lower, upper, free},
//! solving the stationarity system on the free block and keeping feasible
//! candidates; when the free block is singular the minimum is also attained
//! with one more coordinate pinned, so those assignments can be skipped.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

use super::region::BoxRegion;
use crate::error::{Error, Result};
use crate::linalg::quad_form;
use crate::random::{stream_rng, uniform01};

/// Largest dimension accepted by the vertex walk.
pub const MAX_VERTEX_DIM: usize = 26;
/// Largest dimension handled by active-set enumeration.
pub const MAX_ACTIVE_SET_DIM: usize = 12;

/// A level-set value and whether it is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEstimate {
    pub value: f64,
    /// `false` when a local method produced an upper estimate of a minimum.
    pub certified: bool,
}

fn check_box(p: &DMatrix<f64>, region: &BoxRegion) -> Result<()> {
    let k = region.dim();
    crate::linalg::check_dims("P", p, k, k)
}

/// `max { zᵀPz : z ∈ region }` with the maximizing vertex.
pub fn box_max(p: &DMatrix<f64>, region: &BoxRegion) -> Result<(f64, DVector<f64>)> {
    check_box(p, region)?;
    let k = region.dim();
    if k > MAX_VERTEX_DIM {
        return Err(Error::TooManyVertices {
            dim: k,
            limit: MAX_VERTEX_DIM,
        });
    }
    let lo = region.lower();
    let hi = region.upper();
    let mut z = DVector::from_column_slice(lo);
    let mut pz = p * &z;
    let mut value = z.dot(&pz);
    let mut best = value;
    let mut best_mask: u64 = 0;
    let mut mask: u64 = 0;
    for step in 1u64..(1u64 << k) {
        let i = step.trailing_zeros() as usize;
        mask ^= 1 << i;
        let d = if mask & (1 << i) != 0 {
            hi[i] - lo[i]
        } else {
            lo[i] - hi[i]
        };
        value += 2.0 * d * pz[i] + d * d * p[(i, i)];
        for r in 0..k {
            pz[r] += d * p[(r, i)];
        }
        z[i] += d;
        if value > best {
            best = value;
            best_mask = mask;
        }
    }
    let vertex = DVector::from_fn(k, |i, _| {
        if best_mask & (1 << i) != 0 {
            hi[i]
        } else {
            lo[i]
        }
    });
    // recompute from scratch to drop accumulated update error
    Ok((quad_form(p, &vertex), vertex))
}

/// `min { zᵀPz : z ∈ region }` for PSD `P`.
pub fn box_min(p: &DMatrix<f64>, region: &BoxRegion) -> Result<(BoundEstimate, DVector<f64>)> {
    check_box(p, region)?;
    if region.dim() > MAX_ACTIVE_SET_DIM {
        let (value, arg) = projected_gradient_min(p, region, 0x5EED);
        return Ok((
            BoundEstimate {
                value,
                certified: false,
            },
            arg,
        ));
    }
    let (value, arg) = active_set_min(p, region);
    Ok((
        BoundEstimate {
            value,
            certified: true,
        },
        arg,
    ))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Slot {
    Lower,
    Upper,
    Free,
}

fn active_set_min(p: &DMatrix<f64>, region: &BoxRegion) -> (f64, DVector<f64>) {
    let k = region.dim();
    let lo = region.lower();
    let hi = region.upper();
    let mut slots = vec![Slot::Lower; k];
    let mut best = f64::INFINITY;
    let mut best_z = DVector::from_column_slice(lo);
    let mut free: Vec<usize> = Vec::with_capacity(k);
    let mut fixed: Vec<usize> = Vec::with_capacity(k);
    let total = 3usize.pow(k as u32);
    for _ in 0..total {
        free.clear();
        fixed.clear();
        let mut z = DVector::zeros(k);
        for (i, slot) in slots.iter().enumerate() {
            match slot {
                Slot::Lower => {
                    z[i] = lo[i];
                    fixed.push(i);
                }
                Slot::Upper => {
                    z[i] = hi[i];
                    fixed.push(i);
                }
                Slot::Free => free.push(i),
            }
        }
        let degenerate_pair = slots
            .iter()
            .enumerate()
            .any(|(i, s)| *s == Slot::Upper && lo[i] == hi[i]);
        if !degenerate_pair && solve_free_block(p, &mut z, &free, &fixed, lo, hi) {
            let value = quad_form(p, &z);
            if value < best {
                best = value;
                best_z = z;
            }
        }
        advance(&mut slots);
    }
    (best, best_z)
}

fn advance(slots: &mut [Slot]) {
    for slot in slots.iter_mut() {
        match slot {
            Slot::Lower => {
                *slot = Slot::Upper;
                return;
            }
            Slot::Upper => {
                *slot = Slot::Free;
                return;
            }
            Slot::Free => *slot = Slot::Lower,
        }
    }
}

/// Fills the free coordinates of `z` with the solution of
/// `P_ff z_f = −P_fb z_b`; returns whether it is nonsingular and inside the box.
fn solve_free_block(
    p: &DMatrix<f64>,
    z: &mut DVector<f64>,
    free: &[usize],
    fixed: &[usize],
    lo: &[f64],
    hi: &[f64],
) -> bool {
    let nf = free.len();
    if nf == 0 {
        return true;
    }
    let pff = DMatrix::from_fn(nf, nf, |r, c| p[(free[r], free[c])]);
    let rhs = DVector::from_fn(nf, |r, _| {
        -fixed
            .iter()
            .map(|&j| p[(free[r], j)] * z[j])
            .sum::<f64>()
    });
    let Some(chol) = pff.cholesky() else {
        return false;
    };
    let sol = chol.solve(&rhs);
    for (r, &i) in free.iter().enumerate() {
        let v = sol[r];
        if !v.is_finite() {
            return false;
        }
        let slack = 1e-9 * (1.0 + lo[i].abs().max(hi[i].abs()));
        if v < lo[i] - slack || v > hi[i] + slack {
            return false;
        }
        z[i] = v.clamp(lo[i], hi[i]);
    }
    true
}

/// Multistart projected gradient; gives an upper estimate of the minimum.
pub fn projected_gradient_min(p: &DMatrix<f64>, region: &BoxRegion, seed: u64) -> (f64, DVector<f64>) {
    let k = region.dim();
    let lmax = crate::linalg::max_eigenvalue(p).max(1e-300);
    let step = 0.5 / lmax;
    let mut rng = stream_rng(seed, k as u64);
    let mut best = f64::INFINITY;
    let mut best_z = DVector::from_column_slice(&region.center());
    let starts = 64;
    for s in 0..starts {
        let mut z: Vec<f64> = if s == 0 {
            region.center()
        } else {
            region
                .lower()
                .iter()
                .zip(region.upper())
                .map(|(l, u)| l + (u - l) * uniform01(&mut rng))
                .collect()
        };
        for _ in 0..5000 {
            let zv = DVector::from_column_slice(&z);
            let grad = p * &zv * 2.0;
            let mut moved = 0.0_f64;
            for i in 0..k {
                let next = (z[i] - step * grad[i]).clamp(region.lower()[i], region.upper()[i]);
                moved = moved.max((next - z[i]).abs());
                z[i] = next;
            }
            if moved < 1e-14 {
                break;
            }
        }
        let zv = DVector::from_column_slice(&z);
        let value = quad_form(p, &zv);
        if value < best {
            best = value;
            best_z = zv;
        }
    }
    (best, best_z)
}
