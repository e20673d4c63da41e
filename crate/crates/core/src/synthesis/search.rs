//! Derivative-free minimizers used for the gain search.

use alloc::vec;
use alloc::vec::Vec;

/// Outcome of one minimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

/// Stops once the best value drops to `target` or below.
#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    pub budget: usize,
    pub target: f64,
    pub ftol: f64,
}

struct Counted<F> {
    f: F,
    evals: usize,
    budget: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    /// Past the budget every point evaluates to +inf without calling `f`.
    fn call(&mut self, x: &[f64]) -> f64 {
        if self.evals >= self.budget {
            return f64::INFINITY;
        }
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.budget
    }
}

/// Nelder–Mead with standard coefficients (reflection 1, expansion 2,
/// contraction 1/2, shrink 1/2) and an axis-aligned initial simplex.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, rule: StopRule) -> Minimum {
    let d = x0.len();
    let mut obj = Counted {
        f,
        evals: 0,
        budget: rule.budget.max(1),
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    simplex.push(x0.to_vec());
    for i in 0..d {
        let mut v = x0.to_vec();
        v[i] += if v[i] != 0.0 { step * v[i].abs().max(1.0) } else { step };
        simplex.push(v);
    }
    let mut values: Vec<f64> = Vec::with_capacity(d + 1);
    for v in &simplex {
        values.push(obj.call(v));
    }
    let mut trace = Vec::new();
    if d == 0 {
        return Minimum {
            x: x0.to_vec(),
            value: values[0],
            trace: vec![values[0]],
            evaluations: obj.evals,
        };
    }

    loop {
        // order ascending; ties keep the earlier vertex first
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        trace.push(values[0]);

        if values[0] <= rule.target || obj.exhausted() {
            break;
        }
        let spread = (values[d] - values[0]).abs();
        if spread <= rule.ftol * (values[0].abs() + rule.ftol) && values[d].is_finite() {
            break;
        }

        let centroid: Vec<f64> = (0..d)
            .map(|j| simplex[..d].iter().map(|v| v[j]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..d)
                .map(|j| centroid[j] + t * (simplex[d][j] - centroid[j]))
                .collect()
        };
        let xr = along(-1.0);
        let fr = obj.call(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = obj.call(&xe);
            if fe < fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
            continue;
        }
        if fr < values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[d] {
            let xc = along(-0.5);
            let fc = obj.call(&xc);
            (xc, fc)
        } else {
            let xc = along(0.5);
            let fc = obj.call(&xc);
            (xc, fc)
        };
        if fc < values[d].min(fr) {
            simplex[d] = xc;
            values[d] = fc;
            continue;
        }
        for i in 1..=d {
            if obj.exhausted() {
                break;
            }
            let shrunk: Vec<f64> = (0..d)
                .map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]))
                .collect();
            values[i] = obj.call(&shrunk);
            simplex[i] = shrunk;
        }
    }
    Minimum {
        x: simplex[0].clone(),
        value: values[0],
        trace,
        evaluations: obj.evals,
    }
}

/// Compass search: try `±step` along each axis, accept improvements, halve
/// the step when a full sweep fails.
pub fn coordinate_search<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, rule: StopRule) -> Minimum {
    let mut obj = Counted {
        f,
        evals: 0,
        budget: rule.budget.max(1),
    };
    let mut x = x0.to_vec();
    let mut best = obj.call(&x);
    let mut h = step;
    let mut trace = vec![best];
    while !obj.exhausted() && best > rule.target && h > 1e-10 {
        let mut improved = false;
        for i in 0..x.len() {
            for sign in [1.0, -1.0] {
                if obj.exhausted() {
                    break;
                }
                let mut trial = x.clone();
                trial[i] += sign * h;
                let v = obj.call(&trial);
                if v < best {
                    best = v;
                    x = trial;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
        trace.push(best);
    }
    Minimum {
        x,
        value: best,
        trace,
        evaluations: obj.evals,
    }
}
