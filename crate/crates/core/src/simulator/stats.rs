//! Exact one-sided binomial confidence bounds (Clopper–Pearson).

#[allow(unused_imports)] // inherent float methods need std
use num_traits::Float;


/// `ln P(X ≤ k)` for `X ~ Bin(n, p)`, `0 < p < 1`.
fn ln_cdf(k: u64, n: u64, p: f64) -> f64 {
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let mut term = n as f64 * ln_q;
    let mut acc = term;
    for i in 0..k {
        term += ((n - i) as f64 / (i + 1) as f64).ln() + ln_p - ln_q;
        let (hi, lo) = if acc > term { (acc, term) } else { (term, acc) };
        acc = hi + (lo - hi).exp().ln_1p();
    }
    acc
}

fn cdf(k: u64, n: u64, p: f64) -> f64 {
    if p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return if k >= n { 1.0 } else { 0.0 };
    }
    ln_cdf(k, n, p).exp().min(1.0)
}

/// Bisection for the root of a decreasing function of `p` on `[0, 1]`.
fn bisect(mut f: impl FnMut(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Upper bound `p_u` with `P(X ≤ k | p_u) = alpha`.
pub fn clopper_pearson_upper(k: u64, n: u64, alpha: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    bisect(|p| cdf(k, n, p) - alpha)
}

/// Lower bound `p_l` with `P(X ≥ k | p_l) = alpha`.
pub fn clopper_pearson_lower(k: u64, n: u64, alpha: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    // P(X ≥ k) = 1 − P(X ≤ k−1) is increasing in p
    bisect(|p| alpha - (1.0 - cdf(k - 1, n, p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_successes_closed_form() {
        // (1 − p)^n = α
        let (n, alpha) = (100u64, 0.01);
        let expected = 1.0 - alpha.powf(1.0 / n as f64);
        assert!((clopper_pearson_upper(0, n, alpha) - expected).abs() < 1e-12);
        assert_eq!(clopper_pearson_lower(0, n, alpha), 0.0);
    }

    #[test]
    fn all_successes_closed_form() {
        // p^n = α
        let (n, alpha) = (50u64, 0.01);
        let expected = alpha.powf(1.0 / n as f64);
        assert!((clopper_pearson_lower(n, n, alpha) - expected).abs() < 1e-12);
        assert_eq!(clopper_pearson_upper(n, n, alpha), 1.0);
    }

    #[test]
    fn bounds_bracket_estimate() {
        for (k, n) in [(1u64, 10u64), (5, 100), (37, 10_000), (500, 1000)] {
            let p = k as f64 / n as f64;
            let lo = clopper_pearson_lower(k, n, 0.01);
            let hi = clopper_pearson_upper(k, n, 0.01);
            assert!(lo < p && p < hi, "{k}/{n}: {lo} {hi}");
        }
    }

    #[test]
    fn cdf_matches_direct_sum() {
        // Bin(5, 0.3): P(X ≤ 2) = 0.16807 + 0.36015 + 0.3087
        assert!((cdf(2, 5, 0.3) - 0.83692).abs() < 1e-12);
    }
}
