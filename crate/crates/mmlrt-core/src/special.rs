//! Special functions for the chi-square reference p-value.
//!
//! Self-contained: Lanczos log-gamma plus the regularized incomplete gamma
//! pair P/Q, with Q computed directly (series for x < a+1, Lentz continued
//! fraction otherwise) so far-tail p-values like 1e-55 come out at full
//! relative precision instead of as `1 - CDF` cancellation dust.

use crate::error::{Error, Result};

/// Lanczos coefficients, g = 7, n = 9.  Relative error below 1e-14 on the
/// positive axis, which is far tighter than anything downstream needs.
const LANCZOS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

const LN_SQRT_2PI: f64 = 0.9189385332046727;

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma: x must be positive, got {x}");
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx).
        let s = (std::f64::consts::PI * x).sin();
        return std::f64::consts::PI.ln() - s.ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    LN_SQRT_2PI + (x + 0.5) * t.ln() - t + acc.ln()
}

const MAX_ITERS: usize = 400;
const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;

/// Series for the lower regularized incomplete gamma P(a, x), x < a + 1.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITERS {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (a * x.ln() - x - ln_gamma(a)).exp()
}

/// Lentz continued fraction for the upper regularized incomplete gamma
/// Q(a, x), x >= a + 1.
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITERS {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (a * x.ln() - x - ln_gamma(a)).exp() * h
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x)/Γ(a).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_q: need a > 0, x >= 0");
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "gamma_p: need a > 0, x >= 0");
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Chi-square survival function P(X > x) with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::domain("chi2_sf: df must be at least 1"));
    }
    if !x.is_finite() && x > 0.0 {
        return Ok(0.0);
    }
    if !x.is_finite() {
        return Err(Error::domain("chi2_sf: x must be finite or +inf"));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    Ok(gamma_q(df as f64 / 2.0, x / 2.0))
}

/// Upper quantile: smallest x with P(X > x) <= p.  Bisection on `chi2_sf`,
/// good to ~1e-10 absolute, which is plenty for calibration thresholds.
pub fn chi2_quantile(p_upper: f64, df: usize) -> Result<f64> {
    if !(0.0 < p_upper && p_upper < 1.0) {
        return Err(Error::domain("chi2_quantile: p must be in (0,1)"));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while chi2_sf(hi, df)? > p_upper {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::domain("chi2_quantile: quantile out of range"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_sf(mid, df)? > p_upper {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-11 * (1.0 + hi) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// log(e^a + e^b) without overflow; -inf inputs behave like zero mass.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log Σ e^{x_i} over a slice; empty slice gives -inf.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - hi).exp()).sum();
    hi + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        // Γ(n) = (n-1)!
        let facts = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0];
        for (i, &f) in facts.iter().enumerate() {
            let x = (i + 1) as f64;
            assert!((ln_gamma(x) - f64::ln(f)).abs() < 1e-13, "n = {}", i + 1);
        }
        // Γ(1/2) = sqrt(pi)
        assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-13);
    }

    #[test]
    fn gamma_pq_complement() {
        for &a in &[0.5, 1.0, 2.5, 4.0, 10.0] {
            for &x in &[0.1, 0.5, 1.0, 3.0, 8.0, 20.0] {
                let p = gamma_p(a, x);
                let q = gamma_q(a, x);
                assert!((p + q - 1.0).abs() < 1e-12, "a={a} x={x}");
            }
        }
    }

    #[test]
    fn chi2_sf_known_quantiles() {
        // Classic 0.95 quantiles.
        assert!((chi2_sf(3.841458820694124, 1).unwrap() - 0.05).abs() < 1e-12);
        assert!((chi2_sf(11.070497693516351, 5).unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn chi2_sf_far_tail_even_df() {
        // For even df the tail is a finite Erlang sum:
        // Q(df/2, x/2) = e^{-x/2} Σ_{j<df/2} (x/2)^j / j!
        let erlang_tail = |x: f64, df: usize| -> f64 {
            let h = x / 2.0;
            let mut term = 1.0;
            let mut sum = 1.0;
            for j in 1..(df / 2) {
                term *= h / j as f64;
                sum += term;
            }
            (-h).exp() * sum
        };
        for &(x, df) in &[(276.96, 8), (553.92, 8), (40.0, 4), (12.3, 2)] {
            let ours = chi2_sf(x, df).unwrap();
            let exact = erlang_tail(x, df);
            assert!(
                (ours / exact - 1.0).abs() < 1e-10,
                "x={x} df={df}: {ours} vs {exact}"
            );
        }
        // Frozen far-tail values (30-digit offline evaluation of the Erlang sum).
        assert!((chi2_sf(276.96, 8).unwrap() / 3.2685264e-55 - 1.0).abs() < 1e-6);
        assert!((chi2_sf(553.92, 8).unwrap() / 1.8690153e-114 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn chi2_quantile_inverts_sf() {
        for &df in &[1usize, 3, 5, 8] {
            for &p in &[0.5, 0.1, 0.05, 0.01] {
                let q = chi2_quantile(p, df).unwrap();
                assert!((chi2_sf(q, df).unwrap() - p).abs() < 1e-9, "df={df} p={p}");
            }
        }
    }

    #[test]
    fn log_add_exp_basics() {
        assert!((log_add_exp(0.0, 0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, -1.5), -1.5);
        assert_eq!(log_add_exp(-1.5, f64::NEG_INFINITY), -1.5);
        // Large offsets do not overflow.
        let v = log_add_exp(1000.0, 0.0);
        assert!((v - 1000.0).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_matches_pairwise() {
        let xs = [-1.0, 0.5, 2.0, -3.0];
        let mut acc = f64::NEG_INFINITY;
        for &x in &xs {
            acc = log_add_exp(acc, x);
        }
        assert!((log_sum_exp(&xs) - acc).abs() < 1e-13);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
