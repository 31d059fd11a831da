//! Special functions needed by the closed-form statistics.
//!
//! The modified Bessel function is only ever used in its exponentially
//! scaled form `e^{-|x|} I₀(x)`: the arguments reached at high SNR
//! (`2√(γx)/β` with `β` of order `10⁻³`) overflow `I₀` itself long before
//! the densities they feed become small.

use libm::{erf, erfc};

/// Switch point between the power series and the asymptotic expansion.
const SERIES_LIMIT: f64 = 30.0;

/// Exponentially scaled modified Bessel function of the first kind, order 0.
///
/// Returns `e^{-|x|} I₀(x)`. Relative accuracy is close to machine precision
/// on the whole real line.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x <= SERIES_LIMIT {
        // I₀(x) = Σ (x²/4)^k / (k!)², all terms positive.
        let t = 0.25 * x * x;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= t / (k * k);
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
            k += 1.0;
        }
        sum * (-x).exp()
    } else {
        // e^{-x} I₀(x) √(2πx) = Σ ((2k-1)!!)² / (k! 8^k x^k)
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            let next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
            if next >= term || next < sum * 1e-17 {
                sum += next;
                break;
            }
            term = next;
            sum += term;
            k += 1.0;
        }
        sum / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

/// Modified Bessel function `I₀(x)`; overflows to infinity above `x ≈ 713`.
pub fn bessel_i0(x: f64) -> f64 {
    bessel_i0_scaled(x) * x.abs().exp()
}

/// Probability mass of `N(mu, sigma²)` on the half-open interval `[lo, hi)`.
///
/// Infinite bounds are allowed. The evaluation switches to `erfc` when both
/// bounds sit in the same tail so that masses far below `10⁻¹⁶` keep their
/// relative accuracy.
pub fn normal_interval(lo: f64, hi: f64, mu: f64, sigma: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let scale = std::f64::consts::SQRT_2 * sigma;
    let a = (lo - mu) / scale;
    let b = (hi - mu) / scale;
    let p = if a >= 0.0 {
        0.5 * (erfc_ext(a) - erfc_ext(b))
    } else if b <= 0.0 {
        0.5 * (erfc_ext(-b) - erfc_ext(-a))
    } else {
        0.5 * (erf_ext(b) - erf_ext(a))
    };
    p.clamp(0.0, 1.0)
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * erfc_ext(-x / std::f64::consts::SQRT_2)
    } else {
        1.0 - 0.5 * erfc_ext(x / std::f64::consts::SQRT_2)
    }
}

fn erf_ext(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        -1.0
    } else {
        erf(x)
    }
}

fn erfc_ext(x: f64) -> f64 {
    if x == f64::INFINITY {
        0.0
    } else if x == f64::NEG_INFINITY {
        2.0
    } else {
        erfc(x)
    }
}

/// `ln(e^a + e^b)` without overflow.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}
