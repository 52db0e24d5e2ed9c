//! Zeroth-order Bessel function of the first kind.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{ensure_finite, Result};

/// Above this the Hankel expansion is accurate to ~1e-13; below it the
/// power series loses at most ~3e-12 to cancellation.
const SERIES_LIMIT: f64 = 14.0;

/// `J0(x)`, absolute error below 1e-10 for `|x| <= 1e4`.
pub fn bessel_j0(x: f64) -> Result<f64> {
    let x = ensure_finite(x)?.abs();
    Ok(if x <= SERIES_LIMIT {
        series(x)
    } else {
        hankel(x)
    })
}

fn series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= -q / (k * k);
        sum += term;
        if term.abs() < 1e-18 {
            return sum;
        }
        k += 1.0;
    }
}

fn hankel(x: f64) -> f64 {
    // b_k = a_k(0) / x^k with a_k/a_{k-1} = -(2k-1)^2 / (8k)
    let mut p = 1.0;
    let mut q = 0.0;
    let mut b = 1.0f64;
    let mut k = 1;
    loop {
        let odd = (2 * k - 1) as f64;
        let next = b * (-(odd * odd) / (8.0 * k as f64 * x));
        if next.abs() >= b.abs() || next.abs() < 1e-18 {
            break;
        }
        b = next;
        // (-1)^{floor(k/2)} alternation over the even and odd subsequences
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * b;
        } else {
            q += sign * b;
        }
        k += 1;
    }
    let (s, c) = x.sin_cos();
    let cos_w = (c + s) * FRAC_1_SQRT_2;
    let sin_w = (s - c) * FRAC_1_SQRT_2;
    (2.0 / (PI * x)).sqrt() * (p * cos_w - q * sin_w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_zero() {
        assert_eq!(bessel_j0(0.0).unwrap(), 1.0);
    }

    #[test]
    fn even() {
        for i in 0..400 {
            let x = i as f64 * 0.37 + 0.01;
            assert_eq!(bessel_j0(x).unwrap(), bessel_j0(-x).unwrap());
        }
    }

    #[test]
    fn first_zero() {
        assert!(bessel_j0(2.404825557695773).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn both_branches_agree_at_the_switch() {
        let a = series(SERIES_LIMIT);
        let b = hankel(SERIES_LIMIT);
        assert!((a - b).abs() < 1e-11, "{a} {b}");
    }

    #[test]
    fn rejects_non_finite() {
        assert!(bessel_j0(f64::NAN).is_err());
        assert!(bessel_j0(f64::INFINITY).is_err());
    }
}
