use blockade_core::specfun::{bessel_i, bessel_i_scaled, laguerre_assoc, w_coeff, w_polynomial};
use num::traits::{One, ToPrimitive, Zero};
use num::{BigInt, BigRational};
use proptest::prelude::*;

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `I_n(x)` for rational `x` from the power series summed in exact
/// arithmetic until the terms drop below `1e-40` of the partial sum.
fn bessel_exact(n: u32, x: &BigRational) -> f64 {
    let half = x / BigRational::from_integer(2.into());
    let half_sq = &half * &half;
    let mut term = BigRational::one();
    for k in 1..=n {
        term = term * &half / BigRational::from_integer(k.into());
    }
    let mut sum = BigRational::zero();
    let cutoff = ratio(1, 10).pow(40);
    let mut k = 0u32;
    loop {
        sum += &term;
        k += 1;
        term = term * &half_sq / BigRational::from_integer((k * (k + n)).into());
        if k > 5 && &term < &(&sum * &cutoff) {
            break;
        }
    }
    sum.to_f64().expect("finite")
}

/// `W_{n,p} = (-1)^n U(-n, 1-n+p, z)` from the terminating Kummer series
/// `U(-n, b, z) = sum_k (-n)_k (-p)_k / k! (-1)^k z^{n-k}` with `b = 1-n+p`.
fn w_exact(n: u32, p: u32, z: &BigRational) -> f64 {
    let mut u = BigRational::zero();
    for k in 0..=n {
        let mut c = BigRational::one();
        for j in 0..k {
            c = c * BigRational::from_integer((-(n as i64) + j as i64).into())
                * BigRational::from_integer((-(p as i64) + j as i64).into())
                / BigRational::from_integer((j as i64 + 1).into());
        }
        if k % 2 == 1 {
            c = -c;
        }
        u += c * z.pow((n - k) as i32);
    }
    if n % 2 == 1 {
        u = -u;
    }
    u.to_f64().expect("finite")
}

#[test]
fn bessel_matches_exact_series() {
    for (num, den) in [(1, 10), (1, 2), (3, 1), (29, 2), (15, 1), (31, 2), (25, 1), (40, 1)] {
        let x = ratio(num, den);
        let xf = num as f64 / den as f64;
        for n in [0u32, 1, 2, 5, 10, 20] {
            let exact = bessel_exact(n, &x);
            let got = bessel_i(n as i64, xf).unwrap();
            assert!(
                ((got - exact) / exact).abs() < 1e-12,
                "I_{n}({xf}) = {got}, exact {exact}"
            );
        }
    }
}

#[test]
fn scaled_bessel_consistent_with_unscaled() {
    for x in [0.3, 7.0, 14.9, 15.1, 40.0, 120.0] {
        for n in [0i64, 3, 17] {
            let a = bessel_i_scaled(n, x).unwrap();
            let b = bessel_i(n, x).unwrap() * (-x).exp();
            assert!(((a - b) / b).abs() < 1e-12);
        }
    }
}

#[test]
fn w_coeff_matches_kummer_series() {
    for (num, den) in [(1, 16), (1, 4), (9, 16), (1, 1), (9, 4)] {
        let z = ratio(num, den);
        let eta = (num as f64 / den as f64).sqrt();
        for n in 0..=10 {
            for p in 0..=12 {
                let exact = w_exact(n, p, &z);
                let got = w_coeff(n, p, eta).unwrap();
                let scale = exact.abs().max(1.0);
                assert!((got - exact).abs() <= 1e-10 * scale, "W_{n},{p}({eta}) = {got}, exact {exact}");
            }
        }
    }
}

#[test]
fn w_polynomial_is_exact_at_integers() {
    let z = ratio(3, 1);
    for n in 0..=8 {
        for p in 0..=8 {
            let poly = w_polynomial(n, p);
            let exact = w_exact(n, p, &z);
            assert!((poly.eval(3.0) - exact).abs() <= 1e-12 * exact.abs().max(1.0));
        }
    }
}

#[test]
fn laguerre_rejects_non_finite_argument() {
    assert!(laguerre_assoc(3, 0.5, f64::NAN).is_err());
}

proptest! {
    #[test]
    fn bessel_symmetric_in_order(n in 0i64..40, x in 0.0f64..50.0) {
        let a = bessel_i(n, x).unwrap();
        let b = bessel_i(-n, x).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn bessel_three_term_recurrence(n in 1i64..=30, x in 0.1f64..50.0) {
        let lhs = bessel_i(n - 1, x).unwrap() - bessel_i(n + 1, x).unwrap();
        let rhs = 2.0 * n as f64 / x * bessel_i(n, x).unwrap();
        prop_assert!(((lhs - rhs) / rhs).abs() <= 1e-9, "n {} x {}: {} vs {}", n, x, lhs, rhs);
    }

    #[test]
    fn bessel_positive_and_decreasing_in_order(n in 0i64..30, x in 0.01f64..50.0) {
        let a = bessel_i(n, x).unwrap();
        let b = bessel_i(n + 1, x).unwrap();
        prop_assert!(a > 0.0 && b < a);
    }
}
