//! Special functions: inverse error function and chi-square quantiles.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::{erf, erfc};

const TWO_OVER_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Single-precision-grade rational/polynomial guess for `erf^-1`.
fn erf_inv_guess(y: f64) -> f64 {
    let mut w = -((1.0 - y) * (1.0 + y)).ln();
    let p = if w < 5.0 {
        w -= 2.5;
        [
            2.810_226_36e-08,
            3.432_739_39e-07,
            -3.523_387_7e-06,
            -4.391_506_54e-06,
            0.000_218_580_87,
            -0.001_253_725_03,
            -0.004_177_681_64,
            0.246_640_727,
            1.501_409_41,
        ]
        .iter()
        .fold(0.0, |acc, c| c + acc * w)
    } else {
        w = w.sqrt() - 3.0;
        [
            -0.000_200_214_257,
            0.000_100_950_558,
            0.001_349_343_22,
            -0.003_673_428_44,
            0.005_739_507_73,
            -0.007_622_461_3,
            0.009_438_870_47,
            1.001_674_06,
            2.832_976_82,
        ]
        .iter()
        .fold(0.0, |acc, c| c + acc * w)
    };
    p * y
}

/// Inverse error function on (-1, 1): polynomial guess plus two Newton steps.
/// Tails are refined against `erfc` so that `1 - |y|` keeps full precision.
pub fn erf_inv(y: f64) -> f64 {
    if y.is_nan() || y <= -1.0 || y >= 1.0 {
        return match y {
            y if y == 1.0 => f64::INFINITY,
            y if y == -1.0 => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
    }
    if y == 0.0 {
        return 0.0;
    }
    let sign = y.signum();
    let a = y.abs();
    let mut x = erf_inv_guess(a);
    for _ in 0..2 {
        let slope = TWO_OVER_SQRT_PI * (-x * x).exp();
        let r = if a > 0.5 {
            (1.0 - a) - erfc(x)
        } else {
            erf(x) - a
        };
        x -= r / slope;
    }
    sign * x
}

/// Quantile of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_quantile(p: f64, dof: f64) -> f64 {
    ChiSquared::new(dof)
        .expect("positive degrees of freedom")
        .inverse_cdf(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: bisection on erf.
    fn erf_inv_bisect(y: f64) -> f64 {
        let (mut lo, mut hi) = (-7.0f64, 7.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if erf(mid) < y {
                lo = mid
            } else {
                hi = mid
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn erf_inv_matches_bisection() {
        for i in 1..200 {
            let y = -0.995 + 1.99 * i as f64 / 200.0;
            let x = erf_inv(y);
            assert!((x - erf_inv_bisect(y)).abs() < 1e-12, "y={y}");
        }
    }

    #[test]
    fn erf_inv_tails() {
        for k in 1..=9 {
            let d = 10f64.powi(-k);
            for y in [1.0 - d, -1.0 + d] {
                let x = erf_inv(y);
                let back = if y > 0.0 { 1.0 - erfc(x) } else { erfc(-x) - 1.0 };
                // relative to the tail mass 1 - |y|
                assert!(((1.0 - y.abs()) - erfc(x.abs())).abs() <= 1e-12 * d.max(1e-3), "y={y} back={back}");
            }
        }
        assert_eq!(erf_inv(0.0), 0.0);
        assert_eq!(erf_inv(1.0), f64::INFINITY);
        assert!(erf_inv(1.5).is_nan());
    }

    #[test]
    fn known_values() {
        assert!((2f64.sqrt() * erf_inv(0.2) - 0.253_347_1).abs() < 1e-6);
        assert!((2f64.sqrt() * erf_inv(0.4) - 0.524_400_5).abs() < 1e-6);
    }

    #[test]
    fn chi_square_3dof_999() {
        // closed-form CDF for 3 dof, bisected
        let cdf = |x: f64| erf((x / 2.0).sqrt()) - (2.0 * x / std::f64::consts::PI).sqrt() * (-x / 2.0).exp();
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if cdf(m) < 0.999 {
                lo = m
            } else {
                hi = m
            }
        }
        let q = chi_square_quantile(0.999, 3.0);
        assert!((q - lo).abs() < 1e-8);
        assert!((q - 16.266).abs() < 1e-3);
    }
}
