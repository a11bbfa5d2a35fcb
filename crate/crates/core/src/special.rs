//! Cancellation-free forms of the exponential divided differences
//! `phi1(x) = (e^x - 1)/x` and `phi2(x) = (e^x - 1 - x)/x^2`.

use num_complex::Complex;

use crate::scalar::Real;

/// Below this |x| the real versions switch to a 6-term Maclaurin polynomial.
pub const SERIES_SWITCH: f64 = 1e-4;

/// `(e^x - 1)/x`, equal to 1 at `x = 0`.
pub fn phi1<T: Real>(x: T) -> T {
    if x.abs() < T::lit(SERIES_SWITCH) {
        // sum_{n=0}^{5} x^n/(n+1)!
        horner(
            x,
            &[
                1.0,
                1.0 / 2.0,
                1.0 / 6.0,
                1.0 / 24.0,
                1.0 / 120.0,
                1.0 / 720.0,
            ],
        )
    } else {
        x.exp_m1() / x
    }
}

/// `(e^x - 1 - x)/x^2`, equal to 1/2 at `x = 0`.
pub fn phi2<T: Real>(x: T) -> T {
    if x.abs() < T::lit(SERIES_SWITCH) {
        // sum_{n=0}^{5} x^n/(n+2)!
        horner(
            x,
            &[
                1.0 / 2.0,
                1.0 / 6.0,
                1.0 / 24.0,
                1.0 / 120.0,
                1.0 / 720.0,
                1.0 / 5040.0,
            ],
        )
    } else {
        (x.exp_m1() - x) / (x * x)
    }
}

fn horner<T: Real>(x: T, coeffs: &[f64]) -> T {
    coeffs
        .iter()
        .rev()
        .fold(T::zero(), |acc, &c| acc * x + T::lit(c))
}

/// Complex switch point; the series below it is summed until terms vanish.
const COMPLEX_SERIES_SWITCH: f64 = 0.5;

/// `(e^z - 1)/z` for complex `z`.
pub fn phi1_complex<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.norm() < T::lit(COMPLEX_SERIES_SWITCH) {
        exp_series(z, 1)
    } else {
        (z.exp() - Complex::new(T::one(), T::zero())) / z
    }
}

/// `(e^z - 1 - z)/z^2` for complex `z`.
pub fn phi2_complex<T: Real>(z: Complex<T>) -> Complex<T> {
    if z.norm() < T::lit(COMPLEX_SERIES_SWITCH) {
        exp_series(z, 2)
    } else {
        (z.exp() - Complex::new(T::one(), T::zero()) - z) / (z * z)
    }
}

/// `sum_{n>=0} z^n / (n+shift)!`
fn exp_series<T: Real>(z: Complex<T>, shift: usize) -> Complex<T> {
    let mut fact = T::one();
    for i in 2..=shift {
        fact = fact * T::from_usize_lossy(i);
    }
    let mut term = Complex::new(T::one() / fact, T::zero());
    let mut sum = term;
    for n in 1..40 {
        term = term * z / T::from_usize_lossy(n + shift);
        sum = sum + term;
        if term.norm() <= T::epsilon() * sum.norm() {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_branches_meet_at_switch() {
        for &x in &[
            SERIES_SWITCH * 0.999,
            SERIES_SWITCH * 1.001,
            -SERIES_SWITCH * 1.001,
        ] {
            let direct1 = x.exp_m1() / x;
            let direct2 = (x.exp_m1() - x) / (x * x);
            assert!((phi1(x) - direct1).abs() < 1e-14);
            assert!((phi2(x) - direct2).abs() / 0.5 < 1e-11);
        }
        assert_eq!(phi1(0.0_f64), 1.0);
        assert_eq!(phi2(0.0_f64), 0.5);
    }

    #[test]
    fn complex_matches_real_on_axis() {
        for &x in &[-3.0_f64, -0.3, 0.2, 0.49, 0.51, 2.0] {
            let z = Complex::new(x, 0.0);
            assert!((phi1_complex(z).re - x.exp_m1() / x).abs() < 1e-14);
            assert!((phi2_complex(z).re - (x.exp_m1() - x) / (x * x)).abs() < 1e-13);
        }
    }

    #[test]
    fn complex_series_agrees_with_direct_near_switch() {
        for &(re, im) in &[(0.3_f64, 0.41), (-0.2, 0.47), (0.0, 0.52), (0.1, -0.6)] {
            let z = Complex::new(re, im);
            let one = Complex::new(1.0, 0.0);
            let d1 = (z.exp() - one) / z;
            let d2 = (z.exp() - one - z) / (z * z);
            assert!((exp_series(z, 1) - d1).norm() < 1e-14);
            assert!((exp_series(z, 2) - d2).norm() < 1e-13);
        }
    }
}
