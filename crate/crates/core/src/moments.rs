//! Analytic second moments of the Fourier modes and of the sufficient statistics.
//!
//! With zero initial data each mode is a stochastic convolution
//! `(u_k, v_k)(t) = int_0^t g(t - s) dw_k(s)` with kernel
//! `g(s) = e^{-bs} (sin(ell s)/ell, cos(ell s) - (b/ell) sin(ell s))`, so by the Ito
//! isometry `Cov(u_k(t), v_k(t)) = int_0^t g g^T ds`. The same integrals give the
//! one-step noise covariance of the exact sampler in [`crate::modes`].

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{c_factor, ell, validate_params, ModelParams};
use crate::quad::gauss_legendre;
use crate::scalar::Real;
use crate::special::{phi1_complex, phi2_complex};

/// `(E u_k^2, E v_k^2, E u_k v_k)` at one time, or their time integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeMoments<T> {
    pub e_uu: T,
    pub e_vv: T,
    pub e_uv: T,
}

impl<T: Real> ModeMoments<T> {
    pub fn zero() -> Self {
        Self {
            e_uu: T::zero(),
            e_vv: T::zero(),
            e_uv: T::zero(),
        }
    }
}

/// Weight applied to the kernel products before integrating over `[0, t]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Weight {
    /// Moments at time `t`.
    Unit,
    /// `t - s`: yields `int_0^t (moment at tau) d tau`.
    Ramp,
}

/// Kernel integrals `(1/ell^2) int_0^t w(s) e^{-2bs} {sin^2, (ell cos - b sin)^2,
/// sin (ell cos - b sin)}(ell s) ds`.
///
/// Closed form through complex exponential divided differences when the phase
/// `ell t` exceeds one and the oscillation dominates the exponential rate;
/// otherwise the `sin^2` combination cancels badly and a composite
/// Gauss-Legendre rule on panels of unit phase is used instead.
pub(crate) fn kernel_integrals<T: Real>(ell: T, b: T, t: T, weight: Weight) -> ModeMoments<T> {
    if t <= T::zero() {
        return ModeMoments::zero();
    }
    let two = T::lit(2.0);
    if ell * t > T::one() && ell >= b.abs() {
        closed_form(ell, b, t, weight)
    } else {
        let rate = ell + (b + b).abs();
        let panels = (rate * t)
            .ceil()
            .to_usize()
            .unwrap_or(1)
            .clamp(1, 1_000_000);
        let inv_l2 = T::one() / (ell * ell);
        let [uu, vv, uv] = gauss_legendre(t, panels, |s| {
            let w = match weight {
                Weight::Unit => T::one(),
                Weight::Ramp => t - s,
            };
            let e = (-(two * b) * s).exp() * w * inv_l2;
            let (sn, cs) = (ell * s).sin_cos();
            let g = ell * cs - b * sn;
            [e * sn * sn, e * g * g, e * sn * g]
        });
        ModeMoments {
            e_uu: uu,
            e_vv: vv,
            e_uv: uv,
        }
    }
}

fn closed_form<T: Real>(ell: T, b: T, t: T, weight: Weight) -> ModeMoments<T> {
    let two = T::lit(2.0);
    let beta = two * b;
    // P0 = int w e^{-beta s}; Pc + i Ps = int w e^{(-beta + 2i ell) s}
    let z0 = Complex::new(-beta * t, T::zero());
    let z1 = Complex::new(-beta * t, two * ell * t);
    let (p0, pcs) = match weight {
        Weight::Unit => (phi1_complex(z0).re * t, phi1_complex(z1) * t),
        Weight::Ramp => (phi2_complex(z0).re * t * t, phi2_complex(z1) * (t * t)),
    };
    let (pc, ps) = (pcs.re, pcs.im);
    let l2 = ell * ell;
    let denom = two * l2;
    let diff = p0 - pc;
    ModeMoments {
        e_uu: diff / denom,
        e_vv: ((l2 + b * b) * p0 + (l2 - b * b) * pc - two * b * ell * ps) / denom,
        e_uv: (ell * ps - b * diff) / denom,
    }
}

/// `E u_k^2(t)`, `E v_k^2(t)` and `E u_k(t) v_k(t)`.
pub fn mode_second_moments<T: Real>(
    k: usize,
    params: &ModelParams<T>,
    t: T,
) -> Result<ModeMoments<T>> {
    if !(t >= T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "t >= 0 required (got {t})"
        )));
    }
    let l = ell(k, params)?;
    Ok(kernel_integrals(l, params.b(), t, Weight::Unit))
}

/// `int_0^T` of each entry of [`mode_second_moments`].
pub fn integrated_second_moments<T: Real>(
    k: usize,
    params: &ModelParams<T>,
    horizon: T,
) -> Result<ModeMoments<T>> {
    if !(horizon > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "T > 0 required (got {horizon})"
        )));
    }
    let l = ell(k, params)?;
    Ok(kernel_integrals(l, params.b(), horizon, Weight::Ramp))
}

/// Expectations of the quadratic statistics `J1`, `J2`, `J12` at truncation `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedStats<T> {
    pub ej1: T,
    pub ej2: T,
    pub ej12: T,
}

/// How `E J12` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum J12Expectation {
    /// `sum k^2 E u_k^2(T) / 2` (terminal-value identity).
    TerminalIdentity,
    /// `sum k^2 int_0^T E u_k v_k dt`.
    CrossMoment,
}

pub fn expected_suff_stats<T: Real>(
    params: &ModelParams<T>,
    n: usize,
    horizon: T,
) -> Result<ExpectedStats<T>> {
    expected_suff_stats_with(params, n, horizon, J12Expectation::TerminalIdentity)
}

pub fn expected_suff_stats_with<T: Real>(
    params: &ModelParams<T>,
    n: usize,
    horizon: T,
    j12: J12Expectation,
) -> Result<ExpectedStats<T>> {
    validate_params(params, n)?;
    let mut out = ExpectedStats {
        ej1: T::zero(),
        ej2: T::zero(),
        ej12: T::zero(),
    };
    for k in 1..=n {
        let kk = T::from_usize_lossy(k);
        let k2 = kk * kk;
        let integ = integrated_second_moments(k, params, horizon)?;
        out.ej1 = out.ej1 + k2 * k2 * integ.e_uu;
        out.ej2 = out.ej2 + integ.e_vv;
        out.ej12 = out.ej12
            + match j12 {
                J12Expectation::TerminalIdentity => {
                    k2 * mode_second_moments(k, params, horizon)?.e_uu / T::lit(2.0)
                }
                J12Expectation::CrossMoment => k2 * integ.e_uv,
            };
    }
    Ok(out)
}

/// Per-mode scaled energies and their `k -> infinity` limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerModeLimits<T> {
    /// `k^2 int_0^T E u_k^2 dt`
    pub scaled_u: T,
    /// `int_0^T E v_k^2 dt`
    pub v: T,
    /// `C(theta2, T) / theta1`
    pub limit_u: T,
    /// `C(theta2, T)`
    pub limit_v: T,
}

pub fn per_mode_limits<T: Real>(
    params: &ModelParams<T>,
    horizon: T,
    k: usize,
) -> Result<PerModeLimits<T>> {
    let integ = integrated_second_moments(k, params, horizon)?;
    let kk = T::from_usize_lossy(k);
    let c = c_factor(params.theta2, horizon);
    Ok(PerModeLimits {
        scaled_u: kk * kk * integ.e_uu,
        v: integ.e_vv,
        limit_u: c / params.theta1,
        limit_v: c,
    })
}

/// Truncated `E ||u(t)||_gamma^2 = sum_{k <= N} k^{2 gamma} E u_k^2(t)`.
pub fn sobolev_norm_sq<T: Real>(params: &ModelParams<T>, t: T, gamma: T, n: usize) -> Result<T> {
    validate_params(params, n)?;
    let mut acc = T::zero();
    for k in 1..=n {
        let w = T::from_usize_lossy(k).powf(gamma + gamma);
        acc = acc + w * mode_second_moments(k, params, t)?.e_uu;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn p(t1: f64, t2: f64) -> ModelParams<f64> {
        ModelParams::new(t1, t2).unwrap()
    }

    #[test]
    fn zero_time_is_zero() {
        let m = mode_second_moments(3, &p(1.0, -0.5), 0.0).unwrap();
        assert_eq!(m, ModeMoments::zero());
    }

    #[test]
    fn harmonic_unit_mode_at_pi() {
        let m = mode_second_moments(1, &p(1.0, 0.0), PI).unwrap();
        assert!((m.e_uu - PI / 2.0).abs() < 1e-13);
        assert!((m.e_vv - PI / 2.0).abs() < 1e-13);
        assert!(m.e_uv.abs() < 1e-13);
    }

    #[test]
    fn harmonic_cross_moment_is_half_sin_squared() {
        for &t in &[0.3, 1.0, 2.2, 5.0] {
            let m = mode_second_moments(1, &p(1.0, 0.0), t).unwrap();
            assert!((m.e_uv - 0.5 * (t as f64).sin().powi(2)).abs() < 1e-13);
        }
    }

    #[test]
    fn harmonic_third_mode_at_pi() {
        let m = mode_second_moments(3, &p(1.0, 0.0), PI).unwrap();
        let expected = (PI / 2.0 - (6.0 * PI).sin() / 12.0) / 9.0;
        assert!((m.e_uu - PI / 18.0).abs() < 1e-13);
        assert!((m.e_uu - expected).abs() < 1e-13);
    }

    #[test]
    fn scaled_position_variance_bounded() {
        let q = p(1.0, -0.5);
        let mut max_scaled: f64 = 0.0;
        for k in 1..=50 {
            let l = ell(k, &q).unwrap();
            for i in 0..=40 {
                let t = 2.0 * i as f64 / 40.0;
                let m = mode_second_moments(k, &q, t).unwrap();
                max_scaled = max_scaled.max(l * l * m.e_uu);
            }
        }
        // damped: l^2 E u^2 <= int_0^T e^{-2bs} ds = (1 - e^{-2bT}) / (2b)
        let bound = (1.0 - (-0.5_f64 * 2.0).exp()) / 0.5;
        assert!(max_scaled <= bound + 1e-12, "{max_scaled} > {bound}");
    }

    #[test]
    fn velocity_variance_bounded_in_k() {
        let q = p(1.0, -0.5);
        let t = 1.3;
        let max_to = |n: usize| {
            (1..=n)
                .map(|k| mode_second_moments(k, &q, t).unwrap().e_vv)
                .fold(0.0_f64, f64::max)
        };
        let m50 = max_to(50);
        let m500 = max_to(500);
        assert!(m500 <= 1.1 * m50);
    }

    #[test]
    fn derivative_of_position_variance_is_twice_cross() {
        // d/dt E u^2 = 2 E uv
        let q = p(4.0, 1.0);
        let h = 1e-5;
        for &t in &[0.2, 1.0, 1.7] {
            let up = mode_second_moments(2, &q, t + h).unwrap().e_uu;
            let dn = mode_second_moments(2, &q, t - h).unwrap().e_uu;
            let cross = mode_second_moments(2, &q, t).unwrap().e_uv;
            assert!(((up - dn) / (2.0 * h) - 2.0 * cross).abs() < 1e-7);
        }
    }

    #[test]
    fn both_branches_agree_at_switch() {
        // ell*t straddling 1 exercises closed form vs panel quadrature
        let l = 1.0_f64;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(b.abs());
        for &b in &[-0.4_f64, 0.0, 0.3] {
            for w in [Weight::Unit, Weight::Ramp] {
                let lo = kernel_integrals(l, b, 1.0 - 1e-12, w);
                let hi = kernel_integrals(l, b, 1.0 + 1e-12, w);
                assert!(close(lo.e_uu, hi.e_uu), "b={b} {lo:?} {hi:?}");
                assert!(close(lo.e_vv, hi.e_vv), "b={b} {lo:?} {hi:?}");
                assert!(close(lo.e_uv, hi.e_uv), "b={b} {lo:?} {hi:?}");
            }
        }
    }

    #[test]
    fn expected_stats_growth() {
        let q = p(1.0, 0.0);
        let e = expected_suff_stats(&q, 400, 2.0).unwrap();
        let n = 400.0_f64;
        assert!((e.ej1 / n.powi(3) - 1.0 / 3.0).abs() <= 0.1 / 3.0);
        assert!((e.ej2 / n - 1.0).abs() <= 0.05);
        assert!((e.ej12 / n - 0.5).abs() <= 0.05);
    }

    #[test]
    fn j12_routes_agree() {
        for &(t1, t2) in &[(1.0, 0.0), (1.0, -0.5), (4.0, 1.0)] {
            let q = p(t1, t2);
            let a =
                expected_suff_stats_with(&q, 60, 2.0, J12Expectation::TerminalIdentity).unwrap();
            let b = expected_suff_stats_with(&q, 60, 2.0, J12Expectation::CrossMoment).unwrap();
            assert!(
                (a.ej12 - b.ej12).abs() / a.ej12 < 1e-8,
                "{} vs {}",
                a.ej12,
                b.ej12
            );
            assert_eq!(a.ej1, b.ej1);
        }
    }

    #[test]
    fn per_mode_limit_examples() {
        let l = per_mode_limits(&p(1.0, 0.0), 2.0, 200).unwrap();
        assert!((l.scaled_u - 1.0).abs() < 0.01);
        assert!((l.v - 1.0).abs() < 0.01);
        assert_eq!(l.limit_u, 1.0);
        assert_eq!(l.limit_v, 1.0);
        let l = per_mode_limits(&p(4.0, 0.0), 2.0, 200).unwrap();
        assert!((l.scaled_u - 0.25).abs() < 0.0025);
    }

    #[test]
    fn sobolev_partial_sums() {
        let q = p(1.0, 0.0);
        let t = 1.0;
        let a = sobolev_norm_sq(&q, t, 0.25, 1_000).unwrap();
        let b = sobolev_norm_sq(&q, t, 0.25, 10_000).unwrap();
        assert!((b - a).abs() / b < 0.05);
        let a = sobolev_norm_sq(&q, t, 0.75, 1_000).unwrap();
        let b = sobolev_norm_sq(&q, t, 0.75, 10_000).unwrap();
        assert!((2.5..=3.5).contains(&(b / a)), "ratio {}", b / a);
        assert_eq!(sobolev_norm_sq(&q, 0.0, 0.75, 100).unwrap(), 0.0);
    }

    #[test]
    fn invalid_mode_propagates() {
        let q = ModelParams {
            theta1: 0.01,
            theta2: 4.0,
        };
        assert!(mode_second_moments(1, &q, 1.0).is_err());
        assert!(expected_suff_stats(&q, 5, 1.0).is_err());
    }
}
