//! Model parameters, time grids and the closed-form constants that govern the
//! limiting behaviour of the estimator.
//!
//! The wave equation is parametrised as
//! `u_tt = theta1 * u_xx + theta2 * u_t + W_dot` on `(0, pi)` with zero initial
//! and boundary data. Equivalently `theta1 = a^2` (squared wave speed) and
//! `theta2 = -2b` (`b > 0` is damping, `b < 0` amplification).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::{phi1, phi2};

/// The unknown pair `(theta1, theta2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub theta1: T,
    pub theta2: T,
}

/// Qualitative behaviour of the free oscillation of each mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `b > 0` (`theta2 < 0`).
    Damped,
    /// `b = 0`.
    Harmonic,
    /// `b < 0` (`theta2 > 0`).
    Amplified,
}

impl<T: Real> ModelParams<T> {
    /// Builds a parameter pair, rejecting non-finite values and `theta1 <= 0`.
    pub fn new(theta1: T, theta2: T) -> Result<Self> {
        if !theta1.is_finite() || !theta2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "theta1 and theta2 must be finite (got {theta1}, {theta2})"
            )));
        }
        if theta1 <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "theta1 > 0 required (got {theta1})"
            )));
        }
        Ok(Self { theta1, theta2 })
    }

    /// From wave speed `a > 0` and damping coefficient `b`.
    pub fn from_speed_damping(a: T, b: T) -> Result<Self> {
        Self::new(a * a, -(b + b))
    }

    /// Wave speed `a = sqrt(theta1)`.
    pub fn a(&self) -> T {
        self.theta1.sqrt()
    }

    /// Damping coefficient `b = -theta2 / 2`.
    pub fn b(&self) -> T {
        -self.theta2 / T::lit(2.0)
    }

    pub fn regime(&self) -> Regime {
        let b = self.b();
        if b > T::zero() {
            Regime::Damped
        } else if b < T::zero() {
            Regime::Amplified
        } else {
            Regime::Harmonic
        }
    }

    /// Lossless widening to `f64`, used by reporting code.
    pub fn to_f64(&self) -> ModelParams<f64> {
        ModelParams {
            theta1: self.theta1.to_f64_lossy(),
            theta2: self.theta2.to_f64_lossy(),
        }
    }
}

/// Uniform grid `t_i = i * T / M`, `i = 0..=M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid<T> {
    pub horizon: T,
    pub steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(horizon: T, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "horizon T > 0 required (got {horizon})"
            )));
        }
        if steps == 0 {
            return Err(Error::DegenerateGrid("M >= 1 steps required".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn dt(&self) -> T {
        self.horizon / T::from_usize_lossy(self.steps)
    }

    /// Grid point `t_i`; the last point is exactly `T`.
    pub fn time(&self, i: usize) -> T {
        if i == self.steps {
            self.horizon
        } else {
            T::from_usize_lossy(i) * self.dt()
        }
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Every `factor`-th point of this grid, used for refinement studies.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.steps.is_multiple_of(factor) {
            return Err(Error::DegenerateGrid(format!(
                "cannot coarsen M={} by {factor}",
                self.steps
            )));
        }
        Self::new(self.horizon, self.steps / factor)
    }
}

/// Outcome of [`validate_params`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validity {
    pub k_max: usize,
    /// Whether the stricter `a >= 1, 2|b| <= 1` also holds. Informational only.
    pub strict_condition: bool,
    pub regime: Regime,
}

/// Checks `theta1 > 0` and the oscillation condition `theta1 k^2 > theta2^2 / 4`
/// for every `1 <= k <= k_max`.
///
/// The left side grows with `k`, so `k = 1` is the only mode that can fail.
pub fn validate_params<T: Real>(params: &ModelParams<T>, k_max: usize) -> Result<Validity> {
    if k_max == 0 {
        return Err(Error::InvalidParameter("k_max >= 1 required".into()));
    }
    if !(params.theta1 > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "theta1 > 0 required (got {})",
            params.theta1
        )));
    }
    if !params.theta2.is_finite() {
        return Err(Error::InvalidParameter("theta2 must be finite".into()));
    }
    let rhs = params.theta2 * params.theta2 / T::lit(4.0);
    // smallest violating k
    let lhs = params.theta1;
    if !(lhs > rhs) {
        return Err(Error::OscillationCondition {
            k: 1,
            lhs: lhs.to_f64_lossy(),
            rhs: rhs.to_f64_lossy(),
        });
    }
    let strict_condition = params.a() >= T::one() && (params.b() + params.b()).abs() <= T::one();
    Ok(Validity {
        k_max,
        strict_condition,
        regime: params.regime(),
    })
}

/// Effective angular frequency `ell_k = sqrt(theta1 k^2 - theta2^2/4)` of mode `k`.
pub fn ell<T: Real>(k: usize, params: &ModelParams<T>) -> Result<T> {
    if k == 0 {
        return Err(Error::Index("mode index k >= 1 required".into()));
    }
    let kk = T::from_usize_lossy(k);
    let radicand = params.theta1 * kk * kk - params.theta2 * params.theta2 / T::lit(4.0);
    if !(radicand > T::zero()) {
        return Err(Error::Domain(format!(
            "ell_k undefined at k={k}: theta1*k^2 - theta2^2/4 = {radicand} <= 0"
        )));
    }
    Ok(radicand.sqrt())
}

/// `C(theta2, T) = (e^{theta2 T} - theta2 T - 1) / (2 theta2^2)`, `T^2/4` at `theta2 = 0`.
///
/// Written as `T^2/2 * phi2(theta2 T)` so that it is smooth across `theta2 = 0`.
pub fn c_factor<T: Real>(theta2: T, horizon: T) -> T {
    debug_assert!(horizon > T::zero());
    horizon * horizon / T::lit(2.0) * phi2(theta2 * horizon)
}

/// `C~(theta2, T) = (e^{theta2 T} - 1) / (2 theta2)`, `T/2` at `theta2 = 0`.
pub fn c_tilde<T: Real>(theta2: T, horizon: T) -> T {
    debug_assert!(horizon > T::zero());
    horizon / T::lit(2.0) * phi1(theta2 * horizon)
}

/// Limiting variances of `N^{3/2}(theta1_hat - theta1)` and `N^{1/2}(theta2_hat - theta2)`:
/// `(3 theta1 / C, 1 / C)`.
pub fn asymptotic_variances<T: Real>(params: &ModelParams<T>, horizon: T) -> (T, T) {
    let c = c_factor(params.theta2, horizon);
    (T::lit(3.0) * params.theta1 / c, T::one() / c)
}
