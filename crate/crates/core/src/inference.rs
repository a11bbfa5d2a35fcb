//! Sufficient statistics and the joint maximum-likelihood estimator of
//! `(theta1, theta2)` from the first `N` observed modes.
//!
//! With
//! `J1 = sum k^4 int u_k^2`, `J2 = sum int v_k^2`, `J12 = sum k^2 int u_k v_k`,
//! `B1 = -sum k^2 int u_k dv_k`, `B2 = sum int v_k dv_k`,
//! the likelihood equations are
//! `theta1 J1 - theta2 J12 = B1` and `-theta1 J12 + theta2 J2 = B2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::{FieldTrajectory, ModeTrajectory};
use crate::scalar::Real;

/// Trapezoid rule on a uniform grid.
pub fn trapezoid<T: Real>(values: &[T], dt: T) -> T {
    match values.len() {
        0 | 1 => T::zero(),
        n => {
            let inner: T = values[1..n - 1].iter().copied().sum();
            dt * (inner + (values[0] + values[n - 1]) * T::lit(0.5))
        }
    }
}

/// Left-point (Ito) sum `sum_i f(t_i) (g(t_{i+1}) - g(t_i))`.
pub fn ito_sum<T: Real>(integrand: &[T], integrator: &[T]) -> T {
    integrand
        .iter()
        .zip(integrator.windows(2))
        .map(|(&f, g)| f * (g[1] - g[0]))
        .sum()
}

/// Left-point sum against given increments.
pub fn ito_sum_increments<T: Real>(integrand: &[T], increments: &[T]) -> T {
    integrand.iter().zip(increments).map(|(&f, &d)| f * d).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum J12Route {
    /// Trapezoid rule for `int u v dt`.
    Riemann,
    /// `u_k(T)^2 / 2`.
    #[default]
    #[serde(alias = "identity_j")]
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum B2Route {
    /// Left-point sum `sum v_i (v_{i+1} - v_i)`.
    Riemann,
    /// `(v_k(T)^2 - T) / 2` from Ito's formula.
    #[default]
    #[serde(alias = "ito_identity")]
    Ito,
}

impl std::str::FromStr for J12Route {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riemann" => Ok(J12Route::Riemann),
            "identity" | "identity_j" => Ok(J12Route::Identity),
            other => Err(Error::InvalidParameter(format!(
                "unknown J12 route `{other}` (expected riemann|identity)"
            ))),
        }
    }
}

impl std::str::FromStr for B2Route {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "riemann" => Ok(B2Route::Riemann),
            "ito" | "ito_identity" => Ok(B2Route::Ito),
            other => Err(Error::InvalidParameter(format!(
                "unknown B2 route `{other}` (expected riemann|ito)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Routes {
    pub j12: J12Route,
    pub b2: B2Route,
}

/// Unweighted per-mode building blocks of the statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeStatistics<T> {
    pub int_uu: T,
    pub int_vv: T,
    pub int_uv_riemann: T,
    pub int_uv_identity: T,
    pub int_u_dv: T,
    pub int_v_dv_riemann: T,
    pub int_v_dv_ito: T,
}

impl<T: Real> ModeStatistics<T> {
    /// From samples on a uniform grid with step `dt` ending at `horizon`.
    pub fn from_samples(u: &[T], v: &[T], dt: T, horizon: T) -> Self {
        let uu: Vec<T> = u.iter().map(|&x| x * x).collect();
        let vv: Vec<T> = v.iter().map(|&x| x * x).collect();
        let uv: Vec<T> = u.iter().zip(v).map(|(&a, &b)| a * b).collect();
        let half = T::lit(0.5);
        let u_end = *u.last().unwrap_or(&T::zero());
        let v_end = *v.last().unwrap_or(&T::zero());
        Self {
            int_uu: trapezoid(&uu, dt),
            int_vv: trapezoid(&vv, dt),
            int_uv_riemann: trapezoid(&uv, dt),
            int_uv_identity: half * u_end * u_end,
            int_u_dv: ito_sum(u, v),
            int_v_dv_riemann: ito_sum(v, v),
            int_v_dv_ito: half * (v_end * v_end - horizon),
        }
    }

    pub fn from_mode(mode: &ModeTrajectory<T>) -> Self {
        Self::from_samples(&mode.u, &mode.v, mode.grid.dt(), mode.grid.horizon)
    }
}

/// `(J1, J2, J12, B1, B2)` at truncation level `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SufficientStats<T> {
    pub j1: T,
    pub j2: T,
    pub j12: T,
    pub b1: T,
    pub b2: T,
    pub n: usize,
    pub dt: T,
    pub routes: Routes,
}

/// Accumulates modes in ascending `k`; summation order is fixed so results
/// are reproducible bit for bit.
#[derive(Debug, Clone)]
pub struct StatsAccumulator<T> {
    stats: SufficientStats<T>,
}

impl<T: Real> StatsAccumulator<T> {
    pub fn new(dt: T, routes: Routes) -> Self {
        Self {
            stats: SufficientStats {
                j1: T::zero(),
                j2: T::zero(),
                j12: T::zero(),
                b1: T::zero(),
                b2: T::zero(),
                n: 0,
                dt,
                routes,
            },
        }
    }

    /// Adds mode `k`, which must equal the number of modes added so far plus one.
    pub fn push(&mut self, k: usize, m: &ModeStatistics<T>) {
        debug_assert_eq!(k, self.stats.n + 1);
        let kk = T::from_usize_lossy(k);
        let k2 = kk * kk;
        let s = &mut self.stats;
        s.j1 = s.j1 + k2 * k2 * m.int_uu;
        s.j2 = s.j2 + m.int_vv;
        s.j12 = s.j12
            + k2 * match s.routes.j12 {
                J12Route::Riemann => m.int_uv_riemann,
                J12Route::Identity => m.int_uv_identity,
            };
        s.b1 = s.b1 - k2 * m.int_u_dv;
        s.b2 = s.b2
            + match s.routes.b2 {
                B2Route::Riemann => m.int_v_dv_riemann,
                B2Route::Ito => m.int_v_dv_ito,
            };
        s.n = k;
    }

    pub fn finish(self) -> SufficientStats<T> {
        self.stats
    }
}

pub fn sufficient_stats<T: Real>(field: &FieldTrajectory<T>) -> Result<SufficientStats<T>> {
    sufficient_stats_with(field, Routes::default())
}

pub fn sufficient_stats_with<T: Real>(
    field: &FieldTrajectory<T>,
    routes: Routes,
) -> Result<SufficientStats<T>> {
    if field.grid.steps < 2 {
        return Err(Error::DegenerateGrid(format!(
            "M >= 2 required for statistics (got {})",
            field.grid.steps
        )));
    }
    if field.modes.is_empty() {
        return Err(Error::InsufficientData("field has no modes".into()));
    }
    let mut acc = StatsAccumulator::new(field.grid.dt(), routes);
    for m in &field.modes {
        acc.push(m.k, &ModeStatistics::from_mode(m));
    }
    Ok(acc.finish())
}

/// Joint MLE with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate<T> {
    pub theta1_hat: T,
    pub theta2_hat: T,
    /// `J1 J2 - J12^2`
    pub det: T,
    /// `J12^2 / (J1 J2)`
    pub d_n: T,
    pub n: usize,
}

/// Relative singularity threshold on `det / (J1 J2)`.
pub const SINGULAR_TOL: f64 = 1e-12;
/// Relative tolerance on the normal-equation residuals.
pub const RESIDUAL_TOL: f64 = 1e-8;

pub fn mle<T: Real>(stats: &SufficientStats<T>) -> Result<Estimate<T>> {
    let SufficientStats {
        j1,
        j2,
        j12,
        b1,
        b2,
        ..
    } = *stats;
    if ![j1, j2, j12, b1, b2].iter().all(|x| x.is_finite()) {
        return Err(Error::Domain("non-finite sufficient statistics".into()));
    }
    let scale = j1 * j2;
    let det = scale - j12 * j12;
    let threshold = T::lit(SINGULAR_TOL) * scale;
    if !(scale > T::zero()) || det <= threshold {
        return Err(Error::Singular {
            det: det.to_f64_lossy(),
            threshold: threshold.to_f64_lossy(),
        });
    }
    let theta1_hat = (b1 * j2 + b2 * j12) / det;
    let theta2_hat = (b1 * j12 + b2 * j1) / det;

    let tol = T::lit(RESIDUAL_TOL);
    let r1 = theta1_hat * j1 - theta2_hat * j12 - b1;
    let s1 = (theta1_hat * j1).abs() + (theta2_hat * j12).abs() + b1.abs();
    let r2 = -theta1_hat * j12 + theta2_hat * j2 - b2;
    let s2 = (theta1_hat * j12).abs() + (theta2_hat * j2).abs() + b2.abs();
    for (r, s) in [(r1, s1), (r2, s2)] {
        if r.abs() > tol * s {
            return Err(Error::Residual {
                residual: r.abs().to_f64_lossy(),
                tolerance: (tol * s).to_f64_lossy(),
            });
        }
    }
    Ok(Estimate {
        theta1_hat,
        theta2_hat,
        det,
        d_n: j12 * j12 / scale,
        n: stats.n,
    })
}

/// `(xi1, xi2) = (sum k^2 int u_k dw_k, sum int v_k dw_k)` as left-point sums.
///
/// Uses the driving noise, which is not observable; simulation diagnostics only.
pub fn xi_diagnostics<T: Real>(field: &FieldTrajectory<T>) -> Result<(T, T)> {
    let mut xi1 = T::zero();
    let mut xi2 = T::zero();
    for m in &field.modes {
        let dw = m.dw.as_ref().ok_or(Error::MissingNoise(m.k))?;
        let kk = T::from_usize_lossy(m.k);
        xi1 = xi1 + kk * kk * ito_sum_increments(&m.u, dw);
        xi2 = xi2 + ito_sum_increments(&m.v, dw);
    }
    Ok((xi1, xi2))
}

/// Both routes for `J12` and `B2` at one resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteLevel {
    pub steps: usize,
    pub dt: f64,
    pub j12_riemann: f64,
    pub j12_identity: f64,
    pub b2_riemann: f64,
    pub b2_ito: f64,
}

impl RouteLevel {
    pub fn j12_gap(&self) -> f64 {
        (self.j12_riemann - self.j12_identity).abs()
    }

    pub fn b2_gap(&self) -> f64 {
        (self.b2_riemann - self.b2_ito).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteReport {
    /// Finest first: `M`, `M/2`, `M/4`.
    pub levels: Vec<RouteLevel>,
    /// Least-squares slope of `log gap` against `log dt`; `None` when a gap is zero.
    pub j12_order: Option<f64>,
    pub b2_order: Option<f64>,
}

/// Compares the Riemann and identity routes on the field and on its 2x and 4x
/// coarsenings.
pub fn route_consistency<T: Real>(field: &FieldTrajectory<T>) -> Result<RouteReport> {
    if !field.grid.steps.is_multiple_of(4) || field.grid.steps < 8 {
        return Err(Error::DegenerateGrid(format!(
            "route comparison needs M divisible by 4 and >= 8 (got {})",
            field.grid.steps
        )));
    }
    let mut levels = Vec::with_capacity(3);
    for factor in [1usize, 2, 4] {
        let f = if factor == 1 {
            field.clone()
        } else {
            field.coarsen(factor)?
        };
        let riemann = sufficient_stats_with(
            &f,
            Routes {
                j12: J12Route::Riemann,
                b2: B2Route::Riemann,
            },
        )?;
        let ident = sufficient_stats_with(&f, Routes::default())?;
        levels.push(RouteLevel {
            steps: f.grid.steps,
            dt: f.grid.dt().to_f64_lossy(),
            j12_riemann: riemann.j12.to_f64_lossy(),
            j12_identity: ident.j12.to_f64_lossy(),
            b2_riemann: riemann.b2.to_f64_lossy(),
            b2_ito: ident.b2.to_f64_lossy(),
        });
    }
    let order = |gap: fn(&RouteLevel) -> f64| -> Option<f64> {
        let pts: Vec<(f64, f64)> = levels.iter().map(|l| (l.dt.ln(), gap(l))).collect();
        if pts.iter().any(|&(_, g)| !(g > 0.0)) {
            return None;
        }
        let pts: Vec<(f64, f64)> = pts.into_iter().map(|(x, g)| (x, g.ln())).collect();
        Some(ls_slope(&pts))
    };
    let j12_order = order(RouteLevel::j12_gap);
    let b2_order = order(RouteLevel::b2_gap);
    Ok(RouteReport {
        levels,
        j12_order,
        b2_order,
    })
}

/// Ordinary least-squares slope.
pub(crate) fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
