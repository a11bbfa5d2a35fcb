//! Spectral simulation and maximum-likelihood estimation for the damped
//! stochastic wave equation
//!
//! `u_tt = theta1 u_xx + theta2 u_t + dW/dt` on `[0, pi]` with Dirichlet
//! boundary conditions, zero initial data and space-time white noise.
//!
//! The solution is expanded in the sine basis; each Fourier coefficient is an
//! independent damped oscillator driven by a Brownian motion. The crate
//! simulates these modes exactly, evaluates their second moments in closed
//! form, computes the spectral MLE of `(theta1, theta2)` from the first `N`
//! modes and runs Monte Carlo studies of its asymptotic behavior.
//!
//! Numerical code is generic over [`Real`] (implemented for `f32` and `f64`);
//! the aliases below fix the common `f64` and `f32` instantiations.

pub mod error;
pub mod inference;
pub mod io;
pub mod mc;
pub mod model;
pub mod modes;
pub mod moments;
pub mod scalar;
pub mod special;

mod quad;

pub use error::{Error, ErrorClass, Result};
pub use inference::{
    mle, route_consistency, sufficient_stats, sufficient_stats_with, xi_diagnostics, B2Route,
    Estimate, J12Route, ModeStatistics, RouteLevel, RouteReport, Routes, StatsAccumulator,
    SufficientStats,
};
pub use mc::{
    ks_test, normal_cdf, rate_sweep, run_study, KsResult, LevelSummary, Normalization, RateSlopes,
    ReplicationRow, StudyConfig, StudyResult, SweepResult,
};
pub use model::{
    asymptotic_variances, c_factor, c_tilde, ell, validate_params, ModelParams, Regime, TimeGrid,
    Validity,
};
pub use modes::{
    exact_transition, field_value, mode_rng, simulate_field, simulate_field_with, simulate_mode,
    FieldTrajectory, ModeTrajectory, Noise, Scheme, SimulationSpec, Transition,
};
pub use moments::{
    expected_suff_stats, expected_suff_stats_with, integrated_second_moments, mode_second_moments,
    per_mode_limits, sobolev_norm_sq, ExpectedStats, J12Expectation, ModeMoments, PerModeLimits,
};
pub use scalar::Real;

pub type ModelParamsF64 = ModelParams<f64>;
pub type ModelParamsF32 = ModelParams<f32>;
pub type TimeGridF64 = TimeGrid<f64>;
pub type TimeGridF32 = TimeGrid<f32>;
pub type ModeMomentsF64 = ModeMoments<f64>;
pub type ModeMomentsF32 = ModeMoments<f32>;
pub type ModeTrajectoryF64 = ModeTrajectory<f64>;
pub type ModeTrajectoryF32 = ModeTrajectory<f32>;
pub type FieldTrajectoryF64 = FieldTrajectory<f64>;
pub type FieldTrajectoryF32 = FieldTrajectory<f32>;
pub type SufficientStatsF64 = SufficientStats<f64>;
pub type SufficientStatsF32 = SufficientStats<f32>;
pub type EstimateF64 = Estimate<f64>;
pub type EstimateF32 = Estimate<f32>;
