//! Simulation of the Fourier modes `(u_k, v_k)`.
//!
//! Each mode solves the damped oscillator
//! `du = v dt`, `dv = (-theta1 k^2 u + theta2 v) dt + dw_k` from rest. The default
//! sampler draws the exact Gaussian one-step transition, so grid values have
//! exactly the law of the continuous-time solution; an explicit Euler scheme is
//! kept as an independent reference.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ell, validate_params, ModelParams, TimeGrid};
use crate::moments::{kernel_integrals, Weight};
use crate::scalar::Real;

/// Time-stepping scheme used to produce a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    #[serde(alias = "exact")]
    ExactTransition,
    #[serde(alias = "euler")]
    EulerMaruyama,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::ExactTransition => "exact",
            Scheme::EulerMaruyama => "euler",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" | "exact_transition" => Ok(Scheme::ExactTransition),
            "euler" | "euler_maruyama" => Ok(Scheme::EulerMaruyama),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme `{other}` (expected exact|euler)"
            ))),
        }
    }
}

pub type Mat2<T> = [[T; 2]; 2];

/// Exact conditional law of `(u, v)(t + dt)` given `(u, v)(t)`:
/// mean `mean_map * state`, covariance `noise_cov = chol * chol^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<T> {
    pub mean_map: Mat2<T>,
    pub noise_cov: Mat2<T>,
    /// Lower-triangular Cholesky factor of `noise_cov`.
    pub chol: Mat2<T>,
}

impl<T: Real> Transition<T> {
    #[inline]
    pub fn apply(&self, u: T, v: T, z1: T, z2: T) -> (T, T) {
        let m = &self.mean_map;
        let l = &self.chol;
        (
            m[0][0] * u + m[0][1] * v + l[0][0] * z1,
            m[1][0] * u + m[1][1] * v + l[1][0] * z1 + l[1][1] * z2,
        )
    }
}

pub fn exact_transition<T: Real>(
    k: usize,
    params: &ModelParams<T>,
    dt: T,
) -> Result<Transition<T>> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "dt > 0 required (got {dt})"
        )));
    }
    let l = ell(k, params)?;
    let b = params.b();
    let decay = (-b * dt).exp();
    let (s, c) = (l * dt).sin_cos();
    let bl = b / l;
    let mean_map = [
        [decay * (c + bl * s), decay * s / l],
        [-decay * (l + b * bl) * s, decay * (c - bl * s)],
    ];
    let q = kernel_integrals(l, b, dt, Weight::Unit);
    let noise_cov = [[q.e_uu, q.e_uv], [q.e_uv, q.e_vv]];
    Ok(Transition {
        mean_map,
        noise_cov,
        chol: cholesky2(&noise_cov),
    })
}

/// Cholesky factor of a symmetric PSD 2x2 matrix; round-off negatives clamp to 0.
pub(crate) fn cholesky2<T: Real>(a: &Mat2<T>) -> Mat2<T> {
    let zero = T::zero();
    let l11 = a[0][0].max(zero).sqrt();
    if l11 == zero {
        return [[zero, zero], [zero, a[1][1].max(zero).sqrt()]];
    }
    let l21 = a[1][0] / l11;
    let l22 = (a[1][1] - l21 * l21).max(zero).sqrt();
    [[l11, zero], [l21, l22]]
}

/// Grid samples of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeTrajectory<T> {
    pub k: usize,
    pub u: Vec<T>,
    pub v: Vec<T>,
    /// Brownian increments over each step. Exact for Euler paths, reconstructed
    /// from the velocity equation for exact-transition paths, absent for
    /// trajectories read back from disk.
    pub dw: Option<Vec<T>>,
    pub grid: TimeGrid<T>,
}

impl<T: Real> ModeTrajectory<T> {
    /// Wraps observed samples; checks lengths and zero initial data.
    pub fn from_samples(k: usize, u: Vec<T>, v: Vec<T>, grid: TimeGrid<T>) -> Result<Self> {
        if u.len() != grid.len() || v.len() != grid.len() {
            return Err(Error::Format(format!(
                "mode {k}: expected {} samples, got u={} v={}",
                grid.len(),
                u.len(),
                v.len()
            )));
        }
        Ok(Self {
            k,
            u,
            v,
            dw: None,
            grid,
        })
    }

    /// Keeps every `factor`-th sample; noise increments are summed accordingly.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = self.grid.coarsen(factor)?;
        let pick = |x: &Vec<T>| x.iter().step_by(factor).copied().collect::<Vec<_>>();
        let dw = self
            .dw
            .as_ref()
            .map(|dw| dw.chunks(factor).map(|c| c.iter().copied().sum()).collect());
        Ok(Self {
            k: self.k,
            u: pick(&self.u),
            v: pick(&self.v),
            dw,
            grid,
        })
    }
}

/// Whether the driving noise is switched on. Suppression exists for testing
/// degenerate paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    #[default]
    On,
    Suppressed,
}

/// Everything that determines the random content of a simulated field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub seed: u64,
    pub replication: u64,
    pub scheme: Scheme,
    pub noise: Noise,
}

/// `N` independent modes sharing one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldTrajectory<T> {
    pub params: ModelParams<T>,
    pub grid: TimeGrid<T>,
    pub spec: SimulationSpec,
    pub modes: Vec<ModeTrajectory<T>>,
}

impl<T: Real> FieldTrajectory<T> {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    /// Assembles a field from observed modes, which must be `k = 1..=N` in order.
    pub fn from_modes(
        params: ModelParams<T>,
        grid: TimeGrid<T>,
        spec: SimulationSpec,
        modes: Vec<ModeTrajectory<T>>,
    ) -> Result<Self> {
        for (j, m) in modes.iter().enumerate() {
            if m.k != j + 1 {
                return Err(Error::Format(format!(
                    "mode at position {j} has k={}, expected {}",
                    m.k,
                    j + 1
                )));
            }
            if m.grid != grid {
                return Err(Error::Format(format!("mode {} uses a different grid", m.k)));
            }
        }
        Ok(Self {
            params,
            grid,
            spec,
            modes,
        })
    }

    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        Ok(Self {
            params: self.params,
            grid: self.grid.coarsen(factor)?,
            spec: self.spec,
            modes: self
                .modes
                .iter()
                .map(|m| m.coarsen(factor))
                .collect::<Result<_>>()?,
        })
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based stream for mode `k` of replication `replication` under `seed`.
///
/// The ChaCha key is derived from `(seed, replication)` and the mode index
/// selects the ChaCha stream, so the draws for step `i` of mode `k` depend on
/// nothing but `(seed, replication, k, i)`.
pub fn mode_rng(seed: u64, replication: u64, k: usize) -> ChaCha8Rng {
    let mut st = seed;
    let a = splitmix64(&mut st);
    let mut st = a ^ replication.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut st).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(k as u64);
    rng
}

/// Reusable per-mode buffers so that Monte Carlo loops avoid reallocating.
#[derive(Debug, Clone)]
pub struct ModeBuffers<T> {
    pub u: Vec<T>,
    pub v: Vec<T>,
    pub dw: Vec<T>,
}

impl<T> Default for ModeBuffers<T> {
    fn default() -> Self {
        Self {
            u: Vec::new(),
            v: Vec::new(),
            dw: Vec::new(),
        }
    }
}

/// Fills `buf` with one exact-transition path of mode `k`.
pub fn simulate_mode_into<T: Real, R: Rng + ?Sized>(
    k: usize,
    params: &ModelParams<T>,
    grid: &TimeGrid<T>,
    rng: &mut R,
    noise: Noise,
    buf: &mut ModeBuffers<T>,
) -> Result<()> {
    let tr = exact_transition(k, params, grid.dt())?;
    let m = grid.steps;
    buf.u.clear();
    buf.v.clear();
    buf.u.reserve(m + 1);
    buf.v.reserve(m + 1);
    let (mut u, mut v) = (T::zero(), T::zero());
    buf.u.push(u);
    buf.v.push(v);
    for _ in 0..m {
        let (z1, z2) = match noise {
            Noise::On => (T::standard_normal(rng), T::standard_normal(rng)),
            Noise::Suppressed => (T::zero(), T::zero()),
        };
        (u, v) = tr.apply(u, v, z1, z2);
        buf.u.push(u);
        buf.v.push(v);
    }
    reconstruct_increments(k, params, grid.dt(), &buf.u, &buf.v, &mut buf.dw);
    Ok(())
}

/// `dw_i = v_{i+1} - v_i - (-theta1 k^2 u_bar_i + theta2 v_bar_i) dt` with
/// trapezoidal averages. Only used for noise diagnostics.
pub fn reconstruct_increments<T: Real>(
    k: usize,
    params: &ModelParams<T>,
    dt: T,
    u: &[T],
    v: &[T],
    dw: &mut Vec<T>,
) {
    let kk = T::from_usize_lossy(k);
    let stiff = params.theta1 * kk * kk;
    let half = T::lit(0.5);
    dw.clear();
    dw.extend(u.windows(2).zip(v.windows(2)).map(|(uw, vw)| {
        let ubar = half * (uw[0] + uw[1]);
        let vbar = half * (vw[0] + vw[1]);
        vw[1] - vw[0] - (-stiff * ubar + params.theta2 * vbar) * dt
    }));
}

/// One exact-transition path of mode `k` on `grid`.
pub fn simulate_mode<T: Real, R: Rng + ?Sized>(
    k: usize,
    params: &ModelParams<T>,
    grid: &TimeGrid<T>,
    rng: &mut R,
) -> Result<ModeTrajectory<T>> {
    let mut buf = ModeBuffers::default();
    simulate_mode_into(k, params, grid, rng, Noise::On, &mut buf)?;
    Ok(ModeTrajectory {
        k,
        u: buf.u,
        v: buf.v,
        dw: Some(buf.dw),
        grid: *grid,
    })
}

/// One explicit Euler step of mode `k` driven by the increment `dw`.
#[inline]
pub fn euler_step<T: Real>(stiff: T, theta2: T, dt: T, u: T, v: T, dw: T) -> (T, T) {
    (u + v * dt, v + (-stiff * u + theta2 * v) * dt + dw)
}

/// Explicit Euler path of mode `k` from rest, driven by given increments.
/// First-order accurate in `dt`.
pub fn euler_mode_with_increments<T: Real>(
    k: usize,
    params: &ModelParams<T>,
    grid: &TimeGrid<T>,
    dw: Vec<T>,
) -> Result<ModeTrajectory<T>> {
    ell(k, params)?;
    if dw.len() != grid.steps {
        return Err(Error::InvalidParameter(format!(
            "expected {} increments, got {}",
            grid.steps,
            dw.len()
        )));
    }
    let kk = T::from_usize_lossy(k);
    let stiff = params.theta1 * kk * kk;
    let dt = grid.dt();
    let mut u = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    let (mut uu, mut vv) = (T::zero(), T::zero());
    u.push(uu);
    v.push(vv);
    for &inc in &dw {
        (uu, vv) = euler_step(stiff, params.theta2, dt, uu, vv, inc);
        u.push(uu);
        v.push(vv);
    }
    Ok(ModeTrajectory {
        k,
        u,
        v,
        dw: Some(dw),
        grid: *grid,
    })
}

/// Explicit Euler path with increments `sqrt(dt) * z` drawn from `rng`.
pub fn euler_mode<T: Real, R: Rng + ?Sized>(
    k: usize,
    params: &ModelParams<T>,
    grid: &TimeGrid<T>,
    rng: &mut R,
) -> Result<ModeTrajectory<T>> {
    let sd = grid.dt().sqrt();
    let dw = (0..grid.steps)
        .map(|_| sd * T::standard_normal(rng))
        .collect();
    euler_mode_with_increments(k, params, grid, dw)
}

fn simulate_one<T: Real>(
    k: usize,
    params: &ModelParams<T>,
    grid: &TimeGrid<T>,
    spec: &SimulationSpec,
) -> Result<ModeTrajectory<T>> {
    let mut rng = mode_rng(spec.seed, spec.replication, k);
    match spec.scheme {
        Scheme::ExactTransition => {
            let mut buf = ModeBuffers::default();
            simulate_mode_into(k, params, grid, &mut rng, spec.noise, &mut buf)?;
            Ok(ModeTrajectory {
                k,
                u: buf.u,
                v: buf.v,
                dw: Some(buf.dw),
                grid: *grid,
            })
        }
        Scheme::EulerMaruyama => match spec.noise {
            Noise::On => euler_mode(k, params, grid, &mut rng),
            Noise::Suppressed => {
                euler_mode_with_increments(k, params, grid, vec![T::zero(); grid.steps])
            }
        },
    }
}

/// Simulates modes `1..=n` with default replication 0 and noise on.
pub fn simulate_field<T: Real>(
    params: &ModelParams<T>,
    n: usize,
    grid: &TimeGrid<T>,
    seed: u64,
    scheme: Scheme,
) -> Result<FieldTrajectory<T>> {
    simulate_field_with(
        params,
        n,
        grid,
        &SimulationSpec {
            seed,
            scheme,
            ..Default::default()
        },
    )
}

/// Simulates modes `1..=n`; mode `k` draws from `mode_rng(seed, replication, k)`
/// so the result does not depend on evaluation order.
pub fn simulate_field_with<T: Real>(
    params: &ModelParams<T>,
    n: usize,
    grid: &TimeGrid<T>,
    spec: &SimulationSpec,
) -> Result<FieldTrajectory<T>> {
    validate_params(params, n)?;
    let modes = (1..=n)
        .map(|k| simulate_one(k, params, grid, spec))
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldTrajectory {
        params: *params,
        grid: *grid,
        spec: *spec,
        modes,
    })
}

/// Truncated series `sqrt(2/pi) sum_k u_k(t_i) sin(k x)`.
pub fn field_value<T: Real>(field: &FieldTrajectory<T>, t_index: usize, x: T) -> Result<T> {
    if t_index > field.grid.steps {
        return Err(Error::Index(format!(
            "t_index {t_index} outside 0..={}",
            field.grid.steps
        )));
    }
    if !(x >= T::zero() && x <= T::PI()) {
        return Err(Error::Domain(format!("x = {x} outside [0, pi]")));
    }
    let sum: T = field
        .modes
        .iter()
        .map(|m| m.u[t_index] * (T::from_usize_lossy(m.k) * x).sin())
        .sum();
    Ok((T::lit(2.0) / T::PI()).sqrt() * sum)
}
