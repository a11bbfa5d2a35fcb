//! Monte Carlo harness: repeated simulation and estimation across truncation
//! levels, normalized errors, goodness-of-fit against the limiting normal law
//! and empirical convergence rates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{ls_slope, mle, ModeStatistics, Routes, StatsAccumulator};
use crate::model::{asymptotic_variances, c_factor, validate_params, ModelParams, TimeGrid};
use crate::modes::{
    euler_mode, euler_mode_with_increments, mode_rng, simulate_mode_into, ModeBuffers, Noise,
    Scheme,
};

/// Standard normal CDF via the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Survival function `P(K > lambda)` of the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    if lambda < 1.18 {
        // theta-function form, fast for small lambda
        let y = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let sum: f64 = (1..=6)
            .map(|j| {
                let m = (2 * j - 1) as f64;
                (m * m * y).exp()
            })
            .sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for j in 1..=100 {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * lambda * lambda).exp();
            sum += if j % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Outcome of a one-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

pub const KS_MIN_SAMPLES: usize = 8;

/// One-sample KS test against the standard normal.
///
/// The p-value uses the asymptotic Kolmogorov law at the corrected argument
/// `(sqrt(n) + 0.12 + 0.11/sqrt(n)) D`, accurate to a few percent for `n >= 35`.
pub fn ks_test(samples: &[f64]) -> Result<KsResult> {
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "KS test needs at least {KS_MIN_SAMPLES} samples (got {})",
            samples.len()
        )));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("KS samples must be finite".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len();
    let nf = n as f64;
    let statistic = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal_cdf(x);
            ((i + 1) as f64 / nf - f).max(f - i as f64 / nf)
        })
        .fold(0.0, f64::max);
    let sq = nf.sqrt();
    let p_value = kolmogorov_survival((sq + 0.12 + 0.11 / sq) * statistic);
    Ok(KsResult {
        statistic,
        p_value,
        n,
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Which parameters normalize the estimation errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// True `(theta1, theta2)`, as in the limit theorem.
    #[default]
    True,
    /// Estimated parameters, as a practitioner would.
    PlugIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub params: ModelParams<f64>,
    pub horizon: f64,
    pub steps: usize,
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub routes: Routes,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub normalization: Normalization,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        ModelParams::new(self.params.theta1, self.params.theta2)?;
        TimeGrid::new(self.horizon, self.steps)?;
        if self.n_list.is_empty() {
            return Err(Error::InvalidParameter("N_list must be nonempty".into()));
        }
        if self.n_list[0] == 0 || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "N_list must hold strictly ascending positive integers".into(),
            ));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("R >= 1 required".into()));
        }
        validate_params(&self.params, self.max_n())?;
        Ok(())
    }

    pub fn max_n(&self) -> usize {
        self.n_list.iter().copied().max().unwrap_or(0)
    }

    /// Number of steps actually simulated: at least enough for
    /// `dt <= 0.1 / (sqrt(theta1) max N)`.
    pub fn effective_steps(&self) -> usize {
        let needed = (10.0 * self.horizon * self.params.theta1.sqrt() * self.max_n() as f64).ceil();
        self.steps.max(needed as usize).max(2)
    }
}

/// One (N, replication) outcome. Failed replications keep NaN estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub n: usize,
    pub rep: usize,
    pub theta1_hat: f64,
    pub theta2_hat: f64,
    pub z1: f64,
    pub z2: f64,
    pub d_n: f64,
    pub failed: bool,
    pub error: Option<String>,
    pub error_kind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub n: usize,
    pub successes: usize,
    pub failures: usize,
    pub mean_theta1: f64,
    pub mean_theta2: f64,
    pub mean_abs_err1: f64,
    pub mean_abs_err2: f64,
    pub rmse1: f64,
    pub rmse2: f64,
    pub mean_z1: f64,
    pub var_z1: Option<f64>,
    pub mean_z2: f64,
    pub var_z2: Option<f64>,
    pub ks_z1: Option<KsResult>,
    pub ks_z2: Option<KsResult>,
    pub median_d_n: f64,
    /// First failure message and its kind tag, if any.
    pub first_error: Option<String>,
    pub first_error_kind: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub steps_effective: usize,
    pub rows: Vec<ReplicationRow>,
    pub levels: Vec<LevelSummary>,
}

impl StudyResult {
    pub fn rows_for(&self, n: usize) -> impl Iterator<Item = &ReplicationRow> {
        self.rows.iter().filter(move |r| r.n == n)
    }

    pub fn level(&self, n: usize) -> Option<&LevelSummary> {
        self.levels.iter().find(|l| l.n == n)
    }
}

/// Stream identifier for replication `rep` at truncation level `n`.
pub fn replication_id(n: usize, rep: usize) -> u64 {
    ((n as u64) << 32) | rep as u64
}

struct Outcome {
    theta1_hat: f64,
    theta2_hat: f64,
    d_n: f64,
}

/// Simulates modes `1..=n` of one replication and estimates, streaming each
/// mode into the statistics so that no full field is held in memory.
fn one_replication(
    config: &StudyConfig,
    grid: &TimeGrid<f64>,
    n: usize,
    rep: usize,
) -> Result<Outcome> {
    let params = &config.params;
    let id = replication_id(n, rep);
    let mut acc = StatsAccumulator::new(grid.dt(), config.routes);
    let mut buf = ModeBuffers::default();
    for k in 1..=n {
        let mut rng = mode_rng(config.seed, id, k);
        let stats = match config.scheme {
            Scheme::ExactTransition => {
                simulate_mode_into(k, params, grid, &mut rng, config.noise, &mut buf)?;
                ModeStatistics::from_samples(&buf.u, &buf.v, grid.dt(), grid.horizon)
            }
            Scheme::EulerMaruyama => {
                let m = match config.noise {
                    Noise::On => euler_mode(k, params, grid, &mut rng)?,
                    Noise::Suppressed => {
                        euler_mode_with_increments(k, params, grid, vec![0.0; grid.steps])?
                    }
                };
                ModeStatistics::from_mode(&m)
            }
        };
        acc.push(k, &stats);
    }
    let est = mle(&acc.finish())?;
    Ok(Outcome {
        theta1_hat: est.theta1_hat,
        theta2_hat: est.theta2_hat,
        d_n: est.d_n,
    })
}

fn normalized_errors(config: &StudyConfig, n: usize, t1: f64, t2: f64) -> (f64, f64) {
    let nf = n as f64;
    let (ref_params, base) = match config.normalization {
        Normalization::True => (config.params, config.params),
        Normalization::PlugIn => (
            ModelParams {
                theta1: t1,
                theta2: t2,
            },
            config.params,
        ),
    };
    let (v1, v2) = asymptotic_variances(&ref_params, config.horizon);
    (
        nf.powf(1.5) * (t1 - base.theta1) / v1.sqrt(),
        nf.sqrt() * (t2 - base.theta2) / v2.sqrt(),
    )
}

/// Runs every `(N, replication)` pair. `threads = 0` uses the global pool.
///
/// Each pair draws from its own substream and writes into its own slot, so
/// the result is identical for any thread count.
pub fn run_study(config: &StudyConfig, threads: usize) -> Result<StudyResult> {
    config.validate()?;
    let steps = config.effective_steps();
    let grid = TimeGrid::new(config.horizon, steps)?;
    let tasks: Vec<(usize, usize)> = config
        .n_list
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |r| (n, r)))
        .collect();
    let work = || -> Vec<ReplicationRow> {
        tasks
            .par_iter()
            .map(|&(n, rep)| match one_replication(config, &grid, n, rep) {
                Ok(o) => {
                    let (z1, z2) = normalized_errors(config, n, o.theta1_hat, o.theta2_hat);
                    ReplicationRow {
                        n,
                        rep,
                        theta1_hat: o.theta1_hat,
                        theta2_hat: o.theta2_hat,
                        z1,
                        z2,
                        d_n: o.d_n,
                        failed: false,
                        error: None,
                        error_kind: None,
                    }
                }
                Err(e) => ReplicationRow {
                    n,
                    rep,
                    theta1_hat: f64::NAN,
                    theta2_hat: f64::NAN,
                    z1: f64::NAN,
                    z2: f64::NAN,
                    d_n: f64::NAN,
                    failed: true,
                    error: Some(e.to_string()),
                    error_kind: Some(e.kind().to_owned()),
                },
            })
            .collect()
    };
    let rows = if threads == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(work)
    };
    let levels = config
        .n_list
        .iter()
        .map(|&n| summarize_level(config, n, &rows))
        .collect();
    Ok(StudyResult {
        config: config.clone(),
        steps_effective: steps,
        rows,
        levels,
    })
}

fn summarize_level(config: &StudyConfig, n: usize, rows: &[ReplicationRow]) -> LevelSummary {
    let ok: Vec<&ReplicationRow> = rows.iter().filter(|r| r.n == n && !r.failed).collect();
    let failures = rows.iter().filter(|r| r.n == n && r.failed).count();
    let first_failure = rows.iter().find(|r| r.n == n && r.failed);
    let first_error = first_failure.and_then(|r| r.error.clone());
    let first_error_kind = first_failure.and_then(|r| r.error_kind.clone());
    let col = |f: fn(&ReplicationRow) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<f64>>();
    let t1 = col(|r| r.theta1_hat);
    let t2 = col(|r| r.theta2_hat);
    let z1 = col(|r| r.z1);
    let z2 = col(|r| r.z2);
    let dn = col(|r| r.d_n);
    let (true1, true2) = (config.params.theta1, config.params.theta2);
    let abs_err =
        |xs: &[f64], truth: f64| mean(&xs.iter().map(|x| (x - truth).abs()).collect::<Vec<_>>());
    let rmse = |xs: &[f64], truth: f64| {
        mean(&xs.iter().map(|x| (x - truth).powi(2)).collect::<Vec<_>>()).sqrt()
    };
    let var = |xs: &[f64]| (xs.len() >= 2).then(|| sample_variance(xs));
    let ks = |xs: &[f64]| ks_test(xs).ok();
    LevelSummary {
        n,
        successes: ok.len(),
        failures,
        mean_theta1: mean(&t1),
        mean_theta2: mean(&t2),
        mean_abs_err1: abs_err(&t1, true1),
        mean_abs_err2: abs_err(&t2, true2),
        rmse1: rmse(&t1, true1),
        rmse2: rmse(&t2, true2),
        mean_z1: mean(&z1),
        var_z1: var(&z1),
        mean_z2: mean(&z2),
        var_z2: var(&z2),
        ks_z1: ks(&z1),
        ks_z2: ks(&z2),
        median_d_n: if dn.is_empty() { f64::NAN } else { median(&dn) },
        first_error,
        first_error_kind,
    }
}

/// Slopes of `log RMSE` against `log N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSlopes {
    pub slope1: f64,
    pub slope2: f64,
}

/// Regresses `log RMSE(theta_i_hat)` on `log N` over the levels of a finished study.
pub fn rate_slopes(result: &StudyResult) -> Result<RateSlopes> {
    if result.levels.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs at least 4 truncation levels (got {})",
            result.levels.len()
        )));
    }
    if let Some(l) = result.levels.iter().find(|l| l.successes < 2) {
        return Err(Error::InsufficientData(format!(
            "rate fit needs at least 2 successful replications per level (N={} has {})",
            l.n, l.successes
        )));
    }
    let pts = |f: fn(&LevelSummary) -> f64| {
        result
            .levels
            .iter()
            .map(|l| ((l.n as f64).ln(), f(l).ln()))
            .collect::<Vec<_>>()
    };
    Ok(RateSlopes {
        slope1: ls_slope(&pts(|l| l.rmse1)),
        slope2: ls_slope(&pts(|l| l.rmse2)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub study: StudyResult,
    pub slopes: RateSlopes,
}

/// Study over the configured levels followed by the rate regression.
pub fn rate_sweep(config: &StudyConfig, threads: usize) -> Result<SweepResult> {
    if config.n_list.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "rate sweep needs at least 4 values of N (got {})",
            config.n_list.len()
        )));
    }
    if config.replications < 2 {
        return Err(Error::InsufficientData(
            "rate sweep needs at least 2 replications per level".into(),
        ));
    }
    let study = run_study(config, threads)?;
    let slopes = rate_slopes(&study)?;
    Ok(SweepResult { study, slopes })
}

/// `C(theta2, T)` for reporting.
pub fn limit_constant(config: &StudyConfig) -> f64 {
    c_factor(config.params.theta2, config.horizon)
}
