#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Brute-force kernel integrals `(1/l^2) int_0^t e^{-2bs}{sin^2, g^2, sin g}` with
/// `g = l cos - b sin`, by adaptive Simpson on unit-phase panels.
pub fn kernel_quadrature(l: f64, b: f64, t: f64) -> [f64; 3] {
    let kernels: [Box<dyn Fn(f64) -> f64>; 3] = [
        Box::new(move |s: f64| (-2.0 * b * s).exp() * (l * s).sin().powi(2) / (l * l)),
        Box::new(move |s: f64| {
            let g = l * (l * s).cos() - b * (l * s).sin();
            (-2.0 * b * s).exp() * g * g / (l * l)
        }),
        Box::new(move |s: f64| {
            let g = l * (l * s).cos() - b * (l * s).sin();
            (-2.0 * b * s).exp() * (l * s).sin() * g / (l * l)
        }),
    ];
    let panels = ((l + 2.0 * b.abs()) * t).ceil().max(1.0) as usize;
    let h = t / panels as f64;
    let mut out = [0.0; 3];
    for (j, f) in kernels.iter().enumerate() {
        out[j] = (0..panels)
            .map(|p| adaptive_simpson(f, p as f64 * h, (p + 1) as f64 * h, 1e-15))
            .sum();
    }
    out
}

/// Monte Carlo estimate of the one-step law of `(u, v)` from explicit Euler on
/// a fine grid, with Richardson extrapolation between coupled step sizes `h`
/// and `2h` driven by the same Brownian path.
#[derive(Debug, Clone, Copy)]
pub struct EulerOracle {
    /// Noise-free propagator, extrapolated.
    pub mean_map: [[f64; 2]; 2],
    /// `E[(u, v)(dt) (u, v)(dt)^T]` started from rest.
    pub cov: [[f64; 2]; 2],
    /// Monte Carlo standard errors of `cov`.
    pub se: [[f64; 2]; 2],
    pub fine_steps: usize,
}

pub fn euler_oracle(
    theta1: f64,
    theta2: f64,
    k: usize,
    dt: f64,
    paths: usize,
    seed: u64,
) -> EulerOracle {
    let stiff = theta1 * (k * k) as f64;
    let ell = (stiff - theta2 * theta2 / 4.0).sqrt();
    // fine step resolves both the oscillation and the step itself
    let mut n = ((400.0 * ell * dt).ceil() as usize).max(100);
    n += n % 2;
    let h = dt / n as f64;

    let step =
        |u: f64, v: f64, hh: f64, dw: f64| (u + v * hh, v + (-stiff * u + theta2 * v) * hh + dw);

    let propagate = |u0: f64, v0: f64, steps: usize, hh: f64| {
        let (mut u, mut v) = (u0, v0);
        for _ in 0..steps {
            (u, v) = step(u, v, hh, 0.0);
        }
        (u, v)
    };
    let mut mean_map = [[0.0; 2]; 2];
    for (col, (u0, v0)) in [(1.0, 0.0), (0.0, 1.0)].into_iter().enumerate() {
        let nn = 20 * n;
        let fine = propagate(u0, v0, nn, dt / nn as f64);
        let coarse = propagate(u0, v0, nn / 2, 2.0 * dt / nn as f64);
        mean_map[0][col] = 2.0 * fine.0 - coarse.0;
        mean_map[1][col] = 2.0 * fine.1 - coarse.1;
    }

    let mut r = rng(seed);
    let sd = h.sqrt();
    let mut sum = [0.0f64; 3];
    let mut sum_sq = [0.0f64; 3];
    for _ in 0..paths {
        let (mut uf, mut vf) = (0.0, 0.0);
        let (mut uc, mut vc) = (0.0, 0.0);
        for _ in 0..n / 2 {
            let d1 = sd * normal(&mut r);
            let d2 = sd * normal(&mut r);
            (uf, vf) = step(uf, vf, h, d1);
            (uf, vf) = step(uf, vf, h, d2);
            (uc, vc) = step(uc, vc, 2.0 * h, d1 + d2);
        }
        let x = [
            2.0 * uf * uf - uc * uc,
            2.0 * vf * vf - vc * vc,
            2.0 * uf * vf - uc * vc,
        ];
        for j in 0..3 {
            sum[j] += x[j];
            sum_sq[j] += x[j] * x[j];
        }
    }
    let p = paths as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / p).collect();
    let se: Vec<f64> = (0..3)
        .map(|j| {
            ((sum_sq[j] / p - mean[j] * mean[j]) / (p - 1.0))
                .max(0.0)
                .sqrt()
        })
        .collect();
    EulerOracle {
        mean_map,
        cov: [[mean[0], mean[2]], [mean[2], mean[1]]],
        se: [[se[0], se[2]], [se[2], se[1]]],
        fine_steps: n,
    }
}

/// Largest entrywise deviation in units of the oracle standard error.
pub fn max_z(cov: &[[f64; 2]; 2], oracle: &EulerOracle) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            worst = worst.max((cov[i][j] - oracle.cov[i][j]).abs() / oracle.se[i][j]);
        }
    }
    worst
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
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
