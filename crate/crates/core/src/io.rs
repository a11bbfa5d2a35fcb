//! File formats: trajectory CSV with a JSON sidecar, study CSV, summary JSON
//! and tabulated moments.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{limit_constant, LevelSummary, RateSlopes, StudyConfig, StudyResult};
use crate::model::{ModelParams, TimeGrid};
use crate::modes::{FieldTrajectory, ModeTrajectory, Noise, Scheme, SimulationSpec};
use crate::moments::mode_second_moments;
use crate::scalar::Real;

pub const TRAJECTORY_HEADER: [&str; 4] = ["t", "k", "u", "v"];
pub const STUDY_HEADER: [&str; 8] = [
    "N",
    "rep",
    "theta1_hat",
    "theta2_hat",
    "z1",
    "z2",
    "D_N",
    "failed",
];
pub const MOMENTS_HEADER: [&str; 5] = ["k", "t", "e_uu", "e_vv", "e_uv"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "M")]
    pub steps: usize,
}

/// Sidecar describing a trajectory CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryMeta {
    pub params: ModelParams<f64>,
    pub seed: u64,
    pub replication: u64,
    pub scheme: Scheme,
    pub noise: Noise,
    pub grid: GridMeta,
    #[serde(rename = "N")]
    pub n: usize,
}

/// `traj.csv` -> `traj.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes `t,k,u,v` rows ordered by `k` then `t`, plus the JSON sidecar.
pub fn write_trajectory<T: Real>(path: &Path, field: &FieldTrajectory<T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for m in &field.modes {
        let k = m.k.to_string();
        for i in 0..m.u.len() {
            w.write_record([
                field.grid.time(i).to_string(),
                k.clone(),
                m.u[i].to_string(),
                m.v[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    let meta = TrajectoryMeta {
        params: field.params.to_f64(),
        seed: field.spec.seed,
        replication: field.spec.replication,
        scheme: field.spec.scheme,
        noise: field.spec.noise,
        grid: GridMeta {
            horizon: field.grid.horizon.to_f64_lossy(),
            steps: field.grid.steps,
        },
        n: field.n_modes(),
    };
    write_json(&sidecar_path(path), &meta)
}

#[derive(Debug, Deserialize)]
struct TrajectoryRow {
    t: f64,
    k: usize,
    u: f64,
    v: f64,
}

/// Reads a trajectory CSV and its sidecar back into a field.
pub fn read_trajectory(path: &Path) -> Result<FieldTrajectory<f64>> {
    let meta: TrajectoryMeta = read_json(&sidecar_path(path))?;
    let params = ModelParams::new(meta.params.theta1, meta.params.theta2)?;
    let grid = TimeGrid::new(meta.grid.horizon, meta.grid.steps)?;
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != TRAJECTORY_HEADER {
        return Err(Error::Format(format!(
            "trajectory header must be t,k,u,v (got {})",
            header.join(",")
        )));
    }
    let mut us: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); meta.n];
    let mut vs: Vec<Vec<f64>> = vec![Vec::with_capacity(grid.len()); meta.n];
    let tol = 1e-9 * grid.horizon.max(1.0);
    for (line, rec) in r.deserialize::<TrajectoryRow>().enumerate() {
        let row = rec?;
        if row.k == 0 || row.k > meta.n {
            return Err(Error::Format(format!(
                "row {}: mode k={} outside 1..={}",
                line + 2,
                row.k,
                meta.n
            )));
        }
        let i = us[row.k - 1].len();
        if i > grid.steps || (row.t - grid.time(i)).abs() > tol {
            return Err(Error::Format(format!(
                "row {}: time {} does not match grid point {i} of mode {}",
                line + 2,
                row.t,
                row.k
            )));
        }
        us[row.k - 1].push(row.u);
        vs[row.k - 1].push(row.v);
    }
    let modes = us
        .into_iter()
        .zip(vs)
        .enumerate()
        .map(|(j, (u, v))| ModeTrajectory::from_samples(j + 1, u, v, grid))
        .collect::<Result<Vec<_>>>()?;
    let spec = SimulationSpec {
        seed: meta.seed,
        replication: meta.replication,
        scheme: meta.scheme,
        noise: meta.noise,
    };
    FieldTrajectory::from_modes(params, grid, spec, modes)
}

/// Per-replication rows; failed replications carry NaN estimates.
pub fn write_study_csv<W: Write>(out: W, result: &StudyResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STUDY_HEADER)?;
    for r in &result.rows {
        w.write_record([
            r.n.to_string(),
            r.rep.to_string(),
            r.theta1_hat.to_string(),
            r.theta2_hat.to_string(),
            r.z1.to_string(),
            r.z2.to_string(),
            r.d_n.to_string(),
            r.failed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn study_csv_bytes(result: &StudyResult) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_study_csv(&mut buf, result)?;
    Ok(buf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub generated_at: String,
    pub version: String,
}

impl Metadata {
    pub fn now() -> Self {
        Self {
            generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            version: env!("CARGO_PKG_VERSION").to_owned(),
        }
    }
}

/// Aggregate report of a study or sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: StudyConfig,
    pub steps_effective: usize,
    pub c_factor: f64,
    pub levels: Vec<LevelSummary>,
    pub slopes: Option<RateSlopes>,
    pub metadata: Metadata,
}

impl Summary {
    pub fn new(result: &StudyResult, slopes: Option<RateSlopes>) -> Self {
        Self {
            config: result.config.clone(),
            steps_effective: result.steps_effective,
            c_factor: limit_constant(&result.config),
            levels: result.levels.clone(),
            slopes,
            metadata: Metadata::now(),
        }
    }
}

/// Tabulates `E u_k^2(t)`, `E v_k^2(t)`, `E u_k v_k(t)` for `k = 1..=n`.
pub fn write_moments_csv<W: Write>(
    out: W,
    params: &ModelParams<f64>,
    n: usize,
    times: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MOMENTS_HEADER)?;
    for k in 1..=n {
        for &t in times {
            let m = mode_second_moments(k, params, t)?;
            w.write_record([
                k.to_string(),
                t.to_string(),
                m.e_uu.to_string(),
                m.e_vv.to_string(),
                m.e_uv.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D> {
    let r = BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(r)?)
}
