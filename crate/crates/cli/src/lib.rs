//! Command-line front end for `wave_mle`: configuration parsing, subcommand
//! dispatch and exit-code mapping.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use wave_mle::io::{
    read_trajectory, study_csv_bytes, write_json, write_moments_csv, write_trajectory, Summary,
};
use wave_mle::{
    expected_suff_stats, field_value, mle, rate_sweep, run_study, simulate_field_with,
    sobolev_norm_sq, sufficient_stats_with, validate_params, B2Route, ErrorClass, J12Route,
    ModelParams, Noise, Normalization, Routes, Scheme, SimulationSpec, StudyConfig, StudyResult,
    TimeGrid,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// JSON configuration document.
///
/// Required: `theta1`, `theta2`, `T`, `M`, `N_list`, `R`, `seed`. Everything
/// else is optional. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub theta1: f64,
    pub theta2: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "M")]
    pub steps: usize,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    #[serde(rename = "R")]
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub route_j12: J12Route,
    #[serde(default)]
    pub route_b2: B2Route,
    #[serde(default)]
    pub normalization: Normalization,
    /// Debug switch: drive every mode with zero noise.
    #[serde(default)]
    pub suppress_noise: bool,
    /// Replication index used by `simulate`.
    #[serde(default)]
    pub replication: u64,
    /// Spatial points at which `simulate` evaluates the truncated field.
    #[serde(default)]
    pub x_grid: Option<Vec<f64>>,
    /// Sobolev exponents tabulated by `moments`.
    #[serde(default)]
    pub gamma_list: Option<Vec<f64>>,
    /// Times tabulated by `moments`; defaults to 101 equispaced points on `[0, T]`.
    #[serde(default)]
    pub t_grid: Option<Vec<f64>>,
}

const KNOWN_KEYS: &[&str] = &[
    "theta1",
    "theta2",
    "T",
    "M",
    "N_list",
    "R",
    "seed",
    "scheme",
    "route_j12",
    "route_b2",
    "normalization",
    "suppress_noise",
    "replication",
    "x_grid",
    "gamma_list",
    "t_grid",
];
const REQUIRED_KEYS: &[&str] = &["theta1", "theta2", "T", "M", "N_list", "R", "seed"];

/// One problem with a configuration document, located by key path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub key: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid config: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
}

fn violation(key: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation {
        key: key.into(),
        message: message.into(),
    }
}

/// Parses and fully validates a configuration document, reporting every
/// violation found rather than only the first.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Some(obj) = value.as_object() else {
        return Err(ConfigError::Invalid(vec![violation(
            "$",
            "config must be a JSON object",
        )]));
    };
    let mut errs = Vec::new();
    for key in obj.keys() {
        if !KNOWN_KEYS.contains(&key.as_str()) {
            errs.push(violation(key.clone(), "unknown key"));
        }
    }
    for key in REQUIRED_KEYS {
        if !obj.contains_key(*key) {
            errs.push(violation(*key, "missing required key"));
        }
    }
    // type-check each known key on its own so that all mismatches are reported
    let probe = |key: &str, v: &Value| -> Option<String> {
        let r = match key {
            "theta1" | "theta2" | "T" => serde_json::from_value::<f64>(v.clone()).err(),
            "M" | "R" => serde_json::from_value::<usize>(v.clone()).err(),
            "seed" | "replication" => serde_json::from_value::<u64>(v.clone()).err(),
            "N_list" => serde_json::from_value::<Vec<usize>>(v.clone()).err(),
            "scheme" => serde_json::from_value::<Scheme>(v.clone()).err(),
            "route_j12" => serde_json::from_value::<J12Route>(v.clone()).err(),
            "route_b2" => serde_json::from_value::<B2Route>(v.clone()).err(),
            "normalization" => serde_json::from_value::<Normalization>(v.clone()).err(),
            "suppress_noise" => serde_json::from_value::<bool>(v.clone()).err(),
            "x_grid" | "gamma_list" | "t_grid" => {
                serde_json::from_value::<Option<Vec<f64>>>(v.clone()).err()
            }
            _ => None,
        };
        r.map(|e| e.to_string())
    };
    for (key, v) in obj {
        if let Some(msg) = probe(key, v) {
            errs.push(violation(key.clone(), msg));
        }
    }
    if !errs.is_empty() {
        return Err(ConfigError::Invalid(errs));
    }
    let cfg: RunConfig = serde_json::from_value(value)
        .map_err(|e| ConfigError::Invalid(vec![violation("$", e.to_string())]))?;
    let errs = cfg.violations();
    if errs.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(errs))
    }
}

impl RunConfig {
    /// Semantic checks on an already well-typed document.
    pub fn violations(&self) -> Vec<Violation> {
        let mut errs = Vec::new();
        let theta1_ok = self.theta1.is_finite() && self.theta1 > 0.0;
        if !theta1_ok {
            errs.push(violation(
                "theta1",
                format!("must satisfy theta1 > 0 (got {})", self.theta1),
            ));
        }
        if !self.theta2.is_finite() {
            errs.push(violation("theta2", "must be finite"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            errs.push(violation(
                "T",
                format!("must satisfy T > 0 (got {})", self.horizon),
            ));
        }
        if self.steps < 2 {
            errs.push(violation(
                "M",
                format!("must be at least 2 (got {})", self.steps),
            ));
        }
        if self.n_list.is_empty() {
            errs.push(violation("N_list", "must be nonempty"));
        }
        for (i, &n) in self.n_list.iter().enumerate() {
            if n == 0 {
                errs.push(violation(format!("N_list[{i}]"), "must be positive"));
            }
            if i > 0 && self.n_list[i - 1] >= n {
                errs.push(violation(
                    format!("N_list[{i}]"),
                    "N_list must be strictly ascending",
                ));
            }
        }
        if self.replications == 0 {
            errs.push(violation("R", "must be at least 1"));
        }
        if theta1_ok && self.theta2.is_finite() {
            if let Some(&n_max) = self.n_list.iter().max() {
                let p = ModelParams {
                    theta1: self.theta1,
                    theta2: self.theta2,
                };
                if let Err(e) = validate_params(&p, n_max.max(1)) {
                    errs.push(violation("theta1/theta2", e.to_string()));
                }
            }
        }
        let check_list =
            |errs: &mut Vec<Violation>, key: &str, xs: &Option<Vec<f64>>, lo: f64, hi: f64| {
                if let Some(xs) = xs {
                    for (i, &x) in xs.iter().enumerate() {
                        if !(x.is_finite() && x >= lo && x <= hi) {
                            errs.push(violation(
                                format!("{key}[{i}]"),
                                format!("must lie in [{lo}, {hi}] (got {x})"),
                            ));
                        }
                    }
                }
            };
        check_list(&mut errs, "x_grid", &self.x_grid, 0.0, std::f64::consts::PI);
        check_list(
            &mut errs,
            "t_grid",
            &self.t_grid,
            0.0,
            self.horizon.max(0.0),
        );
        check_list(&mut errs, "gamma_list", &self.gamma_list, 0.0, f64::MAX);
        errs
    }

    pub fn params(&self) -> ModelParams<f64> {
        ModelParams {
            theta1: self.theta1,
            theta2: self.theta2,
        }
    }

    pub fn routes(&self) -> Routes {
        Routes {
            j12: self.route_j12,
            b2: self.route_b2,
        }
    }

    pub fn noise(&self) -> Noise {
        if self.suppress_noise {
            Noise::Suppressed
        } else {
            Noise::On
        }
    }

    pub fn max_n(&self) -> usize {
        self.n_list.iter().copied().max().unwrap_or(1)
    }

    pub fn study_config(&self) -> StudyConfig {
        StudyConfig {
            params: self.params(),
            horizon: self.horizon,
            steps: self.steps,
            n_list: self.n_list.clone(),
            replications: self.replications,
            seed: self.seed,
            scheme: self.scheme,
            routes: self.routes(),
            noise: self.noise(),
            normalization: self.normalization,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "wave-mle",
    version,
    about = "Spectral simulation and maximum-likelihood estimation for the damped stochastic wave equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate modes 1..=max(N_list) and write trajectory.csv with a JSON sidecar.
    Simulate(CommonArgs),
    /// Tabulate closed-form second moments, expected statistics and Sobolev norms.
    Moments(CommonArgs),
    /// Estimate (theta1, theta2) from a trajectory CSV and print the result as JSON.
    Estimate(EstimateArgs),
    /// Monte Carlo study: study.csv and summary.json.
    Study(CommonArgs),
    /// Study plus log-log rate regression over N_list.
    Sweep(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON configuration file.
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Worker threads (0 = all cores).
    #[arg(long, value_name = "N", env = "WAVE_MLE_THREADS")]
    pub threads: Option<usize>,
    /// Time-stepping scheme, overriding the config.
    #[arg(long, value_parser = ["exact", "euler"])]
    pub scheme: Option<String>,
    /// Route for the cross statistic J12, overriding the config.
    #[arg(long = "route-j12", value_parser = ["riemann", "identity"])]
    pub route_j12: Option<String>,
    /// Route for the stochastic integral B2, overriding the config.
    #[arg(long = "route-b2", value_parser = ["riemann", "ito"])]
    pub route_b2: Option<String>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Trajectory CSV (t,k,u,v) with its `.json` sidecar alongside.
    #[arg(long, value_name = "PATH")]
    pub trajectory: PathBuf,
    /// Optional config; only its route selections are used.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Also write estimate.json into this directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: Overrides,
}

/// Failure of a CLI run, carrying its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] wave_mle::Error),
    #[error("{message}")]
    StudyFailure { kind: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) => match e.class() {
                ErrorClass::Config => EXIT_CONFIG,
                ErrorClass::Numerical => EXIT_NUMERICAL,
                ErrorClass::Io => EXIT_IO,
            },
            CliError::StudyFailure { .. } => EXIT_NUMERICAL,
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> Value {
        let (class, kind) = match self {
            CliError::Config(ConfigError::Parse { .. }) => ("config", "parse".to_owned()),
            CliError::Config(ConfigError::Invalid(_)) => ("config", "invalid".to_owned()),
            CliError::Core(e) => (
                match e.class() {
                    ErrorClass::Config => "config",
                    ErrorClass::Numerical => "numerical",
                    ErrorClass::Io => "io",
                },
                e.kind().to_owned(),
            ),
            CliError::StudyFailure { kind, .. } => ("numerical", kind.clone()),
        };
        let mut err = json!({
            "class": class,
            "kind": kind,
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        match self {
            CliError::Config(ConfigError::Invalid(v)) => {
                err["violations"] = serde_json::to_value(v).unwrap_or(Value::Null);
            }
            CliError::Config(ConfigError::Parse { line, column, .. }) => {
                err["line"] = json!(line);
                err["column"] = json!(column);
            }
            _ => {}
        }
        json!({ "error": err })
    }
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Core(wave_mle::Error::Io(e))
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err)?;
    Ok(parse_config(&text)?)
}

fn apply_overrides(cfg: &mut RunConfig, o: &Overrides) -> Result<(), CliError> {
    if let Some(s) = &o.scheme {
        cfg.scheme = s.parse()?;
    }
    if let Some(s) = &o.route_j12 {
        cfg.route_j12 = s.parse()?;
    }
    if let Some(s) = &o.route_b2 {
        cfg.route_b2 = s.parse()?;
    }
    Ok(())
}

fn prepare(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = load_config(&args.config)?;
    apply_overrides(&mut cfg, &args.overrides)?;
    fs::create_dir_all(&args.out).map_err(io_err)?;
    Ok(cfg)
}

/// Runs a parsed command. Returns the JSON document printed on stdout.
pub fn run(cli: Cli) -> Result<Value, CliError> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Moments(a) => moments(&a),
        Command::Estimate(a) => estimate(&a),
        Command::Study(a) => study(&a, false),
        Command::Sweep(a) => study(&a, true),
    }
}

fn simulate(a: &CommonArgs) -> Result<Value, CliError> {
    let cfg = prepare(a)?;
    let grid = TimeGrid::new(cfg.horizon, cfg.steps)?;
    let spec = SimulationSpec {
        seed: cfg.seed,
        replication: cfg.replication,
        scheme: cfg.scheme,
        noise: cfg.noise(),
    };
    let field = simulate_field_with(&cfg.params(), cfg.max_n(), &grid, &spec)?;
    let traj = a.out.join("trajectory.csv");
    write_trajectory(&traj, &field)?;
    let mut files = vec![traj.display().to_string()];
    if let Some(xs) = &cfg.x_grid {
        let path = a.out.join("field.csv");
        let mut text = String::from("t,x,u\n");
        for i in 0..grid.len() {
            for &x in xs {
                let u = field_value(&field, i, x)?;
                text.push_str(&format!("{},{},{}\n", grid.time(i), x, u));
            }
        }
        fs::write(&path, text).map_err(io_err)?;
        files.push(path.display().to_string());
    }
    Ok(json!({ "N": field.n_modes(), "M": grid.steps, "files": files }))
}

fn moments(a: &CommonArgs) -> Result<Value, CliError> {
    let cfg = prepare(a)?;
    let params = cfg.params();
    let times = cfg
        .t_grid
        .clone()
        .unwrap_or_else(|| (0..=100).map(|i| cfg.horizon * i as f64 / 100.0).collect());
    let path = a.out.join("moments.csv");
    let file = fs::File::create(&path).map_err(io_err)?;
    write_moments_csv(std::io::BufWriter::new(file), &params, cfg.max_n(), &times)?;
    let mut files = vec![path.display().to_string()];

    let path = a.out.join("expected_stats.csv");
    let mut text = String::from("N,EJ1,EJ2,EJ12\n");
    for &n in &cfg.n_list {
        let e = expected_suff_stats(&params, n, cfg.horizon)?;
        text.push_str(&format!("{n},{},{},{}\n", e.ej1, e.ej2, e.ej12));
    }
    fs::write(&path, text).map_err(io_err)?;
    files.push(path.display().to_string());

    if let Some(gammas) = &cfg.gamma_list {
        let path = a.out.join("sobolev.csv");
        let mut text = String::from("gamma,N,norm_sq\n");
        for &g in gammas {
            for &n in &cfg.n_list {
                let s = sobolev_norm_sq(&params, cfg.horizon, g, n)?;
                text.push_str(&format!("{g},{n},{s}\n"));
            }
        }
        fs::write(&path, text).map_err(io_err)?;
        files.push(path.display().to_string());
    }
    Ok(json!({ "files": files }))
}

fn estimate(a: &EstimateArgs) -> Result<Value, CliError> {
    let mut routes = Routes::default();
    if let Some(p) = &a.config {
        routes = load_config(p)?.routes();
    }
    if let Some(s) = &a.overrides.route_j12 {
        routes.j12 = s.parse()?;
    }
    if let Some(s) = &a.overrides.route_b2 {
        routes.b2 = s.parse()?;
    }
    let field = read_trajectory(&a.trajectory)?;
    let stats = sufficient_stats_with(&field, routes)?;
    let est = mle(&stats)?;
    let doc = json!({
        "theta1_hat": est.theta1_hat,
        "theta2_hat": est.theta2_hat,
        "det": est.det,
        "D_N": est.d_n,
        "N": est.n,
        "dt": stats.dt,
        "routes": routes,
    });
    if let Some(out) = &a.out {
        fs::create_dir_all(out).map_err(io_err)?;
        write_json(&out.join("estimate.json"), &doc)?;
    }
    Ok(doc)
}

/// Writes study.csv and summary.json into `out`.
pub fn write_study_outputs(
    out: &Path,
    result: &StudyResult,
    slopes: Option<wave_mle::RateSlopes>,
) -> Result<(), CliError> {
    fs::write(out.join("study.csv"), study_csv_bytes(result)?).map_err(io_err)?;
    write_json(&out.join("summary.json"), &Summary::new(result, slopes))?;
    Ok(())
}

fn study(a: &CommonArgs, sweep: bool) -> Result<Value, CliError> {
    let cfg = prepare(a)?;
    let sc = cfg.study_config();
    let threads = a.overrides.threads.unwrap_or(0);
    let (result, slopes) = if sweep {
        let r = rate_sweep(&sc, threads)?;
        (r.study, Some(r.slopes))
    } else {
        (run_study(&sc, threads)?, None)
    };
    write_study_outputs(&a.out, &result, slopes)?;
    if let Some(l) = result.levels.iter().find(|l| l.successes == 0) {
        return Err(CliError::StudyFailure {
            kind: l
                .first_error_kind
                .clone()
                .unwrap_or_else(|| "failed".into()),
            message: format!(
                "all {} replications failed at N={}: {}",
                l.failures,
                l.n,
                l.first_error.as_deref().unwrap_or("unknown error")
            ),
        });
    }
    Ok(json!({
        "M_effective": result.steps_effective,
        "levels": result.levels.iter().map(|l| json!({
            "N": l.n,
            "successes": l.successes,
            "failures": l.failures,
            "var_z1": l.var_z1,
            "var_z2": l.var_z2,
        })).collect::<Vec<_>>(),
        "slopes": slopes,
        "files": [
            a.out.join("study.csv").display().to_string(),
            a.out.join("summary.json").display().to_string(),
        ],
    }))
}

/// Full entry point: parse `argv`, run, report. Returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        EXIT_CONFIG
                    } else {
                        EXIT_OK
                    }
                }
                _ => {
                    let _ = e.print();
                    let doc = json!({ "error": {
                        "class": "config",
                        "kind": "usage",
                        "message": e.kind().to_string(),
                        "exit_code": EXIT_CONFIG,
                    }});
                    eprintln!("{doc}");
                    EXIT_CONFIG
                }
            };
        }
    };
    match run(cli) {
        Ok(doc) => {
            println!("{}", serde_json::to_string_pretty(&doc).unwrap_or_default());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
