use wave_mle::io::{study_csv_bytes, Summary};
use wave_mle::mc::{rate_slopes, replication_id};
use wave_mle::{
    asymptotic_variances, ks_test, mle, rate_sweep, run_study, simulate_field_with,
    sufficient_stats_with, Error, ModelParams, Noise, Normalization, Routes, Scheme,
    SimulationSpec, StudyConfig, TimeGrid,
};

fn config(n_list: Vec<usize>, reps: usize) -> StudyConfig {
    StudyConfig {
        params: ModelParams::new(1.0, 0.0).unwrap(),
        horizon: 2.0,
        steps: 400,
        n_list,
        replications: reps,
        seed: 42,
        scheme: Scheme::ExactTransition,
        routes: Routes::default(),
        noise: Noise::On,
        normalization: Normalization::True,
    }
}

#[test]
fn repeated_study_is_bit_identical() {
    let c = config(vec![5], 2);
    let a = run_study(&c, 1).unwrap();
    let b = run_study(&c, 1).unwrap();
    assert_eq!(study_csv_bytes(&a).unwrap(), study_csv_bytes(&b).unwrap());
    assert_eq!(
        serde_json::to_vec(&a).unwrap(),
        serde_json::to_vec(&b).unwrap()
    );
}

#[test]
fn thread_count_does_not_matter() {
    let c = config(vec![3, 6, 9], 7);
    let reference = study_csv_bytes(&run_study(&c, 1).unwrap()).unwrap();
    for threads in [2, 3, 8] {
        let other = study_csv_bytes(&run_study(&c, threads).unwrap()).unwrap();
        assert_eq!(reference, other, "threads = {threads}");
    }
}

#[test]
fn rows_reproduce_standalone_estimates() {
    let c = config(vec![4, 7], 3);
    let res = run_study(&c, 0).unwrap();
    let grid = TimeGrid::new(c.horizon, res.steps_effective).unwrap();
    for row in &res.rows {
        let spec = SimulationSpec {
            seed: c.seed,
            replication: replication_id(row.n, row.rep),
            scheme: c.scheme,
            noise: c.noise,
        };
        let f = simulate_field_with(&c.params, row.n, &grid, &spec).unwrap();
        let est = mle(&sufficient_stats_with(&f, c.routes).unwrap()).unwrap();
        assert_eq!(row.theta1_hat.to_bits(), est.theta1_hat.to_bits());
        assert_eq!(row.theta2_hat.to_bits(), est.theta2_hat.to_bits());
        let (v1, v2) = asymptotic_variances(&c.params, c.horizon);
        let n = row.n as f64;
        assert_eq!(row.z1, n.powf(1.5) * (row.theta1_hat - 1.0) / v1.sqrt());
        assert_eq!(row.z2, n.sqrt() * row.theta2_hat / v2.sqrt());
    }
}

#[test]
fn plug_in_normalization_uses_estimates() {
    let mut c = config(vec![6], 4);
    c.normalization = Normalization::PlugIn;
    let res = run_study(&c, 0).unwrap();
    for row in &res.rows {
        let est = ModelParams {
            theta1: row.theta1_hat,
            theta2: row.theta2_hat,
        };
        let (v1, v2) = asymptotic_variances(&est, c.horizon);
        let n = row.n as f64;
        assert!((row.z1 - n.powf(1.5) * (row.theta1_hat - 1.0) / v1.sqrt()).abs() < 1e-12);
        assert!((row.z2 - n.sqrt() * row.theta2_hat / v2.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn failures_plus_successes_equal_replications() {
    for noise in [Noise::On, Noise::Suppressed] {
        let mut c = config(vec![1, 2, 8], 5);
        c.noise = noise;
        let res = run_study(&c, 0).unwrap();
        for l in &res.levels {
            assert_eq!(l.failures + l.successes, c.replications);
            let rows = res.rows_for(l.n).count();
            assert_eq!(rows, c.replications);
        }
        let failed = res.rows.iter().filter(|r| r.failed).count();
        match noise {
            Noise::On => assert_eq!(failed, 0),
            Noise::Suppressed => assert_eq!(failed, res.rows.len()),
        }
    }
}

#[test]
fn strong_consistency_along_n() {
    let c = StudyConfig {
        steps: 2000,
        ..config(vec![5, 20, 80], 30)
    };
    let res = run_study(&c, 0).unwrap();
    let e: Vec<f64> = res.levels.iter().map(|l| l.mean_abs_err1).collect();
    assert!(e[0] > e[1] && e[1] > e[2], "mean |theta1 error| {e:?}");
    let e: Vec<f64> = res.levels.iter().map(|l| l.mean_abs_err2).collect();
    assert!(e[0] > e[2], "mean |theta2 error| {e:?}");
}

#[test]
fn normalized_errors_are_roughly_standard() {
    let c = StudyConfig {
        steps: 1000,
        ..config(vec![20], 200)
    };
    let res = run_study(&c, 0).unwrap();
    let l = &res.levels[0];
    let (v1, v2) = (l.var_z1.unwrap(), l.var_z2.unwrap());
    assert!((0.7..=1.4).contains(&v1), "var z1 = {v1}");
    assert!((0.7..=1.4).contains(&v2), "var z2 = {v2}");
    let z1: Vec<f64> = res.rows.iter().map(|r| r.z1).collect();
    let ks = ks_test(&z1).unwrap();
    assert_eq!(Some(ks), l.ks_z1);
}

#[test]
fn sweep_needs_levels_and_replications() {
    let c = config(vec![4, 8, 16, 32], 1);
    assert!(matches!(rate_sweep(&c, 0), Err(Error::InsufficientData(_))));
    let c = config(vec![4, 8, 16], 3);
    assert!(matches!(rate_sweep(&c, 0), Err(Error::InsufficientData(_))));
    let res = run_study(&config(vec![4, 8], 3), 0).unwrap();
    assert!(matches!(rate_slopes(&res), Err(Error::InsufficientData(_))));
}

#[test]
fn summary_carries_config_and_levels() {
    let res = run_study(&config(vec![4, 8], 3), 0).unwrap();
    let s = Summary::new(&res, None);
    let v = serde_json::to_value(&s).unwrap();
    assert_eq!(v["config"]["n_list"], serde_json::json!([4, 8]));
    assert_eq!(v["levels"].as_array().unwrap().len(), 2);
    assert_eq!(v["c_factor"], 1.0);
    assert!(v["metadata"]["generated_at"]
        .as_str()
        .unwrap()
        .ends_with('Z'));
}

#[test]
fn euler_scheme_studies_run() {
    let c = StudyConfig {
        scheme: Scheme::EulerMaruyama,
        steps: 2000,
        ..config(vec![10], 20)
    };
    let res = run_study(&c, 0).unwrap();
    let l = &res.levels[0];
    assert_eq!(l.successes, 20);
    assert!((l.mean_theta1 - 1.0).abs() < 0.1, "{l:?}");
}
