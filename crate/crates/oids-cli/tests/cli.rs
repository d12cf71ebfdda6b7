//! End-to-end checks of the `oids` binary: exit codes, artifact schemas,
//! determinism, and the replicate tables.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn oids(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_oids"));
    cmd.args(args);
    cmd.env_remove("OIDS_OUTPUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn minimal_config(out_dir: &Path) -> String {
    format!(
        r#"{{
        "name": "smoke",
        "env": {{"kind": "revelatory_zero", "K": 3, "delta": 0.2, "theta0": 0}},
        "algos": [{{"kind": "voids"}}, {{"kind": "uniform"}}],
        "T": 25,
        "reps": 3,
        "base_seed": 11,
        "diagnostics": true,
        "output_dir": "{}",
        "bounds": ["worst_case"]
    }}"#,
        out_dir.display()
    )
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    entries
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn run_writes_summary_traces_and_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("results");
    let config_path = tmp.path().join("config.json");
    fs::write(&config_path, minimal_config(&out)).unwrap();

    let output = oids(&["run", "--config", config_path.to_str().unwrap()], &[]);
    assert!(output.status.success(), "{output:?}");

    let run_dir = out.join("smoke");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("summary.json")).unwrap()).unwrap();
    let entries = summary.as_array().unwrap();
    assert_eq!(entries.len(), 2);
    assert_eq!(entries[0]["algorithm"], "voids");
    assert_eq!(entries[0]["T"], 25);
    assert_eq!(entries[0]["reps"], 3);
    assert!(entries[0]["mean_final_regret"].is_f64() || entries[0]["mean_final_regret"].is_number());
    assert_eq!(entries[0]["bounds"][0]["tag"], "worst_case");
    assert_eq!(entries[0]["bounds"][0]["satisfied"], true);

    let files = read_dir_sorted(&run_dir);
    let names: Vec<&str> = files.iter().map(|(n, _)| n.as_str()).collect();
    assert!(names.contains(&"trace-voids-rep0000.csv"));
    assert!(names.contains(&"trace-uniform-rep0002.csv"));
    assert_eq!(names.len(), 7, "6 traces plus summary: {names:?}");

    // diagnostics columns present
    let trace = fs::read_to_string(run_dir.join("trace-voids-rep0000.csv")).unwrap();
    assert!(trace.starts_with(
        "run_id,seed,t,context,action,loss,regret_policy,regret_action,cum_regret_policy,cum_regret_action,ir,adec,sig,tig,ue,og,posterior_entropy"
    ));

    // rerun into a fresh directory: byte-identical artifacts
    let out2 = tmp.path().join("again");
    let config2 = tmp.path().join("config2.json");
    fs::write(&config2, minimal_config(&out2)).unwrap();
    let output = oids(&["run", "--config", config2.to_str().unwrap(), "--jobs", "2"], &[]);
    assert!(output.status.success());
    let first = read_dir_sorted(&run_dir);
    let second = read_dir_sorted(&out2.join("smoke"));
    assert_eq!(first.len(), second.len());
    for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(&second) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "artifact {name_a} differs between runs");
    }

    // seed override changes the draws but keeps the schema
    let output = oids(
        &[
            "run",
            "--config",
            config_path.to_str().unwrap(),
            "--seed-override",
            "999",
        ],
        &[],
    );
    assert!(output.status.success());
    let overridden = read_dir_sorted(&run_dir);
    assert!(
        overridden
            .iter()
            .zip(&first)
            .any(|((_, bytes_a), (_, bytes_b))| bytes_a != bytes_b),
        "override must change at least one artifact"
    );
}

#[test]
fn validation_failures_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = tmp.path().join("bad.json");

    // missing T
    fs::write(
        &config_path,
        r#"{"name": "x", "env": {"kind": "revealing_action", "K": 4},
            "algos": [{"kind": "voids"}], "reps": 1, "base_seed": 0,
            "output_dir": "/tmp/nowhere"}"#,
    )
    .unwrap();
    let output = oids(&["run", "--config", config_path.to_str().unwrap()], &[]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains('T'), "field-level message, got: {stderr}");

    // unknown key
    fs::write(
        &config_path,
        r#"{"name": "x", "env": {"kind": "revealing_action", "K": 4},
            "algos": [{"kind": "voids"}], "T": 5, "reps": 1, "base_seed": 0,
            "output_dir": "/tmp/nowhere", "frobnicate": true}"#,
    )
    .unwrap();
    let output = oids(&["run", "--config", config_path.to_str().unwrap()], &[]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("unknown field"));

    // no output_dir anywhere
    fs::write(
        &config_path,
        r#"{"name": "x", "env": {"kind": "revealing_action", "K": 4},
            "algos": [{"kind": "voids"}], "T": 5, "reps": 1, "base_seed": 0}"#,
    )
    .unwrap();
    let output = oids(&["run", "--config", config_path.to_str().unwrap()], &[]);
    assert_eq!(output.status.code(), Some(2));

    // missing required algorithm parameter
    fs::write(
        &config_path,
        r#"{"name": "x", "env": {"kind": "revealing_action", "K": 4},
            "algos": [{"kind": "igw"}], "T": 5, "reps": 1, "base_seed": 0,
            "output_dir": "/tmp/nowhere"}"#,
    )
    .unwrap();
    let output = oids(&["run", "--config", config_path.to_str().unwrap()], &[]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("gamma"));

    // unreadable config path
    let output = oids(&["run", "--config", "/definitely/not/here.json"], &[]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn output_dir_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = tmp.path().join("config.json");
    fs::write(
        &config_path,
        r#"{"name": "envfall", "env": {"kind": "revelatory_zero", "K": 3, "delta": 0.2, "theta0": 0},
            "algos": [{"kind": "greedy"}], "T": 5, "reps": 1, "base_seed": 3}"#,
    )
    .unwrap();
    let output = oids(
        &["run", "--config", config_path.to_str().unwrap()],
        &[("OIDS_OUTPUT_DIR", tmp.path().to_str().unwrap())],
    );
    assert!(output.status.success(), "{output:?}");
    assert!(tmp.path().join("envfall").join("summary.json").exists());
}

#[test]
fn replicate_revealing_and_sparse_pass() {
    let output = oids(&["replicate", "revealing"], &[]);
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert_eq!(stdout.matches("PASS").count(), 8);
    assert!(!stdout.contains("FAIL"));

    let tmp = tempfile::tempdir().unwrap();
    let output = oids(
        &["replicate", "sparse", "--out", tmp.path().to_str().unwrap()],
        &[],
    );
    assert!(output.status.success(), "{output:?}");
    assert!(tmp.path().join("report.txt").exists());
    let report = fs::read_to_string(tmp.path().join("report.txt")).unwrap();
    assert!(report.contains("PASS"));
    assert!(!report.contains("FAIL"));

    let output = oids(&["replicate", "something-else"], &[]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn replicate_revelatory_passes_and_writes_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let output = oids(
        &["replicate", "revelatory", "--out", tmp.path().to_str().unwrap()],
        &[],
    );
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("voids"));
    assert!(stdout.contains("roids"));
    assert!(stdout.contains("e2d"));
    assert!(!stdout.contains("FAIL"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary.as_array().unwrap().len(), 2);
}

#[test]
fn export_plot_aggregates_traces() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("results");
    let config_path = tmp.path().join("config.json");
    fs::write(&config_path, minimal_config(&out)).unwrap();
    let output = oids(&["run", "--config", config_path.to_str().unwrap()], &[]);
    assert!(output.status.success());

    let run_dir = out.join("smoke");
    let output = oids(&["export-plot", run_dir.to_str().unwrap()], &[]);
    assert!(output.status.success(), "{output:?}");
    let plot = fs::read_to_string(run_dir.join("plot.csv")).unwrap();
    let mut rows = plot.lines();
    assert_eq!(rows.next().unwrap(), "algorithm,t,mean_cum_regret_policy,stderr");
    let body: Vec<&str> = rows.collect();
    assert_eq!(body.len(), 2 * 25, "two algorithms, T rounds each");
    assert!(body.iter().all(|r| r.split(',').count() == 4));
    // uniform policy on this instance has a known exact per-round regret
    let uniform_t1 = body
        .iter()
        .find(|r| r.starts_with("uniform,1,"))
        .expect("uniform row");
    let mean: f64 = uniform_t1.split(',').nth(2).unwrap().parse().unwrap();
    assert!((mean - 2.0 / 15.0).abs() < 1e-12, "(K-1)/K * delta, got {mean}");

    // idempotent: plot.csv is excluded from its own input
    let output = oids(&["export-plot", run_dir.to_str().unwrap()], &[]);
    assert!(output.status.success());
    let again = fs::read_to_string(run_dir.join("plot.csv")).unwrap();
    assert_eq!(plot, again);

    let empty = tempfile::tempdir().unwrap();
    let output = oids(&["export-plot", empty.path().to_str().unwrap()], &[]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn check_bounds_reads_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("results");
    let config_path = tmp.path().join("config.json");
    fs::write(&config_path, minimal_config(&out)).unwrap();
    assert!(oids(&["run", "--config", config_path.to_str().unwrap()], &[])
        .status
        .success());
    let run_dir = out.join("smoke");
    let output = oids(
        &[
            "check-bounds",
            run_dir.to_str().unwrap(),
            "--k",
            "3",
            "--n",
            "3",
            "--lstar",
            "7.5",
        ],
        &[],
    );
    assert!(output.status.success(), "{output:?}");
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("worst_case"));
    assert!(stdout.contains("first_order"));
    assert!(stdout.contains("satisfied true"));

    let output = oids(&["check-bounds", "/nope", "--k", "3", "--n", "3"], &[]);
    assert_eq!(output.status.code(), Some(2));
}
