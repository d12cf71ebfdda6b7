//! Command implementations: run, replicate, export-plot, check-bounds.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use oids_core::envs::{self, InstanceRecipe};
use oids_core::policy::{self, AlgoKind, AlgorithmSpec};
use oids_core::sim::{
    self, run_batch, AlgoSummary, BatchConfig, BoundTag, InstanceMeta,
};

use crate::config::{algo_labels, ExperimentConfig};

/// Failures are classified so `main` can map them to exit codes:
/// validation errors exit 2, runtime failures exit 3.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Validation(m) | CliError::Runtime(m) => m,
        }
    }
}

fn validation<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Validation(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Write through a temp file in the same directory, then rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(runtime)?;
    fs::rename(&tmp, path).map_err(runtime)?;
    Ok(())
}

pub fn cmd_run(
    config_path: &Path,
    seed_override: Option<u64>,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let doc = fs::read_to_string(config_path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", config_path.display())))?;
    let mut config = ExperimentConfig::parse(&doc).map_err(CliError::Validation)?;
    if let Some(seed) = seed_override {
        config.base_seed = seed;
    }
    let out_dir = config
        .resolved_output_dir()
        .map_err(CliError::Validation)?
        .join(&config.name);

    let env = config.env.build().map_err(validation)?;
    let (k, n) = (env.model().num_actions(), env.model().n_params());
    for spec in &config.algos {
        spec.resolve(k, n, config.t.max(1)).map_err(validation)?;
    }
    let meta = InstanceMeta {
        k,
        n,
        t: config.t,
        lstar: config
            .env
            .known_lstar_per_round()
            .map(|per_round| per_round * config.t as f64),
        v: config
            .algos
            .iter()
            .find_map(|a| a.v)
            .or(Some(1.0)),
    };
    for tag in &config.bounds {
        sim::bound_value(*tag, &meta).map_err(validation)?;
    }

    let batch_config = BatchConfig {
        algos: config.algos.clone(),
        horizon: config.t,
        reps: config.reps,
        base_seed: config.base_seed,
        diagnostics: config.diagnostics,
        collect_traces: true,
    };
    let result = match jobs {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(runtime)?
            .install(|| run_batch(&env, &batch_config)),
        None => run_batch(&env, &batch_config),
    }
    .map_err(runtime)?;

    fs::create_dir_all(&out_dir).map_err(runtime)?;
    let labels = algo_labels(&config.algos);
    let mut summaries = Vec::new();
    for ((report, traces), label) in result.reports.iter().zip(&result.traces).zip(&labels) {
        for (rep, trace) in traces.iter().enumerate() {
            let mut buf = Vec::new();
            trace
                .write_csv(&mut buf, &format!("{label}/{rep}"), config.diagnostics)
                .map_err(runtime)?;
            write_atomic(
                &out_dir.join(format!("trace-{label}-rep{rep:04}.csv")),
                &buf,
            )?;
        }
        let mut bounds = Vec::new();
        for tag in &config.bounds {
            bounds.push(sim::bound_check(report, *tag, &meta).map_err(runtime)?);
        }
        summaries.push(AlgoSummary {
            algorithm: label.clone(),
            instance: config.env.describe(),
            t: config.t,
            reps: config.reps,
            mean_final_regret: report.mean_final_regret,
            stderr: report.stderr,
            bounds,
        });
    }
    let json = serde_json::to_string_pretty(&summaries).map_err(runtime)?;
    write_atomic(&out_dir.join("summary.json"), json.as_bytes())?;

    for summary in &summaries {
        println!(
            "{}: mean final regret {:.4} (se {:.4}) over {} reps{}",
            summary.algorithm,
            summary.mean_final_regret,
            summary.stderr,
            summary.reps,
            if summary.bounds.is_empty() {
                String::new()
            } else {
                let checks: Vec<String> = summary
                    .bounds
                    .iter()
                    .map(|b| format!("{} <= {:.1}: {}", b.tag, b.value, b.satisfied))
                    .collect();
                format!("; bounds [{}]", checks.join(", "))
            }
        );
    }
    println!(
        "wrote {} ({} traces) in {:.2?}",
        out_dir.display(),
        config.reps * config.algos.len(),
        result.wall_clock
    );
    Ok(())
}

pub enum Example {
    Revealing,
    Sparse,
    Revelatory,
}

impl std::str::FromStr for Example {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "revealing" => Ok(Example::Revealing),
            "sparse" => Ok(Example::Sparse),
            "revelatory" => Ok(Example::Revelatory),
            other => Err(format!(
                "unknown example `{other}`; expected revealing | sparse | revelatory"
            )),
        }
    }
}

/// Run the canonical configuration for a named example and print a
/// pass/fail table against its expected behavior.
pub fn cmd_replicate(
    example: Example,
    out: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let base_seed = seed_override.unwrap_or(20_240_001);
    let mut lines: Vec<String> = Vec::new();
    let mut all_pass = true;
    let mut check = |label: String, pass: bool, detail: String| {
        all_pass &= pass;
        lines.push(format!(
            "{:<44} {:<4} {detail}",
            label,
            if pass { "PASS" } else { "FAIL" }
        ));
    };

    match example {
        Example::Revealing => {
            let spec = AlgorithmSpec::new(AlgoKind::Voids);
            for theta0 in 0..8usize {
                let env = envs::make_revealing_action(8, theta0).map_err(runtime)?;
                let trace = sim::run_episode(
                    &env,
                    &spec,
                    50,
                    sim::derive_seed(base_seed, theta0 as u64),
                    false,
                )
                .map_err(runtime)?;
                let expected = 1.0 - 0.5f64.powi(theta0 as i32 + 1);
                let got = trace.final_regret_policy();
                check(
                    format!("revealing K=8 theta0={}", theta0 + 1),
                    (got - expected).abs() <= 1e-9,
                    format!("regret {got} expected {expected}"),
                );
            }
        }
        Example::Sparse => {
            let d = 8usize;
            let spec = AlgorithmSpec::new(AlgoKind::Voids);
            for theta0 in [0usize, 3, 7] {
                let env = envs::make_sparse_linear(d, theta0).map_err(runtime)?;
                for rep in 0..2u64 {
                    let trace = sim::run_episode(
                        &env,
                        &spec,
                        12,
                        sim::derive_seed(base_seed, theta0 as u64 * 2 + rep),
                        false,
                    )
                    .map_err(runtime)?;
                    let identified = trace
                        .rounds
                        .iter()
                        .position(|r| r.support_size == 1)
                        .map(|i| i + 1);
                    check(
                        format!("sparse d=8 theta0={theta0} rep={rep}"),
                        identified.is_some_and(|round| round <= 4),
                        format!("identification round {identified:?} (log2 d = 3, +1 slack)"),
                    );
                }
            }
        }
        Example::Revelatory => {
            let recipe = InstanceRecipe::RevelatoryZero {
                k: 4,
                delta: 0.1,
                theta0: Some(1),
                theta0_seed: None,
            };
            let env = recipe.build().map_err(runtime)?;
            let config = BatchConfig {
                algos: vec![
                    AlgorithmSpec::new(AlgoKind::Voids),
                    AlgorithmSpec::new(AlgoKind::Roids),
                ],
                horizon: 500,
                reps: 500,
                base_seed,
                diagnostics: false,
                collect_traces: false,
            };
            let batch = run_batch(&env, &config).map_err(runtime)?;
            for report in &batch.reports {
                check(
                    format!("revelatory K=4 delta=0.1 {}", report.algorithm),
                    (0.75..=3.0).contains(&report.mean_final_regret),
                    format!(
                        "mean regret {:.3} over 500 seeds, band [0.75, 3.0]",
                        report.mean_final_regret
                    ),
                );
            }
            let game = envs::post_identification_dec_game(3, 0.1, 0).map_err(runtime)?;
            let (pi, value) =
                policy::e2d_policy_with_value(game.env.model(), 0, 0.05, &game.p_hat)
                    .map_err(runtime)?;
            let expect = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];
            let close = pi
                .probs()
                .iter()
                .zip(expect)
                .all(|(g, w)| (g - w).abs() <= 1e-3)
                && (value - 1.0 / 30.0).abs() <= 1e-3;
            check(
                "revelatory post-identification e2d".into(),
                close,
                format!("policy {:?} value {value:.5}", pi.probs()),
            );
            if let Some(dir) = out {
                fs::create_dir_all(dir).map_err(runtime)?;
                let summaries: Vec<AlgoSummary> = batch
                    .reports
                    .iter()
                    .map(|r| AlgoSummary {
                        algorithm: r.algorithm.clone(),
                        instance: "revelatory_zero(K=4, delta=0.1)".into(),
                        t: 500,
                        reps: 500,
                        mean_final_regret: r.mean_final_regret,
                        stderr: r.stderr,
                        bounds: vec![],
                    })
                    .collect();
                let json = serde_json::to_string_pretty(&summaries).map_err(runtime)?;
                write_atomic(&dir.join("summary.json"), json.as_bytes())?;
            }
        }
    }

    let mut table = String::new();
    for line in &lines {
        println!("{line}");
        let _ = writeln!(table, "{line}");
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(runtime)?;
        write_atomic(&dir.join("report.txt"), table.as_bytes())?;
    }
    if all_pass {
        Ok(())
    } else {
        Err(CliError::Runtime("replicate: at least one check failed".into()))
    }
}

/// Aggregate the trace CSVs in a directory into a long-format plot CSV:
/// per algorithm and round, the mean cumulative policy regret and its
/// standard error across repetitions.
pub fn cmd_export_plot(dir: &Path) -> Result<(), CliError> {
    if !dir.is_dir() {
        return Err(CliError::Validation(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    // algorithm -> t -> per-rep cumulative regrets
    let mut series: BTreeMap<String, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(runtime)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "csv")
                && p.file_name().is_some_and(|f| f != "plot.csv")
        })
        .collect();
    entries.sort();
    for path in &entries {
        let text = fs::read_to_string(path).map_err(runtime)?;
        let mut rows = text.lines();
        let Some(header) = rows.next() else { continue };
        if !header.starts_with("run_id,") {
            continue;
        }
        for row in rows {
            let fields: Vec<&str> = row.split(',').collect();
            if fields.len() < 10 {
                return Err(CliError::Runtime(format!(
                    "malformed trace row in {}",
                    path.display()
                )));
            }
            let algo = fields[0].split('/').next().unwrap_or(fields[0]).to_string();
            let t: usize = fields[2]
                .parse()
                .map_err(|e| CliError::Runtime(format!("bad round in {}: {e}", path.display())))?;
            let cum: f64 = fields[8].parse().map_err(|e| {
                CliError::Runtime(format!("bad regret in {}: {e}", path.display()))
            })?;
            series.entry(algo).or_default().entry(t).or_default().push(cum);
        }
    }
    if series.is_empty() {
        return Err(CliError::Validation(format!(
            "no trace CSVs found in {}",
            dir.display()
        )));
    }
    let mut out = String::from("algorithm,t,mean_cum_regret_policy,stderr\n");
    for (algo, by_round) in &series {
        for (t, values) in by_round {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let stderr = if values.len() > 1 {
                let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                    / (values.len() - 1) as f64;
                (var / n).sqrt()
            } else {
                0.0
            };
            let _ = writeln!(out, "{algo},{t},{mean},{stderr}");
        }
    }
    write_atomic(&dir.join("plot.csv"), out.as_bytes())?;
    println!("wrote {}", dir.join("plot.csv").display());
    Ok(())
}

/// Evaluate closed-form bounds against a summary file.
pub fn cmd_check_bounds(
    dir: &Path,
    k: usize,
    n: usize,
    lstar: Option<f64>,
    v: Option<f64>,
) -> Result<(), CliError> {
    let path = dir.join("summary.json");
    let doc = fs::read_to_string(&path)
        .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let summaries: Vec<AlgoSummary> = serde_json::from_str(&doc)
        .map_err(|e| CliError::Validation(format!("malformed summary: {e}")))?;
    let mut tags = vec![BoundTag::WorstCase];
    if lstar.is_some() {
        tags.push(BoundTag::FirstOrder);
    }
    if v.is_some() {
        tags.push(BoundTag::Subgaussian);
    }
    for summary in &summaries {
        let meta = InstanceMeta {
            k,
            n,
            t: summary.t,
            lstar,
            v,
        };
        for tag in &tags {
            let value = sim::bound_value(*tag, &meta).map_err(validation)?;
            let level = summary.mean_final_regret + 3.0 * summary.stderr;
            println!(
                "{:<12} {:<12} bound {:>12.3}  mean+3se {:>12.3}  satisfied {}",
                summary.algorithm,
                tag.name(),
                value,
                level,
                level <= value
            );
        }
    }
    Ok(())
}
