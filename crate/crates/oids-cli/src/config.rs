//! Experiment configuration document.

use std::path::PathBuf;

use oids_core::envs::InstanceRecipe;
use oids_core::policy::AlgorithmSpec;
use oids_core::sim::BoundTag;
use serde::{Deserialize, Serialize};

/// A full experiment: instance, algorithms, horizon, repetitions, outputs.
/// Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub env: InstanceRecipe,
    pub algos: Vec<AlgorithmSpec>,
    #[serde(rename = "T")]
    pub t: usize,
    pub reps: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub diagnostics: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<BoundTag>,
}

impl ExperimentConfig {
    pub fn parse(doc: &str) -> Result<Self, String> {
        let config: ExperimentConfig =
            serde_json::from_str(doc).map_err(|e| format!("config: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), String> {
        if self.name.is_empty() {
            return Err("config: `name` must be non-empty".into());
        }
        if self
            .name
            .chars()
            .any(|c| !(c.is_ascii_alphanumeric() || c == '-' || c == '_'))
        {
            return Err("config: `name` may use [A-Za-z0-9-_] only".into());
        }
        if self.reps == 0 {
            return Err("config: `reps` must be at least 1".into());
        }
        if self.algos.is_empty() {
            return Err("config: `algos` must list at least one algorithm".into());
        }
        Ok(())
    }

    /// Output directory: the config field, else the `OIDS_OUTPUT_DIR`
    /// environment variable.
    pub fn resolved_output_dir(&self) -> Result<PathBuf, String> {
        if let Some(dir) = &self.output_dir {
            return Ok(dir.clone());
        }
        match std::env::var_os("OIDS_OUTPUT_DIR") {
            Some(dir) if !dir.is_empty() => Ok(PathBuf::from(dir)),
            _ => Err("config: no `output_dir` and OIDS_OUTPUT_DIR is unset".into()),
        }
    }
}

/// Unique, deterministic label per configured algorithm: the kind name,
/// disambiguated with the list index when a kind repeats.
pub fn algo_labels(algos: &[AlgorithmSpec]) -> Vec<String> {
    let mut counts = std::collections::HashMap::new();
    for a in algos {
        *counts.entry(a.kind.name()).or_insert(0usize) += 1;
    }
    algos
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if counts[a.kind.name()] > 1 {
                format!("{i:02}-{}", a.kind.name())
            } else {
                a.kind.name().to_string()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "smoke",
        "env": {"kind": "revelatory_zero", "K": 3, "delta": 0.2, "theta0": 0},
        "algos": [{"kind": "voids"}],
        "T": 10,
        "reps": 2,
        "base_seed": 7
    }"#;

    #[test]
    fn round_trip_is_identity() {
        let config = ExperimentConfig::parse(MINIMAL).unwrap();
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back = ExperimentConfig::parse(&json).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn missing_field_and_unknown_key() {
        let err = ExperimentConfig::parse(r#"{"name": "x"}"#).unwrap_err();
        assert!(err.contains("missing field"), "{err}");
        let with_unknown = MINIMAL.replace("\"base_seed\": 7", "\"base_seed\": 7, \"zeta\": 1");
        let err = ExperimentConfig::parse(&with_unknown).unwrap_err();
        assert!(err.contains("unknown field"), "{err}");
        let no_t = MINIMAL.replace("\"T\": 10,", "");
        let err = ExperimentConfig::parse(&no_t).unwrap_err();
        assert!(err.contains('T'), "{err}");
    }

    #[test]
    fn labels_disambiguate_repeats() {
        use oids_core::policy::{AlgoKind, AlgorithmSpec};
        let algos = vec![
            AlgorithmSpec::new(AlgoKind::Voids),
            AlgorithmSpec::new(AlgoKind::Uniform),
        ];
        assert_eq!(algo_labels(&algos), vec!["voids", "uniform"]);
        let twice = vec![
            AlgorithmSpec::new(AlgoKind::Voids).with_lambda(
                oids_core::policy::LambdaSpec::Value(0.01),
            ),
            AlgorithmSpec::new(AlgoKind::Voids),
        ];
        assert_eq!(algo_labels(&twice), vec!["00-voids", "01-voids"]);
    }
}
