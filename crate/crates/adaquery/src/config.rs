//! Experiment configuration: a TOML file plus `--set key=value` overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::RunError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    SqAccuracy,
    ScqAccuracy,
    CountingViaScq,
    Attack,
    GdConvex,
    GdStronglyConvex,
    BenchTiming,
    AmplificationTable,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::SqAccuracy => "sq-accuracy",
            Kind::ScqAccuracy => "scq-accuracy",
            Kind::CountingViaScq => "counting-via-scq",
            Kind::Attack => "attack",
            Kind::GdConvex => "gd-convex",
            Kind::GdStronglyConvex => "gd-strongly-convex",
            Kind::BenchTiming => "bench-timing",
            Kind::AmplificationTable => "amplification-table",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingName {
    With,
    Without,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Workload {
    /// The sign-correlation overfitting attack.
    Attack,
    /// Independent uniformly random counting queries.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrivateMechanism {
    Subsampled,
    Scq,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScqCheck {
    Expectation,
    PrivacyRatio,
}

/// Mechanism and workload parameters. Each experiment kind reads the
/// fields it needs and fills the rest with defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub universe: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ns: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ell: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling: Option<SamplingName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workload: Option<Workload>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub private: Option<PrivateMechanism>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check: Option<ScqCheck>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flip_probs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calls: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boosted: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_ell: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub queries: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcripts: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traces: Option<bool>,
}

/// Thresholds checked after the run; unset ones take per-kind defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assertions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_failure_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_pass_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_separation_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_above_threshold_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_mean_excess: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boosted_strictly_better: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_private_growth: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_naive_growth: Option<f64>,
    /// Turns every check into a report-only metric.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disabled: Option<bool>,
}

fn default_trials() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Output path stem: results go to `<output>.csv` and `<output>.summary.json`.
    pub output: PathBuf,
    #[serde(default)]
    pub params: Params,
    #[serde(default, rename = "assert")]
    pub assertions: Assertions,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, RunError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| RunError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| RunError::Config(e.message().to_string()))?;
        if cfg.trials == 0 {
            return Err(RunError::field("trials", "must be >= 1"));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        Self::from_toml(&text, overrides)
    }

    /// The resolved configuration as TOML, for provenance headers.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Applies `a.b.c=value`; the value is read as a TOML literal, or as a
/// bare string when it does not parse as one.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), RunError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| RunError::Config(format!("override `{spec}` is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| RunError::Config(format!("empty override key in `{spec}`")))?;
    let mut cursor = table;
    for p in parts {
        let entry = cursor
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| RunError::field(key, "override path crosses a non-table value"))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
kind = "sq-accuracy"
trials = 3
seed = 9
output = "out/sq"

[params]
alpha = 0.2
k = 50
"#;

    #[test]
    fn parses_and_overrides() {
        let cfg = ExperimentConfig::from_toml(BASIC, &["params.k=10".into(), "seed=4".into(), "params.sampling=with".into()]).unwrap();
        assert_eq!(cfg.kind, Kind::SqAccuracy);
        assert_eq!(cfg.params.k, Some(10));
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.params.sampling, Some(SamplingName::With));
        assert_eq!(cfg.params.alpha, Some(0.2));
    }

    #[test]
    fn unknown_fields_are_named() {
        let err = ExperimentConfig::from_toml(BASIC, &["params.alhpa=0.1".into()]).unwrap_err();
        assert!(err.to_string().contains("alhpa"), "{err}");
        let err = ExperimentConfig::from_toml(&BASIC.replace("trials", "trails"), &[]).unwrap_err();
        assert!(err.to_string().contains("trails"), "{err}");
    }

    #[test]
    fn bad_kind_and_zero_trials() {
        assert!(ExperimentConfig::from_toml(&BASIC.replace("sq-accuracy", "nope"), &[]).is_err());
        let err = ExperimentConfig::from_toml(BASIC, &["trials=0".into()]).unwrap_err();
        assert!(err.to_string().contains("trials"));
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::from_toml(BASIC, &[]).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn malformed_override() {
        assert!(ExperimentConfig::from_toml(BASIC, &["params.k".into()]).is_err());
        assert!(ExperimentConfig::from_toml(BASIC, &["kind.x=1".into()]).is_err());
    }
}
