//! Experiment configuration: a built-in base, an optional named preset and a
//! user file, deep-merged in that order and validated with field paths.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use snn_core::event_data::SyntheticTaskSpec;
use snn_core::network::Topology;
use snn_core::neuron::NeuronKind;
use snn_core::training::{AdamaxConfig, SurrogateConfig, TrainConfig};
use toml::{Table, Value};

const BASE: &str = include_str!("../presets/base.toml");

pub const PRESETS: [(&str, &str); 4] = [
    ("rate-task", ""),
    (
        "temporal-order",
        include_str!("../presets/temporal-order.toml"),
    ),
    ("nmnist-like", include_str!("../presets/nmnist-like.toml")),
    ("shd-like", include_str!("../presets/shd-like.toml")),
];

/// Tables that switch shape on a discriminator key; a differing
/// discriminator replaces the table instead of merging into it.
const TAGGED: [(&str, &str); 2] = [
    ("dataset.source", "type"),
    ("dataset.source.spec.task", "kind"),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
    pub seeds: Vec<u64>,
    pub dataset: DatasetConfig,
    pub topology: Topology,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub dt_ms: f64,
    pub steps: usize,
    pub source: DataSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum DataSource {
    Synthetic {
        spec: SyntheticTaskSpec,
    },
    /// JSON-lines manifests; relative paths resolve against the config file.
    Manifest {
        train: PathBuf,
        test: PathBuf,
        class_count: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: NeuronKind,
    pub tau_mem_ms: f64,
    pub tau_syn_ms: f64,
    pub heterogeneous: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub surrogate_steepness: f64,
    pub adamax_beta1: f64,
    pub adamax_beta2: f64,
    pub adamax_epsilon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub tau_mem_ms: Vec<f64>,
    pub tau_syn_ms: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Off: the epoch log's `wall_time_s` column is 0 so logs stay
    /// byte-identical across runs; timings go to `timing.csv` instead.
    pub log_wall_time: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.into(),
        message: message.into(),
    }
}

fn parse_table(text: &str, origin: &str) -> Result<Table, ConfigError> {
    text.parse::<Table>()
        .map_err(|e| err("", format!("{origin}: {}", e.message())))
}

/// Recursively overlays `top` onto `base`.
pub fn merge(base: &mut Table, top: Table) {
    merge_at(base, top, "");
}

fn merge_at(base: &mut Table, top: Table, prefix: &str) {
    for (key, value) in top {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(t)) => {
                let replaced = TAGGED.iter().any(|&(p, tag)| {
                    p == path && t.get(tag).is_some_and(|v| Some(v) != b.get(tag))
                });
                if replaced {
                    *b = t;
                } else {
                    merge_at(b, t, &path);
                }
            }
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.0)
}

/// Base merged with `preset` (if any) and then with `user`.
pub fn expand(user: Table) -> Result<Table, ConfigError> {
    let mut table = parse_table(BASE, "base config")?;
    if let Some(name) = user.get("preset") {
        let name = name
            .as_str()
            .ok_or_else(|| err("preset", "expected a string"))?;
        let (_, text) = PRESETS.iter().find(|p| p.0 == name).ok_or_else(|| {
            err(
                "preset",
                format!(
                    "unknown preset `{name}`; expected one of {}",
                    preset_names().collect::<Vec<_>>().join(", ")
                ),
            )
        })?;
        merge(&mut table, parse_table(text, name)?);
    }
    merge(&mut table, user);
    Ok(table)
}

impl ExperimentConfig {
    /// Expands and validates a table; nothing is read from disk.
    pub fn from_table(user: Table) -> Result<Self, ConfigError> {
        let merged = expand(user)?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(Value::Table(merged))
            .map_err(|e| err(&e.path().to_string(), e.inner().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Self::from_table(parse_table(text, "config")?)
    }

    /// Loads `path`; relative manifest paths become relative to its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let DataSource::Manifest { train, test, .. } = &mut cfg.dataset.source {
            for p in [train, test] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let mut t = Table::new();
        t.insert("preset".into(), Value::String(name.into()));
        Self::from_table(t)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.dataset;
        if !(d.dt_ms > 0.0 && d.dt_ms.is_finite()) {
            return Err(err("dataset.dt_ms", "must be positive and finite"));
        }
        if d.steps == 0 {
            return Err(err("dataset.steps", "must be positive"));
        }
        let t = &self.topology;
        for (name, v) in [
            ("inputs", t.inputs),
            ("hidden", t.hidden),
            ("outputs", t.outputs),
        ] {
            if v == 0 {
                return Err(err(&format!("topology.{name}"), "must be positive"));
            }
        }
        let classes = match &d.source {
            DataSource::Synthetic { spec } => {
                spec.validate()
                    .map_err(|e| err("dataset.source.spec", e.to_string()))?;
                if spec.channel_count as usize != t.inputs {
                    return Err(err(
                        "topology.inputs",
                        format!(
                            "{} does not match dataset.source.spec.channel_count {}",
                            t.inputs, spec.channel_count
                        ),
                    ));
                }
                spec.class_count
            }
            DataSource::Manifest { class_count, .. } => *class_count,
        };
        if classes == 0 {
            return Err(err("dataset.source.class_count", "must be positive"));
        }
        if classes > t.outputs {
            return Err(err(
                "topology.outputs",
                format!("{} readout neurons for {classes} classes", t.outputs),
            ));
        }
        let m = &self.model;
        self.model_spec().map_err(|e| err("model", e.to_string()))?;
        if m.tau_mem_ms.is_nan() || m.tau_syn_ms.is_nan() {
            return Err(err("model", "time constants must not be NaN"));
        }
        self.train_config(0)
            .validate()
            .map_err(|e| err("training", e.to_string()))?;
        let a = &self.training;
        if !(0.0..1.0).contains(&a.adamax_beta1) {
            return Err(err("training.adamax_beta1", "must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&a.adamax_beta2) {
            return Err(err("training.adamax_beta2", "must be in [0, 1)"));
        }
        if !(a.adamax_epsilon > 0.0) {
            return Err(err("training.adamax_epsilon", "must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(err("seeds", "at least one seed is required"));
        }
        for (name, grid) in [
            ("tau_mem_ms", &self.sweep.tau_mem_ms),
            ("tau_syn_ms", &self.sweep.tau_syn_ms),
        ] {
            if grid.is_empty() {
                return Err(err(&format!("sweep.{name}"), "must not be empty"));
            }
            if let Some(k) = grid.iter().position(|x| !(*x >= 0.0)) {
                return Err(err(&format!("sweep.{name}[{k}]"), "must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn model_spec(&self) -> snn_core::Result<snn_core::ModelSpec> {
        snn_core::ModelSpec::homogeneous(
            self.model.kind,
            &self.topology,
            self.model.tau_mem_ms,
            self.model.tau_syn_ms,
            self.dataset.dt_ms,
        )
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            seed,
            heterogeneous: self.model.heterogeneous,
            surrogate: SurrogateConfig {
                steepness: t.surrogate_steepness,
            },
            adamax: AdamaxConfig {
                beta1: t.adamax_beta1,
                beta2: t.adamax_beta2,
                eps: t.adamax_epsilon,
            },
        }
    }

    pub fn kind(&self) -> NeuronKind {
        self.model.kind
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_table(Table::new()).expect("base config is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid() {
        for name in preset_names() {
            let cfg = ExperimentConfig::preset(name).unwrap();
            assert_eq!(cfg.preset.as_deref(), Some(name));
        }
    }

    #[test]
    fn hyperparameter_table_presets() {
        let n = ExperimentConfig::preset("nmnist-like").unwrap();
        let s = ExperimentConfig::preset("shd-like").unwrap();
        let row = |c: &ExperimentConfig| {
            (
                (c.topology.inputs, c.topology.hidden, c.topology.outputs),
                c.training.learning_rate,
                c.dataset.dt_ms,
                c.training.surrogate_steepness,
                c.training.batch_size,
                c.training.epochs,
            )
        };
        assert_eq!(row(&n), ((2312, 200, 10), 5e-3, 14.0, 100.0, 256, 50));
        assert_eq!(row(&s), ((700, 200, 20), 2e-4, 14.0, 100.0, 128, 200));
        assert_eq!((n.dataset.steps, s.dataset.steps), (22, 100));
        assert_eq!(n.seeds, vec![0, 1, 2]);
    }

    #[test]
    fn expanded_config_round_trips() {
        for name in preset_names() {
            let cfg = ExperimentConfig::preset(name).unwrap();
            let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(cfg, again);
        }
    }

    #[test]
    fn user_values_override_preset() {
        let cfg =
            ExperimentConfig::from_toml("preset = \"shd-like\"\n[training]\nepochs = 3\n").unwrap();
        assert_eq!(cfg.training.epochs, 3);
        assert_eq!(cfg.training.batch_size, 128);
    }

    #[test]
    fn switching_source_type_replaces_the_table() {
        let cfg = ExperimentConfig::from_toml(
            "[dataset.source]\ntype = \"manifest\"\ntrain = \"a.jsonl\"\ntest = \"b.jsonl\"\nclass_count = 4\n",
        )
        .unwrap();
        assert!(matches!(
            cfg.dataset.source,
            DataSource::Manifest { class_count: 4, .. }
        ));
    }

    #[test]
    fn errors_carry_field_paths() {
        let cases = [
            (
                "[training]\nlearning_rate = \"fast\"\n",
                "training.learning_rate",
            ),
            ("[training]\nlerning_rate = 1.0\n", "training.lerning_rate"),
            ("[topology]\ninputs = 3\n", "topology.inputs"),
            ("[dataset]\nsteps = 0\n", "dataset.steps"),
            ("seeds = []\n", "seeds"),
            ("[sweep]\ntau_mem_ms = [1.0, -2.0]\n", "sweep.tau_mem_ms[1]"),
            ("preset = \"imagenet\"\n", "preset"),
            ("[model]\nkind = \"HH\"\n", "model.kind"),
        ];
        for (text, path) in cases {
            let e = ExperimentConfig::from_toml(text).unwrap_err();
            assert_eq!(e.path, path, "{text} -> {e}");
        }
    }
}
