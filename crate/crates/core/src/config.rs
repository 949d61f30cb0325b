//! Pipeline configuration: a TOML file with `[data]`, `[features]`,
//! `[train]`, `[lms]` and `[evaluate]` tables. Every key has a default, so
//! an empty file is a valid configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bowreg::{ModelFormat, TrainConfig};
use crate::error::{Error, Result};
use crate::evalx::HumanMode;
use crate::lexfeat::FeatureOptions;
use crate::lms::DEFAULT_LAMBDAS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Vec<PathBuf>,
    pub dev: Option<PathBuf>,
    /// Prediction files to evaluate, one per model.
    pub predictions: Vec<PathBuf>,
    /// Adversarial sets, scored alongside the `CS_λ` subsets.
    pub adv: Vec<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub min_count: u32,
    pub lowercase: bool,
    /// Hashed indexing into `2^hash_bits` slots instead of a dictionary.
    pub hash_bits: Option<u32>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            min_count: 2,
            lowercase: true,
            hash_bits: None,
        }
    }
}

impl FeatureConfig {
    pub fn options(&self) -> FeatureOptions {
        FeatureOptions {
            lowercase: self.lowercase,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LmsConfig {
    pub lambdas: Vec<f64>,
}

impl Default for LmsConfig {
    fn default() -> Self {
        LmsConfig {
            lambdas: DEFAULT_LAMBDAS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Add majority-vote and human rows.
    pub baselines: bool,
    /// Missing predictions are errors rather than coverage loss.
    pub strict: bool,
    pub human_mode: HumanMode,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            baselines: true,
            strict: false,
            human_mode: HumanMode::Average,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub format: ModelFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataConfig,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub lms: LmsConfig,
    pub evaluate: EvaluateConfig,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("data", &["train", "dev", "predictions", "adv", "out_dir"]),
    ("features", &["min_count", "lowercase", "hash_bits"]),
    (
        "train",
        &["l2", "epochs", "batch_size", "learning_rate", "lr_decay", "seed", "bias", "shuffle_buffer"],
    ),
    ("model", &["format"]),
    ("lms", &["lambdas"]),
    ("evaluate", &["baselines", "strict", "human_mode"]),
];

fn unknown_keys(table: &toml::Table) -> Vec<String> {
    let mut out = Vec::new();
    for (k, v) in table {
        match SECTIONS.iter().find(|(s, _)| s == k) {
            None => out.push(format!("unknown key `{k}`")),
            Some((s, keys)) => match v.as_table() {
                None => out.push(format!("`{s}` must be a table")),
                Some(t) => {
                    for key in t.keys() {
                        if !keys.contains(&key.as_str()) {
                            out.push(format!("unknown key `{s}.{key}`"));
                        }
                    }
                }
            },
        }
    }
    out
}

impl Config {
    /// Parses TOML text. Unknown keys and invalid values are collected into
    /// one [`Error::Config`]. Relative paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Config> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
        let mut problems = unknown_keys(&table);
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let mut cfg: Config = table.try_into().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
        if let Err(mut p) = cfg.train.validate() {
            problems.append(&mut p);
        }
        for l in &cfg.lms.lambdas {
            if !(0.0..=1.0).contains(l) {
                problems.push(format!("lms.lambdas: {l} outside [0, 1]"));
            }
        }
        if let Some(b) = cfg.features.hash_bits {
            if !(1..=31).contains(&b) {
                problems.push(format!("features.hash_bits: {b} outside 1..=31"));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        if let Some(base) = base_dir {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Config> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Config::from_toml_str(&text, Some(base))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let d = &mut self.data;
        d.train.iter_mut().for_each(fix);
        d.predictions.iter_mut().for_each(fix);
        d.adv.iter_mut().for_each(fix);
        d.dev.iter_mut().for_each(fix);
        d.out_dir.iter_mut().for_each(fix);
    }

    /// Canonical TOML rendering with every default filled in.
    pub fn normalized(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
