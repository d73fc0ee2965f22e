//! The run configuration file: one versioned JSON document holding the
//! model, training and framing settings, the file locations and the seed.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::dsp::{StftConfig, LPS_BINS};
use crate::error::{Error, Result};
use crate::network::{ModelConfig, Variant};
use crate::training::TrainConfig;

pub const RUN_CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunPaths {
    pub train_manifest: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_manifest: Option<PathBuf>,
    /// Normalizer file, produced by `stats`.
    pub stats: PathBuf,
    pub output_dir: PathBuf,
}

impl RunPaths {
    /// Joins relative paths onto `base`.
    pub fn resolved(&self, base: &Path) -> RunPaths {
        let r = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        RunPaths {
            train_manifest: r(&self.train_manifest),
            valid_manifest: self.valid_manifest.as_deref().map(r),
            stats: r(&self.stats),
            output_dir: r(&self.output_dir),
        }
    }
}

/// `model` may list only `variant` plus the fields that differ from that
/// variant's preset; it is always written back in full. `seed` seeds the
/// weight initialization, `train.seed` the data order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(deserialize_with = "model_over_preset")]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub stft: StftConfig,
    pub paths: RunPaths,
    #[serde(default)]
    pub seed: u64,
}

fn model_over_preset<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<ModelConfig, D::Error> {
    use serde::de::Error as _;
    let serde_json::Value::Object(overrides) = serde_json::Value::deserialize(d)? else {
        return Err(D::Error::custom("expected an object"));
    };
    let variant = overrides.get("variant").ok_or_else(|| D::Error::missing_field("variant"))?;
    let variant: Variant = serde_json::from_value(variant.clone()).map_err(D::Error::custom)?;
    let mut merged = match serde_json::to_value(ModelConfig::preset(variant)).map_err(D::Error::custom)? {
        serde_json::Value::Object(m) => m,
        _ => unreachable!("ModelConfig serializes to an object"),
    };
    merged.extend(overrides);
    serde_path_to_error::deserialize(serde_json::Value::Object(merged))
        .map_err(|e| D::Error::custom(format!("{}: {}", e.path(), e.inner())))
}

impl RunConfig {
    pub fn new(model: ModelConfig, paths: RunPaths) -> Self {
        RunConfig {
            version: RUN_CONFIG_VERSION,
            model,
            train: TrainConfig::default(),
            stft: StftConfig::default(),
            paths,
            seed: 0,
        }
    }

    /// Parses and validates. Errors name the offending key path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("{path}: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != RUN_CONFIG_VERSION {
            return Err(Error::Config(format!(
                "version: expected {RUN_CONFIG_VERSION}, found {}",
                self.version
            )));
        }
        self.model.validate()?;
        self.train.validate()?;
        self.stft.validate()?;
        if self.stft.bins() != LPS_BINS + 1 || self.model.freq_bins != LPS_BINS {
            return Err(Error::Config(format!(
                "stft and model must agree on {LPS_BINS} feature bins (frame_len {}, model.freq_bins {})",
                self.stft.frame_len, self.model.freq_bins
            )));
        }
        if !self.train.segment_samples.is_multiple_of(self.stft.hop) {
            return Err(Error::Config("train.segment_samples must be a multiple of stft.hop".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::CausalityMode;

    fn paths() -> RunPaths {
        RunPaths {
            train_manifest: "data/manifest.json".into(),
            valid_manifest: None,
            stats: "stats.bin".into(),
            output_dir: "run".into(),
        }
    }

    #[test]
    fn round_trips_unchanged() {
        let mut c = RunConfig::new(ModelConfig::tfcn_d().with_causality(CausalityMode::SemiCausal { look_ahead_frames: 19 }), paths());
        c.paths.valid_manifest = Some("valid.json".into());
        c.train.max_steps = Some(7);
        c.seed = 42;
        let text = c.to_json().unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn partial_model_fills_from_preset() {
        let text = r#"{"version":1,"model":{"variant":"TFCN_D","repeated_blocks":2},
            "paths":{"train_manifest":"m.json","stats":"s.bin","output_dir":"o"}}"#;
        let c = RunConfig::from_json(text).unwrap();
        assert_eq!(c.model, ModelConfig::tfcn_d().with_blocks(2, 8));
        assert_eq!(c.train, TrainConfig::default());
    }

    #[test]
    fn unknown_keys_rejected_with_path() {
        let text = r#"{"version":1,"model":{"variant":"TFCN"},
            "paths":{"train_manifest":"m.json","stats":"s.bin","output_dir":"o"},
            "train":{"initial_lr":0.001,"learning_rate":1}}"#;
        let msg = RunConfig::from_json(text).unwrap_err().to_string();
        assert!(msg.contains("train") && msg.contains("learning_rate"), "{msg}");

        let text = r#"{"version":1,"model":{"variant":"TFCN","repeated_blokcs":2},
            "paths":{"train_manifest":"m.json","stats":"s.bin","output_dir":"o"}}"#;
        let msg = RunConfig::from_json(text).unwrap_err().to_string();
        assert!(msg.contains("model") && msg.contains("repeated_blokcs"), "{msg}");
    }

    #[test]
    fn type_errors_name_nested_key() {
        let text = r#"{"version":1,"model":{"variant":"TFCN"},
            "paths":{"train_manifest":"m.json","stats":"s.bin","output_dir":"o"},
            "train":{"batch_size":"eight"}}"#;
        let msg = RunConfig::from_json(text).unwrap_err().to_string();
        assert!(msg.contains("train.batch_size"), "{msg}");
    }

    #[test]
    fn version_and_consistency_checked() {
        let mut c = RunConfig::new(ModelConfig::tfcn(), paths());
        c.version = 2;
        assert!(c.validate().is_err());
        c.version = 1;
        c.stft.frame_len = 1024;
        assert!(c.validate().is_err());
    }

    #[test]
    fn paths_resolve_against_base() {
        let mut p = paths();
        p.stats = "/abs/stats.bin".into();
        let r = p.resolved(Path::new("/cfg"));
        assert_eq!(r.train_manifest, PathBuf::from("/cfg/data/manifest.json"));
        assert_eq!(r.stats, PathBuf::from("/abs/stats.bin"));
    }
}
