//! Single-file model checkpoints: `TFCNCKPT`, a little-endian `u64` header
//! length, a JSON header, then raw little-endian `f32` data in manifest order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::model::{build_model, Model};
use super::plan::param_count;
use crate::dsp::Normalizer;
use crate::error::{Error, Result};
use crate::tensor::NormMode;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"TFCNCKPT";
const NORM_MEAN: &str = "norm.mean";
const NORM_STD: &str = "norm.std";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Param,
    Buffer,
    /// Any extra state saved alongside the model, e.g. optimizer moments.
    Aux,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub kind: EntryKind,
    pub shape: Vec<usize>,
    /// Byte offset into the data section.
    pub offset: u64,
    /// Number of `f32` values.
    pub len: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    seed: u64,
    mode: NormMode,
    manifest: Vec<ManifestEntry>,
    #[serde(default)]
    extra: serde_json::Value,
}

/// A model plus whatever the caller stored next to it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f32>,
    /// Free-form JSON (training progress, normalizer path, ...).
    pub extra: serde_json::Value,
    pub aux: Vec<(String, Vec<f32>)>,
}

impl Checkpoint {
    pub fn new(model: Model<f32>) -> Self {
        Checkpoint {
            model,
            extra: serde_json::Value::Null,
            aux: Vec::new(),
        }
    }

    pub fn aux(&self, name: &str) -> Option<&[f32]> {
        self.aux.iter().find(|(n, _)| n == name).map(|(_, v)| &v[..])
    }

    /// Stores the feature statistics the model was trained with, replacing
    /// any already present.
    pub fn set_normalizer(&mut self, norm: &Normalizer) {
        self.aux.retain(|(n, _)| n != NORM_MEAN && n != NORM_STD);
        self.aux.push((NORM_MEAN.into(), norm.mean.clone()));
        self.aux.push((NORM_STD.into(), norm.std.clone()));
    }

    pub fn normalizer(&self) -> Option<Normalizer> {
        let (mean, std) = (self.aux(NORM_MEAN)?, self.aux(NORM_STD)?);
        (mean.len() == std.len()).then(|| Normalizer {
            mean: mean.to_vec(),
            std: std.to_vec(),
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let m = &self.model;
        let mut manifest = Vec::new();
        let mut data: Vec<u8> = Vec::new();
        let mut add = |name: String, kind: EntryKind, shape: Vec<usize>, values: &[f32]| {
            manifest.push(ManifestEntry {
                name,
                kind,
                shape,
                offset: data.len() as u64,
                len: values.len(),
            });
            for v in values {
                data.extend_from_slice(&v.to_le_bytes());
            }
        };
        for (info, values) in m.param_layout().into_iter().zip(m.params()) {
            add(info.name, EntryKind::Param, info.shape, values);
        }
        for (info, values) in m.buffer_layout().into_iter().zip(m.buffers()) {
            add(info.name, EntryKind::Buffer, info.shape, values);
        }
        for (name, values) in &self.aux {
            add(name.clone(), EntryKind::Aux, vec![values.len()], values);
        }
        let header = Header {
            format_version: CHECKPOINT_VERSION,
            config: m.config().clone(),
            seed: m.seed(),
            mode: m.mode(),
            manifest,
            extra: self.extra.clone(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut out = Vec::with_capacity(16 + json.len() + data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        out.extend_from_slice(&data);
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |reason: String| Error::Checkpoint(reason);
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing TFCNCKPT magic".into()));
        }
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes
            .get(16..16usize.saturating_add(hlen))
            .ok_or_else(|| bad(format!("header length {hlen} exceeds file size")))?;
        let header: Header = serde_json::from_slice(body)?;
        if header.format_version != CHECKPOINT_VERSION {
            return Err(bad(format!(
                "format version {} (expected {CHECKPOINT_VERSION})",
                header.format_version
            )));
        }
        let data = &bytes[16 + hlen..];
        let declared: usize = header
            .manifest
            .iter()
            .filter(|e| e.kind == EntryKind::Param)
            .map(|e| e.len)
            .sum();
        let expected = param_count(&header.config);
        if declared != expected {
            return Err(bad(format!(
                "manifest declares {declared} parameters, config requires {expected}"
            )));
        }
        let mut model = build_model(&header.config, header.seed)?;
        let read = |e: &ManifestEntry| -> Result<Vec<f32>> {
            let start = e.offset as usize;
            let end = start + 4 * e.len;
            let raw = data
                .get(start..end)
                .ok_or_else(|| bad(format!("entry {} runs past end of data", e.name)))?;
            Ok(raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect())
        };
        let fill = |kind: EntryKind, layout: Vec<super::TensorInfo>, slots: Vec<&mut [f32]>| -> Result<()> {
            let entries: Vec<&ManifestEntry> = header.manifest.iter().filter(|e| e.kind == kind).collect();
            if entries.len() != layout.len() {
                return Err(bad(format!(
                    "{} {kind:?} entries, model has {}",
                    entries.len(),
                    layout.len()
                )));
            }
            for ((e, info), slot) in entries.into_iter().zip(layout).zip(slots) {
                if e.name != info.name || e.shape != info.shape || e.len != slot.len() {
                    return Err(bad(format!(
                        "entry {} {:?} does not match model tensor {} {:?}",
                        e.name, e.shape, info.name, info.shape
                    )));
                }
                slot.copy_from_slice(&read(e)?);
            }
            Ok(())
        };
        let layout = model.param_layout();
        fill(EntryKind::Param, layout, model.params_mut())?;
        let layout = model.buffer_layout();
        fill(EntryKind::Buffer, layout, model.buffers_mut())?;
        if model.buffers().iter().flat_map(|b| b.iter()).any(|v| !v.is_finite()) {
            return Err(bad("non-finite batch-norm statistics".into()));
        }
        model.set_mode(header.mode);
        let aux = header
            .manifest
            .iter()
            .filter(|e| e.kind == EntryKind::Aux)
            .map(|e| Ok((e.name.clone(), read(e)?)))
            .collect::<Result<_>>()?;
        Ok(Checkpoint {
            model,
            extra: header.extra,
            aux,
        })
    }
}

/// Writes through a temporary file and a rename, so an interrupted save
/// never clobbers the previous checkpoint.
pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let bytes = ckpt.to_bytes()?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes).map_err(|e| match e {
        Error::Checkpoint(reason) => Error::format(path, reason),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::CausalityMode;

    fn tiny() -> Model<f32> {
        let cfg = ModelConfig::tfcn_d()
            .with_blocks(2, 2)
            .with_freq_bins(8)
            .with_causality(CausalityMode::Causal);
        build_model(&cfg, 3).unwrap()
    }

    #[test]
    fn round_trip_preserves_everything() {
        let mut m = tiny();
        m.blocks[1].bn0.running_mean[2] = 0.5;
        m.set_mode(NormMode::Inference);
        let mut ck = Checkpoint::new(m);
        ck.extra = serde_json::json!({"epoch": 4});
        ck.aux.push(("adam.m.0".into(), vec![1.0, 2.0]));
        let back = Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.aux("adam.m.0"), Some(&[1.0, 2.0][..]));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let ck = Checkpoint::new(tiny());
        save_checkpoint(&path, &ck).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), ck);
    }

    #[test]
    fn tampered_manifest_rejected() {
        let bytes = Checkpoint::new(tiny()).to_bytes().unwrap();
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let mut header: serde_json::Value = serde_json::from_slice(&bytes[16..16 + hlen]).unwrap();
        header["config"]["bottleneck_channels"] = serde_json::json!(32);
        let json = serde_json::to_vec(&header).unwrap();
        let mut forged = MAGIC.to_vec();
        forged.extend_from_slice(&(json.len() as u64).to_le_bytes());
        forged.extend_from_slice(&json);
        forged.extend_from_slice(&bytes[16 + hlen..]);
        assert!(matches!(Checkpoint::from_bytes(&forged), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn garbage_rejected() {
        assert!(Checkpoint::from_bytes(b"not a checkpoint at all").is_err());
        let bytes = Checkpoint::new(tiny()).to_bytes().unwrap();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 4]).is_err());
    }
}
