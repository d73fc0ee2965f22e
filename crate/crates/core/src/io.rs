//! WAV files, normalizer statistics files and corpus manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dsp::{resample, Normalizer, Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::training::Pair;

const PCM_SCALE: f32 = 32768.0;

fn wav_err(path: &Path) -> impl FnOnce(hound::Error) -> Error + '_ {
    move |source| match source {
        hound::Error::IoError(e) => Error::io(path, e),
        other => Error::Wav {
            path: path.to_path_buf(),
            source: other,
        },
    }
}

/// Reads a mono WAV file at its native rate. Integer PCM is scaled by
/// `2^(bits-1)`.
pub fn read_wav(path: &Path) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path).map_err(wav_err(path))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::format(path, format!("expected mono audio, found {} channels", spec.channels)));
    }
    let samples: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Float => reader.samples::<f32>().collect::<Result<_, _>>().map_err(wav_err(path))?,
        hound::SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f32;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f32 / scale))
                .collect::<Result<_, _>>()
                .map_err(wav_err(path))?
        }
    };
    Ok(Waveform::new(samples, spec.sample_rate))
}

/// Reads a WAV file and resamples it to the working rate when needed.
pub fn read_wav_16k(path: &Path) -> Result<Waveform> {
    let w = read_wav(path)?;
    if w.sample_rate == SAMPLE_RATE {
        Ok(w)
    } else {
        log::info!("resampling {} from {} Hz", path.display(), w.sample_rate);
        Ok(resample(&w, SAMPLE_RATE))
    }
}

/// Writes 16-bit PCM mono. Samples outside `[-1, 1)` saturate.
pub fn write_wav(path: &Path, wave: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).map_err(wav_err(path))?;
    for &s in &wave.samples {
        let q = (s * PCM_SCALE).round().clamp(-PCM_SCALE, PCM_SCALE - 1.0) as i16;
        w.write_sample(q).map_err(wav_err(path))?;
    }
    w.finalize().map_err(wav_err(path))
}

const NORM_MAGIC: &[u8; 8] = b"TFCNNORM";
pub const NORMALIZER_VERSION: u32 = 1;

/// `TFCNNORM`, version and bin count as little-endian `u32`, then the mean
/// and standard-deviation vectors as little-endian `f32`.
pub fn save_normalizer(path: &Path, n: &Normalizer) -> Result<()> {
    let mut bytes = NORM_MAGIC.to_vec();
    bytes.extend_from_slice(&NORMALIZER_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(n.bins() as u32).to_le_bytes());
    for v in n.mean.iter().chain(&n.std) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_normalizer(path: &Path) -> Result<Normalizer> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..8] != NORM_MAGIC {
        return Err(Error::format(path, "not a normalizer file"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let (version, bins) = (word(8), word(12) as usize);
    if version != NORMALIZER_VERSION {
        return Err(Error::format(path, format!("unsupported normalizer version {version}")));
    }
    if bytes.len() != 16 + 8 * bins {
        return Err(Error::format(path, format!("expected {} bytes for {bins} bins", 16 + 8 * bins)));
    }
    let values: Vec<f32> = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    let (mean, std) = values.split_at(bins);
    if std.iter().any(|&s| !(s > 0.0 && s.is_finite())) || mean.iter().any(|m| !m.is_finite()) {
        return Err(Error::format(path, "statistics must be finite with positive deviations"));
    }
    Ok(Normalizer {
        mean: mean.to_vec(),
        std: std.to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestPair {
    pub noisy: PathBuf,
    pub clean: PathBuf,
    /// Mixing SNR in dB, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
}

/// Paired noisy/clean files. Relative paths are resolved against the
/// directory holding the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub sample_rate: u32,
    #[serde(default)]
    pub total_duration_secs: f64,
    pub pairs: Vec<ManifestPair>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl CorpusManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: CorpusManifest =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Decodes every pair at 16 kHz. All unreadable files are listed in the
    /// error, not just the first.
    pub fn load_pairs(&self) -> Result<Vec<Pair>> {
        let mut pairs = Vec::with_capacity(self.pairs.len());
        let mut failures = Vec::new();
        for p in &self.pairs {
            let (n, c) = (self.resolve(&p.noisy), self.resolve(&p.clean));
            match (read_wav_16k(&n), read_wav_16k(&c)) {
                (Ok(noisy), Ok(clean)) => pairs.push(Pair::new(n.display().to_string(), noisy, clean)?),
                (a, b) => {
                    for e in [a.err(), b.err()].into_iter().flatten() {
                        failures.push(e.to_string());
                    }
                }
            }
        }
        match failures.len() {
            0 => Ok(pairs),
            1 => Err(Error::Config(failures.remove(0))),
            _ => Err(Error::Config(format!("{} unreadable files:\n  {}", failures.len(), failures.join("\n  ")))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_write_read_is_stable_after_one_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let w = Waveform::new((0..1000).map(|i| ((i as f32) * 0.01).sin() * 0.9).collect(), 16_000);
        write_wav(&p, &w).unwrap();
        let once = read_wav(&p).unwrap();
        assert!(once.samples.iter().zip(&w.samples).all(|(a, b)| (a - b).abs() <= 0.5 / 32768.0));
        write_wav(&p, &once).unwrap();
        assert_eq!(read_wav(&p).unwrap(), once);
    }

    #[test]
    fn wav_saturates_instead_of_wrapping() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("loud.wav");
        write_wav(&p, &Waveform::new(vec![2.0, -2.0], 16_000)).unwrap();
        let r = read_wav(&p).unwrap();
        assert_eq!(r.samples, vec![32767.0 / 32768.0, -1.0]);
    }

    #[test]
    fn stereo_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&p, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn corrupt_wav_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.wav");
        fs::write(&p, b"RIFF1234WAVEjunk").unwrap();
        assert!(read_wav(&p).is_err());
        assert!(matches!(read_wav(&dir.path().join("missing.wav")), Err(Error::Io { .. })));
    }

    #[test]
    fn resampled_on_ingest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("hi.wav");
        write_wav(&p, &Waveform::new(vec![0.1; 4800], 48_000)).unwrap();
        let w = read_wav_16k(&p).unwrap();
        assert_eq!((w.sample_rate, w.len()), (16_000, 1600));
    }

    #[test]
    fn normalizer_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.bin");
        let n = Normalizer {
            mean: (0..256).map(|i| i as f32 * 0.1 - 3.0).collect(),
            std: (0..256).map(|i| 1.0 + i as f32).collect(),
        };
        save_normalizer(&p, &n).unwrap();
        assert_eq!(fs::metadata(&p).unwrap().len(), 16 + 2 * 256 * 4);
        assert_eq!(load_normalizer(&p).unwrap(), n);
        fs::write(&p, b"TFCNNORM\x02\x00\x00\x00").unwrap();
        assert!(load_normalizer(&p).is_err());
    }

    #[test]
    fn manifest_resolves_relative_paths_and_lists_failures() {
        let dir = tempfile::tempdir().unwrap();
        let w = Waveform::new(vec![0.0; 600], 16_000);
        write_wav(&dir.path().join("n.wav"), &w).unwrap();
        write_wav(&dir.path().join("c.wav"), &w).unwrap();
        let m = CorpusManifest {
            sample_rate: 16_000,
            total_duration_secs: 0.0375,
            pairs: vec![ManifestPair {
                noisy: "n.wav".into(),
                clean: "c.wav".into(),
                snr_db: None,
            }],
            base_dir: PathBuf::new(),
        };
        let mp = dir.path().join("manifest.json");
        m.save(&mp).unwrap();
        let loaded = CorpusManifest::load(&mp).unwrap();
        assert_eq!(loaded.load_pairs().unwrap().len(), 1);

        let mut broken = loaded.clone();
        broken.pairs.push(ManifestPair {
            noisy: "x.wav".into(),
            clean: "y.wav".into(),
            snr_db: Some(5.0),
        });
        let msg = broken.load_pairs().unwrap_err().to_string();
        assert!(msg.contains("x.wav") && msg.contains("y.wav"), "{msg}");
    }
}
