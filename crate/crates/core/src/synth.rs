//! Toy paired corpus: harmonic "voiced" signals with a syllable envelope,
//! mixed with coloured Gaussian noise at a fixed set of SNRs.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dsp::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::io::{write_wav, CorpusManifest, ManifestPair};

/// Mixture peaks above this are scaled down, clean and noise alike.
const MAX_PEAK: f64 = 0.95;
const ENVELOPE_FLOOR: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub min_secs: f64,
    pub max_secs: f64,
    pub snrs_db: Vec<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            min_secs: 2.0,
            max_secs: 6.0,
            snrs_db: vec![0.0, 5.0, 10.0, 15.0],
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_secs >= 512.0 / SAMPLE_RATE as f64 && self.min_secs <= self.max_secs) {
            return Err(Error::Config(format!(
                "need 0.032 <= min_secs <= max_secs, got {} and {}",
                self.min_secs, self.max_secs
            )));
        }
        if self.snrs_db.is_empty() || self.snrs_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("snrs_db must hold at least one finite value".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthPair {
    pub clean: Vec<f32>,
    pub noisy: Vec<f32>,
    pub snr_db: f64,
}

fn utterance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (index as u64 + 1).wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// Voiced-speech stand-in: a gliding fundamental with decaying harmonics
/// below 4 kHz, gated by raised-cosine syllables.
fn clean_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let fs = SAMPLE_RATE as f64;
    let f0 = rng.gen_range(90.0..240.0);
    let glide_rate = rng.gen_range(0.2..1.5);
    let glide_depth = rng.gen_range(0.05..0.2);
    let glide_phase = rng.gen_range(0.0..2.0 * PI);
    let harmonics = ((4000.0 / (f0 * (1.0 + glide_depth))) as usize).max(1);
    let tilt = rng.gen_range(0.6..1.2);

    let mut envelope = vec![ENVELOPE_FLOOR; n];
    let mut start = rng.gen_range(0.0..0.2) * fs;
    while (start as usize) < n {
        let len = rng.gen_range(0.12..0.35) * fs;
        let gain = rng.gen_range(0.4..1.0);
        for i in start as usize..((start + len) as usize).min(n) {
            let u = (i as f64 - start) / len;
            let bump = gain * 0.5 * (1.0 - (2.0 * PI * u).cos());
            envelope[i] = envelope[i].max(bump);
        }
        start += len + rng.gen_range(0.04..0.2) * fs;
    }

    let mut phase = 0.0f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / fs;
            let f = f0 * (1.0 + glide_depth * (2.0 * PI * glide_rate * t + glide_phase).sin());
            phase += 2.0 * PI * f / fs;
            let voiced: f64 = (1..=harmonics)
                .map(|k| (k as f64 * phase).sin() / (k as f64).powf(tilt))
                .sum();
            envelope[i] * voiced
        })
        .collect()
}

/// Gaussian noise through a random one-pole low-pass plus a white floor.
fn noise_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let pole = rng.gen_range(0.0..0.95);
    let white = rng.gen_range(0.05..0.5);
    let mut state = 0.0f64;
    (0..n)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            state = pole * state + (1.0 - pole) * a;
            state + white * b
        })
        .collect()
}

fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64
}

/// Pair `index` of the corpus for `seed`; independent of every other index.
pub fn synth_pair(cfg: &SynthConfig, seed: u64, index: usize) -> SynthPair {
    let mut rng = utterance_rng(seed, index);
    let secs = rng.gen_range(cfg.min_secs..=cfg.max_secs);
    let n = (secs * SAMPLE_RATE as f64).round() as usize;
    let snr_db = cfg.snrs_db[rng.gen_range(0..cfg.snrs_db.len())];
    let mut clean = clean_signal(&mut rng, n);
    let mut noise = noise_signal(&mut rng, n);

    let level = 0.1 / power(&clean).sqrt();
    clean.iter_mut().for_each(|v| *v *= level);
    let gain = (power(&clean) / (power(&noise) * 10f64.powf(snr_db / 10.0))).sqrt();
    noise.iter_mut().for_each(|v| *v *= gain);

    let mut noisy: Vec<f64> = clean.iter().zip(&noise).map(|(c, e)| c + e).collect();
    let peak = noisy.iter().chain(&clean).fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > MAX_PEAK {
        let g = MAX_PEAK / peak;
        clean.iter_mut().for_each(|v| *v *= g);
        noisy.iter_mut().for_each(|v| *v *= g);
    }
    SynthPair {
        clean: clean.iter().map(|&v| v as f32).collect(),
        noisy: noisy.iter().map(|&v| v as f32).collect(),
        snr_db,
    }
}

/// Writes `clean/uttNNNN.wav`, `noisy/uttNNNN.wav` and `manifest.json`
/// under `out_dir` and returns the manifest.
pub fn write_corpus(out_dir: &Path, n_utts: usize, seed: u64, cfg: &SynthConfig) -> Result<CorpusManifest> {
    cfg.validate()?;
    for sub in ["clean", "noisy"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let mut pairs = Vec::with_capacity(n_utts);
    let mut total = 0.0;
    for i in 0..n_utts {
        let p = synth_pair(cfg, seed, i);
        let name = format!("utt{i:04}.wav");
        let (clean, noisy) = (Path::new("clean").join(&name), Path::new("noisy").join(&name));
        total += p.clean.len() as f64 / SAMPLE_RATE as f64;
        write_wav(&out_dir.join(&clean), &Waveform::new(p.clean, SAMPLE_RATE))?;
        write_wav(&out_dir.join(&noisy), &Waveform::new(p.noisy, SAMPLE_RATE))?;
        pairs.push(ManifestPair {
            noisy,
            clean,
            snr_db: Some(p.snr_db),
        });
    }
    let manifest = CorpusManifest {
        sample_rate: SAMPLE_RATE,
        total_duration_secs: total,
        pairs,
        base_dir: out_dir.to_path_buf(),
    };
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn measured_snr(p: &SynthPair) -> f64 {
        let (mut s, mut e) = (0.0f64, 0.0f64);
        for (&c, &n) in p.clean.iter().zip(&p.noisy) {
            s += (c as f64).powi(2);
            e += (n as f64 - c as f64).powi(2);
        }
        10.0 * (s / e).log10()
    }

    #[test]
    fn snr_matches_label() {
        let cfg = SynthConfig::default();
        for i in 0..12 {
            let p = synth_pair(&cfg, 7, i);
            assert!(cfg.snrs_db.contains(&p.snr_db));
            assert!((measured_snr(&p) - p.snr_db).abs() < 0.01, "utt {i}: {}", measured_snr(&p));
        }
    }

    #[test]
    fn lengths_and_peaks_in_range() {
        let cfg = SynthConfig::default();
        for i in 0..8 {
            let p = synth_pair(&cfg, 1, i);
            assert_eq!(p.clean.len(), p.noisy.len());
            assert!((32_000..=96_000).contains(&p.clean.len()));
            assert!(p.noisy.iter().all(|v| v.abs() <= 0.95 + 1e-6));
        }
    }

    #[test]
    fn deterministic_per_seed_and_index() {
        let cfg = SynthConfig::default();
        assert_eq!(synth_pair(&cfg, 3, 2), synth_pair(&cfg, 3, 2));
        assert_ne!(synth_pair(&cfg, 3, 2), synth_pair(&cfg, 4, 2));
        assert_ne!(synth_pair(&cfg, 3, 2).clean, synth_pair(&cfg, 3, 1).clean);
    }

    #[test]
    fn bad_config_rejected() {
        let mut c = SynthConfig::default();
        c.min_secs = 7.0;
        assert!(c.validate().is_err());
        c = SynthConfig {
            snrs_db: vec![],
            ..SynthConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn empty_corpus_writes_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_corpus(dir.path(), 0, 1, &SynthConfig::default()).unwrap();
        assert!(m.pairs.is_empty());
        let loaded = CorpusManifest::load(&dir.path().join("manifest.json")).unwrap();
        assert!(loaded.pairs.is_empty());
    }
}
