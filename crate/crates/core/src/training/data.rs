//! Fixed-length segmenting of paired utterances and LPS feature preparation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dsp::{lps, stft, LpsMatrix, Normalizer, StftConfig, Waveform};
use crate::error::{Error, Result};

/// A noisy/clean utterance pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Pair {
    pub name: String,
    pub noisy: Waveform,
    pub clean: Waveform,
}

impl Pair {
    pub fn new(name: impl Into<String>, noisy: Waveform, clean: Waveform) -> Result<Self> {
        let name = name.into();
        if noisy.len() != clean.len() {
            return Err(Error::PairLength {
                pair: name,
                noisy: noisy.len(),
                clean: clean.len(),
            });
        }
        Ok(Pair { name, noisy, clean })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    /// Index of the source pair.
    pub pair: usize,
    pub noisy: Vec<f32>,
    pub clean: Vec<f32>,
    /// Samples before zero padding.
    pub valid_samples: usize,
    /// Frames lying entirely inside the valid samples; the loss mask.
    pub valid_frames: usize,
}

/// Cuts every pair into non-overlapping `segment_samples`-long pieces. A
/// tail shorter than one frame is dropped; a longer tail is zero-padded and
/// masked.
pub fn segment_corpus(pairs: &[Pair], segment_samples: usize, stft_cfg: &StftConfig) -> Result<Vec<Segment>> {
    if segment_samples < stft_cfg.frame_len || !segment_samples.is_multiple_of(stft_cfg.hop) {
        return Err(Error::Config(format!(
            "segment length {segment_samples} must be a multiple of the hop ({}) and at least one frame",
            stft_cfg.hop
        )));
    }
    let mut out = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        if p.noisy.len() != p.clean.len() {
            return Err(Error::PairLength {
                pair: p.name.clone(),
                noisy: p.noisy.len(),
                clean: p.clean.len(),
            });
        }
        for start in (0..p.noisy.len()).step_by(segment_samples) {
            let end = (start + segment_samples).min(p.noisy.len());
            let valid = end - start;
            if valid < stft_cfg.frame_len {
                continue;
            }
            let take = |w: &Waveform| {
                let mut v = w.samples[start..end].to_vec();
                v.resize(segment_samples, 0.0);
                v
            };
            out.push(Segment {
                pair: i,
                noisy: take(&p.noisy),
                clean: take(&p.clean),
                valid_samples: valid,
                valid_frames: stft_cfg.frame_count(valid),
            });
        }
    }
    Ok(out)
}

/// Permutation of `0..n` for one epoch, fixed by `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// Network input and target of one training example.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    /// Normalized noisy LPS.
    pub input: LpsMatrix,
    /// Clean LPS, not normalized.
    pub target: LpsMatrix,
    pub valid_frames: usize,
}

pub fn prepare_segments(segments: &[Segment], norm: &Normalizer, stft_cfg: &StftConfig) -> Result<Vec<Example>> {
    segments
        .iter()
        .map(|s| {
            let rate = crate::dsp::SAMPLE_RATE;
            let noisy = lps(&stft(&Waveform::new(s.noisy.clone(), rate), stft_cfg)?);
            let clean = lps(&stft(&Waveform::new(s.clean.clone(), rate), stft_cfg)?);
            Ok(Example {
                input: norm.normalize(&noisy)?,
                target: clean,
                valid_frames: s.valid_frames,
            })
        })
        .collect()
}

/// Whole utterances, as used for validation.
pub fn prepare_utterances(pairs: &[Pair], norm: &Normalizer, stft_cfg: &StftConfig) -> Result<Vec<Example>> {
    pairs
        .iter()
        .map(|p| {
            let noisy = lps(&stft(&p.noisy, stft_cfg)?);
            let clean = lps(&stft(&p.clean, stft_cfg)?);
            Ok(Example {
                valid_frames: noisy.frames(),
                input: norm.normalize(&noisy)?,
                target: clean,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(n: usize) -> Pair {
        let w = Waveform::new((0..n).map(|i| (i % 7) as f32 * 0.01).collect(), 16_000);
        Pair::new("p", w.clone(), w).unwrap()
    }

    #[test]
    fn exact_multiple_gives_full_segments() {
        let s = segment_corpus(&[pair(64_000)], 32_000, &StftConfig::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|x| x.valid_frames == 124));
    }

    #[test]
    fn padded_tail_is_masked() {
        let s = segment_corpus(&[pair(70_000)], 32_000, &StftConfig::default()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s[2].valid_samples, 6000);
        assert_eq!(s[2].valid_frames, (6000 - 512) / 256 + 1);
        assert!(s[2].noisy[6000..].iter().all(|&v| v == 0.0));
        assert_eq!(s[2].noisy.len(), 32_000);
    }

    #[test]
    fn sub_frame_tail_dropped() {
        let s = segment_corpus(&[pair(32_000 + 511)], 32_000, &StftConfig::default()).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn mismatched_pair_named() {
        let p = Pair {
            name: "utt7".into(),
            noisy: Waveform::new(vec![0.0; 600], 16_000),
            clean: Waveform::new(vec![0.0; 601], 16_000),
        };
        match segment_corpus(&[p], 32_000, &StftConfig::default()) {
            Err(Error::PairLength { pair, .. }) => assert_eq!(pair, "utt7"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_segment_length_rejected() {
        assert!(segment_corpus(&[], 1000, &StftConfig::default()).is_err());
    }

    #[test]
    fn shuffles_are_reproducible() {
        assert_eq!(epoch_order(20, 3, 1), epoch_order(20, 3, 1));
        assert_ne!(epoch_order(20, 3, 1), epoch_order(20, 3, 2));
        let mut o = epoch_order(20, 3, 5);
        o.sort();
        assert_eq!(o, (0..20).collect::<Vec<_>>());
    }
}
