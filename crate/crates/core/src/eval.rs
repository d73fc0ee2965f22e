//! Corpus-level evaluation: the training loss on whole utterances and the
//! segmental SNR gain of the enhanced signal over the noisy one.

use serde::Serialize;

use crate::dsp::{lps, stft_with, FrameTransform, StftConfig};
use crate::enhance::Enhancer;
use crate::error::{Error, Result};
use crate::training::{masked_loss, Pair};

/// Per-frame SNRs are clamped to this range before averaging.
pub const SEG_SNR_RANGE: (f64, f64) = (-10.0, 35.0);
pub const SEG_LEN: usize = 512;
pub const SEG_HOP: usize = 256;

/// Mean over 512-sample frames (hop 256) of the clamped frame SNR, over the
/// common prefix of the two signals. Frames where the reference is silent
/// and the error is zero count as the upper clamp.
pub fn segmental_snr(reference: &[f32], estimate: &[f32]) -> Result<f64> {
    let n = reference.len().min(estimate.len());
    if n < SEG_LEN {
        return Err(Error::TooShort { len: n, min: SEG_LEN });
    }
    let (lo, hi) = SEG_SNR_RANGE;
    let frames = (n - SEG_LEN) / SEG_HOP + 1;
    let mut total = 0.0;
    for f in 0..frames {
        let r = &reference[f * SEG_HOP..f * SEG_HOP + SEG_LEN];
        let e = &estimate[f * SEG_HOP..f * SEG_HOP + SEG_LEN];
        let signal: f64 = r.iter().map(|&v| (v as f64).powi(2)).sum();
        let noise: f64 = r.iter().zip(e).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum();
        let snr = if noise == 0.0 {
            hi
        } else if signal == 0.0 {
            lo
        } else {
            10.0 * (signal / noise).log10()
        };
        total += snr.clamp(lo, hi);
    }
    Ok(total / frames as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UtteranceScore {
    pub name: String,
    pub loss: f64,
    pub seg_snr_noisy: f64,
    pub seg_snr_enhanced: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub utterances: Vec<UtteranceScore>,
    pub mean_loss: f64,
    pub mean_seg_snr_noisy: f64,
    pub mean_seg_snr_enhanced: f64,
}

impl EvalReport {
    pub fn seg_snr_improvement(&self) -> f64 {
        self.mean_seg_snr_enhanced - self.mean_seg_snr_noisy
    }
}

pub fn evaluate_pairs(enhancer: &Enhancer, pairs: &[Pair]) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let tf = FrameTransform::new(StftConfig::default())?;
    let mut utterances = Vec::with_capacity(pairs.len());
    for p in pairs {
        let noisy_spec = stft_with(&tf, &p.noisy.samples)?;
        let target = lps(&stft_with(&tf, &p.clean.samples)?);
        let est = enhancer.estimate_lps(&noisy_spec)?;
        let enhanced = enhancer.enhance_samples(&p.noisy.samples)?;
        utterances.push(UtteranceScore {
            name: p.name.clone(),
            loss: masked_loss(&target, &est, target.frames())?,
            seg_snr_noisy: segmental_snr(&p.clean.samples, &p.noisy.samples)?,
            seg_snr_enhanced: segmental_snr(&p.clean.samples, &enhanced)?,
        });
    }
    let mean = |f: fn(&UtteranceScore) -> f64| utterances.iter().map(f).sum::<f64>() / utterances.len() as f64;
    Ok(EvalReport {
        mean_loss: mean(|u| u.loss),
        mean_seg_snr_noisy: mean(|u| u.seg_snr_noisy),
        mean_seg_snr_enhanced: mean(|u| u.seg_snr_enhanced),
        utterances,
    })
}
