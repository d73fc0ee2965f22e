//! Waveform-in, waveform-out enhancement, whole-utterance and streaming.
//!
//! Both paths share the per-frame feature and synthesis code, and the
//! streaming overlap-add accumulates in the same order as the batch one, so
//! for a causal or semi-causal model they agree bit for bit.

use std::collections::VecDeque;

use crate::dsp::{
    istft_with, lps_frame_into, overlap_add, reconstruct_frame, resample, stft_with, ComplexSpectrogram,
    FrameTransform, LpsMatrix, Normalizer, StftConfig, Waveform, LPS_BINS, SAMPLE_RATE,
};
use crate::error::{Error, Result};
use crate::network::{lps_to_tensor, tensor_to_lps, Checkpoint, Model, StreamingModel};
use crate::tensor::NormMode;

/// Largest sample value representable in 16-bit PCM.
pub const PCM_PEAK: f32 = 32767.0 / 32768.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Enhanced {
    pub wave: Waveform,
    /// Gain applied to avoid clipping, if any.
    pub peak_gain: Option<f32>,
}

/// A trained model together with the statistics its inputs were
/// normalized with.
#[derive(Clone)]
pub struct Enhancer {
    model: Model<f32>,
    norm: Normalizer,
    tf: FrameTransform,
}

impl Enhancer {
    pub fn new(mut model: Model<f32>, norm: Normalizer) -> Result<Self> {
        let bins = model.config().freq_bins;
        if bins != LPS_BINS || norm.bins() != bins {
            return Err(Error::Checkpoint(format!(
                "enhancement needs {LPS_BINS} bins; model has {bins}, normalizer {}",
                norm.bins()
            )));
        }
        model.set_mode(NormMode::Inference);
        Ok(Enhancer {
            model,
            norm,
            tf: FrameTransform::new(StftConfig::default())?,
        })
    }

    /// Uses `norm` when given, otherwise the statistics stored in the
    /// checkpoint.
    pub fn from_checkpoint(ckpt: &Checkpoint, norm: Option<Normalizer>) -> Result<Self> {
        let norm = norm
            .or_else(|| ckpt.normalizer())
            .ok_or_else(|| Error::Checkpoint("checkpoint carries no normalizer and none was given".into()))?;
        Enhancer::new(ckpt.model.clone(), norm)
    }

    pub fn model(&self) -> &Model<f32> {
        &self.model
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.norm
    }

    /// Network output for one analysed utterance, denormalized, one LPS
    /// frame per row.
    pub fn estimate_lps(&self, spec: &ComplexSpectrogram) -> Result<LpsMatrix> {
        let mut data = Vec::with_capacity(spec.frames() * LPS_BINS);
        for t in 0..spec.frames() {
            features_into(&self.norm, spec.frame_magnitude(t), &mut data);
        }
        let x = LpsMatrix::new(spec.frames(), LPS_BINS, data)?;
        let mut est = tensor_to_lps(&self.model.forward(&lps_to_tensor(&[&x])?)?)?.remove(0);
        for t in 0..est.frames() {
            self.norm.denormalize_frame(est.frame_mut(t));
        }
        Ok(est)
    }

    /// The enhanced signal before any clipping protection. Its length is
    /// `256 * (T - 1) + 512` for `T` analysis frames.
    pub fn enhance_samples(&self, samples: &[f32]) -> Result<Vec<f32>> {
        let spec = stft_with(&self.tf, samples)?;
        let est = self.estimate_lps(&spec)?;
        let mut magnitude = Vec::with_capacity(spec.frames() * spec.bins());
        for t in 0..est.frames() {
            magnitude.extend(reconstruct_frame(est.frame(t)));
        }
        let out = ComplexSpectrogram::from_polar(spec.frames(), spec.bins(), magnitude, spec.phase().to_vec())?;
        Ok(istft_with(&self.tf, &out)?.samples)
    }

    /// Resamples to 16 kHz if needed, enhances, and scales down only if the
    /// result would clip.
    pub fn enhance(&self, wave: &Waveform) -> Result<Enhanced> {
        let samples = if wave.sample_rate == SAMPLE_RATE {
            self.enhance_samples(&wave.samples)?
        } else {
            self.enhance_samples(&resample(wave, SAMPLE_RATE).samples)?
        };
        Ok(protect_peak(samples))
    }

    pub fn stream(&self) -> Result<StreamingEnhancer> {
        StreamingEnhancer::new(self)
    }
}

fn features_into(norm: &Normalizer, magnitude: &[f32], out: &mut Vec<f32>) {
    let start = out.len();
    lps_frame_into(&magnitude[..LPS_BINS], out);
    norm.normalize_frame(&mut out[start..]);
}

/// Scales `samples` so the peak is at [`PCM_PEAK`] if it would otherwise
/// exceed it.
pub fn protect_peak(mut samples: Vec<f32>) -> Enhanced {
    let peak = samples.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    let peak_gain = (peak > PCM_PEAK).then(|| {
        let g = PCM_PEAK / peak;
        log::warn!("enhanced signal peaks at {peak:.3}; scaling by {g:.4} to avoid clipping");
        samples.iter_mut().for_each(|v| *v *= g);
        g
    });
    Enhanced {
        wave: Waveform::new(samples, SAMPLE_RATE),
        peak_gain,
    }
}

/// Sample-by-sample enhancement. Push any number of samples at a time; a
/// block of 256 output samples is returned for each completed network frame.
pub struct StreamingEnhancer {
    net: StreamingModel<f32>,
    norm: Normalizer,
    tf: FrameTransform,
    pending: Vec<f32>,
    phases: VecDeque<Vec<f32>>,
    acc: Vec<f32>,
    analyzed: usize,
    emitted: usize,
}

impl StreamingEnhancer {
    pub fn new(enhancer: &Enhancer) -> Result<Self> {
        let cfg = enhancer.tf.config();
        Ok(StreamingEnhancer {
            net: StreamingModel::new(&enhancer.model)?,
            norm: enhancer.norm.clone(),
            tf: enhancer.tf.clone(),
            pending: Vec::with_capacity(cfg.frame_len),
            phases: VecDeque::new(),
            acc: vec![0.0; cfg.frame_len],
            analyzed: 0,
            emitted: 0,
        })
    }

    /// Analysis frames fed to the network so far.
    pub fn frames_analyzed(&self) -> usize {
        self.analyzed
    }

    /// Network frames synthesized so far.
    pub fn frames_emitted(&self) -> usize {
        self.emitted
    }

    pub fn latency_frames(&self) -> usize {
        self.net.latency_frames()
    }

    pub fn push(&mut self, samples: &[f32]) -> Result<Vec<f32>> {
        let cfg = self.tf.config();
        let mut out = Vec::new();
        for &s in samples {
            self.pending.push(s);
            if self.pending.len() == cfg.frame_len {
                let (mag, phase) = self.tf.analyze(&self.pending);
                self.pending.drain(..cfg.hop);
                let mut feat = Vec::with_capacity(LPS_BINS);
                features_into(&self.norm, &mag, &mut feat);
                self.phases.push_back(phase);
                self.analyzed += 1;
                let ready = self.net.push(&feat)?;
                self.synthesize(ready, &mut out);
            }
        }
        Ok(out)
    }

    /// Ends the stream and returns everything still held back, including
    /// the final half frame.
    pub fn finish(&mut self) -> Result<Vec<f32>> {
        if self.analyzed == 0 {
            return Err(Error::TooShort {
                len: self.pending.len(),
                min: self.tf.config().frame_len,
            });
        }
        let mut out = Vec::new();
        let ready = self.net.flush()?;
        self.synthesize(ready, &mut out);
        let hop = self.tf.config().hop;
        out.extend_from_slice(&self.acc[..self.acc.len() - hop]);
        self.acc.iter_mut().for_each(|v| *v = 0.0);
        Ok(out)
    }

    fn synthesize(&mut self, frames: Vec<Vec<f32>>, out: &mut Vec<f32>) {
        let hop = self.tf.config().hop;
        for mut est in frames {
            self.norm.denormalize_frame(&mut est);
            let phase = self.phases.pop_front().expect("one phase per analysed frame");
            let magnitude: Vec<f32> = reconstruct_frame(&est).collect();
            let frame = self.tf.synthesize(&magnitude, &phase);
            overlap_add(&mut self.acc, &frame);
            out.extend_from_slice(&self.acc[..hop]);
            self.acc.copy_within(hop.., 0);
            let n = self.acc.len();
            self.acc[n - hop..].iter_mut().for_each(|v| *v = 0.0);
            self.emitted += 1;
        }
    }
}
