use std::sync::Arc;

use num_complex::Complex32;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SAMPLE_RATE: u32 = 16_000;

/// Mono PCM signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Waveform {
            samples,
            sample_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / self.samples.len() as f64)
            .sqrt()
    }
}

/// Framing parameters. The analysis window is always a periodic Hann window
/// of `frame_len` samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub frame_len: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig {
            frame_len: 512,
            hop: 256,
        }
    }
}

impl StftConfig {
    pub fn bins(&self) -> usize {
        self.frame_len / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_len < 2 || !self.frame_len.is_multiple_of(2) || self.hop * 2 != self.frame_len {
            return Err(Error::Config(format!(
                "stft needs an even frame length with hop = frame_len / 2, got {}/{}",
                self.frame_len, self.hop
            )));
        }
        Ok(())
    }

    /// `floor((n - frame_len) / hop) + 1`, or 0 when `n < frame_len`.
    pub fn frame_count(&self, n: usize) -> usize {
        if n < self.frame_len {
            0
        } else {
            (n - self.frame_len) / self.hop + 1
        }
    }

    /// Samples produced by overlap-add of `frames` frames.
    pub fn output_len(&self, frames: usize) -> usize {
        if frames == 0 {
            0
        } else {
            self.hop * (frames - 1) + self.frame_len
        }
    }
}

/// Frame-major magnitude/phase spectrogram (`frames × bins`).
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexSpectrogram {
    frames: usize,
    bins: usize,
    magnitude: Vec<f32>,
    phase: Vec<f32>,
}

impl ComplexSpectrogram {
    pub fn from_polar(frames: usize, bins: usize, magnitude: Vec<f32>, phase: Vec<f32>) -> Result<Self> {
        for (axis, len) in [("magnitude", magnitude.len()), ("phase", phase.len())] {
            if len != frames * bins {
                return Err(Error::Shape {
                    op: "spectrogram",
                    axis,
                    expected: frames * bins,
                    found: len,
                });
            }
        }
        Ok(ComplexSpectrogram {
            frames,
            bins,
            magnitude,
            phase,
        })
    }

    pub fn from_complex(frames: usize, bins: usize, values: &[Complex32]) -> Result<Self> {
        let magnitude = values.iter().map(|c| c.norm()).collect();
        let phase = values.iter().map(|c| c.arg()).collect();
        Self::from_polar(frames, bins, magnitude, phase)
    }

    pub fn zeros(frames: usize, bins: usize) -> Self {
        ComplexSpectrogram {
            frames,
            bins,
            magnitude: vec![0.0; frames * bins],
            phase: vec![0.0; frames * bins],
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn magnitude(&self) -> &[f32] {
        &self.magnitude
    }

    pub fn phase(&self) -> &[f32] {
        &self.phase
    }

    pub fn frame_magnitude(&self, t: usize) -> &[f32] {
        &self.magnitude[t * self.bins..(t + 1) * self.bins]
    }

    pub fn frame_phase(&self, t: usize) -> &[f32] {
        &self.phase[t * self.bins..(t + 1) * self.bins]
    }

    pub fn to_complex(&self) -> Vec<Complex32> {
        self.magnitude
            .iter()
            .zip(&self.phase)
            .map(|(&m, &p)| Complex32::from_polar(m, p))
            .collect()
    }
}

/// Per-frame analysis and synthesis with a cached FFT plan.
#[derive(Clone)]
pub struct FrameTransform {
    cfg: StftConfig,
    window: Vec<f32>,
    cola: f32,
    forward: Arc<dyn Fft<f32>>,
    inverse: Arc<dyn Fft<f32>>,
}

impl FrameTransform {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.frame_len;
        let window = hann(n);
        // Overlap-add of the window at this hop. Constant (1.0) for a periodic
        // Hann window at 50% overlap.
        let cola = (0..cfg.hop)
            .map(|i| {
                (0..n / cfg.hop)
                    .map(|k| window[i + k * cfg.hop] as f64)
                    .sum::<f64>()
            })
            .sum::<f64>()
            / cfg.hop as f64;
        let mut planner = FftPlanner::new();
        Ok(FrameTransform {
            cfg,
            window,
            cola: cola as f32,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn config(&self) -> StftConfig {
        self.cfg
    }

    pub fn window(&self) -> &[f32] {
        &self.window
    }

    pub fn cola_constant(&self) -> f32 {
        self.cola
    }

    /// Windowed DFT of one frame; returns `(magnitude, phase)` for bins
    /// `0..=frame_len/2`.
    pub fn analyze(&self, frame: &[f32]) -> (Vec<f32>, Vec<f32>) {
        let mut buf: Vec<Complex32> = frame
            .iter()
            .zip(&self.window)
            .map(|(&x, &w)| Complex32::new(x * w, 0.0))
            .collect();
        self.forward.process(&mut buf);
        let bins = self.cfg.bins();
        let mag = buf[..bins].iter().map(|c| c.norm()).collect();
        let phase = buf[..bins].iter().map(|c| c.arg()).collect();
        (mag, phase)
    }

    /// Inverse DFT of one half-spectrum frame, scaled by the COLA constant so
    /// that plain overlap-add reconstructs the signal.
    pub fn synthesize(&self, magnitude: &[f32], phase: &[f32]) -> Vec<f32> {
        let n = self.cfg.frame_len;
        let bins = self.cfg.bins();
        let mut buf = vec![Complex32::new(0.0, 0.0); n];
        for k in 0..bins {
            buf[k] = Complex32::from_polar(magnitude[k], phase[k]);
        }
        // real signal: DC and Nyquist bins carry no imaginary part
        buf[0].im = 0.0;
        buf[bins - 1].im = 0.0;
        for k in 1..bins - 1 {
            buf[n - k] = buf[k].conj();
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / (n as f32 * self.cola);
        buf.iter().map(|c| c.re * scale).collect()
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f32> {
    (0..n)
        .map(|i| (0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()) as f32)
        .collect()
}

pub fn stft(wave: &Waveform, cfg: &StftConfig) -> Result<ComplexSpectrogram> {
    let tf = FrameTransform::new(*cfg)?;
    stft_with(&tf, &wave.samples)
}

pub(crate) fn stft_with(tf: &FrameTransform, samples: &[f32]) -> Result<ComplexSpectrogram> {
    let cfg = tf.config();
    if samples.len() < cfg.frame_len {
        return Err(Error::TooShort {
            len: samples.len(),
            min: cfg.frame_len,
        });
    }
    let frames = cfg.frame_count(samples.len());
    let bins = cfg.bins();
    let mut magnitude = Vec::with_capacity(frames * bins);
    let mut phase = Vec::with_capacity(frames * bins);
    for t in 0..frames {
        let (m, p) = tf.analyze(&samples[t * cfg.hop..t * cfg.hop + cfg.frame_len]);
        magnitude.extend(m);
        phase.extend(p);
    }
    ComplexSpectrogram::from_polar(frames, bins, magnitude, phase)
}

pub fn istft(spec: &ComplexSpectrogram, cfg: &StftConfig) -> Result<Waveform> {
    let tf = FrameTransform::new(*cfg)?;
    istft_with(&tf, spec)
}

pub(crate) fn istft_with(tf: &FrameTransform, spec: &ComplexSpectrogram) -> Result<Waveform> {
    let cfg = tf.config();
    if spec.bins() != cfg.bins() {
        return Err(Error::Shape {
            op: "istft",
            axis: "bins",
            expected: cfg.bins(),
            found: spec.bins(),
        });
    }
    let mut out = vec![0.0f32; cfg.output_len(spec.frames())];
    for t in 0..spec.frames() {
        let frame = tf.synthesize(spec.frame_magnitude(t), spec.frame_phase(t));
        overlap_add(&mut out[t * cfg.hop..t * cfg.hop + cfg.frame_len], &frame);
    }
    Ok(Waveform::new(out, SAMPLE_RATE))
}

#[inline]
pub(crate) fn overlap_add(dst: &mut [f32], frame: &[f32]) {
    for (o, &v) in dst.iter_mut().zip(frame) {
        *o += v;
    }
}
