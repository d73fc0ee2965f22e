use super::stft::ComplexSpectrogram;
use crate::error::{Error, Result};

/// Network-facing frequency bins (the STFT's Nyquist bin is dropped).
pub const LPS_BINS: usize = 256;

/// Power floor inside the logarithm.
pub const POWER_FLOOR: f32 = 1e-10;

/// Smallest allowed per-bin standard deviation.
pub const STD_FLOOR: f32 = 1e-5;

/// Frame-major log power spectrum, `frames × bins`.
#[derive(Clone, Debug, PartialEq)]
pub struct LpsMatrix {
    frames: usize,
    bins: usize,
    data: Vec<f32>,
}

impl LpsMatrix {
    pub fn new(frames: usize, bins: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != frames * bins {
            return Err(Error::Shape {
                op: "lps",
                axis: "data length",
                expected: frames * bins,
                found: data.len(),
            });
        }
        Ok(LpsMatrix { frames, bins, data })
    }

    pub fn filled(frames: usize, bins: usize, value: f32) -> Self {
        LpsMatrix {
            frames,
            bins,
            data: vec![value; frames * bins],
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f32] {
        &mut self.data[t * self.bins..(t + 1) * self.bins]
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }
}

#[inline]
pub fn log_power(magnitude: f32) -> f32 {
    (magnitude * magnitude + POWER_FLOOR).ln()
}

#[inline]
pub fn magnitude_from_lps(lps: f32) -> f32 {
    (lps * 0.5).exp()
}

/// `ln(|X|^2 + floor)` over bins `0..256`.
pub fn lps(spec: &ComplexSpectrogram) -> LpsMatrix {
    let mut data = Vec::with_capacity(spec.frames() * LPS_BINS);
    for t in 0..spec.frames() {
        lps_frame_into(&spec.frame_magnitude(t)[..LPS_BINS], &mut data);
    }
    LpsMatrix {
        frames: spec.frames(),
        bins: LPS_BINS,
        data,
    }
}

pub(crate) fn lps_frame_into(magnitude: &[f32], out: &mut Vec<f32>) {
    out.extend(magnitude.iter().map(|&m| log_power(m)));
}

/// Recombine an estimated LPS with the noisy phase. The dropped top bin is
/// restored with zero magnitude.
pub fn reconstruct(est: &LpsMatrix, noisy: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    if est.frames() != noisy.frames() {
        return Err(Error::Shape {
            op: "reconstruct",
            axis: "frames",
            expected: noisy.frames(),
            found: est.frames(),
        });
    }
    if est.bins() + 1 != noisy.bins() {
        return Err(Error::Shape {
            op: "reconstruct",
            axis: "bins",
            expected: noisy.bins() - 1,
            found: est.bins(),
        });
    }
    let bins = noisy.bins();
    let mut magnitude = Vec::with_capacity(est.frames() * bins);
    for t in 0..est.frames() {
        magnitude.extend(reconstruct_frame(est.frame(t)));
    }
    ComplexSpectrogram::from_polar(est.frames(), bins, magnitude, noisy.phase().to_vec())
}

pub(crate) fn reconstruct_frame(est: &[f32]) -> impl Iterator<Item = f32> + '_ {
    est.iter()
        .map(|&v| magnitude_from_lps(v))
        .chain(std::iter::once(0.0))
}

/// Per-bin mean and standard deviation of the training-set noisy LPS.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f32>,
    pub std: Vec<f32>,
}

impl Normalizer {
    pub fn identity(bins: usize) -> Self {
        Normalizer {
            mean: vec![0.0; bins],
            std: vec![1.0; bins],
        }
    }

    pub fn bins(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, x: &LpsMatrix, op: &'static str) -> Result<()> {
        if x.bins() != self.bins() {
            return Err(Error::Shape {
                op,
                axis: "bins",
                expected: self.bins(),
                found: x.bins(),
            });
        }
        Ok(())
    }

    pub fn normalize(&self, x: &LpsMatrix) -> Result<LpsMatrix> {
        self.check(x, "normalize")?;
        let mut out = x.clone();
        for t in 0..out.frames() {
            self.normalize_frame(out.frame_mut(t));
        }
        Ok(out)
    }

    pub fn denormalize(&self, x: &LpsMatrix) -> Result<LpsMatrix> {
        self.check(x, "denormalize")?;
        let mut out = x.clone();
        for t in 0..out.frames() {
            self.denormalize_frame(out.frame_mut(t));
        }
        Ok(out)
    }

    #[inline]
    pub fn normalize_frame(&self, frame: &mut [f32]) {
        for ((v, &u), &s) in frame.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = (*v - u) / s;
        }
    }

    #[inline]
    pub fn denormalize_frame(&self, frame: &mut [f32]) {
        for ((v, &u), &s) in frame.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = *v * s + u;
        }
    }
}

pub fn normalize(x: &LpsMatrix, n: &Normalizer) -> Result<LpsMatrix> {
    n.normalize(x)
}

pub fn denormalize(x: &LpsMatrix, n: &Normalizer) -> Result<LpsMatrix> {
    n.denormalize(x)
}

/// Pooled per-bin mean and population standard deviation over every frame of
/// every matrix, accumulated with Chan's parallel update in `f64` so that the
/// result does not depend on how frames are grouped into matrices.
pub fn compute_norm_stats<'a, I>(corpus: I) -> Result<Normalizer>
where
    I: IntoIterator<Item = &'a LpsMatrix>,
{
    let mut count = 0usize;
    let mut mean: Vec<f64> = Vec::new();
    let mut m2: Vec<f64> = Vec::new();
    for x in corpus {
        if mean.is_empty() {
            mean = vec![0.0; x.bins()];
            m2 = vec![0.0; x.bins()];
        } else if x.bins() != mean.len() {
            return Err(Error::Shape {
                op: "compute_norm_stats",
                axis: "bins",
                expected: mean.len(),
                found: x.bins(),
            });
        }
        if x.frames() == 0 {
            continue;
        }
        let nb = x.frames() as f64;
        for j in 0..x.bins() {
            let col = (0..x.frames()).map(|t| x.frame(t)[j] as f64);
            let mb = col.clone().sum::<f64>() / nb;
            let m2b: f64 = col.map(|v| (v - mb).powi(2)).sum();
            let na = count as f64;
            let n = na + nb;
            let delta = mb - mean[j];
            mean[j] += delta * nb / n;
            m2[j] += m2b + delta * delta * na * nb / n;
        }
        count += x.frames();
    }
    if mean.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if count < 2 {
        return Err(Error::TooShort { len: count, min: 2 });
    }
    Ok(Normalizer {
        mean: mean.iter().map(|&m| m as f32).collect(),
        std: m2
            .iter()
            .map(|&v| ((v / count as f64).sqrt() as f32).max(STD_FLOOR))
            .collect(),
    })
}
