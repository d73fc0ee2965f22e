use std::f64::consts::PI;

use super::stft::Waveform;

/// Taps of the interpolation kernel.
pub const RESAMPLE_TAPS: usize = 64;

/// Band-limited resampling with a Hann-windowed sinc kernel of
/// [`RESAMPLE_TAPS`] taps. The cutoff sits at the lower of the two Nyquist
/// frequencies.
pub fn resample(wave: &Waveform, target_rate: u32) -> Waveform {
    if wave.sample_rate == target_rate || wave.samples.is_empty() {
        return Waveform::new(wave.samples.clone(), target_rate);
    }
    let ratio = target_rate as f64 / wave.sample_rate as f64;
    let cutoff = ratio.min(1.0);
    let out_len = (wave.samples.len() as f64 * ratio).round() as usize;
    let half = (RESAMPLE_TAPS / 2) as f64 / cutoff;
    let n = wave.samples.len() as isize;
    let samples = (0..out_len)
        .map(|i| {
            let center = i as f64 / ratio;
            let lo = (center - half).ceil() as isize;
            let hi = (center + half).floor() as isize;
            let mut acc = 0.0;
            for k in lo.max(0)..=hi.min(n - 1) {
                let x = (k as f64 - center) * cutoff;
                let w = 0.5 + 0.5 * (PI * x / (RESAMPLE_TAPS / 2) as f64).cos();
                acc += wave.samples[k as usize] as f64 * sinc(x) * w * cutoff;
            }
            acc as f32
        })
        .collect();
    Waveform::new(samples, target_rate)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, rate: u32, n: usize) -> Waveform {
        Waveform::new(
            (0..n)
                .map(|i| (2.0 * PI * freq * i as f64 / rate as f64).sin() as f32)
                .collect(),
            rate,
        )
    }

    #[test]
    fn downsampling_preserves_in_band_tone() {
        let x = tone(440.0, 48_000, 48_000);
        let y = resample(&x, 16_000);
        assert_eq!(y.len(), 16_000);
        let reference = tone(440.0, 16_000, 16_000);
        let err = y.samples[100..15_900]
            .iter()
            .zip(&reference.samples[100..15_900])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f32, f32::max);
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn downsampling_rejects_out_of_band_tone() {
        let y = resample(&tone(12_000.0, 48_000, 48_000), 16_000);
        let rms = Waveform::new(y.samples[200..15_800].to_vec(), 16_000).rms();
        assert!(rms < 0.05, "{rms}");
    }

    #[test]
    fn same_rate_is_identity() {
        let x = tone(100.0, 16_000, 100);
        assert_eq!(resample(&x, 16_000), x);
    }
}
