//! Spectral front-end: STFT analysis/synthesis, log power spectra, per-bin
//! normalization and resampling to the working rate.

mod lps;
mod resample;
mod stft;

pub use lps::{
    compute_norm_stats, denormalize, log_power, lps, magnitude_from_lps, normalize, reconstruct,
    LpsMatrix, Normalizer, LPS_BINS, POWER_FLOOR, STD_FLOOR,
};
pub(crate) use lps::{lps_frame_into, reconstruct_frame};
pub use resample::{resample, RESAMPLE_TAPS};
pub use stft::{
    hann, istft, stft, ComplexSpectrogram, FrameTransform, StftConfig, Waveform, SAMPLE_RATE,
};
pub(crate) use stft::{istft_with, overlap_add, stft_with};
