//! Perturbation probes of the temporal dependency structure of a model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::model::Model;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeakReport {
    /// Largest absolute output change at frames `<= t` caused by perturbing
    /// frames `> t + look_ahead`.
    pub max_leak: f64,
    pub trials: usize,
}

impl LeakReport {
    pub fn holds(&self, tolerance: f64) -> bool {
        self.max_leak < tolerance
    }
}

fn random_input<T: Scalar>(model: &Model<T>, frames: usize, rng: &mut ChaCha8Rng) -> Tensor<T> {
    let bins = model.config().freq_bins;
    Tensor::<f64>::uniform(Shape::new(1, 1, bins, frames), -2.0, 2.0, rng).cast()
}

/// Checks that outputs never depend on inputs more than `look_ahead` frames
/// ahead. Each trial draws a random input and a boundary `t`, replaces every
/// frame after `t + look_ahead` with fresh noise and compares outputs up to
/// `t`. Uses frozen batch-norm statistics.
pub fn probe_causality<T: Scalar>(
    model: &Model<T>,
    frames: usize,
    look_ahead: usize,
    trials: usize,
    seed: u64,
) -> Result<LeakReport> {
    if frames < look_ahead + 2 {
        return Err(Error::Config(format!(
            "causality probe needs at least {} frames for look-ahead {look_ahead}",
            look_ahead + 2
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_leak = 0.0f64;
    for _ in 0..trials {
        let x = random_input(model, frames, &mut rng);
        let t = rng.gen_range(0..frames - look_ahead - 1);
        let mut y = x.clone();
        let s = x.shape();
        for f in 0..s.freq {
            for tt in t + look_ahead + 1..frames {
                y.set(0, 0, f, tt, T::of(rng.gen_range(-2.0..2.0)));
            }
        }
        let a = model.forward(&x)?.slice_time(0, t + 1);
        let b = model.forward(&y)?.slice_time(0, t + 1);
        max_leak = max_leak.max(a.max_abs_diff(&b));
    }
    Ok(LeakReport { max_leak, trials })
}

/// Measured temporal reach of one input frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProbedField {
    /// How many frames later an output still changes.
    pub past_frames: usize,
    /// How many frames earlier an output already changes.
    pub future_frames: usize,
}

/// Perturbs input frame `t` and reports the span of output frames that
/// change. `t` must be far enough from both edges for the span to fit.
pub fn probe_receptive_field<T: Scalar>(
    model: &Model<T>,
    frames: usize,
    t: usize,
    seed: u64,
) -> Result<ProbedField> {
    if t >= frames {
        return Err(Error::Config(format!("probe frame {t} outside {frames} frames")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = random_input(model, frames, &mut rng);
    let mut y = x.clone();
    for f in 0..x.shape().freq {
        let v = y.at(0, 0, f, t).as_f64() + rng.gen_range(0.5..1.5);
        y.set(0, 0, f, t, T::of(v));
    }
    let a = model.forward(&x)?;
    let b = model.forward(&y)?;
    let changed: Vec<usize> = (0..frames)
        .filter(|&o| a.slice_time(o, o + 1).max_abs_diff(&b.slice_time(o, o + 1)) > 0.0)
        .collect();
    match (changed.first(), changed.last()) {
        (Some(&lo), Some(&hi)) => Ok(ProbedField {
            past_frames: hi.saturating_sub(t),
            future_frames: t.saturating_sub(lo),
        }),
        _ => Ok(ProbedField {
            past_frames: 0,
            future_frames: 0,
        }),
    }
}
