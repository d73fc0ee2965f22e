//! Mean over frames of the per-frame RMS error across frequency.

use crate::dsp::LpsMatrix;
use crate::error::{Error, Result};
use crate::tensor::{Scalar, Shape, Tensor};

/// Per-frame RMS values below this are treated as this in the gradient.
pub const RMS_FLOOR: f64 = 1e-8;

fn check_pair(s: &LpsMatrix, s_hat: &LpsMatrix) -> Result<()> {
    for (axis, a, b) in [("frames", s.frames(), s_hat.frames()), ("bins", s.bins(), s_hat.bins())] {
        if a != b {
            return Err(Error::Shape {
                op: "loss",
                axis,
                expected: a,
                found: b,
            });
        }
    }
    Ok(())
}

fn frame_rms(a: &[f32], b: &[f32]) -> f64 {
    let ss: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    (ss / a.len() as f64).sqrt()
}

pub fn loss(s: &LpsMatrix, s_hat: &LpsMatrix) -> Result<f64> {
    masked_loss(s, s_hat, s.frames())
}

/// Loss over the first `valid_frames` frames only.
pub fn masked_loss(s: &LpsMatrix, s_hat: &LpsMatrix, valid_frames: usize) -> Result<f64> {
    check_pair(s, s_hat)?;
    let t = valid_frames.min(s.frames());
    if t == 0 {
        return Err(Error::TooShort { len: 0, min: 1 });
    }
    Ok((0..t).map(|i| frame_rms(s.frame(i), s_hat.frame(i))).sum::<f64>() / t as f64)
}

/// `(Ŝ - S) / (T · F · RMS_t)` on valid frames, zero elsewhere.
pub fn loss_gradient(s: &LpsMatrix, s_hat: &LpsMatrix) -> Result<LpsMatrix> {
    masked_loss_gradient(s, s_hat, s.frames())
}

pub fn masked_loss_gradient(s: &LpsMatrix, s_hat: &LpsMatrix, valid_frames: usize) -> Result<LpsMatrix> {
    check_pair(s, s_hat)?;
    let t = valid_frames.min(s.frames());
    if t == 0 {
        return Err(Error::TooShort { len: 0, min: 1 });
    }
    let f = s.bins();
    let mut g = LpsMatrix::filled(s.frames(), f, 0.0);
    for i in 0..t {
        let denom = (t * f) as f64 * frame_rms(s.frame(i), s_hat.frame(i)).max(RMS_FLOOR);
        for ((out, &a), &b) in g.frame_mut(i).iter_mut().zip(s.frame(i)).zip(s_hat.frame(i)) {
            *out = ((b as f64 - a as f64) / denom) as f32;
        }
    }
    Ok(g)
}

/// Mean over batch items of the masked loss, for `(batch, 1, bins, frames)`
/// tensors, with the gradient with respect to `estimate`.
pub fn batch_loss<T: Scalar>(
    target: &Tensor<T>,
    estimate: &Tensor<T>,
    valid_frames: &[usize],
) -> Result<(f64, Tensor<T>)> {
    let s: Shape = target.shape();
    s.expect("batch_loss", &estimate.shape())?;
    if valid_frames.len() != s.batch {
        return Err(Error::Shape {
            op: "batch_loss",
            axis: "batch",
            expected: s.batch,
            found: valid_frames.len(),
        });
    }
    let (f, tt) = (s.freq, s.time);
    let mut grad = Tensor::zeros(s);
    let mut total = 0.0;
    for (b, &valid) in valid_frames.iter().enumerate() {
        let t = valid.min(tt);
        if t == 0 {
            return Err(Error::TooShort { len: 0, min: 1 });
        }
        let (x, y) = (target.plane(b, 0), estimate.plane(b, 0));
        let mut rms = vec![0.0f64; t];
        for (xr, yr) in x.chunks(tt).zip(y.chunks(tt)) {
            for i in 0..t {
                let d = yr[i].as_f64() - xr[i].as_f64();
                rms[i] += d * d;
            }
        }
        for r in &mut rms {
            *r = (*r / f as f64).sqrt();
        }
        total += rms.iter().sum::<f64>() / t as f64;
        let scale = (t * f * s.batch) as f64;
        let g = grad.plane_mut(b, 0);
        for j in 0..f {
            for i in 0..t {
                let k = j * tt + i;
                g[k] = T::of((y[k].as_f64() - x[k].as_f64()) / (scale * rms[i].max(RMS_FLOOR)));
            }
        }
    }
    Ok((total / s.batch as f64, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(frames: usize, bins: usize, seed: u64) -> LpsMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LpsMatrix::new(frames, bins, (0..frames * bins).map(|_| rng.gen_range(-5.0..5.0)).collect()).unwrap()
    }

    #[test]
    fn zero_for_identical() {
        let s = random(3, 256, 0);
        assert_eq!(loss(&s, &s).unwrap(), 0.0);
        assert!(loss_gradient(&s, &s).unwrap().data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn constant_offset_gives_its_magnitude() {
        let s = random(4, 256, 1);
        let mut t = s.clone();
        t.data_mut().iter_mut().for_each(|v| *v -= 0.75);
        assert!((loss(&s, &t).unwrap() - 0.75).abs() < 1e-6);
    }

    #[test]
    fn matches_scalar_oracle() {
        let (s, h) = (random(3, 256, 2), random(3, 256, 3));
        let mut acc = 0.0f64;
        for i in 0..3 {
            let mut ss = 0.0f64;
            for j in 0..256 {
                let d = s.frame(i)[j] as f64 - h.frame(i)[j] as f64;
                ss += d * d;
            }
            acc += (ss / 256.0).sqrt();
        }
        assert!((loss(&s, &h).unwrap() - acc / 3.0).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (s, h) = (random(3, 8, 4), random(3, 8, 5));
        let g = loss_gradient(&s, &h).unwrap();
        for k in 0..24 {
            let eps = 1e-3f32;
            let mut p = h.clone();
            p.data_mut()[k] += eps;
            let mut m = h.clone();
            m.data_mut()[k] -= eps;
            let num = (loss(&s, &p).unwrap() - loss(&s, &m).unwrap()) / (2.0 * eps as f64);
            let a = g.data()[k] as f64;
            assert!((a - num).abs() / a.abs().max(num.abs()).max(1e-8) < 1e-3, "{k}: {a} vs {num}");
        }
    }

    #[test]
    fn gradient_invariant_under_joint_scaling() {
        let (s, h) = (random(2, 16, 6), random(2, 16, 7));
        let scale = |m: &LpsMatrix| LpsMatrix::new(2, 16, m.data().iter().map(|v| v * 2.0).collect()).unwrap();
        let g1 = loss_gradient(&s, &h).unwrap();
        let g2 = loss_gradient(&scale(&s), &scale(&h)).unwrap();
        for (a, b) in g1.data().iter().zip(g2.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn masked_frames_contribute_nothing() {
        let (s, h) = (random(5, 8, 8), random(5, 8, 9));
        let g = masked_loss_gradient(&s, &h, 3).unwrap();
        assert!(g.data()[3 * 8..].iter().all(|&v| v == 0.0));
        let short = |m: &LpsMatrix| LpsMatrix::new(3, 8, m.data()[..24].to_vec()).unwrap();
        assert_eq!(masked_loss(&s, &h, 3).unwrap(), loss(&short(&s), &short(&h)).unwrap());
    }

    #[test]
    fn batch_loss_agrees_with_matrix_form() {
        let (s1, h1, s2, h2) = (random(6, 8, 10), random(6, 8, 11), random(6, 8, 12), random(6, 8, 13));
        let st = crate::network::lps_to_tensor(&[&s1, &s2]).unwrap();
        let ht = crate::network::lps_to_tensor(&[&h1, &h2]).unwrap();
        let (l, g) = batch_loss(&st, &ht, &[6, 4]).unwrap();
        let expect = (masked_loss(&s1, &h1, 6).unwrap() + masked_loss(&s2, &h2, 4).unwrap()) / 2.0;
        assert!((l - expect).abs() < 1e-12);
        let g2 = masked_loss_gradient(&s2, &h2, 4).unwrap();
        assert!((g.at(1, 0, 3, 2) - g2.frame(2)[3] / 2.0).abs() < 1e-9);
        assert_eq!(g.at(1, 0, 3, 5), 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        assert!(loss(&random(3, 8, 0), &random(4, 8, 0)).is_err());
    }
}
