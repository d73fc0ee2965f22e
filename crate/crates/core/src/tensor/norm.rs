use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    #[default]
    Train,
    Inference,
}

/// Per-channel batch normalization over `(batch, freq, time)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState<T = f32> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub epsilon: T,
    /// Weight of the current batch in the running-statistics update.
    pub momentum: T,
    pub mode: NormMode,
}

impl<T: Scalar> BatchNormState<T> {
    pub fn new(channels: usize) -> Self {
        BatchNormState {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            epsilon: T::of(1e-5),
            momentum: T::of(0.1),
            mode: NormMode::Train,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn cast<U: Scalar>(&self) -> BatchNormState<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::of(x.as_f64())).collect();
        BatchNormState {
            gamma: c(&self.gamma),
            beta: c(&self.beta),
            running_mean: c(&self.running_mean),
            running_var: c(&self.running_var),
            epsilon: U::of(self.epsilon.as_f64()),
            momentum: U::of(self.momentum.as_f64()),
            mode: self.mode,
        }
    }

    /// Frozen per-channel `(scale, shift)` so that inference is `x * scale + shift`.
    pub fn affine(&self) -> (Vec<T>, Vec<T>) {
        let scale: Vec<T> = self
            .gamma
            .iter()
            .zip(&self.running_var)
            .map(|(&g, &v)| g / (v + self.epsilon).sqrt())
            .collect();
        let shift = self
            .beta
            .iter()
            .zip(&self.running_mean)
            .zip(&scale)
            .map(|((&b, &m), &s)| b - m * s)
            .collect();
        (scale, shift)
    }

    fn check(&self, input: &Tensor<T>, op: &'static str) -> Result<()> {
        let c = input.shape().channels;
        if c != self.channels() {
            return Err(Error::Shape {
                op,
                axis: "channels",
                expected: self.channels(),
                found: c,
            });
        }
        Ok(())
    }
}

pub struct BnCache<T> {
    x_hat: Tensor<T>,
    inv_std: Vec<T>,
    mode: NormMode,
}

pub struct BnGrads<T> {
    pub input: Tensor<T>,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
}

/// Inference-mode normalization with the running statistics. Pure.
pub fn batchnorm_infer<T: Scalar>(input: &Tensor<T>, state: &BatchNormState<T>) -> Result<Tensor<T>> {
    state.check(input, "batchnorm")?;
    let (scale, shift) = state.affine();
    let s = input.shape();
    let mut out = input.clone();
    for b in 0..s.batch {
        for c in 0..s.channels {
            let (a, k) = (scale[c], shift[c]);
            for v in out.plane_mut(b, c) {
                *v = *v * a + k;
            }
        }
    }
    Ok(out)
}

/// Normalizes in the state's mode. Train mode uses batch statistics and
/// folds them into the running statistics.
pub fn batchnorm_forward<T: Scalar>(
    input: &Tensor<T>,
    state: &mut BatchNormState<T>,
) -> Result<(Tensor<T>, BnCache<T>)> {
    state.check(input, "batchnorm")?;
    let s = input.shape();
    let n = s.batch * s.plane();
    let (mean, var) = match state.mode {
        NormMode::Inference => (state.running_mean.clone(), state.running_var.clone()),
        NormMode::Train => {
            let mut mean = vec![T::zero(); s.channels];
            let mut var = vec![T::zero(); s.channels];
            for c in 0..s.channels {
                let mut sum = 0.0f64;
                for b in 0..s.batch {
                    sum += input.plane(b, c).iter().map(|v| v.as_f64()).sum::<f64>();
                }
                let m = sum / n as f64;
                let mut sq = 0.0f64;
                for b in 0..s.batch {
                    sq += input
                        .plane(b, c)
                        .iter()
                        .map(|v| (v.as_f64() - m).powi(2))
                        .sum::<f64>();
                }
                mean[c] = T::of(m);
                var[c] = T::of(sq / n as f64);
                let unbiased = if n > 1 { sq / (n - 1) as f64 } else { 0.0 };
                let mo = state.momentum;
                state.running_mean[c] = (T::one() - mo) * state.running_mean[c] + mo * mean[c];
                state.running_var[c] =
                    (T::one() - mo) * state.running_var[c] + mo * T::of(unbiased);
            }
            (mean, var)
        }
    };

    let inv_std: Vec<T> = var
        .iter()
        .map(|&v| T::one() / (v + state.epsilon).sqrt())
        .collect();
    let mut x_hat = input.clone();
    let mut out = input.clone();
    for b in 0..s.batch {
        for c in 0..s.channels {
            let (m, is, g, be) = (mean[c], inv_std[c], state.gamma[c], state.beta[c]);
            for (xh, o) in x_hat.plane_mut(b, c).iter_mut().zip(out.plane_mut(b, c)) {
                *xh = (*xh - m) * is;
                *o = g * *xh + be;
            }
        }
    }
    Ok((
        out,
        BnCache {
            x_hat,
            inv_std,
            mode: state.mode,
        },
    ))
}

pub fn batchnorm_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cache: &BnCache<T>,
    state: &BatchNormState<T>,
) -> Result<BnGrads<T>> {
    cache.x_hat.shape().expect("batchnorm_backward", &grad_out.shape())?;
    state.check(grad_out, "batchnorm_backward")?;
    let s = grad_out.shape();
    let n = (s.batch * s.plane()) as f64;
    let mut gamma = vec![T::zero(); s.channels];
    let mut beta = vec![T::zero(); s.channels];
    let mut input = Tensor::zeros(s);
    for c in 0..s.channels {
        let mut sum_dy = 0.0f64;
        let mut sum_dy_xh = 0.0f64;
        for b in 0..s.batch {
            for (&dy, &xh) in grad_out.plane(b, c).iter().zip(cache.x_hat.plane(b, c)) {
                sum_dy += dy.as_f64();
                sum_dy_xh += (dy * xh).as_f64();
            }
        }
        gamma[c] = T::of(sum_dy_xh);
        beta[c] = T::of(sum_dy);
        let k = state.gamma[c] * cache.inv_std[c];
        match cache.mode {
            NormMode::Inference => {
                for b in 0..s.batch {
                    for (gi, &dy) in input.plane_mut(b, c).iter_mut().zip(grad_out.plane(b, c)) {
                        *gi = k * dy;
                    }
                }
            }
            NormMode::Train => {
                let mean_dy = T::of(sum_dy / n);
                let mean_dy_xh = T::of(sum_dy_xh / n);
                for b in 0..s.batch {
                    let gi = input.plane_mut(b, c);
                    let dy = grad_out.plane(b, c);
                    let xh = cache.x_hat.plane(b, c);
                    for i in 0..gi.len() {
                        gi[i] = k * (dy[i] - mean_dy - xh[i] * mean_dy_xh);
                    }
                }
            }
        }
    }
    Ok(BnGrads { input, gamma, beta })
}
