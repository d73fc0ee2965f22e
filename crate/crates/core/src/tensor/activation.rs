use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSharing {
    PerChannel,
    #[default]
    Shared,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PReluState<T = f32> {
    pub alpha: Vec<T>,
    pub sharing: AlphaSharing,
}

impl<T: Scalar> PReluState<T> {
    pub fn shared(alpha: T) -> Self {
        PReluState {
            alpha: vec![alpha],
            sharing: AlphaSharing::Shared,
        }
    }

    pub fn per_channel(alpha: Vec<T>) -> Self {
        PReluState {
            alpha,
            sharing: AlphaSharing::PerChannel,
        }
    }

    pub fn cast<U: Scalar>(&self) -> PReluState<U> {
        PReluState {
            alpha: self.alpha.iter().map(|a| U::of(a.as_f64())).collect(),
            sharing: self.sharing,
        }
    }

    fn alpha_for(&self, channels: usize) -> Result<impl Fn(usize) -> T + '_> {
        let expected = match self.sharing {
            AlphaSharing::Shared => 1,
            AlphaSharing::PerChannel => channels,
        };
        if self.alpha.len() != expected {
            return Err(Error::Shape {
                op: "prelu",
                axis: "alpha",
                expected,
                found: self.alpha.len(),
            });
        }
        let shared = self.sharing == AlphaSharing::Shared;
        Ok(move |c: usize| if shared { self.alpha[0] } else { self.alpha[c] })
    }
}

/// `max(0, x) + alpha * min(0, x)`
pub fn prelu_forward<T: Scalar>(input: &Tensor<T>, state: &PReluState<T>) -> Result<Tensor<T>> {
    let s = input.shape();
    let alpha = state.alpha_for(s.channels)?;
    let mut out = input.clone();
    for b in 0..s.batch {
        for c in 0..s.channels {
            let a = alpha(c);
            for v in out.plane_mut(b, c) {
                if *v < T::zero() {
                    *v = a * *v;
                }
            }
        }
    }
    Ok(out)
}

/// Returns `(grad_input, grad_alpha)`.
pub fn prelu_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    state: &PReluState<T>,
) -> Result<(Tensor<T>, Vec<T>)> {
    input.shape().expect("prelu_backward", &grad_out.shape())?;
    let s = input.shape();
    let alpha = state.alpha_for(s.channels)?;
    let mut grad_alpha = vec![0.0f64; state.alpha.len()];
    let mut grad_in = grad_out.clone();
    for b in 0..s.batch {
        for c in 0..s.channels {
            let a = alpha(c);
            let slot = if state.sharing == AlphaSharing::Shared { 0 } else { c };
            let mut acc = 0.0f64;
            for (g, &x) in grad_in.plane_mut(b, c).iter_mut().zip(input.plane(b, c)) {
                if x < T::zero() {
                    acc += (*g * x).as_f64();
                    *g = a * *g;
                }
            }
            grad_alpha[slot] += acc;
        }
    }
    Ok((grad_in, grad_alpha.into_iter().map(T::of).collect()))
}
