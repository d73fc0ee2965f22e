use super::{Scalar, Shape, Tensor};
use crate::error::{Error, Result};

/// Stack along the channel axis, earliest input first.
pub fn concat_channels<T: Scalar>(inputs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = inputs.first().ok_or(Error::Shape {
        op: "concat_channels",
        axis: "inputs",
        expected: 1,
        found: 0,
    })?;
    if inputs.len() == 1 {
        return Ok((*first).clone());
    }
    let s0 = first.shape();
    let mut channels = 0;
    for t in inputs {
        let s = t.shape();
        for (axis, a, b) in [
            ("batch", s0.batch, s.batch),
            ("freq", s0.freq, s.freq),
            ("time", s0.time, s.time),
        ] {
            if a != b {
                return Err(Error::Shape {
                    op: "concat_channels",
                    axis,
                    expected: a,
                    found: b,
                });
            }
        }
        channels += s.channels;
    }
    let mut out = Tensor::zeros(Shape::new(s0.batch, channels, s0.freq, s0.time));
    let p = s0.plane();
    let mut offset = 0;
    for b in 0..s0.batch {
        for t in inputs {
            let n = t.shape().channels * p;
            let start = b * t.shape().channels * p;
            out.data_mut()[offset..offset + n].copy_from_slice(&t.data()[start..start + n]);
            offset += n;
        }
    }
    Ok(out)
}

/// Inverse of [`concat_channels`]: route slices of `grad` back to inputs with
/// the given channel counts.
pub fn split_channels<T: Scalar>(grad: &Tensor<T>, channels: &[usize]) -> Result<Vec<Tensor<T>>> {
    let s = grad.shape();
    let total: usize = channels.iter().sum();
    if total != s.channels {
        return Err(Error::Shape {
            op: "split_channels",
            axis: "channels",
            expected: total,
            found: s.channels,
        });
    }
    let p = s.plane();
    let mut outs: Vec<Tensor<T>> = channels
        .iter()
        .map(|&c| Tensor::zeros(Shape::new(s.batch, c, s.freq, s.time)))
        .collect();
    let mut offset = 0;
    for b in 0..s.batch {
        for (o, &c) in outs.iter_mut().zip(channels) {
            let n = c * p;
            o.data_mut()[b * n..(b + 1) * n].copy_from_slice(&grad.data()[offset..offset + n]);
            offset += n;
        }
    }
    Ok(outs)
}

pub fn add_residual<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    a.shape().expect("add_residual", &b.shape())?;
    let mut out = a.clone();
    for (o, &v) in out.data_mut().iter_mut().zip(b.data()) {
        *o += v;
    }
    Ok(out)
}

/// Both branches receive `grad_out` unchanged.
pub fn add_residual_backward<T: Scalar>(grad_out: &Tensor<T>) -> (Tensor<T>, Tensor<T>) {
    (grad_out.clone(), grad_out.clone())
}
