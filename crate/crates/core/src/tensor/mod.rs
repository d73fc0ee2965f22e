//! Dense rank-4 tensors in `(batch, channels, freq, time)` layout and the
//! layer primitives of the network, each with a hand-written backward pass.
//!
//! Everything is generic over [`Scalar`] so that the same code runs in `f32`
//! for training and inference and in `f64` inside finite-difference checks.

mod activation;
mod conv;
pub mod gradcheck;
mod norm;
mod ops;

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

pub use activation::{prelu_backward, prelu_forward, AlphaSharing, PReluState};
pub use conv::{
    conv2d_backward, conv2d_forward, conv2d_forward_with, pad, ConvAlgo, ConvGrads, ConvSpec,
    Padding,
};
pub use gradcheck::{grad_check, relative_error, Eval, GradCheckReport};
pub use norm::{
    batchnorm_backward, batchnorm_forward, batchnorm_infer, BatchNormState, BnCache, BnGrads,
    NormMode,
};
pub use ops::{add_residual, add_residual_backward, concat_channels, split_channels};

/// Floating-point element type of a [`Tensor`].
pub trait Scalar:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Sum
    + Send
    + Sync
    + 'static
{
    fn of(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Shape {
    pub batch: usize,
    pub channels: usize,
    pub freq: usize,
    pub time: usize,
}

impl Shape {
    pub const fn new(batch: usize, channels: usize, freq: usize, time: usize) -> Self {
        Shape {
            batch,
            channels,
            freq,
            time,
        }
    }

    pub fn numel(&self) -> usize {
        self.batch * self.channels * self.freq * self.time
    }

    /// Elements in one `(freq, time)` plane.
    pub fn plane(&self) -> usize {
        self.freq * self.time
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.batch, self.channels, self.freq, self.time]
    }

    pub(crate) fn expect(&self, op: &'static str, other: &Shape) -> Result<()> {
        let names = ["batch", "channels", "freq", "time"];
        for ((axis, a), b) in names.iter().zip(self.dims()).zip(other.dims()) {
            if a != b {
                return Err(Error::Shape {
                    op,
                    axis,
                    expected: a,
                    found: b,
                });
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}x{}x{}x{}",
            self.batch, self.channels, self.freq, self.time
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Shape,
    data: Vec<T>,
    requires_grad: bool,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: Shape) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: Shape, value: T) -> Self {
        Tensor {
            shape,
            data: vec![value; shape.numel()],
            requires_grad: false,
        }
    }

    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.numel() {
            return Err(Error::Shape {
                op: "tensor",
                axis: "data length",
                expected: shape.numel(),
                found: data.len(),
            });
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
        })
    }

    /// Uniform samples in `[lo, hi)`.
    pub fn uniform<R: Rng>(shape: Shape, lo: f64, hi: f64, rng: &mut R) -> Self {
        let data = (0..shape.numel())
            .map(|_| T::of(rng.gen_range(lo..hi)))
            .collect();
        Tensor {
            shape,
            data,
            requires_grad: false,
        }
    }

    pub fn with_requires_grad(mut self, flag: bool) -> Self {
        self.requires_grad = flag;
        self
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, b: usize, c: usize, f: usize, t: usize) -> usize {
        let s = &self.shape;
        ((b * s.channels + c) * s.freq + f) * s.time + t
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, f: usize, t: usize) -> T {
        self.data[self.index(b, c, f, t)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, c: usize, f: usize, t: usize, v: T) {
        let i = self.index(b, c, f, t);
        self.data[i] = v;
    }

    pub fn plane(&self, b: usize, c: usize) -> &[T] {
        let p = self.shape.plane();
        let start = (b * self.shape.channels + c) * p;
        &self.data[start..start + p]
    }

    pub fn plane_mut(&mut self, b: usize, c: usize) -> &mut [T] {
        let p = self.shape.plane();
        let start = (b * self.shape.channels + c) * p;
        &mut self.data[start..start + p]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
            requires_grad: self.requires_grad,
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
            requires_grad: self.requires_grad,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_finite(&self, op: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite { op: op.to_string() })
        }
    }

    /// Reinterpret the same data under a different shape of equal size.
    pub fn reshape(mut self, shape: Shape) -> Result<Self> {
        if shape.numel() != self.shape.numel() {
            return Err(Error::Shape {
                op: "reshape",
                axis: "numel",
                expected: self.shape.numel(),
                found: shape.numel(),
            });
        }
        self.shape = shape;
        Ok(self)
    }

    /// Swap the channel and frequency axes.
    pub fn swap_channels_freq(&self) -> Self {
        let s = self.shape;
        let mut out = Tensor::zeros(Shape::new(s.batch, s.freq, s.channels, s.time));
        for b in 0..s.batch {
            for c in 0..s.channels {
                for f in 0..s.freq {
                    let src = self.index(b, c, f, 0);
                    let dst = out.index(b, f, c, 0);
                    out.data[dst..dst + s.time].copy_from_slice(&self.data[src..src + s.time]);
                }
            }
        }
        out
    }

    /// Copy of the time range `[start, end)`.
    pub fn slice_time(&self, start: usize, end: usize) -> Self {
        let s = self.shape;
        let len = end - start;
        let mut out = Tensor::zeros(Shape::new(s.batch, s.channels, s.freq, len));
        for b in 0..s.batch {
            for c in 0..s.channels {
                for f in 0..s.freq {
                    let src = self.index(b, c, f, start);
                    let dst = out.index(b, c, f, 0);
                    out.data[dst..dst + len].copy_from_slice(&self.data[src..src + len]);
                }
            }
        }
        out
    }

    /// Copy of batch item `b` as a batch of one.
    pub fn item(&self, b: usize) -> Self {
        let s = self.shape;
        let n = s.channels * s.plane();
        Tensor {
            shape: Shape::new(1, s.channels, s.freq, s.time),
            data: self.data[b * n..(b + 1) * n].to_vec(),
            requires_grad: self.requires_grad,
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0, f64::max)
    }
}

/// `out += w * x`, elementwise.
#[inline]
pub(crate) fn axpy<T: Scalar>(out: &mut [T], w: T, x: &[T]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += w * v;
    }
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_checks_length() {
        let err = Tensor::<f32>::from_vec(Shape::new(1, 1, 2, 2), vec![0.0; 3]).unwrap_err();
        assert!(err.to_string().contains("data length"));
    }

    #[test]
    fn swap_channels_freq_round_trips() {
        let mut rng = rand::thread_rng();
        let x = Tensor::<f32>::uniform(Shape::new(2, 3, 4, 5), -1.0, 1.0, &mut rng);
        let y = x.swap_channels_freq();
        assert_eq!(y.shape(), Shape::new(2, 4, 3, 5));
        assert_eq!(y.at(1, 2, 1, 3), x.at(1, 1, 2, 3));
        assert_eq!(y.swap_channels_freq(), x);
    }

    #[test]
    fn shape_mismatch_names_axis() {
        let a = Shape::new(1, 2, 3, 4);
        let b = Shape::new(1, 2, 5, 4);
        let msg = a.expect("op", &b).unwrap_err().to_string();
        assert!(msg.contains("freq"), "{msg}");
    }
}
