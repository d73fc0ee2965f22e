use serde::{Deserialize, Serialize};

use super::{axpy, dot, Scalar, Shape, Tensor};
use crate::error::{Error, Result};

/// Zero padding on the frequency and time axes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Padding {
    pub left_f: usize,
    pub right_f: usize,
    pub left_t: usize,
    pub right_t: usize,
}

impl Padding {
    pub fn is_zero(&self) -> bool {
        *self == Padding::default()
    }
}

/// Geometry of a 2-D convolution over `(freq, time)`.
///
/// Weights are laid out as `(out_channels, in_channels / groups, k_f, k_t)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `(k_f, k_t)`
    pub kernel: (usize, usize),
    /// `(d_f, d_t)`
    pub dilation: (usize, usize),
    pub groups: usize,
    pub pad: Padding,
    pub has_bias: bool,
}

impl ConvSpec {
    pub fn new(in_channels: usize, out_channels: usize, kernel: (usize, usize)) -> Self {
        ConvSpec {
            in_channels,
            out_channels,
            kernel,
            dilation: (1, 1),
            groups: 1,
            pad: Padding::default(),
            has_bias: false,
        }
    }

    pub fn with_dilation(mut self, dilation: (usize, usize)) -> Self {
        self.dilation = dilation;
        self
    }

    pub fn with_groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    pub fn with_pad(mut self, pad: Padding) -> Self {
        self.pad = pad;
        self
    }

    pub fn with_bias(mut self, has_bias: bool) -> Self {
        self.has_bias = has_bias;
        self
    }

    pub fn is_depthwise(&self) -> bool {
        self.groups == self.in_channels && self.in_channels == self.out_channels
    }

    pub fn is_pointwise(&self) -> bool {
        self.kernel == (1, 1) && self.pad.is_zero()
    }

    pub fn weight_shape(&self) -> Shape {
        Shape::new(
            self.out_channels,
            self.in_channels / self.groups,
            self.kernel.0,
            self.kernel.1,
        )
    }

    pub fn weight_count(&self) -> usize {
        self.weight_shape().numel()
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels / self.groups * self.kernel.0 * self.kernel.1
    }

    /// Dilated kernel extents `((k_f-1)d_f+1, (k_t-1)d_t+1)`.
    pub fn span(&self) -> (usize, usize) {
        (
            (self.kernel.0 - 1) * self.dilation.0 + 1,
            (self.kernel.1 - 1) * self.dilation.1 + 1,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.in_channels,
            self.out_channels,
            self.kernel.0,
            self.kernel.1,
            self.dilation.0,
            self.dilation.1,
            self.groups,
        ];
        if positive.contains(&0) {
            return Err(Error::Config(format!(
                "conv spec has a zero extent: {self:?}"
            )));
        }
        if !self.in_channels.is_multiple_of(self.groups) || !self.out_channels.is_multiple_of(self.groups) {
            return Err(Error::Config(format!(
                "channels {}->{} not divisible by groups {}",
                self.in_channels, self.out_channels, self.groups
            )));
        }
        Ok(())
    }

    /// Output `(freq, time)` extents for an unpadded input of the given size.
    pub fn output_dims(&self, freq: usize, time: usize) -> Result<(usize, usize)> {
        let (sf, st) = self.span();
        let pf = freq + self.pad.left_f + self.pad.right_f;
        let pt = time + self.pad.left_t + self.pad.right_t;
        if sf > pf {
            return Err(Error::KernelTooLarge {
                op: "conv2d",
                axis: "freq",
                span: sf,
                padded: pf,
            });
        }
        if st > pt {
            return Err(Error::KernelTooLarge {
                op: "conv2d",
                axis: "time",
                span: st,
                padded: pt,
            });
        }
        Ok((pf - sf + 1, pt - st + 1))
    }
}

/// Inner loop strategy. Both produce identical sums in identical order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvAlgo {
    #[default]
    Direct,
    Im2col,
}

pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Option<Vec<T>>,
}

pub fn pad<T: Scalar>(input: &Tensor<T>, pad: Padding) -> Tensor<T> {
    if pad.is_zero() {
        return input.clone();
    }
    let s = input.shape();
    let fp = s.freq + pad.left_f + pad.right_f;
    let tp = s.time + pad.left_t + pad.right_t;
    let mut out = Tensor::zeros(Shape::new(s.batch, s.channels, fp, tp));
    for b in 0..s.batch {
        for c in 0..s.channels {
            let src = input.plane(b, c);
            let dst = out.plane_mut(b, c);
            for f in 0..s.freq {
                let row = (f + pad.left_f) * tp + pad.left_t;
                dst[row..row + s.time].copy_from_slice(&src[f * s.time..(f + 1) * s.time]);
            }
        }
    }
    out
}

fn crop<T: Scalar>(padded: &Tensor<T>, pad: Padding, shape: Shape) -> Tensor<T> {
    if pad.is_zero() {
        return padded.clone();
    }
    let tp = padded.shape().time;
    let mut out = Tensor::zeros(shape);
    for b in 0..shape.batch {
        for c in 0..shape.channels {
            let src = padded.plane(b, c);
            let dst = out.plane_mut(b, c);
            for f in 0..shape.freq {
                let row = (f + pad.left_f) * tp + pad.left_t;
                dst[f * shape.time..(f + 1) * shape.time]
                    .copy_from_slice(&src[row..row + shape.time]);
            }
        }
    }
    out
}

fn check_operands<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&[T]>,
    spec: &ConvSpec,
) -> Result<(usize, usize)> {
    spec.validate()?;
    let s = input.shape();
    if s.channels != spec.in_channels {
        return Err(Error::Shape {
            op: "conv2d",
            axis: "channels",
            expected: spec.in_channels,
            found: s.channels,
        });
    }
    spec.weight_shape().expect("conv2d weights", &weights.shape())?;
    match (spec.has_bias, bias) {
        (true, Some(b)) if b.len() != spec.out_channels => {
            return Err(Error::Shape {
                op: "conv2d",
                axis: "bias",
                expected: spec.out_channels,
                found: b.len(),
            })
        }
        (true, None) => {
            return Err(Error::Config("conv2d: spec requires a bias".into()));
        }
        (false, Some(_)) => {
            return Err(Error::Config("conv2d: spec has no bias".into()));
        }
        _ => {}
    }
    spec.output_dims(s.freq, s.time)
}

pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&[T]>,
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    conv2d_forward_with(input, weights, bias, spec, ConvAlgo::Direct)
}

/// Grouped, dilated, zero-padded 2-D convolution.
///
/// Every output element is accumulated as `bias + Σ_{ic, i, j} w · x` in the
/// fixed `(ic, i, j)` order, independent of the time extent of the input.
/// Streaming inference relies on this to reproduce batch results bit for bit.
pub fn conv2d_forward_with<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&[T]>,
    spec: &ConvSpec,
    algo: ConvAlgo,
) -> Result<Tensor<T>> {
    let (fo, to) = check_operands(input, weights, bias, spec)?;
    let padded = pad(input, spec.pad);
    let batch = input.shape().batch;
    let mut out = Tensor::zeros(Shape::new(batch, spec.out_channels, fo, to));
    match algo {
        ConvAlgo::Direct => forward_direct(&padded, weights, bias, spec, &mut out),
        ConvAlgo::Im2col => forward_im2col(&padded, weights, bias, spec, &mut out),
    }
    Ok(out)
}

fn forward_direct<T: Scalar>(
    padded: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&[T]>,
    spec: &ConvSpec,
    out: &mut Tensor<T>,
) {
    let ps = padded.shape();
    let os = out.shape();
    let (fo, to, tp) = (os.freq, os.time, ps.time);
    let cig = spec.in_channels / spec.groups;
    let cog = spec.out_channels / spec.groups;
    let (kf, kt) = spec.kernel;
    let (df, dt) = spec.dilation;
    let contiguous = kf == 1 && kt == 1 && ps.freq == fo && tp == to;
    let wd = weights.data();
    for b in 0..ps.batch {
        for oc in 0..spec.out_channels {
            let g = oc / cog;
            let out_plane = out.plane_mut(b, oc);
            if let Some(bias) = bias {
                out_plane.fill(bias[oc]);
            }
            for icl in 0..cig {
                let in_plane = padded.plane(b, g * cig + icl);
                for i in 0..kf {
                    for j in 0..kt {
                        let w = wd[((oc * cig + icl) * kf + i) * kt + j];
                        if contiguous {
                            axpy(out_plane, w, in_plane);
                            continue;
                        }
                        for f in 0..fo {
                            let src = (f + i * df) * tp + j * dt;
                            axpy(
                                &mut out_plane[f * to..(f + 1) * to],
                                w,
                                &in_plane[src..src + to],
                            );
                        }
                    }
                }
            }
        }
    }
}

fn forward_im2col<T: Scalar>(
    padded: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&[T]>,
    spec: &ConvSpec,
    out: &mut Tensor<T>,
) {
    let ps = padded.shape();
    let os = out.shape();
    let (fo, to, tp) = (os.freq, os.time, ps.time);
    let cig = spec.in_channels / spec.groups;
    let cog = spec.out_channels / spec.groups;
    let (kf, kt) = spec.kernel;
    let (df, dt) = spec.dilation;
    let rows = cig * kf * kt;
    let cols_len = fo * to;
    let mut cols = vec![T::zero(); rows * cols_len];
    let wd = weights.data();
    for b in 0..ps.batch {
        for g in 0..spec.groups {
            for icl in 0..cig {
                let in_plane = padded.plane(b, g * cig + icl);
                for i in 0..kf {
                    for j in 0..kt {
                        let r = (icl * kf + i) * kt + j;
                        let row = &mut cols[r * cols_len..(r + 1) * cols_len];
                        for f in 0..fo {
                            let src = (f + i * df) * tp + j * dt;
                            row[f * to..(f + 1) * to].copy_from_slice(&in_plane[src..src + to]);
                        }
                    }
                }
            }
            for oc in g * cog..(g + 1) * cog {
                let out_plane = out.plane_mut(b, oc);
                if let Some(bias) = bias {
                    out_plane.fill(bias[oc]);
                }
                let wrow = &wd[oc * rows..(oc + 1) * rows];
                for (r, &w) in wrow.iter().enumerate() {
                    axpy(out_plane, w, &cols[r * cols_len..(r + 1) * cols_len]);
                }
            }
        }
    }
}

/// Gradients of [`conv2d_forward`] given the forward input.
pub fn conv2d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    spec: &ConvSpec,
) -> Result<ConvGrads<T>> {
    let bias_probe: Option<Vec<T>> = spec.has_bias.then(|| vec![T::zero(); spec.out_channels]);
    let (fo, to) = check_operands(input, weights, bias_probe.as_deref(), spec)?;
    let s = input.shape();
    Shape::new(s.batch, spec.out_channels, fo, to).expect("conv2d_backward", &grad_out.shape())?;

    let padded = pad(input, spec.pad);
    let ps = padded.shape();
    let tp = ps.time;
    let cig = spec.in_channels / spec.groups;
    let cog = spec.out_channels / spec.groups;
    let (kf, kt) = spec.kernel;
    let (df, dt) = spec.dilation;
    let contiguous = kf == 1 && kt == 1 && ps.freq == fo && tp == to;
    let wd = weights.data();

    let mut grad_padded = Tensor::zeros(ps);
    let mut gw = vec![0.0f64; spec.weight_count()];
    let mut gb = vec![0.0f64; spec.out_channels];

    for b in 0..s.batch {
        for oc in 0..spec.out_channels {
            let g = oc / cog;
            let go = grad_out.plane(b, oc);
            if spec.has_bias {
                gb[oc] += go.iter().map(|v| v.as_f64()).sum::<f64>();
            }
            for icl in 0..cig {
                let ic = g * cig + icl;
                let in_plane = padded.plane(b, ic);
                for i in 0..kf {
                    for j in 0..kt {
                        let widx = ((oc * cig + icl) * kf + i) * kt + j;
                        let w = wd[widx];
                        let gp = grad_padded.plane_mut(b, ic);
                        if contiguous {
                            gw[widx] += dot(go, in_plane).as_f64();
                            axpy(gp, w, go);
                            continue;
                        }
                        let mut acc = 0.0f64;
                        for f in 0..fo {
                            let src = (f + i * df) * tp + j * dt;
                            let go_row = &go[f * to..(f + 1) * to];
                            acc += dot(go_row, &in_plane[src..src + to]).as_f64();
                            axpy(&mut gp[src..src + to], w, go_row);
                        }
                        gw[widx] += acc;
                    }
                }
            }
        }
    }

    Ok(ConvGrads {
        input: crop(&grad_padded, spec.pad, s),
        weights: Tensor::from_vec(
            spec.weight_shape(),
            gw.into_iter().map(T::of).collect(),
        )?,
        bias: spec.has_bias.then(|| gb.into_iter().map(T::of).collect()),
    })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::tensor::{grad_check, Eval};

    /// Six-nested-loop reference, in f64, reading zeros outside the input.
    fn reference_conv(
        x: &Tensor<f64>,
        w: &Tensor<f64>,
        bias: Option<&[f64]>,
        spec: &ConvSpec,
    ) -> Tensor<f64> {
        let s = x.shape();
        let (fo, to) = spec.output_dims(s.freq, s.time).unwrap();
        let cig = spec.in_channels / spec.groups;
        let cog = spec.out_channels / spec.groups;
        let mut out = Tensor::zeros(Shape::new(s.batch, spec.out_channels, fo, to));
        for b in 0..s.batch {
            for oc in 0..spec.out_channels {
                for f in 0..fo {
                    for t in 0..to {
                        let mut acc = bias.map_or(0.0, |bb| bb[oc]);
                        for icl in 0..cig {
                            let ic = (oc / cog) * cig + icl;
                            for i in 0..spec.kernel.0 {
                                for j in 0..spec.kernel.1 {
                                    let ff = (f + i * spec.dilation.0) as isize
                                        - spec.pad.left_f as isize;
                                    let tt = (t + j * spec.dilation.1) as isize
                                        - spec.pad.left_t as isize;
                                    if ff < 0
                                        || tt < 0
                                        || ff >= s.freq as isize
                                        || tt >= s.time as isize
                                    {
                                        continue;
                                    }
                                    acc += w.at(oc, icl, i, j)
                                        * x.at(b, ic, ff as usize, tt as usize);
                                }
                            }
                        }
                        out.set(b, oc, f, t, acc);
                    }
                }
            }
        }
        out
    }

    fn max_rel(a: &Tensor<f32>, b: &Tensor<f64>) -> f64 {
        a.data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| (x as f64 - y).abs() / y.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    #[test]
    fn pointwise_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::<f32>::uniform(Shape::new(2, 3, 4, 5), -1.0, 1.0, &mut rng);
        let spec = ConvSpec::new(3, 3, (1, 1));
        let mut w = Tensor::zeros(spec.weight_shape());
        for c in 0..3 {
            w.set(c, c, 0, 0, 1.0);
        }
        assert_eq!(conv2d_forward(&x, &w, None, &spec).unwrap(), x);
    }

    #[test]
    fn dilated_temporal_example_matches_hand_expansion() {
        let x: Vec<f32> = (0..8).map(|v| v as f32 + 1.0).collect();
        let input = Tensor::from_vec(Shape::new(1, 1, 1, 8), x.clone()).unwrap();
        let w = Tensor::from_vec(Shape::new(1, 1, 1, 3), vec![0.5, -1.0, 2.0]).unwrap();

        let unpadded = ConvSpec::new(1, 1, (1, 3)).with_dilation((1, 4));
        assert!(matches!(
            conv2d_forward(&input, &w, None, &unpadded),
            Err(Error::KernelTooLarge { axis: "time", .. })
        ));

        let spec = unpadded.with_pad(Padding {
            left_t: 4,
            right_t: 4,
            ..Default::default()
        });
        let out = conv2d_forward(&input, &w, None, &spec).unwrap();
        let at = |t: isize| {
            if (0..8).contains(&t) {
                x[t as usize]
            } else {
                0.0
            }
        };
        for t in 0..8isize {
            let expected = 0.5 * at(t - 4) - 1.0 * at(t) + 2.0 * at(t + 4);
            assert_eq!(out.data()[t as usize], expected, "t={t}");
        }
    }

    #[test]
    fn matches_nested_loop_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for groups in [1, 4] {
            for d in [1, 2] {
                for bias in [false, true] {
                    let spec = ConvSpec::new(4, 4, (3, 3))
                        .with_groups(groups)
                        .with_dilation((d, d))
                        .with_bias(bias)
                        .with_pad(Padding {
                            left_f: d,
                            right_f: d,
                            left_t: 2 * d,
                            right_t: 0,
                        });
                    let x = Tensor::<f32>::uniform(Shape::new(2, 4, 6, 6), -1.0, 1.0, &mut rng);
                    let w = Tensor::<f32>::uniform(spec.weight_shape(), -1.0, 1.0, &mut rng);
                    let b: Vec<f32> = (0..4).map(|i| i as f32 * 0.1).collect();
                    let bias_arg = bias.then_some(&b[..]);
                    let out = conv2d_forward(&x, &w, bias_arg, &spec).unwrap();
                    let bias64: Vec<f64> = b.iter().map(|&v| v as f64).collect();
                    let reference =
                        reference_conv(&x.cast(), &w.cast(), bias.then_some(&bias64[..]), &spec);
                    assert_eq!(out.shape(), reference.shape());
                    assert!(max_rel(&out, &reference) < 1e-5);

                    let im2col =
                        conv2d_forward_with(&x, &w, bias_arg, &spec, ConvAlgo::Im2col).unwrap();
                    assert!(im2col.max_abs_diff(&out) < 1e-5);
                }
            }
        }
    }

    #[test]
    fn depthwise_equals_independent_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pad = Padding {
            left_f: 2,
            right_f: 2,
            left_t: 2,
            right_t: 2,
        };
        let spec = ConvSpec::new(3, 3, (3, 3))
            .with_groups(3)
            .with_dilation((2, 2))
            .with_pad(pad);
        assert!(spec.is_depthwise());
        let x = Tensor::<f32>::uniform(Shape::new(1, 3, 7, 9), -1.0, 1.0, &mut rng);
        let w = Tensor::<f32>::uniform(spec.weight_shape(), -1.0, 1.0, &mut rng);
        let out = conv2d_forward(&x, &w, None, &spec).unwrap();
        let single = ConvSpec::new(1, 1, (3, 3)).with_dilation((2, 2)).with_pad(pad);
        for c in 0..3 {
            let xc = Tensor::from_vec(Shape::new(1, 1, 7, 9), x.plane(0, c).to_vec()).unwrap();
            let wc = Tensor::from_vec(single.weight_shape(), w.plane(c, 0).to_vec()).unwrap();
            let oc = conv2d_forward(&xc, &wc, None, &single).unwrap();
            assert_eq!(oc.data(), out.plane(0, c));
        }
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let spec = ConvSpec::new(2, 2, (1, 1));
        let x = Tensor::<f32>::zeros(Shape::new(1, 3, 2, 2));
        let w = Tensor::zeros(spec.weight_shape());
        let msg = conv2d_forward(&x, &w, None, &spec).unwrap_err().to_string();
        assert!(msg.contains("channels"), "{msg}");
    }

    #[test]
    fn invalid_groups_rejected() {
        let spec = ConvSpec::new(4, 6, (1, 1)).with_groups(4);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn zero_grad_out_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = ConvSpec::new(2, 3, (3, 3)).with_bias(true).with_pad(Padding {
            left_f: 1,
            right_f: 1,
            left_t: 1,
            right_t: 1,
        });
        let x = Tensor::<f32>::uniform(Shape::new(1, 2, 4, 4), -1.0, 1.0, &mut rng);
        let w = Tensor::<f32>::uniform(spec.weight_shape(), -1.0, 1.0, &mut rng);
        let g = conv2d_backward(&Tensor::zeros(Shape::new(1, 3, 4, 4)), &x, &w, &spec).unwrap();
        assert!(g.input.data().iter().all(|&v| v == 0.0));
        assert!(g.weights.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_layer_weight_gradient() {
        let spec = ConvSpec::new(1, 1, (1, 1));
        let x = Tensor::from_vec(Shape::new(1, 1, 1, 3), vec![1.0f32, -2.0, 3.0]).unwrap();
        let w = Tensor::from_vec(spec.weight_shape(), vec![0.7f32]).unwrap();
        let go = Tensor::from_vec(Shape::new(1, 1, 1, 3), vec![0.5f32, 0.25, -1.0]).unwrap();
        let g = conv2d_backward(&go, &x, &w, &spec).unwrap();
        assert_eq!(g.weights.data()[0], 0.5 - 0.5 - 3.0);
        assert_eq!(g.input.data(), &[0.35, 0.175, -0.7]);
    }

    #[test]
    fn mismatched_grad_out_rejected() {
        let spec = ConvSpec::new(1, 1, (1, 1));
        let x = Tensor::<f32>::zeros(Shape::new(1, 1, 2, 3));
        let w = Tensor::zeros(spec.weight_shape());
        let go = Tensor::zeros(Shape::new(1, 1, 2, 4));
        assert!(conv2d_backward(&go, &x, &w, &spec).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let spec = ConvSpec::new(4, 4, (3, 3))
            .with_groups(2)
            .with_dilation((1, 2))
            .with_bias(true)
            .with_pad(Padding {
                left_f: 1,
                right_f: 1,
                left_t: 4,
                right_t: 0,
            });
        let x = Tensor::<f64>::uniform(Shape::new(2, 4, 5, 6), -2.0, 2.0, &mut rng);
        let w = Tensor::<f64>::uniform(spec.weight_shape(), -1.0, 1.0, &mut rng);
        let bias: Vec<f64> = vec![0.1, -0.2, 0.3, 0.0];
        let out_shape = {
            let (fo, to) = spec.output_dims(5, 6).unwrap();
            Shape::new(2, 4, fo, to)
        };
        let r = Tensor::<f64>::uniform(out_shape, -1.0, 1.0, &mut rng);
        let g = conv2d_backward(&r, &x, &w, &spec).unwrap();

        let mut params = vec![x.data().to_vec(), w.data().to_vec(), bias.clone()];
        let analytic = vec![
            g.input.data().to_vec(),
            g.weights.data().to_vec(),
            g.bias.unwrap(),
        ];
        let report = grad_check(&mut params, &analytic, None, 1e-3, |p| {
            let x = Tensor::from_vec(x.shape(), p[0].clone())?;
            let w = Tensor::from_vec(w.shape(), p[1].clone())?;
            let y = conv2d_forward(&x, &w, Some(&p[2]), &spec)?;
            Ok(Eval::smooth(crate::tensor::dot(y.data(), r.data())))
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-3, "{report:?}");
    }
}
