use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, Variant};
use super::plan::{dense_sources, dilated_input_channels, param_count, plan_padding, PadPlan};
use crate::error::{Error, Result};
use crate::tensor::{
    add_residual, batchnorm_backward, batchnorm_forward, batchnorm_infer, concat_channels,
    conv2d_backward, conv2d_forward, prelu_backward, prelu_forward, split_channels,
    BatchNormState, BnCache, ConvSpec, NormMode, PReluState, Scalar, Shape, Tensor,
};

/// Initial slope of every PReLU.
pub const PRELU_INIT: f64 = 0.25;

/// A bias-free convolution and its weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv<T = f32> {
    pub spec: ConvSpec,
    pub weight: Tensor<T>,
}

impl<T: Scalar> Conv<T> {
    fn init(spec: ConvSpec, rng: &mut ChaCha8Rng) -> Self {
        let bound = (1.0 / spec.fan_in() as f64).sqrt();
        let weight = Tensor::uniform(spec.weight_shape(), -bound, bound, rng);
        Conv { spec, weight }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d_forward(x, &self.weight, None, &self.spec)
    }

    fn cast<U: Scalar>(&self) -> Conv<U> {
        Conv {
            spec: self.spec.clone(),
            weight: self.weight.cast(),
        }
    }
}

/// conv_0 (1×1) → PReLU → BN → conv_1 (dilated) → PReLU → BN → conv_2 (1×1),
/// plus the residual from the previous node.
#[derive(Clone, Debug, PartialEq)]
pub struct DilatedBlock<T = f32> {
    pub name: String,
    /// Nodes concatenated (in this order) to form the input of conv_0.
    pub sources: Vec<usize>,
    pub conv0: Conv<T>,
    pub prelu0: PReluState<T>,
    pub bn0: BatchNormState<T>,
    pub conv1: Conv<T>,
    pub prelu1: PReluState<T>,
    pub bn1: BatchNormState<T>,
    pub conv2: Conv<T>,
}

impl<T: Scalar> DilatedBlock<T> {
    /// conv_0, PReLU and BN in inference mode.
    pub(crate) fn head(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let h = prelu_forward(&self.conv0.forward(input)?, &self.prelu0)?;
        batchnorm_infer(&h, &self.bn0)
    }

    /// Everything after conv_1, in inference mode.
    pub(crate) fn tail(&self, conv1_out: &Tensor<T>, residual: &Tensor<T>) -> Result<Tensor<T>> {
        let h = prelu_forward(conv1_out, &self.prelu1)?;
        let h = batchnorm_infer(&h, &self.bn1)?;
        add_residual(&self.conv2.forward(&h)?, residual)
    }

    /// Inference-mode block output for a concatenated input and the residual.
    pub fn infer(&self, input: &Tensor<T>, residual: &Tensor<T>) -> Result<Tensor<T>> {
        let h = self.head(input)?;
        self.tail(&self.conv1.forward(&h)?, residual)
    }

    fn cast<U: Scalar>(&self) -> DilatedBlock<U> {
        DilatedBlock {
            name: self.name.clone(),
            sources: self.sources.clone(),
            conv0: self.conv0.cast(),
            prelu0: self.prelu0.cast(),
            bn0: self.bn0.cast(),
            conv1: self.conv1.cast(),
            prelu1: self.prelu1.cast(),
            bn1: self.bn1.cast(),
            conv2: self.conv2.cast(),
        }
    }
}

/// Name and shape of one parameter or buffer tensor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorInfo {
    fn new(name: impl Into<String>, shape: Vec<usize>) -> Self {
        TensorInfo {
            name: name.into(),
            shape,
        }
    }

    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// Gradients in the order of [`Model::param_layout`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T = f32> {
    pub groups: Vec<Vec<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn is_finite(&self) -> bool {
        self.groups.iter().flatten().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.groups
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.as_f64().abs()))
    }
}

struct BlockTape<T> {
    input: Tensor<T>,
    pre0: Tensor<T>,
    bn0: BnCache<T>,
    h0: Tensor<T>,
    pre1: Tensor<T>,
    bn1: BnCache<T>,
    h1: Tensor<T>,
}

/// Intermediate values of a training forward pass, consumed by
/// [`Model::backward`].
pub struct Tape<T> {
    input_bn: BnCache<T>,
    conv_in: Tensor<T>,
    nodes: Vec<Tensor<T>>,
    blocks: Vec<BlockTape<T>>,
    out_pre: Tensor<T>,
    output: Tensor<T>,
}

impl<T: Scalar> Tape<T> {
    /// Network output in the external `(batch, 1, bins, frames)` layout.
    pub fn output(&self) -> &Tensor<T> {
        &self.output
    }

    /// Fingerprint of the sign pattern of every PReLU input. Two passes with
    /// equal fingerprints lie in the same linear piece of the activations.
    pub fn region(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |t: &Tensor<T>| {
            for chunk in t.data().chunks(64) {
                let mut bits = 0u64;
                for (i, v) in chunk.iter().enumerate() {
                    if *v < T::zero() {
                        bits |= 1 << i;
                    }
                }
                h = (h ^ bits).wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for b in &self.blocks {
            eat(&b.pre0);
            eat(&b.pre1);
        }
        eat(&self.out_pre);
        h
    }
}

/// A realized network. Node 0 is the input-module output and node `k + 1`
/// the output of dilated block `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T: Scalar = f32> {
    config: ModelConfig,
    plan: PadPlan,
    seed: u64,
    pub input_bn: BatchNormState<T>,
    pub input_conv: Conv<T>,
    pub blocks: Vec<DilatedBlock<T>>,
    pub output_conv: Conv<T>,
    pub output_prelu: PReluState<T>,
}

/// Builds a network with weights drawn uniformly from `±sqrt(1/fan_in)`.
pub fn build_model(cfg: &ModelConfig, seed: u64) -> Result<Model<f32>> {
    let plan = plan_padding(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c_in = cfg.input_channels();
    let b = cfg.block_channels;
    let h = cfg.bottleneck_channels;
    let alpha = || PReluState::shared(PRELU_INIT as f32);

    let input_bn = BatchNormState::new(c_in);
    let input_conv = Conv::init(
        ConvSpec::new(c_in, b, cfg.input_kernel).with_pad(plan.input().padding()),
        &mut rng,
    );
    let mut blocks = Vec::with_capacity(cfg.total_dilated_blocks());
    for k in 0..cfg.total_dilated_blocks() {
        let (r, n) = (k / cfg.dilated_blocks_per_repeat, k % cfg.dilated_blocks_per_repeat);
        let layer = plan.dilated(k);
        let conv0 = Conv::init(
            ConvSpec::new(dilated_input_channels(cfg, k), h, (1, 1)),
            &mut rng,
        );
        let spec1 = ConvSpec::new(h, h, cfg.dilated_kernel)
            .with_dilation(layer.dilation)
            .with_pad(layer.padding())
            .with_groups(if cfg.depthwise_dilated { h } else { 1 });
        let conv1 = Conv::init(spec1, &mut rng);
        let conv2 = Conv::init(ConvSpec::new(h, b, (1, 1)), &mut rng);
        blocks.push(DilatedBlock {
            name: format!("repeat{r}.block{n}"),
            sources: dense_sources(cfg, k),
            conv0,
            prelu0: alpha(),
            bn0: BatchNormState::new(h),
            conv1,
            prelu1: alpha(),
            bn1: BatchNormState::new(h),
            conv2,
        });
    }
    let output_conv = Conv::init(ConvSpec::new(b, c_in, (1, 1)), &mut rng);
    let model = Model {
        config: cfg.clone(),
        plan,
        seed,
        input_bn,
        input_conv,
        blocks,
        output_conv,
        output_prelu: alpha(),
    };
    debug_assert_eq!(model.num_params(), param_count(cfg));
    Ok(model)
}

impl<T: Scalar> Model<T> {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn plan(&self) -> &PadPlan {
        &self.plan
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            plan: self.plan.clone(),
            seed: self.seed,
            input_bn: self.input_bn.cast(),
            input_conv: self.input_conv.cast(),
            blocks: self.blocks.iter().map(|b| b.cast()).collect(),
            output_conv: self.output_conv.cast(),
            output_prelu: self.output_prelu.cast(),
        }
    }

    pub fn set_mode(&mut self, mode: NormMode) {
        self.input_bn.mode = mode;
        for b in &mut self.blocks {
            b.bn0.mode = mode;
            b.bn1.mode = mode;
        }
    }

    pub fn mode(&self) -> NormMode {
        self.input_bn.mode
    }

    pub fn param_layout(&self) -> Vec<TensorInfo> {
        let dims = |c: &Conv<T>| c.weight.shape().dims().to_vec();
        let mut out = vec![
            TensorInfo::new("input.bn.gamma", vec![self.input_bn.channels()]),
            TensorInfo::new("input.bn.beta", vec![self.input_bn.channels()]),
            TensorInfo::new("input.conv.weight", dims(&self.input_conv)),
        ];
        for b in &self.blocks {
            let n = &b.name;
            out.extend([
                TensorInfo::new(format!("{n}.conv0.weight"), dims(&b.conv0)),
                TensorInfo::new(format!("{n}.prelu0.alpha"), vec![b.prelu0.alpha.len()]),
                TensorInfo::new(format!("{n}.bn0.gamma"), vec![b.bn0.channels()]),
                TensorInfo::new(format!("{n}.bn0.beta"), vec![b.bn0.channels()]),
                TensorInfo::new(format!("{n}.conv1.weight"), dims(&b.conv1)),
                TensorInfo::new(format!("{n}.prelu1.alpha"), vec![b.prelu1.alpha.len()]),
                TensorInfo::new(format!("{n}.bn1.gamma"), vec![b.bn1.channels()]),
                TensorInfo::new(format!("{n}.bn1.beta"), vec![b.bn1.channels()]),
                TensorInfo::new(format!("{n}.conv2.weight"), dims(&b.conv2)),
            ]);
        }
        out.push(TensorInfo::new("output.conv.weight", dims(&self.output_conv)));
        out.push(TensorInfo::new("output.prelu.alpha", vec![self.output_prelu.alpha.len()]));
        out
    }

    pub fn params(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = vec![
            &self.input_bn.gamma,
            &self.input_bn.beta,
            self.input_conv.weight.data(),
        ];
        for b in &self.blocks {
            out.extend([
                b.conv0.weight.data(),
                &b.prelu0.alpha[..],
                &b.bn0.gamma[..],
                &b.bn0.beta[..],
                b.conv1.weight.data(),
                &b.prelu1.alpha[..],
                &b.bn1.gamma[..],
                &b.bn1.beta[..],
                b.conv2.weight.data(),
            ]);
        }
        out.push(self.output_conv.weight.data());
        out.push(&self.output_prelu.alpha);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = vec![
            &mut self.input_bn.gamma,
            &mut self.input_bn.beta,
            self.input_conv.weight.data_mut(),
        ];
        for b in &mut self.blocks {
            out.extend([
                b.conv0.weight.data_mut(),
                &mut b.prelu0.alpha[..],
                &mut b.bn0.gamma[..],
                &mut b.bn0.beta[..],
                b.conv1.weight.data_mut(),
                &mut b.prelu1.alpha[..],
                &mut b.bn1.gamma[..],
                &mut b.bn1.beta[..],
                b.conv2.weight.data_mut(),
            ]);
        }
        out.push(self.output_conv.weight.data_mut());
        out.push(&mut self.output_prelu.alpha);
        out
    }

    /// Batch-norm running statistics, which are state but not parameters.
    pub fn buffer_layout(&self) -> Vec<TensorInfo> {
        let mut out = vec![
            TensorInfo::new("input.bn.running_mean", vec![self.input_bn.channels()]),
            TensorInfo::new("input.bn.running_var", vec![self.input_bn.channels()]),
        ];
        for b in &self.blocks {
            for (tag, bn) in [("bn0", &b.bn0), ("bn1", &b.bn1)] {
                out.push(TensorInfo::new(format!("{}.{tag}.running_mean", b.name), vec![bn.channels()]));
                out.push(TensorInfo::new(format!("{}.{tag}.running_var", b.name), vec![bn.channels()]));
            }
        }
        out
    }

    pub fn buffers(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = vec![&self.input_bn.running_mean, &self.input_bn.running_var];
        for b in &self.blocks {
            out.extend([
                &b.bn0.running_mean[..],
                &b.bn0.running_var[..],
                &b.bn1.running_mean[..],
                &b.bn1.running_var[..],
            ]);
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = vec![
            &mut self.input_bn.running_mean,
            &mut self.input_bn.running_var,
        ];
        for b in &mut self.blocks {
            out.extend([
                &mut b.bn0.running_mean[..],
                &mut b.bn0.running_var[..],
                &mut b.bn1.running_mean[..],
                &mut b.bn1.running_var[..],
            ]);
        }
        out
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Checks the external `(batch, 1, bins, frames)` layout.
    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let s = x.shape();
        for (axis, expected, found) in [
            ("channels", 1, s.channels),
            ("freq", self.config.freq_bins, s.freq),
        ] {
            if expected != found {
                return Err(Error::Shape {
                    op: "model forward",
                    axis,
                    expected,
                    found,
                });
            }
        }
        if s.time == 0 || s.batch == 0 {
            return Err(Error::Shape {
                op: "model forward",
                axis: if s.time == 0 { "time" } else { "batch" },
                expected: 1,
                found: 0,
            });
        }
        x.ensure_finite("model forward input")
    }

    pub(crate) fn to_internal(&self, x: &Tensor<T>) -> Tensor<T> {
        match self.config.variant {
            Variant::TcnLps => x.swap_channels_freq(),
            _ => x.clone(),
        }
    }

    pub(crate) fn to_external(&self, x: Tensor<T>) -> Tensor<T> {
        match self.config.variant {
            Variant::TcnLps => x.swap_channels_freq(),
            _ => x,
        }
    }

    /// Input module in inference mode.
    pub(crate) fn input_module(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.input_conv.forward(&batchnorm_infer(x, &self.input_bn)?)
    }

    pub(crate) fn output_module(&self, node: &Tensor<T>) -> Result<Tensor<T>> {
        prelu_forward(&self.output_conv.forward(node)?, &self.output_prelu)
    }

    /// Index of the last block reading each node; the final node is read by
    /// the output module, represented as `blocks.len()`.
    pub(crate) fn last_use(&self) -> Vec<usize> {
        let mut last: Vec<usize> = (0..=self.blocks.len()).collect();
        for (k, b) in self.blocks.iter().enumerate() {
            for &s in &b.sources {
                last[s] = last[s].max(k);
            }
        }
        last
    }

    /// Inference forward pass with frozen batch-norm statistics, independent
    /// of the current mode. Input and output are `(batch, 1, bins, frames)`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.run(x, None, None)
    }

    /// Concatenated conv_0 input of every dilated block. With `silenced`,
    /// that node is replaced by zeros wherever it is concatenated (its
    /// residual use is untouched).
    pub fn block_inputs(&self, x: &Tensor<T>, silenced: Option<usize>) -> Result<Vec<Tensor<T>>> {
        let mut record = Vec::new();
        self.run(x, silenced, Some(&mut record))?;
        Ok(record)
    }

    fn run(
        &self,
        x: &Tensor<T>,
        silenced: Option<usize>,
        mut record: Option<&mut Vec<Tensor<T>>>,
    ) -> Result<Tensor<T>> {
        self.check_input(x)?;
        let last = self.last_use();
        let mut nodes: Vec<Option<Tensor<T>>> = vec![None; self.blocks.len() + 1];
        nodes[0] = Some(self.input_module(&self.to_internal(x))?);
        for (k, block) in self.blocks.iter().enumerate() {
            let zero = silenced
                .filter(|s| block.sources.contains(s))
                .map(|s| Tensor::zeros(nodes[s].as_ref().expect("live node").shape()));
            let parts: Vec<&Tensor<T>> = block
                .sources
                .iter()
                .map(|&s| match (&zero, Some(s) == silenced) {
                    (Some(z), true) => z,
                    _ => nodes[s].as_ref().expect("live node"),
                })
                .collect();
            let input = concat_channels(&parts)?;
            let out = block.infer(&input, nodes[k].as_ref().expect("live node"))?;
            if let Some(rec) = record.as_deref_mut() {
                rec.push(input);
            }
            nodes[k + 1] = Some(out);
            for (j, node) in nodes.iter_mut().enumerate().take(k + 1) {
                if last[j] == k {
                    *node = None;
                }
            }
        }
        let out = self.output_module(nodes.last().and_then(|n| n.as_ref()).expect("final node"))?;
        let out = self.to_external(out);
        out.ensure_finite("model forward")?;
        Ok(out)
    }

    /// Forward pass honouring each batch norm's mode (batch statistics and
    /// running-stat updates in train mode), recording what backward needs.
    pub fn forward_train(&mut self, x: &Tensor<T>) -> Result<Tape<T>> {
        self.check_input(x)?;
        let xi = self.to_internal(x);
        let (bn_out, input_bn) = batchnorm_forward(&xi, &mut self.input_bn)?;
        let node0 = self.input_conv.forward(&bn_out)?;
        let mut nodes = vec![node0];
        let mut tapes = Vec::with_capacity(self.blocks.len());
        for (k, block) in self.blocks.iter_mut().enumerate() {
            let parts: Vec<&Tensor<T>> = block.sources.iter().map(|&s| &nodes[s]).collect();
            let input = concat_channels(&parts)?;
            let pre0 = block.conv0.forward(&input)?;
            let (h0, bn0) = batchnorm_forward(&prelu_forward(&pre0, &block.prelu0)?, &mut block.bn0)?;
            let pre1 = block.conv1.forward(&h0)?;
            let (h1, bn1) = batchnorm_forward(&prelu_forward(&pre1, &block.prelu1)?, &mut block.bn1)?;
            let out = add_residual(&block.conv2.forward(&h1)?, &nodes[k])?;
            nodes.push(out);
            tapes.push(BlockTape {
                input,
                pre0,
                bn0,
                h0,
                pre1,
                bn1,
                h1,
            });
        }
        let out_pre = self.output_conv.forward(nodes.last().expect("final node"))?;
        let output = self.to_external(prelu_forward(&out_pre, &self.output_prelu)?);
        if !output.is_finite() {
            return Err(Error::NonFinite {
                op: "model forward_train".into(),
            });
        }
        Ok(Tape {
            input_bn,
            conv_in: bn_out,
            nodes,
            blocks: tapes,
            out_pre,
            output,
        })
    }

    /// Gradients of a scalar objective with respect to every parameter, given
    /// its gradient with respect to the output of `tape`.
    pub fn backward(&self, tape: &Tape<T>, grad_output: &Tensor<T>) -> Result<Gradients<T>> {
        tape.output.shape().expect("model backward", &grad_output.shape())?;
        let g = self.to_internal(grad_output);
        let (g, out_alpha) = prelu_backward(&g, &tape.out_pre, &self.output_prelu)?;
        let last = tape.nodes.len() - 1;
        let out_conv = conv2d_backward(&g, &tape.nodes[last], &self.output_conv.weight, &self.output_conv.spec)?;

        let mut node_grads: Vec<Option<Tensor<T>>> = vec![None; tape.nodes.len()];
        node_grads[last] = Some(out_conv.input);
        let accumulate = |slot: &mut Option<Tensor<T>>, g: Tensor<T>| -> Result<()> {
            match slot {
                Some(acc) => *acc = add_residual(acc, &g)?,
                None => *slot = Some(g),
            }
            Ok(())
        };

        let mut block_grads: Vec<Vec<Vec<T>>> = Vec::with_capacity(self.blocks.len());
        for (k, (block, bt)) in self.blocks.iter().zip(&tape.blocks).enumerate().rev() {
            let g_out = node_grads[k + 1].take().unwrap_or_else(|| Tensor::zeros(tape.nodes[k + 1].shape()));
            accumulate(&mut node_grads[k], g_out.clone())?;
            let c2 = conv2d_backward(&g_out, &bt.h1, &block.conv2.weight, &block.conv2.spec)?;
            let bn1 = batchnorm_backward(&c2.input, &bt.bn1, &block.bn1)?;
            let (g, alpha1) = prelu_backward(&bn1.input, &bt.pre1, &block.prelu1)?;
            let c1 = conv2d_backward(&g, &bt.h0, &block.conv1.weight, &block.conv1.spec)?;
            let bn0 = batchnorm_backward(&c1.input, &bt.bn0, &block.bn0)?;
            let (g, alpha0) = prelu_backward(&bn0.input, &bt.pre0, &block.prelu0)?;
            let c0 = conv2d_backward(&g, &bt.input, &block.conv0.weight, &block.conv0.spec)?;
            let widths: Vec<usize> = block.sources.iter().map(|&s| tape.nodes[s].shape().channels).collect();
            for (&s, part) in block.sources.iter().zip(split_channels(&c0.input, &widths)?) {
                accumulate(&mut node_grads[s], part)?;
            }
            block_grads.push(vec![
                c0.weights.into_vec(),
                alpha0,
                bn0.gamma,
                bn0.beta,
                c1.weights.into_vec(),
                alpha1,
                bn1.gamma,
                bn1.beta,
                c2.weights.into_vec(),
            ]);
        }
        let g0 = node_grads[0].take().expect("node 0 feeds the first block");
        let c_in = conv2d_backward(&g0, &tape.conv_in, &self.input_conv.weight, &self.input_conv.spec)?;
        let bn = batchnorm_backward(&c_in.input, &tape.input_bn, &self.input_bn)?;

        let mut groups = vec![bn.gamma, bn.beta, c_in.weights.into_vec()];
        groups.extend(block_grads.into_iter().rev().flatten());
        groups.push(out_conv.weights.into_vec());
        groups.push(out_alpha);
        let grads = Gradients { groups };
        if !grads.is_finite() {
            return Err(Error::NonFinite {
                op: "model backward".into(),
            });
        }
        Ok(grads)
    }
}

/// A model whose output equals its input up to rounding: the input
/// convolution and the output convolution route each input channel
/// straight through, every residual branch is zeroed and the final PReLU is
/// linear. Useful for checking the signal path around the network.
pub fn passthrough_model(cfg: &ModelConfig) -> Result<Model<f32>> {
    let mut m = build_model(cfg, 0)?;
    let c_in = cfg.input_channels();
    if cfg.block_channels < c_in {
        return Err(Error::Config(format!(
            "passthrough needs at least {c_in} block channels, got {}",
            cfg.block_channels
        )));
    }
    let pad = m.plan().input().clone();
    m.set_mode(NormMode::Inference);
    let eps = m.input_bn.epsilon;
    m.input_bn.gamma.iter_mut().for_each(|g| *g = (1.0 + eps).sqrt());
    m.input_conv.weight.data_mut().fill(0.0);
    m.output_conv.weight.data_mut().fill(0.0);
    for c in 0..c_in {
        m.input_conv.weight.set(c, c, pad.left_f, pad.left_t, 1.0);
        m.output_conv.weight.set(c, c, 0, 0, 1.0);
    }
    for b in &mut m.blocks {
        b.conv2.weight.data_mut().fill(0.0);
    }
    m.output_prelu.alpha.iter_mut().for_each(|a| *a = 1.0);
    Ok(m)
}

/// Stacks equally long LPS matrices into a `(batch, 1, bins, frames)` tensor.
pub fn lps_to_tensor(items: &[&crate::dsp::LpsMatrix]) -> Result<Tensor<f32>> {
    let first = items.first().ok_or(Error::EmptyCorpus)?;
    let (t, f) = (first.frames(), first.bins());
    let mut data = vec![0.0f32; items.len() * f * t];
    for (b, m) in items.iter().enumerate() {
        if m.frames() != t || m.bins() != f {
            return Err(Error::Shape {
                op: "lps_to_tensor",
                axis: if m.bins() != f { "freq" } else { "time" },
                expected: if m.bins() != f { f } else { t },
                found: if m.bins() != f { m.bins() } else { m.frames() },
            });
        }
        let plane = &mut data[b * f * t..(b + 1) * f * t];
        for (ti, frame) in (0..t).map(|ti| (ti, m.frame(ti))) {
            for (j, &v) in frame.iter().enumerate() {
                plane[j * t + ti] = v;
            }
        }
    }
    Tensor::from_vec(Shape::new(items.len(), 1, f, t), data)
}

/// Inverse of [`lps_to_tensor`].
pub fn tensor_to_lps(x: &Tensor<f32>) -> Result<Vec<crate::dsp::LpsMatrix>> {
    let s = x.shape();
    if s.channels != 1 {
        return Err(Error::Shape {
            op: "tensor_to_lps",
            axis: "channels",
            expected: 1,
            found: s.channels,
        });
    }
    (0..s.batch)
        .map(|b| {
            let plane = x.plane(b, 0);
            let mut data = vec![0.0f32; s.plane()];
            for t in 0..s.time {
                for j in 0..s.freq {
                    data[t * s.freq + j] = plane[j * s.time + t];
                }
            }
            crate::dsp::LpsMatrix::new(s.time, s.freq, data)
        })
        .collect()
}
