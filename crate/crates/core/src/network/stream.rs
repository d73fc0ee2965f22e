use std::collections::VecDeque;

use super::model::Model;
use crate::error::{Error, Result};
use crate::tensor::{batchnorm_infer, concat_channels, conv2d_forward, ConvSpec, Padding, Scalar, Shape, Tensor};

/// Columns of one node, `(1, C, F, 1)` each, starting at frame `base`.
struct NodeQueue<T> {
    base: usize,
    cols: VecDeque<Tensor<T>>,
    len: Option<usize>,
}

impl<T: Scalar> NodeQueue<T> {
    fn new() -> Self {
        NodeQueue {
            base: 0,
            cols: VecDeque::new(),
            len: None,
        }
    }

    fn produced(&self) -> usize {
        self.base + self.cols.len()
    }

    fn get(&self, t: usize) -> &Tensor<T> {
        &self.cols[t - self.base]
    }

    fn trim(&mut self, keep_from: usize) {
        while self.base < keep_from && !self.cols.is_empty() {
            self.cols.pop_front();
            self.base += 1;
        }
    }

    fn complete(&self) -> Option<usize> {
        self.len.filter(|&n| self.produced() == n)
    }
}

/// Zero-padded input columns of one temporal convolution.
struct TemporalBuffer<T> {
    kt: usize,
    dt: usize,
    right: usize,
    zero: Tensor<T>,
    base: usize,
    cols: VecDeque<Tensor<T>>,
    emitted: usize,
    closed: bool,
}

impl<T: Scalar> TemporalBuffer<T> {
    fn new(pad: Padding, kt: usize, dt: usize, column: Shape) -> Self {
        let zero = Tensor::zeros(column);
        TemporalBuffer {
            kt,
            dt,
            right: pad.right_t,
            cols: std::iter::repeat_n(zero.clone(), pad.left_t).collect(),
            zero,
            base: 0,
            emitted: 0,
            closed: false,
        }
    }

    fn push(&mut self, col: Tensor<T>) {
        self.cols.push_back(col);
    }

    fn close(&mut self) {
        for _ in 0..self.right {
            self.cols.push_back(self.zero.clone());
        }
        self.closed = true;
    }

    /// The `k_t` dilated taps of the next output as a `(1, C, F, k_t)` tensor.
    fn pop_ready(&mut self) -> Option<(usize, Tensor<T>)> {
        let span = (self.kt - 1) * self.dt + 1;
        let start = self.emitted - self.base;
        if start + span > self.cols.len() {
            return None;
        }
        let s = self.zero.shape();
        let plane = s.channels * s.freq;
        let mut data = vec![T::zero(); plane * self.kt];
        for j in 0..self.kt {
            for (i, &v) in self.cols[start + j * self.dt].data().iter().enumerate() {
                data[i * self.kt + j] = v;
            }
        }
        let o = self.emitted;
        self.emitted += 1;
        while self.base < self.emitted {
            self.cols.pop_front();
            self.base += 1;
        }
        let taps = Tensor::from_vec(Shape::new(1, s.channels, s.freq, self.kt), data).expect("tap shape");
        Some((o, taps))
    }
}

struct BlockStream<T> {
    spec: ConvSpec,
    next_in: usize,
    buffer: TemporalBuffer<T>,
}

/// Converts a convolution into the one applied to gathered taps: unit time
/// dilation and no time padding. The per-element summation order is the
/// same as the batch convolution's, so results agree bit for bit.
fn tap_spec(spec: &ConvSpec) -> ConvSpec {
    let mut s = spec.clone();
    s.dilation.1 = 1;
    s.pad.left_t = 0;
    s.pad.right_t = 0;
    s
}

/// Frame-by-frame inference that reproduces [`Model::forward`] exactly.
///
/// Each pushed frame is a vector of `freq_bins` normalized LPS values. An
/// output frame is released as soon as every input it depends on has
/// arrived, so a model with `L` frames of look-ahead emits frame `t` right
/// after input frame `t + L`.
pub struct StreamingModel<T: Scalar = f32> {
    model: Model<T>,
    column: Shape,
    input_spec: ConvSpec,
    input: TemporalBuffer<T>,
    blocks: Vec<BlockStream<T>>,
    nodes: Vec<NodeQueue<T>>,
    pushed: usize,
    out_cursor: usize,
}

impl<T: Scalar> StreamingModel<T> {
    pub fn new(model: &Model<T>) -> Result<Self> {
        let cfg = model.config();
        let column = Shape::new(1, cfg.input_channels(), cfg.freq_bins / cfg.input_channels(), 1);
        let node_col = |c: usize| Shape::new(1, c, cfg.map_freq(), 1);
        let ic = &model.input_conv.spec;
        let input = TemporalBuffer::new(ic.pad, ic.kernel.1, ic.dilation.1, column);
        let blocks = model
            .blocks
            .iter()
            .map(|b| {
                let s = &b.conv1.spec;
                BlockStream {
                    spec: tap_spec(s),
                    next_in: 0,
                    buffer: TemporalBuffer::new(s.pad, s.kernel.1, s.dilation.1, node_col(s.in_channels)),
                }
            })
            .collect();
        Ok(StreamingModel {
            input_spec: tap_spec(ic),
            model: model.clone(),
            column,
            input,
            blocks,
            nodes: (0..=model.blocks.len()).map(|_| NodeQueue::new()).collect(),
            pushed: 0,
            out_cursor: 0,
        })
    }

    /// Frames of look-ahead, i.e. how far output lags input.
    pub fn latency_frames(&self) -> usize {
        self.model.plan().future_frames()
    }

    pub fn frames_pushed(&self) -> usize {
        self.pushed
    }

    pub fn frames_emitted(&self) -> usize {
        self.out_cursor
    }

    /// Feeds one input frame; returns the output frames it completes.
    pub fn push(&mut self, frame: &[T]) -> Result<Vec<Vec<T>>> {
        if self.input.closed {
            return Err(Error::Config("stream already flushed; call reset".into()));
        }
        if frame.len() != self.column.numel() {
            return Err(Error::Shape {
                op: "stream push",
                axis: "freq",
                expected: self.column.numel(),
                found: frame.len(),
            });
        }
        if frame.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                op: "stream push".into(),
            });
        }
        let col = Tensor::from_vec(self.column, frame.to_vec())?;
        self.input.push(batchnorm_infer(&col, &self.model.input_bn)?);
        self.pushed += 1;
        self.pump()
    }

    /// Ends the stream, releasing every remaining output frame.
    pub fn flush(&mut self) -> Result<Vec<Vec<T>>> {
        if !self.input.closed {
            self.input.close();
        }
        self.pump()
    }

    pub fn reset(&mut self) -> Result<()> {
        *self = StreamingModel::new(&self.model)?;
        Ok(())
    }

    fn pump(&mut self) -> Result<Vec<Vec<T>>> {
        let model = &self.model;
        while let Some((_, taps)) = self.input.pop_ready() {
            let col = conv2d_forward(&taps, &model.input_conv.weight, None, &self.input_spec)?;
            self.nodes[0].cols.push_back(col);
        }
        if self.input.closed {
            self.nodes[0].len = Some(self.pushed);
        }

        for (k, (block, bs)) in model.blocks.iter().zip(&mut self.blocks).enumerate() {
            loop {
                let t = bs.next_in;
                if block.sources.iter().any(|&s| self.nodes[s].produced() <= t) {
                    break;
                }
                let parts: Vec<&Tensor<T>> = block.sources.iter().map(|&s| self.nodes[s].get(t)).collect();
                bs.buffer.push(block.head(&concat_channels(&parts)?)?);
                bs.next_in += 1;
            }
            if !bs.buffer.closed
                && block
                    .sources
                    .iter()
                    .all(|&s| self.nodes[s].complete() == Some(bs.next_in))
            {
                bs.buffer.close();
            }
            while let Some((o, taps)) = bs.buffer.pop_ready() {
                let c1 = conv2d_forward(&taps, &block.conv1.weight, None, &bs.spec)?;
                let out = block.tail(&c1, self.nodes[k].get(o))?;
                self.nodes[k + 1].cols.push_back(out);
            }
            if bs.buffer.closed {
                self.nodes[k + 1].len = Some(bs.buffer.emitted);
            }
        }

        let last = self.nodes.len() - 1;
        let mut out = Vec::new();
        while self.out_cursor < self.nodes[last].produced() {
            let y = model.output_module(self.nodes[last].get(self.out_cursor))?;
            if !y.is_finite() {
                return Err(Error::NonFinite {
                    op: "stream output".into(),
                });
            }
            out.push(y.into_vec());
            self.out_cursor += 1;
        }

        for j in 0..self.nodes.len() {
            let mut keep = usize::MAX;
            for (b, bs) in model.blocks.iter().zip(&self.blocks) {
                if b.sources.contains(&j) {
                    keep = keep.min(bs.next_in);
                }
            }
            if j < self.blocks.len() {
                keep = keep.min(self.blocks[j].buffer.emitted);
            } else {
                keep = keep.min(self.out_cursor);
            }
            self.nodes[j].trim(keep);
        }
        Ok(out)
    }
}
