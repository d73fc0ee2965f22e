//! Padding/clipping plan, receptive field and parameter accounting. All of it
//! is computed from a [`ModelConfig`] alone, without building a model.

use serde::{Deserialize, Serialize};

use super::config::{CausalityMode, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::Padding;

/// Padding of one layer with spatial extent.
///
/// Equivalently, the layer pads `total_t` zeros on both sides and clips
/// `clip_right` outputs at the right end and `right_t` at the left end.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerPad {
    pub name: String,
    pub kernel: (usize, usize),
    pub dilation: (usize, usize),
    pub left_t: usize,
    pub right_t: usize,
    pub left_f: usize,
    pub right_f: usize,
    pub clip_right: usize,
}

impl LayerPad {
    /// `(k_t - 1) * d_t`
    pub fn total_t(&self) -> usize {
        self.left_t + self.right_t
    }

    pub fn padding(&self) -> Padding {
        Padding {
            left_f: self.left_f,
            right_f: self.right_f,
            left_t: self.left_t,
            right_t: self.right_t,
        }
    }
}

/// Per-layer pads in network order: the input convolution followed by the
/// dilated convolution of every dilated block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PadPlan {
    pub layers: Vec<LayerPad>,
}

impl PadPlan {
    /// Frames of look-ahead of the whole network.
    pub fn future_frames(&self) -> usize {
        self.layers.iter().map(|l| l.right_t).sum()
    }

    pub fn past_frames(&self) -> usize {
        self.layers.iter().map(|l| l.left_t).sum()
    }

    pub fn input(&self) -> &LayerPad {
        &self.layers[0]
    }

    /// Pad of the dilated convolution in global dilated block `index`.
    pub fn dilated(&self, index: usize) -> &LayerPad {
        &self.layers[index + 1]
    }
}

/// Layers with temporal extent, in network order: `(name, kernel, dilation)`.
fn spatial_layers(cfg: &ModelConfig) -> Vec<(String, (usize, usize), (usize, usize))> {
    let mut out = vec![("input.conv".to_string(), cfg.input_kernel, (1, 1))];
    for r in 0..cfg.repeated_blocks {
        for n in 0..cfg.dilated_blocks_per_repeat {
            out.push((
                format!("repeat{r}.block{n}.conv1"),
                cfg.dilated_kernel,
                cfg.dilation(n),
            ));
        }
    }
    out
}

/// Largest look-ahead a semi-causal variant of this architecture supports.
pub fn max_look_ahead(cfg: &ModelConfig) -> usize {
    spatial_layers(cfg)
        .iter()
        .map(|(_, k, d)| (k.1 - 1) * d.1 / 2)
        .sum()
}

/// Temporal pads per layer. Non-causal layers split `P = (k-1)d` evenly;
/// causal layers put all of it on the left; a semi-causal budget is handed
/// out front to back, each layer taking at most its symmetric share `P/2`.
pub fn plan_padding(cfg: &ModelConfig) -> Result<PadPlan> {
    cfg.validate()?;
    let mut remaining = match cfg.causality.budget() {
        None => usize::MAX,
        Some(budget) => {
            let max = max_look_ahead(cfg);
            if budget > max {
                return Err(Error::LookAhead {
                    requested: budget,
                    max,
                });
            }
            budget
        }
    };
    let layers = spatial_layers(cfg)
        .into_iter()
        .map(|(name, kernel, dilation)| {
            let total = (kernel.1 - 1) * dilation.1;
            let future = match cfg.causality {
                CausalityMode::NonCausal => total / 2,
                _ => {
                    let f = (total / 2).min(remaining);
                    remaining -= f;
                    f
                }
            };
            let half_f = (kernel.0 - 1) * dilation.0 / 2;
            LayerPad {
                name,
                kernel,
                dilation,
                left_t: total - future,
                right_t: future,
                left_f: half_f,
                right_f: half_f,
                clip_right: total - future,
            }
        })
        .collect();
    Ok(PadPlan { layers })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptiveField {
    pub past_frames: usize,
    pub future_frames: usize,
    pub freq_span: usize,
}

impl ReceptiveField {
    pub fn span_frames(&self) -> usize {
        self.past_frames + self.future_frames + 1
    }
}

/// The deepest path runs through every spatial layer, so the field is the
/// plain sum of per-layer extents.
pub fn receptive_field(cfg: &ModelConfig) -> Result<ReceptiveField> {
    let plan = plan_padding(cfg)?;
    Ok(ReceptiveField {
        past_frames: plan.past_frames(),
        future_frames: plan.future_frames(),
        freq_span: 1 + plan
            .layers
            .iter()
            .map(|l| (l.kernel.0 - 1) * l.dilation.0)
            .sum::<usize>(),
    })
}

/// Channels entering the first convolution of global dilated block `index`.
pub fn dilated_input_channels(cfg: &ModelConfig, index: usize) -> usize {
    dense_sources(cfg, index).len() * cfg.block_channels
}

/// Node indices concatenated to form the input of global dilated block
/// `index`. Node 0 is the input-module output, node `k + 1` the output of
/// dilated block `k`.
pub fn dense_sources(cfg: &ModelConfig, index: usize) -> Vec<usize> {
    let m = cfg.dilated_blocks_per_repeat;
    let (r, n) = (index / m, index % m);
    let repeat_input: Vec<usize> = if cfg.dense_inter {
        (0..=r).map(|q| q * m).collect()
    } else {
        vec![r * m]
    };
    if cfg.dense_intra {
        repeat_input
            .into_iter()
            .chain((0..n).map(|j| r * m + j + 1))
            .collect()
    } else if n == 0 {
        repeat_input
    } else {
        vec![index]
    }
}

/// Learnable scalars: convolution weights (no biases), batch-norm scale and
/// shift, one PReLU slope per activation layer.
pub fn param_count(cfg: &ModelConfig) -> usize {
    let c_in = cfg.input_channels();
    let b = cfg.block_channels;
    let h = cfg.bottleneck_channels;
    let input = 2 * c_in + c_in * b * cfg.input_kernel.0 * cfg.input_kernel.1;
    let dilated_conv = if cfg.depthwise_dilated {
        h * cfg.dilated_kernel.0 * cfg.dilated_kernel.1
    } else {
        h * h * cfg.dilated_kernel.0 * cfg.dilated_kernel.1
    };
    let blocks: usize = (0..cfg.total_dilated_blocks())
        .map(|k| dilated_input_channels(cfg, k) * h + 1 + 2 * h + dilated_conv + 1 + 2 * h + h * b)
        .sum();
    let output = b * c_in + 1;
    input + blocks + output
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn causal_three_tap_pads_left_two() {
        let cfg = ModelConfig::tfcn()
            .with_blocks(1, 1)
            .with_causality(CausalityMode::Causal);
        let plan = plan_padding(&cfg).unwrap();
        let l = plan.dilated(0);
        assert_eq!((l.left_t, l.right_t, l.clip_right), (2, 0, 2));
        assert_eq!((l.left_f, l.right_f), (1, 1));
    }

    #[test]
    fn tfcn_non_causal_future_is_1023() {
        let plan = plan_padding(&ModelConfig::tfcn()).unwrap();
        assert_eq!(plan.input().right_t, 3);
        assert_eq!(plan.future_frames(), 1023);
        assert_eq!(plan.past_frames(), 1023);
        assert_eq!(max_look_ahead(&ModelConfig::tfcn()), 1023);
    }

    #[test]
    fn semi_causal_19_allocation() {
        let cfg = ModelConfig::tfcn().with_causality(CausalityMode::SemiCausal {
            look_ahead_frames: 19,
        });
        let plan = plan_padding(&cfg).unwrap();
        let rights: Vec<usize> = plan.layers.iter().map(|l| l.right_t).collect();
        assert_eq!(&rights[..7], &[3, 1, 2, 4, 8, 1, 0]);
        assert!(rights[7..].iter().all(|&r| r == 0));
        assert_eq!(plan.future_frames(), 19);
        for l in &plan.layers {
            assert_eq!(l.total_t(), (l.kernel.1 - 1) * l.dilation.1);
        }
    }

    #[test]
    fn look_ahead_beyond_maximum_rejected() {
        let cfg = ModelConfig::tfcn().with_causality(CausalityMode::SemiCausal {
            look_ahead_frames: 1024,
        });
        assert!(matches!(
            plan_padding(&cfg),
            Err(Error::LookAhead { requested: 1024, max: 1023 })
        ));
    }

    #[test]
    fn receptive_fields() {
        let rf = receptive_field(&ModelConfig::tfcn()).unwrap();
        assert_eq!((rf.past_frames, rf.future_frames, rf.span_frames()), (1023, 1023, 2047));
        let causal = receptive_field(&ModelConfig::tfcn().with_causality(CausalityMode::Causal)).unwrap();
        assert_eq!((causal.past_frames, causal.future_frames), (2046, 0));
        let tiny = receptive_field(&ModelConfig::tfcn().with_blocks(1, 1)).unwrap();
        assert_eq!((tiny.past_frames, tiny.future_frames), (4, 4));
    }

    #[test]
    fn tfcn_parameter_count() {
        let n = param_count(&ModelConfig::tfcn());
        assert_eq!(n, 92_803);
    }

    #[test]
    fn tfcn_d_dense_widths() {
        let cfg = ModelConfig::tfcn_d();
        for r in 0..4 {
            for n in 0..8 {
                assert_eq!(dilated_input_channels(&cfg, r * 8 + n), 16 * (r + n + 1));
            }
        }
        assert_eq!(param_count(&cfg), 1_417_859);
    }

    #[test]
    fn plain_chain_sources() {
        let cfg = ModelConfig::tfcn().with_blocks(2, 3);
        let s: Vec<Vec<usize>> = (0..6).map(|k| dense_sources(&cfg, k)).collect();
        assert_eq!(s, vec![vec![0], vec![1], vec![2], vec![3], vec![4], vec![5]]);
        let d = ModelConfig::tfcn_d().with_blocks(2, 3);
        assert_eq!(dense_sources(&d, 4), vec![0, 3, 4]);
    }
}
