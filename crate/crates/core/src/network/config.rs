use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// 1-D temporal network with frequency bins as channels.
    #[serde(rename = "TCN_LPS")]
    TcnLps,
    /// 2-D network with depth-wise dilated convolutions.
    #[serde(rename = "TFCN")]
    Tfcn,
    /// 2-D network with full dilated convolutions and dense connections.
    #[serde(rename = "TFCN_D")]
    TfcnD,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::TcnLps => "TCN_LPS",
            Variant::Tfcn => "TFCN",
            Variant::TfcnD => "TFCN_D",
        })
    }
}

/// How much future context the network may see.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CausalityMode {
    #[default]
    NonCausal,
    Causal,
    SemiCausal { look_ahead_frames: usize },
}

impl CausalityMode {
    /// Future-frame budget; `None` means symmetric (non-causal) context.
    pub fn budget(&self) -> Option<usize> {
        match *self {
            CausalityMode::NonCausal => None,
            CausalityMode::Causal => Some(0),
            CausalityMode::SemiCausal { look_ahead_frames } => Some(look_ahead_frames),
        }
    }
}

impl std::fmt::Display for CausalityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CausalityMode::NonCausal => f.write_str("non-causal"),
            CausalityMode::Causal => f.write_str("causal"),
            CausalityMode::SemiCausal { look_ahead_frames } => {
                write!(f, "semi-causal({look_ahead_frames})")
            }
        }
    }
}

impl std::str::FromStr for CausalityMode {
    type Err = Error;

    /// Accepts `non-causal`, `causal` or `semi:<frames>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "non-causal" | "noncausal" | "non_causal" => Ok(CausalityMode::NonCausal),
            "causal" => Ok(CausalityMode::Causal),
            other => other
                .strip_prefix("semi:")
                .and_then(|n| n.parse().ok())
                .map(|look_ahead_frames| CausalityMode::SemiCausal { look_ahead_frames })
                .ok_or_else(|| Error::Config(format!("unknown causality mode `{s}`"))),
        }
    }
}

/// Architecture description. `kernel` pairs are `(freq, time)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub repeated_blocks: usize,
    pub dilated_blocks_per_repeat: usize,
    pub block_channels: usize,
    pub bottleneck_channels: usize,
    pub input_kernel: (usize, usize),
    pub dilated_kernel: (usize, usize),
    pub dilation_base: usize,
    pub freq_bins: usize,
    pub causality: CausalityMode,
    pub dense_intra: bool,
    pub dense_inter: bool,
    pub depthwise_dilated: bool,
}

impl ModelConfig {
    pub fn tfcn() -> Self {
        ModelConfig {
            variant: Variant::Tfcn,
            repeated_blocks: 4,
            dilated_blocks_per_repeat: 8,
            block_channels: 16,
            bottleneck_channels: 64,
            input_kernel: (5, 7),
            dilated_kernel: (3, 3),
            dilation_base: 2,
            freq_bins: 256,
            causality: CausalityMode::NonCausal,
            dense_intra: false,
            dense_inter: false,
            depthwise_dilated: true,
        }
    }

    pub fn tfcn_d() -> Self {
        ModelConfig {
            variant: Variant::TfcnD,
            dense_intra: true,
            dense_inter: true,
            depthwise_dilated: false,
            ..Self::tfcn()
        }
    }

    /// The 1-D network: frequency bins become input channels and every
    /// kernel collapses to a single frequency tap.
    pub fn tcn_lps() -> Self {
        ModelConfig {
            variant: Variant::TcnLps,
            block_channels: 256,
            bottleneck_channels: 512,
            input_kernel: (1, 3),
            dilated_kernel: (1, 3),
            ..Self::tfcn()
        }
    }

    pub fn preset(variant: Variant) -> Self {
        match variant {
            Variant::TcnLps => Self::tcn_lps(),
            Variant::Tfcn => Self::tfcn(),
            Variant::TfcnD => Self::tfcn_d(),
        }
    }

    pub fn with_causality(mut self, causality: CausalityMode) -> Self {
        self.causality = causality;
        self
    }

    pub fn with_blocks(mut self, repeated: usize, dilated: usize) -> Self {
        self.repeated_blocks = repeated;
        self.dilated_blocks_per_repeat = dilated;
        self
    }

    pub fn with_freq_bins(mut self, bins: usize) -> Self {
        self.freq_bins = bins;
        self
    }

    pub fn total_dilated_blocks(&self) -> usize {
        self.repeated_blocks * self.dilated_blocks_per_repeat
    }

    /// `(d_f, d_t)` of dilated block `n` within its repeated block.
    pub fn dilation(&self, n: usize) -> (usize, usize) {
        let d = self.dilation_base.pow(n as u32);
        match self.variant {
            Variant::TcnLps => (1, d),
            _ => (d, d),
        }
    }

    /// Channels seen by the network's convolutions at the input: one LPS
    /// plane for the 2-D variants, one channel per bin for the 1-D network.
    pub fn input_channels(&self) -> usize {
        match self.variant {
            Variant::TcnLps => self.freq_bins,
            _ => 1,
        }
    }

    /// Frequency extent of the feature maps.
    pub fn map_freq(&self) -> usize {
        match self.variant {
            Variant::TcnLps => 1,
            _ => self.freq_bins,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self.variant {
            Variant::Tfcn if self.dense_intra || self.dense_inter || !self.depthwise_dilated => {
                return bad("TFCN requires dense_intra = dense_inter = false and depthwise_dilated = true".into())
            }
            Variant::TfcnD if !self.dense_intra || !self.dense_inter || self.depthwise_dilated => {
                return bad("TFCN_D requires dense_intra = dense_inter = true and depthwise_dilated = false".into())
            }
            Variant::TcnLps if self.input_kernel.0 != 1 || self.dilated_kernel.0 != 1 => {
                return bad("TCN_LPS kernels must have a single frequency tap".into())
            }
            _ => {}
        }
        if self.repeated_blocks == 0 || self.dilated_blocks_per_repeat == 0 {
            return bad("at least one repeated and one dilated block are required".into());
        }
        if self.block_channels == 0 || self.bottleneck_channels == 0 || self.freq_bins == 0 {
            return bad("channel counts and freq_bins must be positive".into());
        }
        if self.dilation_base == 0 {
            return bad("dilation_base must be positive".into());
        }
        for (name, k) in [("input_kernel", self.input_kernel), ("dilated_kernel", self.dilated_kernel)] {
            if k.0 % 2 == 0 || k.1 % 2 == 0 {
                return bad(format!("{name} must be odd on both axes, got {k:?}"));
            }
        }
        Ok(())
    }
}
