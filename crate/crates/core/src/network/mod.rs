//! The enhancement network: configuration, padding plan, the realized model
//! with its backward pass, frame-by-frame streaming, causality probes and
//! checkpoints.

pub mod checkpoint;
mod config;
mod model;
mod plan;
pub mod probe;
mod stream;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, EntryKind, ManifestEntry, CHECKPOINT_VERSION,
};
pub use config::{CausalityMode, ModelConfig, Variant};
pub use model::{
    build_model, lps_to_tensor, passthrough_model, tensor_to_lps, Conv, DilatedBlock, Gradients, Model, Tape,
    TensorInfo, PRELU_INIT,
};
pub use plan::{
    dense_sources, dilated_input_channels, max_look_ahead, param_count, plan_padding,
    receptive_field, LayerPad, PadPlan, ReceptiveField,
};
pub use probe::{probe_causality, probe_receptive_field, LeakReport, ProbedField};
pub use stream::StreamingModel;
