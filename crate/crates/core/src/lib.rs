//! Depth-gated residual super-resolution inference on the CPU.
//!
//! A small adapter network predicts, for every low-resolution position, how
//! many residual blocks that position needs. Blocks beyond that depth are
//! skipped by dropping the position's row from the im2col matrix, so the
//! work done scales with the average predicted depth.

pub mod adapter;
pub mod attention;
pub mod conv;
pub mod error;
pub mod gating;
pub mod io;
pub mod layers;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod reference;
pub mod report;
pub mod resize;
pub mod tensor;

pub use adapter::{adapter_forward, average_depth, AdapterWeights};
pub use attention::{channel_attention_apply, CaWeights, Pooling};
pub use conv::{conv_lowered, count_macs, direct_conv, im2col, ConvSpec, LoweredMatrix, PadMode, Support};
pub use error::{Error, Result};
pub use gating::{
    dilate_support, gate_coefficient, gated_residual_block, masks_from_depth, trunk_forward, BlockMask,
    CaPool, DepthMap, ExecMode,
};
pub use io::weights::{RawTensor, WeightStore};
pub use model::{DepthSource, ForwardOptions, ForwardOutput, Model, ModelConfig, Preset};
pub use report::{EfficiencyReport, LayerMacs};
pub use tensor::{Shape, Tensor};
