//! The LMFCA-Net architecture.

pub mod config;
pub mod fca;
pub mod model;
pub mod profile;

pub use config::{FcaKind, ModelConfig, SkipFusion, TrunkExpand, UnitKind, Variant};
pub use fca::{fca_attention_decoupled, fca_attention_dense, fca_branch, DenseFcaWeights};
pub use model::{bottleneck_block, fca_block, model_forward, sandglass_unit};
pub use profile::{
    count_macs_flops, dense_fca_macs, declare_params, fca_attention_cost, init_params, LayerCost, ParamDecl, Profile,
    Profiler,
};
