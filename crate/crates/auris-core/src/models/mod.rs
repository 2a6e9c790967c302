//! Model family: serializable network descriptions, the reference
//! architectures, the three-branch encoder with its branch combiner, the
//! decoder heads (MLP, mixture of experts, random forest), and the
//! two-level label hierarchy.

mod builders;
mod combine;
mod decoder;
mod encoder;
mod forest;
mod hierarchy;
mod spec;

pub use builders::{build_cdnn_baseline, build_resp_cnn_moe, build_student};
pub use combine::{combine, CombinerKind, LinParams};
pub use decoder::{
    build_decoder, decoder_network_spec, moe_forward, moe_gate_probs, Decoder, DecoderKind,
    DecoderSpec,
};
pub use encoder::{
    build_encoder, extract_embedding, EncoderModel, EncoderOutput, EncoderSpec, EncoderTrace,
    BRANCH_TAGS, EMBED_WIDTH,
};
pub use forest::{rfc_predict, rfc_train, rfc_train_with, ForestModel, RfcConfig};
pub use hierarchy::{
    hierarchical_pick, hierarchical_predict, standard_scene_groups, HierarchyModel, HierarchySpec,
};
pub use spec::NetworkSpec;
