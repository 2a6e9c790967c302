//! Optimization: losses, mixup augmentation, and the training loops for
//! every model family — plain classifiers, the three-branch encoder with
//! its decoders, the label hierarchy, and teacher–student transfer.
//!
//! All loops share one epoch driver, draw from named random streams
//! derived from a single root seed, and abort loudly on non-finite
//! arithmetic. Runs with equal configurations and seeds reproduce
//! checkpoints bit for bit.

pub mod config;
pub mod distill;
pub mod drive;
pub mod encoder_loop;
pub mod hierarchy_loop;
pub mod losses;
pub mod mixup;

pub use config::{LossKind, TrainConfig};
pub use distill::{distill, embedding_tap, mean_embedding_distance};
pub use drive::{accuracy_percent, train, EpochStats, History};
pub use encoder_loop::{
    encoder_accuracy, encoder_embeddings, train_encoder, train_encoder_then_decoder,
    EncoderDataset, TrainedDecoder, STREAM_NAMES,
};
pub use hierarchy_loop::{train_hierarchy, HierarchyHistory};
pub use losses::{
    embedding_distance, grad_ce, grad_embedding_distance, grad_kl, loss_ce_l2,
    loss_distill, loss_encoder, loss_joint, loss_kl, loss_triplet, squared_distance,
    triplet_mine_batch,
};
pub use mixup::{mixup, mixup_batch, mixup_batch_multi, MixDist, MixupPair};
