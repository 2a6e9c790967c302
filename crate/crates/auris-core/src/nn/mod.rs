//! Minimal trainable neural-network engine.
//!
//! Exactly the layer set the model family needs — 2-D convolution, batch
//! norm, ReLU, dropout, average/global-average pooling, dense, softmax —
//! with analytic backward passes, Adam, seeded Gaussian initialization and
//! named-tensor checkpoints. The engine is generic over [`Element`] so the
//! gradient-check harness can run the identical code in `f64`.

mod chain;
mod gemm;
mod init;
mod layers;
mod scalar;
mod store;
mod tensor;

pub mod checkpoint;

pub use chain::{Chain, LayerSpec, Shape, Trace};
pub use init::{init_normal, Initializer, INIT_VARIANCE};
pub use layers::{
    avg_pool_backward, avg_pool_forward, batch_norm_backward, batch_norm_infer, batch_norm_train,
    bn_update_running, conv_backward, conv_forward, dense_backward, dense_forward,
    dropout_backward, dropout_train, global_avg_pool_backward, global_avg_pool_forward,
    moe_mix_backward, moe_mix_forward, moe_mix_infer, relu_backward, relu_forward,
    softmax_backward, softmax_forward, BnBatchStats, Mode, MoeCache, BN_EPS, BN_MOMENTUM,
};
pub use scalar::Element;
pub use store::{AdamConfig, Param, ParamId, ParamStore};
pub use tensor::Tensor;
