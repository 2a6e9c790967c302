//! Back-end decoders that classify combined 256-wide embeddings.
//!
//! Three kinds: a three-layer MLP, the same trunk with a mixture-of-experts
//! head, and a random regression forest (see [`crate::models::forest`]).
//! The two network kinds compile to ordinary chains; the forest kind is
//! trained separately from data, so building it yields its configuration.

use crate::error::{Error, Result};
use crate::models::forest::RfcConfig;
use crate::models::spec::NetworkSpec;
use crate::nn::{
    moe_mix_infer, softmax_forward, Chain, Element, Initializer, LayerSpec, ParamStore, Shape,
    Tensor,
};

/// Which decoder architecture to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderKind {
    /// Fully-connected 512/1024/1024 trunk with a dense softmax head.
    Mlp,
    /// The same trunk with a gated mixture of `experts` dense layers.
    Moe { experts: usize },
    /// Random regression forest over soft labels.
    Rfc { trees: usize, max_depth: usize },
}

/// A validated decoder description.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderSpec {
    pub kind: DecoderKind,
    pub input_width: usize,
    pub class_count: usize,
}

impl DecoderSpec {
    pub fn new(kind: DecoderKind, input_width: usize, class_count: usize) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::Config(format!(
                "a classifier needs at least 2 classes, got {class_count}"
            )));
        }
        if input_width == 0 {
            return Err(Error::Config("decoder input width must be positive".into()));
        }
        match kind {
            DecoderKind::Moe { experts } if experts == 0 => {
                return Err(Error::Config("mixture head needs at least one expert".into()))
            }
            DecoderKind::Rfc { trees, max_depth } => {
                if trees == 0 {
                    return Err(Error::Config("forest needs at least one tree".into()));
                }
                if max_depth == 0 {
                    return Err(Error::Config("forest depth must be at least 1".into()));
                }
            }
            _ => {}
        }
        Ok(DecoderSpec { kind, input_width, class_count })
    }
}

/// The shared fully-connected trunk: 512 → 1024 → 1024, each followed by
/// ReLU and 30% dropout.
fn mlp_trunk() -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    for width in [512usize, 1024, 1024] {
        layers.push(LayerSpec::Dense { width });
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::Dropout { rate: 0.30 });
    }
    layers
}

/// Network description for the MLP and mixture decoder kinds. The forest
/// kind has no network form.
pub fn decoder_network_spec(spec: &DecoderSpec) -> Result<NetworkSpec> {
    let mut layers = mlp_trunk();
    match spec.kind {
        DecoderKind::Mlp => layers.push(LayerSpec::Dense { width: spec.class_count }),
        DecoderKind::Moe { experts } => {
            layers.push(LayerSpec::MixtureOfExperts { experts, width: spec.class_count })
        }
        DecoderKind::Rfc { .. } => {
            return Err(Error::Config("a forest decoder has no network form".into()))
        }
    }
    layers.push(LayerSpec::Softmax);
    NetworkSpec::new(Shape::Flat { width: spec.input_width }, layers, spec.class_count)
}

/// A built decoder: a runnable network, or the configuration of a forest
/// that still needs data to be trained (see `rfc_train`).
pub enum Decoder<F: Element> {
    Network { spec: NetworkSpec, chain: Chain<F> },
    Forest(RfcConfig),
}

/// Builds a decoder. Network kinds allocate parameters under `prefix` in
/// `store`; the forest kind returns its training configuration.
pub fn build_decoder<F: Element>(
    spec: &DecoderSpec,
    prefix: &str,
    store: &mut ParamStore<F>,
    init: &mut Initializer,
) -> Result<Decoder<F>> {
    match spec.kind {
        DecoderKind::Mlp | DecoderKind::Moe { .. } => {
            let net = decoder_network_spec(spec)?;
            let chain = net.build(prefix, store, init)?;
            Ok(Decoder::Network { spec: net, chain })
        }
        DecoderKind::Rfc { trees, max_depth } => {
            Ok(Decoder::Forest(RfcConfig { trees, max_depth, ..RfcConfig::default() }))
        }
    }
}

/// Standalone mixture-of-experts forward: every expert is a ReLU-activated
/// dense layer `(w, b)`, the gate is a dense-softmax layer, and the result
/// is `softmax(Σ_k g_k·e_k)` — a probability row per batch item.
pub fn moe_forward<F: Element>(
    h: &Tensor<F>,
    experts: &[(Tensor<F>, Tensor<F>)],
    gate: (&Tensor<F>, &Tensor<F>),
) -> Result<Tensor<F>> {
    let ws: Vec<&Tensor<F>> = experts.iter().map(|(w, _)| w).collect();
    let bs: Vec<&Tensor<F>> = experts.iter().map(|(_, b)| b).collect();
    let mixed = moe_mix_infer(h, &ws, &bs, gate.0, gate.1)?;
    softmax_forward(&mixed)
}

/// Gate probabilities of a mixture head for the given input — each row is
/// a point on the probability simplex.
pub fn moe_gate_probs<F: Element>(
    h: &Tensor<F>,
    gate: (&Tensor<F>, &Tensor<F>),
) -> Result<Tensor<F>> {
    softmax_forward(&crate::nn::dense_forward(h, gate.0, gate.1)?)
}
