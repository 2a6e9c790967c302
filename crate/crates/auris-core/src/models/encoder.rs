//! Three-branch convolutional encoder with per-branch and combined heads.
//!
//! Each spectrogram stream (log-mel, gammatone, constant-Q) feeds its own
//! six-block CNN branch ending in a 256-wide pooled embedding. Every branch
//! carries a small softmax head used for its per-branch loss; a combiner
//! merges the three embeddings into one vector that feeds the main two-layer
//! classification head. The combined embedding doubles as the "high-level
//! feature" consumed by the separate decoder models.

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::builders::push_block_bn_first;
use crate::models::combine::CombinerKind;
use crate::models::spec::{layer_line, shape_line};
use crate::nn::{Chain, Element, Initializer, LayerSpec, ParamId, ParamStore, Shape, Tensor, Trace};

/// Width of every branch embedding and of the combined embedding.
pub const EMBED_WIDTH: usize = 256;

/// Stable tags of the three branches, in order: log-mel, gammatone,
/// constant-Q.
pub const BRANCH_TAGS: [&str; 3] = ["lm", "ga", "cq"];

/// Declarative description of the encoder: three branch layer stacks, the
/// combiner rule, the per-branch head and the combined head.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderSpec {
    input: Shape,
    branches: [Vec<LayerSpec>; 3],
    combiner: CombinerKind,
    branch_head: Vec<LayerSpec>,
    combined_head: Vec<LayerSpec>,
    class_count: usize,
    embed_width: usize,
}

impl EncoderSpec {
    /// Validates a full encoder description: every branch must map the input
    /// to the same flat embedding width, and both heads must take that width
    /// to a softmax over `class_count` values.
    pub fn new(
        input: Shape,
        branches: [Vec<LayerSpec>; 3],
        combiner: CombinerKind,
        branch_head: Vec<LayerSpec>,
        combined_head: Vec<LayerSpec>,
        class_count: usize,
    ) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::Config(format!(
                "a classifier needs at least 2 classes, got {class_count}"
            )));
        }
        let mut widths = [0usize; 3];
        for (i, layers) in branches.iter().enumerate() {
            let mut s = input;
            for spec in layers {
                s = s.apply(spec)?;
            }
            match s {
                Shape::Flat { width } => widths[i] = width,
                other => {
                    return Err(Error::Config(format!(
                        "branch {} must end in a flat embedding, got {other:?}",
                        BRANCH_TAGS[i]
                    )))
                }
            }
        }
        if widths[1] != widths[0] || widths[2] != widths[0] {
            return Err(Error::Config(format!(
                "branch embedding widths differ: {widths:?}"
            )));
        }
        let embed_width = widths[0];
        for (name, layers) in [("branch head", &branch_head), ("combined head", &combined_head)]
        {
            if layers.last() != Some(&LayerSpec::Softmax) {
                return Err(Error::Config(format!("{name} must end with a softmax layer")));
            }
            let mut s = Shape::Flat { width: embed_width };
            for spec in layers {
                s = s.apply(spec)?;
            }
            if s != (Shape::Flat { width: class_count }) {
                return Err(Error::Config(format!(
                    "{name} emits {s:?}, expected a flat width-{class_count} output"
                )));
            }
        }
        Ok(EncoderSpec {
            input,
            branches,
            combiner,
            branch_head,
            combined_head,
            class_count,
            embed_width,
        })
    }

    pub fn input(&self) -> Shape {
        self.input
    }

    pub fn combiner(&self) -> CombinerKind {
        self.combiner
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn embed_width(&self) -> usize {
        self.embed_width
    }

    /// Total trainable parameters across branches, heads and combiner.
    pub fn param_count(&self) -> usize {
        let count_stack = |input: Shape, layers: &[LayerSpec]| -> usize {
            let mut total = 0usize;
            let mut shape = input;
            for spec in layers {
                total += match (spec, shape) {
                    (LayerSpec::Conv { kernel, out_channels }, Shape::Map { channels, .. }) => {
                        kernel.0 * kernel.1 * channels * out_channels + out_channels
                    }
                    (LayerSpec::BatchNorm, Shape::Map { channels, .. }) => 2 * channels,
                    (LayerSpec::Dense { width }, Shape::Flat { width: n_in }) => {
                        width * n_in + width
                    }
                    (
                        LayerSpec::MixtureOfExperts { experts, width },
                        Shape::Flat { width: n_in },
                    ) => experts * (width * n_in + width) + (experts * n_in + experts),
                    _ => 0,
                };
                shape = shape.apply(spec).expect("validated at construction");
            }
            total
        };
        let flat = Shape::Flat { width: self.embed_width };
        let mut total = 0;
        for branch in &self.branches {
            total += count_stack(self.input, branch);
            total += count_stack(flat, &self.branch_head);
        }
        total += count_stack(flat, &self.combined_head);
        if self.combiner == CombinerKind::Lin {
            total += 4 * self.embed_width;
        }
        total
    }

    /// Line-oriented descriptor covering all encoder parts.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        out.push_str("encoder\n");
        out.push_str(&format!("combiner {}\n", self.combiner.tag()));
        out.push_str(&format!("classes {}\n", self.class_count));
        out.push_str(&shape_line("input", self.input));
        out.push('\n');
        for (tag, layers) in BRANCH_TAGS.iter().zip(self.branches.iter()) {
            out.push_str(&format!("[branch {tag}]\n"));
            for spec in layers {
                out.push_str(&layer_line(spec));
                out.push('\n');
            }
        }
        for (name, layers) in
            [("branch-head", &self.branch_head), ("combined-head", &self.combined_head)]
        {
            out.push_str(&format!("[{name}]\n"));
            for spec in layers {
                out.push_str(&layer_line(spec));
                out.push('\n');
            }
        }
        out
    }
}

/// The branch architecture: six BN-led convolution blocks rising from 32 to
/// 256 channels, pooled down to a flat 256-wide embedding.
fn branch_layers() -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    push_block_bn_first(&mut layers, 32, Some(2), false, 0.10);
    push_block_bn_first(&mut layers, 64, Some(2), false, 0.15);
    push_block_bn_first(&mut layers, 128, None, false, 0.20);
    push_block_bn_first(&mut layers, 128, Some(2), false, 0.20);
    push_block_bn_first(&mut layers, 256, None, false, 0.25);
    push_block_bn_first(&mut layers, 256, None, true, 0.25);
    layers
}

/// Builds the standard encoder description: three identical 256-wide
/// branches, a one-layer softmax head per branch, and a 512/1024
/// fully-connected combined head.
pub fn build_encoder(
    class_count: usize,
    input: (usize, usize),
    combiner: CombinerKind,
) -> Result<EncoderSpec> {
    let branch = branch_layers();
    let branch_head = vec![LayerSpec::Dense { width: class_count }, LayerSpec::Softmax];
    let combined_head = vec![
        LayerSpec::Dense { width: 512 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.30 },
        LayerSpec::Dense { width: 1024 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.30 },
        LayerSpec::Dense { width: class_count },
        LayerSpec::Softmax,
    ];
    EncoderSpec::new(
        Shape::Map { freq: input.0, time: input.1, channels: 1 },
        [branch.clone(), branch.clone(), branch],
        combiner,
        branch_head,
        combined_head,
        class_count,
    )
}

/// Identifiers of the linear combiner's parameters in the store.
#[derive(Debug, Clone, Copy)]
struct LinIds {
    w: [ParamId; 3],
    bias: ParamId,
}

/// A compiled encoder: three branch chains, three branch heads, the
/// combiner (with parameters when linear), and the combined head, all over
/// one parameter store.
#[derive(Debug)]
pub struct EncoderModel<F: Element> {
    spec: EncoderSpec,
    branches: [Chain<F>; 3],
    heads: [Chain<F>; 3],
    combined_head: Chain<F>,
    lin: Option<LinIds>,
}

/// Everything a training-mode encoder forward produces.
pub struct EncoderOutput<F: Element> {
    /// Per-branch head probabilities, in branch order.
    pub branch_probs: [Tensor<F>; 3],
    /// Combined-head probabilities.
    pub combined_probs: Tensor<F>,
    /// Per-branch embeddings (batch, embed width).
    pub embeddings: [Tensor<F>; 3],
    /// Combiner output (batch, embed width).
    pub combined: Tensor<F>,
}

/// Backward bookkeeping of one training-mode encoder forward.
pub struct EncoderTrace<F: Element> {
    branches: [Trace<F>; 3],
    heads: [Trace<F>; 3],
    comb: CombTrace<F>,
    combined_head: Trace<F>,
}

/// What the combiner backward pass needs from its forward pass.
enum CombTrace<F: Element> {
    Sum,
    /// Which branch supplied each output element (0, 1 or 2).
    Max { pick: Vec<u8> },
    /// Branch embeddings and the ReLU mask of the pre-activation.
    Lin { xs: [Tensor<F>; 3], mask: Vec<u8> },
}

impl<F: Element> EncoderModel<F> {
    /// Compiles `spec`, allocating all parameters under the `enc.` prefix
    /// in `store`.
    pub fn build(
        spec: &EncoderSpec,
        store: &mut ParamStore<F>,
        init: &mut Initializer,
    ) -> Result<Self> {
        let flat = Shape::Flat { width: spec.embed_width };
        let mut branches = Vec::with_capacity(3);
        let mut heads = Vec::with_capacity(3);
        for (tag, layers) in BRANCH_TAGS.iter().zip(spec.branches.iter()) {
            branches.push(Chain::build(&format!("enc.{tag}"), spec.input, layers, store, init)?);
            heads.push(Chain::build(
                &format!("enc.head_{tag}"),
                flat,
                &spec.branch_head,
                store,
                init,
            )?);
        }
        let lin = if spec.combiner == CombinerKind::Lin {
            let ones = Tensor::from_vec(
                &[spec.embed_width],
                vec![F::one(); spec.embed_width],
            )?;
            let w = [
                store.add("enc.combiner.w_lm", ones.clone()),
                store.add("enc.combiner.w_ga", ones.clone()),
                store.add("enc.combiner.w_cq", ones),
            ];
            let bias = store.add("enc.combiner.bias", Tensor::zeros(&[spec.embed_width]));
            Some(LinIds { w, bias })
        } else {
            None
        };
        let combined_head =
            Chain::build("enc.com", flat, &spec.combined_head, store, init)?;
        let branches: [Chain<F>; 3] =
            branches.try_into().map_err(|_| Error::Input("three branches".into()))?;
        let heads: [Chain<F>; 3] =
            heads.try_into().map_err(|_| Error::Input("three heads".into()))?;
        Ok(EncoderModel { spec: spec.clone(), branches, heads, combined_head, lin })
    }

    pub fn spec(&self) -> &EncoderSpec {
        &self.spec
    }

    /// The three branch chains, in branch order.
    pub fn branch_chains(&self) -> &[Chain<F>; 3] {
        &self.branches
    }

    fn combiner_forward(
        &self,
        store: &ParamStore<F>,
        xs: &[Tensor<F>; 3],
    ) -> Result<(Tensor<F>, CombTrace<F>)> {
        let n = xs[0].numel();
        if xs[1].numel() != n || xs[2].numel() != n {
            return Err(Error::Shape("branch embeddings differ in size".into()));
        }
        match self.spec.combiner {
            CombinerKind::Sum => {
                let mut out = xs[0].clone();
                out.add_assign(&xs[1])?;
                out.add_assign(&xs[2])?;
                Ok((out, CombTrace::Sum))
            }
            CombinerKind::Max => {
                let mut out = xs[0].clone();
                let mut pick = vec![0u8; n];
                for i in 0..n {
                    for b in 1..3usize {
                        let v = xs[b].data()[i];
                        if v > out.data()[i] {
                            out.data_mut()[i] = v;
                            pick[i] = b as u8;
                        }
                    }
                }
                Ok((out, CombTrace::Max { pick }))
            }
            CombinerKind::Lin => {
                let ids = self.lin.expect("lin ids exist for lin combiner");
                let w: Vec<&[F]> = ids.w.iter().map(|id| store.value(*id).data()).collect();
                let bias = store.value(ids.bias).data();
                let width = self.spec.embed_width;
                let bsz = xs[0].batch();
                let mut out = Tensor::zeros(xs[0].shape());
                let mut mask = vec![0u8; n];
                for bi in 0..bsz {
                    for j in 0..width {
                        let idx = bi * width + j;
                        let pre = xs[0].data()[idx] * w[0][j]
                            + xs[1].data()[idx] * w[1][j]
                            + xs[2].data()[idx] * w[2][j]
                            + bias[j];
                        if pre > F::zero() {
                            out.data_mut()[idx] = pre;
                            mask[idx] = 1;
                        }
                    }
                }
                Ok((out, CombTrace::Lin { xs: xs.clone(), mask }))
            }
        }
    }

    fn combiner_backward(
        &self,
        store: &mut ParamStore<F>,
        trace: &CombTrace<F>,
        d_out: &Tensor<F>,
    ) -> Result<[Tensor<F>; 3]> {
        match trace {
            CombTrace::Sum => Ok([d_out.clone(), d_out.clone(), d_out.clone()]),
            CombTrace::Max { pick } => {
                let mut dxs = [
                    Tensor::zeros(d_out.shape()),
                    Tensor::zeros(d_out.shape()),
                    Tensor::zeros(d_out.shape()),
                ];
                for (i, (&p, &d)) in pick.iter().zip(d_out.data().iter()).enumerate() {
                    dxs[p as usize].data_mut()[i] = d;
                }
                Ok(dxs)
            }
            CombTrace::Lin { xs, mask } => {
                let ids = self.lin.expect("lin ids exist for lin combiner");
                let width = self.spec.embed_width;
                let bsz = d_out.batch();
                let mut dxs = [
                    Tensor::zeros(d_out.shape()),
                    Tensor::zeros(d_out.shape()),
                    Tensor::zeros(d_out.shape()),
                ];
                let mut dws =
                    [Tensor::zeros(&[width]), Tensor::zeros(&[width]), Tensor::zeros(&[width])];
                let mut dbias = Tensor::zeros(&[width]);
                for b in 0..3usize {
                    let w = store.value(ids.w[b]).data().to_vec();
                    for bi in 0..bsz {
                        for j in 0..width {
                            let idx = bi * width + j;
                            if mask[idx] == 0 {
                                continue;
                            }
                            let d = d_out.data()[idx];
                            dxs[b].data_mut()[idx] = d * w[j];
                            dws[b].data_mut()[j] =
                                dws[b].data()[j] + d * xs[b].data()[idx];
                        }
                    }
                }
                for bi in 0..bsz {
                    for j in 0..width {
                        let idx = bi * width + j;
                        if mask[idx] == 1 {
                            dbias.data_mut()[j] = dbias.data()[j] + d_out.data()[idx];
                        }
                    }
                }
                for (id, dw) in ids.w.iter().zip(dws.iter()) {
                    store.accumulate_grad(*id, dw)?;
                }
                store.accumulate_grad(ids.bias, &dbias)?;
                Ok(dxs)
            }
        }
    }

    /// Training-mode forward over the three spectrogram streams (one input
    /// tensor per branch, identical shapes).
    pub fn forward_train(
        &self,
        store: &mut ParamStore<F>,
        inputs: [&Tensor<F>; 3],
        rng: &mut impl Rng,
    ) -> Result<(EncoderOutput<F>, EncoderTrace<F>)> {
        let mut embeddings = Vec::with_capacity(3);
        let mut branch_traces = Vec::with_capacity(3);
        let mut branch_probs = Vec::with_capacity(3);
        let mut head_traces = Vec::with_capacity(3);
        for i in 0..3 {
            let (emb, tr) = self.branches[i].forward_train(store, inputs[i], rng)?;
            let (p, htr) = self.heads[i].forward_train(store, &emb, rng)?;
            embeddings.push(emb);
            branch_traces.push(tr);
            branch_probs.push(p);
            head_traces.push(htr);
        }
        let embeddings: [Tensor<F>; 3] =
            embeddings.try_into().map_err(|_| Error::Input("three embeddings".into()))?;
        let (combined, comb_trace) = self.combiner_forward(store, &embeddings)?;
        let (combined_probs, com_tr) =
            self.combined_head.forward_train(store, &combined, rng)?;
        let output = EncoderOutput {
            branch_probs: branch_probs
                .try_into()
                .map_err(|_| Error::Input("three branch heads".into()))?,
            combined_probs,
            embeddings,
            combined,
        };
        let trace = EncoderTrace {
            branches: branch_traces
                .try_into()
                .map_err(|_| Error::Input("three branch traces".into()))?,
            heads: head_traces
                .try_into()
                .map_err(|_| Error::Input("three head traces".into()))?,
            comb: comb_trace,
            combined_head: com_tr,
        };
        Ok((output, trace))
    }

    /// Backward pass: `d_branch` are gradients w.r.t. the three branch-head
    /// probability outputs, `d_combined` w.r.t. the combined-head output.
    /// Parameter gradients accumulate into `store`.
    pub fn backward(
        &self,
        store: &mut ParamStore<F>,
        trace: &EncoderTrace<F>,
        d_branch: [&Tensor<F>; 3],
        d_combined: &Tensor<F>,
    ) -> Result<()> {
        let d_comb_emb =
            self.combined_head.backward(store, &trace.combined_head, d_combined)?;
        let d_from_comb = self.combiner_backward(store, &trace.comb, &d_comb_emb)?;
        for i in 0..3 {
            let mut d_emb = self.heads[i].backward(store, &trace.heads[i], d_branch[i])?;
            d_emb.add_assign(&d_from_comb[i])?;
            self.branches[i].backward(store, &trace.branches[i], &d_emb)?;
        }
        Ok(())
    }

    /// Inference-mode embeddings of the three branches.
    fn infer_embeddings(
        &self,
        store: &ParamStore<F>,
        inputs: [&Tensor<F>; 3],
    ) -> Result<[Tensor<F>; 3]> {
        Ok([
            self.branches[0].forward_infer(store, inputs[0])?,
            self.branches[1].forward_infer(store, inputs[1])?,
            self.branches[2].forward_infer(store, inputs[2])?,
        ])
    }

    /// Inference-mode combined-head probabilities (the default prediction
    /// path; the branch heads only shape the training losses).
    pub fn forward_infer(
        &self,
        store: &ParamStore<F>,
        inputs: [&Tensor<F>; 3],
    ) -> Result<Tensor<F>> {
        let embs = self.infer_embeddings(store, inputs)?;
        let (combined, _) = self.combiner_forward(store, &embs)?;
        self.combined_head.forward_infer(store, &combined)
    }

    /// Inference-mode probabilities of all four heads (three branch heads
    /// plus the combined head).
    pub fn infer_all_heads(
        &self,
        store: &ParamStore<F>,
        inputs: [&Tensor<F>; 3],
    ) -> Result<([Tensor<F>; 3], Tensor<F>)> {
        let embs = self.infer_embeddings(store, inputs)?;
        let branch_probs = [
            self.heads[0].forward_infer(store, &embs[0])?,
            self.heads[1].forward_infer(store, &embs[1])?,
            self.heads[2].forward_infer(store, &embs[2])?,
        ];
        let (combined, _) = self.combiner_forward(store, &embs)?;
        let combined_probs = self.combined_head.forward_infer(store, &combined)?;
        Ok((branch_probs, combined_probs))
    }
}

/// Inference-mode combined embedding for a batch of patches: branch
/// embeddings merged by the combiner — the vector the decoder models and
/// the hierarchy consume.
pub fn extract_embedding<F: Element>(
    model: &EncoderModel<F>,
    store: &ParamStore<F>,
    inputs: [&Tensor<F>; 3],
) -> Result<Tensor<F>> {
    let embs = model.infer_embeddings(store, inputs)?;
    let (combined, _) = model.combiner_forward(store, &embs)?;
    Ok(combined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::combine::combine;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pseudo_f32(n: usize, seed: u64) -> Vec<f32> {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        (0..n)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) as f32
            })
            .collect()
    }

    fn small_model(
        combiner: CombinerKind,
    ) -> (EncoderSpec, EncoderModel<f32>, ParamStore<f32>) {
        let spec = build_encoder(4, (16, 16), combiner).unwrap();
        let mut store = ParamStore::new();
        let mut init = Initializer::new(17);
        let model = EncoderModel::build(&spec, &mut store, &mut init).unwrap();
        (spec, model, store)
    }

    fn three_inputs(bsz: usize) -> [Tensor<f32>; 3] {
        [
            Tensor::from_vec(&[bsz, 16, 16, 1], pseudo_f32(bsz * 256, 101)).unwrap(),
            Tensor::from_vec(&[bsz, 16, 16, 1], pseudo_f32(bsz * 256, 102)).unwrap(),
            Tensor::from_vec(&[bsz, 16, 16, 1], pseudo_f32(bsz * 256, 103)).unwrap(),
        ]
    }

    #[test]
    fn branches_emit_256_wide_embeddings() {
        let (spec, model, _) = small_model(CombinerKind::Sum);
        assert_eq!(spec.embed_width(), EMBED_WIDTH);
        for chain in model.branch_chains() {
            assert_eq!(chain.output_shape(), Shape::Flat { width: EMBED_WIDTH });
        }
    }

    #[test]
    fn branch_shapes_follow_the_table() {
        let spec = build_encoder(10, (128, 128), CombinerKind::Sum).unwrap();
        let mut store: ParamStore<f32> = ParamStore::new();
        let mut init = Initializer::new(1);
        let model = EncoderModel::build(&spec, &mut store, &mut init).unwrap();
        let bounds = model.branch_chains()[0].boundary_shapes();
        crate::models::builders::assert_contains_in_order(
            &bounds,
            &[
                Shape::Map { freq: 64, time: 64, channels: 32 },
                Shape::Map { freq: 32, time: 32, channels: 64 },
                Shape::Map { freq: 32, time: 32, channels: 128 },
                Shape::Map { freq: 16, time: 16, channels: 128 },
                Shape::Map { freq: 16, time: 16, channels: 256 },
                Shape::Flat { width: 256 },
            ],
        );
    }

    #[test]
    fn branches_have_independent_parameters() {
        let (_, _, store) = small_model(CombinerKind::Sum);
        // Same layer in each branch resolves to three different tensors.
        let ids: Vec<_> = BRANCH_TAGS
            .iter()
            .map(|tag| store.find(&format!("enc.{tag}.l01.conv.w")).unwrap())
            .collect();
        assert!(ids[0] != ids[1] && ids[1] != ids[2] && ids[0] != ids[2]);
        // And their initial draws differ (independent initialization).
        assert_ne!(store.value(ids[0]).data(), store.value(ids[1]).data());
        assert_ne!(store.value(ids[1]).data(), store.value(ids[2]).data());
    }

    #[test]
    fn forward_emits_four_probability_rows() {
        let (_, model, mut store) = small_model(CombinerKind::Sum);
        let inputs = three_inputs(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (out, _) = model
            .forward_train(&mut store, [&inputs[0], &inputs[1], &inputs[2]], &mut rng)
            .unwrap();
        for probs in out.branch_probs.iter().chain([&out.combined_probs]) {
            assert_eq!(probs.shape(), &[2, 4]);
            for bi in 0..2 {
                let sum: f32 = probs.item(bi).iter().sum();
                assert!((sum - 1.0).abs() < 1e-6, "head row sums to {sum}");
            }
        }
    }

    #[test]
    fn embedding_is_deterministic_and_equals_the_manual_combine() {
        for kind in [CombinerKind::Sum, CombinerKind::Max, CombinerKind::Lin] {
            let (_, model, store) = small_model(kind);
            let inputs = three_inputs(2);
            let refs = [&inputs[0], &inputs[1], &inputs[2]];
            let e1 = extract_embedding(&model, &store, refs).unwrap();
            let e2 = extract_embedding(&model, &store, refs).unwrap();
            assert_eq!(e1.data(), e2.data(), "inference must be deterministic");
            assert_eq!(e1.shape(), &[2, EMBED_WIDTH]);

            // Manual route: branch embeddings then the elementwise rule.
            let embs = model.infer_embeddings(&store, refs).unwrap();
            let params = model.lin.map(|ids| crate::models::combine::LinParams {
                w_lm: store.value(ids.w[0]).data().to_vec(),
                w_ga: store.value(ids.w[1]).data().to_vec(),
                w_cq: store.value(ids.w[2]).data().to_vec(),
                bias: store.value(ids.bias).data().to_vec(),
            });
            for bi in 0..2 {
                let want = combine(
                    embs[0].item(bi),
                    embs[1].item(bi),
                    embs[2].item(bi),
                    kind,
                    params.as_ref(),
                )
                .unwrap();
                for (a, b) in e1.item(bi).iter().zip(want.iter()) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn zeroed_parameters_still_give_finite_reproducible_embeddings() {
        let (_, model, mut store) = small_model(CombinerKind::Sum);
        for id in store.ids().collect::<Vec<_>>() {
            store.value_mut(id).fill_zero();
        }
        let inputs = three_inputs(1);
        let refs = [&inputs[0], &inputs[1], &inputs[2]];
        let e1 = extract_embedding(&model, &store, refs).unwrap();
        let e2 = extract_embedding(&model, &store, refs).unwrap();
        assert!(e1.all_finite());
        assert_eq!(e1.data(), e2.data());
    }

    #[test]
    fn spec_counts_lin_combiner_parameters() {
        let sum = build_encoder(4, (16, 16), CombinerKind::Sum).unwrap();
        let lin = build_encoder(4, (16, 16), CombinerKind::Lin).unwrap();
        assert_eq!(lin.param_count(), sum.param_count() + 4 * EMBED_WIDTH);
        // The compiled store holds exactly the declared trainable weights.
        let mut store: ParamStore<f32> = ParamStore::new();
        let mut init = Initializer::new(2);
        EncoderModel::build(&lin, &mut store, &mut init).unwrap();
        let trainable: usize =
            store.iter().filter(|p| p.trainable).map(|p| p.value.numel()).sum();
        assert_eq!(trainable, lin.param_count());
    }

    #[test]
    fn describe_lists_all_sections() {
        let spec = build_encoder(4, (16, 16), CombinerKind::Lin).unwrap();
        let text = spec.describe();
        for needle in
            ["encoder", "combiner lin", "classes 4", "[branch lm]", "[branch ga]",
             "[branch cq]", "[branch-head]", "[combined-head]"]
        {
            assert!(text.contains(needle), "descriptor lacks `{needle}`:\n{text}");
        }
    }
}
