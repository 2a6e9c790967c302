//! Sequential network container.
//!
//! A [`Chain`] compiles a list of [`LayerSpec`]s into parameterized layers
//! (allocated in a shared [`ParamStore`]), checks shapes as it goes, and
//! provides training-mode forward (with a backward trace), inference-mode
//! forward, and the analytic backward pass. Composite models (multi-branch
//! encoders, mixture heads) are assembled from several chains over one store.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::init::Initializer;
use crate::nn::layers::{
    avg_pool_backward, avg_pool_forward, batch_norm_backward, batch_norm_infer, batch_norm_train,
    bn_update_running, conv_backward, conv_forward, dense_backward, dense_forward,
    dropout_backward, dropout_train, global_avg_pool_backward, global_avg_pool_forward,
    moe_mix_backward, moe_mix_forward, moe_mix_infer, relu_backward, relu_forward,
    softmax_backward, softmax_forward, BnBatchStats, MoeCache,
};
use crate::nn::scalar::Element;
use crate::nn::store::{ParamId, ParamStore};
use crate::nn::tensor::Tensor;

/// One layer in a network description.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    /// 2-D convolution, zero padding, stride 1, odd kernel.
    Conv { kernel: (usize, usize), out_channels: usize },
    /// Per-channel batch normalization with learnable scale and shift.
    BatchNorm,
    Relu,
    /// Unscaled Bernoulli(1−rate) masking at training time, identity at
    /// inference.
    Dropout { rate: f64 },
    /// k×k average pooling with stride k.
    AvgPool { size: usize },
    /// Collapses (freq, time) to one value per channel.
    GlobalAvgPool,
    /// Fully-connected layer onto `width` outputs.
    Dense { width: usize },
    /// Gated sum of `experts` ReLU-activated dense layers, each onto `width`
    /// outputs; the gate is a dense-softmax layer over the same input.
    MixtureOfExperts { experts: usize, width: usize },
    /// Row-wise stabilized softmax.
    Softmax,
}

/// Activation shape flowing between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// Feature map: (freq, time, channels), batch excluded.
    Map { freq: usize, time: usize, channels: usize },
    /// Flat vector of the given width, batch excluded.
    Flat { width: usize },
}

impl Shape {
    /// Shape after applying `spec`, or an error if the layer cannot accept
    /// this shape.
    pub fn apply(&self, spec: &LayerSpec) -> Result<Shape> {
        match (spec, *self) {
            (LayerSpec::Conv { kernel, out_channels }, Shape::Map { freq, time, .. }) => {
                if kernel.0 % 2 == 0 || kernel.1 % 2 == 0 {
                    return Err(Error::Shape(format!(
                        "convolution kernel {kernel:?} must be odd-sized"
                    )));
                }
                Ok(Shape::Map { freq, time, channels: *out_channels })
            }
            (LayerSpec::BatchNorm, s @ Shape::Map { .. }) => Ok(s),
            (LayerSpec::Relu, s) => Ok(s),
            (LayerSpec::Dropout { rate }, s) => {
                if !(0.0..1.0).contains(rate) {
                    return Err(Error::Range(format!("dropout rate {rate} outside [0, 1)")));
                }
                Ok(s)
            }
            (LayerSpec::AvgPool { size }, Shape::Map { freq, time, channels }) => {
                if *size == 0 || freq % size != 0 || time % size != 0 {
                    return Err(Error::Shape(format!(
                        "{size}×{size} average pooling does not tile a {freq}×{time} map"
                    )));
                }
                Ok(Shape::Map { freq: freq / size, time: time / size, channels })
            }
            (LayerSpec::GlobalAvgPool, Shape::Map { channels, .. }) => {
                Ok(Shape::Flat { width: channels })
            }
            (LayerSpec::Dense { width }, Shape::Flat { .. }) => Ok(Shape::Flat { width: *width }),
            (LayerSpec::MixtureOfExperts { experts, width }, Shape::Flat { .. }) => {
                if *experts == 0 {
                    return Err(Error::Range("mixture needs at least one expert".into()));
                }
                Ok(Shape::Flat { width: *width })
            }
            (LayerSpec::Softmax, s @ Shape::Flat { .. }) => Ok(s),
            (spec, shape) => {
                Err(Error::Shape(format!("layer {spec:?} cannot accept activation {shape:?}")))
            }
        }
    }

    /// Shape as tensor dimensions with a leading batch dimension.
    pub fn dims_with_batch(&self, batch: usize) -> Vec<usize> {
        match *self {
            Shape::Map { freq, time, channels } => vec![batch, freq, time, channels],
            Shape::Flat { width } => vec![batch, width],
        }
    }
}

#[derive(Debug, Clone)]
enum Step {
    Conv { w: ParamId, b: ParamId },
    BatchNorm { gamma: ParamId, beta: ParamId, r_mean: ParamId, r_var: ParamId },
    Relu,
    Dropout { rate: f64 },
    AvgPool { size: usize },
    GlobalAvgPool,
    Dense { w: ParamId, b: ParamId },
    Moe { experts: Vec<(ParamId, ParamId)>, gate_w: ParamId, gate_b: ParamId },
    Softmax,
}

/// What each layer's backward pass needs from its forward pass.
#[derive(Debug)]
enum StepCache<F: Element> {
    Input(Tensor<F>),
    Bn { input: Tensor<F>, stats: BnBatchStats<F> },
    Mask(Vec<u8>),
    InShape(Vec<usize>),
    Moe(MoeCache<F>),
    SoftmaxOut(Tensor<F>),
}

/// Backward trace of one training-mode forward pass.
pub struct Trace<F: Element> {
    caches: Vec<StepCache<F>>,
}

/// A compiled sequential network. Parameters live in the [`ParamStore`]
/// the chain was built against.
#[derive(Debug, Clone)]
pub struct Chain<F: Element> {
    specs: Vec<LayerSpec>,
    steps: Vec<Step>,
    input: Shape,
    output: Shape,
    _marker: std::marker::PhantomData<F>,
}

impl<F: Element> Chain<F> {
    /// Compiles `layers` for activations of shape `input`, allocating
    /// parameters under `prefix` in `store`. Weight kernels draw from
    /// `init`; biases start at zero, BN scale at one, BN shift at zero.
    pub fn build(
        prefix: &str,
        input: Shape,
        layers: &[LayerSpec],
        store: &mut ParamStore<F>,
        init: &mut Initializer,
    ) -> Result<Self> {
        let mut shape = input;
        let mut steps = Vec::with_capacity(layers.len());
        for (idx, spec) in layers.iter().enumerate() {
            let next = shape.apply(spec)?;
            let step = match (spec, shape) {
                (LayerSpec::Conv { kernel, out_channels }, Shape::Map { channels, .. }) => {
                    let w = store.add(
                        format!("{prefix}.l{idx:02}.conv.w"),
                        init.tensor(&[kernel.0, kernel.1, channels, *out_channels]),
                    );
                    let b = store
                        .add(format!("{prefix}.l{idx:02}.conv.b"), Tensor::zeros(&[*out_channels]));
                    Step::Conv { w, b }
                }
                (LayerSpec::BatchNorm, Shape::Map { channels, .. }) => {
                    let ones = Tensor::from_vec(&[channels], vec![F::one(); channels])?;
                    let gamma = store.add(format!("{prefix}.l{idx:02}.bn.gamma"), ones.clone());
                    let beta =
                        store.add(format!("{prefix}.l{idx:02}.bn.beta"), Tensor::zeros(&[channels]));
                    let r_mean = store
                        .add_state(format!("{prefix}.l{idx:02}.bn.mean"), Tensor::zeros(&[channels]));
                    let r_var = store.add_state(format!("{prefix}.l{idx:02}.bn.var"), ones);
                    Step::BatchNorm { gamma, beta, r_mean, r_var }
                }
                (LayerSpec::Relu, _) => Step::Relu,
                (LayerSpec::Dropout { rate }, _) => Step::Dropout { rate: *rate },
                (LayerSpec::AvgPool { size }, _) => Step::AvgPool { size: *size },
                (LayerSpec::GlobalAvgPool, _) => Step::GlobalAvgPool,
                (LayerSpec::Dense { width }, Shape::Flat { width: n_in }) => {
                    let w = store.add(
                        format!("{prefix}.l{idx:02}.dense.w"),
                        init.tensor(&[*width, n_in]),
                    );
                    let b =
                        store.add(format!("{prefix}.l{idx:02}.dense.b"), Tensor::zeros(&[*width]));
                    Step::Dense { w, b }
                }
                (LayerSpec::MixtureOfExperts { experts, width }, Shape::Flat { width: n_in }) => {
                    let pairs = (0..*experts)
                        .map(|k| {
                            let w = store.add(
                                format!("{prefix}.l{idx:02}.moe.e{k:02}.w"),
                                init.tensor(&[*width, n_in]),
                            );
                            let b = store.add(
                                format!("{prefix}.l{idx:02}.moe.e{k:02}.b"),
                                Tensor::zeros(&[*width]),
                            );
                            (w, b)
                        })
                        .collect();
                    let gate_w = store.add(
                        format!("{prefix}.l{idx:02}.moe.gate.w"),
                        init.tensor(&[*experts, n_in]),
                    );
                    let gate_b = store
                        .add(format!("{prefix}.l{idx:02}.moe.gate.b"), Tensor::zeros(&[*experts]));
                    Step::Moe { experts: pairs, gate_w, gate_b }
                }
                (LayerSpec::Softmax, _) => Step::Softmax,
                _ => unreachable!("shape application already validated"),
            };
            steps.push(step);
            shape = next;
        }
        Ok(Chain {
            specs: layers.to_vec(),
            steps,
            input,
            output: shape,
            _marker: std::marker::PhantomData,
        })
    }

    /// Layer list this chain was compiled from.
    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    /// Expected activation shape (batch excluded) at the input.
    pub fn input_shape(&self) -> Shape {
        self.input
    }

    /// Activation shape (batch excluded) at the output.
    pub fn output_shape(&self) -> Shape {
        self.output
    }

    /// Shape after every layer, input first — one entry per boundary.
    pub fn boundary_shapes(&self) -> Vec<Shape> {
        let mut shapes = vec![self.input];
        let mut s = self.input;
        for spec in &self.specs {
            s = s.apply(spec).expect("validated at build time");
            shapes.push(s);
        }
        shapes
    }

    fn check_input(&self, input: &Tensor<F>) -> Result<usize> {
        let want_tail: Vec<usize> = match self.input {
            Shape::Map { freq, time, channels } => vec![freq, time, channels],
            Shape::Flat { width } => vec![width],
        };
        let shape = input.shape();
        if shape.len() != want_tail.len() + 1 || shape[1..] != want_tail[..] {
            return Err(Error::Shape(format!(
                "chain expects per-item shape {:?}, got tensor {:?}",
                want_tail, shape
            )));
        }
        Ok(shape[0])
    }

    /// Training-mode forward pass. Updates batch-norm running averages in
    /// `store`, draws dropout masks from `rng`, and returns the output with
    /// a trace for [`Chain::backward`].
    pub fn forward_train(
        &self,
        store: &mut ParamStore<F>,
        input: &Tensor<F>,
        rng: &mut impl Rng,
    ) -> Result<(Tensor<F>, Trace<F>)> {
        self.check_input(input)?;
        let mut caches = Vec::with_capacity(self.steps.len());
        let mut x = input.clone();
        for step in &self.steps {
            x = match step {
                Step::Conv { w, b } => {
                    let out = conv_forward(&x, store.value(*w), store.value(*b))?;
                    caches.push(StepCache::Input(x));
                    out
                }
                Step::BatchNorm { gamma, beta, r_mean, r_var } => {
                    let g = store.value(*gamma).data().to_vec();
                    let be = store.value(*beta).data().to_vec();
                    let (out, stats) = batch_norm_train(&x, &g, &be)?;
                    bn_update_running(store.value_mut(*r_mean).data_mut(), &stats.mean);
                    bn_update_running(store.value_mut(*r_var).data_mut(), &stats.var);
                    caches.push(StepCache::Bn { input: x, stats });
                    out
                }
                Step::Relu => {
                    let (out, mask) = relu_forward(&x);
                    caches.push(StepCache::Mask(mask));
                    out
                }
                Step::Dropout { rate } => {
                    let (out, mask) = dropout_train(&x, *rate, rng)?;
                    caches.push(StepCache::Mask(mask));
                    out
                }
                Step::AvgPool { size } => {
                    let out = avg_pool_forward(&x, *size)?;
                    caches.push(StepCache::InShape(x.shape().to_vec()));
                    out
                }
                Step::GlobalAvgPool => {
                    let out = global_avg_pool_forward(&x)?;
                    caches.push(StepCache::InShape(x.shape().to_vec()));
                    out
                }
                Step::Dense { w, b } => {
                    let out = dense_forward(&x, store.value(*w), store.value(*b))?;
                    caches.push(StepCache::Input(x));
                    out
                }
                Step::Moe { experts, gate_w, gate_b } => {
                    let ws: Vec<&Tensor<F>> = experts.iter().map(|(w, _)| store.value(*w)).collect();
                    let bs: Vec<&Tensor<F>> = experts.iter().map(|(_, b)| store.value(*b)).collect();
                    let (out, cache) =
                        moe_mix_forward(x, &ws, &bs, store.value(*gate_w), store.value(*gate_b))?;
                    caches.push(StepCache::Moe(cache));
                    out
                }
                Step::Softmax => {
                    let out = softmax_forward(&x)?;
                    caches.push(StepCache::SoftmaxOut(out.clone()));
                    out
                }
            };
        }
        Ok((x, Trace { caches }))
    }

    /// Inference-mode forward pass: running statistics for batch norm,
    /// identity dropout, no trace.
    pub fn forward_infer(&self, store: &ParamStore<F>, input: &Tensor<F>) -> Result<Tensor<F>> {
        self.check_input(input)?;
        let mut x = input.clone();
        for step in &self.steps {
            x = match step {
                Step::Conv { w, b } => conv_forward(&x, store.value(*w), store.value(*b))?,
                Step::BatchNorm { gamma, beta, r_mean, r_var } => batch_norm_infer(
                    &x,
                    store.value(*gamma).data(),
                    store.value(*beta).data(),
                    store.value(*r_mean).data(),
                    store.value(*r_var).data(),
                )?,
                Step::Relu => relu_forward(&x).0,
                Step::Dropout { .. } => x,
                Step::AvgPool { size } => avg_pool_forward(&x, *size)?,
                Step::GlobalAvgPool => global_avg_pool_forward(&x)?,
                Step::Dense { w, b } => dense_forward(&x, store.value(*w), store.value(*b))?,
                Step::Moe { experts, gate_w, gate_b } => {
                    let ws: Vec<&Tensor<F>> = experts.iter().map(|(w, _)| store.value(*w)).collect();
                    let bs: Vec<&Tensor<F>> = experts.iter().map(|(_, b)| store.value(*b)).collect();
                    moe_mix_infer(&x, &ws, &bs, store.value(*gate_w), store.value(*gate_b))?
                }
                Step::Softmax => softmax_forward(&x)?,
            };
        }
        Ok(x)
    }

    /// Inference-mode forward through the first `n_layers` layers only —
    /// the way to read an intermediate representation such as the embedding
    /// feeding a network's classification head.
    pub fn forward_infer_upto(
        &self,
        store: &ParamStore<F>,
        input: &Tensor<F>,
        n_layers: usize,
    ) -> Result<Tensor<F>> {
        if n_layers > self.steps.len() {
            return Err(Error::Input(format!(
                "chain has {} layers, cannot stop after {n_layers}",
                self.steps.len()
            )));
        }
        self.check_input(input)?;
        let mut x = input.clone();
        for step in &self.steps[..n_layers] {
            x = match step {
                Step::Conv { w, b } => conv_forward(&x, store.value(*w), store.value(*b))?,
                Step::BatchNorm { gamma, beta, r_mean, r_var } => batch_norm_infer(
                    &x,
                    store.value(*gamma).data(),
                    store.value(*beta).data(),
                    store.value(*r_mean).data(),
                    store.value(*r_var).data(),
                )?,
                Step::Relu => relu_forward(&x).0,
                Step::Dropout { .. } => x,
                Step::AvgPool { size } => avg_pool_forward(&x, *size)?,
                Step::GlobalAvgPool => global_avg_pool_forward(&x)?,
                Step::Dense { w, b } => dense_forward(&x, store.value(*w), store.value(*b))?,
                Step::Moe { experts, gate_w, gate_b } => {
                    let ws: Vec<&Tensor<F>> = experts.iter().map(|(w, _)| store.value(*w)).collect();
                    let bs: Vec<&Tensor<F>> = experts.iter().map(|(_, b)| store.value(*b)).collect();
                    moe_mix_infer(&x, &ws, &bs, store.value(*gate_w), store.value(*gate_b))?
                }
                Step::Softmax => softmax_forward(&x)?,
            };
        }
        Ok(x)
    }

    /// Backward pass for the forward that produced `trace`. Accumulates
    /// parameter gradients into `store` and returns the gradient with
    /// respect to the chain input.
    pub fn backward(
        &self,
        store: &mut ParamStore<F>,
        trace: &Trace<F>,
        d_output: &Tensor<F>,
    ) -> Result<Tensor<F>> {
        self.backward_impl(store, trace, d_output, None)
    }

    /// Backward pass with an extra gradient added at an interior boundary:
    /// `boundary` counts layers from the input (as in
    /// [`Chain::boundary_shapes`]), so `extra` joins the gradient of the
    /// output of the first `boundary` layers. Lets a loss term attached to
    /// an intermediate representation (an embedding) flow into the same
    /// pass as the output loss.
    pub fn backward_with_injection(
        &self,
        store: &mut ParamStore<F>,
        trace: &Trace<F>,
        d_output: &Tensor<F>,
        boundary: usize,
        extra: &Tensor<F>,
    ) -> Result<Tensor<F>> {
        if boundary > self.steps.len() {
            return Err(Error::Input(format!(
                "chain has {} layers, no boundary {boundary}",
                self.steps.len()
            )));
        }
        self.backward_impl(store, trace, d_output, Some((boundary, extra)))
    }

    fn backward_impl(
        &self,
        store: &mut ParamStore<F>,
        trace: &Trace<F>,
        d_output: &Tensor<F>,
        inject: Option<(usize, &Tensor<F>)>,
    ) -> Result<Tensor<F>> {
        if trace.caches.len() != self.steps.len() {
            return Err(Error::Input("trace does not belong to this chain".into()));
        }
        let mut d = d_output.clone();
        for (fi, (step, cache)) in
            self.steps.iter().zip(trace.caches.iter()).enumerate().rev()
        {
            if let Some((boundary, extra)) = inject {
                if fi + 1 == boundary {
                    d.add_assign(extra)?;
                }
            }
            d = match (step, cache) {
                (Step::Conv { w, b }, StepCache::Input(x)) => {
                    let (dx, dw, db) = conv_backward(x, store.value(*w), &d)?;
                    store.accumulate_grad(*w, &dw)?;
                    store.accumulate_grad(*b, &db)?;
                    dx
                }
                (Step::BatchNorm { gamma, beta, .. }, StepCache::Bn { input, stats }) => {
                    let g = store.value(*gamma).data().to_vec();
                    let (dx, dg, dbeta) = batch_norm_backward(input, &g, stats, &d)?;
                    store.accumulate_grad(*gamma, &Tensor::from_vec(&[dg.len()], dg)?)?;
                    store.accumulate_grad(*beta, &Tensor::from_vec(&[dbeta.len()], dbeta)?)?;
                    dx
                }
                (Step::Relu, StepCache::Mask(mask)) => relu_backward(mask, &d),
                (Step::Dropout { .. }, StepCache::Mask(mask)) => dropout_backward(mask, &d),
                (Step::AvgPool { size }, StepCache::InShape(shape)) => {
                    avg_pool_backward(shape, *size, &d)?
                }
                (Step::GlobalAvgPool, StepCache::InShape(shape)) => {
                    global_avg_pool_backward(shape, &d)?
                }
                (Step::Dense { w, b }, StepCache::Input(x)) => {
                    let (dx, dw, db) = dense_backward(x, store.value(*w), &d)?;
                    store.accumulate_grad(*w, &dw)?;
                    store.accumulate_grad(*b, &db)?;
                    dx
                }
                (Step::Moe { experts, gate_w, gate_b }, StepCache::Moe(cache)) => {
                    let ws: Vec<&Tensor<F>> = experts.iter().map(|(w, _)| store.value(*w)).collect();
                    let (dx, d_experts, dgw, dgb) =
                        moe_mix_backward(cache, &ws, store.value(*gate_w), &d)?;
                    for ((w, b), (dw, db)) in experts.iter().zip(d_experts.iter()) {
                        store.accumulate_grad(*w, dw)?;
                        store.accumulate_grad(*b, db)?;
                    }
                    store.accumulate_grad(*gate_w, &dgw)?;
                    store.accumulate_grad(*gate_b, &dgb)?;
                    dx
                }
                (Step::Softmax, StepCache::SoftmaxOut(y)) => softmax_backward(y, &d)?,
                _ => return Err(Error::Input("trace does not match chain layers".into())),
            };
        }
        if let Some((0, extra)) = inject {
            d.add_assign(extra)?;
        }
        Ok(d)
    }
}
