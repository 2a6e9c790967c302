//! Named parameter storage and the Adam update rule.
//!
//! Every trainable model in this crate keeps its tensors in one
//! [`ParamStore`]: trainable parameters (with gradient and Adam moment
//! buffers) and non-trainable state (batch-norm running averages). Central
//! storage keeps optimizer steps, L2 terms, checkpointing and gradient
//! accumulation uniform across simple chains and composite models.

use crate::error::{Error, Result};
use crate::nn::scalar::Element;
use crate::nn::tensor::Tensor;

/// Handle into a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

/// One named tensor plus its training state.
#[derive(Debug, Clone)]
pub struct Param<F: Element> {
    pub name: String,
    pub value: Tensor<F>,
    pub grad: Tensor<F>,
    /// First-moment Adam accumulator.
    pub m: Tensor<F>,
    /// Second-moment Adam accumulator.
    pub v: Tensor<F>,
    /// Non-trainable entries (running statistics) are skipped by the
    /// optimizer and by the L2 term but still serialized in checkpoints.
    pub trainable: bool,
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Named tensor storage shared by a model's components.
#[derive(Debug, Clone)]
pub struct ParamStore<F: Element> {
    params: Vec<Param<F>>,
    /// Number of Adam steps taken so far (`t` in the bias correction).
    step: u64,
}

impl<F: Element> Default for ParamStore<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Element> ParamStore<F> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new(), step: 0 }
    }

    /// Registers a trainable tensor and returns its handle.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor<F>) -> ParamId {
        self.push(name.into(), value, true)
    }

    /// Registers a non-trainable state tensor (running statistics).
    pub fn add_state(&mut self, name: impl Into<String>, value: Tensor<F>) -> ParamId {
        self.push(name.into(), value, false)
    }

    fn push(&mut self, name: String, value: Tensor<F>, trainable: bool) -> ParamId {
        let shape = value.shape().to_vec();
        self.params.push(Param {
            name,
            grad: Tensor::zeros(&shape),
            m: Tensor::zeros(&shape),
            v: Tensor::zeros(&shape),
            value,
            trainable,
        });
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn value(&self, id: ParamId) -> &Tensor<F> {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor<F> {
        &self.params[id.0].grad
    }

    /// Accumulates `g` into the gradient buffer of `id`.
    pub fn accumulate_grad(&mut self, id: ParamId, g: &Tensor<F>) -> Result<()> {
        self.params[id.0].grad.add_assign(g)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param<F>> {
        self.params.iter()
    }

    /// Handles of every registered parameter, in registration order.
    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Looks a parameter up by its registered name.
    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Adam step counter (0 before the first step).
    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Clears all gradient buffers.
    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill_zero();
        }
    }

    /// Sum of squared trainable parameter values, ‖Θ‖², in `f64`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.params
            .iter()
            .filter(|p| p.trainable)
            .flat_map(|p| p.value.data().iter())
            .map(|v| v.as_f64() * v.as_f64())
            .sum()
    }

    /// Adds the gradient of the ridge term (λ/2)‖Θ‖², i.e. λ·Θ, onto every
    /// trainable parameter's gradient buffer.
    pub fn add_l2_grad(&mut self, lambda: f64) {
        let lam = F::of(lambda);
        for p in self.params.iter_mut().filter(|p| p.trainable) {
            for (g, &w) in p.grad.data_mut().iter_mut().zip(p.value.data().iter()) {
                *g = *g + lam * w;
            }
        }
    }

    /// One Adam update over every trainable parameter, consuming the
    /// accumulated gradients (which are left untouched; call
    /// [`ParamStore::zero_grads`] before the next accumulation).
    ///
    /// Uses the bias-corrected form: with `t` the 1-based step index,
    /// `m̂ = m/(1−β1ᵗ)`, `v̂ = v/(1−β2ᵗ)`, `w ← w − lr·m̂/(√v̂ + ε)`.
    pub fn adam_step(&mut self, cfg: &AdamConfig) {
        self.step += 1;
        let t = self.step as i32;
        let b1 = F::of(cfg.beta1);
        let b2 = F::of(cfg.beta2);
        let one = F::one();
        let bc1 = F::of(1.0 - cfg.beta1.powi(t));
        let bc2 = F::of(1.0 - cfg.beta2.powi(t));
        let lr = F::of(cfg.lr);
        let eps = F::of(cfg.eps);
        for p in self.params.iter_mut().filter(|p| p.trainable) {
            let g = p.grad.data();
            let m = p.m.data_mut();
            let v = p.v.data_mut();
            let w = p.value.data_mut();
            for i in 0..w.len() {
                m[i] = b1 * m[i] + (one - b1) * g[i];
                v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                w[i] = w[i] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }

    /// All tensors (parameters and state) as `(name, tensor)` pairs, in
    /// registration order. Used by checkpoint serialization.
    pub fn named_tensors(&self) -> Vec<(&str, &Tensor<F>)> {
        self.params.iter().map(|p| (p.name.as_str(), &p.value)).collect()
    }

    /// Overwrites tensor values by name. Every stored entry must be present
    /// in `values` with a matching shape; extra names are rejected.
    pub fn load_named_tensors(&mut self, values: &[(String, Tensor<F>)]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "checkpoint holds {} tensors, model wants {}",
                values.len(),
                self.params.len()
            )));
        }
        for (name, tensor) in values {
            let p = self
                .params
                .iter_mut()
                .find(|p| &p.name == name)
                .ok_or_else(|| Error::Shape(format!("unexpected tensor `{name}` in checkpoint")))?;
            if p.value.shape() != tensor.shape() {
                return Err(Error::Shape(format!(
                    "tensor `{name}`: checkpoint shape {:?} vs model shape {:?}",
                    tensor.shape(),
                    p.value.shape()
                )));
            }
            p.value = tensor.clone();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// First Adam step on w=1 with constant gradient 2 moves w by −lr
    /// (bias correction makes m̂/√v̂ = g/|g| at t=1).
    #[test]
    fn first_step_moves_by_lr_toward_minus_gradient() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let id = store.add("w", Tensor::from_vec(&[1], vec![1.0]).unwrap());
        store.accumulate_grad(id, &Tensor::from_vec(&[1], vec![2.0]).unwrap()).unwrap();
        store.adam_step(&AdamConfig { lr: 0.1, ..AdamConfig::default() });
        let w = store.value(id).data()[0];
        assert!((w - 0.9).abs() < 1e-6, "w = {w}");
    }

    /// A zero gradient at t=1 leaves the parameter exactly unchanged.
    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let id = store.add("w", Tensor::from_vec(&[1], vec![0.75]).unwrap());
        store.adam_step(&AdamConfig::default());
        assert_eq!(store.value(id).data()[0], 0.75);
    }

    /// Moment buffers follow m=β1·m+(1−β1)g and v=β2·v+(1−β2)g² (hand-evaluated
    /// two-step sequence).
    #[test]
    fn moments_match_hand_evaluation() {
        let cfg = AdamConfig { lr: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        let mut store: ParamStore<f64> = ParamStore::new();
        let id = store.add("w", Tensor::from_vec(&[1], vec![0.0]).unwrap());

        // Step 1, g = 1.0.
        store.accumulate_grad(id, &Tensor::from_vec(&[1], vec![1.0]).unwrap()).unwrap();
        store.adam_step(&cfg);
        // m = 0.1, v = 0.001; m̂ = 1, v̂ = 1 → w = −0.01·1/(1+1e-8).
        let w1 = store.value(id).data()[0];
        let expect1 = -0.01 * 1.0 / (1.0 + 1e-8);
        assert!((w1 - expect1).abs() < 1e-12);

        // Step 2, g = −0.5.
        store.zero_grads();
        store.accumulate_grad(id, &Tensor::from_vec(&[1], vec![-0.5]).unwrap()).unwrap();
        store.adam_step(&cfg);
        let m = 0.9 * 0.1 + 0.1 * (-0.5); // 0.04
        let v = 0.999 * 0.001 + 0.001 * 0.25;
        let m_hat = m / (1.0 - 0.9f64.powi(2));
        let v_hat = v / (1.0 - 0.999f64.powi(2));
        let expect2 = expect1 - 0.01 * m_hat / (v_hat.sqrt() + 1e-8);
        let w2 = store.value(id).data()[0];
        assert!((w2 - expect2).abs() < 1e-12, "w2 = {w2}, expect {expect2}");
    }

    /// L2 gradient is exactly λ·Θ and skips non-trainable state.
    #[test]
    fn l2_gradient_is_lambda_theta() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let w = store.add("w", Tensor::from_vec(&[2], vec![3.0, -2.0]).unwrap());
        let s = store.add_state("running", Tensor::from_vec(&[1], vec![5.0]).unwrap());
        store.add_l2_grad(0.001);
        assert_eq!(store.grad(w).data(), &[0.003, -0.002]);
        assert_eq!(store.grad(s).data(), &[0.0]);
        assert!((store.l2_norm_sq() - 13.0).abs() < 1e-12);
    }
}
