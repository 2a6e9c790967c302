//! The shared minibatch training loop.
//!
//! Every optimizing routine in this module family (plain classifier,
//! encoder, hierarchy levels, distillation) runs the same epoch structure —
//! shuffle, batch, optional mixup doubling, Adam step, history row — and
//! differs only in how it turns one batch into a loss value and parameter
//! gradients. That per-batch step is passed in as a closure so identical
//! configurations consume identical random streams regardless of the
//! objective, which is what makes cross-routine reproducibility checks
//! (like distillation with a zero embedding weight matching plain
//! training) exact rather than approximate.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{AdamConfig, Chain, ParamStore, Tensor};
use crate::rng::stream;
use crate::training::config::{LossKind, TrainConfig};
use crate::training::losses::{grad_ce, grad_kl, loss_ce_l2, loss_kl};
use crate::training::mixup::mixup_batch;

/// One line of training history.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Mean total batch loss (data term plus L2 penalty).
    pub loss: f64,
    /// Accuracy on the training set, in percent.
    pub train_acc: f64,
    /// Accuracy on the validation set, in percent, when one was given.
    pub val_acc: Option<f64>,
}

/// Per-epoch training record.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochStats>,
}

impl History {
    /// Renders the history as CSV with an `epoch,loss,train_acc,val_acc`
    /// header; a missing validation column stays empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss,train_acc,val_acc\n");
        for row in &self.epochs {
            let val = row.val_acc.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.epoch, row.loss, row.train_acc, val
            ));
        }
        out
    }

    /// Mean loss of the final epoch, if any training happened.
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }
}

/// Copies the given rows of a batched tensor into a new tensor.
pub(crate) fn gather_rows(t: &Tensor<f32>, idx: &[usize]) -> Tensor<f32> {
    let item = t.item_len();
    let mut shape = t.shape().to_vec();
    shape[0] = idx.len();
    let mut out = Tensor::zeros(&shape);
    for (o, &i) in idx.iter().enumerate() {
        out.data_mut()[o * item..(o + 1) * item].copy_from_slice(t.item(i));
    }
    out
}

pub(crate) fn argmax(row: &[f32]) -> usize {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Classification accuracy of a network over a labelled set, in percent.
/// Runs inference in bounded chunks; ties in a probability row resolve to
/// the lowest class index.
pub fn accuracy_percent(
    chain: &Chain<f32>,
    store: &ParamStore<f32>,
    x: &Tensor<f32>,
    y: &Tensor<f32>,
) -> Result<f64> {
    let n = x.batch();
    if y.batch() != n {
        return Err(Error::Shape(format!(
            "{n} feature rows but {} label rows",
            y.batch()
        )));
    }
    if n == 0 {
        return Err(Error::Input("cannot score an empty set".into()));
    }
    const CHUNK: usize = 128;
    let mut correct = 0usize;
    let mut start = 0usize;
    while start < n {
        let idx: Vec<usize> = (start..(start + CHUNK).min(n)).collect();
        let probs = chain.forward_infer(store, &gather_rows(x, &idx))?;
        for (o, &i) in idx.iter().enumerate() {
            if argmax(probs.item(o)) == argmax(y.item(i)) {
                correct += 1;
            }
        }
        start += CHUNK;
    }
    Ok(100.0 * correct as f64 / n as f64)
}

/// The common epoch loop. `purpose` namespaces the run's random streams;
/// `batch_step` consumes one (possibly mixup-doubled) batch, accumulates
/// parameter gradients, and returns the batch's data loss. The driver adds
/// the L2 term to both the loss and the gradients, aborts on non-finite
/// loss naming the epoch and batch, and takes one Adam step per batch.
pub(crate) fn drive(
    chain: &Chain<f32>,
    store: &mut ParamStore<f32>,
    x: &Tensor<f32>,
    y: &Tensor<f32>,
    val: Option<(&Tensor<f32>, &Tensor<f32>)>,
    cfg: &TrainConfig,
    purpose: &str,
    mut batch_step: impl FnMut(
        &mut ParamStore<f32>,
        &Tensor<f32>,
        &Tensor<f32>,
        &mut ChaCha8Rng,
    ) -> Result<f64>,
) -> Result<History> {
    cfg.validate()?;
    let n = x.batch();
    if n == 0 {
        return Err(Error::Input("training set is empty".into()));
    }
    if y.batch() != n {
        return Err(Error::Shape(format!(
            "{n} training rows but {} label rows",
            y.batch()
        )));
    }
    let mut shuffle_rng = stream(cfg.seed, &format!("{purpose}/shuffle"));
    let mut mixup_rng = stream(cfg.seed, &format!("{purpose}/mixup"));
    let mut dropout_rng = stream(cfg.seed, &format!("{purpose}/dropout"));
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };

    let mut history = History::default();
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0f64;
        let mut batches = 0usize;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            if idx.len() < 2 {
                // Batch statistics need at least two rows; a trailing
                // singleton is skipped rather than crashing the run.
                continue;
            }
            let bx = gather_rows(x, idx);
            let by = gather_rows(y, idx);
            let (bx, by) = if cfg.mixup {
                mixup_batch(&bx, &by, &mut mixup_rng)?
            } else {
                (bx, by)
            };
            store.zero_grads();
            let with_context = |e: Error| match e {
                Error::Numeric(msg) => {
                    Error::Numeric(format!("{msg} (epoch {epoch}, batch {bi})"))
                }
                other => other,
            };
            let data_loss =
                batch_step(store, &bx, &by, &mut dropout_rng).map_err(with_context)?;
            let loss = data_loss + 0.5 * cfg.l2 * store.l2_norm_sq();
            if !loss.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss {loss} (epoch {epoch}, batch {bi})"
                )));
            }
            store.add_l2_grad(cfg.l2);
            store.adam_step(&adam);
            epoch_loss += loss;
            batches += 1;
        }
        if batches == 0 {
            return Err(Error::Input(
                "training set has no batch with at least two rows".into(),
            ));
        }
        let train_acc = accuracy_percent(chain, store, x, y)?;
        let val_acc = match val {
            Some((vx, vy)) => Some(accuracy_percent(chain, store, vx, vy)?),
            None => None,
        };
        history.epochs.push(EpochStats {
            epoch,
            loss: epoch_loss / batches as f64,
            train_acc,
            val_acc,
        });
    }
    Ok(history)
}

/// Trains one network on a labelled set: shuffled minibatches, optional
/// mixup doubling, Adam updates, fixed epoch count. Returns the per-epoch
/// history; the trained parameters stay in `store`.
pub fn train(
    chain: &Chain<f32>,
    store: &mut ParamStore<f32>,
    x: &Tensor<f32>,
    y: &Tensor<f32>,
    val: Option<(&Tensor<f32>, &Tensor<f32>)>,
    cfg: &TrainConfig,
    loss: LossKind,
) -> Result<History> {
    train_with_purpose(chain, store, x, y, val, cfg, loss, "train")
}

/// `train` with an explicit random-stream namespace, so independent models
/// trained from one root seed draw from disjoint streams.
#[allow(clippy::too_many_arguments)]
pub(crate) fn train_with_purpose(
    chain: &Chain<f32>,
    store: &mut ParamStore<f32>,
    x: &Tensor<f32>,
    y: &Tensor<f32>,
    val: Option<(&Tensor<f32>, &Tensor<f32>)>,
    cfg: &TrainConfig,
    loss: LossKind,
    purpose: &str,
) -> Result<History> {
    drive(chain, store, x, y, val, cfg, purpose, |store, bx, by, rng| {
        let (probs, trace) = chain.forward_train(store, bx, rng)?;
        if !probs.all_finite() {
            return Err(Error::Numeric("non-finite network output".into()));
        }
        let (value, grad) = match loss {
            LossKind::CrossEntropy => {
                (loss_ce_l2(&probs, by, 0.0, 0.0)?, grad_ce(&probs, by)?)
            }
            LossKind::Kl => (loss_kl(&probs, by, 0.0, 0.0)?, grad_kl(&probs, by)?),
        };
        chain.backward(store, &trace, &grad)?;
        Ok(value)
    })
}
