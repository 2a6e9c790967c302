//! Two-phase optimization of the three-branch encoder and its decoder.
//!
//! Phase one trains the encoder end to end: every branch head and the
//! combined head see the same labels, and their cross-entropy terms are
//! blended with the configured branch/combined weights. Phase two freezes
//! the encoder, reads the combined embedding for every clip, and fits a
//! decoder on those embeddings — a network decoder trains with the usual
//! minibatch loop, a random forest trains in one pass on a mixup-doubled
//! copy of the embedding table.

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::models::{
    build_decoder, extract_embedding, rfc_predict, rfc_train_with, Decoder, DecoderKind,
    DecoderSpec, EncoderModel, ForestModel,
};
use crate::nn::{AdamConfig, Chain, Initializer, ParamStore, Tensor};
use crate::rng::stream;
use crate::training::config::{LossKind, TrainConfig};
use crate::training::drive::{argmax, gather_rows, train, EpochStats, History};
use crate::training::losses::{grad_ce, loss_ce_l2};
use crate::training::mixup::{mixup_batch, mixup_batch_multi};

/// The names of the three spectrogram streams the encoder consumes, in
/// branch order.
pub const STREAM_NAMES: [&str; 3] = ["log-mel", "gammatone", "constant-q"];

/// A labelled set with one spectrogram tensor per encoder branch.
#[derive(Debug, Clone)]
pub struct EncoderDataset {
    streams: [Tensor<f32>; 3],
    labels: Tensor<f32>,
}

impl EncoderDataset {
    /// Assembles a dataset from the three per-stream tensors. All three
    /// must be present and agree with the label count; a missing stream is
    /// a configuration error naming the absent kind.
    pub fn new(
        lm: Option<Tensor<f32>>,
        ga: Option<Tensor<f32>>,
        cq: Option<Tensor<f32>>,
        labels: Tensor<f32>,
    ) -> Result<Self> {
        let slots = [&lm, &ga, &cq];
        for (name, slot) in STREAM_NAMES.iter().zip(slots) {
            if slot.is_none() {
                return Err(Error::Config(format!(
                    "encoder training needs all three spectrogram streams; \
                     the {name} stream is missing"
                )));
            }
        }
        let streams = [lm.unwrap(), ga.unwrap(), cq.unwrap()];
        let n = labels.batch();
        if n == 0 {
            return Err(Error::Input("dataset has no rows".into()));
        }
        for (name, s) in STREAM_NAMES.iter().zip(streams.iter()) {
            if s.batch() != n {
                return Err(Error::Shape(format!(
                    "{name} stream has {} items for {n} labels",
                    s.batch()
                )));
            }
        }
        if labels.item_len() < 2 {
            return Err(Error::Shape("labels must span at least 2 classes".into()));
        }
        Ok(EncoderDataset { streams, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn class_count(&self) -> usize {
        self.labels.item_len()
    }

    pub fn labels(&self) -> &Tensor<f32> {
        &self.labels
    }

    pub fn inputs(&self) -> [&Tensor<f32>; 3] {
        [&self.streams[0], &self.streams[1], &self.streams[2]]
    }

    fn gather(&self, idx: &[usize]) -> ([Tensor<f32>; 3], Tensor<f32>) {
        (
            [
                gather_rows(&self.streams[0], idx),
                gather_rows(&self.streams[1], idx),
                gather_rows(&self.streams[2], idx),
            ],
            gather_rows(&self.labels, idx),
        )
    }
}

/// Combined-head classification accuracy of the encoder over a dataset,
/// in percent.
pub fn encoder_accuracy(
    model: &EncoderModel<f32>,
    store: &ParamStore<f32>,
    data: &EncoderDataset,
) -> Result<f64> {
    let n = data.len();
    const CHUNK: usize = 128;
    let mut correct = 0usize;
    let mut start = 0usize;
    while start < n {
        let idx: Vec<usize> = (start..(start + CHUNK).min(n)).collect();
        let (xs, by) = data.gather(&idx);
        let probs = model.forward_infer(store, [&xs[0], &xs[1], &xs[2]])?;
        for o in 0..idx.len() {
            if argmax(probs.item(o)) == argmax(by.item(o)) {
                correct += 1;
            }
        }
        start += CHUNK;
    }
    Ok(100.0 * correct as f64 / n as f64)
}

/// Trains the encoder end to end. Each batch contributes one
/// cross-entropy term per branch head, weighted `alpha`, plus the combined
/// head's term weighted `beta`; mixup doubling applies one shared mixing
/// plan across the three streams so every variant stays a consistent clip.
pub fn train_encoder(
    model: &EncoderModel<f32>,
    store: &mut ParamStore<f32>,
    data: &EncoderDataset,
    val: Option<&EncoderDataset>,
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    let n = data.len();
    let mut shuffle_rng = stream(cfg.seed, "encoder/shuffle");
    let mut mixup_rng = stream(cfg.seed, "encoder/mixup");
    let mut dropout_rng = stream(cfg.seed, "encoder/dropout");
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };

    let mut history = History::default();
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0f64;
        let mut batches = 0usize;
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            if idx.len() < 2 {
                continue;
            }
            let (xs, by) = data.gather(idx);
            let (xs, by) = if cfg.mixup {
                mixup_batch_multi(&[&xs[0], &xs[1], &xs[2]], &by, &mut mixup_rng)?
            } else {
                (xs.to_vec(), by)
            };
            store.zero_grads();
            let (out, trace) =
                model.forward_train(store, [&xs[0], &xs[1], &xs[2]], &mut dropout_rng)?;
            let mut data_loss = 0.0f64;
            let mut d_branch = Vec::with_capacity(3);
            for probs in &out.branch_probs {
                data_loss += cfg.alpha * loss_ce_l2(probs, &by, 0.0, 0.0)?;
                let mut g = grad_ce(probs, &by)?;
                g.scale(cfg.alpha as f32);
                d_branch.push(g);
            }
            data_loss += cfg.beta * loss_ce_l2(&out.combined_probs, &by, 0.0, 0.0)?;
            let mut d_combined = grad_ce(&out.combined_probs, &by)?;
            d_combined.scale(cfg.beta as f32);
            model.backward(
                store,
                &trace,
                [&d_branch[0], &d_branch[1], &d_branch[2]],
                &d_combined,
            )?;
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
        let train_acc = encoder_accuracy(model, store, data)?;
        let val_acc = match val {
            Some(v) => Some(encoder_accuracy(model, store, v)?),
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

/// Reads the combined embedding for every clip in the dataset, in bounded
/// chunks.
pub fn encoder_embeddings(
    model: &EncoderModel<f32>,
    store: &ParamStore<f32>,
    data: &EncoderDataset,
) -> Result<Tensor<f32>> {
    let n = data.len();
    let width = model.spec().embed_width();
    let mut out = Tensor::zeros(&[n, width]);
    const CHUNK: usize = 128;
    let mut start = 0usize;
    while start < n {
        let idx: Vec<usize> = (start..(start + CHUNK).min(n)).collect();
        let (xs, _) = data.gather(&idx);
        let embs = extract_embedding(model, store, [&xs[0], &xs[1], &xs[2]])?;
        for (o, &i) in idx.iter().enumerate() {
            out.item_mut(i).copy_from_slice(embs.item(o));
        }
        start += CHUNK;
    }
    Ok(out)
}

/// A decoder after phase-two fitting: either a runnable network whose
/// parameters live in the shared store, or a trained forest.
pub enum TrainedDecoder {
    Network(Chain<f32>),
    Forest(ForestModel),
}

impl TrainedDecoder {
    /// Class-probability rows for a batch of embeddings.
    pub fn predict(
        &self,
        store: &ParamStore<f32>,
        embeddings: &Tensor<f32>,
    ) -> Result<Tensor<f32>> {
        match self {
            TrainedDecoder::Network(chain) => chain.forward_infer(store, embeddings),
            TrainedDecoder::Forest(forest) => {
                let n = embeddings.batch();
                let mut out = None;
                for i in 0..n {
                    let row = rfc_predict(forest, embeddings.item(i))?;
                    let out = out.get_or_insert_with(|| Tensor::zeros(&[n, row.len()]));
                    out.item_mut(i).copy_from_slice(&row);
                }
                out.ok_or_else(|| Error::Input("no embeddings to decode".into()))
            }
        }
    }
}

/// Phase one trains the encoder; phase two freezes it, extracts combined
/// embeddings for the whole training set, and fits `decoder_kind` on them.
/// Network decoders run the standard minibatch loop (mixing embeddings
/// batch by batch when `dec_cfg.mixup` is set); the forest decoder trains
/// once on a mixup-doubled copy of the embedding table. Returns both
/// phases' outcome: the encoder history and the fitted decoder.
#[allow(clippy::too_many_arguments)]
pub fn train_encoder_then_decoder(
    model: &EncoderModel<f32>,
    store: &mut ParamStore<f32>,
    decoder_kind: DecoderKind,
    data: &EncoderDataset,
    val: Option<&EncoderDataset>,
    enc_cfg: &TrainConfig,
    dec_cfg: &TrainConfig,
    init: &mut Initializer,
) -> Result<(History, TrainedDecoder)> {
    let enc_history = train_encoder(model, store, data, val, enc_cfg)?;

    let spec = DecoderSpec::new(
        decoder_kind,
        model.spec().embed_width(),
        model.spec().class_count(),
    )?;
    let embs = encoder_embeddings(model, store, data)?;
    match build_decoder(&spec, "dec", store, init)? {
        Decoder::Network { chain, .. } => {
            let val_pair = match val {
                Some(v) => Some((encoder_embeddings(model, store, v)?, v.labels().clone())),
                None => None,
            };
            let val_ref = val_pair.as_ref().map(|(x, y)| (x, y));
            train(
                &chain,
                store,
                &embs,
                data.labels(),
                val_ref,
                dec_cfg,
                LossKind::CrossEntropy,
            )?;
            Ok((enc_history, TrainedDecoder::Network(chain)))
        }
        Decoder::Forest(rfc_cfg) => {
            let (x, y) = if dec_cfg.mixup {
                let mut rng = stream(dec_cfg.seed, "decoder/mixup");
                mixup_batch(&embs, data.labels(), &mut rng)?
            } else {
                (embs, data.labels().clone())
            };
            let forest = rfc_train_with(&rfc_cfg, &x, &y, dec_cfg.seed)?;
            Ok((enc_history, TrainedDecoder::Forest(forest)))
        }
    }
}
