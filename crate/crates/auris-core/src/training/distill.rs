//! Teacher–student knowledge transfer.
//!
//! A large frozen teacher guides a small student twice over: the student's
//! probability head still learns from the labels via cross-entropy, while
//! its penultimate representation is pulled toward the teacher's embedding
//! of the same input by a Euclidean-distance term. The two gradients flow
//! through one backward pass — the distance gradient is injected at the
//! student's embedding boundary — so the run stays a single ordinary
//! optimization loop.
//!
//! With the embedding weight at zero the loop performs, draw for draw, the
//! same computation as plain training: identical shuffle, mixup, dropout
//! streams, identical Adam steps. That makes zero-weight distillation a
//! checkpoint-exact control for the transfer machinery.

use crate::error::{Error, Result};
use crate::nn::{Chain, ParamStore, Shape, Tensor};
use crate::training::config::TrainConfig;
use crate::training::drive::{drive, gather_rows, History};
use crate::training::losses::{
    embedding_distance, grad_ce, grad_embedding_distance, loss_ce_l2,
};
use crate::nn::LayerSpec;

/// The layer boundary where a network's embedding lives: right after its
/// last global-average-pool layer. `None` when the network has no such
/// layer.
pub fn embedding_tap(chain: &Chain<f32>) -> Option<usize> {
    chain
        .specs()
        .iter()
        .rposition(|s| matches!(s, LayerSpec::GlobalAvgPool))
        .map(|i| i + 1)
}

fn embed_width(chain: &Chain<f32>, boundary: usize) -> Result<usize> {
    match chain.boundary_shapes()[boundary] {
        Shape::Flat { width } => Ok(width),
        s => Err(Error::Config(format!(
            "embedding boundary holds a {s:?}, expected a flat vector"
        ))),
    }
}

/// Mean Euclidean distance between teacher and student embeddings over a
/// set of inputs, computed in bounded chunks.
pub fn mean_embedding_distance(
    teacher: &Chain<f32>,
    teacher_store: &ParamStore<f32>,
    student: &Chain<f32>,
    student_store: &ParamStore<f32>,
    x: &Tensor<f32>,
) -> Result<f64> {
    let t_tap = embedding_tap(teacher)
        .ok_or_else(|| Error::Config("teacher has no global-average-pool layer".into()))?;
    let s_tap = embedding_tap(student)
        .ok_or_else(|| Error::Config("student has no global-average-pool layer".into()))?;
    let n = x.batch();
    if n == 0 {
        return Err(Error::Input("no inputs to embed".into()));
    }
    const CHUNK: usize = 64;
    let mut total = 0.0f64;
    let mut start = 0usize;
    while start < n {
        let idx: Vec<usize> = (start..(start + CHUNK).min(n)).collect();
        let bx = gather_rows(x, &idx);
        let t = teacher.forward_infer_upto(teacher_store, &bx, t_tap)?;
        let s = student.forward_infer_upto(student_store, &bx, s_tap)?;
        total += embedding_distance(&t, &s)? * idx.len() as f64;
        start += CHUNK;
    }
    Ok(total / n as f64)
}

/// Trains `student` under a frozen `teacher`. Each batch's loss is
/// `(1−γ)·cross_entropy(student, labels) + γ·‖teacher_emb − student_emb‖`
/// with `γ = cfg.gamma_distill`; the distance gradient enters the
/// student's backward pass at its embedding boundary. The teacher's
/// parameters are never touched.
///
/// The student must be deterministic — free of dropout and batch
/// normalization — because its embedding is re-read in inference mode
/// inside the training step; a stochastic student would make that read
/// disagree with the gradient path.
#[allow(clippy::too_many_arguments)]
pub fn distill(
    student: &Chain<f32>,
    student_store: &mut ParamStore<f32>,
    teacher: &Chain<f32>,
    teacher_store: &ParamStore<f32>,
    x: &Tensor<f32>,
    y: &Tensor<f32>,
    val: Option<(&Tensor<f32>, &Tensor<f32>)>,
    cfg: &TrainConfig,
) -> Result<History> {
    cfg.validate()?;
    if student.specs().iter().any(|s| {
        matches!(s, LayerSpec::Dropout { .. } | LayerSpec::BatchNorm)
    }) {
        return Err(Error::Config(
            "distillation needs a deterministic student: remove dropout and \
             batch normalization from the student network"
                .into(),
        ));
    }
    let t_tap = embedding_tap(teacher)
        .ok_or_else(|| Error::Config("teacher has no global-average-pool layer".into()))?;
    let s_tap = embedding_tap(student)
        .ok_or_else(|| Error::Config("student has no global-average-pool layer".into()))?;
    let tw = embed_width(teacher, t_tap)?;
    let sw = embed_width(student, s_tap)?;
    if tw != sw {
        return Err(Error::Config(format!(
            "teacher embeds {tw} values, student {sw}; distillation needs \
             matching embedding widths"
        )));
    }
    let gamma = cfg.gamma_distill;

    drive(student, student_store, x, y, val, cfg, "train", |store, bx, by, rng| {
        let (probs, trace) = student.forward_train(store, bx, rng)?;
        if !probs.all_finite() {
            return Err(Error::Numeric("non-finite network output".into()));
        }
        let ce = loss_ce_l2(&probs, by, 0.0, 0.0)?;
        let mut d_out = grad_ce(&probs, by)?;
        d_out.scale((1.0 - gamma) as f32);

        let t_emb = teacher.forward_infer_upto(teacher_store, bx, t_tap)?;
        let s_emb = student.forward_infer_upto(store, bx, s_tap)?;
        let dist = embedding_distance(&t_emb, &s_emb)?;
        let mut d_emb = grad_embedding_distance(&t_emb, &s_emb)?;
        d_emb.scale(gamma as f32);

        student.backward_with_injection(store, &trace, &d_out, s_tap, &d_emb)?;
        Ok((1.0 - gamma) * ce + gamma * dist)
    })
}
