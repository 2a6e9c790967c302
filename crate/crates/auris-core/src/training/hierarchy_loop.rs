//! Training for the two-level label hierarchy.
//!
//! The meta classifier learns the coarse group of every clip from its
//! embedding; each group's fine classifier then learns to separate only
//! that group's labels, trained on the subset of clips whose true label
//! falls inside the group. Fine classifiers optimize the joint objective —
//! a KL term that matches the soft targets plus a triplet term that pushes
//! predictions of different classes apart — mined per batch.

use crate::error::{Error, Result};
use crate::models::HierarchyModel;
use crate::nn::{ParamStore, Tensor};
use crate::training::config::{LossKind, TrainConfig};
use crate::training::drive::{argmax, drive, train_with_purpose, History};
use crate::training::losses::{grad_kl, loss_joint, loss_kl, triplet_mine_batch};

/// Per-level training records: one history for the meta classifier and
/// one per group, in group order.
#[derive(Debug, Clone)]
pub struct HierarchyHistory {
    pub meta: History,
    pub fine: Vec<History>,
}

/// Maps each global fine index to its `(group, local index)` pair.
fn group_of(model: &HierarchyModel<f32>, global: usize) -> Result<(usize, usize)> {
    let spec = model.spec();
    for gi in 0..spec.group_count() {
        let span = spec.group_span(gi);
        if span.contains(&global) {
            return Ok((gi, global - span.start));
        }
    }
    Err(Error::Shape(format!(
        "fine label index {global} is outside the hierarchy ({} labels)",
        spec.fine_labels().len()
    )))
}

/// Trains the meta classifier and every group's fine classifier.
///
/// `labels` holds one-hot (or soft) rows over the global fine-label order;
/// a row's class is its argmax. The meta level trains on derived group
/// targets with cross-entropy; each fine level trains on its group's rows
/// with the joint KL/triplet objective weighted by `cfg.gamma_kl_triplet`.
/// A group with no training rows is a configuration error.
pub fn train_hierarchy(
    model: &HierarchyModel<f32>,
    store: &mut ParamStore<f32>,
    embeddings: &Tensor<f32>,
    labels: &Tensor<f32>,
    cfg: &TrainConfig,
) -> Result<HierarchyHistory> {
    cfg.validate()?;
    let spec = model.spec();
    let n = embeddings.batch();
    if labels.batch() != n {
        return Err(Error::Shape(format!(
            "{n} embeddings but {} label rows",
            labels.batch()
        )));
    }
    let fine_count = spec.fine_labels().len();
    if labels.item_len() != fine_count {
        return Err(Error::Shape(format!(
            "label rows are {} wide, hierarchy has {fine_count} fine labels",
            labels.item_len()
        )));
    }

    // Resolve every row's group once, building the meta targets and the
    // per-group row lists in the same pass.
    let mut meta_targets = Tensor::zeros(&[n, spec.group_count()]);
    let mut rows_of_group: Vec<Vec<usize>> = vec![Vec::new(); spec.group_count()];
    for i in 0..n {
        let (gi, _) = group_of(model, argmax(labels.item(i)))?;
        meta_targets.item_mut(i)[gi] = 1.0;
        rows_of_group[gi].push(i);
    }
    for (gi, rows) in rows_of_group.iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::Config(format!(
                "hierarchy group '{}' has no training rows",
                spec.meta_label(gi)
            )));
        }
    }

    let meta = train_with_purpose(
        model.meta_chain(),
        store,
        embeddings,
        &meta_targets,
        None,
        cfg,
        LossKind::CrossEntropy,
        "hier/meta",
    )?;

    let mut fine = Vec::with_capacity(spec.group_count());
    for (gi, rows) in rows_of_group.iter().enumerate() {
        let span = spec.group_span(gi);
        let mut gx = Tensor::zeros(&[rows.len(), embeddings.item_len()]);
        let mut gy = Tensor::zeros(&[rows.len(), span.len()]);
        for (o, &i) in rows.iter().enumerate() {
            gx.item_mut(o).copy_from_slice(embeddings.item(i));
            gy.item_mut(o).copy_from_slice(&labels.item(i)[span.clone()]);
        }
        let chain = &model.fine_chains()[gi];
        let gamma = cfg.gamma_kl_triplet;
        let margin = cfg.margin;
        let hist = drive(
            chain,
            store,
            &gx,
            &gy,
            None,
            cfg,
            &format!("hier/g{gi:02}"),
            |store, bx, by, rng| {
                let (probs, trace) = chain.forward_train(store, bx, rng)?;
                if !probs.all_finite() {
                    return Err(Error::Numeric("non-finite network output".into()));
                }
                let kl = loss_kl(&probs, by, 0.0, 0.0)?;
                let (trip, mut d) = triplet_mine_batch(&probs, by, margin)?;
                d.scale((1.0 - gamma) as f32);
                let mut d_kl = grad_kl(&probs, by)?;
                d_kl.scale(gamma as f32);
                d.add_assign(&d_kl)?;
                chain.backward(store, &trace, &d)?;
                Ok(loss_joint(kl, trip, gamma))
            },
        )?;
        fine.push(hist);
    }
    Ok(HierarchyHistory { meta, fine })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{hierarchical_predict, HierarchySpec};
    use crate::nn::Initializer;

    fn toy_spec() -> HierarchySpec {
        HierarchySpec::new(vec![
            ("left".into(), vec!["a".into(), "b".into()]),
            ("right".into(), vec!["c".into(), "d".into()]),
        ])
        .unwrap()
    }

    /// Embeddings whose sign pattern encodes the fine label.
    fn toy_data(n: usize, seed: u64) -> (Tensor<f32>, Tensor<f32>) {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) as f32
        };
        let mut x = Tensor::zeros(&[n, 4]);
        let mut y = Tensor::zeros(&[n, 4]);
        for i in 0..n {
            let class = i % 4;
            y.item_mut(i)[class] = 1.0;
            let row = x.item_mut(i);
            row[0] = if class < 2 { 1.0 } else { -1.0 } + 0.2 * next();
            row[1] = if class % 2 == 0 { 1.0 } else { -1.0 } + 0.2 * next();
            row[2] = 0.3 * next();
            row[3] = 0.3 * next();
        }
        (x, y)
    }

    fn toy_model(seed: u64) -> (HierarchyModel<f32>, ParamStore<f32>) {
        let mut store = ParamStore::new();
        let mut init = Initializer::new(seed);
        let model = HierarchyModel::build(&toy_spec(), 4, &mut store, &mut init).unwrap();
        (model, store)
    }

    fn cfg(epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: 8,
            lr: 0.005,
            mixup: false,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn every_level_trains_and_losses_fall() {
        let (model, mut store) = toy_model(3);
        let (x, y) = toy_data(24, 7);
        let hist = train_hierarchy(&model, &mut store, &x, &y, &cfg(4, 11)).unwrap();
        assert_eq!(hist.fine.len(), 2);
        assert!(
            hist.meta.epochs.last().unwrap().loss < hist.meta.epochs[0].loss,
            "{:?}",
            hist.meta
        );
        for (gi, fine) in hist.fine.iter().enumerate() {
            assert_eq!(fine.epochs.len(), 4, "group {gi}");
            assert!(fine.epochs.iter().all(|e| e.loss.is_finite()), "group {gi}");
        }
        // After training on separable data, composed predictions should be
        // consistent: the fine pick always lies inside the chosen group.
        let picks = hierarchical_predict(&model, &store, &x).unwrap();
        for (i, &(gi, fine_idx)) in picks.iter().enumerate() {
            assert!(
                model.spec().group_span(gi).contains(&fine_idx),
                "row {i}: global label {fine_idx} outside group {gi}"
            );
        }
    }

    #[test]
    fn an_empty_group_is_a_configuration_error() {
        let (model, mut store) = toy_model(4);
        let (x, mut y) = toy_data(12, 8);
        // Relabel every 'right'-group row into the 'left' group.
        for i in 0..12 {
            let row = y.item_mut(i);
            if row[2] == 1.0 || row[3] == 1.0 {
                row.fill(0.0);
                row[0] = 1.0;
            }
        }
        let err = train_hierarchy(&model, &mut store, &x, &y, &cfg(1, 12)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("right"), "{err}");
    }

    #[test]
    fn label_width_must_match_the_hierarchy() {
        let (model, mut store) = toy_model(5);
        let (x, _) = toy_data(8, 9);
        let y = Tensor::zeros(&[8, 3]);
        let err = train_hierarchy(&model, &mut store, &x, &y, &cfg(1, 13)).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }
}
