//! Subcommand implementations plus the plumbing they share: corpus loading,
//! split resolution, model reconstruction, clip-level prediction, and the
//! report bundle every scoring command writes.

pub mod distill;
pub mod eval;
pub mod extract;
pub mod fuse;
pub mod report;
pub mod synth;
pub mod train;

use std::collections::BTreeMap;
use std::path::Path;

use auris_core::dataset::{label_set, make_splits, read_manifest, ManifestRecord};
use auris_core::error::{Error, Result};
use auris_core::eval::{aggregate_patches, build_report, EvalRecord, MetricsReport};
use auris_core::models::{
    build_cdnn_baseline, build_resp_cnn_moe, build_student, NetworkSpec,
};
use auris_core::nn::{Chain, ParamStore, Tensor};
use auris_core::training::{encoder_embeddings, EncoderDataset, TrainedDecoder};
use auris_core::models::EncoderModel;

use crate::artifacts::write_artifact;
use crate::config::RunConfig;
use crate::features::{self, ClipRef};

/// A manifest plus the sorted label vocabulary it induces.
pub(crate) struct Corpus {
    pub records: Vec<ManifestRecord>,
    pub labels: Vec<String>,
}

/// Reads the manifest named by the config and derives the label set.
pub(crate) fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let path = cfg.manifest_path();
    let records = read_manifest(&path)?;
    if records.is_empty() {
        return Err(Error::Input(format!(
            "manifest `{}` lists no clips",
            path.display()
        )));
    }
    let labels = label_set(&records);
    Ok(Corpus { records, labels })
}

/// Resolves the configured split into train/test index lists.
pub(crate) fn split_indices(
    cfg: &RunConfig,
    records: &[ManifestRecord],
) -> Result<(Vec<usize>, Vec<usize>)> {
    let scheme = cfg.scheme()?;
    let group = if cfg.split_group.is_empty() {
        None
    } else {
        Some(cfg.split_group.as_str())
    };
    let split = make_splits(records, &scheme, group, cfg.seed)?;
    let fold = cfg.resolved_test_fold();
    if fold >= split.n_folds() {
        return Err(Error::Config(format!(
            "test_fold {fold} is out of range: the split has {} folds",
            split.n_folds()
        )));
    }
    Ok(split.train_test(fold))
}

/// Input height of one patch for the given stream.
pub(crate) fn feature_rows(cfg: &RunConfig, stream: &str) -> Result<usize> {
    match stream {
        "log-mel" => Ok(cfg.mels),
        "gammatone" => Ok(cfg.gamma_filters),
        "constant-q" => Ok(cfg.cqt_bins),
        other => Err(Error::Config(format!("unknown stream `{other}`"))),
    }
}

/// Rebuilds a single-stream network description from its checkpoint tag.
pub(crate) fn network_spec_for(
    cfg: &RunConfig,
    tag: &str,
    stream: &str,
    classes: usize,
) -> Result<NetworkSpec> {
    let dims = (feature_rows(cfg, stream)?, cfg.patch_width);
    match tag {
        "baseline" => build_cdnn_baseline(classes, dims),
        "cnn-moe" => build_resp_cnn_moe(classes, cfg.experts, dims),
        "student" => build_student(classes, dims),
        other => Err(Error::Config(format!(
            "checkpoint model `{other}` is not a single-stream network"
        ))),
    }
}

/// Copies a probability batch into per-row vectors.
pub(crate) fn tensor_rows(t: &Tensor<f32>) -> Vec<Vec<f32>> {
    (0..t.batch()).map(|i| t.item(i).to_vec()).collect()
}

/// Clip-level probabilities for a single-stream network: run every patch of
/// each clip through the chain and average the per-patch distributions.
pub(crate) fn predictions_single(
    chain: &Chain<f32>,
    store: &ParamStore<f32>,
    x: &Tensor<f32>,
    refs: &[ClipRef],
) -> Result<Vec<(String, Vec<f32>)>> {
    let mut out = Vec::with_capacity(refs.len());
    for r in refs {
        let patches = features::rows(x, r.patches.clone());
        let probs = chain.forward_infer(store, &patches)?;
        out.push((r.id.clone(), aggregate_patches(&tensor_rows(&probs))?));
    }
    Ok(out)
}

/// Clip-level probabilities for the three-stream encoder: embed every patch,
/// decode, and average each clip's rows.
pub(crate) fn predictions_encoder(
    model: &EncoderModel<f32>,
    store: &ParamStore<f32>,
    decoder: &TrainedDecoder,
    data: &EncoderDataset,
    refs: &[ClipRef],
) -> Result<Vec<(String, Vec<f32>)>> {
    let embeddings = encoder_embeddings(model, store, data)?;
    let probs = decoder.predict(store, &embeddings)?;
    let rows = tensor_rows(&probs);
    let mut out = Vec::with_capacity(refs.len());
    for r in refs {
        let slice = &rows[r.patches.start..r.patches.end];
        out.push((r.id.clone(), aggregate_patches(slice)?));
    }
    Ok(out)
}

/// Maps clip stem -> manifest record, rejecting duplicate stems (predictions
/// are keyed by stem, so two clips sharing one would be indistinguishable).
pub(crate) fn stem_index(records: &[ManifestRecord]) -> Result<BTreeMap<String, &ManifestRecord>> {
    let mut map = BTreeMap::new();
    for rec in records {
        let stem = features::clip_stem(rec)?;
        if map.insert(stem.clone(), rec).is_some() {
            return Err(Error::Input(format!(
                "two manifest clips share the stem `{stem}`"
            )));
        }
    }
    Ok(map)
}

/// Joins prediction rows with manifest truth/metadata into scoring records.
pub(crate) fn join_records(
    preds: &[(String, Vec<f32>)],
    corpus: &Corpus,
) -> Result<Vec<EvalRecord>> {
    let index = stem_index(&corpus.records)?;
    let mut records = Vec::with_capacity(preds.len());
    for (id, probs) in preds {
        let rec = index.get(id.as_str()).ok_or_else(|| {
            Error::Input(format!("prediction clip `{id}` is not in the manifest"))
        })?;
        records.push(EvalRecord {
            clip_id: id.clone(),
            truth: rec.label.clone(),
            probs: probs.clone(),
            meta: rec.meta.clone(),
        });
    }
    Ok(records)
}

/// Scores prediction rows against the manifest and writes the report bundle
/// (`metrics.csv`, `confusion.csv`, `summary.txt`) into `out`. Returns the
/// human-readable summary for stdout.
pub(crate) fn write_reports(
    cfg: &RunConfig,
    out: &Path,
    preds: &[(String, Vec<f32>)],
    corpus: &Corpus,
) -> Result<(MetricsReport, String)> {
    let records = join_records(preds, corpus)?;
    let keys = cfg.group_keys();
    let key_refs: Vec<&str> = keys.iter().map(|k| k.as_str()).collect();
    let report = build_report(&records, &corpus.labels, &key_refs, cfg.icbhi()?)?;
    let hash = cfg.pipeline_hash();
    write_artifact(&out.join("metrics.csv"), hash, &report.metrics_csv())?;
    write_artifact(&out.join("confusion.csv"), hash, &report.confusion.to_csv())?;
    let summary = report.summary_text();
    write_artifact(&out.join("summary.txt"), hash, &summary)?;
    Ok((report, summary))
}
