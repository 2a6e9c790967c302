//! Random regression forest over soft class-probability targets.
//!
//! Each tree is fit on a bootstrap resample with a random feature subset
//! per split; splits maximize variance reduction summed over the target
//! dimensions, and leaves hold the renormalized mean of the probability
//! rows that reached them. Prediction averages leaf vectors over all trees,
//! which makes it independent of tree order.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::rng::stream;

/// Forest training configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RfcConfig {
    /// Number of trees.
    pub trees: usize,
    /// Maximum tree depth (1 = a single split).
    pub max_depth: usize,
    /// Features examined per split; `None` draws ⌈√D⌉ of the D features.
    pub features_per_split: Option<usize>,
    /// Fit each tree on a bootstrap resample (drawn with replacement).
    pub bootstrap: bool,
    /// Minimum node size that still attempts a split.
    pub min_split: usize,
}

impl Default for RfcConfig {
    fn default() -> Self {
        RfcConfig {
            trees: 100,
            max_depth: 16,
            features_per_split: None,
            bootstrap: true,
            min_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split { feature: usize, threshold: f32, left: usize, right: usize },
    Leaf { probs: Vec<f32> },
}

/// One regression tree; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf_for(&self, x: &[f32]) -> &[f32] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { probs } => return probs,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// A trained forest of probability-regression trees.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<Tree>,
    feature_count: usize,
    class_count: usize,
}

impl ForestModel {
    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }
}

/// Borrowed training data: N rows of D features and N rows of C targets.
struct Data<'a> {
    x: &'a [f32],
    y: &'a [f32],
    d: usize,
    c: usize,
}

impl Data<'_> {
    fn feature(&self, row: usize, f: usize) -> f32 {
        self.x[row * self.d + f]
    }

    fn target(&self, row: usize) -> &[f32] {
        &self.y[row * self.c..(row + 1) * self.c]
    }
}

/// Mean of the target rows, clamped non-negative and renormalized to sum 1.
fn leaf_probs(data: &Data, rows: &[usize]) -> Vec<f32> {
    let mut mean = vec![0.0f64; data.c];
    for &r in rows {
        for (m, &v) in mean.iter_mut().zip(data.target(r)) {
            *m += v as f64;
        }
    }
    for m in mean.iter_mut() {
        *m = (*m / rows.len() as f64).max(0.0);
    }
    let sum: f64 = mean.iter().sum();
    if sum <= 0.0 {
        return vec![1.0 / data.c as f32; data.c];
    }
    mean.iter().map(|&m| (m / sum) as f32).collect()
}

/// Sum over target dimensions of the within-node sum of squared deviations.
fn node_sse(data: &Data, rows: &[usize]) -> f64 {
    let n = rows.len() as f64;
    let mut sse = 0.0;
    for c in 0..data.c {
        let mut s = 0.0f64;
        let mut sq = 0.0f64;
        for &r in rows {
            let v = data.target(r)[c] as f64;
            s += v;
            sq += v * v;
        }
        sse += sq - s * s / n;
    }
    sse
}

/// Best split of `rows` along `feature`: (variance-reduction gain,
/// threshold). Candidate thresholds are midpoints between consecutive
/// distinct sorted values; returns `None` when the feature is constant.
fn best_split_on_feature(
    data: &Data,
    rows: &[usize],
    feature: usize,
    total_sse: f64,
) -> Option<(f64, f32)> {
    let n = rows.len();
    let mut order: Vec<usize> = rows.to_vec();
    order.sort_by(|&a, &b| {
        data.feature(a, feature)
            .partial_cmp(&data.feature(b, feature))
            .expect("finite features")
    });
    // Prefix sums of targets and squared targets in sorted order.
    let c = data.c;
    let mut pre_s = vec![0.0f64; (n + 1) * c];
    let mut pre_q = vec![0.0f64; (n + 1) * c];
    for (p, &r) in order.iter().enumerate() {
        for ci in 0..c {
            let v = data.target(r)[ci] as f64;
            pre_s[(p + 1) * c + ci] = pre_s[p * c + ci] + v;
            pre_q[(p + 1) * c + ci] = pre_q[p * c + ci] + v * v;
        }
    }
    let mut best: Option<(f64, f32)> = None;
    for p in 1..n {
        let lo = data.feature(order[p - 1], feature);
        let hi = data.feature(order[p], feature);
        if lo == hi {
            continue;
        }
        let threshold = (lo + hi) / 2.0;
        let (nl, nr) = (p as f64, (n - p) as f64);
        let mut split_sse = 0.0;
        for ci in 0..c {
            let sl = pre_s[p * c + ci];
            let ql = pre_q[p * c + ci];
            let st = pre_s[n * c + ci];
            let qt = pre_q[n * c + ci];
            split_sse += ql - sl * sl / nl;
            split_sse += (qt - ql) - (st - sl) * (st - sl) / nr;
        }
        let gain = total_sse - split_sse;
        if best.map_or(true, |(g, _)| gain > g) {
            best = Some((gain, threshold));
        }
    }
    best
}

fn grow(
    nodes: &mut Vec<Node>,
    data: &Data,
    rows: Vec<usize>,
    depth: usize,
    cfg: &RfcConfig,
    rng: &mut impl Rng,
) -> usize {
    let make_leaf = |nodes: &mut Vec<Node>, rows: &[usize]| {
        nodes.push(Node::Leaf { probs: leaf_probs(data, rows) });
        nodes.len() - 1
    };
    if depth >= cfg.max_depth || rows.len() < cfg.min_split.max(2) {
        return make_leaf(nodes, &rows);
    }
    let total_sse = node_sse(data, &rows);
    if total_sse <= 1e-12 {
        return make_leaf(nodes, &rows);
    }
    let k = cfg
        .features_per_split
        .unwrap_or_else(|| (data.d as f64).sqrt().round() as usize)
        .clamp(1, data.d);
    let feats = rand::seq::index::sample(rng, data.d, k);
    let mut best: Option<(f64, usize, f32)> = None;
    for f in feats {
        if let Some((gain, thr)) = best_split_on_feature(data, &rows, f, total_sse) {
            if best.map_or(true, |(g, _, _)| gain > g) {
                best = Some((gain, f, thr));
            }
        }
    }
    let Some((gain, feature, threshold)) = best else {
        return make_leaf(nodes, &rows);
    };
    if gain <= 1e-12 {
        return make_leaf(nodes, &rows);
    }
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&r| data.feature(r, feature) <= threshold);
    // Reserve the split slot before growing children so the root stays at 0.
    let at = nodes.len();
    nodes.push(Node::Leaf { probs: Vec::new() });
    let left = grow(nodes, data, left_rows, depth + 1, cfg, rng);
    let right = grow(nodes, data, right_rows, depth + 1, cfg, rng);
    nodes[at] = Node::Split { feature, threshold, left, right };
    at
}

/// Trains a forest with the default configuration (√D features per split,
/// bootstrap resampling, depth limit 16).
pub fn rfc_train(
    embeddings: &Tensor<f32>,
    labels: &Tensor<f32>,
    trees: usize,
    seed: u64,
) -> Result<ForestModel> {
    rfc_train_with(&RfcConfig { trees, ..RfcConfig::default() }, embeddings, labels, seed)
}

/// Trains a forest under an explicit configuration.
pub fn rfc_train_with(
    cfg: &RfcConfig,
    embeddings: &Tensor<f32>,
    labels: &Tensor<f32>,
    seed: u64,
) -> Result<ForestModel> {
    let &[n, d] = embeddings.shape() else {
        return Err(Error::Shape(format!(
            "embeddings must be (rows, features), got {:?}",
            embeddings.shape()
        )));
    };
    let &[ln, c] = labels.shape() else {
        return Err(Error::Shape(format!(
            "labels must be (rows, classes), got {:?}",
            labels.shape()
        )));
    };
    if n == 0 || d == 0 {
        return Err(Error::Input("forest needs at least one row and one feature".into()));
    }
    if ln != n {
        return Err(Error::Shape(format!("{n} embedding rows vs {ln} label rows")));
    }
    if c < 2 {
        return Err(Error::Config(format!("a classifier needs at least 2 classes, got {c}")));
    }
    if cfg.trees == 0 || cfg.max_depth == 0 {
        return Err(Error::Config("forest needs at least one tree of depth at least 1".into()));
    }
    if !embeddings.all_finite() || !labels.all_finite() {
        return Err(Error::Numeric("forest training data must be finite".into()));
    }
    let data = Data { x: embeddings.data(), y: labels.data(), d, c };
    let mut trees = Vec::with_capacity(cfg.trees);
    for ti in 0..cfg.trees {
        let mut rng = stream(seed, &format!("models/rfc/tree{ti}"));
        let rows: Vec<usize> = if cfg.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let mut nodes = Vec::new();
        grow(&mut nodes, &data, rows, 0, cfg, &mut rng);
        trees.push(Tree { nodes });
    }
    Ok(ForestModel { trees, feature_count: d, class_count: c })
}

/// Mean of the leaf probability vectors over all trees, renormalized.
pub fn rfc_predict(forest: &ForestModel, embedding: &[f32]) -> Result<Vec<f32>> {
    if embedding.len() != forest.feature_count {
        return Err(Error::Shape(format!(
            "embedding has {} features, forest wants {}",
            embedding.len(),
            forest.feature_count
        )));
    }
    let mut acc = vec![0.0f64; forest.class_count];
    for tree in &forest.trees {
        for (a, &p) in acc.iter_mut().zip(tree.leaf_for(embedding)) {
            *a += p as f64;
        }
    }
    let sum: f64 = acc.iter().sum();
    if sum <= 0.0 {
        return Err(Error::Numeric("forest produced an all-zero prediction".into()));
    }
    Ok(acc.iter().map(|&a| (a / sum) as f32).collect())
}
