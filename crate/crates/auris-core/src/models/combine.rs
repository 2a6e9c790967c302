//! Fusion of the three branch embeddings into one combined embedding.
//!
//! Three rules are supported: the unweighted elementwise sum, the
//! elementwise maximum, and a trained linear rule that scales each branch
//! elementwise, adds a bias, and clamps at zero.

use crate::error::{Error, Result};
use crate::nn::Element;

/// How the three branch embeddings are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinerKind {
    /// Elementwise sum of the three vectors.
    Sum,
    /// Elementwise maximum of the three vectors.
    Max,
    /// ReLU(x₁⊙w₁ + x₂⊙w₂ + x₃⊙w₃ + bias) with per-dimension weights.
    Lin,
}

impl CombinerKind {
    /// Stable lower-case tag (used in configs and descriptors).
    pub fn tag(&self) -> &'static str {
        match self {
            CombinerKind::Sum => "sum",
            CombinerKind::Max => "max",
            CombinerKind::Lin => "lin",
        }
    }

    /// Parses a tag produced by [`CombinerKind::tag`].
    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "sum" => Ok(CombinerKind::Sum),
            "max" => Ok(CombinerKind::Max),
            "lin" => Ok(CombinerKind::Lin),
            other => Err(Error::Config(format!(
                "unknown combiner `{other}` (expected sum, max or lin)"
            ))),
        }
    }
}

/// Per-dimension weights of the linear combiner.
#[derive(Debug, Clone)]
pub struct LinParams<F: Element> {
    pub w_lm: Vec<F>,
    pub w_ga: Vec<F>,
    pub w_cq: Vec<F>,
    pub bias: Vec<F>,
}

/// Merges three equal-length embeddings under `kind`. The linear rule
/// requires `params`; the other rules ignore it.
pub fn combine<F: Element>(
    x_lm: &[F],
    x_ga: &[F],
    x_cq: &[F],
    kind: CombinerKind,
    params: Option<&LinParams<F>>,
) -> Result<Vec<F>> {
    let n = x_lm.len();
    if x_ga.len() != n || x_cq.len() != n {
        return Err(Error::Input(format!(
            "embedding lengths differ: {} / {} / {}",
            n,
            x_ga.len(),
            x_cq.len()
        )));
    }
    match kind {
        CombinerKind::Sum => {
            Ok((0..n).map(|i| x_lm[i] + x_ga[i] + x_cq[i]).collect())
        }
        CombinerKind::Max => {
            Ok((0..n).map(|i| x_lm[i].max(x_ga[i]).max(x_cq[i])).collect())
        }
        CombinerKind::Lin => {
            let p = params.ok_or_else(|| {
                Error::Config("linear combiner needs weight parameters".into())
            })?;
            if p.w_lm.len() != n || p.w_ga.len() != n || p.w_cq.len() != n || p.bias.len() != n {
                return Err(Error::Input(format!(
                    "combiner weight lengths must equal the embedding length {n}"
                )));
            }
            Ok((0..n)
                .map(|i| {
                    let pre = x_lm[i] * p.w_lm[i]
                        + x_ga[i] * p.w_ga[i]
                        + x_cq[i] * p.w_cq[i]
                        + p.bias[i];
                    pre.max(F::zero())
                })
                .collect())
        }
    }
}
