//! Mixup augmentation: convex blends of sample pairs and their labels.

use rand::Rng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Which distribution a mixing coefficient was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixDist {
    /// α ~ U(0, 1).
    Uniform,
    /// α ~ Beta(0.4, 0.4) — strongly favors blends near either source.
    Beta,
}

impl MixDist {
    /// Draws one mixing coefficient in [0, 1].
    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        match self {
            MixDist::Uniform => rng.random::<f64>(),
            MixDist::Beta => {
                let beta = rand_distr::Beta::new(0.4, 0.4)
                    .expect("fixed (0.4, 0.4) shape is valid");
                beta.sample(rng)
            }
        }
    }
}

/// The two complementary blends of one sample pair.
#[derive(Debug, Clone)]
pub struct MixupPair {
    /// α·X₁ + (1−α)·X₂.
    pub x_mp1: Tensor<f32>,
    /// (1−α)·X₁ + α·X₂.
    pub x_mp2: Tensor<f32>,
    /// Labels blended with the same α as the patches.
    pub y_mp1: Vec<f32>,
    /// Complementary label blend; `y_mp1 + y_mp2` reproduces `y1 + y2`
    /// coordinate by coordinate.
    pub y_mp2: Vec<f32>,
    /// The mixing coefficient.
    pub alpha: f32,
    /// Distribution α was drawn from, when the caller drew it via
    /// [`MixDist::draw`].
    pub dist: Option<MixDist>,
}

/// Blends two equally-shaped samples and their labels with coefficient
/// `alpha` ∈ [0, 1]. The second label blend is computed as
/// `(y1 + y2) − y_mp1`, which makes the label-mass identity
/// `y_mp1 + y_mp2 = y1 + y2` hold in floating point, not just on paper.
pub fn mixup(
    x1: &Tensor<f32>,
    x2: &Tensor<f32>,
    y1: &[f32],
    y2: &[f32],
    alpha: f32,
) -> Result<MixupPair> {
    if x1.shape() != x2.shape() {
        return Err(Error::Shape(format!(
            "cannot mix shapes {:?} and {:?}",
            x1.shape(),
            x2.shape()
        )));
    }
    if y1.len() != y2.len() {
        return Err(Error::Shape(format!(
            "cannot mix label lengths {} and {}",
            y1.len(),
            y2.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Range(format!("mixing coefficient {alpha} outside [0, 1]")));
    }
    let inv = 1.0 - alpha;
    let mut x_mp1 = Tensor::zeros(x1.shape());
    let mut x_mp2 = Tensor::zeros(x1.shape());
    for ((o1, o2), (&a, &b)) in x_mp1
        .data_mut()
        .iter_mut()
        .zip(x_mp2.data_mut().iter_mut())
        .zip(x1.data().iter().zip(x2.data().iter()))
    {
        *o1 = alpha * a + inv * b;
        *o2 = inv * a + alpha * b;
    }
    let y_mp1: Vec<f32> =
        y1.iter().zip(y2.iter()).map(|(&a, &b)| alpha * a + inv * b).collect();
    let y_mp2: Vec<f32> = y1
        .iter()
        .zip(y2.iter())
        .zip(y_mp1.iter())
        .map(|((&a, &b), &m)| (a + b) - m)
        .collect();
    Ok(MixupPair { x_mp1, x_mp2, y_mp1, y_mp2, alpha, dist: None })
}

/// Doubles a batch by mixing: every source row yields one Beta-blended and
/// one Uniform-blended variant against a random partner row, so a batch of
/// B rows becomes exactly 2B. All tensors in `xs` are parallel views of the
/// same samples (for example three spectrogram streams) and are mixed with
/// identical partners and coefficients; `y` holds one label row per sample.
pub fn mixup_batch_multi(
    xs: &[&Tensor<f32>],
    y: &Tensor<f32>,
    rng: &mut impl Rng,
) -> Result<(Vec<Tensor<f32>>, Tensor<f32>)> {
    if xs.is_empty() {
        return Err(Error::Input("no streams to mix".into()));
    }
    let b = y.batch();
    for x in xs {
        if x.batch() != b {
            return Err(Error::Shape(format!(
                "stream holds {} rows but labels hold {b}",
                x.batch()
            )));
        }
    }
    if b == 0 {
        return Err(Error::Input("cannot mix an empty batch".into()));
    }
    // One (partner, α) draw per output row, shared across streams.
    let plans: Vec<(usize, f32, bool)> = (0..2 * b)
        .map(|o| {
            let dist = if o < b { MixDist::Beta } else { MixDist::Uniform };
            let partner = rng.random_range(0..b);
            (partner, dist.draw(rng) as f32, o < b)
        })
        .collect();

    let mut out_xs = Vec::with_capacity(xs.len());
    for x in xs {
        let item = x.item_len();
        let mut shape = x.shape().to_vec();
        shape[0] = 2 * b;
        let mut out = Tensor::zeros(&shape);
        for (o, &(partner, alpha, first)) in plans.iter().enumerate() {
            let src = o % b;
            let inv = 1.0 - alpha;
            // The Beta half uses the α·self + (1−α)·partner blend, the
            // Uniform half the complementary one.
            let (wa, wb) = if first { (alpha, inv) } else { (inv, alpha) };
            let dst = &mut out.data_mut()[o * item..(o + 1) * item];
            for (d, (&a, &p)) in
                dst.iter_mut().zip(x.item(src).iter().zip(x.item(partner).iter()))
            {
                *d = wa * a + wb * p;
            }
        }
        out_xs.push(out);
    }

    let classes = y.item_len();
    let mut out_y = Tensor::zeros(&[2 * b, classes]);
    for (o, &(partner, alpha, first)) in plans.iter().enumerate() {
        let src = o % b;
        let inv = 1.0 - alpha;
        let (wa, wb) = if first { (alpha, inv) } else { (inv, alpha) };
        let dst = out_y.item_mut(o);
        for (d, (&a, &p)) in dst.iter_mut().zip(y.item(src).iter().zip(y.item(partner).iter()))
        {
            *d = wa * a + wb * p;
        }
    }
    Ok((out_xs, out_y))
}

/// Single-stream form of [`mixup_batch_multi`].
pub fn mixup_batch(
    x: &Tensor<f32>,
    y: &Tensor<f32>,
    rng: &mut impl Rng,
) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let (mut xs, y) = mixup_batch_multi(&[x], y, rng)?;
    Ok((xs.remove(0), y))
}
