//! Training objectives and their analytic gradients.
//!
//! Every probability-based loss averages over the batch rows and adds the
//! L2 penalty (λ/2)·‖Θ‖² supplied by the caller, so single-row calls read
//! exactly like the per-sample formulas. Logarithms are natural; predicted
//! probabilities are floored at `PRED_FLOOR` inside the logarithm.

use crate::error::{Error, Result};
use crate::nn::{Element, Tensor};

/// Smallest predicted probability fed to a logarithm.
pub const PRED_FLOOR: f64 = 1e-12;

fn check_rows<F: Element>(pred: &Tensor<F>, target: &Tensor<F>) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "predictions {:?} and targets {:?} differ",
            pred.shape(),
            target.shape()
        )));
    }
    if pred.shape().len() != 2 {
        return Err(Error::Shape(format!(
            "probability rows must be rank 2, got {:?}",
            pred.shape()
        )));
    }
    Ok(())
}

/// Cross entropy with L2 penalty: mean over rows of −Σ_c y_c·ln(ŷ_c), plus
/// (λ/2)·`params_l2_sq`.
pub fn loss_ce_l2<F: Element>(
    pred: &Tensor<F>,
    target: &Tensor<F>,
    params_l2_sq: f64,
    lambda: f64,
) -> Result<f64> {
    check_rows(pred, target)?;
    let b = pred.batch();
    let mut total = 0.0f64;
    for (&p, &y) in pred.data().iter().zip(target.data().iter()) {
        let y = y.as_f64();
        if y != 0.0 {
            total -= y * p.as_f64().max(PRED_FLOOR).ln();
        }
    }
    Ok(total / b as f64 + 0.5 * lambda * params_l2_sq)
}

/// KL divergence with L2 penalty: mean over rows of Σ_c y_c·ln(y_c/ŷ_c)
/// with 0·ln(0/·) = 0, plus (λ/2)·`params_l2_sq`.
pub fn loss_kl<F: Element>(
    pred: &Tensor<F>,
    target: &Tensor<F>,
    params_l2_sq: f64,
    lambda: f64,
) -> Result<f64> {
    check_rows(pred, target)?;
    let b = pred.batch();
    let mut total = 0.0f64;
    for (&p, &y) in pred.data().iter().zip(target.data().iter()) {
        let y = y.as_f64();
        if y > 0.0 {
            total += y * (y / p.as_f64().max(PRED_FLOOR)).ln();
        }
    }
    Ok(total / b as f64 + 0.5 * lambda * params_l2_sq)
}

fn grad_wrt_pred<F: Element>(pred: &Tensor<F>, target: &Tensor<F>) -> Result<Tensor<F>> {
    check_rows(pred, target)?;
    let b = pred.batch() as f64;
    let mut grad = Tensor::zeros(pred.shape());
    for ((g, &p), &y) in
        grad.data_mut().iter_mut().zip(pred.data().iter()).zip(target.data().iter())
    {
        let (p, y) = (p.as_f64(), y.as_f64());
        // Below the floor the loss is constant in ŷ, so the gradient is 0.
        if y != 0.0 && p > PRED_FLOOR {
            *g = F::of(-y / p / b);
        }
    }
    Ok(grad)
}

/// Gradient of [`loss_ce_l2`]'s data term w.r.t. the predictions.
/// (The L2 term does not depend on them.)
pub fn grad_ce<F: Element>(pred: &Tensor<F>, target: &Tensor<F>) -> Result<Tensor<F>> {
    grad_wrt_pred(pred, target)
}

/// Gradient of [`loss_kl`]'s data term w.r.t. the predictions — identical
/// to the cross-entropy gradient because the two losses differ only by the
/// target entropy, which is constant in ŷ.
pub fn grad_kl<F: Element>(pred: &Tensor<F>, target: &Tensor<F>) -> Result<Tensor<F>> {
    grad_wrt_pred(pred, target)
}

/// Squared Euclidean distance between two equal-length vectors.
pub fn squared_distance<F: Element>(a: &[F], b: &[F]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "distance between lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| {
            let d = x.as_f64() - y.as_f64();
            d * d
        })
        .sum())
}

/// Triplet loss max{d(a,p) − d(a,n) + margin, 0} with d the squared
/// Euclidean distance.
pub fn loss_triplet<F: Element>(a: &[F], p: &[F], n: &[F], margin: f64) -> Result<f64> {
    let dp = squared_distance(a, p)?;
    let dn = squared_distance(a, n)?;
    Ok((dp - dn + margin).max(0.0))
}

/// Joint objective γ·kl + (1−γ)·triplet.
pub fn loss_joint(kl: f64, triplet: f64, gamma: f64) -> f64 {
    gamma * kl + (1.0 - gamma) * triplet
}

/// Encoder objective α·(L_lm + L_ga + L_cq) + β·L_combined.
pub fn loss_encoder(l_lm: f64, l_ga: f64, l_cq: f64, l_com: f64, alpha: f64, beta: f64) -> f64 {
    alpha * (l_lm + l_ga + l_cq) + beta * l_com
}

/// Distillation objective (1−γ)·cross_entropy + γ·embedding_distance.
pub fn loss_distill(ce: f64, embed_dist: f64, gamma: f64) -> f64 {
    (1.0 - gamma) * ce + gamma * embed_dist
}

/// In-batch triplet mining over prediction rows. Each row i anchors one
/// triplet: the anchor is that row's target vector, the positive is the
/// hardest (farthest) prediction among rows of the same class, the negative
/// the hardest (closest) prediction among rows of any other class; class
/// means the target argmax and ties resolve to the lowest row index. Rows
/// without any other-class row in the batch are skipped. Returns the mean
/// triplet loss over the anchored rows and its gradient with respect to
/// the prediction tensor.
pub fn triplet_mine_batch<F: Element>(
    preds: &Tensor<F>,
    targets: &Tensor<F>,
    margin: f64,
) -> Result<(f64, Tensor<F>)> {
    check_rows(preds, targets)?;
    let b = preds.batch();
    let classes: Vec<usize> = (0..b)
        .map(|i| {
            let row = targets.item(i);
            let mut best = 0usize;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();

    struct Pick {
        pos: usize,
        neg: usize,
        d_pos: f64,
        d_neg: f64,
    }
    let mut picks: Vec<(usize, Pick)> = Vec::new();
    for i in 0..b {
        let anchor = targets.item(i);
        let mut pos: Option<(usize, f64)> = None;
        let mut neg: Option<(usize, f64)> = None;
        for j in 0..b {
            let d = squared_distance(anchor, preds.item(j))?;
            if classes[j] == classes[i] {
                if pos.map_or(true, |(_, best)| d > best) {
                    pos = Some((j, d));
                }
            } else if neg.map_or(true, |(_, best)| d < best) {
                neg = Some((j, d));
            }
        }
        if let (Some((pj, dp)), Some((nj, dn))) = (pos, neg) {
            picks.push((i, Pick { pos: pj, neg: nj, d_pos: dp, d_neg: dn }));
        }
    }

    let mut grad = Tensor::zeros(preds.shape());
    if picks.is_empty() {
        return Ok((0.0, grad));
    }
    let m = picks.len() as f64;
    let mut total = 0.0f64;
    for (i, pick) in &picks {
        let term = pick.d_pos - pick.d_neg + margin;
        if term <= 0.0 {
            continue;
        }
        total += term;
        let anchor = targets.item(*i);
        let width = anchor.len();
        for c in 0..width {
            let a = anchor[c].as_f64();
            let p = preds.item(pick.pos)[c].as_f64();
            let n = preds.item(pick.neg)[c].as_f64();
            let gp = grad.item_mut(pick.pos);
            gp[c] = gp[c] + F::of(2.0 * (p - a) / m);
            let gn = grad.item_mut(pick.neg);
            gn[c] = gn[c] + F::of(-2.0 * (n - a) / m);
        }
    }
    Ok((total / m, grad))
}

/// Mean Euclidean (not squared) distance between corresponding rows of two
/// equally-shaped embedding tensors.
pub fn embedding_distance<F: Element>(a: &Tensor<F>, b: &Tensor<F>) -> Result<f64> {
    check_rows(a, b)?;
    let bsz = a.batch();
    let mut total = 0.0f64;
    for i in 0..bsz {
        total += squared_distance(a.item(i), b.item(i))?.sqrt();
    }
    Ok(total / bsz as f64)
}

/// Gradient of [`embedding_distance`] with respect to its second argument:
/// (b−a)/(B·‖a−b‖) per row, zero for coincident rows.
pub fn grad_embedding_distance<F: Element>(
    a: &Tensor<F>,
    b: &Tensor<F>,
) -> Result<Tensor<F>> {
    check_rows(a, b)?;
    let bsz = a.batch();
    let mut grad = Tensor::zeros(b.shape());
    for i in 0..bsz {
        let dist = squared_distance(a.item(i), b.item(i))?.sqrt();
        if dist <= PRED_FLOOR {
            continue;
        }
        let scale = 1.0 / (bsz as f64 * dist);
        let row = grad.item_mut(i);
        for (c, g) in row.iter_mut().enumerate() {
            *g = F::of((b.item(i)[c].as_f64() - a.item(i)[c].as_f64()) * scale);
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(shape: &[usize], vals: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape, vals.to_vec()).unwrap()
    }

    #[test]
    fn perfect_one_hot_prediction_costs_nothing_without_l2() {
        let y = rows(&[1, 3], &[0.0, 1.0, 0.0]);
        assert_eq!(loss_ce_l2(&y, &y, 0.0, 0.0).unwrap(), 0.0);
        assert_eq!(loss_kl(&y, &y, 0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn uniform_guess_of_a_two_class_one_hot_costs_ln_two() {
        let pred = rows(&[1, 2], &[0.5, 0.5]);
        let target = rows(&[1, 2], &[1.0, 0.0]);
        let got = loss_ce_l2(&pred, &target, 0.0, 0.0).unwrap();
        assert!((got - 2.0f64.ln()).abs() < 1e-15, "{got}");
    }

    #[test]
    fn l2_term_alone_matches_hand_arithmetic() {
        // A single weight of 2 and λ=0.001 contribute 0.001/2·4 = 0.002.
        let y = rows(&[1, 2], &[1.0, 0.0]);
        let got = loss_ce_l2(&y, &y, 4.0, 0.001).unwrap();
        assert!((got - 0.002).abs() < 1e-18, "{got}");
        // KL of identical rows is the L2 term exactly.
        assert_eq!(loss_kl(&y, &y, 4.0, 0.001).unwrap(), 0.002);
    }

    #[test]
    fn kl_of_a_soft_pair_matches_the_frozen_value() {
        let target = rows(&[1, 2], &[0.5, 0.5]);
        let pred = rows(&[1, 2], &[0.25, 0.75]);
        let got = loss_kl(&pred, &target, 0.0, 0.0).unwrap();
        assert!((got - 0.143_841_036_225_890_4).abs() < 1e-12, "{got}");
    }

    #[test]
    fn kl_minus_ce_equals_the_negative_target_entropy() {
        // Pseudo-random soft rows.
        let mut vals = Vec::new();
        let mut state = 99u64;
        for _ in 0..12 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            vals.push(((state >> 33) as f64 / (1u64 << 31) as f64).max(1e-3));
        }
        let norm = |v: &[f64]| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let mut y = Vec::new();
        let mut p = Vec::new();
        for r in 0..2 {
            y.extend(norm(&vals[6 * r..6 * r + 3]));
            p.extend(norm(&vals[6 * r + 3..6 * r + 6]));
        }
        let target = rows(&[2, 3], &y);
        let pred = rows(&[2, 3], &p);
        let kl = loss_kl(&pred, &target, 0.0, 0.0).unwrap();
        let ce = loss_ce_l2(&pred, &target, 0.0, 0.0).unwrap();
        let entropy: f64 =
            y.iter().map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 }).sum::<f64>() / 2.0;
        assert!((kl - ce - entropy).abs() < 1e-12, "{} vs {}", kl - ce, entropy);
    }

    #[test]
    fn triplet_edge_cases_follow_the_formula() {
        let a = [0.0f64, 0.0];
        // Equal distances leave exactly the margin.
        let p = [1.0f64, 0.0];
        let n = [0.0f64, 1.0];
        assert_eq!(loss_triplet(&a, &p, &n, 0.3).unwrap(), 0.3);
        // A clearly-closer positive drives the loss to zero.
        let p = [0.316_227_766_016_837_94f64, 0.0]; // d = 0.1
        let n = [0.707_106_781_186_547_6f64, 0.0]; // d = 0.5
        assert_eq!(loss_triplet(&a, &p, &n, 0.3).unwrap(), 0.0);
        // Coincident positive and negative leave the margin for any anchor.
        for a in [[0.4f64, -1.0], [3.0, 2.0]] {
            assert_eq!(loss_triplet(&a, &p, &p, 0.3).unwrap(), 0.3);
        }
    }

    #[test]
    fn composite_losses_are_linear_with_the_configured_weights() {
        assert_eq!(loss_joint(1.0, 0.0, 0.2), 0.2);
        assert_eq!(loss_joint(0.0, 1.0, 0.2), 0.8);
        assert_eq!(loss_joint(5.0, 0.0, 1.0), 5.0);
        assert_eq!(loss_joint(0.0, 7.0, 0.0), 7.0);
        assert!((loss_joint(1.0, 2.0, 0.2) - 1.8).abs() < 1e-15);

        let l = 0.37;
        assert!((loss_encoder(l, l, l, l, 1.0 / 3.0, 1.0) - 2.0 * l).abs() < 1e-15);
        assert_eq!(loss_encoder(9.0, 9.0, 9.0, 0.25, 0.0, 1.0), 0.25);
        assert!(
            (loss_encoder(0.3, 0.6, 0.9, 0.5, 1.0 / 3.0, 1.0) - 1.1).abs() < 1e-15
        );
        // Unit components expose the weights themselves.
        assert!((loss_encoder(1.0, 0.0, 0.0, 0.0, 1.0 / 3.0, 1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(loss_encoder(0.0, 0.0, 0.0, 1.0, 1.0 / 3.0, 2.5), 2.5);

        assert_eq!(loss_distill(0.8, 0.0, 0.5), 0.4);
        assert_eq!(loss_distill(0.8, 0.3, 0.0), 0.8);
        assert!((loss_distill(0.4, 0.2, 0.5) - 0.3).abs() < 1e-15);
        assert_eq!(loss_distill(0.0, 1.0, 0.5), 0.5);
    }

    #[test]
    fn mining_picks_the_farthest_positive_and_closest_negative() {
        // Two classes; targets one-hot. Predictions crafted so row 0's
        // hardest positive is row 1 (its own class, predicted badly, hence
        // far from the anchor) and hardest negative is row 3 (closer to
        // the class-0 anchor than row 2), with every triplet active.
        let targets = rows(&[4, 2], &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        let preds = rows(
            &[4, 2],
            &[
                0.9, 0.1, // row 0, near its anchor
                0.2, 0.8, // row 1, same class, predicted badly
                0.1, 0.9, // row 2, other class, far from [1,0]
                0.4, 0.6, // row 3, other class, closest to [1,0]
            ],
        );
        let margin = 0.3;
        let (loss, grad) = triplet_mine_batch(&preds, &targets, margin).unwrap();

        // Manual evaluation of the four anchored triplets.
        let d = |a: &[f64], b: &[f64]| squared_distance(a, b).unwrap();
        let t = |i: usize, pj: usize, nj: usize| -> f64 {
            let a: Vec<f64> = targets.item(i).to_vec();
            (d(&a, preds.item(pj)) - d(&a, preds.item(nj)) + margin).max(0.0)
        };
        // Row 0/1 anchors pick positive 1 and negative 3; rows 2/3 pick
        // positive 3 (note row 3 is farther from [0,1] than row 2) and
        // negative 1.
        let want = (t(0, 1, 3) + t(1, 1, 3) + t(2, 3, 1) + t(3, 3, 1)) / 4.0;
        assert!(want > 0.0, "fixture must keep the triplets active");
        assert!((loss - want).abs() < 1e-12, "{loss} vs {want}");
        assert_eq!(grad.shape(), preds.shape());
        // Row 0 is never a hardest pick here, so its gradient stays zero.
        assert!(grad.item(0).iter().all(|&g| g == 0.0));
        assert!(grad.item(1).iter().any(|&g| g != 0.0));
    }

    #[test]
    fn single_class_batches_mine_nothing() {
        let targets = rows(&[3, 2], &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let preds = rows(&[3, 2], &[0.9, 0.1, 0.6, 0.4, 0.5, 0.5]);
        let (loss, grad) = triplet_mine_batch(&preds, &targets, 0.3).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.data().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn embedding_distance_is_a_row_mean_of_euclidean_norms() {
        let a = rows(&[2, 2], &[0.0, 0.0, 1.0, 1.0]);
        let b = rows(&[2, 2], &[3.0, 4.0, 1.0, 1.0]);
        // Rows: ‖(3,4)‖ = 5 and 0 → mean 2.5.
        assert!((embedding_distance(&a, &b).unwrap() - 2.5).abs() < 1e-15);
        let g = grad_embedding_distance(&a, &b).unwrap();
        // First row: (b−a)/(2·5) = (0.3, 0.4); second row zero.
        assert!((g.item(0)[0] - 0.3).abs() < 1e-15);
        assert!((g.item(0)[1] - 0.4).abs() < 1e-15);
        assert_eq!(g.item(1), &[0.0, 0.0]);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let a = rows(&[1, 2], &[0.5, 0.5]);
        let b = rows(&[1, 3], &[0.2, 0.3, 0.5]);
        assert!(loss_ce_l2(&a, &b, 0.0, 0.0).is_err());
        assert!(loss_kl(&b, &a, 0.0, 0.0).is_err());
        assert!(triplet_mine_batch(&a, &b, 0.3).is_err());
        assert!(embedding_distance(&a, &b).is_err());
        assert!(loss_triplet(&[0.0], &[0.0, 1.0], &[0.0], 0.3).is_err());
    }
}
