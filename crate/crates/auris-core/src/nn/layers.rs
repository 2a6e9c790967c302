//! Forward and backward passes for the eight layer primitives the model
//! family is assembled from: 2-D convolution, batch normalization, ReLU,
//! dropout, average pooling, global average pooling, dense, and softmax.
//!
//! Feature maps are `(batch, freq, time, channels)`; flat activations are
//! `(batch, width)`. Convolution uses zero padding, stride 1 and odd kernels,
//! so spatial dimensions are preserved. Every backward pass is analytic and
//! is validated against central finite differences in the test suite.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::gemm::{gemm_acc, gemm_at_acc, transpose};
use crate::nn::scalar::Element;
use crate::nn::tensor::Tensor;

/// Batch-norm epsilon inside the denominator √(σ²+ε).
pub const BN_EPS: f64 = 1e-5;
/// Running-average momentum: `running ← m·running + (1−m)·batch`.
pub const BN_MOMENTUM: f64 = 0.9;

/// Whether a forward pass uses training behaviour (batch statistics,
/// dropout masks) or inference behaviour (running averages, identity
/// dropout).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

fn expect_map<F: Element>(x: &Tensor<F>, what: &str) -> Result<(usize, usize, usize, usize)> {
    match *x.shape() {
        [b, f, t, c] => Ok((b, f, t, c)),
        _ => Err(Error::Shape(format!(
            "{what} wants a (batch, freq, time, channels) map, got {:?}",
            x.shape()
        ))),
    }
}

fn expect_flat<F: Element>(x: &Tensor<F>, what: &str) -> Result<(usize, usize)> {
    match *x.shape() {
        [b, n] => Ok((b, n)),
        _ => Err(Error::Shape(format!("{what} wants a (batch, width) tensor, got {:?}", x.shape()))),
    }
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

/// Unrolls one feature-map item into im2col layout: row (f·T+t) holds the
/// zero-padded (kf, kt, c) receptive field of output position (f, t).
fn im2col<F: Element>(
    item: &[F],
    f_dim: usize,
    t_dim: usize,
    c: usize,
    kf: usize,
    kt: usize,
    cols: &mut [F],
) {
    let pad_f = (kf - 1) / 2;
    let pad_t = (kt - 1) / 2;
    let row_len = kf * kt * c;
    debug_assert_eq!(cols.len(), f_dim * t_dim * row_len);
    for v in cols.iter_mut() {
        *v = F::zero();
    }
    for f in 0..f_dim {
        for t in 0..t_dim {
            let row = &mut cols[(f * t_dim + t) * row_len..(f * t_dim + t + 1) * row_len];
            for df in 0..kf {
                let sf = f + df;
                if sf < pad_f || sf >= f_dim + pad_f {
                    continue;
                }
                let sf = sf - pad_f;
                for dt in 0..kt {
                    let st = t + dt;
                    if st < pad_t || st >= t_dim + pad_t {
                        continue;
                    }
                    let st = st - pad_t;
                    let src = &item[(sf * t_dim + st) * c..(sf * t_dim + st + 1) * c];
                    let dst = &mut row[(df * kt + dt) * c..(df * kt + dt + 1) * c];
                    dst.copy_from_slice(src);
                }
            }
        }
    }
}

/// Scatter-adds an im2col-layout gradient back onto the input item
/// (the adjoint of [`im2col`]).
fn col2im_acc<F: Element>(
    cols: &[F],
    f_dim: usize,
    t_dim: usize,
    c: usize,
    kf: usize,
    kt: usize,
    d_item: &mut [F],
) {
    let pad_f = (kf - 1) / 2;
    let pad_t = (kt - 1) / 2;
    let row_len = kf * kt * c;
    for f in 0..f_dim {
        for t in 0..t_dim {
            let row = &cols[(f * t_dim + t) * row_len..(f * t_dim + t + 1) * row_len];
            for df in 0..kf {
                let sf = f + df;
                if sf < pad_f || sf >= f_dim + pad_f {
                    continue;
                }
                let sf = sf - pad_f;
                for dt in 0..kt {
                    let st = t + dt;
                    if st < pad_t || st >= t_dim + pad_t {
                        continue;
                    }
                    let st = st - pad_t;
                    let src = &row[(df * kt + dt) * c..(df * kt + dt + 1) * c];
                    let dst = &mut d_item[(sf * t_dim + st) * c..(sf * t_dim + st + 1) * c];
                    for (d, &s) in dst.iter_mut().zip(src.iter()) {
                        *d = *d + s;
                    }
                }
            }
        }
    }
}

/// 2-D convolution, zero padding, stride 1: output keeps (freq, time) and
/// maps `c_in` to `c_out` channels. Kernel is `(kf, kt, c_in, c_out)` with
/// odd `kf`, `kt`; bias is `(c_out)`.
pub fn conv_forward<F: Element>(
    input: &Tensor<F>,
    w: &Tensor<F>,
    b: &Tensor<F>,
) -> Result<Tensor<F>> {
    let (bsz, f_dim, t_dim, c_in) = expect_map(input, "conv")?;
    let (kf, kt, wc_in, c_out) = match *w.shape() {
        [a, b_, c, d] => (a, b_, c, d),
        _ => return Err(Error::Shape(format!("conv kernel shape {:?}", w.shape()))),
    };
    if kf % 2 == 0 || kt % 2 == 0 {
        return Err(Error::Shape(format!("conv kernel must be odd-sized, got {kf}×{kt}")));
    }
    if wc_in != c_in || b.numel() != c_out {
        return Err(Error::Shape(format!(
            "conv kernel {:?} / bias {:?} vs input {:?}",
            w.shape(),
            b.shape(),
            input.shape()
        )));
    }
    let row_len = kf * kt * c_in;
    let mut out = Tensor::zeros(&[bsz, f_dim, t_dim, c_out]);
    let in_item = input.item_len();
    let out_item = f_dim * t_dim * c_out;
    let in_data = input.data();
    let w_data = w.data();
    let b_data = b.data();
    out.data_mut()
        .par_chunks_mut(out_item)
        .enumerate()
        .for_each(|(bi, out_chunk)| {
            let item = &in_data[bi * in_item..(bi + 1) * in_item];
            let mut cols = vec![F::zero(); f_dim * t_dim * row_len];
            im2col(item, f_dim, t_dim, c_in, kf, kt, &mut cols);
            // out_chunk starts at the broadcast bias.
            for pos in 0..f_dim * t_dim {
                out_chunk[pos * c_out..(pos + 1) * c_out].copy_from_slice(b_data);
            }
            gemm_acc(out_chunk, &cols, w_data, f_dim * t_dim, row_len, c_out);
        });
    Ok(out)
}

/// Gradients of [`conv_forward`] with respect to input, kernel and bias.
pub fn conv_backward<F: Element>(
    input: &Tensor<F>,
    w: &Tensor<F>,
    d_out: &Tensor<F>,
) -> Result<(Tensor<F>, Tensor<F>, Tensor<F>)> {
    let (bsz, f_dim, t_dim, c_in) = expect_map(input, "conv backward")?;
    let (kf, kt, _, c_out) = match *w.shape() {
        [a, b_, c, d] => (a, b_, c, d),
        _ => return Err(Error::Shape(format!("conv kernel shape {:?}", w.shape()))),
    };
    if d_out.shape() != [bsz, f_dim, t_dim, c_out] {
        return Err(Error::Shape(format!(
            "conv backward output gradient {:?} vs expected {:?}",
            d_out.shape(),
            [bsz, f_dim, t_dim, c_out]
        )));
    }
    let row_len = kf * kt * c_in;
    let positions = f_dim * t_dim;
    let w_t = transpose(w.data(), row_len, c_out);
    let in_item = input.item_len();
    let out_item = positions * c_out;
    let in_data = input.data();
    let dout_data = d_out.data();

    let mut d_input = Tensor::zeros(input.shape());
    // Per-item partial kernel/bias gradients, reduced sequentially in item
    // order so accumulation order (and therefore the result bit pattern)
    // does not depend on thread scheduling.
    let partials: Vec<(Vec<F>, Vec<F>)> = d_input
        .data_mut()
        .par_chunks_mut(in_item)
        .enumerate()
        .map(|(bi, dx_chunk)| {
            let item = &in_data[bi * in_item..(bi + 1) * in_item];
            let dout_item = &dout_data[bi * out_item..(bi + 1) * out_item];
            let mut cols = vec![F::zero(); positions * row_len];
            im2col(item, f_dim, t_dim, c_in, kf, kt, &mut cols);

            let mut dw = vec![F::zero(); row_len * c_out];
            gemm_at_acc(&mut dw, &cols, dout_item, positions, row_len, c_out);

            let mut db = vec![F::zero(); c_out];
            for pos in 0..positions {
                for (d, &g) in db.iter_mut().zip(&dout_item[pos * c_out..(pos + 1) * c_out]) {
                    *d = *d + g;
                }
            }

            // d_cols = dOut · Wᵀ, then scatter back to the input layout.
            let mut d_cols = vec![F::zero(); positions * row_len];
            gemm_acc(&mut d_cols, dout_item, &w_t, positions, c_out, row_len);
            col2im_acc(&d_cols, f_dim, t_dim, c_in, kf, kt, dx_chunk);

            (dw, db)
        })
        .collect();

    let mut d_w = Tensor::zeros(w.shape());
    let mut d_b = Tensor::zeros(&[c_out]);
    for (dw, db) in partials {
        for (a, b_) in d_w.data_mut().iter_mut().zip(dw) {
            *a = *a + b_;
        }
        for (a, b_) in d_b.data_mut().iter_mut().zip(db) {
            *a = *a + b_;
        }
    }
    Ok((d_input, d_w, d_b))
}

// ---------------------------------------------------------------------------
// Batch normalization
// ---------------------------------------------------------------------------

/// Per-channel statistics a training-mode batch-norm pass computed and
/// needs again in its backward pass.
#[derive(Debug, Clone)]
pub struct BnBatchStats<F: Element> {
    pub mean: Vec<F>,
    pub var: Vec<F>,
}

/// Training-mode batch norm: normalizes each channel with the batch's own
/// mean and (biased) variance, then applies the learnable scale and shift.
pub fn batch_norm_train<F: Element>(
    input: &Tensor<F>,
    gamma: &[F],
    beta: &[F],
) -> Result<(Tensor<F>, BnBatchStats<F>)> {
    let (bsz, f_dim, t_dim, c) = expect_map(input, "batch norm")?;
    if bsz < 2 {
        return Err(Error::Input(format!(
            "batch statistics want a batch of at least 2 items, got {bsz}"
        )));
    }
    if gamma.len() != c || beta.len() != c {
        return Err(Error::Shape(format!("batch norm scale/shift length vs {c} channels")));
    }
    let n = F::of((bsz * f_dim * t_dim) as f64);
    let mut mean = vec![F::zero(); c];
    for pos in 0..bsz * f_dim * t_dim {
        for (m, &x) in mean.iter_mut().zip(&input.data()[pos * c..(pos + 1) * c]) {
            *m = *m + x;
        }
    }
    for m in mean.iter_mut() {
        *m = *m / n;
    }
    let mut var = vec![F::zero(); c];
    for pos in 0..bsz * f_dim * t_dim {
        let row = &input.data()[pos * c..(pos + 1) * c];
        for ci in 0..c {
            let d = row[ci] - mean[ci];
            var[ci] = var[ci] + d * d;
        }
    }
    for v in var.iter_mut() {
        *v = *v / n;
    }
    let out = bn_apply(input, gamma, beta, &mean, &var);
    Ok((out, BnBatchStats { mean, var }))
}

/// Inference-mode batch norm: normalizes with stored running statistics.
pub fn batch_norm_infer<F: Element>(
    input: &Tensor<F>,
    gamma: &[F],
    beta: &[F],
    running_mean: &[F],
    running_var: &[F],
) -> Result<Tensor<F>> {
    let (_, _, _, c) = expect_map(input, "batch norm")?;
    if gamma.len() != c || running_mean.len() != c || running_var.len() != c {
        return Err(Error::Shape(format!("batch norm state length vs {c} channels")));
    }
    Ok(bn_apply(input, gamma, beta, running_mean, running_var))
}

fn bn_apply<F: Element>(
    input: &Tensor<F>,
    gamma: &[F],
    beta: &[F],
    mean: &[F],
    var: &[F],
) -> Tensor<F> {
    let c = gamma.len();
    let eps = F::of(BN_EPS);
    let scale: Vec<F> =
        gamma.iter().zip(var.iter()).map(|(&g, &v)| g / (v + eps).sqrt()).collect();
    let mut out = Tensor::zeros(input.shape());
    let positions = input.numel() / c;
    for pos in 0..positions {
        let src = &input.data()[pos * c..(pos + 1) * c];
        let dst = &mut out.data_mut()[pos * c..(pos + 1) * c];
        for ci in 0..c {
            dst[ci] = scale[ci] * (src[ci] - mean[ci]) + beta[ci];
        }
    }
    out
}

/// Gradients of [`batch_norm_train`] w.r.t. input, scale and shift.
pub fn batch_norm_backward<F: Element>(
    input: &Tensor<F>,
    gamma: &[F],
    stats: &BnBatchStats<F>,
    d_out: &Tensor<F>,
) -> Result<(Tensor<F>, Vec<F>, Vec<F>)> {
    let (bsz, f_dim, t_dim, c) = expect_map(input, "batch norm backward")?;
    if d_out.shape() != input.shape() {
        return Err(Error::Shape("batch norm backward gradient shape".into()));
    }
    let n_usize = bsz * f_dim * t_dim;
    let n = F::of(n_usize as f64);
    let eps = F::of(BN_EPS);
    let inv_std: Vec<F> = stats.var.iter().map(|&v| F::one() / (v + eps).sqrt()).collect();

    // s1[c] = Σ dy, s2[c] = Σ dy·x̂, plus dβ = s1 and dγ = s2.
    let mut s1 = vec![F::zero(); c];
    let mut s2 = vec![F::zero(); c];
    for pos in 0..n_usize {
        let x = &input.data()[pos * c..(pos + 1) * c];
        let dy = &d_out.data()[pos * c..(pos + 1) * c];
        for ci in 0..c {
            let xh = (x[ci] - stats.mean[ci]) * inv_std[ci];
            s1[ci] = s1[ci] + dy[ci];
            s2[ci] = s2[ci] + dy[ci] * xh;
        }
    }
    let mut d_input = Tensor::zeros(input.shape());
    for pos in 0..n_usize {
        let x = &input.data()[pos * c..(pos + 1) * c];
        let dy = &d_out.data()[pos * c..(pos + 1) * c];
        let dx = &mut d_input.data_mut()[pos * c..(pos + 1) * c];
        for ci in 0..c {
            let xh = (x[ci] - stats.mean[ci]) * inv_std[ci];
            dx[ci] = gamma[ci] * inv_std[ci] * (dy[ci] - s1[ci] / n - xh * s2[ci] / n);
        }
    }
    Ok((d_input, s2, s1))
}

/// Folds batch statistics into running averages:
/// `running ← BN_MOMENTUM·running + (1−BN_MOMENTUM)·batch`.
pub fn bn_update_running<F: Element>(running: &mut [F], batch: &[F]) {
    let m = F::of(BN_MOMENTUM);
    let one_m = F::of(1.0 - BN_MOMENTUM);
    for (r, &b) in running.iter_mut().zip(batch.iter()) {
        *r = m * *r + one_m * b;
    }
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

/// Elementwise max(0, x). The returned mask (1 where x > 0) is what the
/// backward pass needs.
pub fn relu_forward<F: Element>(input: &Tensor<F>) -> (Tensor<F>, Vec<u8>) {
    let mut out = input.clone();
    let mut mask = vec![0u8; input.numel()];
    for (v, m) in out.data_mut().iter_mut().zip(mask.iter_mut()) {
        if *v > F::zero() {
            *m = 1;
        } else {
            *v = F::zero();
        }
    }
    (out, mask)
}

/// dx = dy where the forward input was positive, else 0.
pub fn relu_backward<F: Element>(mask: &[u8], d_out: &Tensor<F>) -> Tensor<F> {
    let mut dx = d_out.clone();
    for (v, &m) in dx.data_mut().iter_mut().zip(mask.iter()) {
        if m == 0 {
            *v = F::zero();
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

/// Training-mode dropout: multiplies by an unscaled Bernoulli(1−rate) mask
/// drawn from `rng`. (Inference applies no compensation scaling — the
/// published scheme keeps plain identity at test time, and the toolkit
/// reproduces that behaviour as stated rather than the inverted variant.)
pub fn dropout_train<F: Element>(
    input: &Tensor<F>,
    rate: f64,
    rng: &mut impl rand::Rng,
) -> Result<(Tensor<F>, Vec<u8>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Range(format!("dropout rate {rate} outside [0, 1)")));
    }
    let keep = 1.0 - rate;
    let mut out = input.clone();
    let mut mask = vec![0u8; input.numel()];
    for (v, m) in out.data_mut().iter_mut().zip(mask.iter_mut()) {
        if rng.random::<f64>() < keep {
            *m = 1;
        } else {
            *v = F::zero();
        }
    }
    Ok((out, mask))
}

/// dx = dy masked by the forward draw.
pub fn dropout_backward<F: Element>(mask: &[u8], d_out: &Tensor<F>) -> Tensor<F> {
    relu_backward(mask, d_out)
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

/// k×k average pooling with stride k; freq and time must divide by k.
pub fn avg_pool_forward<F: Element>(input: &Tensor<F>, k: usize) -> Result<Tensor<F>> {
    let (bsz, f_dim, t_dim, c) = expect_map(input, "avg pool")?;
    if k == 0 || f_dim % k != 0 || t_dim % k != 0 {
        return Err(Error::Shape(format!(
            "avg pool {k}×{k} does not tile a {f_dim}×{t_dim} map"
        )));
    }
    let (fo, to) = (f_dim / k, t_dim / k);
    let mut out = Tensor::zeros(&[bsz, fo, to, c]);
    let norm = F::of((k * k) as f64);
    for bi in 0..bsz {
        let item = input.item(bi);
        let dst = out.item_mut(bi);
        for f in 0..fo {
            for t in 0..to {
                let cell = &mut dst[(f * to + t) * c..(f * to + t + 1) * c];
                for df in 0..k {
                    for dt in 0..k {
                        let sf = f * k + df;
                        let st = t * k + dt;
                        let src = &item[(sf * t_dim + st) * c..(sf * t_dim + st + 1) * c];
                        for (d, &s) in cell.iter_mut().zip(src.iter()) {
                            *d = *d + s;
                        }
                    }
                }
                for d in cell.iter_mut() {
                    *d = *d / norm;
                }
            }
        }
    }
    Ok(out)
}

/// Backward of average pooling: spreads each output gradient evenly over
/// its k×k window.
pub fn avg_pool_backward<F: Element>(
    in_shape: &[usize],
    k: usize,
    d_out: &Tensor<F>,
) -> Result<Tensor<F>> {
    let (bsz, f_dim, t_dim, c) = match *in_shape {
        [b, f, t, c] => (b, f, t, c),
        _ => return Err(Error::Shape("avg pool backward input shape".into())),
    };
    let (fo, to) = (f_dim / k, t_dim / k);
    if d_out.shape() != [bsz, fo, to, c] {
        return Err(Error::Shape("avg pool backward gradient shape".into()));
    }
    let mut dx = Tensor::zeros(in_shape);
    let norm = F::of((k * k) as f64);
    for bi in 0..bsz {
        let src = d_out.item(bi);
        let dst = dx.item_mut(bi);
        for f in 0..f_dim {
            for t in 0..t_dim {
                let cell = &src[((f / k) * to + t / k) * c..((f / k) * to + t / k + 1) * c];
                let d = &mut dst[(f * t_dim + t) * c..(f * t_dim + t + 1) * c];
                for (o, &g) in d.iter_mut().zip(cell.iter()) {
                    *o = g / norm;
                }
            }
        }
    }
    Ok(dx)
}

/// Global average pooling: collapses (freq, time), keeping one value per
/// channel. Output is `(batch, channels)`.
pub fn global_avg_pool_forward<F: Element>(input: &Tensor<F>) -> Result<Tensor<F>> {
    let (bsz, f_dim, t_dim, c) = expect_map(input, "global avg pool")?;
    let mut out = Tensor::zeros(&[bsz, c]);
    let norm = F::of((f_dim * t_dim) as f64);
    for bi in 0..bsz {
        let item = input.item(bi);
        let dst = out.item_mut(bi);
        for pos in 0..f_dim * t_dim {
            for (d, &s) in dst.iter_mut().zip(&item[pos * c..(pos + 1) * c]) {
                *d = *d + s;
            }
        }
        for d in dst.iter_mut() {
            *d = *d / norm;
        }
    }
    Ok(out)
}

/// Backward of global average pooling.
pub fn global_avg_pool_backward<F: Element>(
    in_shape: &[usize],
    d_out: &Tensor<F>,
) -> Result<Tensor<F>> {
    let (bsz, f_dim, t_dim, c) = match *in_shape {
        [b, f, t, c] => (b, f, t, c),
        _ => return Err(Error::Shape("global avg pool backward input shape".into())),
    };
    if d_out.shape() != [bsz, c] {
        return Err(Error::Shape("global avg pool backward gradient shape".into()));
    }
    let mut dx = Tensor::zeros(in_shape);
    let norm = F::of((f_dim * t_dim) as f64);
    for bi in 0..bsz {
        let src = d_out.item(bi);
        let dst = dx.item_mut(bi);
        for pos in 0..f_dim * t_dim {
            for (d, &g) in dst[pos * c..(pos + 1) * c].iter_mut().zip(src.iter()) {
                *d = g / norm;
            }
        }
    }
    Ok(dx)
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

/// Fully-connected layer: `y = x·Wᵀ + b` with `W (out, in)`, `x (batch, in)`.
pub fn dense_forward<F: Element>(
    input: &Tensor<F>,
    w: &Tensor<F>,
    b: &Tensor<F>,
) -> Result<Tensor<F>> {
    let (bsz, n_in) = expect_flat(input, "dense")?;
    let (m_out, wn_in) = match *w.shape() {
        [m, n] => (m, n),
        _ => return Err(Error::Shape(format!("dense weight shape {:?}", w.shape()))),
    };
    if wn_in != n_in || b.numel() != m_out {
        return Err(Error::Shape(format!(
            "dense weight {:?} / bias {:?} vs input {:?}",
            w.shape(),
            b.shape(),
            input.shape()
        )));
    }
    let mut out = Tensor::zeros(&[bsz, m_out]);
    for bi in 0..bsz {
        out.item_mut(bi).copy_from_slice(b.data());
    }
    let w_t = transpose(w.data(), m_out, n_in);
    gemm_acc(out.data_mut(), input.data(), &w_t, bsz, n_in, m_out);
    Ok(out)
}

/// Gradients of [`dense_forward`] w.r.t. input, weight and bias.
pub fn dense_backward<F: Element>(
    input: &Tensor<F>,
    w: &Tensor<F>,
    d_out: &Tensor<F>,
) -> Result<(Tensor<F>, Tensor<F>, Tensor<F>)> {
    let (bsz, n_in) = expect_flat(input, "dense backward")?;
    let (m_out, _) = match *w.shape() {
        [m, n] => (m, n),
        _ => return Err(Error::Shape(format!("dense weight shape {:?}", w.shape()))),
    };
    if d_out.shape() != [bsz, m_out] {
        return Err(Error::Shape("dense backward gradient shape".into()));
    }
    let mut dx = Tensor::zeros(input.shape());
    gemm_acc(dx.data_mut(), d_out.data(), w.data(), bsz, m_out, n_in);
    let mut dw = Tensor::zeros(w.shape());
    gemm_at_acc(dw.data_mut(), d_out.data(), input.data(), bsz, m_out, n_in);
    let mut db = Tensor::zeros(&[m_out]);
    for bi in 0..bsz {
        for (d, &g) in db.data_mut().iter_mut().zip(d_out.item(bi)) {
            *d = *d + g;
        }
    }
    Ok((dx, dw, db))
}

// ---------------------------------------------------------------------------
// Softmax
// ---------------------------------------------------------------------------

/// Row-wise stabilized softmax: subtracts each row's maximum before
/// exponentiation. Non-finite inputs are rejected.
pub fn softmax_forward<F: Element>(input: &Tensor<F>) -> Result<Tensor<F>> {
    let (bsz, c) = expect_flat(input, "softmax")?;
    if !input.all_finite() {
        return Err(Error::Numeric("softmax received non-finite logits".into()));
    }
    let mut out = input.clone();
    for bi in 0..bsz {
        let row = &mut out.data_mut()[bi * c..(bi + 1) * c];
        let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    Ok(out)
}

/// Backward of softmax given its output `y`: dx = y ⊙ (dy − ⟨y, dy⟩).
pub fn softmax_backward<F: Element>(output: &Tensor<F>, d_out: &Tensor<F>) -> Result<Tensor<F>> {
    let (bsz, c) = expect_flat(output, "softmax backward")?;
    if d_out.shape() != output.shape() {
        return Err(Error::Shape("softmax backward gradient shape".into()));
    }
    let mut dx = Tensor::zeros(output.shape());
    for bi in 0..bsz {
        let y = &output.data()[bi * c..(bi + 1) * c];
        let dy = &d_out.data()[bi * c..(bi + 1) * c];
        let dot: F = y.iter().zip(dy.iter()).map(|(&a, &b)| a * b).sum();
        let row = &mut dx.data_mut()[bi * c..(bi + 1) * c];
        for ci in 0..c {
            row[ci] = y[ci] * (dy[ci] - dot);
        }
    }
    Ok(dx)
}

// ---------------------------------------------------------------------------
// Mixture of experts
// ---------------------------------------------------------------------------

/// What the mixture-of-experts backward pass needs from its forward pass.
#[derive(Debug)]
pub struct MoeCache<F: Element> {
    input: Tensor<F>,
    /// ReLU masks of each expert's pre-activation.
    masks: Vec<Vec<u8>>,
    /// Gate probabilities, shape (batch, experts).
    gate: Tensor<F>,
    /// Post-ReLU expert outputs, each (batch, width).
    expert_out: Vec<Tensor<F>>,
}

impl<F: Element> MoeCache<F> {
    /// Gate probabilities recorded during the forward pass (batch, experts).
    pub fn gate(&self) -> &Tensor<F> {
        &self.gate
    }
}

fn moe_check<F: Element>(
    expert_w: &[&Tensor<F>],
    expert_b: &[&Tensor<F>],
) -> Result<()> {
    if expert_w.is_empty() {
        return Err(Error::Input("mixture needs at least one expert".into()));
    }
    if expert_w.len() != expert_b.len() {
        return Err(Error::Shape(format!(
            "{} expert weights vs {} expert biases",
            expert_w.len(),
            expert_b.len()
        )));
    }
    Ok(())
}

/// Mixture-of-experts mixing: every expert is a ReLU-activated dense layer
/// `e_k = relu(x·W_kᵀ + b_k)`; a dense gate with row-wise softmax produces
/// convex weights `g`; the output is the gated sum `Σ_k g_k·e_k` (logits —
/// follow with a softmax for probabilities).
pub fn moe_mix_forward<F: Element>(
    input: Tensor<F>,
    expert_w: &[&Tensor<F>],
    expert_b: &[&Tensor<F>],
    gate_w: &Tensor<F>,
    gate_b: &Tensor<F>,
) -> Result<(Tensor<F>, MoeCache<F>)> {
    moe_check(expert_w, expert_b)?;
    let gate = softmax_forward(&dense_forward(&input, gate_w, gate_b)?)?;
    let (bsz, k) = (gate.shape()[0], gate.shape()[1]);
    let mut masks = Vec::with_capacity(k);
    let mut expert_out = Vec::with_capacity(k);
    let mut out: Option<Tensor<F>> = None;
    for (ki, (w, b)) in expert_w.iter().zip(expert_b.iter()).enumerate() {
        let (e, mask) = relu_forward(&dense_forward(&input, w, b)?);
        let acc = out.get_or_insert_with(|| Tensor::zeros(e.shape()));
        if acc.shape() != e.shape() {
            return Err(Error::Shape(format!(
                "expert {ki} emits {:?}, expected {:?}",
                e.shape(),
                acc.shape()
            )));
        }
        for bi in 0..bsz {
            let g = gate.item(bi)[ki];
            for (a, &v) in acc.item_mut(bi).iter_mut().zip(e.item(bi)) {
                *a = *a + g * v;
            }
        }
        masks.push(mask);
        expert_out.push(e);
    }
    let out = out.expect("at least one expert checked above");
    Ok((out, MoeCache { input, masks, gate, expert_out }))
}

/// Inference-mode mixture-of-experts mixing (identical arithmetic to the
/// training pass; the layer has no mode-dependent behaviour).
pub fn moe_mix_infer<F: Element>(
    input: &Tensor<F>,
    expert_w: &[&Tensor<F>],
    expert_b: &[&Tensor<F>],
    gate_w: &Tensor<F>,
    gate_b: &Tensor<F>,
) -> Result<Tensor<F>> {
    let (out, _) = moe_mix_forward(input.clone(), expert_w, expert_b, gate_w, gate_b)?;
    Ok(out)
}

/// Gradients of [`moe_mix_forward`] w.r.t. input, every expert's weight and
/// bias (in expert order), and the gate's weight and bias.
#[allow(clippy::type_complexity)]
pub fn moe_mix_backward<F: Element>(
    cache: &MoeCache<F>,
    expert_w: &[&Tensor<F>],
    gate_w: &Tensor<F>,
    d_out: &Tensor<F>,
) -> Result<(Tensor<F>, Vec<(Tensor<F>, Tensor<F>)>, Tensor<F>, Tensor<F>)> {
    let k = cache.expert_out.len();
    if expert_w.len() != k {
        return Err(Error::Shape(format!(
            "{} expert weights vs cache of {k} experts",
            expert_w.len()
        )));
    }
    if d_out.shape() != cache.expert_out[0].shape() {
        return Err(Error::Shape("mixture backward gradient shape".into()));
    }
    let bsz = d_out.shape()[0];
    let mut dx = Tensor::zeros(cache.input.shape());
    let mut d_experts = Vec::with_capacity(k);
    let mut d_gate = Tensor::zeros(cache.gate.shape());
    for ki in 0..k {
        // de_k = g_k ⊙ dy; dg_k = ⟨dy, e_k⟩ per batch row.
        let mut de = d_out.clone();
        for bi in 0..bsz {
            let g = cache.gate.item(bi)[ki];
            let mut dot = F::zero();
            for (d, &e) in de.item_mut(bi).iter_mut().zip(cache.expert_out[ki].item(bi)) {
                dot = dot + *d * e;
                *d = *d * g;
            }
            d_gate.item_mut(bi)[ki] = dot;
        }
        let dz = relu_backward(&cache.masks[ki], &de);
        let (dxk, dw, db) = dense_backward(&cache.input, expert_w[ki], &dz)?;
        dx.add_assign(&dxk)?;
        d_experts.push((dw, db));
    }
    let d_logits = softmax_backward(&cache.gate, &d_gate)?;
    let (dxg, d_gate_w, d_gate_b) = dense_backward(&cache.input, gate_w, &d_logits)?;
    dx.add_assign(&dxg)?;
    Ok((dx, d_experts, d_gate_w, d_gate_b))
}
