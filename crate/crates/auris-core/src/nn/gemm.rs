//! Small dense matrix kernels backing the convolution and dense layers.
//!
//! The loops are ordered i-k-j with a contiguous innermost `j` run so the
//! compiler can vectorize the multiply-accumulate; the scalar `a` broadcast
//! also lets us skip zero operands, which im2col padding rows and ReLU
//! sparsity make common.

use crate::nn::scalar::Element;

/// `out[m×n] += a[m×k] · b[k×n]`, all row-major.
pub(crate) fn gemm_acc<F: Element>(out: &mut [F], a: &[F], b: &[F], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let zero = F::zero();
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            if av == zero {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                *o = av * bv + *o;
            }
        }
    }
}

/// `out[k×n] += aᵀ · b` with `a[m×k]`, `b[m×n]`, all row-major.
///
/// Used for weight gradients (`dW += colsᵀ·dOut`) without materializing the
/// transpose of the (large) im2col matrix.
pub(crate) fn gemm_at_acc<F: Element>(
    out: &mut [F],
    a: &[F],
    b: &[F],
    m: usize,
    k: usize,
    n: usize,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    let zero = F::zero();
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let brow = &b[i * n..(i + 1) * n];
        for (kk, &av) in arow.iter().enumerate() {
            if av == zero {
                continue;
            }
            let orow = &mut out[kk * n..(kk + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                *o = av * bv + *o;
            }
        }
    }
}

/// Row-major transpose: returns `aᵀ` with `a[m×n]`.
pub(crate) fn transpose<F: Element>(a: &[F], m: usize, n: usize) -> Vec<F> {
    debug_assert_eq!(a.len(), m * n);
    let mut out = vec![F::zero(); m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a[i * n + j];
        }
    }
    out
}
