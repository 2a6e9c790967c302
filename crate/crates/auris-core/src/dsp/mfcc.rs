//! Two-dimensional orthonormal cosine transform of a log-mel matrix.

use crate::dsp::types::{Spectrogram, TransformKind};
use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Orthonormal DCT-II matrix of size n×n:
/// `C[k][j] = λ(k)·√(2/n)·cos(π(2j+1)k/(2n))` with `λ(0)=1/√2`, else 1.
/// Rows form an orthonormal basis, so `C·Cᵀ = I`.
fn dct_matrix(n: usize) -> Vec<f64> {
    let scale = (2.0 / n as f64).sqrt();
    let mut c = vec![0.0f64; n * n];
    for k in 0..n {
        let lambda = if k == 0 { std::f64::consts::FRAC_1_SQRT_2 } else { 1.0 };
        for j in 0..n {
            let arg = std::f64::consts::PI * (2 * j + 1) as f64 * k as f64 / (2 * n) as f64;
            c[k * n + j] = lambda * scale * arg.cos();
        }
    }
    c
}

/// Cepstral coefficients: the 2-D orthonormal DCT of the input matrix,
/// applied separably (rows along frequency, then rows along time), with
/// the frequency axis truncated to the first `keep` coefficients. The
/// frequency axis of the result is the coefficient index.
pub fn mfcc(spec: &Spectrogram, keep: usize) -> Result<Spectrogram> {
    let (f, t) = (spec.rows(), spec.frames());
    if keep == 0 || keep > f {
        return Err(Error::Config(format!(
            "cannot keep {keep} coefficients of a {f}-row spectrogram"
        )));
    }
    let c_f = dct_matrix(f);
    let c_t = dct_matrix(t);
    let x = spec.values().data();

    // Y = C_f · X — only the first `keep` output rows are ever needed.
    let mut mid = vec![0.0f64; keep * t];
    for k in 0..keep {
        for j in 0..f {
            let w = c_f[k * f + j];
            for tt in 0..t {
                mid[k * t + tt] += w * x[j * t + tt] as f64;
            }
        }
    }
    // Z = Y · C_tᵀ.
    let mut out = vec![0.0f32; keep * t];
    for k in 0..keep {
        for l in 0..t {
            let mut acc = 0.0f64;
            for tt in 0..t {
                acc += mid[k * t + tt] * c_t[l * t + tt];
            }
            out[k * t + l] = acc as f32;
        }
    }

    let axis = (0..keep).map(|k| k as f64).collect();
    Spectrogram::new(Tensor::from_vec(&[keep, t], out)?, axis, spec.frame_hop(), TransformKind::Mfcc)
}
