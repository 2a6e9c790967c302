//! Builders for the single-chain classifier architectures.
//!
//! Three families live here: the plain four-block CNN baseline, the deeper
//! six-block CNN whose classification head is a mixture of experts, and the
//! two-layer lightweight student network. Each builder returns a validated
//! [`NetworkSpec`]; compiled shapes and parameter counts are pinned by tests
//! against the intended architecture tables.

use crate::error::{Error, Result};
use crate::models::spec::NetworkSpec;
use crate::nn::{LayerSpec, Shape};

/// Pooling at the end of a convolution block.
#[derive(Debug, Clone, Copy)]
enum Pool {
    Avg(usize),
    Global,
}

fn push_pool(layers: &mut Vec<LayerSpec>, pool: Pool) {
    match pool {
        Pool::Avg(size) => layers.push(LayerSpec::AvgPool { size }),
        Pool::Global => layers.push(LayerSpec::GlobalAvgPool),
    }
}

/// Conv → ReLU → BN → pool → dropout (the baseline's block order).
fn push_block_conv_first(
    layers: &mut Vec<LayerSpec>,
    out_channels: usize,
    pool: Pool,
    dropout: f64,
) {
    layers.push(LayerSpec::Conv { kernel: (3, 3), out_channels });
    layers.push(LayerSpec::Relu);
    layers.push(LayerSpec::BatchNorm);
    push_pool(layers, pool);
    layers.push(LayerSpec::Dropout { rate: dropout });
}

/// BN → Conv → ReLU → BN → pool → dropout (the six-block networks'
/// double-normalized block order).
pub(crate) fn push_block_bn_first(
    layers: &mut Vec<LayerSpec>,
    out_channels: usize,
    pool_size: Option<usize>,
    global_pool: bool,
    dropout: f64,
) {
    layers.push(LayerSpec::BatchNorm);
    layers.push(LayerSpec::Conv { kernel: (3, 3), out_channels });
    layers.push(LayerSpec::Relu);
    layers.push(LayerSpec::BatchNorm);
    match (pool_size, global_pool) {
        (Some(size), _) => push_pool(layers, Pool::Avg(size)),
        (None, true) => push_pool(layers, Pool::Global),
        (None, false) => {}
    }
    layers.push(LayerSpec::Dropout { rate: dropout });
}

fn check_classes(class_count: usize) -> Result<()> {
    if class_count < 2 {
        return Err(Error::Config(format!(
            "a classifier needs at least 2 classes, got {class_count}"
        )));
    }
    Ok(())
}

/// Four-block CNN baseline: 32/64/128/256 channels with 2×2 average pooling
/// on the first three blocks and global pooling on the fourth, then a
/// 512/1024 fully-connected head.
pub fn build_cdnn_baseline(class_count: usize, input: (usize, usize)) -> Result<NetworkSpec> {
    check_classes(class_count)?;
    let mut layers = Vec::new();
    push_block_conv_first(&mut layers, 32, Pool::Avg(2), 0.10);
    push_block_conv_first(&mut layers, 64, Pool::Avg(2), 0.15);
    push_block_conv_first(&mut layers, 128, Pool::Avg(2), 0.20);
    push_block_conv_first(&mut layers, 256, Pool::Global, 0.25);
    layers.push(LayerSpec::Dense { width: 512 });
    layers.push(LayerSpec::Relu);
    layers.push(LayerSpec::Dropout { rate: 0.30 });
    layers.push(LayerSpec::Dense { width: 1024 });
    layers.push(LayerSpec::Relu);
    layers.push(LayerSpec::Dropout { rate: 0.35 });
    layers.push(LayerSpec::Dense { width: class_count });
    layers.push(LayerSpec::Softmax);
    NetworkSpec::new(
        Shape::Map { freq: input.0, time: input.1, channels: 1 },
        layers,
        class_count,
    )
}

/// Six-block CNN (64…512 channels, 512-wide pooled embedding) whose
/// classification head is a `k_experts`-way mixture of experts applied
/// directly to the pooled embedding.
pub fn build_resp_cnn_moe(
    class_count: usize,
    k_experts: usize,
    input: (usize, usize),
) -> Result<NetworkSpec> {
    check_classes(class_count)?;
    if k_experts == 0 {
        return Err(Error::Config("mixture head needs at least one expert".into()));
    }
    if input.0 != 64 || !matches!(input.1, 64 | 128) {
        return Err(Error::Config(format!(
            "this architecture expects a 64×64 or 64×128 input, got {}×{}",
            input.0, input.1
        )));
    }
    let mut layers = Vec::new();
    push_block_bn_first(&mut layers, 64, Some(2), false, 0.10);
    push_block_bn_first(&mut layers, 128, Some(2), false, 0.15);
    push_block_bn_first(&mut layers, 256, None, false, 0.20);
    push_block_bn_first(&mut layers, 256, Some(2), false, 0.20);
    push_block_bn_first(&mut layers, 512, None, false, 0.25);
    push_block_bn_first(&mut layers, 512, None, true, 0.25);
    layers.push(LayerSpec::MixtureOfExperts { experts: k_experts, width: class_count });
    layers.push(LayerSpec::Softmax);
    NetworkSpec::new(
        Shape::Map { freq: input.0, time: input.1, channels: 1 },
        layers,
        class_count,
    )
}

/// Two-convolution lightweight student: 3×3@128 + 4×4 pooling, 3×3@512 +
/// global pooling, one dense softmax head — no batch norm, no dropout.
pub fn build_student(class_count: usize, input: (usize, usize)) -> Result<NetworkSpec> {
    check_classes(class_count)?;
    let layers = vec![
        LayerSpec::Conv { kernel: (3, 3), out_channels: 128 },
        LayerSpec::Relu,
        LayerSpec::AvgPool { size: 4 },
        LayerSpec::Conv { kernel: (3, 3), out_channels: 512 },
        LayerSpec::Relu,
        LayerSpec::GlobalAvgPool,
        LayerSpec::Dense { width: class_count },
        LayerSpec::Softmax,
    ];
    NetworkSpec::new(
        Shape::Map { freq: input.0, time: input.1, channels: 1 },
        layers,
        class_count,
    )
}

#[cfg(test)]
pub(crate) fn assert_contains_in_order(bounds: &[Shape], expected: &[Shape]) {
    let mut it = bounds.iter();
    for want in expected {
        assert!(
            it.any(|s| s == want),
            "expected boundary {want:?} (in order) in {bounds:?}"
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Initializer, ParamStore, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn baseline_shapes_follow_the_table() {
        let spec = build_cdnn_baseline(10, (128, 128)).unwrap();
        let bounds = spec.boundary_shapes();
        assert_contains_in_order(
            &bounds,
            &[
                Shape::Map { freq: 128, time: 128, channels: 32 },
                Shape::Map { freq: 64, time: 64, channels: 32 },
                Shape::Map { freq: 64, time: 64, channels: 64 },
                Shape::Map { freq: 32, time: 32, channels: 64 },
                Shape::Map { freq: 32, time: 32, channels: 128 },
                Shape::Map { freq: 16, time: 16, channels: 128 },
                Shape::Map { freq: 16, time: 16, channels: 256 },
                Shape::Flat { width: 256 },
                Shape::Flat { width: 512 },
                Shape::Flat { width: 1024 },
                Shape::Flat { width: 10 },
            ],
        );
        assert_eq!(spec.param_count(), 1_055_946);
    }

    #[test]
    fn baseline_forward_emits_a_probability_row() {
        let spec = build_cdnn_baseline(5, (32, 32)).unwrap();
        let mut store: ParamStore<f32> = ParamStore::new();
        let mut init = Initializer::new(11);
        let chain = spec.build("bl", &mut store, &mut init).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f32> =
            (0..2 * 32 * 32).map(|i| ((i * 37 % 101) as f32) / 101.0).collect();
        let x = Tensor::from_vec(&[2, 32, 32, 1], data).unwrap();
        let (probs, _) = chain.forward_train(&mut store, &x, &mut rng).unwrap();
        for bi in 0..2 {
            let sum: f32 = probs.item(bi).iter().sum();
            assert!((sum - 1.0).abs() < 1e-6, "probability row sums to {sum}");
            assert!(probs.item(bi).iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn six_block_mixture_network_shapes_follow_the_table() {
        let spec = build_resp_cnn_moe(3, 10, (64, 64)).unwrap();
        let bounds = spec.boundary_shapes();
        assert_contains_in_order(
            &bounds,
            &[
                Shape::Map { freq: 32, time: 32, channels: 64 },
                Shape::Map { freq: 16, time: 16, channels: 128 },
                Shape::Map { freq: 16, time: 16, channels: 256 },
                Shape::Map { freq: 8, time: 8, channels: 256 },
                Shape::Map { freq: 8, time: 8, channels: 512 },
                Shape::Flat { width: 512 },
                Shape::Flat { width: 3 },
            ],
        );
        assert_eq!(spec.param_count(), 4_526_122);

        let wide = build_resp_cnn_moe(4, 10, (64, 128)).unwrap();
        assert_contains_in_order(
            &wide.boundary_shapes(),
            &[
                Shape::Map { freq: 32, time: 64, channels: 64 },
                Shape::Flat { width: 512 },
                Shape::Flat { width: 4 },
            ],
        );
    }

    #[test]
    fn six_block_mixture_network_rejects_unsupported_inputs() {
        assert!(build_resp_cnn_moe(3, 10, (64, 100)).unwrap_err().is_config());
        assert!(build_resp_cnn_moe(3, 10, (128, 64)).unwrap_err().is_config());
        assert!(build_resp_cnn_moe(3, 0, (64, 64)).unwrap_err().is_config());
        assert!(build_resp_cnn_moe(1, 10, (64, 64)).unwrap_err().is_config());
    }

    #[test]
    fn student_shapes_follow_the_table_and_avoid_bn_and_dropout() {
        let spec = build_student(3, (64, 128)).unwrap();
        assert_contains_in_order(
            &spec.boundary_shapes(),
            &[
                Shape::Map { freq: 64, time: 128, channels: 128 },
                Shape::Map { freq: 16, time: 32, channels: 128 },
                Shape::Map { freq: 16, time: 32, channels: 512 },
                Shape::Flat { width: 512 },
                Shape::Flat { width: 3 },
            ],
        );
        assert_eq!(spec.param_count(), 593_155);
        assert!(!spec.layers().iter().any(|l| matches!(
            l,
            LayerSpec::BatchNorm | LayerSpec::Dropout { .. }
        )));
    }

    #[test]
    fn teacher_and_student_sizes_sit_in_their_bands() {
        let teacher = build_resp_cnn_moe(3, 10, (64, 128)).unwrap();
        let student = build_student(3, (64, 128)).unwrap();
        let (t, s) = (teacher.param_count() as f64, student.param_count() as f64);
        assert!((t - 4.5e6).abs() <= 0.15 * 4.5e6, "teacher has {t} parameters");
        assert!((s - 0.6e6).abs() <= 0.15 * 0.6e6, "student has {s} parameters");
        assert!(t / s >= 5.0, "size ratio {}", t / s);
    }
}
