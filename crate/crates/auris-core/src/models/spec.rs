//! Declarative network descriptions.
//!
//! A [`NetworkSpec`] is an architecture as data: an input shape, an ordered
//! layer list, and the class count the final softmax must emit. Builders in
//! this module family produce specs; [`NetworkSpec::build`] compiles one
//! into a runnable [`Chain`]. Specs also serialize to a line-oriented text
//! descriptor that checkpoints embed, so a saved model records what it is.

use crate::error::{Error, Result};
use crate::nn::{Chain, Element, Initializer, LayerSpec, ParamStore, Shape};

/// A classifier architecture: input shape, ordered layers, class count.
///
/// Invariants (checked at construction): consecutive layer shapes are
/// compatible, and the final layer is a softmax over exactly `class_count`
/// values.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    input: Shape,
    layers: Vec<LayerSpec>,
    class_count: usize,
}

impl NetworkSpec {
    /// Validates and wraps an architecture description.
    pub fn new(input: Shape, layers: Vec<LayerSpec>, class_count: usize) -> Result<Self> {
        if class_count < 2 {
            return Err(Error::Config(format!(
                "a classifier needs at least 2 classes, got {class_count}"
            )));
        }
        if layers.last() != Some(&LayerSpec::Softmax) {
            return Err(Error::Config("network must end with a softmax layer".into()));
        }
        let mut shape = input;
        for spec in &layers {
            shape = shape.apply(spec)?;
        }
        if shape != (Shape::Flat { width: class_count }) {
            return Err(Error::Config(format!(
                "network emits {shape:?}, expected a flat width-{class_count} output"
            )));
        }
        Ok(NetworkSpec { input, layers, class_count })
    }

    pub fn input(&self) -> Shape {
        self.input
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Shape after every layer, input first — one entry per boundary.
    pub fn boundary_shapes(&self) -> Vec<Shape> {
        let mut shapes = vec![self.input];
        let mut s = self.input;
        for spec in &self.layers {
            s = s.apply(spec).expect("validated at construction");
            shapes.push(s);
        }
        shapes
    }

    /// Number of trainable parameters the compiled network will hold
    /// (batch-norm running statistics are state, not parameters).
    pub fn param_count(&self) -> usize {
        let mut total = 0usize;
        let mut shape = self.input;
        for spec in &self.layers {
            total += match (spec, shape) {
                (LayerSpec::Conv { kernel, out_channels }, Shape::Map { channels, .. }) => {
                    kernel.0 * kernel.1 * channels * out_channels + out_channels
                }
                (LayerSpec::BatchNorm, Shape::Map { channels, .. }) => 2 * channels,
                (LayerSpec::Dense { width }, Shape::Flat { width: n_in }) => {
                    width * n_in + width
                }
                (
                    LayerSpec::MixtureOfExperts { experts, width },
                    Shape::Flat { width: n_in },
                ) => experts * (width * n_in + width) + (experts * n_in + experts),
                _ => 0,
            };
            shape = shape.apply(spec).expect("validated at construction");
        }
        total
    }

    /// Compiles the spec into a chain whose parameters live under `prefix`
    /// in `store`.
    pub fn build<F: Element>(
        &self,
        prefix: &str,
        store: &mut ParamStore<F>,
        init: &mut Initializer,
    ) -> Result<Chain<F>> {
        Chain::build(prefix, self.input, &self.layers, store, init)
    }

    /// Line-oriented text descriptor: an `input` line, a `classes` line,
    /// then one line per layer (kind plus hyperparameters).
    pub fn describe(&self) -> String {
        let mut out = String::new();
        out.push_str(&shape_line("input", self.input));
        out.push('\n');
        out.push_str(&format!("classes {}\n", self.class_count));
        for spec in &self.layers {
            out.push_str(&layer_line(spec));
            out.push('\n');
        }
        out
    }

    /// Parses a descriptor produced by [`NetworkSpec::describe`].
    pub fn parse(text: &str) -> Result<NetworkSpec> {
        let bad = |line: &str, why: &str| {
            Error::Config(format!("architecture descriptor line `{line}`: {why}"))
        };
        let mut input: Option<Shape> = None;
        let mut class_count: Option<usize> = None;
        let mut layers = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let arg = |i: usize| -> Result<usize> {
                fields
                    .get(i)
                    .ok_or_else(|| bad(line, "missing argument"))?
                    .parse::<usize>()
                    .map_err(|_| bad(line, "argument is not an integer"))
            };
            match fields[0] {
                "input" => {
                    input = Some(match *fields.get(1).unwrap_or(&"") {
                        "map" => Shape::Map { freq: arg(2)?, time: arg(3)?, channels: arg(4)? },
                        "flat" => Shape::Flat { width: arg(2)? },
                        _ => return Err(bad(line, "expected `map` or `flat`")),
                    });
                }
                "classes" => class_count = Some(arg(1)?),
                "conv" => layers.push(LayerSpec::Conv {
                    kernel: (arg(1)?, arg(2)?),
                    out_channels: arg(3)?,
                }),
                "batchnorm" => layers.push(LayerSpec::BatchNorm),
                "relu" => layers.push(LayerSpec::Relu),
                "dropout" => {
                    let rate = fields
                        .get(1)
                        .ok_or_else(|| bad(line, "missing rate"))?
                        .parse::<f64>()
                        .map_err(|_| bad(line, "rate is not a number"))?;
                    layers.push(LayerSpec::Dropout { rate });
                }
                "avgpool" => layers.push(LayerSpec::AvgPool { size: arg(1)? }),
                "globalavgpool" => layers.push(LayerSpec::GlobalAvgPool),
                "dense" => layers.push(LayerSpec::Dense { width: arg(1)? }),
                "moe" => layers
                    .push(LayerSpec::MixtureOfExperts { experts: arg(1)?, width: arg(2)? }),
                "softmax" => layers.push(LayerSpec::Softmax),
                other => return Err(bad(line, &format!("unknown layer kind `{other}`"))),
            }
        }
        let input = input.ok_or_else(|| Error::Config("descriptor lacks an input line".into()))?;
        let class_count =
            class_count.ok_or_else(|| Error::Config("descriptor lacks a classes line".into()))?;
        NetworkSpec::new(input, layers, class_count)
    }
}

/// One descriptor line for a layer: kind plus hyperparameters.
pub(crate) fn layer_line(spec: &LayerSpec) -> String {
    match spec {
        LayerSpec::Conv { kernel, out_channels } => {
            format!("conv {} {} {out_channels}", kernel.0, kernel.1)
        }
        LayerSpec::BatchNorm => "batchnorm".into(),
        LayerSpec::Relu => "relu".into(),
        LayerSpec::Dropout { rate } => format!("dropout {rate}"),
        LayerSpec::AvgPool { size } => format!("avgpool {size}"),
        LayerSpec::GlobalAvgPool => "globalavgpool".into(),
        LayerSpec::Dense { width } => format!("dense {width}"),
        LayerSpec::MixtureOfExperts { experts, width } => format!("moe {experts} {width}"),
        LayerSpec::Softmax => "softmax".into(),
    }
}

/// One descriptor line for a shape, e.g. `input map 64 64 1`.
pub(crate) fn shape_line(prefix: &str, shape: Shape) -> String {
    match shape {
        Shape::Map { freq, time, channels } => format!("{prefix} map {freq} {time} {channels}"),
        Shape::Flat { width } => format!("{prefix} flat {width}"),
    }
}
