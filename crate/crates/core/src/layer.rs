//! Layer descriptors and network specifications.
//!
//! A [`NetworkSpec`] is the single description every other part of the crate
//! works from: parameter allocation, shape propagation, receptive-field
//! arithmetic, the sliding-window oracle and the weight container all read it.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Convolution: cross-correlation with optional channel groups and a fused
/// ReLU on the output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub groups: usize,
    pub relu: bool,
}

impl ConvSpec {
    pub fn new(out_channels: usize, kernel: (usize, usize)) -> Self {
        ConvSpec {
            out_channels,
            kernel,
            stride: (1, 1),
            padding: (0, 0),
            groups: 1,
            relu: true,
        }
    }

    pub fn stride(mut self, stride: (usize, usize)) -> Self {
        self.stride = stride;
        self
    }

    pub fn padding(mut self, padding: (usize, usize)) -> Self {
        self.padding = padding;
        self
    }

    pub fn groups(mut self, groups: usize) -> Self {
        self.groups = groups;
        self
    }

    pub fn linear(mut self) -> Self {
        self.relu = false;
        self
    }
}

/// Pooling window. `ceil_mode` is per axis (height, width); with ceil mode the
/// last window may hang over the bottom/right edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolSpec {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub ceil_mode: (bool, bool),
}

impl PoolSpec {
    pub fn new(kernel: (usize, usize), stride: (usize, usize)) -> Self {
        PoolSpec {
            kernel,
            stride,
            padding: (0, 0),
            ceil_mode: (false, false),
        }
    }

    pub fn ceil(mut self, ceil_mode: (bool, bool)) -> Self {
        self.ceil_mode = ceil_mode;
        self
    }
}

/// Across-channel local response normalization,
/// `b_c = a_c / (k + alpha * sum_{c' in window(c)} a_c'^2)^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrnParams {
    pub size: usize,
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
}

impl Default for LrnParams {
    fn default() -> Self {
        LrnParams {
            size: 5,
            alpha: 1e-4,
            beta: 0.75,
            k: 2.0,
        }
    }
}

pub const DEFAULT_DROPOUT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LayerKind {
    Conv(ConvSpec),
    MaxPool(PoolSpec),
    AvgPool(PoolSpec),
    Lrn(LrnParams),
    Relu,
    Dropout { rate: f64 },
    Softmax,
}

impl LayerKind {
    pub fn tag(&self) -> &'static str {
        match self {
            LayerKind::Conv(c) if c.relu => "conv+relu",
            LayerKind::Conv(_) => "conv",
            LayerKind::MaxPool(_) => "maxpool",
            LayerKind::AvgPool(_) => "avgpool",
            LayerKind::Lrn(_) => "lrn",
            LayerKind::Relu => "relu",
            LayerKind::Dropout { .. } => "dropout",
            LayerKind::Softmax => "softmax",
        }
    }

    /// (kernel, stride, padding) along `axis` (0 = height, 1 = width) for
    /// layers with spatial extent.
    pub fn window(&self, axis: usize) -> Option<(usize, usize, usize)> {
        let pick = |p: (usize, usize)| if axis == 0 { p.0 } else { p.1 };
        match self {
            LayerKind::Conv(c) => Some((pick(c.kernel), pick(c.stride), pick(c.padding))),
            LayerKind::MaxPool(p) | LayerKind::AvgPool(p) => Some((pick(p.kernel), pick(p.stride), pick(p.padding))),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        LayerSpec {
            name: name.into(),
            kind,
        }
    }

    pub fn validate(&self, in_channels: usize) -> Result<()> {
        let bad = |detail: String| {
            Err(Error::InvalidLayer {
                layer: self.name.clone(),
                detail,
            })
        };
        let positive = |p: (usize, usize)| p.0 >= 1 && p.1 >= 1;
        match &self.kind {
            LayerKind::Conv(c) => {
                if !positive(c.kernel) || !positive(c.stride) {
                    return bad("kernel and stride extents must be >= 1".into());
                }
                if c.out_channels == 0 || c.groups == 0 {
                    return bad("out_channels and groups must be >= 1".into());
                }
                if !in_channels.is_multiple_of(c.groups) || !c.out_channels.is_multiple_of(c.groups) {
                    return bad(format!(
                        "groups {} must divide in {} and out {} channels",
                        c.groups, in_channels, c.out_channels
                    ));
                }
            }
            LayerKind::MaxPool(p) | LayerKind::AvgPool(p) => {
                if !positive(p.kernel) || !positive(p.stride) {
                    return bad("kernel and stride extents must be >= 1".into());
                }
                if p.padding.0 >= p.kernel.0 || p.padding.1 >= p.kernel.1 {
                    return bad("pool padding must be smaller than the kernel".into());
                }
                if matches!(self.kind, LayerKind::AvgPool(_)) && (p.ceil_mode.0 || p.ceil_mode.1) {
                    return bad("average pooling supports floor mode only".into());
                }
            }
            LayerKind::Lrn(l) => {
                if l.size == 0 || l.size % 2 == 0 {
                    return bad("LRN window must be odd".into());
                }
            }
            LayerKind::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return bad(format!("dropout rate {rate} outside [0, 1)"));
                }
            }
            LayerKind::Relu | LayerKind::Softmax => {}
        }
        Ok(())
    }

    /// Output `[C, H, W]` for an input of the given shape, or `None` when the
    /// input is too small to produce any output location.
    pub fn output_shape(&self, input: [usize; 3]) -> Option<[usize; 3]> {
        let [c, h, w] = input;
        match &self.kind {
            LayerKind::Conv(conv) => Some([
                conv.out_channels,
                conv_extent(h, conv.kernel.0, conv.stride.0, conv.padding.0)?,
                conv_extent(w, conv.kernel.1, conv.stride.1, conv.padding.1)?,
            ]),
            LayerKind::MaxPool(p) | LayerKind::AvgPool(p) => Some([
                c,
                pool_extent(h, p.kernel.0, p.stride.0, p.padding.0, p.ceil_mode.0)?,
                pool_extent(w, p.kernel.1, p.stride.1, p.padding.1, p.ceil_mode.1)?,
            ]),
            _ => Some(input),
        }
    }
}

/// `floor((n + 2p - k) / s) + 1`, or `None` when the padded input is smaller
/// than the kernel.
pub fn conv_extent(n: usize, k: usize, s: usize, p: usize) -> Option<usize> {
    let padded = n + 2 * p;
    (padded >= k).then(|| (padded - k) / s + 1)
}

/// Pool output extent. Floor mode matches [`conv_extent`]. Ceil mode uses
/// `ceil((n + 2p - k) / s) + 1` and drops a trailing window that would start
/// past the last real element.
pub fn pool_extent(n: usize, k: usize, s: usize, p: usize, ceil_mode: bool) -> Option<usize> {
    if !ceil_mode {
        return conv_extent(n, k, s, p);
    }
    if n == 0 {
        return None;
    }
    let num = (n + 2 * p) as i64 - k as i64;
    let s = s as i64;
    let mut out = num.div_euclid(s) + i64::from(num.rem_euclid(s) != 0) + 1;
    if (out - 1) * s >= (n + p) as i64 {
        out -= 1;
    }
    (out >= 1).then_some(out as usize)
}

/// Ordered layer list describing a fully-convolutional network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub input_channels: usize,
    pub class_count: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        let mut channels = self.input_channels;
        for layer in &self.layers {
            layer.validate(channels)?;
            if let LayerKind::Conv(c) = &layer.kind {
                channels = c.out_channels;
            }
        }
        Ok(())
    }

    /// Input channel count seen by each layer.
    pub fn layer_input_channels(&self) -> Vec<usize> {
        let mut channels = self.input_channels;
        self.layers
            .iter()
            .map(|layer| {
                let here = channels;
                if let LayerKind::Conv(c) = &layer.kind {
                    channels = c.out_channels;
                }
                here
            })
            .collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.name == name)
    }

    /// Shapes at every layer boundary: entry 0 is the input, entry `i + 1`
    /// the output of layer `i`.
    pub fn propagate(&self, input: [usize; 3]) -> Result<Vec<[usize; 3]>> {
        if input[0] != self.input_channels {
            return Err(Error::shape(
                &self.name,
                format!(
                    "input has {} channels, network expects {}",
                    input[0], self.input_channels
                ),
            ));
        }
        let mut shapes = Vec::with_capacity(self.layers.len() + 1);
        shapes.push(input);
        for layer in &self.layers {
            let prev = *shapes.last().unwrap();
            let next = layer.output_shape(prev).ok_or_else(|| {
                Error::shape(
                    &self.name,
                    format!("input {}x{} too small at layer `{}`", input[1], input[2], layer.name),
                )
            })?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    /// Output `[C, Gh, Gw]` for the given input shape.
    pub fn output_shape(&self, input: [usize; 3]) -> Result<[usize; 3]> {
        Ok(*self.propagate(input)?.last().unwrap())
    }

    pub fn conv_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l.kind, LayerKind::Conv(_)))
            .count()
    }
}

/// One line per layer: name, kind, kernel, stride, pad, output channels.
impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let channels = self.layer_input_channels();
        writeln!(
            f,
            "{:<8} {:<10} {:>7} {:>7} {:>7} {:>8}",
            "layer", "kind", "kernel", "stride", "pad", "channels"
        )?;
        for (layer, &in_ch) in self.layers.iter().zip(&channels) {
            let (kernel, stride, pad, out) = match &layer.kind {
                LayerKind::Conv(c) => (
                    format!("{}x{}", c.kernel.0, c.kernel.1),
                    format!("{}x{}", c.stride.0, c.stride.1),
                    format!("{}x{}", c.padding.0, c.padding.1),
                    c.out_channels,
                ),
                LayerKind::MaxPool(p) | LayerKind::AvgPool(p) => (
                    format!("{}x{}", p.kernel.0, p.kernel.1),
                    format!("{}x{}", p.stride.0, p.stride.1),
                    format!("{}x{}", p.padding.0, p.padding.1),
                    in_ch,
                ),
                _ => ("-".into(), "-".into(), "-".into(), in_ch),
            };
            writeln!(
                f,
                "{:<8} {:<10} {:>7} {:>7} {:>7} {:>8}",
                layer.name,
                layer.kind.tag(),
                kernel,
                stride,
                pad,
                out
            )?;
        }
        Ok(())
    }
}
