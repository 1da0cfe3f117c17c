//! Constructors for the haptic, visual, visual-TCNN and fusion networks,
//! receptive-field arithmetic and pretrained trunk import.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layer::{pool_extent, ConvSpec, LayerKind, LayerSpec, LrnParams, NetworkSpec, PoolSpec, DEFAULT_DROPOUT};
use crate::network::Network;
use crate::weights::{checked_conv, WeightFile};

pub const TUM_CLASS_COUNT: usize = 69;

/// Names of the convolutional trunk layers shared with AlexNet.
pub const ALEXNET_TRUNK: [&str; 5] = ["conv1", "conv2", "conv3", "conv4", "conv5"];

/// Which network family a spec belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetKind {
    Haptic,
    Visual,
    VisualTcnn,
}

impl NetKind {
    pub fn name(self) -> &'static str {
        match self {
            NetKind::Haptic => "haptic",
            NetKind::Visual => "visual",
            NetKind::VisualTcnn => "visual-tcnn",
        }
    }
}

impl std::str::FromStr for NetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haptic" => Ok(NetKind::Haptic),
            "visual" => Ok(NetKind::Visual),
            "visual-tcnn" => Ok(NetKind::VisualTcnn),
            _ => Err(Error::Config(format!(
                "unknown network `{s}` (expected haptic, visual or visual-tcnn)"
            ))),
        }
    }
}

/// Scaling knobs. `width_divisor` divides every hidden channel width (the
/// class count is untouched) for CPU-sized experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub width_divisor: usize,
    pub class_count: usize,
    /// AlexNet two-tower channel grouping on conv2, conv4 and conv5.
    pub grouped: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            width_divisor: 1,
            class_count: TUM_CLASS_COUNT,
            grouped: false,
        }
    }
}

impl BuildOptions {
    pub fn scaled(width_divisor: usize, class_count: usize) -> Self {
        BuildOptions {
            width_divisor,
            class_count,
            grouped: false,
        }
    }

    fn width(&self, full: usize) -> usize {
        let w = full.div_ceil(self.width_divisor.max(1)).max(1);
        if self.grouped && w % 2 == 1 {
            w + 1
        } else {
            w
        }
    }

    fn check(&self) -> Result<()> {
        if self.width_divisor == 0 || self.class_count < 2 {
            return Err(Error::Config(format!(
                "width_divisor must be >= 1 and class_count >= 2 (got {}, {})",
                self.width_divisor, self.class_count
            )));
        }
        Ok(())
    }
}

pub fn build(kind: NetKind, opts: &BuildOptions) -> Result<NetworkSpec> {
    match kind {
        NetKind::Haptic => build_hapticnet(opts),
        NetKind::Visual => build_visualnet(opts),
        NetKind::VisualTcnn => build_visualnet_tcnn(opts),
    }
}

fn conv(name: &str, spec: ConvSpec) -> LayerSpec {
    LayerSpec::new(name, LayerKind::Conv(spec))
}

fn layer(name: &str, kind: LayerKind) -> LayerSpec {
    LayerSpec::new(name, kind)
}

fn dropout(name: &str) -> LayerSpec {
    layer(name, LayerKind::Dropout { rate: DEFAULT_DROPOUT })
}

/// Three 1x1-conv head rows (with dropout between) plus softmax.
fn head(opts: &BuildOptions, fc1: ConvSpec, fc2_width: usize) -> Vec<LayerSpec> {
    vec![
        conv("fc1", fc1),
        dropout("drop1"),
        conv("fc2", ConvSpec::new(opts.width(fc2_width), (1, 1))),
        dropout("drop2"),
        conv("fc3", ConvSpec::new(opts.class_count, (1, 1)).linear()),
        layer("prob", LayerKind::Softmax),
    ]
}

/// Input `[1, 50, T]` (frequency x time). Pools round up along frequency and
/// down along time, so 192 frames give exactly one output.
pub fn build_hapticnet(opts: &BuildOptions) -> Result<NetworkSpec> {
    opts.check()?;
    let pool = || LayerKind::MaxPool(PoolSpec::new((2, 2), (2, 2)).ceil((true, false)));
    let c3 = |out: usize| ConvSpec::new(opts.width(out), (3, 3)).padding((1, 1));
    let mut layers = vec![
        conv("conv1", c3(50)),
        layer("pool1", pool()),
        layer("norm1", LayerKind::Lrn(LrnParams::default())),
        conv("conv2", c3(100)),
        layer("pool2", pool()),
        conv("conv3", c3(150)),
        layer("pool3", pool()),
        conv("conv4", c3(200)),
        layer("pool4", pool()),
    ];
    layers.extend(head(opts, ConvSpec::new(opts.width(400), (4, 12)), 250));
    finish("hapticnet", 1, opts, layers)
}

fn alexnet_trunk(opts: &BuildOptions, through_conv3_only: bool) -> Vec<LayerSpec> {
    let g = if opts.grouped { 2 } else { 1 };
    let pool = || LayerKind::MaxPool(PoolSpec::new((3, 3), (2, 2)).ceil((true, true)));
    let lrn = || LayerKind::Lrn(LrnParams::default());
    let mut layers = vec![
        conv("conv1", ConvSpec::new(opts.width(96), (11, 11)).stride((4, 4))),
        layer("norm1", lrn()),
        layer("pool1", pool()),
        conv(
            "conv2",
            ConvSpec::new(opts.width(256), (5, 5)).padding((2, 2)).groups(g),
        ),
        layer("norm2", lrn()),
        layer("pool2", pool()),
        conv("conv3", ConvSpec::new(opts.width(384), (3, 3)).padding((1, 1))),
    ];
    if !through_conv3_only {
        layers.extend([
            conv(
                "conv4",
                ConvSpec::new(opts.width(384), (3, 3)).padding((1, 1)).groups(g),
            ),
            conv(
                "conv5",
                ConvSpec::new(opts.width(256), (3, 3)).padding((1, 1)).groups(g),
            ),
            layer("pool5", pool()),
        ]);
    }
    layers
}

/// AlexNet convolutional trunk followed by a 6x6 / 1x1 / 1x1 conv head.
pub fn build_visualnet(opts: &BuildOptions) -> Result<NetworkSpec> {
    opts.check()?;
    let mut layers = alexnet_trunk(opts, false);
    layers.extend(head(opts, ConvSpec::new(opts.width(300), (6, 6)), 250));
    finish("visualnet", 3, opts, layers)
}

/// conv1..conv3 of the AlexNet trunk, a 13x13 stride-1 average pool, then
/// three 1x1 convs.
pub fn build_visualnet_tcnn(opts: &BuildOptions) -> Result<NetworkSpec> {
    opts.check()?;
    let mut layers = alexnet_trunk(opts, true);
    layers.push(layer("avgpool", LayerKind::AvgPool(PoolSpec::new((13, 13), (1, 1)))));
    layers.extend(head(opts, ConvSpec::new(opts.width(300), (1, 1)), 250));
    finish("visualnet-tcnn", 3, opts, layers)
}

/// A single 1x1 conv over concatenated features, then softmax.
pub fn build_fusion_head(haptic_dim: usize, visual_dim: usize, class_count: usize) -> Result<NetworkSpec> {
    if haptic_dim == 0 || visual_dim == 0 {
        return Err(Error::Config("fusion feature dimensions must be > 0".into()));
    }
    let opts = BuildOptions::scaled(1, class_count);
    opts.check()?;
    let layers = vec![
        conv("fusion", ConvSpec::new(class_count, (1, 1)).linear()),
        layer("prob", LayerKind::Softmax),
    ];
    finish("fusion", haptic_dim + visual_dim, &opts, layers)
}

fn finish(name: &str, input_channels: usize, opts: &BuildOptions, layers: Vec<LayerSpec>) -> Result<NetworkSpec> {
    let spec = NetworkSpec {
        name: name.into(),
        input_channels,
        class_count: opts.class_count,
        layers,
    };
    spec.validate()?;
    Ok(spec)
}

/// Receptive field, output-grid jump and smallest single-output input, per
/// axis (height, width).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceptiveFieldInfo {
    pub rf: (usize, usize),
    pub jump: (usize, usize),
    pub min_input: (usize, usize),
}

/// Output extent along one axis, or `None` when no location survives.
pub fn axis_extent(spec: &NetworkSpec, axis: usize, mut n: usize) -> Option<usize> {
    for layer in &spec.layers {
        let Some((k, s, p)) = layer.kind.window(axis) else {
            continue;
        };
        n = match &layer.kind {
            LayerKind::MaxPool(pool) | LayerKind::AvgPool(pool) => {
                let ceil = if axis == 0 { pool.ceil_mode.0 } else { pool.ceil_mode.1 };
                pool_extent(n, k, s, p, ceil)?
            }
            _ => crate::layer::conv_extent(n, k, s, p)?,
        };
    }
    Some(n)
}

pub fn receptive_field(spec: &NetworkSpec) -> Result<ReceptiveFieldInfo> {
    spec.validate()?;
    let mut rf = [1usize; 2];
    let mut jump = [1usize; 2];
    let mut min_input = [0usize; 2];
    for axis in 0..2 {
        for layer in &spec.layers {
            if let Some((k, s, _)) = layer.kind.window(axis) {
                rf[axis] += (k - 1) * jump[axis];
                jump[axis] *= s;
            }
        }
        // extents are monotone in n; the recurrence bounds the search
        let limit = rf[axis] + jump[axis] + 1;
        min_input[axis] = (1..=limit)
            .find(|&n| axis_extent(spec, axis, n).is_some_and(|e| e >= 1))
            .ok_or_else(|| Error::shape(&spec.name, format!("no input up to {limit} produces an output")))?;
    }
    Ok(ReceptiveFieldInfo {
        rf: (rf[0], rf[1]),
        jump: (jump[0], jump[1]),
        min_input: (min_input[0], min_input[1]),
    })
}

/// Result of [`import_alexnet_conv_weights`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImportOutcome {
    Imported {
        layers: usize,
    },
    /// The weight file does not exist; the network keeps its random init.
    RandomFallback,
}

/// Replace the AlexNet trunk layers present in `net` with the weights stored
/// in `path`. Head layers keep their initialisation. On any error `net` is
/// left untouched.
pub fn import_alexnet_conv_weights(net: &mut Network<f32>, path: &Path) -> Result<ImportOutcome> {
    if !path.exists() {
        log::warn!("pretrained weights {} not found, keeping random init", path.display());
        return Ok(ImportOutcome::RandomFallback);
    }
    let file = WeightFile::load(path)?;
    import_trunk_from(net, &file)
}

pub fn import_trunk_from(net: &mut Network<f32>, file: &WeightFile) -> Result<ImportOutcome> {
    let mut staged = Vec::new();
    for (idx, layer) in net.spec().layers.iter().enumerate() {
        let LayerKind::Conv(c) = &layer.kind else { continue };
        if !ALEXNET_TRUNK.contains(&layer.name.as_str()) {
            continue;
        }
        let entry = file.entry(&layer.name).ok_or_else(|| Error::WeightImport {
            layer: layer.name.clone(),
            detail: "missing from pretrained file".into(),
        })?;
        let current = net.params()[idx].as_ref().expect("conv params");
        staged.push((idx, checked_conv(entry, c.groups, current)?));
    }
    let count = staged.len();
    for (idx, params) in staged {
        net.params_mut()[idx] = Some(params);
    }
    Ok(ImportOutcome::Imported { layers: count })
}
