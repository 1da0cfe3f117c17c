//! Dense prediction, per-location argmax, max voting and sampled fusion.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::builder::receptive_field;
use crate::error::{Error, Result};
use crate::layer::LayerKind;
use crate::network::Network;
use crate::tensor::Tensor;

/// Fusion draws per classification unless configured otherwise.
pub const DEFAULT_FUSION_SAMPLES: usize = 1000;

/// Per-location class probabilities, `[classes, Gh, Gw]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionGrid {
    pub probs: Tensor<f32>,
}

impl PredictionGrid {
    pub fn new(probs: Tensor<f32>) -> Result<Self> {
        probs.dims3()?;
        Ok(PredictionGrid { probs })
    }

    pub fn class_count(&self) -> usize {
        self.probs.shape()[0]
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.probs.shape()[1], self.probs.shape()[2])
    }

    pub fn locations(&self) -> usize {
        self.probs.shape()[1] * self.probs.shape()[2]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteResult {
    pub label: usize,
    pub counts: Vec<usize>,
    pub fragment_labels: Vec<usize>,
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: impl IntoIterator<Item = f32>) -> usize {
    let mut best = 0;
    let mut best_v = f32::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if i == 0 || v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Per-location argmax in row-major location order.
pub fn argmax_labels(grid: &PredictionGrid) -> Vec<usize> {
    let (c, plane) = (grid.class_count(), grid.locations());
    let data = grid.probs.data();
    (0..plane)
        .map(|loc| argmax((0..c).map(|k| data[k * plane + loc])))
        .collect()
}

/// Majority vote over fragment labels; the lowest class index wins ties.
pub fn max_vote(labels: &[usize], class_count: usize) -> Result<VoteResult> {
    if labels.is_empty() {
        return Err(Error::Usage("cannot vote over an empty label set".into()));
    }
    let mut counts = vec![0usize; class_count];
    for &l in labels {
        *counts
            .get_mut(l)
            .ok_or_else(|| Error::Range(format!("label {l} outside {class_count} classes")))? += 1;
    }
    let label = argmax(counts.iter().map(|&c| c as f32));
    Ok(VoteResult {
        label,
        counts,
        fragment_labels: labels.to_vec(),
    })
}

fn vote_grid(probs: Tensor<f32>) -> Result<VoteResult> {
    let grid = PredictionGrid::new(probs)?;
    max_vote(&argmax_labels(&grid), grid.class_count())
}

fn check_extent(net: &Network<f32>, input: &Tensor<f32>, what: &str, axes: &[usize]) -> Result<()> {
    let rf = receptive_field(net.spec())?;
    let (_, h, w) = input.dims3()?;
    let min = [rf.min_input.0, rf.min_input.1];
    let have = [h, w];
    for &axis in axes {
        if have[axis] < min[axis] {
            return Err(Error::InputTooSmall {
                what: what.into(),
                required: min[axis],
                actual: have[axis],
            });
        }
    }
    Ok(())
}

/// Dense spectrogram classification. `frames` is `[1, 50, T]`.
pub fn classify_haptic(net: &Network<f32>, frames: &Tensor<f32>) -> Result<VoteResult> {
    check_extent(net, frames, "haptic spectrogram frames", &[1])?;
    vote_grid(net.forward(frames)?)
}

/// Dense image classification. `pixels` is `[3, H, W]` (already mean-subtracted).
pub fn classify_image(net: &Network<f32>, pixels: &Tensor<f32>) -> Result<VoteResult> {
    check_extent(net, pixels, "image extent (pixels)", &[0, 1])?;
    vote_grid(net.forward(pixels)?)
}

/// Which head layer feeds the fusion classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionLayer {
    Fc2,
    Fc3,
}

impl FusionLayer {
    pub fn layer_name(self) -> &'static str {
        match self {
            FusionLayer::Fc2 => "fc2",
            FusionLayer::Fc3 => "fc3",
        }
    }
}

impl std::str::FromStr for FusionLayer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fc2" => Ok(FusionLayer::Fc2),
            "fc3" => Ok(FusionLayer::Fc3),
            _ => Err(Error::Config(format!(
                "unknown fusion layer `{s}` (expected fc2 or fc3)"
            ))),
        }
    }
}

/// Whether features are read at the output of the named layer (default) or
/// at its input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureTap {
    #[default]
    Output,
    Input,
}

/// Layer count to run (`forward_until` end) and resulting feature width.
pub fn feature_tap(net: &Network<f32>, layer: FusionLayer, tap: FeatureTap) -> Result<(usize, usize)> {
    let spec = net.spec();
    let idx = spec
        .index_of(layer.layer_name())
        .ok_or_else(|| Error::shape(&spec.name, format!("no `{}` layer to tap", layer.layer_name())))?;
    let LayerKind::Conv(c) = &spec.layers[idx].kind else {
        return Err(Error::shape(&spec.name, "fusion tap must be a conv layer"));
    };
    Ok(match tap {
        FeatureTap::Output => (idx + 1, c.out_channels),
        FeatureTap::Input => (idx, spec.layer_input_channels()[idx]),
    })
}

/// `count` independent uniform draws of (haptic location, visual location).
pub fn sample_pairs<R: Rng + ?Sized>(
    haptic_locations: usize,
    visual_locations: usize,
    count: usize,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    (0..count)
        .map(|_| {
            (
                rng.random_range(0..haptic_locations),
                rng.random_range(0..visual_locations),
            )
        })
        .collect()
}

/// Pack the selected feature pairs as a `[dh + dv, 1, K]` tensor so the 1x1
/// fusion head classifies all pairs in one pass.
pub fn pair_features(haptic: &Tensor<f32>, visual: &Tensor<f32>, pairs: &[(usize, usize)]) -> Result<Tensor<f32>> {
    let (dh, hh, hw) = haptic.dims3()?;
    let (dv, vh, vw) = visual.dims3()?;
    let (hp, vp) = (hh * hw, vh * vw);
    let k = pairs.len();
    if k == 0 {
        return Err(Error::Usage("no feature pairs".into()));
    }
    let mut out = vec![0f32; (dh + dv) * k];
    for (j, &(h, v)) in pairs.iter().enumerate() {
        if h >= hp || v >= vp {
            return Err(Error::Range(format!("pair ({h}, {v}) outside {hp}x{vp} locations")));
        }
        for c in 0..dh {
            out[c * k + j] = haptic.data()[c * hp + h];
        }
        for c in 0..dv {
            out[(dh + c) * k + j] = visual.data()[c * vp + v];
        }
    }
    Tensor::new([dh + dv, 1, k], out)
}

/// Everything needed to classify a (spectrogram, image) pair.
pub struct FusionModel<'a> {
    pub haptic: &'a Network<f32>,
    pub visual: &'a Network<f32>,
    pub head: &'a Network<f32>,
    pub layer: FusionLayer,
    pub tap: FeatureTap,
}

impl FusionModel<'_> {
    /// Dense feature maps for both modalities at the configured tap.
    pub fn features(&self, frames: &Tensor<f32>, pixels: &Tensor<f32>) -> Result<(Tensor<f32>, Tensor<f32>)> {
        check_extent(self.haptic, frames, "haptic spectrogram frames", &[1])?;
        check_extent(self.visual, pixels, "image extent (pixels)", &[0, 1])?;
        let (he, hd) = feature_tap(self.haptic, self.layer, self.tap)?;
        let (ve, vd) = feature_tap(self.visual, self.layer, self.tap)?;
        if hd + vd != self.head.spec().input_channels {
            return Err(Error::shape(
                "fusion head",
                format!(
                    "expects {} features, taps give {hd} + {vd}",
                    self.head.spec().input_channels
                ),
            ));
        }
        Ok((
            self.haptic.forward_until(frames, he)?,
            self.visual.forward_until(pixels, ve)?,
        ))
    }

    /// Sample `k` feature pairs, classify each, and vote.
    pub fn classify<R: Rng + ?Sized>(
        &self,
        frames: &Tensor<f32>,
        pixels: &Tensor<f32>,
        k: usize,
        rng: &mut R,
    ) -> Result<VoteResult> {
        if k < 1 {
            return Err(Error::Usage("fusion needs K >= 1 samples".into()));
        }
        let (hf, vf) = self.features(frames, pixels)?;
        let hp = hf.shape()[1] * hf.shape()[2];
        let vp = vf.shape()[1] * vf.shape()[2];
        let pairs = sample_pairs(hp, vp, k, rng);
        vote_grid(self.head.forward(&pair_features(&hf, &vf, &pairs)?)?)
    }
}

/// Convenience wrapper around [`FusionModel::classify`].
#[allow(clippy::too_many_arguments)]
pub fn classify_fused<R: Rng + ?Sized>(
    haptic: &Network<f32>,
    visual: &Network<f32>,
    head: &Network<f32>,
    frames: &Tensor<f32>,
    pixels: &Tensor<f32>,
    layer: FusionLayer,
    k: usize,
    rng: &mut R,
) -> Result<VoteResult> {
    FusionModel {
        haptic,
        visual,
        head,
        layer,
        tap: FeatureTap::Output,
    }
    .classify(frames, pixels, k, rng)
}
