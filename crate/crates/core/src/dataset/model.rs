use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::builder::{build, build_fusion_head, BuildOptions, NetKind};
use crate::error::{Error, Result};
use crate::haptic::{normalize_channels, HapticRecording, SpectrogramConfig};
use crate::inference::{feature_tap, FeatureTap, FusionLayer, FusionModel};
use crate::network::{InitScheme, Network};
use crate::tensor::Tensor;
use crate::visual::{half_resize, mean_subtract, TextureImage};
use crate::weights::{Entry, WeightFile};

/// Everything needed to rebuild a trained unimodal network, stored as JSON in
/// the weight file's metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub net: NetKind,
    pub width_divisor: usize,
    pub grouped: bool,
    pub class_names: Vec<String>,
    /// Per-channel image means subtracted before the visual nets.
    pub channel_means: Option<[f32; 3]>,
    #[serde(default)]
    pub init: InitScheme,
    pub seed: u64,
    /// Spectrogram settings the haptic input was prepared with.
    #[serde(default)]
    pub spectrogram: SpectrogramConfig,
    /// Samples dropped from the start of each trace before preprocessing.
    #[serde(default)]
    pub trim_leading: usize,
}

impl ModelMeta {
    pub fn build_options(&self) -> BuildOptions {
        BuildOptions {
            width_divisor: self.width_divisor,
            class_count: self.class_names.len(),
            grouped: self.grouped,
        }
    }

    pub fn means(&self) -> [f32; 3] {
        self.channel_means.unwrap_or([0.0; 3])
    }

    /// Network input for a raw recording, prepared as during training.
    pub fn haptic_input(&self, recording: &HapticRecording) -> Result<Tensor<f32>> {
        let spec = recording.spectrogram(self.trim_leading, &self.spectrogram)?;
        Ok(normalize_channels(&spec).frames)
    }

    /// Network input for a full-size image, prepared as during training.
    pub fn image_input(&self, image: &TextureImage) -> Result<Tensor<f32>> {
        mean_subtract(&half_resize(image)?, &self.means())
    }
}

#[derive(Debug, Clone)]
pub struct SavedModel {
    pub meta: ModelMeta,
    pub net: Network<f32>,
}

fn parse_meta<T: for<'de> Deserialize<'de>>(file: &WeightFile) -> Result<T> {
    serde_json::from_str(&file.meta).map_err(|e| Error::WeightFormat(format!("metadata: {e}")))
}

impl SavedModel {
    /// Fresh randomly initialised network for `meta`.
    pub fn random<R: rand::Rng + ?Sized>(meta: ModelMeta, rng: &mut R) -> Result<Self> {
        let spec = build(meta.net, &meta.build_options())?;
        Ok(SavedModel {
            net: Network::new_with(spec, meta.init, rng)?,
            meta,
        })
    }

    pub fn to_file(&self) -> WeightFile {
        WeightFile::from_network(&self.net, serde_json::to_string(&self.meta).expect("meta serializes"))
    }

    pub fn from_file(file: &WeightFile) -> Result<Self> {
        let meta: ModelMeta = parse_meta(file)?;
        let template = Network::zeros(build(meta.net, &meta.build_options())?)?;
        let params = file.conv_params_for(&template)?;
        Ok(SavedModel {
            net: Network::from_parts(template.spec().clone(), params)?,
            meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_file().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_file(&WeightFile::load(path)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct BundleMeta {
    haptic: ModelMeta,
    visual: ModelMeta,
    layer: FusionLayer,
    tap: FeatureTap,
}

/// Jointly trained haptic net, visual net and fusion head.
#[derive(Debug, Clone)]
pub struct FusionBundle {
    pub haptic: SavedModel,
    pub visual: SavedModel,
    pub head: Network<f32>,
    pub layer: FusionLayer,
    pub tap: FeatureTap,
}

const PARTS: [&str; 3] = ["haptic/", "visual/", "head/"];

impl FusionBundle {
    /// Combine two unimodal models with a freshly initialised head.
    pub fn new<R: rand::Rng + ?Sized>(
        haptic: SavedModel,
        visual: SavedModel,
        layer: FusionLayer,
        tap: FeatureTap,
        rng: &mut R,
    ) -> Result<Self> {
        if haptic.meta.class_names != visual.meta.class_names {
            return Err(Error::Dataset(
                "haptic and visual models were trained on different classes".into(),
            ));
        }
        let head = Network::new_random(Self::head_spec(&haptic, &visual, layer, tap)?, rng)?;
        Ok(FusionBundle {
            haptic,
            visual,
            head,
            layer,
            tap,
        })
    }

    fn head_spec(
        haptic: &SavedModel,
        visual: &SavedModel,
        layer: FusionLayer,
        tap: FeatureTap,
    ) -> Result<crate::layer::NetworkSpec> {
        let (_, dh) = feature_tap(&haptic.net, layer, tap)?;
        let (_, dv) = feature_tap(&visual.net, layer, tap)?;
        build_fusion_head(dh, dv, haptic.meta.class_names.len())
    }

    pub fn model(&self) -> FusionModel<'_> {
        FusionModel {
            haptic: &self.haptic.net,
            visual: &self.visual.net,
            head: &self.head,
            layer: self.layer,
            tap: self.tap,
        }
    }

    pub fn class_names(&self) -> &[String] {
        &self.haptic.meta.class_names
    }

    pub fn to_file(&self) -> WeightFile {
        let meta = BundleMeta {
            haptic: self.haptic.meta.clone(),
            visual: self.visual.meta.clone(),
            layer: self.layer,
            tap: self.tap,
        };
        let mut entries = Vec::new();
        let parts = [
            self.haptic.to_file(),
            self.visual.to_file(),
            WeightFile::from_network(&self.head, ""),
        ];
        for (prefix, file) in PARTS.iter().zip(parts) {
            entries.extend(file.entries.into_iter().map(|e| Entry {
                name: format!("{prefix}{}", e.name),
                data: e.data,
            }));
        }
        WeightFile {
            meta: serde_json::to_string(&meta).expect("meta serializes"),
            entries,
        }
    }

    pub fn from_file(file: &WeightFile) -> Result<Self> {
        let meta: BundleMeta = parse_meta(file)?;
        let part = |prefix: &str, meta: String| WeightFile {
            meta,
            entries: file
                .entries
                .iter()
                .filter_map(|e| {
                    e.name.strip_prefix(prefix).map(|n| Entry {
                        name: n.to_string(),
                        data: e.data.clone(),
                    })
                })
                .collect(),
        };
        let json = |m: &ModelMeta| serde_json::to_string(m).expect("meta serializes");
        let haptic = SavedModel::from_file(&part(PARTS[0], json(&meta.haptic)))?;
        let visual = SavedModel::from_file(&part(PARTS[1], json(&meta.visual)))?;
        let template = Network::zeros(Self::head_spec(&haptic, &visual, meta.layer, meta.tap)?)?;
        let params = part(PARTS[2], String::new()).conv_params_for(&template)?;
        Ok(FusionBundle {
            head: Network::from_parts(template.spec().clone(), params)?,
            haptic,
            visual,
            layer: meta.layer,
            tap: meta.tap,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_file().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_file(&WeightFile::load(path)?)
    }
}
