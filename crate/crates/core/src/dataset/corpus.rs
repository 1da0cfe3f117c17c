use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::index::{load_tum, DatasetIndex};
use crate::error::{Error, Result};
use crate::haptic::{read_recording, HapticRecording, Spectrogram, SpectrogramConfig};
use crate::tensor::Tensor;
use crate::visual::{half_resize, load_image, TextureImage};
use crate::weights::{Entry, EntryData, WeightFile};

pub const CACHE_MANIFEST: &str = "manifest.json";

/// Preprocessed dataset held in memory: unnormalized spectrograms (normalized
/// per use) and half-resized images, indexed `[class][item]`.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub class_names: Vec<String>,
    pub haptic: Vec<Vec<Spectrogram>>,
    pub images: Vec<Vec<TextureImage>>,
    pub spectrogram: SpectrogramConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestEntry {
    class: String,
    modality: String,
    source: String,
    file: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Manifest {
    spectrogram: Option<SpectrogramConfig>,
    entries: Vec<ManifestEntry>,
}

impl Corpus {
    pub fn new(
        class_names: Vec<String>,
        haptic: Vec<Vec<Spectrogram>>,
        images: Vec<Vec<TextureImage>>,
        spectrogram: SpectrogramConfig,
    ) -> Result<Self> {
        let n = class_names.len();
        if n == 0 || haptic.len() != n || images.len() != n {
            return Err(Error::Dataset(format!(
                "{n} class names, {} haptic classes, {} image classes",
                haptic.len(),
                images.len()
            )));
        }
        let per = haptic[0].len();
        for (i, name) in class_names.iter().enumerate() {
            if haptic[i].len() != per || images[i].len() != per || per == 0 {
                return Err(Error::Dataset(format!(
                    "class `{name}` has {} traces and {} images, expected {per} of each",
                    haptic[i].len(),
                    images[i].len()
                )));
            }
        }
        Ok(Corpus {
            class_names,
            haptic,
            images,
            spectrogram,
        })
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn items_per_class(&self) -> usize {
        self.haptic[0].len()
    }

    /// Preprocess raw recordings and full-size images.
    pub fn from_raw(
        class_names: Vec<String>,
        recordings: &[Vec<HapticRecording>],
        images: &[Vec<TextureImage>],
        spectrogram: SpectrogramConfig,
        trim_leading: usize,
    ) -> Result<Self> {
        let haptic = recordings
            .iter()
            .map(|class| {
                class
                    .iter()
                    .map(|r| r.spectrogram(trim_leading, &spectrogram))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let images = images
            .iter()
            .map(|class| class.iter().map(half_resize).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(class_names, haptic, images, spectrogram)
    }

    /// Load and preprocess every file listed in `index`.
    pub fn from_index(index: &DatasetIndex, spectrogram: SpectrogramConfig, trim_leading: usize) -> Result<Self> {
        let mut haptic = Vec::new();
        let mut images = Vec::new();
        for class in &index.classes {
            haptic.push(
                class
                    .haptic
                    .iter()
                    .map(|p| load_spectrogram(p, &spectrogram, trim_leading))
                    .collect::<Result<Vec<_>>>()?,
            );
            images.push(
                class
                    .images
                    .iter()
                    .map(|p| half_resize(&load_image(p)?))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Corpus::new(index.class_names(), haptic, images, spectrogram)
    }

    /// Load either a preprocessed cache (directory with a manifest) or a raw
    /// dataset directory.
    pub fn load(path: &Path, spectrogram: SpectrogramConfig, trim_leading: usize) -> Result<Self> {
        if path.join(CACHE_MANIFEST).is_file() {
            Self::load_cache(path)
        } else {
            Self::from_index(&load_tum(path)?, spectrogram, trim_leading)
        }
    }

    fn load_cache(dir: &Path) -> Result<Self> {
        let manifest = read_manifest(dir)?;
        let spectrogram = manifest.spectrogram.unwrap_or_default();
        let mut class_names: Vec<String> = manifest.entries.iter().map(|e| e.class.clone()).collect();
        class_names.sort();
        class_names.dedup();
        let mut haptic = vec![Vec::new(); class_names.len()];
        let mut images = vec![Vec::new(); class_names.len()];
        let mut entries = manifest.entries.clone();
        entries.sort_by(|a, b| a.file.cmp(&b.file));
        for e in &entries {
            let c = class_names.binary_search(&e.class).expect("listed class");
            let tensor = read_tensor(&dir.join(&e.file))?;
            match e.modality.as_str() {
                "haptic" => haptic[c].push(Spectrogram {
                    frames: tensor,
                    window_len: spectrogram.window_len,
                    hop: spectrogram.hop,
                }),
                "image" => images[c].push(TextureImage::new(tensor, e.source.clone())?),
                other => return Err(Error::Dataset(format!("manifest: unknown modality `{other}`"))),
            }
        }
        Corpus::new(class_names, haptic, images, spectrogram)
    }
}

fn load_spectrogram(path: &Path, cfg: &SpectrogramConfig, trim: usize) -> Result<Spectrogram> {
    read_recording(path)?
        .spectrogram(trim, cfg)
        .map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
}

fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(CACHE_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))
}

fn read_tensor(path: &Path) -> Result<Tensor<f32>> {
    let file = WeightFile::load(path)?;
    match file.entries.into_iter().next().map(|e| e.data) {
        Some(EntryData::Tensor(t)) => Ok(t),
        _ => Err(Error::Dataset(format!(
            "{}: expected a single tensor entry",
            path.display()
        ))),
    }
}

fn write_tensor(path: &Path, name: &str, tensor: &Tensor<f32>) -> Result<()> {
    WeightFile {
        meta: String::new(),
        entries: vec![Entry {
            name: name.into(),
            data: EntryData::Tensor(tensor.clone()),
        }],
    }
    .save(path)
}

/// Which modalities [`write_cache`] should process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheModalities {
    pub haptic: bool,
    pub images: bool,
}

/// Preprocess the selected modalities of `index` into `out`, merging with
/// an existing manifest. Returns the number of files written.
pub fn write_cache(
    index: &DatasetIndex,
    out: &Path,
    which: CacheModalities,
    spectrogram: SpectrogramConfig,
    trim_leading: usize,
) -> Result<usize> {
    let mut manifest = if out.join(CACHE_MANIFEST).is_file() {
        read_manifest(out)?
    } else {
        Manifest::default()
    };
    let mut written = 0;
    for (modality, enabled) in [("haptic", which.haptic), ("image", which.images)] {
        if !enabled {
            continue;
        }
        manifest.entries.retain(|e| e.modality != modality);
        for class in &index.classes {
            let dir = out.join(&class.name).join(modality);
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            let sources = if modality == "haptic" {
                &class.haptic
            } else {
                &class.images
            };
            for src in sources {
                let tensor = if modality == "haptic" {
                    load_spectrogram(src, &spectrogram, trim_leading)?.frames
                } else {
                    half_resize(&load_image(src)?)?.pixels
                };
                let stem = src.file_stem().and_then(|s| s.to_str()).unwrap_or("item");
                let rel: PathBuf = [class.name.as_str(), modality, &format!("{stem}.tfw")].iter().collect();
                write_tensor(&out.join(&rel), stem, &tensor)?;
                manifest.entries.push(ManifestEntry {
                    class: class.name.clone(),
                    modality: modality.into(),
                    source: src.display().to_string(),
                    file: rel.to_string_lossy().into_owned(),
                    shape: tensor.shape().to_vec(),
                });
                written += 1;
            }
        }
    }
    if which.haptic {
        manifest.spectrogram = Some(spectrogram);
    }
    let path = out.join(CACHE_MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(written)
}
