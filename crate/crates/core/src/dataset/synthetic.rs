//! Generated datasets with known structure, for smoke tests and
//! learnability checks.
//!
//! Each class has a haptic pattern (energy concentrated in one frequency
//! band) and a visual pattern (stripes, dots or a checkerboard). Classes
//! that share a pattern in a modality share the exact same samples in that
//! modality, so that modality alone cannot tell them apart.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::corpus::Corpus;
use crate::error::{Error, Result};
use crate::haptic::{write_acc3, AccelTrace3, HapticRecording, SpectrogramConfig, DEFAULT_SAMPLE_RATE_HZ};
use crate::tensor::Tensor;
use crate::visual::{save_png, TextureImage};

/// Number of distinct patterns available per modality.
pub const PATTERNS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    /// Per class: (haptic pattern, visual pattern), each `< PATTERNS`.
    pub classes: Vec<(usize, usize)>,
    pub items_per_class: usize,
    /// Samples per trace at 10 kHz.
    pub trace_len: usize,
    /// Side of the generated (full-size) square images.
    pub image_side: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Three classes, each separable in both modalities.
    pub fn three_class(items_per_class: usize, seed: u64) -> Self {
        SyntheticSpec {
            classes: vec![(0, 0), (1, 1), (2, 2)],
            items_per_class,
            trace_len: 32_400,
            image_side: 512,
            seed,
        }
    }

    /// Haptics separate class 0 from {1, 2}; images separate {0, 1} from 2.
    pub fn complementary(items_per_class: usize, seed: u64) -> Self {
        SyntheticSpec {
            classes: vec![(0, 0), (1, 0), (1, 1)],
            ..Self::three_class(items_per_class, seed)
        }
    }

    pub fn generate(&self) -> Result<RawDataset> {
        if self.classes.iter().any(|&(h, v)| h >= PATTERNS || v >= PATTERNS) {
            return Err(Error::Config(format!("synthetic patterns must be < {PATTERNS}")));
        }
        let mut traces = Vec::new();
        let mut images = Vec::new();
        for &(hp, vp) in &self.classes {
            traces.push(
                (0..self.items_per_class)
                    .map(|i| band_trace(hp, self.trace_len, self.item_rng(0, hp, i)))
                    .collect::<Result<Vec<_>>>()?,
            );
            images.push(
                (0..self.items_per_class)
                    .map(|i| texture_image(vp, self.image_side, self.item_rng(1, vp, i), i))
                    .collect::<Result<Vec<_>>>()?,
            );
        }
        Ok(RawDataset {
            class_names: (0..self.classes.len()).map(|c| format!("class{c:02}")).collect(),
            traces,
            images,
        })
    }

    fn item_rng(&self, modality: u64, pattern: usize, item: usize) -> ChaCha8Rng {
        let stream = (modality << 40) ^ ((pattern as u64) << 20) ^ item as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Generated raw data (full-size images, three-axis traces).
#[derive(Debug, Clone)]
pub struct RawDataset {
    pub class_names: Vec<String>,
    pub traces: Vec<Vec<AccelTrace3>>,
    pub images: Vec<Vec<TextureImage>>,
}

impl RawDataset {
    pub fn to_corpus(&self, spectrogram: SpectrogramConfig) -> Result<Corpus> {
        let recordings: Vec<Vec<HapticRecording>> = self
            .traces
            .iter()
            .map(|c| c.iter().cloned().map(HapticRecording::ThreeAxis).collect())
            .collect();
        Corpus::from_raw(self.class_names.clone(), &recordings, &self.images, spectrogram, 0)
    }

    /// Write the standard `<root>/<class>/{haptic,image}/` layout.
    pub fn write_tum_layout(&self, root: &Path) -> Result<()> {
        for (c, name) in self.class_names.iter().enumerate() {
            let hdir = root.join(name).join("haptic");
            let idir = root.join(name).join("image");
            for d in [&hdir, &idir] {
                fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            }
            for (i, t) in self.traces[c].iter().enumerate() {
                write_acc3(&hdir.join(format!("{name}_{i:03}.acc3")), t)?;
            }
            for (i, img) in self.images[c].iter().enumerate() {
                save_png(img, &idir.join(format!("{name}_{i:03}.png")))?;
            }
        }
        Ok(())
    }
}

/// Centre frequency (Hz) of each haptic pattern's band.
pub fn band_centre_hz(pattern: usize) -> f64 {
    150.0 + 300.0 * pattern as f64
}

/// Three tones inside the pattern's band with random phases and slow
/// amplitude modulation, spread over the three axes, plus white noise.
fn band_trace(pattern: usize, len: usize, mut rng: ChaCha8Rng) -> Result<AccelTrace3> {
    let fs = DEFAULT_SAMPLE_RATE_HZ;
    let centre = band_centre_hz(pattern);
    let tones: Vec<(f64, f64, [f64; 3])> = (0..3)
        .map(|_| {
            let f = centre + rng.random_range(-40.0..40.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            let mix = [
                rng.random_range(0.2..1.0),
                rng.random_range(0.2..1.0),
                rng.random_range(0.2..1.0),
            ];
            (f, phase, mix)
        })
        .collect();
    let mod_hz = rng.random_range(0.5..2.0);
    let noise = Normal::new(0.0, 0.15).expect("valid sigma");
    let samples = (0..len)
        .map(|n| {
            let t = n as f64 / fs;
            let envelope = 1.0 + 0.3 * (2.0 * PI * mod_hz * t).sin();
            let mut s = [0f32; 3];
            for (axis, v) in s.iter_mut().enumerate() {
                let tone: f64 = tones
                    .iter()
                    .map(|(f, ph, mix)| mix[axis] * (2.0 * PI * f * t + ph).sin())
                    .sum();
                *v = (envelope * tone + noise.sample(&mut rng)) as f32;
            }
            s
        })
        .collect();
    AccelTrace3::new(samples, fs)
}

/// Pattern 0: stripes, 1: dots, 2: checkerboard; random period, phase,
/// contrast and pixel noise.
fn texture_image(pattern: usize, side: usize, mut rng: ChaCha8Rng, item: usize) -> Result<TextureImage> {
    let period = rng.random_range(20.0..32.0f64);
    let (py, px) = (rng.random_range(0.0..period), rng.random_range(0.0..period));
    let vertical = rng.random_bool(0.5);
    let lo = rng.random_range(0.1..0.3f32);
    let hi = rng.random_range(0.7..0.9f32);
    let tint = [
        rng.random_range(0.8..1.0f32),
        rng.random_range(0.8..1.0),
        rng.random_range(0.8..1.0),
    ];
    let noise = Normal::new(0.0f32, 0.04).expect("valid sigma");
    let plane = side * side;
    let mut data = vec![0f32; 3 * plane];
    for y in 0..side {
        for x in 0..side {
            let u = (y as f64 + py) / period;
            let v = (x as f64 + px) / period;
            let on = match pattern {
                0 => {
                    let w = if vertical { v } else { u };
                    w.fract() < 0.5
                }
                1 => {
                    let (du, dv) = (u.fract() - 0.5, v.fract() - 0.5);
                    du * du + dv * dv < 0.09
                }
                _ => (u.floor() as i64 + v.floor() as i64) % 2 == 0,
            };
            let base = if on { hi } else { lo };
            for c in 0..3 {
                data[c * plane + y * side + x] = (base * tint[c] + noise.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
    }
    TextureImage::new(
        Tensor::new([3, side, side], data)?,
        format!("synthetic-{pattern}-{item}"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_patterns_share_samples() {
        let spec = SyntheticSpec {
            trace_len: 2000,
            image_side: 16,
            ..SyntheticSpec::complementary(2, 5)
        };
        let raw = spec.generate().unwrap();
        assert_eq!(raw.traces[1], raw.traces[2]);
        assert_ne!(raw.traces[0], raw.traces[1]);
        assert_eq!(raw.images[0], raw.images[1]);
        assert_ne!(raw.images[1], raw.images[2]);
    }
}
