//! Texture image preprocessing and augmentation.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// RGB image as a `[3, H, W]` tensor with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureImage {
    pub pixels: Tensor<f32>,
    pub source_id: String,
}

impl TextureImage {
    pub fn new(pixels: Tensor<f32>, source_id: impl Into<String>) -> Result<Self> {
        let (c, _, _) = pixels.dims3()?;
        if c != 3 {
            return Err(Error::shape("image", format!("expected 3 channels, got {c}")));
        }
        if pixels.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Range("image values must lie in [0, 1]".into()));
        }
        Ok(TextureImage {
            pixels,
            source_id: source_id.into(),
        })
    }

    pub fn height(&self) -> usize {
        self.pixels.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.pixels.shape()[2]
    }

    fn with_pixels(&self, pixels: Tensor<f32>) -> Self {
        TextureImage {
            pixels,
            source_id: self.source_id.clone(),
        }
    }
}

/// Decode a PNG or JPEG file.
pub fn load_image(path: &Path) -> Result<TextureImage> {
    let img = image::open(path)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?
        .to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let raw = img.as_raw();
    let mut data = vec![0f32; 3 * h * w];
    for (i, px) in raw.chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * h * w + i] = px[c] as f32 / 255.0;
        }
    }
    TextureImage::new(Tensor::new([3, h, w], data)?, path.display().to_string())
}

/// Encode as 8-bit PNG.
pub fn save_png(img: &TextureImage, path: &Path) -> Result<()> {
    let (h, w) = (img.height(), img.width());
    let src = img.pixels.data();
    let mut buf = image::RgbImage::new(w as u32, h as u32);
    for (i, px) in buf.pixels_mut().enumerate() {
        for c in 0..3 {
            px.0[c] = (src[c * h * w + i] * 255.0).round().clamp(0.0, 255.0) as u8;
        }
    }
    buf.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Bilinear resize to `ceil(H/2) x ceil(W/2)` using half-pixel centres.
pub fn half_resize(img: &TextureImage) -> Result<TextureImage> {
    let (h, w) = (img.height(), img.width());
    if h < 2 || w < 2 {
        return Err(Error::InputTooSmall {
            what: "half resize (pixels per axis)".into(),
            required: 2,
            actual: h.min(w),
        });
    }
    let (oh, ow) = (h.div_ceil(2), w.div_ceil(2));
    Ok(img.with_pixels(bilinear_resize(&img.pixels, oh, ow)?))
}

fn sample_coords(out: usize, input: usize) -> Vec<(usize, usize, f32)> {
    let scale = input as f64 / out as f64;
    (0..out)
        .map(|o| {
            let src = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (input - 1) as f64);
            let i0 = src.floor() as usize;
            let i1 = (i0 + 1).min(input - 1);
            (i0, i1, (src - i0 as f64) as f32)
        })
        .collect()
}

pub fn bilinear_resize(pixels: &Tensor<f32>, oh: usize, ow: usize) -> Result<Tensor<f32>> {
    let (c, h, w) = pixels.dims3()?;
    let ys = sample_coords(oh, h);
    let xs = sample_coords(ow, w);
    let src = pixels.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let plane = &src[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
                let bottom = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
                out.push((top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0));
            }
        }
    }
    Tensor::new([c, oh, ow], out)
}

/// Uniformly random `size x size` crop.
pub fn sample_patch<R: Rng + ?Sized>(img: &TextureImage, size: usize, rng: &mut R) -> Result<TextureImage> {
    let (h, w) = (img.height(), img.width());
    if size == 0 || h < size || w < size {
        return Err(Error::InputTooSmall {
            what: "image patch (pixels per axis)".into(),
            required: size,
            actual: h.min(w),
        });
    }
    let y = rng.random_range(0..=h - size);
    let x = rng.random_range(0..=w - size);
    Ok(img.with_pixels(img.pixels.crop(y, x, size, size)?))
}

/// Rotate clockwise by `quarter_turns * 90` degrees.
pub fn rotate_quarter(img: &TextureImage, quarter_turns: usize) -> Result<TextureImage> {
    let (c, h, w) = img.pixels.dims3()?;
    if h != w {
        return Err(Error::shape(
            "rotation",
            format!("right-angle rotation needs a square image, got {h}x{w}"),
        ));
    }
    let n = h;
    let src = img.pixels.data();
    let turns = quarter_turns % 4;
    let out = Tensor::from_fn([c, n, n], |i| {
        let ch = i / (n * n);
        let y = (i / n) % n;
        let x = i % n;
        let (sy, sx) = match turns {
            0 => (y, x),
            1 => (n - 1 - x, y),
            2 => (n - 1 - y, n - 1 - x),
            _ => (x, n - 1 - y),
        };
        src[(ch * n + sy) * n + sx]
    });
    Ok(img.with_pixels(out))
}

/// Rotation by an angle drawn uniformly from {0, 90, 180, 270} degrees.
pub fn random_rotate<R: Rng + ?Sized>(img: &TextureImage, rng: &mut R) -> Result<TextureImage> {
    rotate_quarter(img, rng.random_range(0..4))
}

/// Rotate a square image by an arbitrary angle (degrees, clockwise) about
/// its centre and keep the largest axis-aligned square that contains no
/// pixels from outside the source.
pub fn rotate_arbitrary(img: &TextureImage, degrees: f64) -> Result<TextureImage> {
    let (c, h, w) = img.pixels.dims3()?;
    if h != w {
        return Err(Error::shape("rotation", format!("needs a square image, got {h}x{w}")));
    }
    let n = h as f64;
    let theta = degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let side = ((n / (cos.abs() + sin.abs())).floor() as usize).clamp(1, h);
    let offset = (n - side as f64) / 2.0;
    let centre = (n - 1.0) / 2.0;
    let src = img.pixels.data();
    let at = |ch: usize, y: usize, x: usize| src[(ch * h + y) * w + x];
    let out = Tensor::from_fn([c, side, side], |i| {
        let ch = i / (side * side);
        let oy = (i / side) % side;
        let ox = i % side;
        let dy = oy as f64 + offset - centre;
        let dx = ox as f64 + offset - centre;
        // inverse rotation back into the source frame
        let sy = (cos * dy - sin * dx + centre).clamp(0.0, n - 1.0);
        let sx = (sin * dy + cos * dx + centre).clamp(0.0, n - 1.0);
        let (y0, x0) = (sy.floor() as usize, sx.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
        let (fy, fx) = ((sy - y0 as f64) as f32, (sx - x0 as f64) as f32);
        let top = at(ch, y0, x0) * (1.0 - fx) + at(ch, y0, x1) * fx;
        let bottom = at(ch, y1, x0) * (1.0 - fx) + at(ch, y1, x1) * fx;
        (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0)
    });
    Ok(img.with_pixels(out))
}

/// Per-channel mean over a set of images.
pub fn channel_means<'a>(images: impl IntoIterator<Item = &'a TextureImage>) -> [f32; 3] {
    let mut sums = [0f64; 3];
    let mut count = 0usize;
    for img in images {
        let plane = img.height() * img.width();
        for (c, sum) in sums.iter_mut().enumerate() {
            *sum += img.pixels.data()[c * plane..(c + 1) * plane]
                .iter()
                .map(|&v| v as f64)
                .sum::<f64>();
        }
        count += plane;
    }
    if count == 0 {
        return [0.0; 3];
    }
    sums.map(|s| (s / count as f64) as f32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelMeans(pub [f32; 3]);

pub fn mean_subtract(img: &TextureImage, means: &[f32; 3]) -> Result<Tensor<f32>> {
    shift_channels(&img.pixels, means, -1.0)
}

/// Inverse of [`mean_subtract`].
pub fn mean_add(pixels: &Tensor<f32>, means: &[f32; 3]) -> Result<Tensor<f32>> {
    shift_channels(pixels, means, 1.0)
}

fn shift_channels(pixels: &Tensor<f32>, means: &[f32; 3], sign: f32) -> Result<Tensor<f32>> {
    if means.iter().any(|m| !m.is_finite()) {
        return Err(Error::Range("channel means must be finite".into()));
    }
    let (c, h, w) = pixels.dims3()?;
    if c != 3 {
        return Err(Error::shape(
            "mean subtraction",
            format!("expected 3 channels, got {c}"),
        ));
    }
    let plane = h * w;
    let mut out = pixels.clone();
    for (ch, chunk) in out.data_mut().chunks_mut(plane).enumerate() {
        for v in chunk {
            *v += sign * means[ch];
        }
    }
    Ok(out)
}
