//! Haptic trace preprocessing: DFT321 axis combination, Hamming-window
//! spectrograms, per-channel min-max normalization and training crops.
//!
//! Raw trace files (`*.acc3`) hold little-endian `f32` (x, y, z) triples;
//! `*.acc1` files hold single-axis, already combined samples. An optional
//! sidecar text file with the same stem and extension `.hdr` carries
//! `key = value` lines; `sample_rate_hz` is read from it (default 10 kHz).

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 10_000.0;
pub const WINDOW_LEN: usize = 500;
pub const HOP: usize = 100;
pub const CHANNELS: usize = 50;

/// Three-axis acceleration recording.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelTrace3 {
    samples: Vec<[f32; 3]>,
    sample_rate_hz: f64,
}

impl AccelTrace3 {
    pub fn new(samples: Vec<[f32; 3]>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Range("acceleration trace is empty".into()));
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(Error::Range(format!("sample rate {sample_rate_hz} must be > 0")));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Range("acceleration trace contains non-finite samples".into()));
        }
        Ok(AccelTrace3 {
            samples,
            sample_rate_hz,
        })
    }

    pub fn samples(&self) -> &[[f32; 3]] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Drop the first `n` samples (e.g. the initial contact impulse).
    pub fn trim_leading(&self, n: usize) -> Result<Self> {
        Self::new(self.samples[n.min(self.samples.len())..].to_vec(), self.sample_rate_hz)
    }
}

fn fft(signal: &[f64], inverse: bool) -> Vec<Complex<f64>> {
    let mut buf: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    plan.process(&mut buf);
    buf
}

/// Combine three axes into one signal whose DFT magnitude at every bin is
/// `sqrt(|X|^2 + |Y|^2 + |Z|^2)`, with the phase of the axis sum `x + y + z`.
pub fn dft321_combine(trace: &AccelTrace3) -> Result<Vec<f64>> {
    let n = trace.len();
    if n == 0 {
        return Err(Error::Range("acceleration trace is empty".into()));
    }
    let axis = |a: usize| -> Vec<f64> { trace.samples.iter().map(|s| s[a] as f64).collect() };
    let spectra: Vec<Vec<Complex<f64>>> = (0..3).map(|a| fft(&axis(a), false)).collect();
    let sum: Vec<f64> = trace
        .samples
        .iter()
        .map(|s| s.iter().map(|&v| v as f64).sum())
        .collect();
    let sum_spec = fft(&sum, false);

    let mut combined: Vec<Complex<f64>> = (0..n)
        .map(|k| {
            let mag = spectra.iter().map(|s| s[k].norm_sqr()).sum::<f64>().sqrt();
            let phase = sum_spec[k].arg();
            Complex::from_polar(mag, phase)
        })
        .collect();
    // Hermitian symmetry so the inverse transform is real.
    combined[0] = Complex::new(combined[0].re.signum() * combined[0].norm(), 0.0);
    if n.is_multiple_of(2) {
        let nyq = combined[n / 2];
        combined[n / 2] = Complex::new(nyq.re.signum() * nyq.norm(), 0.0);
    }
    for k in 1..n.div_ceil(2) {
        combined[n - k] = combined[k].conj();
    }
    let mut buf = combined;
    let mut planner = FftPlanner::new();
    planner.plan_fft_inverse(n).process(&mut buf);
    Ok(buf.iter().map(|c| c.re / n as f64).collect())
}

/// How each spectrogram bin is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumScale {
    #[default]
    Magnitude,
    Power,
    /// `ln(1 + magnitude)`
    Log,
}

impl std::str::FromStr for SpectrumScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "magnitude" => Ok(SpectrumScale::Magnitude),
            "power" => Ok(SpectrumScale::Power),
            "log" => Ok(SpectrumScale::Log),
            other => Err(Error::Config(format!(
                "unknown spectrum scale `{other}` (magnitude|power|log)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramConfig {
    pub window_len: usize,
    pub hop: usize,
    pub channels: usize,
    pub scale: SpectrumScale,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        SpectrogramConfig {
            window_len: WINDOW_LEN,
            hop: HOP,
            channels: CHANNELS,
            scale: SpectrumScale::Magnitude,
        }
    }
}

/// Time-frequency map stored channels-first as `[1, channels, frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub frames: Tensor<f32>,
    pub window_len: usize,
    pub hop: usize,
}

impl Spectrogram {
    pub fn channels(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn frame_count(&self) -> usize {
        self.frames.shape()[2]
    }
}

/// Number of whole windows in a trace of `len` samples.
pub fn frame_count(len: usize, window_len: usize, hop: usize) -> Option<usize> {
    (len >= window_len && hop > 0).then(|| (len - window_len) / hop + 1)
}

/// Symmetric Hamming window `0.54 - 0.46 cos(2 pi n / (N - 1))`.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

/// Hamming-windowed DFT frames, keeping the lowest `channels` bins.
pub fn enframe_spectrogram(trace: &[f64], cfg: &SpectrogramConfig) -> Result<Spectrogram> {
    if cfg.channels == 0 || cfg.channels > cfg.window_len / 2 + 1 {
        return Err(Error::Config(format!(
            "{} channels with a {}-sample window",
            cfg.channels, cfg.window_len
        )));
    }
    let frames = frame_count(trace.len(), cfg.window_len, cfg.hop).ok_or_else(|| Error::InputTooSmall {
        what: "spectrogram (one analysis window)".into(),
        required: cfg.window_len,
        actual: trace.len(),
    })?;
    let window = hamming(cfg.window_len);
    let mut planner = FftPlanner::new();
    let plan = planner.plan_fft_forward(cfg.window_len);
    let mut out = vec![0f32; cfg.channels * frames];
    let mut buf = vec![Complex::new(0.0, 0.0); cfg.window_len];
    for t in 0..frames {
        let seg = &trace[t * cfg.hop..t * cfg.hop + cfg.window_len];
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new(x * w, 0.0);
        }
        plan.process(&mut buf);
        for (c, bin) in buf.iter().take(cfg.channels).enumerate() {
            let mag = bin.norm();
            let v = match cfg.scale {
                SpectrumScale::Magnitude => mag,
                SpectrumScale::Power => mag * mag,
                SpectrumScale::Log => mag.ln_1p(),
            };
            out[c * frames + t] = v as f32;
        }
    }
    Ok(Spectrogram {
        frames: Tensor::new([1, cfg.channels, frames], out)?,
        window_len: cfg.window_len,
        hop: cfg.hop,
    })
}

/// Rescale each frequency channel to `[0, 1]`; constant channels become 0.
pub fn normalize_channels(spec: &Spectrogram) -> Spectrogram {
    let (_, channels, frames) = spec.frames.dims3().expect("spectrogram is [1, C, T]");
    let mut data = spec.frames.data().to_vec();
    for row in data.chunks_mut(frames).take(channels) {
        let (lo, hi) = row.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let range = hi - lo;
        for v in row.iter_mut() {
            *v = if range > 0.0 {
                ((*v - lo) / range).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
    }
    Spectrogram {
        frames: Tensor::new(spec.frames.shape().to_vec(), data).expect("same shape"),
        window_len: spec.window_len,
        hop: spec.hop,
    }
}

/// Contiguous `frames`-long slice starting at a uniformly random frame.
pub fn subsample_training_window<R: Rng + ?Sized>(
    spec: &Spectrogram,
    frames: usize,
    rng: &mut R,
) -> Result<Spectrogram> {
    let total = spec.frame_count();
    if frames == 0 || frames > total {
        return Err(Error::InputTooSmall {
            what: "training window (frames)".into(),
            required: frames,
            actual: total,
        });
    }
    let start = rng.random_range(0..=total - frames);
    Ok(Spectrogram {
        frames: spec.frames.crop(0, start, spec.channels(), frames)?,
        window_len: spec.window_len,
        hop: spec.hop,
    })
}

/// Full test-time preprocessing of a raw trace: DFT321, spectrogram,
/// per-channel normalization.
pub fn preprocess_trace(trace: &AccelTrace3, cfg: &SpectrogramConfig) -> Result<Spectrogram> {
    let combined = dft321_combine(trace)?;
    Ok(normalize_channels(&enframe_spectrogram(&combined, cfg)?))
}

/// A trace as read from disk: either raw three-axis or already combined.
#[derive(Debug, Clone, PartialEq)]
pub enum HapticRecording {
    ThreeAxis(AccelTrace3),
    Combined { samples: Vec<f64>, sample_rate_hz: f64 },
}

impl HapticRecording {
    pub fn sample_rate_hz(&self) -> f64 {
        match self {
            HapticRecording::ThreeAxis(t) => t.sample_rate_hz(),
            HapticRecording::Combined { sample_rate_hz, .. } => *sample_rate_hz,
        }
    }

    /// Single-axis signal after dropping `trim` leading samples.
    pub fn combined(&self, trim: usize) -> Result<Vec<f64>> {
        match self {
            HapticRecording::ThreeAxis(t) => dft321_combine(&t.trim_leading(trim)?),
            HapticRecording::Combined { samples, .. } => {
                if trim >= samples.len() {
                    return Err(Error::Range("trim removes the whole trace".into()));
                }
                Ok(samples[trim..].to_vec())
            }
        }
    }

    /// Unnormalized spectrogram (normalization is applied per use).
    pub fn spectrogram(&self, trim: usize, cfg: &SpectrogramConfig) -> Result<Spectrogram> {
        enframe_spectrogram(&self.combined(trim)?, cfg)
    }
}

pub fn header_path(path: &Path) -> PathBuf {
    path.with_extension("hdr")
}

fn read_sample_rate(path: &Path) -> Result<f64> {
    let hdr = header_path(path);
    let Ok(text) = fs::read_to_string(&hdr) else {
        return Ok(DEFAULT_SAMPLE_RATE_HZ);
    };
    for line in text.lines() {
        if let Some((key, value)) = line.split_once('=') {
            if key.trim() == "sample_rate_hz" {
                return value
                    .trim()
                    .parse()
                    .map_err(|_| Error::Dataset(format!("{}: bad sample_rate_hz `{}`", hdr.display(), value.trim())));
            }
        }
    }
    Ok(DEFAULT_SAMPLE_RATE_HZ)
}

fn read_f32s(path: &Path) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Dataset(format!(
            "{}: length {} is not a whole number of f32 values",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

/// Read an `.acc3` (three-axis) or `.acc1` (combined) trace.
pub fn read_recording(path: &Path) -> Result<HapticRecording> {
    let rate = read_sample_rate(path)?;
    let values = read_f32s(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("acc3") => {
            if values.len() % 3 != 0 {
                return Err(Error::Dataset(format!(
                    "{}: {} values is not a whole number of (x, y, z) triples",
                    path.display(),
                    values.len()
                )));
            }
            let samples = values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
            Ok(HapticRecording::ThreeAxis(
                AccelTrace3::new(samples, rate).map_err(|e| Error::Dataset(format!("{}: {e}", path.display())))?,
            ))
        }
        Some("acc1") => {
            if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Dataset(format!("{}: empty or non-finite trace", path.display())));
            }
            Ok(HapticRecording::Combined {
                samples: values.into_iter().map(f64::from).collect(),
                sample_rate_hz: rate,
            })
        }
        _ => Err(Error::Dataset(format!(
            "{}: expected an .acc3 or .acc1 trace",
            path.display()
        ))),
    }
}

/// Write a three-axis trace and its sidecar header.
pub fn write_acc3(path: &Path, trace: &AccelTrace3) -> Result<()> {
    let mut bytes = Vec::with_capacity(trace.len() * 12);
    for s in trace.samples() {
        for v in s {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let hdr = header_path(path);
    fs::write(&hdr, format!("sample_rate_hz = {}\naxes = 3\n", trace.sample_rate_hz())).map_err(|e| Error::io(hdr, e))
}

pub fn is_trace_file(path: &Path) -> bool {
    matches!(path.extension().and_then(|e| e.to_str()), Some("acc3" | "acc1"))
}
