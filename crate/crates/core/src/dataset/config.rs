use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::builder::NetKind;
use crate::error::{Error, Result};
use crate::haptic::SpectrumScale;
use crate::inference::{FeatureTap, FusionLayer, DEFAULT_FUSION_SAMPLES};
use crate::network::InitScheme;
use crate::optim::LrSchedule;

/// How training images are rotated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationMode {
    /// Uniform over 0, 90, 180, 270 degrees.
    Quarter,
    /// Uniform angle in [0, 360) with a central crop.
    Arbitrary,
    None,
}

impl FromStr for RotationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quarter" => Ok(RotationMode::Quarter),
            "arbitrary" => Ok(RotationMode::Arbitrary),
            "none" => Ok(RotationMode::None),
            _ => Err(Error::Config(format!(
                "unknown rotation `{s}` (quarter, arbitrary, none)"
            ))),
        }
    }
}

/// Training hyper-parameters. `net` is `None` for fusion training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub net: Option<NetKind>,
    pub schedule: LrSchedule,
    pub batch_size: usize,
    /// Spectrogram frames per haptic training sample.
    pub haptic_frames: usize,
    /// Side of the square image patch per visual training sample.
    pub image_size: usize,
    pub seed: u64,
    pub head_lr_multiplier: f64,
    pub weight_decay: f64,
    pub width_divisor: usize,
    pub grouped: bool,
    pub folds: usize,
    pub fusion_layer: FusionLayer,
    pub feature_tap: FeatureTap,
    pub fusion_samples: usize,
    pub log_every: usize,
    pub rotation: RotationMode,
    pub spectrum_scale: SpectrumScale,
    pub trim_leading: usize,
    pub pretrained: Option<PathBuf>,
    pub init: InitScheme,
}

impl TrainConfig {
    fn base(
        net: Option<NetKind>,
        schedule: LrSchedule,
        batch_size: usize,
        haptic_frames: usize,
        image_size: usize,
    ) -> Self {
        TrainConfig {
            net,
            schedule,
            batch_size,
            haptic_frames,
            image_size,
            seed: 0,
            head_lr_multiplier: 1.0,
            weight_decay: 5e-4,
            width_divisor: 1,
            grouped: false,
            folds: 10,
            fusion_layer: FusionLayer::Fc2,
            feature_tap: FeatureTap::Output,
            fusion_samples: DEFAULT_FUSION_SAMPLES,
            log_every: 100,
            rotation: RotationMode::Quarter,
            spectrum_scale: SpectrumScale::Magnitude,
            trim_leading: 0,
            pretrained: None,
            init: InitScheme::Gaussian,
        }
    }

    /// Full-scale defaults for a unimodal network.
    pub fn for_net(kind: NetKind) -> Self {
        match kind {
            NetKind::Haptic => Self::base(
                Some(kind),
                LrSchedule {
                    base_lr: 1e-4,
                    gamma: 0.3,
                    step_every: 40_000,
                    total_iters: 100_000,
                },
                10,
                300,
                224,
            ),
            NetKind::Visual | NetKind::VisualTcnn => Self::base(
                Some(kind),
                LrSchedule {
                    base_lr: 3e-5,
                    gamma: 0.75,
                    step_every: 40_000,
                    total_iters: 100_000,
                },
                2,
                192,
                384,
            ),
        }
    }

    /// Full-scale defaults for joint fusion training.
    pub fn for_fusion() -> Self {
        let mut c = Self::base(
            None,
            LrSchedule {
                base_lr: 1e-6,
                gamma: 0.1,
                step_every: 4_000_000,
                total_iters: 100_000,
            },
            1,
            192,
            224,
        );
        c.head_lr_multiplier = 10.0;
        c
    }

    pub fn is_fusion(&self) -> bool {
        self.net.is_none()
    }

    /// Apply `key = value` lines (`#` starts a comment).
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got `{line}`", lineno + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        self.validate()
    }

    pub fn load(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
        }
        match key {
            "base_lr" => self.schedule.base_lr = parse(key, value)?,
            "gamma" => self.schedule.gamma = parse(key, value)?,
            "step_every" => self.schedule.step_every = parse(key, value)?,
            "total_iters" => self.schedule.total_iters = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "input_size" => match self.net {
                Some(NetKind::Haptic) => self.haptic_frames = parse(key, value)?,
                Some(_) => self.image_size = parse(key, value)?,
                None => {
                    return Err(Error::Config(
                        "fusion takes `haptic_frames` and `image_size` instead of `input_size`".into(),
                    ))
                }
            },
            "haptic_frames" => self.haptic_frames = parse(key, value)?,
            "image_size" => self.image_size = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "head_lr_multiplier" => self.head_lr_multiplier = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "width_divisor" => self.width_divisor = parse(key, value)?,
            "grouped" => self.grouped = parse(key, value)?,
            "folds" => self.folds = parse(key, value)?,
            "fusion_layer" => self.fusion_layer = value.parse()?,
            "feature_tap" => {
                self.feature_tap = match value {
                    "output" => FeatureTap::Output,
                    "input" => FeatureTap::Input,
                    _ => {
                        return Err(Error::Config(format!(
                            "`feature_tap`: expected output or input, got `{value}`"
                        )))
                    }
                }
            }
            "fusion_samples" | "k" => self.fusion_samples = parse(key, value)?,
            "log_every" => self.log_every = parse(key, value)?,
            "rotation" => self.rotation = value.parse()?,
            "spectrum_scale" => self.spectrum_scale = value.parse()?,
            "trim_leading" => self.trim_leading = parse(key, value)?,
            "init" => self.init = value.parse()?,
            "pretrained" => self.pretrained = Some(PathBuf::from(value)),
            "desk_scale" => {
                let s: usize = parse(key, value)?;
                if s == 0 {
                    return Err(Error::Config("`desk_scale` must be >= 1".into()));
                }
                self.width_divisor = s;
                self.schedule.total_iters = (self.schedule.total_iters / s).max(1);
                self.schedule.step_every = (self.schedule.step_every / s).max(1);
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        LrSchedule::new(
            self.schedule.base_lr,
            self.schedule.gamma,
            self.schedule.step_every,
            self.schedule.total_iters,
        )?;
        let positive = [
            ("batch_size", self.batch_size),
            ("haptic_frames", self.haptic_frames),
            ("image_size", self.image_size),
            ("width_divisor", self.width_divisor),
            ("fusion_samples", self.fusion_samples),
            ("log_every", self.log_every),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("`{name}` must be >= 1")));
        }
        if !(self.head_lr_multiplier.is_finite() && self.head_lr_multiplier > 0.0)
            || !(self.weight_decay.is_finite() && self.weight_decay >= 0.0)
        {
            return Err(Error::Config(
                "head_lr_multiplier must be > 0 and weight_decay >= 0".into(),
            ));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_defaults() {
        let h = TrainConfig::for_net(NetKind::Haptic);
        assert_eq!((h.schedule.base_lr, h.schedule.gamma), (1e-4, 0.3));
        assert_eq!((h.batch_size, h.haptic_frames), (10, 300));
        let v = TrainConfig::for_net(NetKind::Visual);
        assert_eq!((v.schedule.base_lr, v.batch_size, v.image_size), (3e-5, 2, 384));
        let f = TrainConfig::for_fusion();
        assert_eq!((f.haptic_frames, f.image_size, f.batch_size), (192, 224, 1));
        assert!(f.schedule.step_every > f.schedule.total_iters);
    }

    #[test]
    fn parses_key_values() {
        let mut c = TrainConfig::for_net(NetKind::Haptic);
        c.apply_text("# desk run\nbase_lr = 0.001\ninput_size=200\nwidth_divisor = 10 # narrow\n")
            .unwrap();
        assert_eq!((c.schedule.base_lr, c.haptic_frames, c.width_divisor), (1e-3, 200, 10));
        assert!(c.apply_text("bogus = 1").is_err());
        assert!(c.apply_text("batch_size = 0").is_err());
        assert!(c.apply_text("base_lr 3").is_err());
    }
}
