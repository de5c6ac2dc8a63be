//! The corruption engine: a fixed catalog of 49 augmentations applied
//! deterministically from `(image bytes, config, seeds)`.

mod binary;
mod blur;
pub mod catalog;
mod color;
pub(crate) mod filter;
mod geometric;
mod jpeg;
mod noise;
mod occlusion;
pub mod spatial;
mod text;
mod weather;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use catalog::{lookup, registry, AugmentationSpec, Category, Schedule, Severity, Trend, SPATIAL_RESAMPLING};
pub use jpeg::jpeg_recompress;
pub use spatial::{resample, resize, warp, DisplacementField, FillPolicy, Filter};

use crate::determinism::{make_rng, RngStream, SeedScheme};
use crate::raster::Image;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorruptionError {
    #[error("unknown augmentation `{0}`")]
    UnknownAugmentation(String),
    #[error("augmentation `{0}` needs a severity")]
    SeverityMissing(String),
    #[error("augmentation `{0}` is binary and takes no severity")]
    SeverityNotApplicable(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("jpeg round trip failed: {0}")]
    EncodeFailure(String),
}

/// One corruption request. `sample_index` is the sample's position in the
/// sampled dataset and selects the random stream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CorruptionConfig {
    pub aug_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<Severity>,
    #[serde(default)]
    pub sample_index: u64,
}

impl CorruptionConfig {
    pub fn new(aug_id: impl Into<String>, severity: Option<Severity>, sample_index: u64) -> Self {
        Self {
            aug_id: aug_id.into(),
            severity,
            sample_index,
        }
    }

    /// Checks the config against the registry and returns the resolved
    /// spec with its parameter (None for binary transforms).
    pub fn resolve(&self) -> Result<(&'static AugmentationSpec, Option<f64>), CorruptionError> {
        let spec = lookup(&self.aug_id).ok_or_else(|| CorruptionError::UnknownAugmentation(self.aug_id.clone()))?;
        match (spec.schedule, self.severity) {
            (Some(s), Some(sev)) => Ok((spec, Some(s.at(sev)))),
            (Some(_), None) => Err(CorruptionError::SeverityMissing(self.aug_id.clone())),
            (None, Some(_)) => Err(CorruptionError::SeverityNotApplicable(self.aug_id.clone())),
            (None, None) => Ok((spec, None)),
        }
    }
}

/// Applies one corruption to a single image.
pub fn apply(image: &Image, cfg: &CorruptionConfig, seeds: &SeedScheme) -> Result<Image, CorruptionError> {
    let (spec, param) = cfg.resolve()?;
    let mut rng = make_rng(seeds.for_sample(cfg.sample_index));
    apply_with_rng(image, spec.id, param, &mut rng)
}

/// Applies one corruption to every image of a sample, in order. The
/// images share one stream, so the second image continues where the
/// first left off.
pub fn apply_sample(images: &[Image], cfg: &CorruptionConfig, seeds: &SeedScheme) -> Result<Vec<Image>, CorruptionError> {
    let (spec, param) = cfg.resolve()?;
    let mut rng = make_rng(seeds.for_sample(cfg.sample_index));
    images.iter().map(|img| apply_with_rng(img, spec.id, param, &mut rng)).collect()
}

/// Dispatch with an explicit parameter and stream. Accepts any value for
/// `param`, which makes it the raw-parameter escape hatch; only the
/// scheduled values are covered by tests.
pub fn apply_with_rng(image: &Image, aug_id: &str, param: Option<f64>, rng: &mut RngStream) -> Result<Image, CorruptionError> {
    let spec = lookup(aug_id).ok_or_else(|| CorruptionError::UnknownAugmentation(aug_id.to_string()))?;
    let p = match (spec.is_binary(), param) {
        (false, Some(p)) if p.is_finite() => p,
        (false, Some(p)) => return Err(CorruptionError::InvalidParameter(format!("{aug_id}: {p}"))),
        (false, None) => return Err(CorruptionError::SeverityMissing(aug_id.to_string())),
        (true, Some(_)) => return Err(CorruptionError::SeverityNotApplicable(aug_id.to_string())),
        (true, None) => 0.0,
    };
    let out = match spec.id {
        "gaussian_blur" => blur::gaussian_blur(image, p),
        "motion_blur" => blur::motion_blur(image, p, rng),
        "defocus_blur" => blur::defocus_blur(image, p),
        "zoom_blur" => blur::zoom_blur(image, p),
        "glass_blur" => blur::glass_blur(image, p, rng),
        "gaussian_noise" => noise::gaussian_noise(image, p, rng),
        "shot_noise" => {
            if p <= 0.0 {
                return Err(CorruptionError::InvalidParameter(format!("shot_noise scale must be positive, got {p}")));
            }
            noise::shot_noise(image, p, rng)
        }
        "speckle_noise" => noise::speckle_noise(image, p, rng),
        "salt_pepper" => noise::salt_pepper(image, p, rng),
        "fog" => weather::fog(image, p, rng),
        "frost" => weather::frost(image, p, rng),
        "snow" => weather::snow(image, p, rng),
        "rain" => weather::rain(image, p, rng),
        "spatter" => weather::spatter(image, p, rng),
        "jpeg_compression" => {
            let q = p.round();
            if !(1.0..=100.0).contains(&q) {
                return Err(CorruptionError::InvalidParameter(format!("jpeg quality {p}")));
            }
            jpeg_recompress(image, q as u8)?
        }
        "pixelate" => {
            let small = resample(image, p, Filter::Nearest)?;
            resize(&small, image.width(), image.height(), Filter::Nearest)
        }
        "rotate" => geometric::rotate(image, p),
        "shear" => geometric::shear(image, p),
        "affine" => geometric::affine(image, p, rng),
        "perspective_transform" => geometric::perspective(image, p, rng),
        "elastic_transform" => geometric::elastic(image, p, rng),
        "brightness" | "brightness_up" => color::brightness(image, p),
        "contrast" | "contrast_up" => color::contrast(image, p),
        "saturation" | "saturation_up" => color::saturation(image, p),
        "gamma" | "gamma_up" => color::gamma(image, p),
        "hue_shift" => color::hue_shift(image, p),
        "color_jitter" => color::color_jitter(image, p, rng),
        "random_occlusion" => occlusion::random_occlusion(image, p, rng),
        "grid_mask" => occlusion::grid_mask(image, p, rng),
        "center_occlusion" => occlusion::center_occlusion(image, p),
        "downsample" | "upsample" => resample(image, p, Filter::Bilinear)?,
        "sharpen" => color::sharpen(image, p),
        "posterize" => color::posterize(image, p),
        "solarize" => color::solarize(image, p),
        "text_overlay" => text::text_overlay(image, p),
        "watermark" => text::watermark(image, p),
        "add_border" => occlusion::add_border(image, p),
        "flip_h" => binary::flip_h(image),
        "flip_v" => binary::flip_v(image),
        "grayscale" => binary::grayscale(image),
        "invert" => binary::invert(image),
        "channel_swap" => binary::channel_swap(image),
        "equalize" => binary::equalize(image),
        "autocontrast" => binary::autocontrast(image),
        other => unreachable!("registry entry `{other}` has no implementation"),
    };
    Ok(out)
}
