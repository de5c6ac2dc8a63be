//! The fixed augmentation catalog: identity, category and the three-level
//! parameter schedule of every corruption.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Blur,
    Noise,
    Weather,
    Digital,
    Geometric,
    Occlusion,
    ColorTone,
    Resolution,
    VlmSpecific,
    Binary,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::Blur,
        Category::Noise,
        Category::Weather,
        Category::Digital,
        Category::Geometric,
        Category::Occlusion,
        Category::ColorTone,
        Category::Resolution,
        Category::VlmSpecific,
        Category::Binary,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::Blur => "Blur",
            Category::Noise => "Noise",
            Category::Weather => "Weather",
            Category::Digital => "Digital",
            Category::Geometric => "Geometric",
            Category::Occlusion => "Occlusion",
            Category::ColorTone => "Color/Tone",
            Category::Resolution => "Resolution",
            Category::VlmSpecific => "VLM-specific",
            Category::Binary => "Binary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Low,
    Mid,
    High,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::Low, Severity::Mid, Severity::High];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Low => "low",
            Severity::Mid => "mid",
            Severity::High => "high",
        }
    }

    pub fn parse(s: &str) -> Option<Severity> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Some(Severity::Low),
            "mid" => Some(Severity::Mid),
            "high" => Some(Severity::High),
            _ => None,
        }
    }
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Direction in which the parameter moves as severity grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub low: f64,
    pub mid: f64,
    pub high: f64,
}

impl Schedule {
    pub fn at(&self, severity: Severity) -> f64 {
        match severity {
            Severity::Low => self.low,
            Severity::Mid => self.mid,
            Severity::High => self.high,
        }
    }

    pub fn trend(&self) -> Option<Trend> {
        if self.low < self.mid && self.mid < self.high {
            Some(Trend::Increasing)
        } else if self.low > self.mid && self.mid > self.high {
            Some(Trend::Decreasing)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AugmentationSpec {
    pub id: &'static str,
    pub category: Category,
    pub param_name: &'static str,
    pub schedule: Option<Schedule>,
    pub note: &'static str,
    /// Output dimensions differ from the input (upsample, downsample, add_border).
    pub resizes: bool,
}

impl AugmentationSpec {
    pub fn is_binary(&self) -> bool {
        self.schedule.is_none()
    }

    pub fn parameter(&self, severity: Severity) -> Option<f64> {
        self.schedule.map(|s| s.at(severity))
    }
}

const fn graded(
    id: &'static str,
    category: Category,
    param_name: &'static str,
    low: f64,
    mid: f64,
    high: f64,
    note: &'static str,
) -> AugmentationSpec {
    AugmentationSpec {
        id,
        category,
        param_name,
        schedule: Some(Schedule { low, mid, high }),
        note,
        resizes: false,
    }
}

const fn resizing(spec: AugmentationSpec) -> AugmentationSpec {
    AugmentationSpec {
        resizes: true,
        ..spec
    }
}

const fn binary(id: &'static str) -> AugmentationSpec {
    AugmentationSpec {
        id,
        category: Category::Binary,
        param_name: "",
        schedule: None,
        note: "no severity levels",
        resizes: false,
    }
}

use Category::*;

static REGISTRY: [AugmentationSpec; 49] = [
    graded("gaussian_blur", Blur, "radius", 0.5, 1.5, 2.5, "pixels"),
    graded("motion_blur", Blur, "ksize", 5.0, 9.0, 15.0, "kernel size"),
    graded("defocus_blur", Blur, "radius", 1.0, 3.0, 5.0, "pixels"),
    graded("zoom_blur", Blur, "factor", 0.02, 0.06, 0.10, "zoom amount"),
    graded("glass_blur", Blur, "sigma", 0.5, 0.9, 1.3, "blur sigma"),
    graded("gaussian_noise", Noise, "std", 0.02, 0.06, 0.10, "normalized"),
    graded("shot_noise", Noise, "scale", 25.0, 10.0, 5.0, "lower=more"),
    graded("speckle_noise", Noise, "std", 0.05, 0.15, 0.25, "normalized"),
    graded("salt_pepper", Noise, "amount", 0.01, 0.04, 0.08, "pixel fraction"),
    graded("fog", Weather, "intensity", 0.2, 0.6, 1.0, "opacity"),
    graded("frost", Weather, "intensity", 0.2, 0.6, 1.0, "opacity"),
    graded("snow", Weather, "intensity", 0.1, 0.3, 0.5, "density"),
    graded("rain", Weather, "intensity", 0.1, 0.3, 0.5, "density"),
    graded("spatter", Weather, "intensity", 0.1, 0.3, 0.5, "coverage"),
    graded("jpeg_compression", Digital, "quality", 80.0, 50.0, 20.0, "lower=worse"),
    graded("pixelate", Digital, "scale", 0.9, 0.5, 0.2, "lower=coarser"),
    graded("rotate", Geometric, "degrees", 5.0, 15.0, 30.0, "rotation"),
    graded("shear", Geometric, "degrees", 5.0, 15.0, 25.0, "shear angle"),
    graded("affine", Geometric, "degrees", 5.0, 15.0, 30.0, "rotation+scale"),
    graded("perspective_transform", Geometric, "magnitude", 0.05, 0.15, 0.25, "distortion"),
    graded("elastic_transform", Geometric, "alpha", 30.0, 80.0, 180.0, "deformation"),
    graded("brightness", ColorTone, "factor", 0.7, 0.3, 0.1, "lower=darker"),
    graded("brightness_up", ColorTone, "factor", 1.3, 1.7, 2.5, "higher=brighter"),
    graded("contrast", ColorTone, "factor", 0.7, 0.3, 0.1, "lower=flatter"),
    graded("contrast_up", ColorTone, "factor", 1.3, 1.8, 3.0, "higher=sharper"),
    graded("saturation", ColorTone, "factor", 0.5, 0.1, 0.0, "lower=grayer"),
    graded("saturation_up", ColorTone, "factor", 1.5, 2.5, 4.0, "higher=vivid"),
    graded("gamma", ColorTone, "factor", 0.7, 0.4, 0.2, "lower=brighter"),
    graded("gamma_up", ColorTone, "factor", 1.3, 2.0, 3.0, "higher=darker"),
    graded("hue_shift", ColorTone, "degrees", 10.0, 40.0, 90.0, "color rotation"),
    graded("color_jitter", ColorTone, "range", 0.1, 0.3, 0.5, "random B/C/S"),
    graded("random_occlusion", Occlusion, "ratio", 0.05, 0.15, 0.25, "area blocked"),
    graded("grid_mask", Occlusion, "ratio", 0.1, 0.2, 0.3, "grid density"),
    graded("center_occlusion", Occlusion, "ratio", 0.1, 0.3, 0.5, "center blocked"),
    resizing(graded("downsample", Resolution, "scale", 0.75, 0.35, 0.15, "lower=smaller")),
    resizing(graded("upsample", Resolution, "scale", 1.5, 3.0, 6.0, "interpolation")),
    graded("sharpen", Resolution, "factor", 1.5, 3.0, 6.0, "edge enhance"),
    graded("posterize", Resolution, "bits", 6.0, 4.0, 2.0, "lower=fewer"),
    graded("solarize", Resolution, "threshold", 200.0, 128.0, 64.0, "lower=more"),
    graded("text_overlay", VlmSpecific, "fontsize", 24.0, 48.0, 72.0, "pixels"),
    graded("watermark", VlmSpecific, "fontsize", 24.0, 48.0, 72.0, "pixels"),
    resizing(graded("add_border", VlmSpecific, "width", 10.0, 30.0, 60.0, "pixels")),
    binary("flip_h"),
    binary("flip_v"),
    binary("grayscale"),
    binary("invert"),
    binary("channel_swap"),
    binary("equalize"),
    binary("autocontrast"),
];

/// All 49 augmentations: the severity-based ones in catalog order, then the
/// seven binary transforms.
pub fn registry() -> &'static [AugmentationSpec] {
    &REGISTRY
}

pub fn lookup(id: &str) -> Option<&'static AugmentationSpec> {
    REGISTRY.iter().find(|s| s.id == id)
}

/// Augmentations treated as spatial or resampling corruptions when
/// attributing tail risk.
pub const SPATIAL_RESAMPLING: [&str; 9] = [
    "upsample",
    "downsample",
    "elastic_transform",
    "zoom_blur",
    "rotate",
    "shear",
    "affine",
    "perspective_transform",
    "pixelate",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(registry().len(), 49);
        assert_eq!(registry().iter().filter(|s| s.schedule.is_some()).count(), 42);
        assert_eq!(registry().iter().filter(|s| s.is_binary()).count(), 7);
    }

    #[test]
    fn ids_are_unique() {
        let mut ids: Vec<_> = registry().iter().map(|s| s.id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 49);
    }

    #[test]
    fn category_sizes_match_taxonomy() {
        let count = |c| registry().iter().filter(|s| s.category == c).count();
        assert_eq!(count(Blur), 5);
        assert_eq!(count(Noise), 4);
        assert_eq!(count(Weather), 5);
        assert_eq!(count(Digital), 2);
        assert_eq!(count(Geometric), 5);
        assert_eq!(count(Occlusion), 3);
        assert_eq!(count(ColorTone), 10);
        assert_eq!(count(Resolution), 5);
        assert_eq!(count(VlmSpecific), 3);
        assert_eq!(count(Binary), 7);
    }

    #[test]
    fn spot_values() {
        let s = lookup("solarize").unwrap().schedule.unwrap();
        assert_eq!((s.low, s.mid, s.high), (200.0, 128.0, 64.0));
        let j = lookup("jpeg_compression").unwrap().schedule.unwrap();
        assert_eq!((j.low, j.mid, j.high), (80.0, 50.0, 20.0));
        let e = lookup("elastic_transform").unwrap().schedule.unwrap();
        assert_eq!((e.low, e.mid, e.high), (30.0, 80.0, 180.0));
        assert!(lookup("flip_v").unwrap().schedule.is_none());
        assert!(lookup("nope").is_none());
    }

    #[test]
    fn every_schedule_is_strictly_monotone() {
        for spec in registry().iter().filter(|s| !s.is_binary()) {
            assert!(spec.schedule.unwrap().trend().is_some(), "{} is not monotone", spec.id);
        }
        assert_eq!(lookup("jpeg_compression").unwrap().schedule.unwrap().trend(), Some(Trend::Decreasing));
        assert_eq!(lookup("upsample").unwrap().schedule.unwrap().trend(), Some(Trend::Increasing));
    }

    #[test]
    fn only_resolution_changers_resize() {
        let resizing: Vec<_> = registry().iter().filter(|s| s.resizes).map(|s| s.id).collect();
        assert_eq!(resizing, ["downsample", "upsample", "add_border"]);
    }

    #[test]
    fn spatial_set_is_in_registry() {
        for id in SPATIAL_RESAMPLING {
            assert!(lookup(id).is_some());
        }
    }
}
