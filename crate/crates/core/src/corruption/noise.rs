//! Per-sample noise. Every function consumes draws in raster order, channel
//! by channel (R, G, B) unless noted otherwise.

use crate::determinism::RngStream;
use crate::raster::Image;

/// `x + N(0, std)` in the `[0, 1]` domain.
pub(crate) fn gaussian_noise(image: &Image, std: f64, rng: &mut RngStream) -> Image {
    let mut img = image.to_float();
    for v in &mut img.data {
        *v += (rng.next_gaussian() * std) as f32;
    }
    img.to_image()
}

/// `Poisson(x * scale) / scale`; a lower scale means fewer photons and
/// more noise.
pub(crate) fn shot_noise(image: &Image, scale: f64, rng: &mut RngStream) -> Image {
    let mut img = image.to_float();
    for v in &mut img.data {
        *v = (rng.next_poisson(*v as f64 * scale) as f64 / scale) as f32;
    }
    img.to_image()
}

/// `x + x * N(0, std)`.
pub(crate) fn speckle_noise(image: &Image, std: f64, rng: &mut RngStream) -> Image {
    let mut img = image.to_float();
    for v in &mut img.data {
        *v += *v * (rng.next_gaussian() * std) as f32;
    }
    img.to_image()
}

/// Sets `round(amount * W * H)` distinct pixels to black or white.
///
/// Draws: for each hit, a position (partial Fisher–Yates step) and then a
/// coin for salt versus pepper.
pub(crate) fn salt_pepper(image: &Image, amount: f64, rng: &mut RngStream) -> Image {
    let total = image.width() as usize * image.height() as usize;
    let hits = ((amount * total as f64).round() as usize).min(total);
    let mut order: Vec<u32> = (0..total as u32).collect();
    let mut out = image.clone();
    let data = out.as_raw_mut();
    for i in 0..hits {
        let j = i + rng.next_below((total - i) as u64) as usize;
        order.swap(i, j);
        let value = if rng.next_bool() { 255 } else { 0 };
        let p = order[i] as usize * 3;
        data[p..p + 3].fill(value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::determinism::make_rng;

    fn mid_gray() -> Image {
        Image::filled(40, 30, [128, 128, 128])
    }

    #[test]
    fn gaussian_noise_spread_tracks_std() {
        let out = gaussian_noise(&mid_gray(), 0.1, &mut make_rng(1));
        let n = out.as_raw().len() as f64;
        let mean = out.as_raw().iter().map(|&v| v as f64).sum::<f64>() / n;
        let sd = (out.as_raw().iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((mean - 128.0).abs() < 2.0);
        assert!((sd - 25.5).abs() < 2.5, "{sd}");
    }

    #[test]
    fn shot_noise_is_stronger_at_lower_scale() {
        let spread = |scale| {
            let out = shot_noise(&mid_gray(), scale, &mut make_rng(2));
            out.as_raw().iter().map(|&v| (v as f64 - 128.0).abs()).sum::<f64>()
        };
        assert!(spread(5.0) > spread(25.0));
    }

    #[test]
    fn speckle_leaves_black_untouched() {
        let black = Image::filled(8, 8, [0, 0, 0]);
        assert_eq!(speckle_noise(&black, 0.25, &mut make_rng(3)), black);
    }

    #[test]
    fn salt_pepper_hits_the_requested_fraction() {
        let img = mid_gray();
        let out = salt_pepper(&img, 0.08, &mut make_rng(4));
        let changed = out.as_raw().chunks(3).filter(|p| p[0] != 128).count();
        assert_eq!(changed, 96); // round(0.08 * 1200)
        assert!(out.as_raw().chunks(3).all(|p| p == [128; 3] || p == [0; 3] || p == [255; 3]));
    }
}
