//! Pointwise colour and tone operations plus the unsharp mask.

use super::filter;
use crate::determinism::RngStream;
use crate::raster::{FloatImage, Image};

const LUMA: [f32; 3] = [0.299, 0.587, 0.114];

fn luma(px: &[f32]) -> f32 {
    px[0] * LUMA[0] + px[1] * LUMA[1] + px[2] * LUMA[2]
}

fn scale_brightness(img: &mut FloatImage, factor: f32) {
    img.data.iter_mut().for_each(|v| *v *= factor);
}

fn scale_contrast(img: &mut FloatImage, factor: f32) {
    let n = (img.data.len() / 3).max(1) as f64;
    let mean = (img.data.chunks_exact(3).map(|p| luma(p) as f64).sum::<f64>() / n) as f32;
    img.data.iter_mut().for_each(|v| *v = mean + (*v - mean) * factor);
}

fn scale_saturation(img: &mut FloatImage, factor: f32) {
    for px in img.data.chunks_exact_mut(3) {
        let g = luma(px);
        px.iter_mut().for_each(|v| *v = g + (*v - g) * factor);
    }
}

/// `x * factor`.
pub(crate) fn brightness(image: &Image, factor: f64) -> Image {
    let mut img = image.to_float();
    scale_brightness(&mut img, factor as f32);
    img.to_image()
}

/// Blend towards the mean luma of the whole image.
pub(crate) fn contrast(image: &Image, factor: f64) -> Image {
    let mut img = image.to_float();
    scale_contrast(&mut img, factor as f32);
    img.to_image()
}

/// Blend towards each pixel's own luma; factor 0 is grayscale.
pub(crate) fn saturation(image: &Image, factor: f64) -> Image {
    let mut img = image.to_float();
    scale_saturation(&mut img, factor as f32);
    img.to_image()
}

pub(crate) fn gamma(image: &Image, gamma: f64) -> Image {
    let mut img = image.to_float();
    img.data.iter_mut().for_each(|v| *v = v.powf(gamma as f32));
    img.to_image()
}

/// Rotates hue in HSV space by `degrees`.
pub(crate) fn hue_shift(image: &Image, degrees: f64) -> Image {
    let mut img = image.to_float();
    let shift = (degrees / 360.0) as f32;
    for px in img.data.chunks_exact_mut(3) {
        let (h, s, v) = rgb_to_hsv(px[0], px[1], px[2]);
        let (r, g, b) = hsv_to_rgb((h + shift).rem_euclid(1.0), s, v);
        px.copy_from_slice(&[r, g, b]);
    }
    img.to_image()
}

/// Hue in `[0, 1)`.
pub(crate) fn rgb_to_hsv(r: f32, g: f32, b: f32) -> (f32, f32, f32) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let d = max - min;
    let s = if max > 0.0 { d / max } else { 0.0 };
    if d == 0.0 {
        return (0.0, s, max);
    }
    let h = if max == r {
        ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    };
    (h / 6.0, s, max)
}

pub(crate) fn hsv_to_rgb(h: f32, s: f32, v: f32) -> (f32, f32, f32) {
    let h6 = h * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector as i32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

/// Brightness, contrast and saturation each scaled by `1 + u`,
/// `u ~ U(-range, range)`, applied in that order with clipping in between.
///
/// Draws: three uniforms, B then C then S.
pub(crate) fn color_jitter(image: &Image, range: f64, rng: &mut RngStream) -> Image {
    let ub = rng.uniform(-range, range);
    let uc = rng.uniform(-range, range);
    let us = rng.uniform(-range, range);
    let mut img = image.to_float();
    scale_brightness(&mut img, (1.0 + ub) as f32);
    img.clamp();
    scale_contrast(&mut img, (1.0 + uc) as f32);
    img.clamp();
    scale_saturation(&mut img, (1.0 + us) as f32);
    img.to_image()
}

pub(crate) const SHARPEN_SIGMA: f32 = 1.0;

/// Unsharp mask `x + factor * (x - G_1 * x)`.
pub(crate) fn sharpen(image: &Image, factor: f64) -> Image {
    let src = image.to_float();
    let blurred = filter::gaussian_blur(&src, SHARPEN_SIGMA);
    let f = factor as f32;
    let mut out = src.clone();
    for (o, b) in out.data.iter_mut().zip(&blurred.data) {
        *o += f * (*o - b);
    }
    out.to_image()
}

/// Keeps the top `bits` bits of every sample.
pub(crate) fn posterize(image: &Image, bits: f64) -> Image {
    let bits = bits.round().clamp(0.0, 8.0) as u32;
    let mask = (0xFFu32 << (8 - bits)) as u8;
    image.map_samples(|v| v & mask)
}

/// Inverts samples at or above `threshold`.
pub(crate) fn solarize(image: &Image, threshold: f64) -> Image {
    image.map_samples(|v| if v as f64 >= threshold { 255 - v } else { v })
}
