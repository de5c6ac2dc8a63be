//! Procedural weather overlays: fog, frost, snow, rain and spatter.
//!
//! None of these use texture assets; every layer is generated from the
//! sample's stream, so outputs are reproducible from the seed alone.

use super::filter;
use super::spatial::{resize, Filter};
use crate::determinism::RngStream;
use crate::raster::Image;

/// Largest plasma grid generated before stretching to the image size.
const MAX_PLASMA: usize = 512;
const PLASMA_DECAY: f64 = 3.0;

/// Diamond-square fractal on a `(2^k + 1)`-sided grid, normalised to
/// `[0, 1]`.
///
/// Draws: one uniform per generated point; per level, the square step in
/// raster order of centres, then the diamond step in raster order.
pub(crate) fn plasma(side_pow2: usize, rng: &mut RngStream) -> (usize, Vec<f64>) {
    let n = side_pow2 + 1;
    let mut grid = vec![0.0f64; n * n];
    let mut step = side_pow2;
    let mut wibble = 100.0;
    while step > 1 {
        let half = step / 2;
        for y in (half..n).step_by(step) {
            for x in (half..n).step_by(step) {
                let avg = (grid[(y - half) * n + x - half]
                    + grid[(y - half) * n + x + half]
                    + grid[(y + half) * n + x - half]
                    + grid[(y + half) * n + x + half])
                    / 4.0;
                grid[y * n + x] = avg + rng.uniform(-wibble, wibble);
            }
        }
        for y in (0..n).step_by(half) {
            let x_start = if (y / half) % 2 == 0 { half } else { 0 };
            for x in (x_start..n).step_by(step) {
                let mut sum = 0.0;
                let mut count = 0.0;
                if y >= half {
                    sum += grid[(y - half) * n + x];
                    count += 1.0;
                }
                if y + half < n {
                    sum += grid[(y + half) * n + x];
                    count += 1.0;
                }
                if x >= half {
                    sum += grid[y * n + x - half];
                    count += 1.0;
                }
                if x + half < n {
                    sum += grid[y * n + x + half];
                    count += 1.0;
                }
                grid[y * n + x] = sum / count + rng.uniform(-wibble, wibble);
            }
        }
        wibble /= PLASMA_DECAY;
        step = half;
    }
    let (lo, hi) = grid.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = if hi > lo { hi - lo } else { 1.0 };
    grid.iter_mut().for_each(|v| *v = (*v - lo) / range);
    (n, grid)
}

/// A `[0, 1]` plasma layer stretched to `w x h`.
fn plasma_layer(w: u32, h: u32, rng: &mut RngStream) -> Vec<f32> {
    let want = (w.max(h) as usize).min(MAX_PLASMA).max(2);
    let side = want.next_power_of_two();
    let (n, grid) = plasma(side, rng);
    let as_image = Image::new(
        n as u32,
        n as u32,
        grid.iter().flat_map(|&v| {
            let b = (v * 255.0).round() as u8;
            [b, b, b]
        })
        .collect(),
    )
    .expect("plasma grid is non-empty");
    // Bilinear stretch of the grid; the channel is replicated, so read one.
    resize(&as_image, w, h, Filter::Bilinear)
        .as_raw()
        .chunks(3)
        .map(|p| p[0] as f32 / 255.0)
        .collect()
}

/// Blends towards a light fog tone with per-pixel alpha `intensity * plasma`.
pub(crate) fn fog(image: &Image, intensity: f64, rng: &mut RngStream) -> Image {
    let layer = plasma_layer(image.width(), image.height(), rng);
    let mut img = image.to_float();
    let opacity = intensity as f32;
    for (i, px) in img.data.chunks_mut(3).enumerate() {
        let p = layer[i];
        let alpha = opacity * p;
        let tone = 0.75 + 0.25 * p;
        for v in px {
            *v = *v * (1.0 - alpha) + tone * alpha;
        }
    }
    img.to_image()
}

/// Smooth value noise over a lattice with the given cell size.
///
/// Draws: one uniform per lattice point in raster order.
fn value_noise(w: u32, h: u32, cell: f64, rng: &mut RngStream) -> Vec<f32> {
    let gw = (w as f64 / cell).ceil() as usize + 2;
    let gh = (h as f64 / cell).ceil() as usize + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.next_f64()).collect();
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = Vec::with_capacity(w as usize * h as usize);
    for y in 0..h {
        let gy = y as f64 / cell;
        let y0 = gy.floor() as usize;
        let ty = smooth(gy - y0 as f64);
        for x in 0..w {
            let gx = x as f64 / cell;
            let x0 = gx.floor() as usize;
            let tx = smooth(gx - x0 as f64);
            let at = |xx: usize, yy: usize| lattice[yy * gw + xx];
            let top = at(x0, y0) * (1.0 - tx) + at(x0 + 1, y0) * tx;
            let bottom = at(x0, y0 + 1) * (1.0 - tx) + at(x0 + 1, y0 + 1) * tx;
            out.push((top * (1.0 - ty) + bottom * ty) as f32);
        }
    }
    out
}

const FROST_TINT: [f32; 3] = [0.85, 0.92, 1.0];

/// Crystalline value-noise overlay, screen-blended at `intensity` opacity.
///
/// Stands in for photographic frost textures.
pub(crate) fn frost(image: &Image, intensity: f64, rng: &mut RngStream) -> Image {
    let (w, h) = image.dimensions();
    let coarse_cell = (w.max(h) as f64 / 8.0).max(4.0);
    let coarse = value_noise(w, h, coarse_cell, rng);
    let fine = value_noise(w, h, (coarse_cell / 4.0).max(2.0), rng);
    let opacity = intensity as f32;
    let mut img = image.to_float();
    for (i, px) in img.data.chunks_mut(3).enumerate() {
        let v = 0.65 * coarse[i] + 0.35 * fine[i];
        let t = ((v - 0.3) / 0.6).clamp(0.0, 1.0);
        let crystal = t * t * (3.0 - 2.0 * t);
        for (c, value) in px.iter_mut().enumerate() {
            let layer = opacity * crystal * FROST_TINT[c];
            *value = 1.0 - (1.0 - *value) * (1.0 - layer);
        }
    }
    img.to_image()
}

fn size_scale(w: u32, h: u32) -> f64 {
    (w.min(h) as f64 / 224.0).max(1.0)
}

/// Round flakes, `density * W * H / 40` of them, softened and alpha-composited.
///
/// Draws per flake: x, y, radius, brightness.
pub(crate) fn snow(image: &Image, density: f64, rng: &mut RngStream) -> Image {
    let (w, h) = image.dimensions();
    let (wu, hu) = (w as usize, h as usize);
    let count = (density * (wu * hu) as f64 / 40.0).round() as usize;
    let scale = size_scale(w, h);
    let mut alpha = vec![0.0f32; wu * hu];
    let mut tone = vec![0.0f32; wu * hu];
    for _ in 0..count {
        let fx = rng.next_f64() * w as f64;
        let fy = rng.next_f64() * h as f64;
        let radius = (0.5 + 1.5 * rng.next_f64()) * scale;
        let brightness = rng.uniform(0.85, 1.0) as f32;
        let reach = radius.ceil() as i64 + 1;
        for yy in (fy as i64 - reach)..=(fy as i64 + reach) {
            for xx in (fx as i64 - reach)..=(fx as i64 + reach) {
                if xx < 0 || yy < 0 || xx >= w as i64 || yy >= h as i64 {
                    continue;
                }
                let d = ((xx as f64 + 0.5 - fx).powi(2) + (yy as f64 + 0.5 - fy).powi(2)).sqrt();
                let a = (radius + 0.5 - d).clamp(0.0, 1.0) as f32;
                let i = yy as usize * wu + xx as usize;
                if a > alpha[i] {
                    alpha[i] = a;
                    tone[i] = brightness;
                }
            }
        }
    }
    let premultiplied: Vec<f32> = alpha.iter().zip(&tone).map(|(a, t)| a * t).collect();
    let kernel = filter::gaussian_kernel(0.7);
    let alpha = filter::blur_plane(&alpha, wu, hu, &kernel);
    let premultiplied = filter::blur_plane(&premultiplied, wu, hu, &kernel);
    let mut img = image.to_float();
    for (i, px) in img.data.chunks_mut(3).enumerate() {
        for v in px {
            *v = *v * (1.0 - alpha[i]) + premultiplied[i];
        }
    }
    img.to_image()
}

const RAIN_LENGTH: usize = 15;
const RAIN_ALPHA: f32 = 0.6;
const RAIN_TONE: [f32; 3] = [0.75, 0.78, 0.85];

/// Slanted 15-pixel streaks, `density * W * H / 150` of them.
///
/// Draws: one slant angle for the whole image (uniform in `[-20, 20)`
/// degrees from vertical), then x and y per streak.
pub(crate) fn rain(image: &Image, density: f64, rng: &mut RngStream) -> Image {
    let (w, h) = image.dimensions();
    let count = (density * (w as usize * h as usize) as f64 / 150.0).round() as usize;
    let slant = rng.uniform(-20.0, 20.0).to_radians();
    let (dx, dy) = (slant.sin(), slant.cos());
    let mut img = image.to_float();
    for _ in 0..count {
        let x0 = rng.next_f64() * w as f64;
        let y0 = rng.next_f64() * h as f64;
        for t in 0..RAIN_LENGTH {
            let x = (x0 + dx * t as f64).floor();
            let y = (y0 + dy * t as f64).floor();
            if x < 0.0 || y < 0.0 || x >= w as f64 || y >= h as f64 {
                continue;
            }
            let i = img.index(x as u32, y as u32);
            for c in 0..3 {
                img.data[i + c] = img.data[i + c] * (1.0 - RAIN_ALPHA) + RAIN_TONE[c] * RAIN_ALPHA;
            }
        }
    }
    img.to_image()
}

const SPATTER_TONE: [f32; 3] = [0.22, 0.16, 0.10];
const SPATTER_ALPHA: f32 = 0.9;

/// Dark blobs from thresholded smoothed noise covering `intensity` of the
/// image area.
///
/// Draws: one Gaussian per pixel in raster order.
pub(crate) fn spatter(image: &Image, coverage: f64, rng: &mut RngStream) -> Image {
    let (w, h) = image.dimensions();
    let (wu, hu) = (w as usize, h as usize);
    let noise: Vec<f32> = (0..wu * hu).map(|_| rng.next_gaussian() as f32).collect();
    let sigma = (w.min(h) as f32 / 50.0).max(2.0);
    let field = filter::blur_plane(&noise, wu, hu, &filter::gaussian_kernel(sigma));
    let covered = ((coverage.clamp(0.0, 1.0)) * field.len() as f64).round() as usize;
    if covered == 0 {
        return image.clone();
    }
    let mut order: Vec<usize> = (0..field.len()).collect();
    // Ties broken by index keeps the mask independent of sort stability.
    order.sort_by(|&a, &b| field[b].total_cmp(&field[a]).then(a.cmp(&b)));
    let mut img = image.to_float();
    for &i in &order[..covered] {
        for c in 0..3 {
            let v = &mut img.data[i * 3 + c];
            *v = *v * (1.0 - SPATTER_ALPHA) + SPATTER_TONE[c] * SPATTER_ALPHA;
        }
    }
    img.to_image()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::determinism::make_rng;

    fn scene() -> Image {
        Image::from_fn(64, 48, |x, y| [(x * 4) as u8, (y * 5) as u8, 100])
    }

    #[test]
    fn plasma_is_normalised() {
        let (n, grid) = plasma(16, &mut make_rng(1));
        assert_eq!(n, 17);
        let lo = grid.iter().cloned().fold(f64::MAX, f64::min);
        let hi = grid.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!((lo, hi), (0.0, 1.0));
    }

    #[test]
    fn overlays_keep_shape_and_change_pixels() {
        let img = scene();
        let mut rng = make_rng(7);
        for out in [
            fog(&img, 0.6, &mut rng),
            frost(&img, 0.6, &mut rng),
            snow(&img, 0.3, &mut rng),
            rain(&img, 0.3, &mut rng),
            spatter(&img, 0.3, &mut rng),
        ] {
            assert_eq!(out.dimensions(), img.dimensions());
            assert_ne!(out, img);
        }
    }

    #[test]
    fn fog_strength_grows_with_intensity() {
        let img = Image::filled(32, 32, [0, 0, 0]);
        let total = |i| fog(&img, i, &mut make_rng(2)).as_raw().iter().map(|&v| v as u64).sum::<u64>();
        assert!(total(1.0) > total(0.2));
    }

    #[test]
    fn spatter_covers_requested_fraction() {
        let img = Image::filled(50, 40, [255, 255, 255]);
        let out = spatter(&img, 0.3, &mut make_rng(3));
        let dark = out.as_raw().chunks(3).filter(|p| p[0] < 128).count();
        assert_eq!(dark, 600);
    }

    #[test]
    fn frost_only_brightens() {
        let img = scene();
        let out = frost(&img, 1.0, &mut make_rng(4));
        assert!(img.as_raw().iter().zip(out.as_raw()).all(|(a, b)| b >= a));
    }
}
