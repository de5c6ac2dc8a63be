use super::filter::{self, Kernel2D};
use crate::determinism::RngStream;
use crate::raster::{FloatImage, Image};

pub(crate) fn gaussian_blur(image: &Image, sigma: f64) -> Image {
    filter::gaussian_blur(&image.to_float(), sigma as f32).to_image()
}

/// Line kernel of `ksize` taps through the centre at a random angle.
///
/// Draws: one uniform for the angle in `[0, 360)` degrees.
pub(crate) fn motion_blur(image: &Image, ksize: f64, rng: &mut RngStream) -> Image {
    let angle = rng.uniform(0.0, 360.0).to_radians();
    let size = (ksize.round() as usize).max(1) | 1;
    let kernel = line_kernel(size, angle);
    filter::convolve(&image.to_float(), &kernel).to_image()
}

/// Horizontal `size`-tap line rotated by `angle`, splatted bilinearly onto
/// a `size x size` grid and normalised.
pub(crate) fn line_kernel(size: usize, angle: f64) -> Kernel2D {
    let mut weights = vec![0.0f32; size * size];
    let c = (size / 2) as f64;
    let (sin, cos) = angle.sin_cos();
    for t in 0..size {
        let d = t as f64 - c;
        let px = c + d * cos;
        let py = c - d * sin;
        let x0 = px.floor();
        let y0 = py.floor();
        let fx = px - x0;
        let fy = py - y0;
        for (ox, oy, w) in [
            (0, 0, (1.0 - fx) * (1.0 - fy)),
            (1, 0, fx * (1.0 - fy)),
            (0, 1, (1.0 - fx) * fy),
            (1, 1, fx * fy),
        ] {
            let xx = x0 as i64 + ox;
            let yy = y0 as i64 + oy;
            if w > 0.0 && xx >= 0 && yy >= 0 && (xx as usize) < size && (yy as usize) < size {
                weights[yy as usize * size + xx as usize] += w as f32;
            }
        }
    }
    Kernel2D { size, weights }.normalized()
}

/// Normalised disk of the given radius.
pub(crate) fn defocus_blur(image: &Image, radius: f64) -> Image {
    filter::convolve(&image.to_float(), &disk_kernel(radius)).to_image()
}

pub(crate) fn disk_kernel(radius: f64) -> Kernel2D {
    let r = radius.ceil().max(0.0) as i64;
    let size = (2 * r + 1) as usize;
    let weights = (0..size * size)
        .map(|i| {
            let x = (i % size) as i64 - r;
            let y = (i / size) as i64 - r;
            if ((x * x + y * y) as f64) <= radius * radius {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Kernel2D { size, weights }.normalized()
}

/// Mean of five centre zooms at `1, 1 + f/4, 1 + f/2, 1 + 3f/4, 1 + f`.
pub(crate) fn zoom_blur(image: &Image, factor: f64) -> Image {
    let src = image.to_float();
    let (w, h) = (image.width(), image.height());
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;
    let mut acc = FloatImage::zeros(w, h);
    const TAPS: usize = 5;
    for tap in 0..TAPS {
        let zoom = 1.0 + factor * tap as f64 / (TAPS - 1) as f64;
        for y in 0..h {
            for x in 0..w {
                let sx = cx + (x as f64 - cx) / zoom;
                let sy = cy + (y as f64 - cy) / zoom;
                let px = sample_clamped(&src, sx, sy);
                let i = acc.index(x, y);
                for c in 0..3 {
                    acc.data[i + c] += px[c];
                }
            }
        }
    }
    acc.data.iter_mut().for_each(|v| *v /= TAPS as f32);
    acc.to_image()
}

/// Bilinear sample with edge clamping.
pub(crate) fn sample_clamped(img: &FloatImage, x: f64, y: f64) -> [f32; 3] {
    let x = x.clamp(0.0, (img.width - 1) as f64);
    let y = y.clamp(0.0, (img.height - 1) as f64);
    let x0 = x.floor() as u32;
    let y0 = y.floor() as u32;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let fx = (x - x0 as f64) as f32;
    let fy = (y - y0 as f64) as f32;
    let (a, b, c, d) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
    let mut out = [0.0; 3];
    for k in 0..3 {
        let top = a[k] * (1.0 - fx) + b[k] * fx;
        let bottom = c[k] * (1.0 - fx) + d[k] * fx;
        out[k] = top * (1.0 - fy) + bottom * fy;
    }
    out
}

const GLASS_ITERATIONS: usize = 2;

/// Gaussian blur, then two raster-order passes of local pixel swaps.
///
/// Draws: per pixel per pass, `dx` then `dy`, each uniform in `{-1, 0, 1}`.
/// Draws are consumed even when the partner falls outside the image.
pub(crate) fn glass_blur(image: &Image, sigma: f64, rng: &mut RngStream) -> Image {
    let mut img = filter::gaussian_blur(&image.to_float(), sigma as f32);
    let (w, h) = (img.width as i64, img.height as i64);
    for _ in 0..GLASS_ITERATIONS {
        for y in 0..h {
            for x in 0..w {
                let dx = rng.next_below(3) as i64 - 1;
                let dy = rng.next_below(3) as i64 - 1;
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h || (dx == 0 && dy == 0) {
                    continue;
                }
                let a = img.index(x as u32, y as u32);
                let b = img.index(nx as u32, ny as u32);
                for c in 0..3 {
                    img.data.swap(a + c, b + c);
                }
            }
        }
    }
    img.to_image()
}
