//! Convolution building blocks. Borders use reflect-101 (`dcb|abcd|cba`).

use crate::raster::FloatImage;

#[inline]
pub(crate) fn reflect101(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as i64 {
        m = period - m;
    }
    m as usize
}

/// Normalised 1-D Gaussian with radius `ceil(3 sigma)`.
pub(crate) fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as i32;
    let denom = 2.0 * sigma * sigma;
    let mut k: Vec<f32> = (-radius..=radius).map(|i| (-(i * i) as f32 / denom).exp()).collect();
    let sum: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable convolution of a single plane.
pub(crate) fn blur_plane(plane: &[f32], width: usize, height: usize, kernel: &[f32]) -> Vec<f32> {
    let r = (kernel.len() / 2) as i64;
    let mut tmp = vec![0.0f32; plane.len()];
    for y in 0..height {
        let row = &plane[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                acc += w * row[reflect101(x as i64 + k as i64 - r, width)];
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0f32; plane.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                acc += w * tmp[reflect101(y as i64 + k as i64 - r, height) * width + x];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

/// Separable convolution applied to each colour channel.
pub(crate) fn separable(img: &FloatImage, kernel: &[f32]) -> FloatImage {
    let (w, h) = (img.width as usize, img.height as usize);
    let mut out = FloatImage::zeros(img.width, img.height);
    for c in 0..3 {
        let plane: Vec<f32> = img.data.iter().skip(c).step_by(3).copied().collect();
        let blurred = blur_plane(&plane, w, h, kernel);
        for (i, v) in blurred.into_iter().enumerate() {
            out.data[i * 3 + c] = v;
        }
    }
    out
}

pub(crate) fn gaussian_blur(img: &FloatImage, sigma: f32) -> FloatImage {
    separable(img, &gaussian_kernel(sigma))
}

/// Square 2-D kernel, row-major, odd side length.
#[derive(Debug, Clone)]
pub(crate) struct Kernel2D {
    pub size: usize,
    pub weights: Vec<f32>,
}

impl Kernel2D {
    pub fn normalized(mut self) -> Self {
        let sum: f32 = self.weights.iter().sum();
        if sum > 0.0 {
            self.weights.iter_mut().for_each(|w| *w /= sum);
        }
        self
    }
}

pub(crate) fn convolve(img: &FloatImage, kernel: &Kernel2D) -> FloatImage {
    let (w, h) = (img.width as usize, img.height as usize);
    let r = (kernel.size / 2) as i64;
    // Only visit non-zero taps.
    let taps: Vec<(i64, i64, f32)> = kernel
        .weights
        .iter()
        .enumerate()
        .filter(|(_, &wt)| wt != 0.0)
        .map(|(i, &wt)| ((i % kernel.size) as i64 - r, (i / kernel.size) as i64 - r, wt))
        .collect();
    let mut out = FloatImage::zeros(img.width, img.height);
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f32; 3];
            for &(dx, dy, wt) in &taps {
                let sx = reflect101(x as i64 + dx, w);
                let sy = reflect101(y as i64 + dy, h);
                let i = (sy * w + sx) * 3;
                acc[0] += wt * img.data[i];
                acc[1] += wt * img.data[i + 1];
                acc[2] += wt * img.data[i + 2];
            }
            let o = (y * w + x) * 3;
            out.data[o..o + 3].copy_from_slice(&acc);
        }
    }
    out
}
