//! Geometric distortions, all expressed as inverse maps fed to
//! [`warp_with`](super::spatial::warp_with) with a black fill.

use super::filter;
use super::spatial::{warp, warp_with, DisplacementField, FillPolicy};
use crate::determinism::RngStream;
use crate::raster::Image;

fn centre(image: &Image) -> (f64, f64) {
    ((image.width() as f64 - 1.0) / 2.0, (image.height() as f64 - 1.0) / 2.0)
}

/// Counter-clockwise rotation about the image centre.
pub(crate) fn rotate(image: &Image, degrees: f64) -> Image {
    let (cx, cy) = centre(image);
    let (sin, cos) = degrees.to_radians().sin_cos();
    warp_with(image, FillPolicy::default(), |x, y| {
        let (u, v) = (x as f64 - cx, y as f64 - cy);
        (cx + u * cos - v * sin, cy + u * sin + v * cos)
    })
}

/// Horizontal shear about the centre row.
pub(crate) fn shear(image: &Image, degrees: f64) -> Image {
    let (_, cy) = centre(image);
    let t = degrees.to_radians().tan();
    warp_with(image, FillPolicy::default(), |x, y| (x as f64 + t * (y as f64 - cy), y as f64))
}

/// Rotation by `degrees` with uniform scale 1.0; the rotation direction is
/// drawn from the stream (one coin).
pub(crate) fn affine(image: &Image, degrees: f64, rng: &mut RngStream) -> Image {
    let signed = if rng.next_bool() { degrees } else { -degrees };
    rotate(image, signed)
}

/// Moves each corner along its diagonal by `magnitude * min(W, H)` pixels,
/// inward or outward by a coin per corner (order: top-left, top-right,
/// bottom-right, bottom-left), and resamples through the homography.
pub(crate) fn perspective(image: &Image, magnitude: f64, rng: &mut RngStream) -> Image {
    let (w, h) = (image.width() as f64 - 1.0, image.height() as f64 - 1.0);
    let shift = magnitude * (image.width().min(image.height()) as f64);
    let corners = [(0.0, 0.0), (w, 0.0), (w, h), (0.0, h)];
    let inward = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
    let diag = std::f64::consts::FRAC_1_SQRT_2;
    let mut moved = [(0.0, 0.0); 4];
    for i in 0..4 {
        let sign = if rng.next_bool() { 1.0 } else { -1.0 };
        moved[i] = (
            corners[i].0 + sign * shift * diag * inward[i].0,
            corners[i].1 + sign * shift * diag * inward[i].1,
        );
    }
    // Output pixels live in the moved quad; map them back onto the original corners.
    let Some(hm) = homography(&moved, &corners) else {
        return image.clone();
    };
    warp_with(image, FillPolicy::default(), |x, y| {
        let (x, y) = (x as f64, y as f64);
        let d = hm[6] * x + hm[7] * y + 1.0;
        ((hm[0] * x + hm[1] * y + hm[2]) / d, (hm[3] * x + hm[4] * y + hm[5]) / d)
    })
}

/// Projective map taking `from[i]` to `to[i]`, as the first eight entries
/// of the 3x3 matrix (the last is fixed at 1).
pub(crate) fn homography(from: &[(f64, f64); 4], to: &[(f64, f64); 4]) -> Option<[f64; 8]> {
    let mut a = [[0.0f64; 9]; 8];
    for i in 0..4 {
        let (x, y) = from[i];
        let (u, v) = to[i];
        a[2 * i] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
        a[2 * i + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
    }
    solve8(a)
}

/// Gaussian elimination with partial pivoting on an augmented 8x9 system.
fn solve8(mut a: [[f64; 9]; 8]) -> Option<[f64; 8]> {
    for col in 0..8 {
        let pivot = (col..8).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for row in 0..8 {
            if row != col {
                let f = a[row][col] / a[col][col];
                for k in col..9 {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
    }
    let mut x = [0.0; 8];
    for i in 0..8 {
        x[i] = a[i][8] / a[i][i];
    }
    Some(x)
}

/// Standard deviation, in pixels, of the smoothing applied to the elastic
/// noise field.
pub(crate) const ELASTIC_SIGMA: f32 = 8.0;

/// Displacement `alpha * G_8 * U(-1, 1)` per axis.
///
/// Draws: the x field in raster order, then the y field.
pub(crate) fn elastic(image: &Image, alpha: f64, rng: &mut RngStream) -> Image {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let kernel = filter::gaussian_kernel(ELASTIC_SIGMA);
    let mut field = || -> Vec<f32> {
        let noise: Vec<f32> = (0..w * h).map(|_| rng.uniform(-1.0, 1.0) as f32).collect();
        filter::blur_plane(&noise, w, h, &kernel)
            .into_iter()
            .map(|v| v * alpha as f32)
            .collect()
    };
    let dx = field();
    let dy = field();
    let field = DisplacementField {
        width: image.width(),
        height: image.height(),
        dx,
        dy,
    };
    warp(image, &field, FillPolicy::default()).expect("field built with image dimensions")
}
