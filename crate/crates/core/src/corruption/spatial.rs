//! Resampling and inverse-mapped warping.

use tracing::warn;

use super::CorruptionError;
use crate::raster::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Filter {
    Nearest,
    Bilinear,
}

/// Rescales by `scale`; the output is `round(w * scale) x round(h * scale)`.
///
/// A dimension that would round to zero is clamped to one pixel and a
/// warning is logged.
pub fn resample(image: &Image, scale: f64, filter: Filter) -> Result<Image, CorruptionError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(CorruptionError::InvalidParameter(format!("resample scale must be positive, got {scale}")));
    }
    let target = |d: u32| {
        let n = (d as f64 * scale).round();
        if n < 1.0 {
            warn!(dimension = d, scale, "resampled dimension rounds to zero; clamping to 1");
            1
        } else {
            n as u32
        }
    };
    Ok(resize(image, target(image.width()), target(image.height()), filter))
}

/// Resizes to an explicit size using pixel-centre alignment.
pub fn resize(image: &Image, width: u32, height: u32, filter: Filter) -> Image {
    let (iw, ih) = image.dimensions();
    if (iw, ih) == (width, height) {
        return image.clone();
    }
    let src = image.as_raw();
    let sx = iw as f64 / width as f64;
    let sy = ih as f64 / height as f64;
    match filter {
        Filter::Nearest => {
            let xs: Vec<usize> = (0..width)
                .map(|x| (((x as f64 + 0.5) * sx).floor() as usize).min(iw as usize - 1))
                .collect();
            Image::from_fn(width, height, |x, y| {
                let yy = (((y as f64 + 0.5) * sy).floor() as usize).min(ih as usize - 1);
                let i = (yy * iw as usize + xs[x as usize]) * 3;
                [src[i], src[i + 1], src[i + 2]]
            })
        }
        Filter::Bilinear => {
            let axis = |o: u32, scale: f64, n: u32| {
                let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
                let i0 = s.floor() as usize;
                let i1 = (i0 + 1).min(n as usize - 1);
                (i0, i1, (s - i0 as f64) as f32)
            };
            let xs: Vec<_> = (0..width).map(|x| axis(x, sx, iw)).collect();
            Image::from_fn(width, height, |x, y| {
                let (x0, x1, fx) = xs[x as usize];
                let (y0, y1, fy) = axis(y, sy, ih);
                let at = |xx: usize, yy: usize, c: usize| src[(yy * iw as usize + xx) * 3 + c] as f32;
                let mut px = [0u8; 3];
                for (c, p) in px.iter_mut().enumerate() {
                    let top = at(x0, y0, c) * (1.0 - fx) + at(x1, y0, c) * fx;
                    let bottom = at(x0, y1, c) * (1.0 - fx) + at(x1, y1, c) * fx;
                    *p = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
                }
                px
            })
        }
    }
}

/// Per-pixel offsets: output pixel `(x, y)` samples the input at
/// `(x + dx, y + dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementField {
    pub width: u32,
    pub height: u32,
    pub dx: Vec<f32>,
    pub dy: Vec<f32>,
}

impl DisplacementField {
    pub fn zeros(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            dx: vec![0.0; n],
            dy: vec![0.0; n],
        }
    }

    /// Moves content by `(tx, ty)` pixels.
    pub fn translation(width: u32, height: u32, tx: f32, ty: f32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            dx: vec![-tx; n],
            dy: vec![-ty; n],
        }
    }
}

/// What out-of-bounds samples read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FillPolicy {
    Constant([u8; 3]),
}

impl Default for FillPolicy {
    fn default() -> Self {
        FillPolicy::Constant([0, 0, 0])
    }
}

pub fn warp(image: &Image, field: &DisplacementField, fill: FillPolicy) -> Result<Image, CorruptionError> {
    if (field.width, field.height) != image.dimensions() {
        return Err(CorruptionError::InvalidParameter(format!(
            "displacement field is {}x{} but image is {}x{}",
            field.width,
            field.height,
            image.width(),
            image.height()
        )));
    }
    let w = image.width() as usize;
    Ok(warp_with(image, fill, |x, y| {
        let i = y as usize * w + x as usize;
        (x as f64 + field.dx[i] as f64, y as f64 + field.dy[i] as f64)
    }))
}

/// Inverse-mapped bilinear sampling: `source_of(x, y)` gives the input
/// coordinate read by output pixel `(x, y)`.
pub(crate) fn warp_with(image: &Image, fill: FillPolicy, source_of: impl Fn(u32, u32) -> (f64, f64)) -> Image {
    let FillPolicy::Constant(fill) = fill;
    let (w, h) = image.dimensions();
    let src = image.as_raw();
    let tap = |xx: i64, yy: i64, c: usize| -> f32 {
        if xx < 0 || yy < 0 || xx >= w as i64 || yy >= h as i64 {
            fill[c] as f32
        } else {
            src[(yy as usize * w as usize + xx as usize) * 3 + c] as f32
        }
    };
    Image::from_fn(w, h, |x, y| {
        let (sx, sy) = source_of(x, y);
        if !(sx.is_finite() && sy.is_finite()) || sx < -1.0 || sy < -1.0 || sx > w as f64 || sy > h as f64 {
            return fill;
        }
        let x0 = sx.floor();
        let y0 = sy.floor();
        let fx = (sx - x0) as f32;
        let fy = (sy - y0) as f32;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let mut px = [0u8; 3];
        for (c, p) in px.iter_mut().enumerate() {
            let mut v = tap(x0, y0, c) * (1.0 - fx) * (1.0 - fy);
            if fx != 0.0 {
                v += tap(x0 + 1, y0, c) * fx * (1.0 - fy);
            }
            if fy != 0.0 {
                v += tap(x0, y0 + 1, c) * (1.0 - fx) * fy;
                if fx != 0.0 {
                    v += tap(x0 + 1, y0 + 1, c) * fx * fy;
                }
            }
            *p = v.round().clamp(0.0, 255.0) as u8;
        }
        px
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: u32, h: u32) -> Image {
        Image::from_fn(w, h, |x, y| [(x * 7 % 256) as u8, (y * 5 % 256) as u8, ((x + y) % 256) as u8])
    }

    #[test]
    fn resample_sizes() {
        let img = gradient(100, 100);
        assert_eq!(resample(&img, 0.5, Filter::Nearest).unwrap().dimensions(), (50, 50));
        assert_eq!(resample(&gradient(4, 4), 0.15, Filter::Bilinear).unwrap().dimensions(), (1, 1));
        assert_eq!(resample(&gradient(10, 7), 1.5, Filter::Bilinear).unwrap().dimensions(), (15, 11));
        assert!(resample(&img, 0.0, Filter::Nearest).is_err());
        assert!(resample(&img, f64::NAN, Filter::Nearest).is_err());
    }

    #[test]
    fn unit_scale_is_identity() {
        let img = gradient(13, 9);
        assert_eq!(resample(&img, 1.0, Filter::Nearest).unwrap(), img);
        assert_eq!(resample(&img, 1.0, Filter::Bilinear).unwrap(), img);
    }

    #[test]
    fn integer_upscale_nearest_replicates() {
        let img = Image::new(2, 1, vec![10, 20, 30, 40, 50, 60]).unwrap();
        let up = resize(&img, 4, 2, Filter::Nearest);
        assert_eq!(up.pixel(0, 0), [10, 20, 30]);
        assert_eq!(up.pixel(1, 1), [10, 20, 30]);
        assert_eq!(up.pixel(2, 0), [40, 50, 60]);
        assert_eq!(up.pixel(3, 1), [40, 50, 60]);
    }

    #[test]
    fn bilinear_upscale_interpolates_between_neighbours() {
        let img = Image::new(2, 1, vec![0, 0, 0, 200, 200, 200]).unwrap();
        let up = resize(&img, 4, 1, Filter::Bilinear);
        // Centres map to -0.25, 0.25, 0.75, 1.25 -> clamped 0, 0.25, 0.75, 1.
        let got: Vec<u8> = (0..4).map(|x| up.pixel(x, 0)[0]).collect();
        assert_eq!(got, [0, 50, 150, 200]);
    }

    #[test]
    fn zero_field_is_identity() {
        let img = gradient(11, 6);
        let out = warp(&img, &DisplacementField::zeros(11, 6), FillPolicy::default()).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn translation_fills_black() {
        let img = Image::new(3, 1, vec![10, 10, 10, 20, 20, 20, 30, 30, 30]).unwrap();
        let out = warp(&img, &DisplacementField::translation(3, 1, 1.0, 0.0), FillPolicy::default()).unwrap();
        assert_eq!(out.as_raw(), &[0, 0, 0, 10, 10, 10, 20, 20, 20]);
    }

    #[test]
    fn mismatched_field_is_rejected() {
        let img = gradient(3, 3);
        assert!(warp(&img, &DisplacementField::zeros(2, 3), FillPolicy::default()).is_err());
    }
}
