//! Black occluders and the border frame.

use crate::determinism::RngStream;
use crate::raster::Image;

const BLACK: [u8; 3] = [0, 0, 0];

fn fill_rect(img: &mut Image, x0: u32, y0: u32, w: u32, h: u32, covered: &mut [bool]) -> usize {
    let width = img.width();
    let mut newly = 0;
    for y in y0..(y0 + h).min(img.height()) {
        for x in x0..(x0 + w).min(width) {
            img.set_pixel(x, y, BLACK);
            let i = (y * width + x) as usize;
            if !covered[i] {
                covered[i] = true;
                newly += 1;
            }
        }
    }
    newly
}

/// Drops black rectangles until at least `ratio` of the area is covered.
///
/// Draws per rectangle: width fraction, height fraction (each
/// `U(0.05, 0.25)` of the matching dimension), then the left and top
/// offsets via `next_below`.
pub(crate) fn random_occlusion(image: &Image, ratio: f64, rng: &mut RngStream) -> Image {
    let (w, h) = image.dimensions();
    let total = w as usize * h as usize;
    let target = (ratio * total as f64).ceil() as usize;
    let mut out = image.clone();
    let mut covered = vec![false; total];
    let mut count = 0;
    while count < target.min(total) {
        let rw = ((w as f64 * rng.uniform(0.05, 0.25)).round() as u32).clamp(1, w);
        let rh = ((h as f64 * rng.uniform(0.05, 0.25)).round() as u32).clamp(1, h);
        let x0 = rng.next_below((w - rw + 1) as u64) as u32;
        let y0 = rng.next_below((h - rh + 1) as u64) as u32;
        count += fill_rect(&mut out, x0, y0, rw, rh, &mut covered);
    }
    out
}

/// Regular grid of black squares: each cell of side `d` holds one square
/// whose area is `ratio` of the cell. The grid phase is drawn from the
/// stream (x offset, then y offset).
pub(crate) fn grid_mask(image: &Image, ratio: f64, rng: &mut RngStream) -> Image {
    let (w, h) = image.dimensions();
    let d = (w.min(h) / 8).max(4);
    let side = ((d as f64 * ratio.sqrt()).round() as u32).min(d);
    let ox = rng.next_below(d as u64) as u32;
    let oy = rng.next_below(d as u64) as u32;
    let mut out = image.clone();
    for y in 0..h {
        let in_y = (y + d - oy) % d < side;
        for x in 0..w {
            if in_y && (x + d - ox) % d < side {
                out.set_pixel(x, y, BLACK);
            }
        }
    }
    out
}

/// Centred black square of area `ratio * W * H`, clipped to the image.
pub(crate) fn center_occlusion(image: &Image, ratio: f64) -> Image {
    let (w, h) = image.dimensions();
    let side = (ratio * w as f64 * h as f64).sqrt().round() as u32;
    let (sw, sh) = (side.min(w), side.min(h));
    let mut out = image.clone();
    let mut covered = vec![false; w as usize * h as usize];
    fill_rect(&mut out, (w - sw) / 2, (h - sh) / 2, sw, sh, &mut covered);
    out
}

/// Surrounds the image with a black frame `width` pixels thick.
pub(crate) fn add_border(image: &Image, width: f64) -> Image {
    let b = width.round().max(0.0) as u32;
    let (w, h) = image.dimensions();
    Image::from_fn(w + 2 * b, h + 2 * b, |x, y| {
        if x < b || y < b || x >= w + b || y >= h + b {
            BLACK
        } else {
            image.pixel(x - b, y - b)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::determinism::make_rng;

    fn black_fraction(img: &Image) -> f64 {
        let n = img.as_raw().chunks(3).filter(|p| *p == BLACK).count();
        n as f64 / (img.width() * img.height()) as f64
    }

    fn white(w: u32, h: u32) -> Image {
        Image::filled(w, h, [255; 3])
    }

    #[test]
    fn random_occlusion_reaches_target() {
        for ratio in [0.05, 0.15, 0.25] {
            let out = random_occlusion(&white(64, 48), ratio, &mut make_rng(5));
            assert!(black_fraction(&out) >= ratio, "{ratio}");
            assert!(black_fraction(&out) < ratio + 0.07, "{ratio}");
        }
    }

    #[test]
    fn grid_mask_density_tracks_ratio() {
        let out = grid_mask(&white(128, 128), 0.25, &mut make_rng(1));
        // d = 16, side = 8 -> exactly a quarter of each full cell.
        assert!((black_fraction(&out) - 0.25).abs() < 1e-9);
    }

    #[test]
    fn center_occlusion_is_centred() {
        let out = center_occlusion(&white(100, 100), 0.25);
        assert_eq!(out.pixel(50, 50), BLACK);
        assert_eq!(out.pixel(25, 25), BLACK);
        assert_eq!(out.pixel(24, 24), [255; 3]);
        assert_eq!(out.pixel(75, 75), [255; 3]);
        assert!((black_fraction(&out) - 0.25).abs() < 1e-9);
    }

    #[test]
    fn center_occlusion_clips_on_thin_images() {
        let out = center_occlusion(&white(100, 10), 0.5);
        assert_eq!(out.dimensions(), (100, 10));
        assert!(black_fraction(&out) > 0.2);
    }

    #[test]
    fn border_grows_image() {
        let img = white(5, 3);
        let out = add_border(&img, 2.0);
        assert_eq!(out.dimensions(), (9, 7));
        assert_eq!(out.pixel(0, 0), BLACK);
        assert_eq!(out.pixel(1, 3), BLACK);
        assert_eq!(out.pixel(2, 2), [255; 3]);
        assert_eq!(out.pixel(6, 4), [255; 3]);
        assert_eq!(out.pixel(7, 4), BLACK);
    }
}
