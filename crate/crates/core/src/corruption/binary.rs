//! The seven parameterless transforms. All work in integer arithmetic so
//! the algebraic identities (involution, idempotence) hold exactly.

use crate::raster::Image;

pub(crate) fn flip_h(image: &Image) -> Image {
    let w = image.width();
    Image::from_fn(w, image.height(), |x, y| image.pixel(w - 1 - x, y))
}

pub(crate) fn flip_v(image: &Image) -> Image {
    let h = image.height();
    Image::from_fn(image.width(), h, |x, y| image.pixel(x, h - 1 - y))
}

/// Rounded integer luma `(299 r + 587 g + 114 b) / 1000` on every channel.
pub(crate) fn grayscale(image: &Image) -> Image {
    let mut out = image.clone();
    for px in out.as_raw_mut().chunks_exact_mut(3) {
        let y = (299 * px[0] as u32 + 587 * px[1] as u32 + 114 * px[2] as u32 + 500) / 1000;
        px.fill(y as u8);
    }
    out
}

pub(crate) fn invert(image: &Image) -> Image {
    image.map_samples(|v| 255 - v)
}

/// Cyclic permutation R->G->B->R: the new G is the old R, and so on.
pub(crate) fn channel_swap(image: &Image) -> Image {
    let mut out = image.clone();
    for px in out.as_raw_mut().chunks_exact_mut(3) {
        let [r, g, b] = [px[0], px[1], px[2]];
        px.copy_from_slice(&[b, r, g]);
    }
    out
}

fn per_channel_lut(image: &Image, build: impl Fn(&[u64; 256]) -> Option<[u8; 256]>) -> Image {
    let mut out = image.clone();
    for c in 0..3 {
        let mut hist = [0u64; 256];
        for px in image.as_raw().chunks_exact(3) {
            hist[px[c] as usize] += 1;
        }
        if let Some(lut) = build(&hist) {
            for px in out.as_raw_mut().chunks_exact_mut(3) {
                px[c] = lut[px[c] as usize];
            }
        }
    }
    out
}

/// Per-channel histogram equalisation (the cumulative-histogram lookup
/// used by PIL's `ImageOps.equalize`).
pub(crate) fn equalize(image: &Image) -> Image {
    per_channel_lut(image, |hist| {
        let last = hist.iter().rposition(|&n| n > 0)?;
        let step = (hist.iter().sum::<u64>() - hist[last]) / 255;
        if step == 0 {
            return None;
        }
        let mut lut = [0u8; 256];
        let mut n = step / 2;
        for (i, slot) in lut.iter_mut().enumerate() {
            *slot = (n / step).min(255) as u8;
            n += hist[i];
        }
        Some(lut)
    })
}

/// Per-channel linear stretch of `[min, max]` onto `[0, 255]`, rounded to
/// nearest. Flat channels are left alone.
pub(crate) fn autocontrast(image: &Image) -> Image {
    per_channel_lut(image, |hist| {
        let lo = hist.iter().position(|&n| n > 0)? as u32;
        let hi = hist.iter().rposition(|&n| n > 0)? as u32;
        if hi <= lo {
            return None;
        }
        let span = hi - lo;
        let mut lut = [0u8; 256];
        for (i, slot) in lut.iter_mut().enumerate() {
            let v = (i as u32).clamp(lo, hi) - lo;
            *slot = ((2 * 255 * v + span) / (2 * span)) as u8;
        }
        Some(lut)
    })
}
