//! Text overlays rendered from an embedded 5x7 bitmap font.

use crate::raster::Image;

pub(crate) const OVERLAY_TEXT: &str = "SAMPLE TEXT";
pub(crate) const WATERMARK_TEXT: &str = "WATERMARK";
pub(crate) const WATERMARK_OPACITY: f32 = 0.4;

/// Rows top to bottom, five bits each, most significant bit leftmost.
fn glyph(c: char) -> [u8; 7] {
    match c.to_ascii_uppercase() {
        'A' => [0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001],
        'B' => [0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110],
        'C' => [0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110],
        'D' => [0b11100, 0b10010, 0b10001, 0b10001, 0b10001, 0b10010, 0b11100],
        'E' => [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111],
        'F' => [0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000],
        'G' => [0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111],
        'H' => [0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001],
        'I' => [0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
        'J' => [0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100],
        'K' => [0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001],
        'L' => [0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111],
        'M' => [0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001],
        'N' => [0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001],
        'O' => [0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110],
        'P' => [0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000],
        'Q' => [0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101],
        'R' => [0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001],
        'S' => [0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110],
        'T' => [0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100],
        'U' => [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110],
        'V' => [0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100],
        'W' => [0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010],
        'X' => [0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001],
        'Y' => [0b10001, 0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100],
        'Z' => [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111],
        '0' => [0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110],
        '1' => [0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110],
        '2' => [0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111],
        '3' => [0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110],
        '4' => [0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010],
        '5' => [0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110],
        '6' => [0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110],
        '7' => [0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000],
        '8' => [0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110],
        '9' => [0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100],
        _ => [0; 7],
    }
}

/// A rasterised string. Each glyph occupies a 6x8 unit cell (5x7 ink plus
/// spacing) and one unit is `fontsize / 8` pixels.
#[derive(Debug, Clone)]
pub(crate) struct TextMask {
    pub width: u32,
    pub height: u32,
    pub on: Vec<bool>,
}

impl TextMask {
    pub fn render(text: &str, fontsize: f64) -> Self {
        let unit = (fontsize / 8.0).max(1e-6);
        let glyphs: Vec<[u8; 7]> = text.chars().map(glyph).collect();
        let width = ((glyphs.len() as f64 * 6.0 * unit).round() as u32).max(1);
        let height = ((8.0 * unit).round() as u32).max(1);
        let mut on = vec![false; width as usize * height as usize];
        for y in 0..height {
            let gy = ((y as f64 + 0.5) / unit).floor() as usize;
            if gy >= 7 {
                continue;
            }
            for x in 0..width {
                let u = ((x as f64 + 0.5) / unit).floor() as usize;
                let (gi, gx) = (u / 6, u % 6);
                if gi < glyphs.len() && gx < 5 && glyphs[gi][gy] & (0b10000 >> gx) != 0 {
                    on[(y * width + x) as usize] = true;
                }
            }
        }
        Self { width, height, on }
    }

    pub fn get(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64 && self.on[(y * self.width as i64 + x) as usize]
    }

    /// Square dilation by `r` pixels; the result is padded by `r` on every side.
    pub fn dilate(&self, r: u32) -> Self {
        let (w, h) = (self.width + 2 * r, self.height + 2 * r);
        let r = r as i64;
        // Separable max filter: rows, then columns.
        let mut rows = vec![false; w as usize * h as usize];
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                rows[(y * w as i64 + x) as usize] = (-r..=r).any(|d| self.get(x - r + d, y - r));
            }
        }
        let mut on = vec![false; rows.len()];
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                on[(y * w as i64 + x) as usize] = (-r..=r).any(|d| {
                    let yy = y + d;
                    yy >= 0 && yy < h as i64 && rows[(yy * w as i64 + x) as usize]
                });
            }
        }
        Self { width: w, height: h, on }
    }
}

/// "SAMPLE TEXT" centred, white glyphs with a black outline.
pub(crate) fn text_overlay(image: &Image, fontsize: f64) -> Image {
    let mask = TextMask::render(OVERLAY_TEXT, fontsize);
    let t = ((fontsize / 16.0).round() as u32).max(1);
    let outline = mask.dilate(t);
    let ox = (image.width() as i64 - mask.width as i64).div_euclid(2);
    let oy = (image.height() as i64 - mask.height as i64).div_euclid(2);
    let mut out = image.clone();
    for y in 0..image.height() {
        for x in 0..image.width() {
            let (mx, my) = (x as i64 - ox, y as i64 - oy);
            if mask.get(mx, my) {
                out.set_pixel(x, y, [255; 3]);
            } else if outline.get(mx + t as i64, my + t as i64) {
                out.set_pixel(x, y, [0; 3]);
            }
        }
    }
    out
}

/// "WATERMARK" tiled along a 45 degree rising diagonal with staggered rows,
/// blended white at 40% opacity.
pub(crate) fn watermark(image: &Image, fontsize: f64) -> Image {
    let mask = TextMask::render(WATERMARK_TEXT, fontsize);
    let pitch_x = mask.width as f64 + 2.0 * 6.0 * fontsize / 8.0;
    let pitch_y = 2.0 * mask.height as f64;
    let (cx, cy) = (image.width() as f64 / 2.0, image.height() as f64 / 2.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut img = image.to_float();
    for y in 0..image.height() {
        for x in 0..image.width() {
            let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
            let u = dx * s - dy * s;
            let v = dx * s + dy * s;
            let row = (v / pitch_y).floor();
            let stagger = if (row as i64).rem_euclid(2) == 1 { pitch_x / 2.0 } else { 0.0 };
            let tx = (u + stagger).rem_euclid(pitch_x).floor() as i64;
            let ty = v.rem_euclid(pitch_y).floor() as i64;
            if mask.get(tx, ty) {
                let i = img.index(x, y);
                for c in 0..3 {
                    let p = &mut img.data[i + c];
                    *p = *p * (1.0 - WATERMARK_OPACITY) + WATERMARK_OPACITY;
                }
            }
        }
    }
    img.to_image()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_dimensions_follow_fontsize() {
        let m = TextMask::render("AB", 8.0);
        assert_eq!((m.width, m.height), (12, 8));
        // 'A' top row is .###.
        let top: Vec<bool> = (0..6).map(|x| m.get(x, 0)).collect();
        assert_eq!(top, [false, true, true, true, false, false]);
        let big = TextMask::render("AB", 24.0);
        assert_eq!((big.width, big.height), (36, 24));
    }

    #[test]
    fn every_supported_glyph_has_ink() {
        for c in ('A'..='Z').chain('0'..='9') {
            assert!(glyph(c).iter().any(|&r| r != 0), "{c}");
        }
        assert_eq!(glyph(' '), [0; 7]);
    }

    #[test]
    fn dilation_grows_a_point_to_a_square() {
        let m = TextMask { width: 1, height: 1, on: vec![true] };
        let d = m.dilate(2);
        assert_eq!((d.width, d.height), (5, 5));
        assert!(d.on.iter().all(|&b| b));
    }

    #[test]
    fn overlay_paints_white_and_black_only_near_centre() {
        let img = Image::filled(400, 200, [100, 120, 140]);
        let out = text_overlay(&img, 24.0);
        assert_eq!(out.dimensions(), img.dimensions());
        let white = out.as_raw().chunks(3).filter(|p| *p == [255; 3]).count();
        let black = out.as_raw().chunks(3).filter(|p| *p == [0; 3]).count();
        assert!(white > 0 && black > 0);
        assert_eq!(out.pixel(0, 0), [100, 120, 140]);
        assert_eq!(out.pixel(399, 199), [100, 120, 140]);
    }

    #[test]
    fn watermark_only_brightens() {
        let img = Image::from_fn(120, 90, |x, y| [(x * 2) as u8, (y * 2) as u8, 50]);
        let out = watermark(&img, 24.0);
        let mut changed = 0;
        for (a, b) in img.as_raw().iter().zip(out.as_raw()) {
            assert!(b >= a);
            changed += (a != b) as usize;
        }
        assert!(changed > 0);
    }
}
