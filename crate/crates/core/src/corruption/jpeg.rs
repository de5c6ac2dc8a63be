use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageDecoder};

use super::CorruptionError;
use crate::raster::Image;

/// Encodes at `quality` with the bundled baseline encoder and decodes the
/// result. Both codecs are pure Rust, so the output depends only on the
/// input bytes and the pinned crate version.
pub fn jpeg_recompress(image: &Image, quality: u8) -> Result<Image, CorruptionError> {
    if !(1..=100).contains(&quality) {
        return Err(CorruptionError::InvalidParameter(format!("jpeg quality must be in 1..=100, got {quality}")));
    }
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, quality)
        .encode(image.as_raw(), image.width(), image.height(), ExtendedColorType::Rgb8)
        .map_err(|e| CorruptionError::EncodeFailure(e.to_string()))?;
    let decoder = image::codecs::jpeg::JpegDecoder::new(std::io::Cursor::new(&buf))
        .map_err(|e| CorruptionError::EncodeFailure(e.to_string()))?;
    let (w, h) = decoder.dimensions();
    let mut data = vec![0u8; decoder.total_bytes() as usize];
    decoder
        .read_image(&mut data)
        .map_err(|e| CorruptionError::EncodeFailure(e.to_string()))?;
    Image::new(w, h, data).map_err(|e| CorruptionError::EncodeFailure(e.to_string()))
}
