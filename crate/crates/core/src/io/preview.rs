//! Tonemapped 8-bit PNG previews of HDR images.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{EnvironmentMap, Rgb};

/// Per channel: `round(clamp((exposure * v)^(1/2.2), 0, 1) * 255)`.
fn tonemap(v: f64, exposure: f64) -> u8 {
    ((exposure * v).powf(1.0 / 2.2).clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Write a gamma-encoded preview of arbitrary linear RGB pixel data.
pub fn save_preview_rgb(
    width: usize,
    height: usize,
    pixels: &[Rgb],
    path: &Path,
    exposure: f64,
) -> Result<()> {
    if !exposure.is_finite() || exposure <= 0.0 {
        return Err(Error::InvalidInput(format!("exposure {exposure} must be positive")));
    }
    assert_eq!(pixels.len(), width * height);
    let mut bytes = Vec::with_capacity(width * height * 3);
    for p in pixels {
        bytes.push(tonemap(p.r, exposure));
        bytes.push(tonemap(p.g, exposure));
        bytes.push(tonemap(p.b, exposure));
    }
    let file = BufWriter::new(File::create(path)?);
    let mut encoder = png::Encoder::new(file, width as u32, height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder
        .write_header()
        .map_err(|e| Error::InvalidInput(format!("png: {e}")))?;
    writer
        .write_image_data(&bytes)
        .map_err(|e| Error::InvalidInput(format!("png: {e}")))?;
    Ok(())
}

/// Write a tonemapped preview of an environment map.
pub fn save_preview(map: &EnvironmentMap, path: &Path, exposure: f64) -> Result<()> {
    save_preview_rgb(map.width(), map.height(), map.data(), path, exposure)
}
