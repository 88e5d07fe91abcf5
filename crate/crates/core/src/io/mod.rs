//! File formats: Radiance RGBE and PFM images, depth maps, light-set
//! documents and tonemapped PNG previews.
//!
//! Every loader/saver pair round-trips: exactly for PFM and light sets,
//! within the 8-bit shared-exponent quantization for RGBE. Loaders reject
//! NaN and negative radiance instead of clamping.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{DepthMap, EnvironmentMap, Rgb};

pub mod lightset;
pub mod pfm;
pub mod preview;
pub mod rgbe;

pub use lightset::{load_lightset, save_lightset, DIRECTION_NORM_TOLERANCE};
pub use preview::{save_preview, save_preview_rgb};

/// On-disk HDR image encodings supported by [`save_envmap`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HdrFormat {
    /// Radiance .hdr (shared-exponent RGBE, lossy within 1/256).
    Rgbe,
    /// Color PFM (32-bit floats, lossless).
    Pfm,
}

/// Load an equirectangular HDR panorama from a Radiance (.hdr) or color PFM
/// file; the format is detected from the leading bytes. The 2:1 aspect is
/// enforced.
pub fn load_envmap(path: &Path) -> Result<EnvironmentMap> {
    let mut reader = BufReader::new(File::open(path)?);
    let (width, height, pixels) = read_hdr_image(&mut reader)?;
    if width != 2 * height {
        return Err(Error::AspectRatio { width, height });
    }
    EnvironmentMap::from_pixels(width, height, pixels)
}

/// Read an HDR image of any aspect (Radiance or color PFM), returning
/// `(width, height, pixels)`.
pub fn read_hdr_image(reader: &mut impl std::io::BufRead) -> Result<(usize, usize, Vec<Rgb>)> {
    let magic = reader.fill_buf()?;
    if magic.starts_with(b"#?") {
        rgbe::read(reader)
    } else if magic.starts_with(b"PF") {
        let img = pfm::read(reader)?;
        if img.channels != 3 {
            return Err(Error::MalformedHeader("expected a color (PF) image".into()));
        }
        let pixels = img
            .data
            .chunks_exact(3)
            .map(|c| {
                let p = Rgb::new(c[0] as f64, c[1] as f64, c[2] as f64);
                if !p.is_finite() || !p.is_non_negative() {
                    Err(Error::InvalidRadiance)
                } else {
                    Ok(p)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((img.width, img.height, pixels))
    } else {
        Err(Error::MalformedHeader("unrecognized image format".into()))
    }
}

/// Save an environment map as Radiance RGBE or color PFM.
pub fn save_envmap(map: &EnvironmentMap, path: &Path, format: HdrFormat) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    write_hdr_image(&mut writer, map.width(), map.height(), map.data(), format)
}

/// Write an HDR image of any aspect.
pub fn write_hdr_image(
    writer: &mut impl std::io::Write,
    width: usize,
    height: usize,
    pixels: &[Rgb],
    format: HdrFormat,
) -> Result<()> {
    match format {
        HdrFormat::Rgbe => rgbe::write(writer, width, height, pixels),
        HdrFormat::Pfm => {
            let mut data = Vec::with_capacity(pixels.len() * 3);
            for p in pixels {
                data.push(p.r as f32);
                data.push(p.g as f32);
                data.push(p.b as f32);
            }
            pfm::write(writer, width, height, 3, &data)
        }
    }
}

/// Load a single-channel PFM depth map, meters; pixels equal to 0 are
/// "unknown".
pub fn load_depthmap(path: &Path) -> Result<DepthMap> {
    let mut reader = BufReader::new(File::open(path)?);
    let img = pfm::read(&mut reader)?;
    if img.channels != 1 {
        return Err(Error::MalformedHeader("expected a grayscale (Pf) depth map".into()));
    }
    DepthMap::from_values(img.width, img.height, img.data.iter().map(|&v| v as f64).collect())
}

/// Save a depth map as single-channel PFM.
pub fn save_depthmap(depth: &DepthMap, path: &Path) -> Result<()> {
    let mut writer = BufWriter::new(File::create(path)?);
    let data: Vec<f32> = depth.values().iter().map(|&v| v as f32).collect();
    pfm::write(&mut writer, depth.width(), depth.height(), 1, &data)
}
