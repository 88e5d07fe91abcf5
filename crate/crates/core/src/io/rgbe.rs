//! Radiance RGBE (.hdr) reader and writer.
//!
//! Reading accepts flat scanlines, old-style (1,1,1,n) repeat markers and
//! new-style adaptive RLE scanlines. Writing always emits flat scanlines.
//! The shared 8-bit mantissa quantizes each channel to within 1/256 of the
//! pixel's brightest channel.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::types::Rgb;

/// Encode one pixel as an RGBE quadruple with round-to-nearest mantissas.
pub fn encode(c: Rgb) -> [u8; 4] {
    let v = c.max_channel();
    if v.is_nan() || v < 1e-32 {
        return [0, 0, 0, 0];
    }
    let (mantissa, mut exponent) = frexp(v);
    let mut scale = mantissa * 256.0 / v;
    // The brightest channel maps onto [128, 256); when it rounds up to 256,
    // bump the exponent instead of overflowing the byte.
    if (v * scale).round() >= 256.0 {
        scale *= 0.5;
        exponent += 1;
    }
    let e = exponent + 128;
    if e <= 0 {
        return [0, 0, 0, 0];
    }
    let q = |x: f64| ((x * scale).round() as i64).clamp(0, 255) as u8;
    [q(c.r), q(c.g), q(c.b), e.clamp(0, 255) as u8]
}

/// Decode one RGBE quadruple to linear radiance.
pub fn decode(bytes: [u8; 4]) -> Rgb {
    let [r, g, b, e] = bytes;
    if e == 0 {
        return Rgb::BLACK;
    }
    let f = (2.0f64).powi(e as i32 - 136);
    Rgb::new(r as f64 * f, g as f64 * f, b as f64 * f)
}

fn frexp(v: f64) -> (f64, i32) {
    debug_assert!(v.is_finite() && v >= 1e-32);
    let bits = v.to_bits();
    let exponent = ((bits >> 52) & 0x7ff) as i32 - 1022;
    let mantissa = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52));
    (mantissa, exponent)
}

fn read_line(reader: &mut impl BufRead) -> Result<String> {
    let mut line = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        match reader.read_exact(&mut byte) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                return Err(Error::UnexpectedEof)
            }
            Err(e) => return Err(e.into()),
        }
        if byte[0] == b'\n' {
            break;
        }
        line.push(byte[0]);
        if line.len() > 4096 {
            return Err(Error::MalformedHeader("header line too long".into()));
        }
    }
    String::from_utf8(line).map_err(|_| Error::MalformedHeader("non-utf8 header".into()))
}

/// Read a Radiance image; returns `(width, height, pixels)` row-major from
/// the top row down.
pub fn read(reader: &mut impl BufRead) -> Result<(usize, usize, Vec<Rgb>)> {
    let magic = read_line(reader)?;
    if !magic.starts_with("#?") {
        return Err(Error::MalformedHeader("missing #? magic".into()));
    }
    let mut format_ok = false;
    loop {
        let line = read_line(reader)?;
        if line.is_empty() {
            break;
        }
        if line.starts_with('#') {
            continue;
        }
        if let Some(fmt) = line.strip_prefix("FORMAT=") {
            if fmt.trim() != "32-bit_rle_rgbe" {
                return Err(Error::MalformedHeader(format!("unsupported format {fmt}")));
            }
            format_ok = true;
        }
        // Other variables (EXPOSURE, ...) are accepted and ignored.
    }
    if !format_ok {
        return Err(Error::MalformedHeader("missing FORMAT=32-bit_rle_rgbe".into()));
    }
    let resolution = read_line(reader)?;
    let parts: Vec<&str> = resolution.split_whitespace().collect();
    let (width, height) = match parts.as_slice() {
        ["-Y", h, "+X", w] => {
            let h: usize =
                h.parse().map_err(|_| Error::MalformedHeader("bad height".into()))?;
            let w: usize = w.parse().map_err(|_| Error::MalformedHeader("bad width".into()))?;
            (w, h)
        }
        _ => {
            return Err(Error::MalformedHeader(format!(
                "unsupported resolution line {resolution:?}"
            )))
        }
    };
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader("zero image dimension".into()));
    }
    let mut pixels = Vec::with_capacity(width * height);
    let mut scanline = vec![[0u8; 4]; width];
    for _ in 0..height {
        read_scanline(reader, &mut scanline)?;
        pixels.extend(scanline.iter().map(|&q| decode(q)));
    }
    Ok((width, height, pixels))
}

fn read_exact(reader: &mut impl BufRead, buf: &mut [u8]) -> Result<()> {
    reader.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::UnexpectedEof
        } else {
            e.into()
        }
    })
}

fn read_scanline(reader: &mut impl BufRead, out: &mut [[u8; 4]]) -> Result<()> {
    let width = out.len();
    let mut first = [0u8; 4];
    read_exact(reader, &mut first)?;
    if first[0] == 2 && first[1] == 2 && first[2] & 0x80 == 0 {
        // New-style RLE: the marker carries the scanline length, then the
        // four components are stored planar with run/dump packets.
        let len = ((first[2] as usize) << 8) | first[3] as usize;
        if len != width {
            return Err(Error::InvalidRle);
        }
        for channel in 0..4 {
            let mut filled = 0usize;
            while filled < width {
                let mut count = [0u8; 1];
                read_exact(reader, &mut count)?;
                let count = count[0] as usize;
                if count > 128 {
                    let run = count - 128;
                    if filled + run > width {
                        return Err(Error::InvalidRle);
                    }
                    let mut value = [0u8; 1];
                    read_exact(reader, &mut value)?;
                    for pixel in &mut out[filled..filled + run] {
                        pixel[channel] = value[0];
                    }
                    filled += run;
                } else {
                    if count == 0 || filled + count > width {
                        return Err(Error::InvalidRle);
                    }
                    let mut values = vec![0u8; count];
                    read_exact(reader, &mut values)?;
                    for (pixel, v) in out[filled..filled + count].iter_mut().zip(&values) {
                        pixel[channel] = *v;
                    }
                    filled += count;
                }
            }
        }
        return Ok(());
    }
    // Flat scanline, possibly containing old-style repeat markers.
    out[0] = first;
    if first[0] == 1 && first[1] == 1 && first[2] == 1 {
        return Err(Error::InvalidRle); // repeat with no previous pixel
    }
    let mut filled = 1usize;
    let mut shift = 0u32;
    while filled < width {
        let mut quad = [0u8; 4];
        read_exact(reader, &mut quad)?;
        if quad[0] == 1 && quad[1] == 1 && quad[2] == 1 {
            let run = (quad[3] as usize) << shift;
            if run == 0 || filled + run > width {
                return Err(Error::InvalidRle);
            }
            let prev = out[filled - 1];
            for pixel in &mut out[filled..filled + run] {
                *pixel = prev;
            }
            filled += run;
            shift += 8;
        } else {
            out[filled] = quad;
            filled += 1;
            shift = 0;
        }
    }
    Ok(())
}

/// Write a Radiance image with flat (uncompressed) scanlines.
pub fn write(writer: &mut impl Write, width: usize, height: usize, pixels: &[Rgb]) -> Result<()> {
    assert_eq!(pixels.len(), width * height);
    writer.write_all(b"#?RADIANCE\n")?;
    writer.write_all(b"FORMAT=32-bit_rle_rgbe\n\n")?;
    writer.write_all(format!("-Y {height} +X {width}\n").as_bytes())?;
    let mut buf = Vec::with_capacity(width * height * 4);
    for &p in pixels {
        buf.extend_from_slice(&encode(p));
    }
    writer.write_all(&buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn encode_reference_values() {
        assert_eq!(encode(Rgb::splat(1.0)), [128, 128, 128, 129]);
        assert_eq!(encode(Rgb::BLACK), [0, 0, 0, 0]);
    }

    #[test]
    fn decode_reference_values() {
        assert_eq!(decode([128, 128, 128, 129]), Rgb::splat(1.0));
        assert_eq!(decode([0, 0, 0, 0]), Rgb::BLACK);
    }

    #[test]
    fn quantization_error_bounded() {
        let mut v = 1.3e-4f64;
        while v < 1e6 {
            let c = Rgb::new(v, 0.37 * v, 0.011 * v);
            let d = decode(encode(c));
            let tol = v / 256.0;
            assert!((d.r - c.r).abs() <= tol, "r at {v}");
            assert!((d.g - c.g).abs() <= tol, "g at {v}");
            assert!((d.b - c.b).abs() <= tol, "b at {v}");
            v *= 1.7;
        }
    }

    #[test]
    fn minimal_flat_file() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 2\n");
        bytes.extend_from_slice(&[128, 128, 128, 129, 128, 128, 128, 129]);
        let (w, h, px) = read(&mut Cursor::new(bytes)).unwrap();
        assert_eq!((w, h), (2, 1));
        assert_eq!(px, vec![Rgb::splat(1.0); 2]);
    }

    #[test]
    fn old_style_repeat_marker() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 4\n");
        bytes.extend_from_slice(&[128, 128, 128, 129]);
        bytes.extend_from_slice(&[1, 1, 1, 3]); // repeat previous pixel 3x
        let (_, _, px) = read(&mut Cursor::new(bytes)).unwrap();
        assert_eq!(px, vec![Rgb::splat(1.0); 4]);
    }

    #[test]
    fn new_style_rle_scanline() {
        let width = 16u16;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 16\n");
        bytes.extend_from_slice(&[2, 2, (width >> 8) as u8, (width & 0xff) as u8]);
        for value in [128u8, 128, 128, 129] {
            bytes.extend_from_slice(&[128 + 16, value]); // one run of 16
        }
        let (_, _, px) = read(&mut Cursor::new(bytes)).unwrap();
        assert_eq!(px, vec![Rgb::splat(1.0); 16]);
    }

    #[test]
    fn truncated_file_reports_eof() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 2\n");
        bytes.extend_from_slice(&[128, 128]);
        match read(&mut Cursor::new(bytes)) {
            Err(Error::UnexpectedEof) => {}
            other => panic!("expected UnexpectedEof, got {other:?}"),
        }
    }

    #[test]
    fn missing_format_rejected() {
        let bytes = b"#?RADIANCE\n\n-Y 1 +X 2\n".to_vec();
        assert!(matches!(read(&mut Cursor::new(bytes)), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn bad_magic_rejected() {
        let bytes = b"PF\n2 1\n-1.0\n".to_vec();
        assert!(matches!(read(&mut Cursor::new(bytes)), Err(Error::MalformedHeader(_))));
    }

    #[test]
    fn write_read_round_trip() {
        let pixels: Vec<Rgb> = (0..8)
            .map(|i| Rgb::new(0.1 * i as f64, 1.5 / (1.0 + i as f64), 3.0 + i as f64))
            .collect();
        let mut bytes = Vec::new();
        write(&mut bytes, 4, 2, &pixels).unwrap();
        let (w, h, decoded) = read(&mut Cursor::new(bytes)).unwrap();
        assert_eq!((w, h), (4, 2));
        for (a, b) in pixels.iter().zip(&decoded) {
            let tol = a.max_channel() / 256.0 + 1e-12;
            assert!((a.r - b.r).abs() <= tol);
            assert!((a.g - b.g).abs() <= tol);
            assert!((a.b - b.b).abs() <= tol);
        }
    }
}
