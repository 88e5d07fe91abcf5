//! Portable FloatMap reader and writer.
//!
//! `PF` is 3-channel color, `Pf` single channel. A negative scale marks
//! little-endian data (we always write -1.0). Rows are stored bottom-up per
//! the de-facto convention; this module presents them top-down.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    /// 1 (grayscale) or 3 (RGB).
    pub channels: usize,
    /// Row-major from the top row down, `channels` floats per pixel.
    pub data: Vec<f32>,
}

fn read_token(reader: &mut impl BufRead) -> Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        match reader.read_exact(&mut byte) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                return Err(Error::UnexpectedEof)
            }
            Err(e) => return Err(e.into()),
        }
        if byte[0].is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break; // single whitespace terminates the token
        }
        token.push(byte[0]);
        if token.len() > 64 {
            return Err(Error::MalformedHeader("pfm header token too long".into()));
        }
    }
    String::from_utf8(token).map_err(|_| Error::MalformedHeader("non-utf8 pfm header".into()))
}

pub fn read(reader: &mut impl BufRead) -> Result<PfmImage> {
    let magic = read_token(reader)?;
    let channels = match magic.as_str() {
        "PF" => 3,
        "Pf" => 1,
        other => return Err(Error::MalformedHeader(format!("bad pfm magic {other:?}"))),
    };
    let width: usize = read_token(reader)?
        .parse()
        .map_err(|_| Error::MalformedHeader("bad pfm width".into()))?;
    let height: usize = read_token(reader)?
        .parse()
        .map_err(|_| Error::MalformedHeader("bad pfm height".into()))?;
    let scale: f32 = read_token(reader)?
        .parse()
        .map_err(|_| Error::MalformedHeader("bad pfm scale".into()))?;
    if width == 0 || height == 0 || scale == 0.0 || !scale.is_finite() {
        return Err(Error::MalformedHeader("bad pfm dimensions or scale".into()));
    }
    let little_endian = scale < 0.0;
    let factor = scale.abs();

    let mut raw = vec![0u8; width * height * channels * 4];
    match reader.read_exact(&mut raw) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            return Err(Error::UnexpectedEof)
        }
        Err(e) => return Err(e.into()),
    }

    let mut data = vec![0f32; width * height * channels];
    let row_len = width * channels;
    for file_row in 0..height {
        let out_row = height - 1 - file_row; // file rows run bottom-up
        for i in 0..row_len {
            let o = (file_row * row_len + i) * 4;
            let bytes = [raw[o], raw[o + 1], raw[o + 2], raw[o + 3]];
            let v = if little_endian {
                f32::from_le_bytes(bytes)
            } else {
                f32::from_be_bytes(bytes)
            };
            data[out_row * row_len + i] = if factor == 1.0 { v } else { v * factor };
        }
    }
    Ok(PfmImage { width, height, channels, data })
}

/// Write a PFM image; `data` is row-major from the top row down.
pub fn write(
    writer: &mut impl Write,
    width: usize,
    height: usize,
    channels: usize,
    data: &[f32],
) -> Result<()> {
    assert!(channels == 1 || channels == 3);
    assert_eq!(data.len(), width * height * channels);
    let magic = if channels == 3 { "PF" } else { "Pf" };
    writer.write_all(format!("{magic}\n{width} {height}\n-1.0\n").as_bytes())?;
    let row_len = width * channels;
    let mut buf = Vec::with_capacity(data.len() * 4);
    for file_row in 0..height {
        let src_row = height - 1 - file_row;
        for i in 0..row_len {
            buf.extend_from_slice(&data[src_row * row_len + i].to_le_bytes());
        }
    }
    writer.write_all(&buf)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    #[test]
    fn round_trip_color() {
        let data: Vec<f32> = (0..24).map(|i| i as f32 * 0.37).collect();
        let mut bytes = Vec::new();
        write(&mut bytes, 4, 2, 3, &data).unwrap();
        let img = read(&mut Cursor::new(bytes)).unwrap();
        assert_eq!((img.width, img.height, img.channels), (4, 2, 3));
        assert_eq!(img.data, data);
    }

    #[test]
    fn big_endian_read() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        let img = read(&mut Cursor::new(bytes)).unwrap();
        assert_eq!(img.data, vec![2.5]);
    }

    #[test]
    fn truncated_data_reports_eof() {
        let mut bytes = b"Pf\n2 2\n-1.0\n".to_vec();
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        assert!(matches!(read(&mut Cursor::new(bytes)), Err(Error::UnexpectedEof)));
    }

    #[test]
    fn bad_magic_rejected() {
        let bytes = b"P6\n2 2\n255\n".to_vec();
        assert!(matches!(read(&mut Cursor::new(bytes)), Err(Error::MalformedHeader(_))));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(values in proptest::collection::vec(0.0f32..1e6, 8)) {
            let mut bytes = Vec::new();
            write(&mut bytes, 4, 2, 1, &values).unwrap();
            let img = read(&mut Cursor::new(bytes)).unwrap();
            prop_assert_eq!(img.data, values);
        }
    }
}
