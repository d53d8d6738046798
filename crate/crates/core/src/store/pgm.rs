//! Binary greyscale PGM (`P5`, maxval 255).

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::matrix::DenseBlock;
use crate::precision::Precision;

fn unsupported(msg: impl Into<String>) -> Error {
    Error::UnsupportedFormat(msg.into())
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn token(bytes: &[u8], pos: &mut usize) -> Result<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(unsupported("truncated PGM header"));
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

/// Read a P5 image as a `height x width` dense block of grey levels.
pub fn read_pgm<R: Read>(mut reader: R, precision: Precision) -> Result<DenseBlock> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<pgm>", e))?;
    let h = parse_pgm_header(&bytes)?;
    let (width, height, pos) = (h.width, h.height, h.raster_offset as usize);
    let raster = bytes.get(pos..pos + width * height).ok_or_else(|| unsupported("truncated PGM raster"))?;
    Ok(DenseBlock::from_fn(0..height, 0..width, precision, |i, j| raster[i * width + j] as f64))
}

/// Geometry of a P5 file without reading its raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PgmHeader {
    pub width: usize,
    pub height: usize,
    /// Byte offset of the first raster byte.
    pub raster_offset: u64,
}

/// Parse the header from the first bytes of a P5 file.
pub fn parse_pgm_header(bytes: &[u8]) -> Result<PgmHeader> {
    let mut pos = 0;
    let magic = token(bytes, &mut pos)?;
    if magic != "P5" {
        return Err(unsupported(format!("PGM magic `{magic}` (only P5 is supported)")));
    }
    let dim = |pos: &mut usize| -> Result<usize> {
        let t = token(bytes, pos)?;
        t.parse().map_err(|_| unsupported(format!("bad PGM header token `{t}`")))
    };
    let width = dim(&mut pos)?;
    let height = dim(&mut pos)?;
    let maxval = dim(&mut pos)?;
    if maxval != 255 {
        return Err(unsupported(format!("PGM maxval {maxval} (only 255 is supported)")));
    }
    if width == 0 || height == 0 {
        return Err(unsupported("empty PGM"));
    }
    if pos >= bytes.len() {
        return Err(unsupported("truncated PGM header"));
    }
    Ok(PgmHeader {
        width,
        height,
        raster_offset: pos as u64 + 1,
    })
}

/// Clamp to [0, 255] and round to nearest.
pub fn grey_level(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    v.clamp(0.0, 255.0).round() as u8
}

pub fn write_pgm<W: Write>(image: &DenseBlock, mut writer: W) -> Result<()> {
    let (h, w) = (image.rows().len(), image.cols().len());
    let io = |e| Error::io("<pgm>", e);
    write!(writer, "P5\n{w} {h}\n255\n").map_err(io)?;
    let raster: Vec<u8> = image.values().to_f64_vec().into_iter().map(grey_level).collect();
    writer.write_all(&raster).map_err(io)?;
    writer.flush().map_err(io)
}
