//! Binary 8-bit PGM (P5) images.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Reads a binary P5 image with maxval 255 into an `H x W` matrix of values
/// in `[0, 255]`. Header comments (`#`) are allowed.
pub fn read_pgm(path: &Path) -> Result<Array2<f64>> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;

    let mut pos = 0usize;
    let magic = next_token(&bytes, &mut pos)
        .ok_or_else(|| Error::Format("missing PGM magic number".into()))?;
    if magic != b"P5" {
        return Err(Error::Format(format!(
            "not a binary PGM: magic {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = parse_header_number(&bytes, &mut pos, "width")?;
    let height = parse_header_number(&bytes, &mut pos, "height")?;
    let maxval = parse_header_number(&bytes, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!(
            "only 8-bit PGM supported (maxval 255), got {maxval}"
        )));
    }
    if width == 0 || height == 0 {
        return Err(Error::Format("empty image".into()));
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    let expected = width * height;
    if bytes.len() < pos + expected {
        return Err(Error::Format(format!(
            "truncated raster: expected {expected} bytes, found {}",
            bytes.len().saturating_sub(pos)
        )));
    }
    let raster = &bytes[pos..pos + expected];
    Ok(Array2::from_shape_fn((height, width), |(r, c)| {
        f64::from(raster[r * width + c])
    }))
}

/// Writes a matrix as a binary P5 image, mapping values affinely so the
/// minimum becomes 0 and the maximum 255 (constant input writes zeros).
pub fn write_pgm(matrix: &Array2<f64>, path: &Path) -> Result<()> {
    let (height, width) = (matrix.nrows(), matrix.ncols());
    if height == 0 || width == 0 {
        return Err(Error::InvalidParameter("cannot write an empty image".into()));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("image values".into()));
    }
    let min = matrix.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = matrix.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scale = if max > min { 255.0 / (max - min) } else { 0.0 };

    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{width} {height}\n255\n")?;
    let mut raster = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let v = ((matrix[[r, c]] - min) * scale).round();
            raster.push(v.clamp(0.0, 255.0) as u8);
        }
    }
    out.write_all(&raster)?;
    out.flush()?;
    Ok(())
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    // Skip whitespace and '#' comments.
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(&bytes[start..*pos])
}

fn parse_header_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let token = next_token(bytes, pos)
        .ok_or_else(|| Error::Format(format!("missing PGM {what}")))?;
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("invalid PGM {what}")))
}
