//! Binary PPM (P6), maxval 255.
//!
//! Header: `P6`, whitespace-separated width, height, maxval (with `#`
//! comments allowed between tokens), one whitespace byte, then
//! `width*height*3` raw bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::{Image, CHANNELS};

pub fn write_ppm(path: &Path, img: &Image) -> Result<()> {
    let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    for &p in img.pixels() {
        out.push(p.round().clamp(0.0, 255.0) as u8);
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_ppm(path: &Path) -> Result<Image> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;

    let magic = next_token(&bytes, &mut pos)
        .ok_or_else(|| Error::format(format!("{}: missing PPM magic", path.display())))?;
    if magic != b"P6" {
        return Err(Error::format(format!(
            "{}: not a binary PPM (magic {:?})",
            path.display(),
            String::from_utf8_lossy(magic)
        )));
    }
    let width = parse_dim(&bytes, &mut pos, path, "width")?;
    let height = parse_dim(&bytes, &mut pos, path, "height")?;
    let maxval = parse_dim(&bytes, &mut pos, path, "maxval")?;
    if maxval != 255 {
        return Err(Error::format(format!(
            "{}: only maxval 255 is supported, got {maxval}",
            path.display()
        )));
    }
    // Exactly one whitespace byte separates the header from pixel data.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::format(format!(
            "{}: malformed header terminator",
            path.display()
        )));
    }
    pos += 1;

    let need = width * height * CHANNELS;
    if bytes.len() - pos < need {
        return Err(Error::format(format!(
            "{}: expected {need} pixel bytes, found {}",
            path.display(),
            bytes.len() - pos
        )));
    }
    let pixels: Vec<f64> = bytes[pos..pos + need].iter().map(|&b| b as f64).collect();
    Image::new(height, width, pixels)
}

/// Next whitespace-delimited token, skipping `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
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
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(&bytes[start..*pos])
}

fn parse_dim(bytes: &[u8], pos: &mut usize, path: &Path, what: &str) -> Result<usize> {
    let token = next_token(bytes, pos)
        .ok_or_else(|| Error::format(format!("{}: missing {what}", path.display())))?;
    let text = std::str::from_utf8(token)
        .map_err(|_| Error::format(format!("{}: non-ASCII {what}", path.display())))?;
    let value: usize = text
        .parse()
        .map_err(|_| Error::format(format!("{}: bad {what} {text:?}", path.display())))?;
    if value == 0 {
        return Err(Error::format(format!("{}: zero {what}", path.display())));
    }
    Ok(value)
}
