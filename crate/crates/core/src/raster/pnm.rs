//! Binary netpbm: P5 greymaps in and out, P6 pixmaps out.
//!
//! The canonical header written here is `P5\n<w> <h>\n255\n`; reading then
//! writing a file with that header reproduces it byte for byte.

use super::Grid;
use crate::error::{Error, Result};

pub type RgbImage = Grid<[u8; 3]>;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn read_uint(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        let mut value: usize = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .ok_or_else(|| Error::parse(start, format!("{what} overflows")))?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::parse(start, format!("expected {what}")));
        }
        Ok(value)
    }
}

/// Decode a binary (P5) PGM with maxval at most 255.
pub fn read_pgm(bytes: &[u8]) -> Result<Grid<u8>> {
    match bytes.get(..2) {
        Some(b"P5") => {}
        Some([b'P', d]) if d.is_ascii_digit() => {
            let name = match d {
                b'1' | b'4' => "bitmap",
                b'2' => "ASCII greymap",
                b'3' | b'6' => "pixmap",
                _ => "netpbm",
            };
            return Err(Error::UnsupportedVariant(format!("P{} ({name})", *d as char)));
        }
        _ => return Err(Error::parse(0, "bad magic, expected P5")),
    }
    let mut cur = Cursor { bytes, pos: 2 };
    if !bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(Error::parse(2, "expected whitespace after magic"));
    }
    let width = cur.read_uint("width")?;
    let height = cur.read_uint("height")?;
    let maxval_at = cur.pos;
    let maxval = cur.read_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::parse(maxval_at, format!("invalid dimensions {width}x{height}")));
    }
    if maxval == 0 {
        return Err(Error::parse(maxval_at, "maxval must be positive"));
    }
    if maxval > 255 {
        return Err(Error::UnsupportedVariant(format!("16-bit PGM (maxval {maxval})")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::parse(cur.pos, "expected single whitespace after maxval")),
    }
    let start = cur.pos;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::parse(0, "image too large"))?;
    let payload = bytes.get(start..start + n).ok_or_else(|| {
        Error::parse(
            bytes.len(),
            format!("truncated payload: expected {n} bytes, got {}", bytes.len() - start),
        )
    })?;
    if let Some(i) = payload.iter().position(|&v| v as usize > maxval) {
        return Err(Error::parse(start + i, format!("sample exceeds maxval {maxval}")));
    }
    Grid::from_vec(width, height, payload.to_vec())
}

/// Encode as canonical P5 with maxval 255.
pub fn write_pgm(grid: &Grid<u8>) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", grid.width(), grid.height());
    let mut out = Vec::with_capacity(header.len() + grid.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(grid.data());
    out
}

/// Encode as canonical P6 with maxval 255.
pub fn write_ppm(image: &RgbImage) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", image.width(), image.height());
    let mut out = Vec::with_capacity(header.len() + 3 * image.len());
    out.extend_from_slice(header.as_bytes());
    for px in image.data() {
        out.extend_from_slice(px);
    }
    out
}
