//! Portable FloatMap codec.
//!
//! Header grammar: `PF\n<width> <height>\n<scale>\n` followed by
//! height×width little-endian (scale < 0) or big-endian (scale > 0) RGB
//! float triples, rows stored bottom-to-top. We always emit scale
//! `-1.000000` so written files roundtrip bit-exactly.

use super::Panorama;
use crate::error::{Error, Result};

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(
                self.pos,
                format!("truncated stream while reading {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    /// Reads bytes up to (and consuming) the next single whitespace char.
    fn token(&mut self, what: &str) -> Result<&'a [u8]> {
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::format(start, format!("expected {what}")));
        }
        if self.pos >= self.bytes.len() {
            return Err(Error::format(
                self.pos,
                format!("truncated stream after {what}"),
            ));
        }
        let tok = &self.bytes[start..self.pos];
        self.pos += 1; // consume the single whitespace terminator
        Ok(tok)
    }
}

/// Decodes a PFM byte stream into a [`Panorama`].
pub fn read_pfm(bytes: &[u8]) -> Result<Panorama> {
    let mut cur = Cursor::new(bytes);
    let magic = cur.token("PFM magic")?;
    match magic {
        b"PF" => {}
        b"Pf" => {
            return Err(Error::format(
                0,
                "grayscale PFM (\"Pf\") is not supported; only RGB \"PF\"",
            ))
        }
        _ => return Err(Error::format(0, "stream does not begin with \"PF\"")),
    }

    let width = parse_dim(&mut cur, "width")?;
    let height = parse_dim(&mut cur, "height")?;

    let scale_pos = cur.pos;
    let scale_tok = cur.token("scale")?;
    let scale: f64 = std::str::from_utf8(scale_tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(scale_pos, "scale is not a number"))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::format(scale_pos, "scale must be finite and nonzero"));
    }
    let little_endian = scale < 0.0;
    let multiplier = scale.abs();

    let mut pixels = vec![[0.0f32; 3]; width * height];
    // File rows run bottom-to-top; memory rows run top-to-bottom.
    for file_row in 0..height {
        let mem_row = height - 1 - file_row;
        for col in 0..width {
            let at = cur.pos;
            let raw = cur.take(12, "pixel data")?;
            let mut px = [0.0f32; 3];
            for (c, chunk) in raw.chunks_exact(4).enumerate() {
                let b: [u8; 4] = chunk.try_into().unwrap();
                let mut v = if little_endian {
                    f32::from_le_bytes(b)
                } else {
                    f32::from_be_bytes(b)
                };
                if multiplier != 1.0 {
                    v = (v as f64 * multiplier) as f32;
                }
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::format(
                        at + c * 4,
                        format!("non-finite or negative pixel value {v}"),
                    ));
                }
                px[c] = v;
            }
            pixels[mem_row * width + col] = px;
        }
    }

    Panorama::new(width, height, pixels)
}

fn parse_dim(cur: &mut Cursor, what: &str) -> Result<usize> {
    let at = cur.pos;
    let tok = cur.token(what)?;
    let v: usize = std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::format(at, format!("{what} is not a positive integer")))?;
    if v == 0 {
        return Err(Error::format(at, format!("{what} must be at least 1")));
    }
    Ok(v)
}

/// Encodes a [`Panorama`] as little-endian PFM (scale -1.000000).
pub fn write_pfm(p: &Panorama) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + p.width() * p.height() * 12);
    out.extend_from_slice(format!("PF\n{} {}\n-1.000000\n", p.width(), p.height()).as_bytes());
    for file_row in 0..p.height() {
        let mem_row = p.height() - 1 - file_row;
        for col in 0..p.width() {
            for c in p.pixel(mem_row, col) {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    out
}
