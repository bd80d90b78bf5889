//! HDR panorama raster and file codecs.
//!
//! PFM is the canonical interchange format (exact 32-bit floats, so
//! write→read roundtrips are bit-exact); Radiance RGBE is read-only.
//! In memory, rows run top-to-bottom so the row index lines up with the
//! polar angle convention in [`crate::sphere`].

mod pfm;
mod rgbe;

pub use pfm::{read_pfm, write_pfm};
pub use rgbe::read_rgbe;

use crate::error::{Error, Result};

/// An equirectangular HDR raster: row-major RGB triples in linear radiance.
///
/// All channel values are finite and nonnegative; construction enforces
/// this so downstream math never sees NaN or negative energy.
#[derive(Debug, Clone, PartialEq)]
pub struct Panorama {
    width: usize,
    height: usize,
    pixels: Vec<[f32; 3]>,
}

impl Panorama {
    pub fn new(width: usize, height: usize, pixels: Vec<[f32; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("panorama dimensions must be at least 1x1"));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "pixel count {} does not match {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        for (i, px) in pixels.iter().enumerate() {
            for c in px {
                if !c.is_finite() || *c < 0.0 {
                    return Err(Error::invalid(format!(
                        "pixel {i} has non-finite or negative channel {c}"
                    )));
                }
            }
        }
        Ok(Panorama {
            width,
            height,
            pixels,
        })
    }

    /// Constant-valued panorama.
    pub fn filled(width: usize, height: usize, value: [f32; 3]) -> Result<Self> {
        Panorama::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[f32; 3]] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f32; 3] {
        self.pixels[row * self.width + col]
    }

    pub fn same_dimensions(&self, other: &Panorama) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Rec. 709 luminance of a pixel, computed in f64.
    pub fn luminance(&self, idx: usize) -> f64 {
        let [r, g, b] = self.pixels[idx];
        0.2126 * r as f64 + 0.7152 * g as f64 + 0.0722 * b as f64
    }
}
