//! Deterministic synthetic panoramas and depth rasters for tests and
//! pipeline demos.

use gmover::error::{Error, Result};
use gmover::hdr::Panorama;
use gmover::sphere::{dot, pixel_direction, Vec3};

/// Index of the pixel whose center direction is closest to `dir`; ties go
/// to the earlier pixel in row-major order.
pub fn nearest_pixel(dir: Vec3, width: usize, height: usize) -> Result<(usize, usize)> {
    let mut best = (0, 0);
    let mut best_dot = f64::NEG_INFINITY;
    for row in 0..height {
        for col in 0..width {
            let d = dot(dir, pixel_direction(row, col, height, width)?);
            if d > best_dot {
                best_dot = d;
                best = (row, col);
            }
        }
    }
    Ok(best)
}

/// Black map with one bright pixel at the pixel nearest `dir`.
pub fn delta(
    width: usize,
    height: usize,
    dir: Vec3,
    value: f64,
    ambient: f64,
) -> Result<Panorama> {
    let mut pixels = vec![[ambient as f32; 3]; width * height];
    let (row, col) = nearest_pixel(dir, width, height)?;
    let v = value as f32;
    pixels[row * width + col] = [v + ambient as f32, v + ambient as f32, v + ambient as f32];
    Panorama::new(width, height, pixels)
}

/// Two bright pixels on an otherwise constant map.
pub fn two_lights(
    width: usize,
    height: usize,
    dir_a: Vec3,
    value_a: f64,
    dir_b: Vec3,
    value_b: f64,
    ambient: f64,
) -> Result<Panorama> {
    let mut pixels = vec![[ambient as f32; 3]; width * height];
    let (ra, ca) = nearest_pixel(dir_a, width, height)?;
    let (rb, cb) = nearest_pixel(dir_b, width, height)?;
    if (ra, ca) == (rb, cb) {
        return Err(Error::invalid(
            "two-lights directions land on the same pixel; pick directions further apart",
        ));
    }
    for c in 0..3 {
        pixels[ra * width + ca][c] = (value_a + ambient) as f32;
        pixels[rb * width + cb][c] = (value_b + ambient) as f32;
    }
    Panorama::new(width, height, pixels)
}

/// Constant map.
pub fn uniform(width: usize, height: usize, value: f64) -> Result<Panorama> {
    Panorama::filled(width, height, [value as f32; 3])
}

/// Row-linear map running from `start` at the top row to `end` at the
/// bottom row.
pub fn gradient(width: usize, height: usize, start: f64, end: f64) -> Result<Panorama> {
    let mut pixels = vec![[0.0f32; 3]; width * height];
    for row in 0..height {
        let t = if height > 1 {
            row as f64 / (height - 1) as f64
        } else {
            0.0
        };
        let v = (start + (end - start) * t) as f32;
        for col in 0..width {
            pixels[row * width + col] = [v, v, v];
        }
    }
    Panorama::new(width, height, pixels)
}
