//! Spherical geometry: anchor lattices, equirectangular pixel mapping, and
//! angular distances.
//!
//! Everything in this module is deterministic and allocation-light. The
//! equirectangular convention is fixed once here and shared by every other
//! module: row 0 is the +z pole, the polar angle is measured from +z, and
//! pixel centers sit at half-integer offsets.

use crate::error::{Error, Result};

/// A 3-vector. Directions are unit-length [`Vec3`]s.
pub type Vec3 = [f64; 3];

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Normalizes `a`; errors when the norm is too small to divide by.
pub fn normalize(a: Vec3) -> Result<Vec3> {
    let n = norm(a);
    if n < 1e-300 {
        return Err(Error::invalid("cannot normalize a zero vector"));
    }
    Ok(scale(a, 1.0 / n))
}

const UNIT_NORM_TOL: f64 = 1e-6;

fn check_unit(v: Vec3, name: &str) -> Result<()> {
    if !v.iter().all(|c| c.is_finite()) {
        return Err(Error::invalid(format!("{name} has non-finite components")));
    }
    if (norm(v) - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::invalid(format!(
            "{name} is not unit length (norm {})",
            norm(v)
        )));
    }
    Ok(())
}

/// A fixed set of unit directions on the sphere.
///
/// Anchor sets are immutable after construction; the optional pairwise-angle
/// table is filled in by [`AnchorSet::with_angles`] when repeated angle
/// lookups are worth the n&times;n storage.
#[derive(Debug, Clone)]
pub struct AnchorSet {
    directions: Vec<Vec3>,
    /// Row-major n×n pairwise angles, present only after `with_angles`.
    angles: Option<Vec<f64>>,
}

impl AnchorSet {
    /// Builds an anchor set from explicit unit directions.
    ///
    /// Directions must be unit length (within 1e-6) and pairwise distinct.
    pub fn new(directions: Vec<Vec3>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::invalid("anchor set must contain at least one direction"));
        }
        for (i, d) in directions.iter().enumerate() {
            check_unit(*d, &format!("anchor direction {i}"))?;
        }
        for i in 0..directions.len() {
            for j in (i + 1)..directions.len() {
                if sub(directions[i], directions[j]).iter().all(|c| *c == 0.0) {
                    return Err(Error::invalid(format!(
                        "anchor directions {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(AnchorSet {
            directions,
            angles: None,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    pub fn direction(&self, i: usize) -> Vec3 {
        self.directions[i]
    }

    /// Returns a copy with the pairwise angle table computed.
    pub fn with_angles(mut self) -> Self {
        let n = self.len();
        let mut angles = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let a = angle_between(self.directions[i], self.directions[j]);
                angles[i * n + j] = a;
                angles[j * n + i] = a;
            }
        }
        self.angles = Some(angles);
        self
    }

    /// Pairwise angle in radians; uses the cached table when present.
    pub fn angle(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.angles {
            Some(t) => t[i * self.len() + j],
            None => angle_between(self.directions[i], self.directions[j]),
        }
    }

    /// cos of the pairwise angle, computed directly from the dot product.
    ///
    /// Exactly 1 on the diagonal, so zero-cost diagonals stay exactly zero.
    pub fn cos_angle(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        dot(self.directions[i], self.directions[j]).clamp(-1.0, 1.0)
    }
}

fn angle_between(a: Vec3, b: Vec3) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

/// Generates `n` anchor directions on the spherical Fibonacci lattice.
///
/// For k in 0..n the lattice places z_k = 1 − (2k+1)/n at azimuth
/// k·π·(3 − √5) (the golden angle). The output is a pure function of `n`:
/// identical inputs give bitwise-identical directions across runs.
pub fn generate_anchors(n: usize) -> Result<AnchorSet> {
    if n == 0 {
        return Err(Error::invalid("anchor count must be at least 1"));
    }
    let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
    let mut directions = Vec::with_capacity(n);
    for k in 0..n {
        let z = 1.0 - (2.0 * k as f64 + 1.0) / n as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let azimuth = golden * k as f64;
        directions.push([r * azimuth.cos(), r * azimuth.sin(), z]);
    }
    AnchorSet::new(directions)
}

/// Direction of the center of pixel (`row`, `col`) in an equirectangular
/// map of the given dimensions.
///
/// Polar angle φ = π(row+0.5)/height from the +z pole, azimuth
/// λ = 2π(col+0.5)/width.
pub fn pixel_direction(row: usize, col: usize, height: usize, width: usize) -> Result<Vec3> {
    if row >= height || col >= width {
        return Err(Error::invalid(format!(
            "pixel ({row}, {col}) out of range for {height}x{width} map"
        )));
    }
    let phi = std::f64::consts::PI * (row as f64 + 0.5) / height as f64;
    let lambda = 2.0 * std::f64::consts::PI * (col as f64 + 0.5) / width as f64;
    let (sin_phi, cos_phi) = phi.sin_cos();
    let (sin_l, cos_l) = lambda.sin_cos();
    Ok([sin_phi * cos_l, sin_phi * sin_l, cos_phi])
}

/// Solid angle in steradians subtended by any pixel of the given row.
pub fn solid_angle(row: usize, height: usize, width: usize) -> Result<f64> {
    if row >= height {
        return Err(Error::invalid(format!(
            "row {row} out of range for height {height}"
        )));
    }
    let phi = std::f64::consts::PI * (row as f64 + 0.5) / height as f64;
    Ok(phi.sin() * (std::f64::consts::PI / height as f64)
        * (2.0 * std::f64::consts::PI / width as f64))
}

/// Angle in radians between two unit vectors, in [0, π].
///
/// Inputs whose norm deviates from 1 by more than 1e-6 are rejected.
pub fn angular_distance(a: Vec3, b: Vec3) -> Result<f64> {
    check_unit(a, "first direction")?;
    check_unit(b, "second direction")?;
    Ok(angle_between(a, b))
}

/// Index of the anchor closest in angle to `dir`; ties go to the lowest
/// index.
pub fn nearest_anchor(dir: Vec3, anchors: &AnchorSet) -> Result<usize> {
    check_unit(dir, "direction")?;
    // arccos is monotone decreasing, so the smallest angle is the largest dot.
    let mut best = 0;
    let mut best_dot = dot(dir, anchors.direction(0));
    for (k, o) in anchors.directions().iter().enumerate().skip(1) {
        let d = dot(dir, *o);
        if d > best_dot {
            best = k;
            best_dot = d;
        }
    }
    Ok(best)
}
