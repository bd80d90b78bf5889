//! Decomposes an HDR panorama into the four-parameter illumination
//! representation: a light distribution over anchors, a global RGB
//! intensity, an RGB ambient term, and per-anchor depths.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hdr::Panorama;
use crate::sphere::{nearest_anchor, pixel_direction, AnchorSet};

/// Default light-source fraction: the brightest 5% of pixels.
pub const DEFAULT_LIGHT_FRACTION: f64 = 0.05;

/// The four-parameter illumination representation.
///
/// `distribution` is a probability vector over the anchors (sums to 1),
/// `intensity` and `ambient` are RGB triples in the panorama's radiance
/// units, and `depth` places each anchor in scene space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IlluminationParams {
    pub n: usize,
    pub distribution: Vec<f64>,
    pub intensity: [f64; 3],
    pub ambient: [f64; 3],
    pub depth: Vec<f64>,
}

impl IlluminationParams {
    pub fn new(
        distribution: Vec<f64>,
        intensity: [f64; 3],
        ambient: [f64; 3],
        depth: Vec<f64>,
    ) -> Result<Self> {
        let n = distribution.len();
        let p = IlluminationParams {
            n,
            distribution,
            intensity,
            ambient,
            depth,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.distribution.len() != self.n || self.depth.len() != self.n {
            return Err(Error::invalid(format!(
                "inconsistent parameter sizes: n={}, |distribution|={}, |depth|={}",
                self.n,
                self.distribution.len(),
                self.depth.len()
            )));
        }
        if self.distribution.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invalid("distribution entries must be finite and >= 0"));
        }
        let total: f64 = self.distribution.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "distribution sums to {total}, expected 1 within 1e-9"
            )));
        }
        if self.depth.iter().any(|d| !d.is_finite() || *d <= 0.0) {
            return Err(Error::invalid("depth entries must be finite and > 0"));
        }
        for c in self.intensity.iter().chain(self.ambient.iter()) {
            if !c.is_finite() || *c < 0.0 {
                return Err(Error::invalid(
                    "intensity and ambient channels must be finite and >= 0",
                ));
            }
        }
        Ok(())
    }

    /// Parses and validates the params JSON produced by [`params_to_json`].
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let p: IlluminationParams = serde_json::from_slice(bytes)
            .map_err(|e| Error::invalid(format!("params JSON: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("params serialize");
        out.push(b'\n');
        out
    }
}

/// Result of [`decompose`]: the parameters plus degenerate-input flags.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub params: IlluminationParams,
    /// Set when the masked region carried zero luminance, in which case
    /// the distribution fell back to uniform.
    pub uniform_fallback: bool,
}

/// Marks the ⌈fraction·W·H⌉ brightest pixels by Rec. 709 luminance.
///
/// Ties at the luminance threshold are resolved in row-major pixel order:
/// earlier pixels win.
pub fn select_light_mask(p: &Panorama, fraction: f64) -> Result<Vec<bool>> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!(
            "light fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let count = p.width() * p.height();
    let k = (fraction * count as f64).ceil() as usize;
    let mut order: Vec<u32> = (0..count as u32).collect();
    // Stable sort by luminance descending keeps row-major order among ties.
    order.sort_by(|&a, &b| {
        p.luminance(b as usize)
            .partial_cmp(&p.luminance(a as usize))
            .unwrap()
    });
    let mut mask = vec![false; count];
    for &idx in order.iter().take(k) {
        mask[idx as usize] = true;
    }
    Ok(mask)
}

/// Splits a panorama into the four illumination parameters.
///
/// The optional `depth_map` must match the panorama's dimensions and hold
/// strictly positive values (the per-pixel scalar is the channel mean).
/// Without it every anchor depth is 1.
pub fn decompose(
    p: &Panorama,
    depth_map: Option<&Panorama>,
    anchors: &AnchorSet,
    fraction: f64,
) -> Result<Decomposition> {
    let n = anchors.len();
    let (w, h) = (p.width(), p.height());

    let depths = match depth_map {
        Some(d) => {
            if !d.same_dimensions(p) {
                return Err(Error::invalid(format!(
                    "depth map is {}x{}, panorama is {}x{}",
                    d.width(),
                    d.height(),
                    w,
                    h
                )));
            }
            let vals: Vec<f64> = d
                .pixels()
                .iter()
                .map(|[r, g, b]| (*r as f64 + *g as f64 + *b as f64) / 3.0)
                .collect();
            if let Some(bad) = vals.iter().find(|v| **v <= 0.0) {
                return Err(Error::invalid(format!(
                    "depth map values must be strictly positive, found {bad}"
                )));
            }
            Some(vals)
        }
        None => None,
    };

    let mask = select_light_mask(p, fraction)?;
    let assignment = assignment_map(h, w, anchors)?;

    let mut intensity = [0.0f64; 3];
    let mut ambient_sum = [0.0f64; 3];
    let mut ambient_count = 0usize;
    let mut anchor_lum = vec![0.0f64; n];
    for idx in 0..w * h {
        let [r, g, b] = p.pixels()[idx];
        if mask[idx] {
            intensity[0] += r as f64;
            intensity[1] += g as f64;
            intensity[2] += b as f64;
            anchor_lum[assignment[idx]] += p.luminance(idx);
        } else {
            ambient_sum[0] += r as f64;
            ambient_sum[1] += g as f64;
            ambient_sum[2] += b as f64;
            ambient_count += 1;
        }
    }
    let ambient = if ambient_count > 0 {
        ambient_sum.map(|c| c / ambient_count as f64)
    } else {
        [0.0; 3]
    };

    // Normalizing by the sum of the per-anchor sums makes the partition
    // identity exact: the anchor masses always add up to this total.
    let total_lum: f64 = anchor_lum.iter().sum();
    let (distribution, uniform_fallback) = if total_lum > 0.0 {
        (anchor_lum.iter().map(|l| l / total_lum).collect(), false)
    } else {
        (vec![1.0 / n as f64; n], true)
    };

    let depth = match &depths {
        Some(vals) => anchor_depths(vals, &assignment, anchors),
        None => vec![1.0; n],
    };

    Ok(Decomposition {
        params: IlluminationParams::new(distribution, intensity, ambient, depth)?,
        uniform_fallback,
    })
}

/// Nearest anchor of every pixel center in an h×w equirectangular grid.
pub fn assignment_map(h: usize, w: usize, anchors: &AnchorSet) -> Result<Vec<usize>> {
    let mut assignment = vec![0usize; w * h];
    for row in 0..h {
        for col in 0..w {
            let dir = pixel_direction(row, col, h, w)?;
            assignment[row * w + col] = nearest_anchor(dir, anchors)?;
        }
    }
    Ok(assignment)
}

/// Every pixel's luminance binned onto its nearest anchor.
pub fn anchor_luminance_histogram(p: &Panorama, anchors: &AnchorSet) -> Result<Vec<f64>> {
    let assignment = assignment_map(p.height(), p.width(), anchors)?;
    let mut hist = vec![0.0f64; anchors.len()];
    for (idx, &a) in assignment.iter().enumerate() {
        hist[a] += p.luminance(idx);
    }
    Ok(hist)
}

/// Per-anchor mean depth from a depth raster shaped like `p`.
pub fn anchor_depths_from_raster(
    p: &Panorama,
    depth: &Panorama,
    anchors: &AnchorSet,
) -> Result<Vec<f64>> {
    if !depth.same_dimensions(p) {
        return Err(Error::invalid(format!(
            "depth map is {}x{}, panorama is {}x{}",
            depth.width(),
            depth.height(),
            p.width(),
            p.height()
        )));
    }
    let vals: Vec<f64> = depth
        .pixels()
        .iter()
        .map(|[r, g, b]| (*r as f64 + *g as f64 + *b as f64) / 3.0)
        .collect();
    if let Some(bad) = vals.iter().find(|v| **v <= 0.0) {
        return Err(Error::invalid(format!(
            "depth map values must be strictly positive, found {bad}"
        )));
    }
    let assignment = assignment_map(p.height(), p.width(), anchors)?;
    Ok(anchor_depths(&vals, &assignment, anchors))
}

/// Mean depth over all pixels assigned to each anchor. Anchors with no
/// pixels copy the depth of the nearest (by angle) populated anchor.
fn anchor_depths(values: &[f64], assignment: &[usize], anchors: &AnchorSet) -> Vec<f64> {
    let n = anchors.len();
    let mut sum = vec![0.0f64; n];
    let mut count = vec![0usize; n];
    for (idx, &a) in assignment.iter().enumerate() {
        sum[a] += values[idx];
        count[a] += 1;
    }
    let mut depth = vec![0.0f64; n];
    for k in 0..n {
        if count[k] > 0 {
            depth[k] = sum[k] / count[k] as f64;
        }
    }
    for k in 0..n {
        if count[k] == 0 {
            let mut best = usize::MAX;
            let mut best_angle = f64::INFINITY;
            for j in 0..n {
                if count[j] > 0 && anchors.angle(k, j) < best_angle {
                    best = j;
                    best_angle = anchors.angle(k, j);
                }
            }
            // At least one anchor is populated: every pixel lands somewhere.
            depth[k] = depth[best];
        }
    }
    depth
}

/// Conservation audit: Σ_i P_i · I, which equals I whenever ΣP = 1.
pub fn recompose_check(params: &IlluminationParams) -> [f64; 3] {
    let total: f64 = params.distribution.iter().sum();
    params.intensity.map(|c| c * total)
}
