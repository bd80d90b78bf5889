//! Gaussian map reconstruction: renders illumination parameters back into
//! panoramas through spherical Gaussian lobes, with coarse-to-fine
//! schedules and reprojection to displaced scene positions.

use crate::decompose::IlluminationParams;
use crate::error::{Error, Result};
use crate::hdr::Panorama;
use crate::sphere::{dot, norm, pixel_direction, scale, sub, AnchorSet, Vec3};

/// Raster dimensions and lobe sharpness for Gaussian map rendering.
///
/// `angular_size` is the paper-standard lobe width; `s_schedule` lists the
/// coarse-to-fine widths for progressive rendering and must be strictly
/// decreasing with the final entry equal to `angular_size`.
#[derive(Debug, Clone)]
pub struct ProjectionConfig {
    pub width: usize,
    pub height: usize,
    pub angular_size: f64,
    pub s_schedule: Vec<f64>,
}

/// Default lobe sharpness.
pub const DEFAULT_ANGULAR_SIZE: f64 = 0.0025;

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            width: 256,
            height: 128,
            angular_size: DEFAULT_ANGULAR_SIZE,
            s_schedule: vec![0.04, 0.01, DEFAULT_ANGULAR_SIZE],
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("projection dimensions must be at least 1x1"));
        }
        if !(self.angular_size > 0.0) || !self.angular_size.is_finite() {
            return Err(Error::invalid("angular size must be positive and finite"));
        }
        if self.s_schedule.is_empty() {
            return Err(Error::invalid("s_schedule must be nonempty"));
        }
        for w in self.s_schedule.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::invalid("s_schedule must be strictly decreasing"));
            }
        }
        if *self.s_schedule.last().unwrap() != self.angular_size {
            return Err(Error::invalid(
                "s_schedule must end at the configured angular size",
            ));
        }
        if self.s_schedule.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("s_schedule entries must be positive"));
        }
        Ok(())
    }
}

/// A scene-space translation of the insertion point.
#[derive(Debug, Clone, Copy)]
pub struct PositionOffset {
    pub offset: Vec3,
}

impl PositionOffset {
    pub fn new(offset: Vec3) -> Result<Self> {
        if offset.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("offset components must be finite"));
        }
        Ok(PositionOffset { offset })
    }

    pub fn is_zero(&self) -> bool {
        self.offset == [0.0, 0.0, 0.0]
    }
}

/// Renders M(u) = Σ_i v_i · exp((o_i·u − 1)/s) + A with v_i = P_i·I.
pub fn gaussian_map(
    params: &IlluminationParams,
    anchors: &AnchorSet,
    cfg: &ProjectionConfig,
) -> Result<Panorama> {
    cfg.validate()?;
    params.validate()?;
    gaussian_map_at(params, anchors, cfg, cfg.angular_size)
}

fn gaussian_map_at(
    params: &IlluminationParams,
    anchors: &AnchorSet,
    cfg: &ProjectionConfig,
    s: f64,
) -> Result<Panorama> {
    if params.n != anchors.len() {
        return Err(Error::invalid(format!(
            "params carry {} anchors, anchor set has {}",
            params.n,
            anchors.len()
        )));
    }
    let n = params.n;
    let lobes: Vec<(Vec3, [f64; 3])> = (0..n)
        .map(|i| {
            let p = params.distribution[i];
            (
                anchors.direction(i),
                params.intensity.map(|c| p * c),
            )
        })
        .collect();
    let ambient = params.ambient;

    let (w, h) = (cfg.width, cfg.height);
    let mut pixels = vec![[0.0f32; 3]; w * h];
    for row in 0..h {
        for col in 0..w {
            let u = pixel_direction(row, col, h, w)?;
            let mut acc = [ambient[0], ambient[1], ambient[2]];
            for (o, v) in &lobes {
                let g = ((dot(*o, u) - 1.0) / s).exp();
                acc[0] += v[0] * g;
                acc[1] += v[1] * g;
                acc[2] += v[2] * g;
            }
            pixels[row * w + col] = [acc[0] as f32, acc[1] as f32, acc[2] as f32];
        }
    }
    Panorama::new(w, h, pixels)
}

/// One Gaussian map per schedule entry, coarse (largest s) to fine.
pub fn progressive_maps(
    params: &IlluminationParams,
    anchors: &AnchorSet,
    cfg: &ProjectionConfig,
) -> Result<Vec<Panorama>> {
    cfg.validate()?;
    params.validate()?;
    cfg.s_schedule
        .iter()
        .map(|&s| gaussian_map_at(params, anchors, cfg, s))
        .collect()
}

/// Re-expresses the illumination at a displaced insertion position.
///
/// Each anchor's world point w_i = D_i·o_i stays fixed while the origin
/// moves by `off`; the new direction and depth are taken from w_i − off,
/// and the anchor's radiance contribution scales by the depth-falloff
/// D_i / l_i′ (so v_i′ = v_i · l_i/(l_i + ∇l)). The scale moves into the
/// intensity while the distribution renormalizes to sum 1; ambient is
/// left unchanged.
pub fn reproject(
    params: &IlluminationParams,
    anchors: &AnchorSet,
    off: &PositionOffset,
) -> Result<(IlluminationParams, AnchorSet)> {
    params.validate()?;
    if params.n != anchors.len() {
        return Err(Error::invalid(format!(
            "params carry {} anchors, anchor set has {}",
            params.n,
            anchors.len()
        )));
    }
    if off.is_zero() {
        return Ok((params.clone(), anchors.clone()));
    }
    let shift = norm(off.offset);
    let min_depth = params.depth.iter().cloned().fold(f64::INFINITY, f64::min);
    if shift >= min_depth {
        return Err(Error::invalid(format!(
            "offset length {shift} reaches the nearest anchor shell (min depth {min_depth})"
        )));
    }

    let n = params.n;
    let mut directions = Vec::with_capacity(n);
    let mut new_depth = Vec::with_capacity(n);
    let mut scaled = Vec::with_capacity(n);
    for i in 0..n {
        let world = scale(anchors.direction(i), params.depth[i]);
        let rel = sub(world, off.offset);
        let l = norm(rel);
        if l <= 0.0 {
            return Err(Error::invalid(format!(
                "offset coincides with anchor {i}'s world point"
            )));
        }
        directions.push(scale(rel, 1.0 / l));
        new_depth.push(l);
        scaled.push(params.distribution[i] * (params.depth[i] / l));
    }
    let total: f64 = scaled.iter().sum();
    let (distribution, intensity) = if total > 0.0 {
        (
            scaled.iter().map(|q| q / total).collect(),
            params.intensity.map(|c| c * total),
        )
    } else {
        // No radiance anywhere; keep a uniform distribution.
        (vec![1.0 / n as f64; n], params.intensity)
    };

    let new_params =
        IlluminationParams::new(distribution, intensity, params.ambient, new_depth)?;
    Ok((new_params, AnchorSet::new(directions)?))
}

/// Gaussian map rendered at a displaced insertion position:
/// [`reproject`] followed by [`gaussian_map`] on the displaced anchors.
pub fn spatially_varying_map(
    params: &IlluminationParams,
    anchors: &AnchorSet,
    off: &PositionOffset,
    cfg: &ProjectionConfig,
) -> Result<Panorama> {
    let (moved, displaced) = reproject(params, anchors, off)?;
    gaussian_map(&moved, &displaced, cfg)
}
