//! Panorama comparison metrics: RMSE, scale-invariant RMSE, RGB angular
//! error, cosine distance, and the anchor-space geometric mover's distance.

use serde::Serialize;

use crate::decompose::anchor_luminance_histogram;
use crate::error::{Error, Result};
use crate::hdr::Panorama;
use crate::ot::{exact_emd, geometric_cost, sinkhorn_gml, SinkhornConfig};
use crate::ot::emd::EXACT_EMD_MAX_N;
use crate::sphere::AnchorSet;

/// Bundle of all metrics for one prediction/ground-truth pair.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub rmse: f64,
    pub si_rmse: f64,
    pub angular_error_degrees: f64,
    pub cosine_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gmd: Option<f64>,
}

fn check_dims(a: &Panorama, b: &Panorama) -> Result<()> {
    if !a.same_dimensions(b) {
        return Err(Error::invalid(format!(
            "panorama dimensions differ: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// Root mean square error over every channel of every pixel.
pub fn rmse(a: &Panorama, b: &Panorama) -> Result<f64> {
    check_dims(a, b)?;
    let mut acc = 0.0f64;
    for (x, y) in a.pixels().iter().zip(b.pixels()) {
        for c in 0..3 {
            let d = x[c] as f64 - y[c] as f64;
            acc += d * d;
        }
    }
    Ok((acc / (3 * a.width() * a.height()) as f64).sqrt())
}

/// RMSE after the least-squares scale α = ⟨a,b⟩/⟨a,a⟩ is applied to `a`.
pub fn si_rmse(a: &Panorama, b: &Panorama) -> Result<f64> {
    check_dims(a, b)?;
    let mut aa = 0.0f64;
    let mut ab = 0.0f64;
    for (x, y) in a.pixels().iter().zip(b.pixels()) {
        for c in 0..3 {
            aa += x[c] as f64 * x[c] as f64;
            ab += x[c] as f64 * y[c] as f64;
        }
    }
    if aa <= 0.0 {
        return Err(Error::Undefined(
            "si-RMSE scale is undefined for an all-zero first argument".into(),
        ));
    }
    let alpha = ab / aa;
    let mut acc = 0.0f64;
    for (x, y) in a.pixels().iter().zip(b.pixels()) {
        for c in 0..3 {
            let d = alpha * x[c] as f64 - y[c] as f64;
            acc += d * d;
        }
    }
    Ok((acc / (3 * a.width() * a.height()) as f64).sqrt())
}

/// Mean per-pixel angle between RGB vectors, in degrees. Pixels where
/// either side is the zero vector are skipped.
pub fn rgb_angular_error(a: &Panorama, b: &Panorama) -> Result<f64> {
    check_dims(a, b)?;
    let mut acc = 0.0f64;
    let mut count = 0usize;
    for (x, y) in a.pixels().iter().zip(b.pixels()) {
        let nx = (x[0] as f64).hypot(x[1] as f64).hypot(x[2] as f64);
        let ny = (y[0] as f64).hypot(y[1] as f64).hypot(y[2] as f64);
        if nx == 0.0 || ny == 0.0 {
            continue;
        }
        // 2·atan2(‖â−b̂‖, ‖â+b̂‖) instead of acos(â·b̂): exact at 0 when the
        // unit vectors match bitwise, and accurate near both endpoints.
        let mut diff = 0.0f64;
        let mut sum = 0.0f64;
        for c in 0..3 {
            let p = x[c] as f64 / nx;
            let q = y[c] as f64 / ny;
            diff += (p - q) * (p - q);
            sum += (p + q) * (p + q);
        }
        acc += 2.0 * diff.sqrt().atan2(sum.sqrt());
        count += 1;
    }
    if count == 0 {
        return Err(Error::Undefined(
            "no pixel has nonzero RGB on both sides".into(),
        ));
    }
    Ok((acc / count as f64).to_degrees())
}

/// 1 − cos similarity of the flattened maps.
pub fn cosine_distance(a: &Panorama, b: &Panorama) -> Result<f64> {
    check_dims(a, b)?;
    let mut aa = 0.0f64;
    let mut bb = 0.0f64;
    let mut ab = 0.0f64;
    for (x, y) in a.pixels().iter().zip(b.pixels()) {
        for c in 0..3 {
            aa += x[c] as f64 * x[c] as f64;
            bb += y[c] as f64 * y[c] as f64;
            ab += x[c] as f64 * y[c] as f64;
        }
    }
    if aa <= 0.0 || bb <= 0.0 {
        return Err(Error::Undefined(
            "cosine distance is undefined for an all-zero map".into(),
        ));
    }
    // Rounding can push the similarity a few ulps past 1; keep the
    // distance inside its [0, 2] range.
    Ok((1.0 - ab / (aa.sqrt() * bb.sqrt())).clamp(0.0, 2.0))
}

/// Geometric mover's distance between two panoramas.
///
/// Each map's luminance is binned onto the anchors and normalized to a
/// probability vector; the transport cost uses per-anchor depths averaged
/// from the optional depth rasters (unit depths otherwise). Instances at
/// or below the exact solver's limit are solved exactly, larger ones with
/// the entropic solver.
pub fn gmd(
    a: &Panorama,
    b: &Panorama,
    anchors: &AnchorSet,
    depth_a: Option<&Panorama>,
    depth_b: Option<&Panorama>,
    cfg: &SinkhornConfig,
) -> Result<f64> {
    check_dims(a, b)?;
    let u = normalized_histogram(a, anchors, "first panorama")?;
    let v = normalized_histogram(b, anchors, "second panorama")?;
    let n = anchors.len();
    let da = match depth_a {
        Some(d) => crate::decompose::anchor_depths_from_raster(a, d, anchors)?,
        None => vec![1.0; n],
    };
    let db = match depth_b {
        Some(d) => crate::decompose::anchor_depths_from_raster(b, d, anchors)?,
        None => vec![1.0; n],
    };
    let cost = geometric_cost(anchors, &da, &db)?;
    if n <= EXACT_EMD_MAX_N {
        let (value, _) = exact_emd(&u, &v, &cost)?;
        Ok(value)
    } else {
        Ok(sinkhorn_gml(&u, &v, &cost, cfg)?.value)
    }
}

fn normalized_histogram(p: &Panorama, anchors: &AnchorSet, name: &str) -> Result<Vec<f64>> {
    let hist = anchor_luminance_histogram(p, anchors)?;
    let total: f64 = hist.iter().sum();
    if total <= 0.0 {
        return Err(Error::invalid(format!("{name} carries zero luminance")));
    }
    Ok(hist.iter().map(|x| x / total).collect())
}

/// All metrics in one pass; GMD is included when anchors are supplied.
pub fn report(
    pred: &Panorama,
    gt: &Panorama,
    anchors: Option<&AnchorSet>,
    depth_pred: Option<&Panorama>,
    depth_gt: Option<&Panorama>,
    cfg: &SinkhornConfig,
) -> Result<MetricReport> {
    Ok(MetricReport {
        rmse: rmse(pred, gt)?,
        si_rmse: si_rmse(pred, gt)?,
        angular_error_degrees: rgb_angular_error(pred, gt)?,
        cosine_distance: cosine_distance(pred, gt)?,
        gmd: match anchors {
            Some(a) => Some(gmd(pred, gt, a, depth_pred, depth_gt, cfg)?),
            None => None,
        },
    })
}
