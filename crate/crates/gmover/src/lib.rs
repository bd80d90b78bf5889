//! Geometric mover's machinery for HDR illumination.
//!
//! The crate decomposes equirectangular HDR panoramas into compact
//! anchor-point light representations (distribution, intensity, ambient,
//! depth), measures distances between such representations with entropic
//! optimal transport over a depth-aware geometric cost, and reconstructs
//! panoramic Gaussian maps from the parameters — including reprojection to
//! displaced scene positions for spatially-varying lighting.
//!
//! Modules:
//! - [`sphere`]: anchor lattices, pixel↔direction mapping, angular math
//! - [`hdr`]: the `Panorama` raster plus PFM/RGBE codecs
//! - [`decompose`]: panorama → illumination parameters
//! - [`ot`]: cost matrices, exact and entropic transport solvers
//! - [`projection`]: parameters → Gaussian maps, spatially-varying variants
//! - [`metrics`]: RMSE / si-RMSE / angular error / cosine / GMD

pub mod decompose;
pub mod error;
pub mod hdr;
pub mod metrics;
pub mod ot;
pub mod projection;
pub mod sphere;

pub use decompose::{decompose, select_light_mask, Decomposition, IlluminationParams};
pub use error::{Error, Result};
pub use hdr::{read_pfm, read_rgbe, write_pfm, Panorama};
pub use metrics::MetricReport;
pub use ot::{
    exact_emd, geometric_cost, gml_gradient, sinkhorn_gml, sinkhorn_unbalanced_gml,
    spherical_cost, CostMatrix, SinkhornConfig, TransportPlan,
};
pub use projection::{
    gaussian_map, progressive_maps, reproject, spatially_varying_map, PositionOffset,
    ProjectionConfig,
};
pub use sphere::{generate_anchors, AnchorSet};
