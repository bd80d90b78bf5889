//! Optimal-transport machinery: geometric cost matrices, an exact
//! min-cost-flow solver for small instances, and entropic Sinkhorn solvers
//! (balanced and unbalanced) with their dual-potential gradients.

pub(crate) mod emd;
mod sinkhorn;
mod unbalanced;

pub use emd::{exact_emd, exact_emd_with_duals, EXACT_EMD_MAX_N};
pub use sinkhorn::{gml_gradient, sinkhorn_gml, SinkhornSolution};
pub use unbalanced::{kl_divergence, sinkhorn_unbalanced_gml, UnbalancedSolution};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sphere::AnchorSet;

/// Pairwise transport costs between anchors.
///
/// Entries are finite and nonnegative. Costs built from a single depth
/// vector are symmetric with a zero diagonal; costs mixing two depth
/// vectors (one per side) need not be.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    entries: Array2<f64>,
}

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(Error::invalid(format!(
                "cost matrix must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid(
                "cost entries must be finite and nonnegative",
            ));
        }
        Ok(CostMatrix { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.n();
        (0..n).all(|i| (i..n).all(|j| (self.entries[[i, j]] - self.entries[[j, i]]).abs() <= tol))
    }
}

/// A transport plan: nonnegative mass moved between anchor pairs.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    entries: Array2<f64>,
}

impl TransportPlan {
    pub(crate) fn from_entries(entries: Array2<f64>) -> Self {
        TransportPlan { entries }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.rows().into_iter().map(|r| r.sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        self.entries.columns().into_iter().map(|c| c.sum()).collect()
    }

    /// Largest L1 deviation of the marginals from the target measures.
    pub fn marginal_violation(&self, u: &[f64], v: &[f64]) -> f64 {
        let row: f64 = self
            .row_sums()
            .iter()
            .zip(u)
            .map(|(s, m)| (s - m).abs())
            .sum();
        let col: f64 = self
            .col_sums()
            .iter()
            .zip(v)
            .map(|(s, m)| (s - m).abs())
            .sum();
        row.max(col)
    }

    /// Total transport cost ⟨C, T⟩.
    pub fn cost(&self, c: &CostMatrix) -> f64 {
        self.entries
            .iter()
            .zip(c.entries().iter())
            .map(|(t, c)| t * c)
            .sum()
    }

    /// Entropy H(T) = −Σ T_ij log T_ij, with 0·log 0 = 0.
    pub fn entropy(&self) -> f64 {
        -self
            .entries
            .iter()
            .filter(|t| **t > 0.0)
            .map(|t| t * t.ln())
            .sum::<f64>()
    }
}

/// Solver knobs for the entropic solvers.
#[derive(Debug, Clone)]
pub struct SinkhornConfig {
    /// Entropic regularization coefficient ε.
    pub epsilon: f64,
    /// Iteration cap across all scaling stages.
    pub max_iterations: usize,
    /// Largest acceptable L1 marginal violation (balanced) or dual
    /// optimality residual (unbalanced).
    pub tolerance: f64,
    /// KL penalty weight ρ applied to both marginals in unbalanced mode.
    pub kl_weight: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        SinkhornConfig {
            epsilon: 1e-4,
            max_iterations: 10_000,
            tolerance: 1e-9,
            kl_weight: 1.0,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon must be positive and finite"));
        }
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::invalid("tolerance must be positive and finite"));
        }
        if !(self.kl_weight > 0.0) || !self.kl_weight.is_finite() {
            return Err(Error::invalid("kl_weight must be positive and finite"));
        }
        Ok(())
    }
}

/// Depth-aware squared-chord cost between anchor pairs:
/// C_ij = D_i² + D_j² − 2·D_i·D_j·cos θ_ij.
///
/// `depth_u` places the row-side anchors, `depth_v` the column side.
/// Tiny negative values from rounding are clamped to zero.
pub fn geometric_cost(
    anchors: &AnchorSet,
    depth_u: &[f64],
    depth_v: &[f64],
) -> Result<CostMatrix> {
    let n = anchors.len();
    if depth_u.len() != n || depth_v.len() != n {
        return Err(Error::invalid(format!(
            "depth vectors must have length {n}, got {} and {}",
            depth_u.len(),
            depth_v.len()
        )));
    }
    for d in depth_u.iter().chain(depth_v.iter()) {
        if !d.is_finite() || *d <= 0.0 {
            return Err(Error::invalid(format!(
                "depths must be finite and strictly positive, got {d}"
            )));
        }
    }
    let mut entries = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            // cos θ_ij taken straight from the dot product; an acos→cos
            // roundtrip would smear the exact 0 and ±1 cases.
            let cos_theta = anchors.cos_angle(i, j);
            let c = depth_u[i] * depth_u[i] + depth_v[j] * depth_v[j]
                - 2.0 * depth_u[i] * depth_v[j] * cos_theta;
            entries[[i, j]] = c.max(0.0);
        }
    }
    CostMatrix::new(entries)
}

/// Unit-sphere radian cost: C_ij = θ_ij. Compatibility mode for losses
/// that ignore scene depth.
pub fn spherical_cost(anchors: &AnchorSet) -> CostMatrix {
    let n = anchors.len();
    let mut entries = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            entries[[i, j]] = anchors.angle(i, j);
        }
    }
    CostMatrix { entries }
}

pub(crate) fn check_measure(m: &[f64], name: &str) -> Result<()> {
    if m.is_empty() {
        return Err(Error::invalid(format!("{name} must be nonempty")));
    }
    if m.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid(format!(
            "{name} entries must be finite and nonnegative"
        )));
    }
    Ok(())
}

pub(crate) fn check_distribution(m: &[f64], name: &str, tol: f64) -> Result<()> {
    check_measure(m, name)?;
    let total: f64 = m.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::invalid(format!(
            "{name} must sum to 1 within {tol:.0e}, got {total}"
        )));
    }
    Ok(())
}
