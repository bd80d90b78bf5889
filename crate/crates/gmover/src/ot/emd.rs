//! Exact transport solver for small instances.
//!
//! Solves the transportation LP by successive shortest augmenting paths
//! with Johnson potentials: Dijkstra on clamped-nonnegative reduced costs,
//! so every search terminates no matter how floating-point noise perturbs
//! the residual arcs. Capped at n ≤ 64: this exists to verify the entropic
//! solvers, not to run at production scale.

use ndarray::Array2;

use super::{check_measure, CostMatrix, TransportPlan};
use crate::error::{Error, Result};

/// Largest instance the exact solver accepts.
pub const EXACT_EMD_MAX_N: usize = 64;

const MASS_EPS: f64 = 1e-14;
const DISTRIBUTION_TOL: f64 = 1e-9;

/// Exact optimum of ⟨C, T⟩ over plans with marginals `u` and `v`.
///
/// Both inputs must be probability vectors (sum 1 within 1e-9). The
/// returned plan satisfies the marginals to well below 1e-9.
pub fn exact_emd(u: &[f64], v: &[f64], c: &CostMatrix) -> Result<(f64, TransportPlan)> {
    let (value, plan, _, _) = exact_emd_with_duals(u, v, c)?;
    Ok((value, plan))
}

/// [`exact_emd`] plus the optimal LP duals (α, β).
///
/// The duals certify optimality: α_i + β_j ≤ C_ij everywhere (within
/// rounding), with equality on the support of the plan, and
/// ⟨α,u⟩ + ⟨β,v⟩ equals the transport cost.
pub fn exact_emd_with_duals(
    u: &[f64],
    v: &[f64],
    c: &CostMatrix,
) -> Result<(f64, TransportPlan, Vec<f64>, Vec<f64>)> {
    let n = c.n();
    if n > EXACT_EMD_MAX_N {
        return Err(Error::UnsupportedScale(format!(
            "exact solver is limited to n <= {EXACT_EMD_MAX_N}, got {n}"
        )));
    }
    if u.len() != n || v.len() != n {
        return Err(Error::invalid(format!(
            "measures must have length {n}, got {} and {}",
            u.len(),
            v.len()
        )));
    }
    check_measure(u, "u")?;
    check_measure(v, "v")?;
    let su: f64 = u.iter().sum();
    let sv: f64 = v.iter().sum();
    if (su - 1.0).abs() > DISTRIBUTION_TOL || (sv - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(Error::invalid(format!(
            "exact_emd needs equal unit masses: sums are {su} and {sv}"
        )));
    }

    // Work on internally normalized copies so supply and demand balance to
    // machine precision regardless of the callers' 1e-9 slack.
    let mut supply: Vec<f64> = u.iter().map(|x| x / su).collect();
    let mut demand: Vec<f64> = v.iter().map(|x| x / sv).collect();

    let mut plan = Array2::<f64>::zeros((n, n));

    // Identity shortcut: when both marginals coincide and the diagonal is
    // free, diag(u) is feasible with cost 0, which is optimal for C >= 0.
    if u == v && (0..n).all(|i| c.entries()[[i, i]] == 0.0) {
        for i in 0..n {
            plan[[i, i]] = u[i];
        }
        let duals = vec![0.0; n];
        return Ok((0.0, TransportPlan::from_entries(plan), duals.clone(), duals));
    }

    // Node ids: rows 0..n, columns n..2n.
    let cost = c.entries();
    let nodes = 2 * n;
    let mut potential = vec![0.0f64; nodes];
    let mut dist = vec![0.0f64; nodes];
    let mut parent = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];
    let max_augmentations = 40 * nodes + 64;
    let mut converged = false;

    for _ in 0..max_augmentations {
        if supply.iter().sum::<f64>() <= MASS_EPS {
            converged = true;
            break;
        }

        // Multi-source Dijkstra over reduced costs (clamped at zero, so
        // rounding noise can never produce a negative edge).
        dist.fill(f64::INFINITY);
        parent.fill(usize::MAX);
        done.fill(false);
        for (i, &s) in supply.iter().enumerate() {
            if s > MASS_EPS {
                dist[i] = 0.0;
            }
        }
        loop {
            let mut node = usize::MAX;
            let mut best = f64::INFINITY;
            for k in 0..nodes {
                if !done[k] && dist[k] < best {
                    best = dist[k];
                    node = k;
                }
            }
            if node == usize::MAX {
                break;
            }
            done[node] = true;
            let d0 = dist[node];
            if node < n {
                for j in 0..n {
                    let rc = (cost[[node, j]] + potential[node] - potential[n + j]).max(0.0);
                    if d0 + rc < dist[n + j] {
                        dist[n + j] = d0 + rc;
                        parent[n + j] = node;
                    }
                }
            } else {
                let j = node - n;
                for i in 0..n {
                    if plan[[i, j]] > 0.0 {
                        let rc = (-cost[[i, j]] + potential[node] - potential[i]).max(0.0);
                        if d0 + rc < dist[i] {
                            dist[i] = d0 + rc;
                            parent[i] = node;
                        }
                    }
                }
            }
        }

        // Cheapest reachable column that still wants mass.
        let mut target = usize::MAX;
        for j in 0..n {
            if demand[j] > MASS_EPS
                && dist[n + j].is_finite()
                && (target == usize::MAX || dist[n + j] < dist[n + target])
            {
                target = j;
            }
        }
        if target == usize::MAX {
            break; // nothing reachable: remaining mass is rounding residue
        }
        let d_target = dist[n + target];

        // Walk the Dijkstra tree back to a source row.
        let mut path = Vec::new(); // (i, j, forward)
        let mut node = n + target;
        let mut bottleneck = demand[target];
        loop {
            let prev = parent[node];
            if node >= n {
                let (i, j) = (prev, node - n);
                path.push((i, j, true));
                if parent[i] == usize::MAX {
                    bottleneck = bottleneck.min(supply[i]);
                    break;
                }
            } else {
                let (i, j) = (node, prev - n);
                path.push((i, j, false));
                bottleneck = bottleneck.min(plan[[i, j]]);
            }
            node = prev;
        }

        let source = path.last().unwrap().0;
        for &(i, j, forward) in &path {
            if forward {
                plan[[i, j]] += bottleneck;
            } else {
                plan[[i, j]] -= bottleneck;
                if plan[[i, j]] < MASS_EPS {
                    plan[[i, j]] = 0.0;
                }
            }
        }
        supply[source] -= bottleneck;
        if supply[source] < MASS_EPS {
            supply[source] = 0.0;
        }
        demand[target] -= bottleneck;
        if demand[target] < MASS_EPS {
            demand[target] = 0.0;
        }

        // Johnson update keeps future reduced costs nonnegative.
        for k in 0..nodes {
            potential[k] += dist[k].min(d_target);
        }
    }

    if !converged && supply.iter().sum::<f64>() > 1e-9 {
        return Err(Error::NotConverged {
            iterations: max_augmentations,
            residual: supply.iter().sum(),
        });
    }

    // The maintained potentials are LP duals: α_i = −π_i, β_j = π_{n+j}.
    let dual_u: Vec<f64> = (0..n).map(|i| -potential[i]).collect();
    let dual_v: Vec<f64> = (0..n).map(|j| potential[n + j]).collect();

    let value = plan
        .iter()
        .zip(cost.iter())
        .map(|(t, c)| t * c)
        .sum::<f64>();
    Ok((value, TransportPlan::from_entries(plan), dual_u, dual_v))
}
