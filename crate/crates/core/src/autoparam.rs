//! Automatic sparsity control for the log model.
//!
//! With `α = β = 1` and distances multiplied by `θ`, the one-node version of
//! the problem,
//!
//! ```text
//! min_{w ≥ 0}  θ wᵀz − log(wᵀ1) + ½‖w‖²
//! ```
//!
//! has the closed-form solution `w = max(0, λ* − θz)` for ascending `z`. The
//! number of non-zeros is therefore a step function of `θ`, and the `θ`
//! range giving exactly `k` non-zeros can be written down from `z₁…z_{k+1}`.
//! Averaging those per-node ranges over all nodes of a support predicts the
//! `θ` that gives a symmetric graph with about `k` edges per node.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{EdgeCandidateSet, SparseWeightedGraph};

/// Minimizer of the one-node problem.
#[derive(Debug, Clone, PartialEq)]
pub struct OneNodeSolution {
    pub w: Vec<f64>,
    /// `1 / (wᵀ1)`.
    pub lambda_star: f64,
    /// Number of strictly positive entries of `w`; always at least 1.
    pub k: usize,
}

/// `θ ∈ (lower, upper]` gives `k` non-zeros. `upper` may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaInterval {
    pub lower: f64,
    pub upper: f64,
    pub k: usize,
}

impl ThetaInterval {
    /// Geometric mean of the bounds, or `2·lower` when the upper bound is infinite.
    pub fn pick(&self) -> f64 {
        if self.upper.is_finite() {
            (self.lower * self.upper).sqrt()
        } else {
            2.0 * self.lower
        }
    }
}

/// `θ = 1/√(αβ)` and `δ = √(α/β)`.
pub fn theta_delta(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    Ok((1.0 / (alpha * beta).sqrt(), (alpha / beta).sqrt()))
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Validates an ascending distance profile and lifts zeros to
/// `1e-12 · median(positive entries)`.
pub fn clamp_distances(z: &[f64]) -> Result<Vec<f64>> {
    if z.is_empty() {
        return Err(Error::InvalidInput("empty distance vector".into()));
    }
    for (i, &v) in z.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(i));
        }
        if v < 0.0 {
            return Err(Error::InvalidInput(format!("negative distance at {i}")));
        }
        if i > 0 && v < z[i - 1] {
            return Err(Error::Unsorted(i));
        }
    }
    let first_positive = z.partition_point(|&v| v <= 0.0);
    if first_positive == 0 {
        return Ok(z.to_vec());
    }
    let positives = &z[first_positive..];
    let eps = if positives.is_empty() {
        1e-12
    } else {
        1e-12 * positives[positives.len() / 2]
    };
    Ok(z.iter().map(|&v| v.max(eps)).collect())
}

/// Exact solution of the one-node problem by a single ascending scan.
pub fn solve_one_node(z: &[f64], theta: f64) -> Result<OneNodeSolution> {
    check_positive("theta", theta)?;
    let z = clamp_distances(z)?;
    let mut cumsum = 0.0;
    let mut k = 0;
    let mut lambda_star = 0.0;
    for (idx, &zi) in z.iter().enumerate() {
        let i = (idx + 1) as f64;
        cumsum += zi;
        let tb = theta * cumsum;
        let lambda = (tb + (tb * tb + 4.0 * i).sqrt()) / (2.0 * i);
        if lambda <= theta * zi {
            break;
        }
        k = idx + 1;
        lambda_star = lambda;
    }
    let w = z.iter().map(|&zi| (lambda_star - theta * zi).max(0.0)).collect();
    Ok(OneNodeSolution { w, lambda_star, k })
}

/// `z_a · Σ_{i<k} (z_a − z_i)`, the stable form of `k z_a² − b_k z_a`.
fn bound_denominator(z: &[f64], k: usize, a: f64) -> f64 {
    a * z[..k].iter().map(|&zi| a - zi).sum::<f64>()
}

fn interval_clamped(z: &[f64], k: usize) -> Result<ThetaInterval> {
    let upper_den = bound_denominator(z, k, z[k - 1]);
    let upper = if upper_den > 0.0 {
        1.0 / upper_den.sqrt()
    } else {
        f64::INFINITY
    };
    let lower = if k == z.len() {
        0.0
    } else {
        let den = bound_denominator(z, k, z[k]);
        if den <= 0.0 {
            return Err(Error::EmptyThetaInterval { k });
        }
        1.0 / den.sqrt()
    };
    if lower >= upper {
        return Err(Error::EmptyThetaInterval { k });
    }
    Ok(ThetaInterval { lower, upper, k })
}

/// The range of `θ` for which the one-node solution has exactly `k` non-zeros.
///
/// The lower end is 0 when `k = |z|`; the upper end is `+∞` when
/// `z₁ = … = z_k` (in particular for `k = 1`).
pub fn theta_interval_one_node(z: &[f64], k: usize) -> Result<ThetaInterval> {
    let z = clamp_distances(z)?;
    if k == 0 || k > z.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must lie in [1, {}]",
            z.len()
        )));
    }
    interval_clamped(&z, k)
}

/// Per-node intervals averaged over a support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GraphThetaInterval {
    pub interval: ThetaInterval,
    pub included: usize,
    /// Nodes with fewer than `k + 1` candidates, or whose profile admits no
    /// exactly-`k` solution.
    pub skipped: usize,
    /// More than 10% of the nodes were skipped: the support was built with
    /// too small an oversampling factor.
    pub support_too_small: bool,
}

/// Mean over nodes of the lower and upper one-node bounds, each node using
/// the sorted distances of its own candidate edges.
pub fn theta_interval_graph(e: &EdgeCandidateSet, k: usize) -> Result<GraphThetaInterval> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    let columns = e.incident_distances();
    let per_node: Vec<Option<ThetaInterval>> = columns
        .into_par_iter()
        .map(|mut col| {
            if col.len() < k + 1 {
                return None;
            }
            if col.len() > k + 1 {
                col.select_nth_unstable_by(k, f64::total_cmp);
                col.truncate(k + 1);
            }
            col.sort_unstable_by(f64::total_cmp);
            let col = clamp_distances(&col).ok()?;
            interval_clamped(&col, k).ok()
        })
        .collect();

    let mut lower_sum = 0.0;
    let mut upper_sum = 0.0;
    let mut included = 0usize;
    for iv in per_node.iter().flatten() {
        lower_sum += iv.lower;
        upper_sum += iv.upper;
        included += 1;
    }
    if included == 0 {
        return Err(Error::InsufficientCandidates { needed: k + 1 });
    }
    let skipped = e.n() - included;
    let support_too_small = skipped as f64 > 0.1 * e.n() as f64;
    if skipped > 0 {
        log::warn!("theta bounds: skipped {skipped} of {} nodes", e.n());
    }
    if support_too_small {
        log::warn!("more than 10% of nodes lack k+1 candidates; increase r");
    }
    Ok(GraphThetaInterval {
        interval: ThetaInterval {
            lower: lower_sum / included as f64,
            upper: upper_sum / included as f64,
            k,
        },
        included,
        skipped,
        support_too_small,
    })
}

/// Sparsity parameter predicted to give about `k` edges per node.
pub fn select_theta(e: &EdgeCandidateSet, k: usize) -> Result<f64> {
    Ok(theta_interval_graph(e, k)?.interval.pick())
}

/// Multiplies every weight by `δ = √(α/β)`, mapping a graph learned with
/// `α = β = 1` on `θ`-scaled distances back to the `(α, β)` parameterization.
pub fn rescale_solution(w: &SparseWeightedGraph, alpha: f64, beta: f64) -> Result<SparseWeightedGraph> {
    let (_, delta) = theta_delta(alpha, beta)?;
    Ok(w.scaled(delta))
}
