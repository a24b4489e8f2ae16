use std::time::Instant;

use super::simplex::project_into;
use super::{check_positive, rel_change, SolverOptions, SolverReport, StopReason};
use crate::error::{Error, Result};
use crate::graph::{DegreeOperator, EdgeCandidateSet, SparseWeightedGraph};

/// `2wᵀz + α‖Sw‖² + 2α‖w‖²`, the matrix objective
/// `‖W∘Z‖₁,₁ + α‖W1‖² + α‖W‖_F²` on once-stored edges.
pub fn l2_objective(e: &EdgeCandidateSet, w: &[f64], alpha: f64) -> f64 {
    let s = DegreeOperator::from_support(e);
    let mut deg = vec![0.0; e.n()];
    s.apply_into(w, &mut deg);
    objective_with_degrees(e.z(), w, &deg, alpha)
}

fn objective_with_degrees(z: &[f64], w: &[f64], deg: &[f64], alpha: f64) -> f64 {
    let linear: f64 = w.iter().zip(z).map(|(w, z)| w * z).sum();
    let degree_sq: f64 = deg.iter().map(|d| d * d).sum();
    let frob: f64 = w.iter().map(|w| w * w).sum();
    2.0 * linear + alpha * degree_sq + 2.0 * alpha * frob
}

/// Learns ℓ2-model weights on the support `e`, subject to `‖W‖₁,₁ = n`.
///
/// Same primal-dual scheme as the log model: `f1` is the linear distance
/// term plus the indicator of the scaled simplex `{w ≥ 0, Σw = n/2}`,
/// `f2(v) = α‖v‖²` on the degrees and `f3(w) = 2α‖w‖²`.
pub fn learn_l2_graph(
    e: &EdgeCandidateSet,
    alpha: f64,
    opts: &SolverOptions,
) -> Result<(SparseWeightedGraph, SolverReport)> {
    check_positive("alpha", alpha)?;
    opts.validate()?;
    if e.is_empty() {
        return Err(Error::EmptySupport);
    }
    let started = Instant::now();
    let s = DegreeOperator::from_support(e);
    let gamma = opts.step_scale / (4.0 * alpha + s.norm_estimate()?);
    let z = e.z();
    let (m, n) = (e.len(), e.n());
    let mass = n as f64 / 2.0;
    let dual_shrink = 1.0 / (1.0 + gamma / (2.0 * alpha));

    let mut w = vec![mass / m as f64; m];
    let mut v = vec![0.0; n];
    let mut y = vec![0.0; m];
    let mut ybar = vec![0.0; n];
    let mut p = vec![0.0; m];
    let mut pbar = vec![0.0; n];
    let mut edge_buf = vec![0.0; m];
    let mut node_buf = vec![0.0; n];
    let mut w_next = vec![0.0; m];
    let mut v_next = vec![0.0; n];
    let mut scratch = Vec::with_capacity(m);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let mut stop_reason = StopReason::MaxIter;

    for _ in 0..opts.max_iter {
        iterations += 1;
        s.adjoint_into(&v, &mut edge_buf);
        s.apply_into(&w, &mut node_buf);
        for e in 0..m {
            y[e] = w[e] - gamma * (4.0 * alpha * w[e] + edge_buf[e]);
            edge_buf[e] = y[e] - 2.0 * gamma * z[e];
        }
        project_into(&edge_buf, mass, &mut scratch, &mut p);
        for i in 0..n {
            ybar[i] = v[i] + gamma * node_buf[i];
            pbar[i] = ybar[i] * dual_shrink;
        }
        s.adjoint_into(&pbar, &mut edge_buf);
        s.apply_into(&p, &mut node_buf);
        for e in 0..m {
            let q = p[e] - gamma * (4.0 * alpha * p[e] + edge_buf[e]);
            w_next[e] = w[e] - y[e] + q;
        }
        for i in 0..n {
            let qbar = pbar[i] + gamma * node_buf[i];
            v_next[i] = v[i] - ybar[i] + qbar;
        }
        if opts.record_objective {
            trace.push(objective_with_degrees(z, &p, &node_buf, alpha));
        }
        last_change = rel_change(&w_next, &w).max(rel_change(&v_next, &v));
        std::mem::swap(&mut w, &mut w_next);
        std::mem::swap(&mut v, &mut v_next);
        if last_change < opts.tol {
            stop_reason = StopReason::Converged;
            break;
        }
    }

    let final_objective = l2_objective(e, &p, alpha);
    let graph = SparseWeightedGraph::from_parts_unchecked(n, e.pairs().to_vec(), p);
    let report = SolverReport {
        iterations,
        stop_reason,
        final_objective,
        rel_change: last_change,
        wall_time: started.elapsed().as_secs_f64(),
        kkt_residual: None,
        objective_trace: trace,
    };
    Ok((graph, report))
}
