use std::time::Instant;

use super::{check_positive, rel_change, SolverOptions, SolverReport, StopReason};
use rayon::prelude::*;

use crate::autoparam::solve_one_node;
use crate::error::{Error, Result};
use crate::graph::{DegreeOperator, EdgeCandidateSet, SparseWeightedGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `2wᵀz − α Σ log(Sw) + β‖w‖²`, i.e. the matrix objective
/// `‖W∘Z‖₁,₁ − α 1ᵀlog(W1) + β/2 ‖W‖_F²` on once-stored edges.
/// Infinite when some node has zero degree.
pub fn log_objective(e: &EdgeCandidateSet, w: &[f64], alpha: f64, beta: f64) -> f64 {
    let s = DegreeOperator::from_support(e);
    let mut deg = vec![0.0; e.n()];
    s.apply_into(w, &mut deg);
    objective_with_degrees(e.z(), w, &deg, alpha, beta)
}

fn objective_with_degrees(z: &[f64], w: &[f64], deg: &[f64], alpha: f64, beta: f64) -> f64 {
    if deg.iter().any(|&d| d <= 0.0) {
        return f64::INFINITY;
    }
    let linear: f64 = w.iter().zip(z).map(|(w, z)| w * z).sum();
    let barrier: f64 = deg.iter().map(|d| d.ln()).sum();
    let frob: f64 = w.iter().map(|w| w * w).sum();
    2.0 * linear - alpha * barrier + beta * frob
}

/// Learns log-model weights on the support `e`.
///
/// Forward-backward primal-dual iteration with
/// `f1(w) = ι{w ≥ 0} + 2wᵀz`, `f2(v) = −α 1ᵀlog v` applied to the degrees
/// `v = Sw`, and the smooth term `f3(w) = β‖w‖²`.
///
/// The iteration runs on an equilibrated copy of the problem. With `d̂ᵢ` the
/// degree node `i` would get if its star were solved alone (see
/// [`degree_estimates`]), edges are rescaled as `w = s∘u` with
/// `sₑ = √(d̂ᵢ d̂ⱼ)` and degrees by `cᵢ = 1/d̂ᵢ`. Because
/// `log(cᵢ dᵢ) = log cᵢ + log dᵢ`, the rescaled problem has the same three
/// terms and the same minimizer, with `z̃ = s∘z`, a per-edge quadratic weight
/// `β sₑ²` and the weighted incidence `K = diag(c) S diag(s)`. Its optimal
/// scaled degrees are all near 1, so nodes whose true degree is tiny
/// converge as fast as the rest.
///
/// The step is `γ = step_scale / (2β maxₑ sₑ² + ‖K‖)`, the primal starts
/// at 0 and the dual at `−α`. The returned weights are the output of the last
/// `f1` proximal step, so they are non-negative with exact zeros.
pub fn learn_log_graph(
    e: &EdgeCandidateSet,
    alpha: f64,
    beta: f64,
    opts: &SolverOptions,
) -> Result<(SparseWeightedGraph, SolverReport)> {
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    opts.validate()?;
    if e.is_empty() {
        return Err(Error::EmptySupport);
    }
    if let Some(node) = e.first_isolated() {
        return Err(Error::IsolatedNode(node));
    }
    let started = Instant::now();
    let op = Equilibrated::new(e, alpha, beta)?;
    let gamma = opts.step_scale / (2.0 * op.max_beta + op.norm_estimate());
    let (m, n) = (e.len(), e.n());
    let z: Vec<f64> = e.z().iter().zip(&op.scale).map(|(z, s)| z * s).collect();
    let edge_beta: Vec<f64> = op.scale.iter().map(|s| beta * s * s).collect();

    let mut u = vec![0.0; m];
    let mut v = vec![-alpha; n];
    let mut y = vec![0.0; m];
    let mut ybar = vec![0.0; n];
    let mut p = vec![0.0; m];
    let mut pbar = vec![0.0; n];
    let mut edge_buf = vec![0.0; m];
    let mut node_buf = vec![0.0; n];
    let mut u_next = vec![0.0; m];
    let mut v_next = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let mut stop_reason = StopReason::MaxIter;
    let barrier_shift = 4.0 * alpha * gamma;

    for _ in 0..opts.max_iter {
        iterations += 1;
        op.adjoint(&v, &mut edge_buf);
        op.apply(&u, &mut node_buf);
        for e in 0..m {
            y[e] = u[e] - gamma * (2.0 * edge_beta[e] * u[e] + edge_buf[e]);
            p[e] = (y[e] - 2.0 * gamma * z[e]).max(0.0);
        }
        for i in 0..n {
            ybar[i] = v[i] + gamma * node_buf[i];
            pbar[i] = (ybar[i] - (ybar[i] * ybar[i] + barrier_shift).sqrt()) / 2.0;
        }
        op.adjoint(&pbar, &mut edge_buf);
        op.apply(&p, &mut node_buf);
        for e in 0..m {
            let q = p[e] - gamma * (2.0 * edge_beta[e] * p[e] + edge_buf[e]);
            u_next[e] = u[e] - y[e] + q;
        }
        for i in 0..n {
            let qbar = pbar[i] + gamma * node_buf[i];
            v_next[i] = v[i] - ybar[i] + qbar;
        }
        if opts.record_objective {
            // node_buf holds K p, the degrees of s∘p divided by d̂
            let w: Vec<f64> = p.iter().zip(&op.scale).map(|(p, s)| p * s).collect();
            let deg: Vec<f64> = node_buf.iter().zip(&op.degree).map(|(k, d)| k * d).collect();
            trace.push(objective_with_degrees(e.z(), &w, &deg, alpha, beta));
        }
        last_change = rel_change(&u_next, &u).max(rel_change(&v_next, &v));
        std::mem::swap(&mut u, &mut u_next);
        std::mem::swap(&mut v, &mut v_next);
        if last_change < opts.tol {
            stop_reason = StopReason::Converged;
            break;
        }
    }

    let w: Vec<f64> = p.iter().zip(&op.scale).map(|(p, s)| p * s).collect();
    let graph = SparseWeightedGraph::from_parts_unchecked(n, e.pairs().to_vec(), w);
    let final_objective = log_objective(e, graph.weights(), alpha, beta);
    let kkt = kkt_residual_log(&graph, e, alpha, beta).unwrap_or(f64::INFINITY);
    let report = SolverReport {
        iterations,
        stop_reason,
        final_objective,
        rel_change: last_change,
        wall_time: started.elapsed().as_secs_f64(),
        kkt_residual: Some(kkt),
        objective_trace: trace,
    };
    Ok((graph, report))
}

/// Per-node degree `d̂ᵢ` of the star problem `min 2wᵀz − α log(Σw) + β‖w‖²`
/// over the edges of node `i`, i.e. the log model when every neighbor has
/// the same degree. Substituting `w = √(α/β)·u` turns it into the one-node
/// problem at `θ = 1/√(αβ)`, whence `d̂ᵢ = √(α/β) / λ*ᵢ`.
pub(crate) fn degree_estimates(e: &EdgeCandidateSet, alpha: f64, beta: f64) -> Result<Vec<f64>> {
    let theta = 1.0 / (alpha * beta).sqrt();
    let delta = (alpha / beta).sqrt();
    e.incident_distances()
        .into_par_iter()
        .map(|mut z| {
            z.sort_unstable_by(f64::total_cmp);
            Ok(delta / solve_one_node(&z, theta)?.lambda_star)
        })
        .collect()
}

/// `K = diag(1/d̂) S diag(s)` with `sₑ = √(d̂ᵢ d̂ⱼ)`, stored per edge as the two
/// coefficients `√(d̂ⱼ/d̂ᵢ)` and `√(d̂ᵢ/d̂ⱼ)`.
struct Equilibrated<'a> {
    pairs: &'a [(usize, usize)],
    n: usize,
    degree: Vec<f64>,
    scale: Vec<f64>,
    coef: Vec<(f64, f64)>,
    max_beta: f64,
}

impl<'a> Equilibrated<'a> {
    fn new(e: &'a EdgeCandidateSet, alpha: f64, beta: f64) -> Result<Self> {
        let degree = degree_estimates(e, alpha, beta)?;
        let pairs = e.pairs();
        let scale: Vec<f64> = pairs.iter().map(|&(i, j)| (degree[i] * degree[j]).sqrt()).collect();
        let coef = pairs
            .iter()
            .map(|&(i, j)| ((degree[j] / degree[i]).sqrt(), (degree[i] / degree[j]).sqrt()))
            .collect();
        let max_beta = beta * scale.iter().map(|s| s * s).fold(0.0, f64::max);
        Ok(Self {
            pairs,
            n: e.n(),
            degree,
            scale,
            coef,
            max_beta,
        })
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for ((&(i, j), &(a, b)), &ue) in self.pairs.iter().zip(&self.coef).zip(u) {
            out[i] += a * ue;
            out[j] += b * ue;
        }
    }

    fn adjoint(&self, v: &[f64], out: &mut [f64]) {
        for ((o, &(i, j)), &(a, b)) in out.iter_mut().zip(self.pairs).zip(&self.coef) {
            *o = a * v[i] + b * v[j];
        }
    }

    /// `‖K‖₂` by power iteration on `K Kᵀ`, padded by 1% and capped by
    /// `‖K‖₂² ≤ ‖K‖₁ ‖K‖∞`.
    fn norm_estimate(&self) -> f64 {
        let mut row_sums = vec![0.0; self.n];
        let mut col_max = 0.0f64;
        for (&(i, j), &(a, b)) in self.pairs.iter().zip(&self.coef) {
            row_sums[i] += a;
            row_sums[j] += b;
            col_max = col_max.max(a + b);
        }
        let bound = row_sums.iter().copied().fold(0.0, f64::max) * col_max;

        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f07);
        let mut x: Vec<f64> = (0..self.n).map(|_| rng.random_range(0.5..1.5)).collect();
        let mut edge_buf = vec![0.0; self.pairs.len()];
        let mut lambda = 0.0f64;
        for _ in 0..100 {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            x.iter_mut().for_each(|v| *v /= norm);
            self.adjoint(&x, &mut edge_buf);
            let rayleigh: f64 = edge_buf.iter().map(|v| v * v).sum();
            self.apply(&edge_buf, &mut x);
            let converged = (rayleigh - lambda).abs() < 1e-6 * rayleigh;
            lambda = rayleigh;
            if converged {
                break;
            }
        }
        (1.01 * lambda).min(bound).sqrt()
    }
}

/// Largest violation of the per-edge optimality conditions of the log model.
///
/// With `g = 2z + 2βw − α/dᵢ − α/dⱼ` and `d = W1`, an optimum has `g = 0`
/// where `w > 0` and `g ≥ 0` where `w = 0`. Both are captured by the
/// complementarity residual `|min(w, g)|`, maximized over support edges.
pub fn kkt_residual_log(
    w: &SparseWeightedGraph,
    e: &EdgeCandidateSet,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    check_positive("alpha", alpha)?;
    check_positive("beta", beta)?;
    if w.n() != e.n() || w.pairs() != e.pairs() {
        return Err(Error::InvalidInput(
            "graph and support have different edge lists".into(),
        ));
    }
    let deg = w.degrees();
    if let Some(node) = deg.iter().position(|&d| d <= 0.0) {
        return Err(Error::ZeroDegree(node));
    }
    Ok(w
        .iter()
        .zip(e.z())
        .map(|((i, j, wij), &zij)| {
            let g = 2.0 * zij + 2.0 * beta * wij - alpha / deg[i] - alpha / deg[j];
            wij.min(g).abs()
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> SolverOptions {
        SolverOptions {
            max_iter: 200_000,
            tol: 1e-12,
            ..SolverOptions::default()
        }
    }

    #[test]
    fn single_edge_closed_form() {
        // stationarity 2z + 2w − 2/w = 0 ⇒ w = (√(z² + 4) − z)/2
        let e = EdgeCandidateSet::new(2, vec![(0, 1)], vec![1.5]).unwrap();
        let (g, report) = learn_log_graph(&e, 1.0, 1.0, &tight()).unwrap();
        assert!((g.weights()[0] - 0.5).abs() < 1e-8, "{:?}", g.weights());
        assert_eq!(report.stop_reason, StopReason::Converged);
        assert!(kkt_residual_log(&g, &e, 1.0, 1.0).unwrap() < 1e-6);
    }

    #[test]
    fn duplicate_pair_reaches_bound() {
        let e = EdgeCandidateSet::new(2, vec![(0, 1)], vec![1e-12]).unwrap();
        let (g, _) = learn_log_graph(&e, 1.0, 1.0, &tight()).unwrap();
        assert!((g.weights()[0] - 1.0).abs() < 1e-4);
        assert!(g.weights()[0] <= 1.0 + 1e-9);
    }

    #[test]
    fn equilateral_triangle() {
        // θz = 1: 2 + 2w − 1/w = 0 ⇒ w = (√3 − 1)/2
        let e = EdgeCandidateSet::new(3, vec![(0, 1), (0, 2), (1, 2)], vec![1.0; 3]).unwrap();
        let (g, _) = learn_log_graph(&e, 1.0, 1.0, &tight()).unwrap();
        let expected = (3f64.sqrt() - 1.0) / 2.0;
        for &w in g.weights() {
            assert!((w - expected).abs() < 1e-8);
        }
    }

    #[test]
    fn errors() {
        let e = EdgeCandidateSet::new(3, vec![(0, 1)], vec![1.0]).unwrap();
        assert!(matches!(
            learn_log_graph(&e, 1.0, 1.0, &SolverOptions::default()),
            Err(Error::IsolatedNode(2))
        ));
        let e = EdgeCandidateSet::new(2, vec![(0, 1)], vec![1.0]).unwrap();
        assert!(learn_log_graph(&e, 0.0, 1.0, &SolverOptions::default()).is_err());
        assert!(learn_log_graph(&e, 1.0, -1.0, &SolverOptions::default()).is_err());
        let empty = EdgeCandidateSet::new(2, vec![], vec![]).unwrap();
        assert!(matches!(
            learn_log_graph(&empty, 1.0, 1.0, &SolverOptions::default()),
            Err(Error::EmptySupport)
        ));
    }

    #[test]
    fn kkt_zero_graph_is_rejected() {
        let e = EdgeCandidateSet::new(3, vec![(0, 1), (1, 2)], vec![1.0, 2.0]).unwrap();
        let zero = SparseWeightedGraph::on_support(&e, vec![0.0, 0.0]).unwrap();
        assert!(matches!(kkt_residual_log(&zero, &e, 1.0, 1.0), Err(Error::ZeroDegree(0))));
    }

    #[test]
    fn kkt_detects_perturbation() {
        let e = EdgeCandidateSet::new(
            4,
            vec![(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)],
            vec![1.0, 2.0, 1.5, 0.5, 3.0],
        )
        .unwrap();
        let (g, _) = learn_log_graph(&e, 1.0, 1.0, &tight()).unwrap();
        assert!(kkt_residual_log(&g, &e, 1.0, 1.0).unwrap() < 1e-6);
        let bumped: Vec<f64> = g.weights().iter().map(|w| w + 1e-2).collect();
        let bumped = SparseWeightedGraph::on_support(&e, bumped).unwrap();
        assert!(kkt_residual_log(&bumped, &e, 1.0, 1.0).unwrap() >= 1e-3);
    }
}
