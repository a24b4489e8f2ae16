//! Quadratic `‖LX‖_F²` graph fits on a fixed support.
//!
//! `‖LX‖_F² = ‖Mw‖²` where row `i` of `Mw` is `Σ_{e ∋ i} w_e (x_i − x_other)`.
//! The hard variant keeps every degree at least 1 and is solved by the same
//! forward-backward primal-dual scheme as the log model; the soft variant
//! penalizes degree deficits quadratically and is solved with FISTA.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{rel_change, SolverOptions, SolverReport, StopReason};
use crate::error::{Error, Result};
use crate::graph::{DegreeOperator, EdgeCandidateSet, FeatureMatrix, SparseWeightedGraph};

/// Tie-break weight that selects the minimum-norm point among equal objectives.
const MIN_NORM_REG: f64 = 1e-12;

struct SignalOperator {
    n: usize,
    d: usize,
    pairs: Vec<(usize, usize)>,
    /// `x_i − x_j` per edge, row-major `m × d`.
    diffs: Vec<f64>,
}

impl SignalOperator {
    fn new(e: &EdgeCandidateSet, x: &FeatureMatrix) -> Self {
        let d = x.d();
        let mut diffs = Vec::with_capacity(e.len() * d);
        for &(i, j) in e.pairs() {
            diffs.extend(x.row(i).iter().zip(x.row(j)).map(|(a, b)| a - b));
        }
        Self {
            n: x.n(),
            d,
            pairs: e.pairs().to_vec(),
            diffs,
        }
    }

    /// `out (n×d) = M w`.
    fn apply(&self, w: &[f64], out: &mut [f64]) {
        let d = self.d;
        out.iter_mut().for_each(|o| *o = 0.0);
        for (k, (&(i, j), &we)) in self.pairs.iter().zip(w).enumerate() {
            let diff = &self.diffs[k * d..(k + 1) * d];
            for (t, &dv) in diff.iter().enumerate() {
                out[i * d + t] += we * dv;
                out[j * d + t] -= we * dv;
            }
        }
    }

    /// `out (m) = Mᵀ u`.
    fn adjoint(&self, u: &[f64], out: &mut [f64]) {
        let d = self.d;
        for (k, (o, &(i, j))) in out.iter_mut().zip(&self.pairs).enumerate() {
            let diff = &self.diffs[k * d..(k + 1) * d];
            *o = diff
                .iter()
                .enumerate()
                .map(|(t, &dv)| (u[i * d + t] - u[j * d + t]) * dv)
                .sum();
        }
    }

    /// `‖M‖²` by power iteration on `MᵀM`.
    fn norm_sq(&self) -> f64 {
        let m = self.pairs.len();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f03);
        let mut w: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5)).collect();
        let mut buf = vec![0.0; self.n * self.d];
        let mut next = vec![0.0; m];
        let mut lambda = 0.0f64;
        for _ in 0..100 {
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            w.iter_mut().for_each(|v| *v /= norm);
            self.apply(&w, &mut buf);
            let rayleigh: f64 = buf.iter().map(|v| v * v).sum();
            self.adjoint(&buf, &mut next);
            let converged = (rayleigh - lambda).abs() <= 1e-6 * rayleigh;
            lambda = rayleigh;
            if converged {
                break;
            }
            std::mem::swap(&mut w, &mut next);
        }
        // power iteration approaches from below
        lambda * 1.01
    }

    fn objective(&self, w: &[f64], buf: &mut [f64]) -> f64 {
        self.apply(w, buf);
        buf.iter().map(|v| v * v).sum()
    }
}

fn check_inputs(e: &EdgeCandidateSet, x: &FeatureMatrix, opts: &SolverOptions) -> Result<()> {
    opts.validate()?;
    if e.is_empty() {
        return Err(Error::EmptySupport);
    }
    if x.n() != e.n() {
        return Err(Error::DimensionMismatch {
            expected: e.n(),
            got: x.n(),
        });
    }
    Ok(())
}

/// `min ‖Mw‖²  s.t. w ≥ 0, Sw ≥ 1`.
///
/// The objective is homogeneous, so an optimum has smallest degree exactly 1.
/// The final iterate is rescaled to that, which also settles the flat
/// direction left by duplicate points faster than the tie-break term alone.
pub fn learn_daitch_hard(
    e: &EdgeCandidateSet,
    x: &FeatureMatrix,
    opts: &SolverOptions,
) -> Result<(SparseWeightedGraph, SolverReport)> {
    check_inputs(e, x, opts)?;
    if let Some(node) = e.first_isolated() {
        return Err(Error::IsolatedNode(node));
    }
    let started = Instant::now();
    let s = DegreeOperator::from_support(e);
    let mop = SignalOperator::new(e, x);
    let (m, n) = (e.len(), e.n());
    let lipschitz = 2.0 * mop.norm_sq() + 2.0 * MIN_NORM_REG;
    let gamma = opts.step_scale / (lipschitz + s.norm_estimate()?);

    let mut signal_buf = vec![0.0; n * x.d()];
    let mut grad = vec![0.0; m];
    let gradient = |w: &[f64], grad: &mut [f64], buf: &mut [f64]| {
        mop.apply(w, buf);
        mop.adjoint(buf, grad);
        for (g, &we) in grad.iter_mut().zip(w) {
            *g = 2.0 * *g + 2.0 * MIN_NORM_REG * we;
        }
    };

    let mut w = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut y = vec![0.0; m];
    let mut ybar = vec![0.0; n];
    let mut p = vec![0.0; m];
    let mut pbar = vec![0.0; n];
    let mut edge_buf = vec![0.0; m];
    let mut node_buf = vec![0.0; n];
    let mut w_next = vec![0.0; m];
    let mut v_next = vec![0.0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let mut stop_reason = StopReason::MaxIter;

    for _ in 0..opts.max_iter {
        iterations += 1;
        gradient(&w, &mut grad, &mut signal_buf);
        s.adjoint_into(&v, &mut edge_buf);
        s.apply_into(&w, &mut node_buf);
        for e in 0..m {
            y[e] = w[e] - gamma * (grad[e] + edge_buf[e]);
            p[e] = y[e].max(0.0);
        }
        for i in 0..n {
            ybar[i] = v[i] + gamma * node_buf[i];
            // prox of the conjugate of ι{v ≥ 1}
            pbar[i] = (ybar[i] - gamma).min(0.0);
        }
        gradient(&p, &mut grad, &mut signal_buf);
        s.adjoint_into(&pbar, &mut edge_buf);
        s.apply_into(&p, &mut node_buf);
        for e in 0..m {
            let q = p[e] - gamma * (grad[e] + edge_buf[e]);
            w_next[e] = w[e] - y[e] + q;
        }
        for i in 0..n {
            v_next[i] = v[i] - ybar[i] + pbar[i] + gamma * node_buf[i];
        }
        if opts.record_objective {
            trace.push(mop.objective(&p, &mut signal_buf));
        }
        last_change = rel_change(&w_next, &w).max(rel_change(&v_next, &v));
        std::mem::swap(&mut w, &mut w_next);
        std::mem::swap(&mut v, &mut v_next);
        if last_change < opts.tol {
            stop_reason = StopReason::Converged;
            break;
        }
    }

    s.apply_into(&p, &mut node_buf);
    let min_degree = node_buf.iter().copied().fold(f64::INFINITY, f64::min);
    if min_degree > 0.0 && min_degree.is_finite() {
        p.iter_mut().for_each(|w| *w /= min_degree);
    }
    let final_objective = mop.objective(&p, &mut signal_buf);
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

/// `min ‖Mw‖² + μ‖max(1 − Sw, 0)‖²  s.t. w ≥ 0`, by FISTA with projection
/// onto the non-negative orthant and step `step_scale / L`.
pub fn learn_daitch_soft(
    e: &EdgeCandidateSet,
    x: &FeatureMatrix,
    mu: f64,
    opts: &SolverOptions,
) -> Result<(SparseWeightedGraph, SolverReport)> {
    check_inputs(e, x, opts)?;
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("mu must be non-negative, got {mu}")));
    }
    let started = Instant::now();
    let s = DegreeOperator::from_support(e);
    let mop = SignalOperator::new(e, x);
    let (m, n) = (e.len(), e.n());
    let s_norm = s.norm_estimate()?;
    let lipschitz = 2.0 * mop.norm_sq() + 2.0 * mu * s_norm * s_norm * 1.01;
    let step = if lipschitz > 0.0 {
        opts.step_scale / lipschitz
    } else {
        opts.step_scale
    };

    let mut signal_buf = vec![0.0; n * x.d()];
    let mut node_buf = vec![0.0; n];
    let mut grad = vec![0.0; m];
    let mut pen_grad = vec![0.0; m];
    let objective = |w: &[f64], signal_buf: &mut [f64], node_buf: &mut [f64]| {
        s.apply_into(w, node_buf);
        let deficit: f64 = node_buf.iter().map(|d| (1.0 - d).max(0.0).powi(2)).sum();
        mop.objective(w, signal_buf) + mu * deficit
    };

    let mut w = vec![0.0; m];
    let mut w_prev = vec![0.0; m];
    let mut extrap = vec![0.0; m];
    let mut t = 1.0f64;
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    let mut stop_reason = StopReason::MaxIter;

    for _ in 0..opts.max_iter {
        iterations += 1;
        mop.apply(&extrap, &mut signal_buf);
        mop.adjoint(&signal_buf, &mut grad);
        s.apply_into(&extrap, &mut node_buf);
        node_buf.iter_mut().for_each(|d| *d = (1.0 - *d).max(0.0));
        s.adjoint_into(&node_buf, &mut pen_grad);
        std::mem::swap(&mut w, &mut w_prev);
        for k in 0..m {
            let g = 2.0 * grad[k] - 2.0 * mu * pen_grad[k];
            w[k] = (extrap[k] - step * g).max(0.0);
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        let momentum = (t - 1.0) / t_next;
        for k in 0..m {
            extrap[k] = w[k] + momentum * (w[k] - w_prev[k]);
        }
        t = t_next;
        if opts.record_objective {
            trace.push(objective(&w, &mut signal_buf, &mut node_buf));
        }
        last_change = rel_change(&w, &w_prev);
        if last_change < opts.tol {
            stop_reason = StopReason::Converged;
            break;
        }
    }

    let final_objective = objective(&w, &mut signal_buf, &mut node_buf);
    let graph = SparseWeightedGraph::from_parts_unchecked(n, e.pairs().to_vec(), w);
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
