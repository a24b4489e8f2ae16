//! Slow, generic reference minimizers shared by the integration tests. None of
//! them reuse the library's solvers, projections or operators.
#![allow(dead_code)]

use smoothgraph::EdgeCandidateSet;

/// Projected gradient with Armijo backtracking. Stops when the projected
/// gradient step moves less than `tol` in ℓ∞.
pub fn projected_gradient(
    f: impl Fn(&[f64]) -> f64,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    project: impl Fn(&[f64]) -> Vec<f64>,
    mut w: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Vec<f64> {
    let mut step = 1.0;
    let mut fw = f(&w);
    for _ in 0..max_iter {
        let g = grad(&w);
        // fixed-point residual with a unit step
        let unit: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - b).collect();
        let pu = project(&unit);
        let res = w.iter().zip(&pu).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if res < tol {
            break;
        }
        step *= 2.0;
        loop {
            let trial: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let cand = project(&trial);
            let fc = f(&cand);
            let decrease: f64 = w
                .iter()
                .zip(&cand)
                .map(|(a, c)| (a - c) * (a - c))
                .sum::<f64>()
                / (2.0 * step);
            let linear: f64 = g.iter().zip(w.iter().zip(&cand)).map(|(gi, (a, c))| gi * (c - a)).sum();
            if fc.is_finite() && fc <= fw + linear + decrease {
                w = cand;
                fw = fc;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                return w;
            }
        }
    }
    w
}

pub fn nonneg(y: &[f64]) -> Vec<f64> {
    y.iter().map(|v| v.max(0.0)).collect()
}

/// Projection onto `{x ≥ 0, Σx = s}` by bisection on the threshold.
pub fn simplex_bisect(y: &[f64], s: f64) -> Vec<f64> {
    let total = |t: f64| y.iter().map(|v| (v - t).max(0.0)).sum::<f64>();
    let mut lo = y.iter().copied().fold(f64::INFINITY, f64::min) - s;
    let mut hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    y.iter().map(|v| (v - t).max(0.0)).collect()
}

fn degrees(e: &EdgeCandidateSet, w: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; e.n()];
    for (&(i, j), &we) in e.pairs().iter().zip(w) {
        d[i] += we;
        d[j] += we;
    }
    d
}

/// `2wᵀz − α Σ log d + β‖w‖²` on once-stored edges.
pub fn log_model_oracle(e: &EdgeCandidateSet, alpha: f64, beta: f64) -> Vec<f64> {
    let z = e.z().to_vec();
    let f = |w: &[f64]| {
        let d = degrees(e, w);
        if d.iter().any(|&v| v <= 0.0) {
            return f64::INFINITY;
        }
        let lin: f64 = w.iter().zip(&z).map(|(a, b)| 2.0 * a * b + beta * a * a).sum();
        lin - alpha * d.iter().map(|v| v.ln()).sum::<f64>()
    };
    let grad = |w: &[f64]| {
        let d = degrees(e, w);
        e.pairs()
            .iter()
            .zip(w.iter().zip(&z))
            .map(|(&(i, j), (&we, &ze))| 2.0 * ze + 2.0 * beta * we - alpha / d[i] - alpha / d[j])
            .collect()
    };
    projected_gradient(f, grad, nonneg, vec![1.0; e.len()], 1e-9, 2_000_000)
}

/// `2wᵀz + α‖d‖² + 2α‖w‖²` subject to `w ≥ 0`, `Σw = n/2`.
pub fn l2_model_oracle(e: &EdgeCandidateSet, alpha: f64) -> Vec<f64> {
    let z = e.z().to_vec();
    let s = e.n() as f64 / 2.0;
    let f = |w: &[f64]| {
        let d = degrees(e, w);
        let lin: f64 = w.iter().zip(&z).map(|(a, b)| 2.0 * a * b + 2.0 * alpha * a * a).sum();
        lin + alpha * d.iter().map(|v| v * v).sum::<f64>()
    };
    let grad = |w: &[f64]| {
        let d = degrees(e, w);
        e.pairs()
            .iter()
            .zip(w.iter().zip(&z))
            .map(|(&(i, j), (&we, &ze))| 2.0 * ze + 2.0 * alpha * (d[i] + d[j]) + 4.0 * alpha * we)
            .collect()
    };
    let w0 = vec![s / e.len() as f64; e.len()];
    projected_gradient(f, grad, |y: &[f64]| simplex_bisect(y, s), w0, 1e-9, 2_000_000)
}

/// `θwᵀz − log(Σw) + ½‖w‖²` over `w ≥ 0`.
pub fn one_node_oracle(z: &[f64], theta: f64) -> Vec<f64> {
    let f = |w: &[f64]| {
        let s: f64 = w.iter().sum();
        if s <= 0.0 {
            return f64::INFINITY;
        }
        w.iter().zip(z).map(|(a, b)| theta * a * b + 0.5 * a * a).sum::<f64>() - s.ln()
    };
    let grad = |w: &[f64]| {
        let s: f64 = w.iter().sum();
        w.iter().zip(z).map(|(a, b)| theta * b - 1.0 / s + a).collect()
    };
    projected_gradient(f, grad, nonneg, vec![1.0 / z.len() as f64; z.len()], 1e-10, 1_000_000)
}

/// `max_i |min(w_i, ∂f/∂w_i)|` for the one-node problem.
pub fn one_node_kkt(z: &[f64], theta: f64, w: &[f64]) -> f64 {
    let s: f64 = w.iter().sum();
    w.iter()
        .zip(z)
        .map(|(&a, &b)| a.min(theta * b - 1.0 / s + a).abs())
        .fold(0.0, f64::max)
}

pub fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Number of entries above `eps`.
pub fn nnz(w: &[f64], eps: f64) -> usize {
    w.iter().filter(|&&v| v > eps).count()
}
