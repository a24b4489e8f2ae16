//! End-to-end runs: neighbor search, support assembly, sparsity selection and
//! weight learning, plus the timing sweep used to check cost scaling.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::autoparam::{select_theta, theta_delta};
use crate::datasets;
use crate::error::{Error, Result};
use crate::eval::degree_stats;
use crate::graph::{EdgeCandidateSet, FeatureMatrix, SparseWeightedGraph};
use crate::neighbors::{build_allowed_support, knn_approx, knn_exact, AnnParams};
use crate::solvers::{
    learn_daitch_hard, learn_daitch_soft, learn_l2_graph, learn_log_graph, SolverOptions,
    SolverReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Log,
    L2,
    DaitchHard,
    DaitchSoft,
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log" => Ok(Self::Log),
            "l2" => Ok(Self::L2),
            "daitch-hard" => Ok(Self::DaitchHard),
            "daitch-soft" => Ok(Self::DaitchSoft),
            other => Err(Error::InvalidParameter(format!("unknown model {other:?}"))),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Log => "log",
            Self::L2 => "l2",
            Self::DaitchHard => "daitch-hard",
            Self::DaitchSoft => "daitch-soft",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeighborSearch {
    Exact,
    Approx(AnnParams),
}

/// How the log model's two parameters are fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogParams {
    /// Pick `θ` from the requested degree.
    Auto,
    /// Learn with `α = β = 1` on `θ`-scaled distances.
    Theta(f64),
    Explicit { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub model: Model,
    pub k: usize,
    pub r: usize,
    pub search: NeighborSearch,
    pub log_params: LogParams,
    /// `α` of the ℓ2 model.
    pub l2_alpha: f64,
    pub mu: f64,
    pub solver: SolverOptions,
}

impl Default for LearnConfig {
    fn default() -> Self {
        Self {
            model: Model::Log,
            k: 10,
            r: 3,
            search: NeighborSearch::Approx(AnnParams::default()),
            log_params: LogParams::Auto,
            l2_alpha: 1.0,
            mu: 1.0,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LearnSummary {
    pub model: Model,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_used: Option<f64>,
    pub requested_k: usize,
    pub obtained_mean_degree: f64,
    pub isolated_nodes: usize,
    pub support_edges: usize,
    pub iterations: usize,
    pub wall_time_ann: f64,
    pub wall_time_solve: f64,
    pub solver: SolverReport,
}

/// Symmetrized `k·r`-nearest-neighbor support and the seconds it took.
pub fn build_support(
    x: &FeatureMatrix,
    k: usize,
    r: usize,
    search: &NeighborSearch,
) -> Result<(EdgeCandidateSet, f64)> {
    if k == 0 || r == 0 {
        return Err(Error::InvalidParameter("k and r must be positive".into()));
    }
    if x.n() < 2 {
        return Err(Error::InvalidInput("need at least two nodes".into()));
    }
    let started = Instant::now();
    let m = (k * r).min(x.n() - 1);
    let lists = match search {
        NeighborSearch::Exact => knn_exact(x, m)?,
        NeighborSearch::Approx(params) => knn_approx(x, m, params)?,
    };
    let support = build_allowed_support(&lists, k, r, x)?;
    Ok((support, started.elapsed().as_secs_f64()))
}

/// Learns a graph on a prepared support. Returns the graph, the solver
/// report and the `θ` in effect for the log model.
pub fn learn_on_support(
    support: &EdgeCandidateSet,
    x: &FeatureMatrix,
    cfg: &LearnConfig,
) -> Result<(SparseWeightedGraph, SolverReport, Option<f64>)> {
    match cfg.model {
        Model::Log => {
            let (graph, report, theta) = match cfg.log_params {
                LogParams::Auto => {
                    let theta = select_theta(support, cfg.k)?;
                    let (g, rep) = learn_log_graph(&support.scaled(theta), 1.0, 1.0, &cfg.solver)?;
                    (g, rep, theta)
                }
                LogParams::Theta(theta) => {
                    if !(theta > 0.0 && theta.is_finite()) {
                        return Err(Error::InvalidParameter(format!(
                            "theta must be positive, got {theta}"
                        )));
                    }
                    let (g, rep) = learn_log_graph(&support.scaled(theta), 1.0, 1.0, &cfg.solver)?;
                    (g, rep, theta)
                }
                LogParams::Explicit { alpha, beta } => {
                    let (theta, _) = theta_delta(alpha, beta)?;
                    let (g, rep) = learn_log_graph(support, alpha, beta, &cfg.solver)?;
                    (g, rep, theta)
                }
            };
            Ok((graph, report, Some(theta)))
        }
        Model::L2 => {
            let (g, rep) = learn_l2_graph(support, cfg.l2_alpha, &cfg.solver)?;
            Ok((g, rep, None))
        }
        Model::DaitchHard => {
            let (g, rep) = learn_daitch_hard(support, x, &cfg.solver)?;
            Ok((g, rep, None))
        }
        Model::DaitchSoft => {
            let (g, rep) = learn_daitch_soft(support, x, cfg.mu, &cfg.solver)?;
            Ok((g, rep, None))
        }
    }
}

/// Neighbor search, support assembly and weight learning in one call.
pub fn learn_graph(x: &FeatureMatrix, cfg: &LearnConfig) -> Result<(SparseWeightedGraph, LearnSummary)> {
    let (support, wall_time_ann) = build_support(x, cfg.k, cfg.r, &cfg.search)?;
    let started = Instant::now();
    let (graph, report, theta_used) = learn_on_support(&support, x, cfg)?;
    let wall_time_solve = started.elapsed().as_secs_f64();
    let stats = degree_stats(&graph);
    let graph = graph.pruned();
    let summary = LearnSummary {
        model: cfg.model,
        theta_used,
        requested_k: cfg.k,
        obtained_mean_degree: stats.mean,
        isolated_nodes: stats.isolated,
        support_edges: support.len(),
        iterations: report.iterations,
        wall_time_ann,
        wall_time_solve,
        solver: report,
    };
    Ok((graph, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub t_ann_seconds: f64,
    pub t_solve_seconds: f64,
    pub iters: usize,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "n,k,r,t_ann_seconds,t_solve_seconds,iters";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{}",
            self.n, self.k, self.r, self.t_ann_seconds, self.t_solve_seconds, self.iters
        )
    }

    pub fn seconds_per_iter(&self) -> f64 {
        self.t_solve_seconds / self.iters.max(1) as f64
    }
}

/// Times approximate neighbor search and a fixed number of log-model
/// iterations on standard Gaussian data, once per requested `n`.
pub fn bench(
    sizes: &[usize],
    d: usize,
    k: usize,
    r: usize,
    seed: u64,
    iterations: usize,
) -> Result<Vec<BenchRow>> {
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("no sizes to benchmark".into()));
    }
    let solver = SolverOptions {
        max_iter: iterations,
        // run the full iteration budget
        tol: f64::MIN_POSITIVE,
        ..SolverOptions::default()
    };
    sizes
        .iter()
        .map(|&n| {
            let x = datasets::gaussian(n, d, seed)?;
            let (support, t_ann) =
                build_support(&x, k, r, &NeighborSearch::Approx(AnnParams::with_seed(seed)))?;
            let theta = select_theta(&support, k)?;
            let scaled = support.scaled(theta);
            let (_, report) = learn_log_graph(&scaled, 1.0, 1.0, &solver)?;
            Ok(BenchRow {
                n,
                k,
                r,
                t_ann_seconds: t_ann,
                t_solve_seconds: report.wall_time,
                iters: report.iterations,
            })
        })
        .collect()
}
