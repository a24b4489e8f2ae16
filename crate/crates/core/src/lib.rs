//! Learning sparse weighted graphs from smooth signals at scale.
//!
//! The weights of an undirected graph are fitted so that the data vary little
//! across heavy edges, while a log barrier on the degrees keeps every node
//! connected. Optimization is restricted to the edges of an approximate
//! nearest-neighbor graph, and the single sparsity parameter is set in
//! closed form from a requested average degree.
//!
//! ```no_run
//! use smoothgraph::{datasets, pipeline};
//!
//! let x = datasets::gaussian(1000, 10, 0).unwrap();
//! let cfg = pipeline::LearnConfig { k: 10, ..Default::default() };
//! let (graph, summary) = pipeline::learn_graph(&x, &cfg).unwrap();
//! println!("{} edges, mean degree {}", graph.len(), summary.obtained_mean_degree);
//! ```

pub mod autoparam;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod neighbors;
pub mod pipeline;
pub mod solvers;

pub use error::{Error, Result};
pub use graph::{
    dirichlet_energy, pairwise_sq_dists, DegreeOperator, EdgeCandidateSet, FeatureMatrix,
    SparseWeightedGraph,
};
