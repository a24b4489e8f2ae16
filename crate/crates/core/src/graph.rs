//! Shared data types: feature matrices, candidate edge supports, learned
//! graphs, and the degree operator that maps once-stored edge weights to node
//! degrees.
//!
//! Every undirected edge is stored exactly once as `(i, j)` with `i < j`.
//! Under that convention `‖W∘Z‖₁,₁ = 2 wᵀz` and `‖W‖_F² = 2 ‖w‖²`, which is
//! where the factors of two in the solver objectives come from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `n` samples of `d` features, stored row-major. Row `i` is the signal at node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "feature matrix must be non-empty, got {n}x{d}"
            )));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(n, d, data)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Squared Euclidean distance between rows `i` and `j`.
    #[inline]
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.row(i), self.row(j))
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x - y;
            t * t
        })
        .sum()
}

fn check_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<()> {
    for &(i, j) in pairs {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, n });
        }
    }
    Ok(())
}

/// Squared Euclidean distance for every requested pair of rows.
///
/// Each distance is reduced sequentially over features, so the result is
/// bit-identical whatever the size of the thread pool.
pub fn pairwise_sq_dists(x: &FeatureMatrix, pairs: &[(usize, usize)]) -> Result<Vec<f64>> {
    check_pairs(x.n(), pairs)?;
    Ok(pairs.par_iter().map(|&(i, j)| x.sq_dist(i, j)).collect())
}

/// The allowed edge support together with the squared distance of each edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCandidateSet {
    n: usize,
    pairs: Vec<(usize, usize)>,
    z: Vec<f64>,
}

impl EdgeCandidateSet {
    /// Pairs must be canonical (`i < j`) and unique; distances non-negative and finite.
    pub fn new(n: usize, pairs: Vec<(usize, usize)>, z: Vec<f64>) -> Result<Self> {
        if pairs.len() != z.len() {
            return Err(Error::DimensionMismatch {
                expected: pairs.len(),
                got: z.len(),
            });
        }
        check_pairs(n, &pairs)?;
        if let Some(&(i, j)) = pairs.iter().find(|(i, j)| i >= j) {
            return Err(Error::InvalidInput(format!(
                "edge ({i}, {j}) is not in canonical i < j order"
            )));
        }
        if let Some(pos) = z.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        if let Some(pos) = z.iter().position(|&v| v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "negative squared distance at edge {pos}"
            )));
        }
        let mut sorted = pairs.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Ok(Self { n, pairs, z })
    }

    /// Builds the support from pairs and computes distances from `x`.
    pub fn from_features(x: &FeatureMatrix, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let z = pairwise_sq_dists(x, &pairs)?;
        Self::new(x.n(), pairs, z)
    }

    /// Every pair `i < j`. Quadratic in `n`; intended for small problems and oracles.
    pub fn complete(x: &FeatureMatrix) -> Result<Self> {
        let n = x.n();
        let pairs: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::from_features(x, pairs)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Same support with every distance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            pairs: self.pairs.clone(),
            z: self.z.iter().map(|v| v * factor).collect(),
        }
    }

    /// Number of candidate edges touching each node.
    pub fn incident_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n];
        for &(i, j) in &self.pairs {
            counts[i] += 1;
            counts[j] += 1;
        }
        counts
    }

    /// For every node, the distances of its incident candidate edges.
    pub fn incident_distances(&self) -> Vec<Vec<f64>> {
        let mut cols: Vec<Vec<f64>> = self
            .incident_counts()
            .into_iter()
            .map(Vec::with_capacity)
            .collect();
        for (&(i, j), &z) in self.pairs.iter().zip(&self.z) {
            cols[i].push(z);
            cols[j].push(z);
        }
        cols
    }

    /// First node without an incident edge, if any.
    pub fn first_isolated(&self) -> Option<usize> {
        self.incident_counts().iter().position(|&c| c == 0)
    }
}

/// A learned symmetric non-negative adjacency, stored as an upper-triangular edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseWeightedGraph {
    n: usize,
    pairs: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

impl SparseWeightedGraph {
    pub fn new(n: usize, pairs: Vec<(usize, usize)>, weights: Vec<f64>) -> Result<Self> {
        if pairs.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: pairs.len(),
                got: weights.len(),
            });
        }
        check_pairs(n, &pairs)?;
        if let Some(&(i, j)) = pairs.iter().find(|(i, j)| i >= j) {
            return Err(Error::InvalidInput(format!(
                "edge ({i}, {j}) is not in canonical i < j order"
            )));
        }
        if let Some(pos) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        if let Some(pos) = weights.iter().position(|&w| w < 0.0) {
            return Err(Error::InvalidInput(format!("negative weight at edge {pos}")));
        }
        Ok(Self { n, pairs, weights })
    }

    pub(crate) fn from_parts_unchecked(
        n: usize,
        pairs: Vec<(usize, usize)>,
        weights: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(pairs.len(), weights.len());
        Self { n, pairs, weights }
    }

    /// Weights laid over the edges of a candidate support.
    pub fn on_support(support: &EdgeCandidateSet, weights: Vec<f64>) -> Result<Self> {
        Self::new(support.n(), support.pairs().to_vec(), weights)
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            pairs: Vec::new(),
            weights: Vec::new(),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.pairs
            .iter()
            .zip(&self.weights)
            .map(|(&(i, j), &w)| (i, j, w))
    }

    /// Weighted degrees `W·1`.
    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n];
        for (i, j, w) in self.iter() {
            deg[i] += w;
            deg[j] += w;
        }
        deg
    }

    /// `‖W‖₁,₁` of the symmetric matrix, i.e. twice the stored weight sum.
    pub fn l11_norm(&self) -> f64 {
        2.0 * self.weights.iter().sum::<f64>()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            n: self.n,
            pairs: self.pairs.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }

    /// Drops edges whose weight is not strictly positive.
    pub fn pruned(&self) -> Self {
        let (pairs, weights) = self.iter().filter(|e| e.2 > 0.0).map(|(i, j, w)| ((i, j), w)).unzip();
        Self {
            n: self.n,
            pairs,
            weights,
        }
    }

    /// Symmetric adjacency in compressed rows: `(offsets, neighbors, weights)`.
    pub fn adjacency(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut offsets = vec![0usize; self.n + 1];
        for &(i, j) in &self.pairs {
            offsets[i + 1] += 1;
            offsets[j + 1] += 1;
        }
        for i in 0..self.n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut nbrs = vec![0usize; offsets[self.n]];
        let mut wts = vec![0.0; offsets[self.n]];
        for (i, j, w) in self.iter() {
            nbrs[fill[i]] = j;
            wts[fill[i]] = w;
            fill[i] += 1;
            nbrs[fill[j]] = i;
            wts[fill[j]] = w;
            fill[j] += 1;
        }
        (offsets, nbrs, wts)
    }
}

/// The map `S` from once-stored edge weights to node degrees, restricted to a
/// support. `Sᵀ` sends a node vector `v` to `v_i + v_j` on every edge.
#[derive(Debug, Clone)]
pub struct DegreeOperator {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl DegreeOperator {
    pub fn new(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        check_pairs(n, pairs)?;
        Ok(Self {
            n,
            pairs: pairs.to_vec(),
        })
    }

    pub fn from_support(support: &EdgeCandidateSet) -> Self {
        Self {
            n: support.n(),
            pairs: support.pairs().to_vec(),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.pairs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.pairs.len(),
                got: w.len(),
            });
        }
        let mut out = vec![0.0; self.n];
        self.apply_into(w, &mut out);
        Ok(out)
    }

    pub fn adjoint(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; self.pairs.len()];
        self.adjoint_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&(i, j), &we) in self.pairs.iter().zip(w) {
            out[i] += we;
            out[j] += we;
        }
    }

    pub(crate) fn adjoint_into(&self, v: &[f64], out: &mut [f64]) {
        for (o, &(i, j)) in out.iter_mut().zip(&self.pairs) {
            *o = v[i] + v[j];
        }
    }

    /// Largest number of support edges touching one node.
    pub fn max_degree(&self) -> usize {
        let mut counts = vec![0usize; self.n];
        for &(i, j) in &self.pairs {
            counts[i] += 1;
            counts[j] += 1;
        }
        counts.into_iter().max().unwrap_or(0)
    }

    /// Spectral norm `‖S‖₂` by power iteration on `S Sᵀ`.
    ///
    /// At most 100 iterations, stopping once the Rayleigh quotient moves by
    /// less than `1e-6` relative. The start vector is drawn from a fixed seed
    /// and is strictly positive, so it is never orthogonal to the Perron
    /// vector. The result is capped at `√(2·max degree)`.
    pub fn norm_estimate(&self) -> Result<f64> {
        if self.pairs.is_empty() {
            return Err(Error::EmptySupport);
        }
        let bound = 2.0 * self.max_degree() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0f05);
        let mut x: Vec<f64> = (0..self.n).map(|_| rng.random_range(0.5..1.5)).collect();
        normalize(&mut x);
        let mut edge_buf = vec![0.0; self.pairs.len()];
        let mut node_buf = vec![0.0; self.n];
        let mut lambda = 0.0f64;
        for _ in 0..100 {
            self.adjoint_into(&x, &mut edge_buf);
            let rayleigh: f64 = edge_buf.iter().map(|v| v * v).sum();
            self.apply_into(&edge_buf, &mut node_buf);
            let converged = (rayleigh - lambda).abs() < 1e-6 * rayleigh;
            lambda = rayleigh;
            if converged {
                break;
            }
            x.copy_from_slice(&node_buf);
            if normalize(&mut x) == 0.0 {
                break;
            }
        }
        Ok(lambda.min(bound).sqrt())
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    }
    norm
}

/// `½ Σᵢⱼ Wᵢⱼ ‖xᵢ − xⱼ‖² = tr(XᵀLX)`, summed once per stored edge.
pub fn dirichlet_energy(x: &FeatureMatrix, w: &SparseWeightedGraph) -> Result<f64> {
    if x.n() != w.n() {
        return Err(Error::DimensionMismatch {
            expected: x.n(),
            got: w.n(),
        });
    }
    Ok(w.iter().map(|(i, j, we)| we * x.sq_dist(i, j)).sum())
}
