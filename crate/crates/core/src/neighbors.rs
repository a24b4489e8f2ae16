//! Nearest-neighbor lists and the allowed edge support built from them.
//!
//! [`knn_exact`] is the brute-force reference. [`knn_approx`] is NN-Descent:
//! start from random lists and repeatedly join each node's neighbors with
//! each other, keeping any pair that improves either endpoint's list.
//! Distances are squared Euclidean everywhere and ties go to the lower index.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeCandidateSet, FeatureMatrix};

/// For each node, its `m` nearest other nodes as `(index, squared distance)`,
/// ascending by distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborLists {
    n: usize,
    m: usize,
    indices: Vec<usize>,
    dists: Vec<f64>,
}

impl NeighborLists {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn indices(&self, i: usize) -> &[usize] {
        &self.indices[i * self.m..(i + 1) * self.m]
    }

    pub fn dists(&self, i: usize) -> &[f64] {
        &self.dists[i * self.m..(i + 1) * self.m]
    }

    pub fn list(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices(i).iter().copied().zip(self.dists(i).iter().copied())
    }

    fn from_rows(n: usize, m: usize, rows: Vec<Vec<(f64, usize)>>) -> Self {
        let mut indices = Vec::with_capacity(n * m);
        let mut dists = Vec::with_capacity(n * m);
        for row in rows {
            debug_assert_eq!(row.len(), m);
            for (d, j) in row {
                indices.push(j);
                dists.push(d);
            }
        }
        Self {
            n,
            m,
            indices,
            dists,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnParams {
    pub max_candidates: usize,
    pub max_rounds: usize,
    pub sample_rate: f64,
    pub seed: u64,
}

impl Default for AnnParams {
    fn default() -> Self {
        Self {
            max_candidates: 50,
            max_rounds: 12,
            sample_rate: 1.0,
            seed: 42,
        }
    }
}

impl AnnParams {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_candidates == 0 || self.max_rounds == 0 {
            return Err(Error::InvalidParameter(
                "max_candidates and max_rounds must be positive".into(),
            ));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "sample_rate must lie in (0, 1], got {}",
                self.sample_rate
            )));
        }
        Ok(())
    }
}

#[inline]
fn by_dist_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn check_m(n: usize, m: usize) -> Result<()> {
    if m == 0 || m + 1 > n {
        return Err(Error::InvalidParameter(format!(
            "neighbor count {m} must lie in [1, {}]",
            n.saturating_sub(1)
        )));
    }
    Ok(())
}

/// Brute-force `m` nearest neighbors of every node.
pub fn knn_exact(x: &FeatureMatrix, m: usize) -> Result<NeighborLists> {
    let n = x.n();
    check_m(n, m)?;
    let rows: Vec<Vec<(f64, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = x.row(i);
            let mut all: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (crate::graph::sq_dist(xi, x.row(j)), j))
                .collect();
            if m < all.len() {
                all.select_nth_unstable_by(m - 1, by_dist_then_index);
                all.truncate(m);
            }
            all.sort_unstable_by(by_dist_then_index);
            all
        })
        .collect();
    Ok(NeighborLists::from_rows(n, m, rows))
}

/// One node's current neighbor list, kept sorted by `(distance, index)`.
#[derive(Clone)]
struct Pool {
    items: Vec<(f64, usize)>,
    fresh: Vec<bool>,
}

impl Pool {
    #[inline]
    fn worst(&self) -> (f64, usize) {
        *self.items.last().unwrap()
    }

    fn insert(&mut self, d: f64, j: usize) -> bool {
        let cand = (d, j);
        if by_dist_then_index(&cand, &self.worst()) != Ordering::Less {
            return false;
        }
        if self.items.iter().any(|&(_, k)| k == j) {
            return false;
        }
        let pos = self
            .items
            .partition_point(|e| by_dist_then_index(e, &cand) == Ordering::Less);
        self.items.insert(pos, cand);
        self.fresh.insert(pos, true);
        self.items.pop();
        self.fresh.pop();
        true
    }
}

const UPDATE_FRACTION: f64 = 0.001;
const JOIN_CHUNK: usize = 1024;

/// NN-Descent approximate `m` nearest neighbors.
///
/// Falls back to [`knn_exact`] when every other node fits in the candidate
/// pool. Output depends only on the data and `params.seed`, never on the
/// number of worker threads.
pub fn knn_approx(x: &FeatureMatrix, m: usize, params: &AnnParams) -> Result<NeighborLists> {
    let n = x.n();
    check_m(n, m)?;
    params.validate()?;
    if n - 1 <= params.max_candidates {
        return knn_exact(x, m);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let initial: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut picked = Vec::with_capacity(m);
            while picked.len() < m {
                let j = rng.random_range(0..n);
                if j != i && !picked.contains(&j) {
                    picked.push(j);
                }
            }
            picked
        })
        .collect();
    let mut pools: Vec<Pool> = initial
        .into_par_iter()
        .enumerate()
        .map(|(i, picked)| {
            let mut items: Vec<(f64, usize)> =
                picked.into_iter().map(|j| (x.sq_dist(i, j), j)).collect();
            items.sort_unstable_by(by_dist_then_index);
            Pool {
                items,
                fresh: vec![true; m],
            }
        })
        .collect();

    let sample_new = ((params.sample_rate * m as f64).ceil() as usize).max(1);
    let stop_below = UPDATE_FRACTION * (n * m) as f64;

    for round in 0..params.max_rounds {
        let (new_cands, old_cands) = build_candidates(&mut pools, sample_new, params, &mut rng);
        let mut updates = 0usize;
        for start in (0..n).step_by(JOIN_CHUNK) {
            let end = (start + JOIN_CHUNK).min(n);
            let thresholds: Vec<f64> = pools.iter().map(|p| p.worst().0).collect();
            let proposals: Vec<Vec<(usize, usize, f64)>> = (start..end)
                .into_par_iter()
                .map(|v| local_join(x, &new_cands[v], &old_cands[v], &thresholds))
                .collect();
            for (p, q, d) in proposals.into_iter().flatten() {
                updates += pools[p].insert(d, q) as usize;
                updates += pools[q].insert(d, p) as usize;
            }
        }
        log::debug!("nn-descent round {round}: {updates} updates");
        if (updates as f64) < stop_below {
            break;
        }
    }

    let rows = pools.into_iter().map(|p| p.items).collect();
    Ok(NeighborLists::from_rows(n, m, rows))
}

type Candidates = Vec<Vec<usize>>;

fn build_candidates(
    pools: &mut [Pool],
    sample_new: usize,
    params: &AnnParams,
    rng: &mut ChaCha8Rng,
) -> (Candidates, Candidates) {
    let n = pools.len();
    let mut new_fwd: Candidates = vec![Vec::new(); n];
    let mut old_fwd: Candidates = vec![Vec::new(); n];
    for (v, pool) in pools.iter_mut().enumerate() {
        let mut fresh: Vec<usize> = (0..pool.items.len()).filter(|&s| pool.fresh[s]).collect();
        if fresh.len() > sample_new {
            fresh.shuffle(rng);
            fresh.truncate(sample_new);
            fresh.sort_unstable();
        }
        for s in fresh {
            pool.fresh[s] = false;
            new_fwd[v].push(pool.items[s].1);
        }
        for (s, &(_, j)) in pool.items.iter().enumerate() {
            if !pool.fresh[s] && !new_fwd[v].contains(&j) {
                old_fwd[v].push(j);
            }
        }
    }
    let mut new_all = new_fwd.clone();
    let mut old_all = old_fwd.clone();
    for v in 0..n {
        for &u in &new_fwd[v] {
            new_all[u].push(v);
        }
        for &u in &old_fwd[v] {
            old_all[u].push(v);
        }
    }
    for list in new_all.iter_mut().chain(old_all.iter_mut()) {
        list.sort_unstable();
        list.dedup();
        if list.len() > params.max_candidates {
            list.shuffle(rng);
            list.truncate(params.max_candidates);
        }
    }
    (new_all, old_all)
}

fn local_join(
    x: &FeatureMatrix,
    new: &[usize],
    old: &[usize],
    thresholds: &[f64],
) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    let mut consider = |p: usize, q: usize| {
        if p == q {
            return;
        }
        let d = x.sq_dist(p, q);
        if d <= thresholds[p] || d <= thresholds[q] {
            out.push((p, q, d));
        }
    };
    for (a, &p) in new.iter().enumerate() {
        for &q in &new[a + 1..] {
            consider(p, q);
        }
        for &q in old {
            consider(p, q);
        }
    }
    out
}

/// Mean fraction of each node's exact neighbors recovered by `approx`.
pub fn mean_recall(approx: &NeighborLists, exact: &NeighborLists) -> Result<f64> {
    if approx.n() != exact.n() || approx.m() != exact.m() {
        return Err(Error::InvalidInput(
            "neighbor lists differ in shape".into(),
        ));
    }
    let n = exact.n();
    let total: usize = (0..n)
        .map(|i| {
            let truth = exact.indices(i);
            approx.indices(i).iter().filter(|j| truth.contains(j)).count()
        })
        .sum();
    Ok(total as f64 / (n * exact.m()) as f64)
}

/// Undirected edge set of a directed pair list: each pair as `(min, max)`,
/// sorted, without duplicates or self-loops.
pub fn symmetrize_pairs(directed: impl IntoIterator<Item = (usize, usize)>) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = directed
        .into_iter()
        .filter(|&(i, j)| i != j)
        .map(|(i, j)| (i.min(j), i.max(j)))
        .collect();
    pairs.par_sort_unstable();
    pairs.dedup();
    pairs
}

/// Symmetrized union of the first `k·r` neighbors of every node, with
/// distances recomputed from `x`.
///
/// When `k·r` exceeds `n − 1` the complete neighbor list is used.
pub fn build_allowed_support(
    nl: &NeighborLists,
    k: usize,
    r: usize,
    x: &FeatureMatrix,
) -> Result<EdgeCandidateSet> {
    if k == 0 || r == 0 {
        return Err(Error::InvalidParameter("k and r must be positive".into()));
    }
    if x.n() != nl.n() {
        return Err(Error::DimensionMismatch {
            expected: nl.n(),
            got: x.n(),
        });
    }
    let per_node = (k * r).min(nl.n().saturating_sub(1));
    if nl.m() < per_node {
        return Err(Error::InvalidParameter(format!(
            "neighbor lists hold {} entries, k·r = {} needed",
            nl.m(),
            per_node
        )));
    }
    let pairs = symmetrize_pairs(
        (0..nl.n()).flat_map(|i| nl.indices(i)[..per_node].iter().map(move |&j| (i, j))),
    );
    let support = EdgeCandidateSet::from_features(x, pairs)?;
    if let Some(node) = support.first_isolated() {
        return Err(Error::IsolatedNode(node));
    }
    Ok(support)
}

/// Allowed-degree summary of a support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportStats {
    pub edges: usize,
    pub min_degree: usize,
    pub mean_degree: f64,
    pub max_degree: usize,
}

pub fn support_stats(e: &EdgeCandidateSet) -> SupportStats {
    let counts = e.incident_counts();
    SupportStats {
        edges: e.len(),
        min_degree: counts.iter().copied().min().unwrap_or(0),
        mean_degree: 2.0 * e.len() as f64 / e.n().max(1) as f64,
        max_degree: counts.iter().copied().max().unwrap_or(0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(points.len(), 1, points.to_vec()).unwrap()
    }

    #[test]
    fn symmetrize_directed_pairs() {
        assert_eq!(symmetrize_pairs([(0, 1), (1, 0), (2, 1)]), [(0, 1), (1, 2)]);
        assert_eq!(symmetrize_pairs([(3, 3), (2, 0)]), [(0, 2)]);
    }

    #[test]
    fn exact_collinear() {
        let x = line(&[0.0, 1.0, 3.0]);
        let one = knn_exact(&x, 1).unwrap();
        assert_eq!(one.indices(0), [1]);
        assert_eq!(one.indices(1), [0]);
        assert_eq!(one.indices(2), [1]);
        let two = knn_exact(&x, 2).unwrap();
        assert_eq!(two.indices(0), [1, 2]);
        assert_eq!(two.indices(1), [0, 2]);
        assert_eq!(two.indices(2), [1, 0]);
        assert_eq!(two.dists(2), [4.0, 9.0]);
    }

    #[test]
    fn exact_duplicates_and_ties() {
        let x = line(&[0.0, 0.0, 5.0]);
        let nl = knn_exact(&x, 1).unwrap();
        assert_eq!(nl.list(0).collect::<Vec<_>>(), [(1, 0.0)]);
        assert_eq!(nl.list(1).collect::<Vec<_>>(), [(0, 0.0)]);
        // node 1 is equidistant from 0 and 2
        let tie = knn_exact(&line(&[0.0, 1.0, 2.0]), 1).unwrap();
        assert_eq!(tie.indices(1), [0]);
    }

    #[test]
    fn m_out_of_range() {
        let x = line(&[0.0, 1.0, 3.0]);
        assert!(knn_exact(&x, 0).is_err());
        assert!(knn_exact(&x, 3).is_err());
        assert!(knn_approx(&x, 3, &AnnParams::default()).is_err());
    }

    #[test]
    fn approx_exhaustive_regime_matches_exact() {
        let x = line(&[0.0, 1.0, 3.0, 7.0, 7.5, 12.0]);
        assert_eq!(
            knn_approx(&x, 3, &AnnParams::default()).unwrap(),
            knn_exact(&x, 3).unwrap()
        );
    }

    #[test]
    fn approx_rejects_bad_params() {
        let x = line(&[0.0, 1.0, 3.0]);
        let p = AnnParams {
            sample_rate: 0.0,
            ..AnnParams::default()
        };
        assert!(knn_approx(&x, 1, &p).is_err());
    }

    #[test]
    fn support_collinear() {
        let x = line(&[0.0, 1.0, 3.0]);
        let nl = knn_exact(&x, 1).unwrap();
        let e = build_allowed_support(&nl, 1, 1, &x).unwrap();
        assert_eq!(e.pairs(), [(0, 1), (1, 2)]);
        assert_eq!(e.z(), [1.0, 4.0]);
        let stats = support_stats(&e);
        assert_eq!((stats.min_degree, stats.max_degree), (1, 2));
    }

    #[test]
    fn support_needs_long_enough_lists() {
        let x = line(&[0.0, 1.0, 3.0, 4.0]);
        let nl = knn_exact(&x, 1).unwrap();
        assert!(build_allowed_support(&nl, 1, 2, &x).is_err());
        // k·r beyond n − 1 uses whole lists
        let full = knn_exact(&x, 3).unwrap();
        assert_eq!(build_allowed_support(&full, 2, 3, &x).unwrap().len(), 6);
    }
}
