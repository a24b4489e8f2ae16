//! Graph quality metrics: relative ℓ1 distance between graphs, class
//! connectivity, hop diameter, label propagation and degree statistics.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{EdgeCandidateSet, SparseWeightedGraph};

/// Per-node class ids; `None` marks an unknown label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelVector {
    labels: Vec<Option<u32>>,
}

impl LabelVector {
    pub fn new(labels: Vec<Option<u32>>) -> Self {
        Self { labels }
    }

    pub fn fully_known(labels: &[u32]) -> Self {
        Self {
            labels: labels.iter().copied().map(Some).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Option<u32>] {
        &self.labels
    }

    pub fn get(&self, i: usize) -> Option<u32> {
        self.labels[i]
    }

    pub fn known_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    /// Distinct known classes, ascending.
    pub fn classes(&self) -> Vec<u32> {
        let mut c: Vec<u32> = self.labels.iter().flatten().copied().collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    /// Keeps `round(fraction·n)` labels (at least one) chosen uniformly at
    /// random; the rest become unknown.
    pub fn masked(&self, fraction: f64, seed: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "labeled fraction must lie in (0, 1], got {fraction}"
            )));
        }
        let n = self.n();
        let keep = ((fraction * n as f64).round() as usize).clamp(1, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels = vec![None; n];
        for i in sample(&mut rng, n, keep) {
            labels[i] = self.labels[i];
        }
        Ok(Self { labels })
    }
}

/// `‖A − B‖₁,₁ / ‖B‖₁,₁` over the union of both edge sets.
pub fn rel_l1_error(a: &SparseWeightedGraph, b: &SparseWeightedGraph) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: b.n(),
            got: a.n(),
        });
    }
    let reference: f64 = b.weights().iter().map(|w| w.abs()).sum();
    if reference == 0.0 {
        return Err(Error::InvalidInput("reference graph has zero weight".into()));
    }
    let mut b_map: HashMap<(usize, usize), f64> = b.iter().map(|(i, j, w)| ((i, j), w)).collect();
    let mut diff = 0.0;
    for (i, j, w) in a.iter() {
        let other = b_map.remove(&(i, j)).unwrap_or(0.0);
        diff += (w - other).abs();
    }
    diff += b_map.values().map(|w| w.abs()).sum::<f64>();
    Ok(diff / reference)
}

/// Share of the total weight on intra-class edges per class, plus the share
/// on edges joining different classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectivityHistogram {
    pub per_class: BTreeMap<u32, f64>,
    pub wrong: f64,
}

pub fn connectivity_histogram(
    w: &SparseWeightedGraph,
    labels: &LabelVector,
) -> Result<ConnectivityHistogram> {
    if labels.n() != w.n() {
        return Err(Error::DimensionMismatch {
            expected: w.n(),
            got: labels.n(),
        });
    }
    if let Some(node) = labels.labels().iter().position(Option::is_none) {
        return Err(Error::InvalidInput(format!("node {node} is unlabeled")));
    }
    let total: f64 = w.weights().iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput("graph has zero total weight".into()));
    }
    let mut per_class: BTreeMap<u32, f64> = labels.classes().into_iter().map(|c| (c, 0.0)).collect();
    let mut wrong = 0.0;
    for (i, j, wij) in w.iter() {
        let (a, b) = (labels.labels[i].unwrap(), labels.labels[j].unwrap());
        if a == b {
            *per_class.get_mut(&a).unwrap() += wij / total;
        } else {
            wrong += wij / total;
        }
    }
    Ok(ConnectivityHistogram { per_class, wrong })
}

/// Connected components of the binarized graph (`w > 0`); returns a
/// component id per node, ids assigned in order of lowest member.
fn components(offsets: &[usize], nbrs: &[usize], wts: &[f64]) -> (Vec<usize>, usize) {
    let n = offsets.len() - 1;
    let mut comp = vec![usize::MAX; n];
    let mut count = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if comp[start] != usize::MAX {
            continue;
        }
        comp[start] = count;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for k in offsets[u]..offsets[u + 1] {
                let v = nbrs[k];
                if wts[k] > 0.0 && comp[v] == usize::MAX {
                    comp[v] = count;
                    queue.push_back(v);
                }
            }
        }
        count += 1;
    }
    (comp, count)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DiameterReport {
    /// Hop diameter of the largest component.
    pub diameter: usize,
    pub components: usize,
    pub largest_component: usize,
}

/// Unweighted hop diameter of the largest connected component (edges with
/// `w > 0`), by a breadth-first search from each of its nodes.
pub fn graph_diameter(w: &SparseWeightedGraph) -> DiameterReport {
    let n = w.n();
    if n == 0 {
        return DiameterReport {
            diameter: 0,
            components: 0,
            largest_component: 0,
        };
    }
    let (offsets, nbrs, wts) = w.adjacency();
    let (comp, count) = components(&offsets, &nbrs, &wts);
    let mut sizes = vec![0usize; count];
    comp.iter().for_each(|&c| sizes[c] += 1);
    let (largest, &size) = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .unwrap();
    let members: Vec<usize> = (0..n).filter(|&i| comp[i] == largest).collect();
    let diameter = members
        .par_iter()
        .map_init(
            || (vec![usize::MAX; n], VecDeque::new()),
            |(dist, queue), &src| {
                dist.iter_mut().for_each(|d| *d = usize::MAX);
                dist[src] = 0;
                queue.clear();
                queue.push_back(src);
                let mut ecc = 0;
                while let Some(u) = queue.pop_front() {
                    ecc = ecc.max(dist[u]);
                    for k in offsets[u]..offsets[u + 1] {
                        let v = nbrs[k];
                        if wts[k] > 0.0 && dist[v] == usize::MAX {
                            dist[v] = dist[u] + 1;
                            queue.push_back(v);
                        }
                    }
                }
                ecc
            },
        )
        .max()
        .unwrap_or(0);
    DiameterReport {
        diameter,
        components: count,
        largest_component: size,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Propagation {
    /// Known labels are kept; nodes in components without any known label stay `None`.
    pub predicted: LabelVector,
    pub unclassifiable: usize,
    pub sweeps: usize,
}

const PROPAGATION_TOL: f64 = 1e-6;
const PROPAGATION_MAX_SWEEPS: usize = 10_000;

/// Harmonic label propagation with clamped known labels.
///
/// One indicator column per class; unknown nodes are updated in place in
/// node order, `f_u ← (W f)_u / d_u`, until the largest change in a sweep
/// drops below `1e-6` or 10 000 sweeps have run. Prediction is the argmax
/// column, ties to the lower class id.
pub fn label_propagation(w: &SparseWeightedGraph, labels: &LabelVector) -> Result<Propagation> {
    if labels.n() != w.n() {
        return Err(Error::DimensionMismatch {
            expected: w.n(),
            got: labels.n(),
        });
    }
    if labels.known_count() == 0 {
        return Err(Error::InvalidInput("no known labels".into()));
    }
    let n = w.n();
    let classes = labels.classes();
    let c = classes.len();
    let class_pos: HashMap<u32, usize> = classes.iter().enumerate().map(|(p, &k)| (k, p)).collect();
    let (offsets, nbrs, wts) = w.adjacency();
    let (comp, count) = components(&offsets, &nbrs, &wts);
    let mut seeded = vec![false; count];
    for (i, l) in labels.labels().iter().enumerate() {
        if l.is_some() {
            seeded[comp[i]] = true;
        }
    }

    let mut f = vec![0.0; n * c];
    for (i, l) in labels.labels().iter().enumerate() {
        if let Some(k) = l {
            f[i * c + class_pos[k]] = 1.0;
        }
    }
    let free: Vec<usize> = (0..n)
        .filter(|&i| labels.get(i).is_none() && seeded[comp[i]])
        .collect();
    let degree: Vec<f64> = (0..n)
        .map(|u| wts[offsets[u]..offsets[u + 1]].iter().sum())
        .collect();

    let mut row = vec![0.0; c];
    let mut sweeps = 0;
    while sweeps < PROPAGATION_MAX_SWEEPS && !free.is_empty() {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for &u in &free {
            row.iter_mut().for_each(|r| *r = 0.0);
            for k in offsets[u]..offsets[u + 1] {
                let v = nbrs[k];
                for (r, fv) in row.iter_mut().zip(&f[v * c..(v + 1) * c]) {
                    *r += wts[k] * fv;
                }
            }
            for (t, r) in row.iter().enumerate() {
                let new = r / degree[u];
                max_change = max_change.max((new - f[u * c + t]).abs());
                f[u * c + t] = new;
            }
        }
        if max_change < PROPAGATION_TOL {
            break;
        }
    }

    let mut predicted = labels.labels().to_vec();
    for &u in &free {
        let scores = &f[u * c..(u + 1) * c];
        let best = (0..c).fold(0, |b, t| if scores[t] > scores[b] { t } else { b });
        predicted[u] = Some(classes[best]);
    }
    let unclassifiable = predicted.iter().filter(|p| p.is_none()).count();
    Ok(Propagation {
        predicted: LabelVector::new(predicted),
        unclassifiable,
        sweeps,
    })
}

/// Fraction of `nodes` whose prediction differs from the truth; unclassified
/// nodes count as errors.
pub fn classification_error(predicted: &LabelVector, truth: &[u32], nodes: &[usize]) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let wrong = nodes
        .iter()
        .filter(|&&i| predicted.get(i) != Some(truth[i]))
        .count();
    wrong as f64 / nodes.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeStats {
    pub mean: f64,
    pub min: usize,
    pub max: usize,
    pub isolated: usize,
}

/// Unweighted degree summary, counting edges with `w > 0`.
pub fn degree_stats(w: &SparseWeightedGraph) -> DegreeStats {
    let n = w.n();
    let mut deg = vec![0usize; n];
    let mut positive = 0usize;
    for (i, j, wij) in w.iter() {
        if wij > 0.0 {
            deg[i] += 1;
            deg[j] += 1;
            positive += 1;
        }
    }
    DegreeStats {
        mean: if n == 0 { 0.0 } else { 2.0 * positive as f64 / n as f64 },
        min: deg.iter().copied().min().unwrap_or(0),
        max: deg.iter().copied().max().unwrap_or(0),
        isolated: deg.iter().filter(|&&d| d == 0).count(),
    }
}

/// `w = exp(−z/σ²)` on every candidate edge.
pub fn exponential_weights(e: &EdgeCandidateSet, sigma2: f64) -> Result<SparseWeightedGraph> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma2 must be positive, got {sigma2}")));
    }
    SparseWeightedGraph::on_support(e, e.z().iter().map(|z| (-z / sigma2).exp()).collect())
}
