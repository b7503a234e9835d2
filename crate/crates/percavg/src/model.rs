//! The mean-field distance model: the complete graph on `n` vertices with
//! independent exponential edge weights of mean `edge_mean` (default `n`).
//!
//! Instances are defined entirely by `(n, edge_mean, seed)`. Each edge owns a
//! counter in row-major order over pairs `u < v`, and its weight is a pure
//! function of `(seed, counter)`, so regeneration is bit-identical whether
//! weights are materialized up front or recomputed on demand.

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, invalid_path, Result};
use crate::rng::exp_at;

/// Above this the dense triangle is not materialized; weights are recomputed
/// from the seed on every access (bit-identical to the dense table).
pub const DENSE_LIMIT: usize = 10_000;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageMode {
    /// Dense when `n <= DENSE_LIMIT`, on-demand above.
    Auto,
    Dense,
    OnDemand,
}

#[derive(Debug, Clone)]
enum Weights {
    /// Upper triangle, row-major over pairs u < v.
    Dense(Vec<f64>),
    /// Recomputed from the seed per access.
    OnDemand,
    /// Explicit table for synthetic instances (tests, hand examples); such an
    /// instance has no generating seed and cannot be serialized as a header.
    Explicit(Vec<f64>),
}

/// A weighted instance of the model.
#[derive(Debug, Clone)]
pub struct Instance {
    n: usize,
    edge_mean: f64,
    seed: u64,
    weights: Weights,
}

/// Serialized form: weights are never stored, always regenerated from the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceHeader {
    pub format_version: u32,
    pub n: usize,
    pub edge_mean: f64,
    pub seed: u64,
}

#[inline]
fn tri_len(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Row-major index of the pair (u, v), u < v.
#[inline]
fn edge_index(n: usize, u: usize, v: usize) -> usize {
    debug_assert!(u < v && v < n);
    u * (2 * n - u - 1) / 2 + (v - u - 1)
}

impl Instance {
    /// Generates the instance for `(n, edge_mean, seed)`.
    ///
    /// Errors: `n < 2` or a non-positive/non-finite mean.
    pub fn generate(n: usize, edge_mean: f64, seed: u64) -> Result<Instance> {
        Instance::generate_with_storage(n, edge_mean, seed, StorageMode::Auto)
    }

    pub fn generate_with_storage(
        n: usize,
        edge_mean: f64,
        seed: u64,
        mode: StorageMode,
    ) -> Result<Instance> {
        if n < 2 {
            return invalid_arg(format!("instance needs n >= 2, got {n}"));
        }
        if !(edge_mean > 0.0) || !edge_mean.is_finite() {
            return invalid_arg(format!("edge_mean must be positive and finite, got {edge_mean}"));
        }
        let dense = match mode {
            StorageMode::Auto => n <= DENSE_LIMIT,
            StorageMode::Dense => true,
            StorageMode::OnDemand => false,
        };
        let weights = if dense {
            let m = tri_len(n);
            let mut w = Vec::with_capacity(m);
            for idx in 0..m {
                w.push(exp_at(seed, idx as u64, edge_mean));
            }
            Weights::Dense(w)
        } else {
            Weights::OnDemand
        };
        Ok(Instance { n, edge_mean, seed, weights })
    }

    /// Builds a synthetic instance from an explicit upper triangle
    /// (row-major over u < v). Not serializable as a header.
    pub fn from_weights(n: usize, edge_mean: f64, upper_triangle: Vec<f64>) -> Result<Instance> {
        if n < 2 {
            return invalid_arg(format!("instance needs n >= 2, got {n}"));
        }
        if upper_triangle.len() != tri_len(n) {
            return invalid_arg(format!(
                "expected {} weights for n = {n}, got {}",
                tri_len(n),
                upper_triangle.len()
            ));
        }
        if upper_triangle.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return invalid_arg("weights must be finite and nonnegative");
        }
        Ok(Instance { n, edge_mean, seed: 0, weights: Weights::Explicit(upper_triangle) })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edge_mean(&self) -> f64 {
        self.edge_mean
    }

    #[inline]
    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_synthetic(&self) -> bool {
        matches!(self.weights, Weights::Explicit(_))
    }

    /// Weight of the edge {u, v}. Requires u != v, both below n.
    #[inline]
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        assert!(u != v && u < self.n && v < self.n, "edge ({u},{v}) out of range");
        let (a, b) = if u < v { (u, v) } else { (v, u) };
        match &self.weights {
            Weights::Dense(w) | Weights::Explicit(w) => w[edge_index(self.n, a, b)],
            Weights::OnDemand => {
                exp_at(self.seed, edge_index(self.n, a, b) as u64, self.edge_mean)
            }
        }
    }

    pub fn header(&self) -> Result<InstanceHeader> {
        if self.is_synthetic() {
            return invalid_arg("synthetic instances have no generating seed to serialize");
        }
        Ok(InstanceHeader {
            format_version: FORMAT_VERSION,
            n: self.n,
            edge_mean: self.edge_mean,
            seed: self.seed,
        })
    }

    pub fn from_header(h: &InstanceHeader) -> Result<Instance> {
        if h.format_version != FORMAT_VERSION {
            return invalid_arg(format!(
                "unsupported format_version {} (supported: {FORMAT_VERSION})",
                h.format_version
            ));
        }
        Instance::generate(h.n, h.edge_mean, h.seed)
    }
}

/// An ordered simple path, stored as its vertex sequence.
/// Valid iff all vertices are distinct, in range, and there is at least one edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Path {
    pub vertices: Vec<u32>,
}

impl Path {
    pub fn new(vertices: Vec<u32>) -> Path {
        Path { vertices }
    }

    /// Number of edges.
    #[inline]
    pub fn len(&self) -> usize {
        self.vertices.len().saturating_sub(1)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn reversed(&self) -> Path {
        let mut v = self.vertices.clone();
        v.reverse();
        Path { vertices: v }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.vertices.len() < 2 {
            return invalid_path("a path needs at least one edge");
        }
        if self.vertices.len() > n {
            return invalid_path(format!(
                "{} vertices cannot be distinct with n = {n}",
                self.vertices.len()
            ));
        }
        let mut seen = vec![false; n];
        for &v in &self.vertices {
            let v = v as usize;
            if v >= n {
                return invalid_path(format!("vertex {v} out of range for n = {n}"));
            }
            if seen[v] {
                return invalid_path(format!("vertex {v} repeats"));
            }
            seen[v] = true;
        }
        Ok(())
    }

    /// Edge list as ordered pairs of endpoints.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.vertices.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Weight profile of a path through an instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathStats {
    /// Sum of edge weights.
    pub total_weight: f64,
    /// Largest absolute gap between a prefix sum and its linear interpolation,
    /// max over k = 1..len of |sum of first k weights - (k/len) * total|.
    pub max_abs_deviation: f64,
    /// Smallest k (1-based) attaining `max_abs_deviation`.
    pub argmax_k: usize,
}

/// Total weight of a path. Validates the path first.
pub fn path_weight(inst: &Instance, path: &Path) -> Result<f64> {
    path.validate(inst.n())?;
    Ok(path
        .edges()
        .map(|(u, v)| inst.weight(u as usize, v as usize))
        .sum())
}

/// Weight, deviation, and deviation location of a path. Validates the path.
pub fn path_stats(inst: &Instance, path: &Path) -> Result<PathStats> {
    path.validate(inst.n())?;
    let weights: Vec<f64> = path
        .edges()
        .map(|(u, v)| inst.weight(u as usize, v as usize))
        .collect();
    Ok(stats_of_weights(&weights))
}

/// Stats of an explicit edge-weight sequence (the path-independent core of
/// `path_stats`; also the natural unit for scale-equivariance properties).
pub fn stats_of_weights(weights: &[f64]) -> PathStats {
    let len = weights.len();
    assert!(len >= 1);
    let total: f64 = weights.iter().sum();
    let mut prefix = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut best_k = 1;
    for (i, w) in weights.iter().enumerate() {
        prefix += w;
        let k = i + 1;
        let dev = (prefix - (k as f64 / len as f64) * total).abs();
        if dev > best {
            best = dev;
            best_k = k;
        }
    }
    PathStats { total_weight: total, max_abs_deviation: best, argmax_k: best_k }
}

/// Calls `f` on every ordered simple path with exactly `len` edges in the
/// complete graph on `n` vertices. Exhaustive; meant for small n.
pub fn for_each_path(n: usize, len: usize, mut f: impl FnMut(&[u32])) {
    assert!(len >= 1 && len < n, "need 1 <= len < n");
    let mut stack: Vec<u32> = Vec::with_capacity(len + 1);
    let mut used = vec![false; n];
    fn rec(
        n: usize,
        len: usize,
        stack: &mut Vec<u32>,
        used: &mut [bool],
        f: &mut impl FnMut(&[u32]),
    ) {
        if stack.len() == len + 1 {
            f(stack);
            return;
        }
        for v in 0..n {
            if !used[v] {
                used[v] = true;
                stack.push(v as u32);
                rec(n, len, stack, used, f);
                stack.pop();
                used[v] = false;
            }
        }
    }
    rec(n, len, &mut stack, &mut used, &mut f);
}

/// Exact count of ordered simple paths with `len` edges: n(n-1)...(n-len).
/// Test-scale helper; overflows are the caller's concern (use small n).
pub fn exact_path_count(n: usize, len: usize) -> u128 {
    (0..=len).map(|i| (n - i) as u128).product()
}

impl std::fmt::Display for Path {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: Vec<String> = self.vertices.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", s.join("-"))
    }
}
