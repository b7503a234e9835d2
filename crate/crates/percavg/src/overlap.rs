//! Overlap structure of path pairs and the bounds built on it.
//!
//! For two paths the shared edge set S decomposes into runs (maximal blocks
//! of consecutive shared edges). Because a simple path has maximum degree 2,
//! edges of S sharing a vertex are necessarily consecutive along either path,
//! so the run count equals the number of connected components of (V(S), S)
//! and is the same measured along either path. |V(S)| = runs + |S|.

use std::collections::{BTreeMap, HashSet};

use crate::analytic::{expected_count, ln_factorial, log_gamma_p, log_sum_exp, EventSpec};
use crate::error::{invalid_arg, Error, Result};
use crate::model::{for_each_path, Path};

/// Overlap statistics of a pair of paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlapProfile {
    /// j: number of shared edges.
    pub shared_edges: usize,
    /// i: number of runs of shared edges (components of the shared subgraph).
    pub shared_runs: usize,
    /// |V(S)|: vertices touched by a shared edge; always runs + edges.
    pub shared_vertices: usize,
}

fn norm(u: u32, v: u32) -> (u32, u32) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Overlap statistics of `a` against `b`, both on vertex set {0, .., n-1}.
/// Symmetric in its path arguments.
pub fn overlap_profile(a: &Path, b: &Path, n: usize) -> Result<OverlapProfile> {
    a.validate(n)?;
    b.validate(n)?;
    let other: HashSet<(u32, u32)> = b.edges().map(|(u, v)| norm(u, v)).collect();
    let mut shared_edges = 0usize;
    let mut shared_runs = 0usize;
    let mut verts: HashSet<u32> = HashSet::new();
    let mut in_run = false;
    for (u, v) in a.edges() {
        if other.contains(&norm(u, v)) {
            shared_edges += 1;
            verts.insert(u);
            verts.insert(v);
            if !in_run {
                shared_runs += 1;
                in_run = true;
            }
        } else {
            in_run = false;
        }
    }
    Ok(OverlapProfile {
        shared_edges,
        shared_runs,
        shared_vertices: verts.len(),
    })
}

/// Cap on n for exhaustive pair enumeration (n^(len+1) sequences per call).
pub const ENUMERATION_CAP: usize = 8;

/// Exhaustive overlap census of all ordered paths of a given length against
/// one reference path. Complete-graph symmetry makes the counts independent
/// of the reference choice.
#[derive(Debug, Clone)]
pub struct OverlapHistogram {
    pub n: usize,
    pub len: usize,
    /// (runs, shared edges) -> number of ordered paths in that class.
    pub counts: BTreeMap<(usize, usize), u64>,
    /// Ordered paths sharing no edge with the reference.
    pub disjoint: u64,
}

impl OverlapHistogram {
    /// Total ordered paths of this length: class counts plus disjoint ones.
    pub fn total(&self) -> u64 {
        self.disjoint + self.counts.values().sum::<u64>()
    }
}

/// Classifies every ordered path of `len` edges by its overlap with the
/// reference path 0-1-..-len.
pub fn enumerate_overlap_histogram(n: usize, len: usize) -> Result<OverlapHistogram> {
    if n > ENUMERATION_CAP {
        return Err(Error::CapacityExceeded { what: "n", got: n, cap: ENUMERATION_CAP });
    }
    if len == 0 || len >= n {
        return invalid_arg(format!("need 1 <= len <= n-1, got len={len}, n={n}"));
    }
    let reference: HashSet<(u32, u32)> = (0..len as u32).map(|k| (k, k + 1)).collect();
    let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut disjoint = 0u64;
    for_each_path(n, len, |seq| {
        let mut shared = 0usize;
        let mut runs = 0usize;
        let mut in_run = false;
        for w in seq.windows(2) {
            if reference.contains(&norm(w[0], w[1])) {
                shared += 1;
                if !in_run {
                    runs += 1;
                    in_run = true;
                }
            } else {
                in_run = false;
            }
        }
        if shared == 0 {
            disjoint += 1;
        } else {
            *counts.entry((runs, shared)).or_insert(0) += 1;
        }
    });
    Ok(OverlapHistogram { n, len, counts, disjoint })
}

/// Upper bounds on the number of ordered paths in one overlap class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingBound {
    /// ln of the binomial-product bound
    /// C(len+1, 2 runs) * C(n-runs-shared, len+1-runs-shared) * 2^runs * (len+1-shared)!.
    /// -inf when the class is structurally empty.
    pub log_count: f64,
    /// ln of the closed power form (len+1)^(3 runs) * n^(len+1-runs-shared),
    /// which dominates the binomial bound everywhere it is finite.
    pub log_simplified: f64,
}

fn log_choose(a: u64, b: u64) -> f64 {
    debug_assert!(b <= a);
    ln_factorial(a) - ln_factorial(b) - ln_factorial(a - b)
}

/// Bounds the size of the overlap class (runs, shared) for ordered paths of
/// `len` edges on n vertices. (0, 0) is the edge-disjoint class; otherwise
/// 1 <= runs <= shared <= len is required.
pub fn counting_bound(n: usize, len: usize, runs: usize, shared: usize) -> Result<CountingBound> {
    if len == 0 || len >= n {
        return invalid_arg(format!("need 1 <= len <= n-1, got len={len}, n={n}"));
    }
    if runs > shared {
        return invalid_arg(format!("runs {runs} cannot exceed shared edges {shared}"));
    }
    if shared > len {
        return invalid_arg(format!("shared edges {shared} cannot exceed length {len}"));
    }
    if runs == 0 && shared > 0 {
        return invalid_arg("a positive number of shared edges needs at least one run");
    }
    let verts = len + 1;
    // exponent can go negative for structurally empty classes
    let free_verts = verts as f64 - runs as f64 - shared as f64;
    let log_simplified =
        3.0 * runs as f64 * (verts as f64).ln() + free_verts * (n as f64).ln();
    // 2*runs endpoint slots must fit among the vertices, and the shared
    // vertices runs+shared must fit too; otherwise the class is empty
    if 2 * runs > verts || runs + shared > verts {
        return Ok(CountingBound { log_count: f64::NEG_INFINITY, log_simplified });
    }
    let log_count = log_choose(verts as u64, 2 * runs as u64)
        + log_choose((n - runs - shared) as u64, (verts - runs - shared) as u64)
        + runs as f64 * std::f64::consts::LN_2
        + ln_factorial((verts - shared) as u64);
    Ok(CountingBound { log_count, log_simplified })
}

/// ln of the bound on the conditional window probability for a path in the
/// overlap class (runs, shared) against a path already realizing the event:
/// the shared weight is forced up to shared*lambda - window - 2*runs*cap, so
/// the free part must satisfy
/// Gamma(scale n, shape len-shared) <= lambda*(len-shared) + window + 2*runs*cap.
pub fn conditional_overlap_bound(
    n: usize,
    spec: &EventSpec,
    runs: usize,
    shared: usize,
) -> Result<f64> {
    spec.validate(n)?;
    if !spec.trunc.is_finite() {
        return invalid_arg("conditional bound needs a finite deviation cap");
    }
    if runs == 0 || runs > shared {
        return invalid_arg(format!("need 1 <= runs <= shared, got runs={runs}, shared={shared}"));
    }
    if shared >= spec.len {
        return invalid_arg(format!(
            "shared edges {shared} must be below the length {}; the full-overlap class is surely feasible",
            spec.len
        ));
    }
    let free = (spec.len - shared) as u64;
    let z = spec.lambda * free as f64 + spec.window + 2.0 * runs as f64 * spec.trunc;
    log_gamma_p(free, z / n as f64)
}

/// ln of the overlap-pair sum relative to the expected count:
/// sum over 1 <= runs <= shared <= len of (class counting bound) *
/// (conditional window bound), divided by the expected number of event paths.
/// A value well below 0 certifies concentration of the count.
pub fn second_moment_ratio(n: usize, spec: &EventSpec, dev_prob: f64) -> Result<f64> {
    let ln_expected = expected_count(n, spec, dev_prob)?;
    let mut terms = Vec::new();
    for runs in 1..=spec.len {
        for shared in runs..=spec.len {
            let bound = counting_bound(n, spec.len, runs, shared)?;
            if bound.log_count == f64::NEG_INFINITY {
                continue;
            }
            // the full-overlap class satisfies the window for free
            let cond = if shared == spec.len {
                0.0
            } else {
                conditional_overlap_bound(n, spec, runs, shared)?
            };
            terms.push(bound.log_count + cond);
        }
    }
    Ok(log_sum_exp(&terms) - ln_expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::count_paths;
    use crate::model::exact_path_count;

    #[test]
    fn worked_pair() {
        let a = Path::new(vec![1, 2, 3, 4, 5]);
        let b = Path::new(vec![1, 2, 5, 4, 3]);
        let p = overlap_profile(&a, &b, 6).unwrap();
        assert_eq!(p.shared_edges, 3);
        assert_eq!(p.shared_runs, 2);
        assert_eq!(p.shared_vertices, 5);
    }

    #[test]
    fn profile_is_symmetric_and_satisfies_the_vertex_identity() {
        let n = 6;
        for len in 1..n {
            let reference = Path::new((0..=len as u32).collect());
            for_each_path(n, len, |seq| {
                let q = Path::new(seq.to_vec());
                let ab = overlap_profile(&reference, &q, n).unwrap();
                let ba = overlap_profile(&q, &reference, n).unwrap();
                assert_eq!(ab, ba, "asymmetric profile for {:?}", seq);
                assert_eq!(ab.shared_vertices,
                    if ab.shared_edges == 0 { 0 } else { ab.shared_runs + ab.shared_edges });
                assert!(ab.shared_runs <= ab.shared_edges);
                assert!(ab.shared_edges <= len);
            });
        }
    }

    #[test]
    fn self_overlap_is_total() {
        let p = Path::new(vec![0, 4, 2, 7]);
        let prof = overlap_profile(&p, &p, 8).unwrap();
        assert_eq!(prof.shared_edges, 3);
        assert_eq!(prof.shared_runs, 1);
        let r = p.reversed();
        assert_eq!(overlap_profile(&p, &r, 8).unwrap(), prof);
    }

    #[test]
    fn disjoint_paths() {
        let a = Path::new(vec![0, 1, 2]);
        let b = Path::new(vec![3, 4, 5]);
        let p = overlap_profile(&a, &b, 6).unwrap();
        assert_eq!(p, OverlapProfile { shared_edges: 0, shared_runs: 0, shared_vertices: 0 });
    }

    #[test]
    fn histogram_totals_and_reference_invariance() {
        for n in [5usize, 6] {
            for len in 1..n.min(5) {
                let h = enumerate_overlap_histogram(n, len).unwrap();
                assert_eq!(h.total(), exact_path_count(n, len) as u64);
                // same census against an arbitrary other reference path
                let alt: Vec<u32> = (0..=len as u32).map(|k| (n as u32 - 1) - k).collect();
                let alt = Path::new(alt);
                let mut counts: BTreeMap<(usize, usize), u64> = BTreeMap::new();
                for_each_path(n, len, |seq| {
                    let q = Path::new(seq.to_vec());
                    let p = overlap_profile(&alt, &q, n).unwrap();
                    if p.shared_edges > 0 {
                        *counts.entry((p.shared_runs, p.shared_edges)).or_insert(0) += 1;
                    }
                });
                assert_eq!(h.counts, counts, "n={n} len={len}");
            }
        }
    }

    #[test]
    fn histogram_caps() {
        assert!(matches!(
            enumerate_overlap_histogram(9, 2),
            Err(Error::CapacityExceeded { .. })
        ));
        assert!(enumerate_overlap_histogram(5, 0).is_err());
        assert!(enumerate_overlap_histogram(5, 5).is_err());
    }

    #[test]
    fn counting_bound_dominates_exhaustive_counts() {
        for n in [6usize, 7] {
            for len in 1..n.min(6) {
                let h = enumerate_overlap_histogram(n, len).unwrap();
                for (&(runs, shared), &count) in &h.counts {
                    let b = counting_bound(n, len, runs, shared).unwrap();
                    assert!(
                        (count as f64).ln() <= b.log_count + 1e-9,
                        "n={n} len={len} class ({runs},{shared}): {count} beats bound"
                    );
                    assert!(
                        b.log_count <= b.log_simplified + 1e-9,
                        "simplified form fails to dominate at n={n} len={len} ({runs},{shared})"
                    );
                }
            }
        }
    }

    #[test]
    fn disjoint_class_bound_is_the_path_count() {
        for n in [5usize, 9, 40] {
            for len in 1..n.min(6) {
                let b = counting_bound(n, len, 0, 0).unwrap();
                let direct = count_paths(n, len).unwrap();
                assert!((b.log_count - direct).abs() < 1e-10, "n={n} len={len}");
            }
        }
    }

    #[test]
    fn counting_bound_rejects_malformed_classes() {
        assert!(counting_bound(10, 4, 3, 2).is_err());
        assert!(counting_bound(10, 4, 0, 1).is_err());
        assert!(counting_bound(10, 4, 1, 5).is_err());
        assert!(counting_bound(10, 0, 0, 0).is_err());
        // structurally empty class: 2 runs need 4 endpoint slots among 3 vertices
        let b = counting_bound(10, 2, 2, 2).unwrap();
        assert_eq!(b.log_count, f64::NEG_INFINITY);
        assert!(b.log_simplified.is_finite());
    }

    #[test]
    fn conditional_bound_matches_direct_tail() {
        let n = 1000;
        let spec = EventSpec::with_cap(10, 0.4, 0.7);
        let got = conditional_overlap_bound(n, &spec, 2, 4).unwrap();
        let z = 0.4 * 6.0 + 1.0 + 2.0 * 2.0 * 0.7;
        let want = log_gamma_p(6, z / n as f64).unwrap();
        assert!((got - want).abs() < 1e-12 * want.abs());
        assert!(conditional_overlap_bound(n, &spec, 0, 3).is_err());
        assert!(conditional_overlap_bound(n, &spec, 4, 3).is_err());
        assert!(conditional_overlap_bound(n, &spec, 2, 10).is_err());
        let unbounded = EventSpec::with_cap(10, 0.4, f64::INFINITY);
        assert!(conditional_overlap_bound(n, &unbounded, 2, 4).is_err());
    }

    #[test]
    fn conditional_bound_monotone_in_runs() {
        // more runs loosen the forced shared weight, so the bound grows
        let n = 500;
        let spec = EventSpec::with_cap(12, 0.37, 0.5);
        let mut prev = f64::NEG_INFINITY;
        for runs in 1..=5 {
            let v = conditional_overlap_bound(n, &spec, runs, 6).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn ratio_scales_inversely_with_dev_prob() {
        let n = 1_000_000usize;
        let lambda = 1.0 / std::f64::consts::E - 1.0 / (n as f64).ln().powi(2);
        let spec = EventSpec::with_tenth_log_cap(2, lambda, n);
        let r1 = second_moment_ratio(n, &spec, 1.0).unwrap();
        let r2 = second_moment_ratio(n, &spec, 0.01).unwrap();
        // numerator is dev-independent, so the gap is exactly ln 100
        assert!((r2 - r1 - 100f64.ln()).abs() < 1e-9);
        assert!(r1 < 0.0 && r2 < 0.0, "ratio not small: {r1} {r2}");
        assert!(r1 > (1e-6f64).ln() && r2 < (1.0f64).ln());
    }

    #[test]
    fn ratio_includes_the_full_overlap_class() {
        // at tiny n the (1, len) class dominates; the ratio must stay finite
        let spec = EventSpec::with_cap(3, 0.5, 0.4);
        let r = second_moment_ratio(30, &spec, 1.0).unwrap();
        assert!(r.is_finite());
    }
}
