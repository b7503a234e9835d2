//! Exhaustive cross-check suites behind the CLI `verify` subcommand.
//!
//! Each suite compares public functions against independent in-module
//! recomputations: bitmask edge sets and integer-exact bounds for the overlap
//! census, direct re-summation for split pieces, and full path enumeration
//! for the solver. Failures carry counterexample paths in the detail string.

use rayon::prelude::*;

use crate::error::{invalid_arg, Error, Result};
use crate::model::{exact_path_count, for_each_path, path_stats, Instance, Path};
use crate::overlap::{counting_bound, enumerate_overlap_histogram, overlap_profile, ENUMERATION_CAP};
use crate::rng::{derive_seed, Rng64};
use crate::solver::{exact_l, min_weight_per_length, split_witness};

/// One row of the verification pass/fail table.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn factorial_u128(k: usize) -> u128 {
    (1..=k as u128).product()
}

fn choose_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut r: u128 = 1;
    // r * (n - t) is always divisible by t + 1 (t+1 consecutive integers)
    for t in 0..k {
        r = r * (n - t) / (t + 1);
    }
    r
}

/// Integer value of the binomial-product class bound; 0 for structurally
/// empty classes. Exact arithmetic, no floats.
pub fn binomial_bound_exact(n: usize, len: usize, runs: usize, shared: usize) -> u128 {
    let lp = len + 1;
    if 2 * runs > lp || runs + shared > lp || n < runs + shared {
        return 0;
    }
    choose_u128(lp, 2 * runs)
        * choose_u128(n - runs - shared, lp - runs - shared)
        * (1u128 << runs)
        * factorial_u128(lp - shared)
}

/// Outcome of the all-ordered-pairs overlap census at one (n, len).
#[derive(Debug, Clone)]
pub struct PairCensus {
    pub n: usize,
    pub len: usize,
    /// Ordered pairs examined (every path serves as reference once).
    pub pairs: u128,
    /// shared vertex count = shared edges + runs, on every pair.
    pub identity_ok: bool,
    /// runs <= shared edges on every pair.
    pub ordering_ok: bool,
    /// Per-reference class counts sum to the number of ordered paths.
    pub totals_ok: bool,
    /// Every class count <= the integer binomial bound, per reference.
    pub bounds_ok: bool,
    /// Sampled agreement between the public overlap functions and the
    /// census's independent bitmask computation.
    pub public_ok: bool,
    pub first_failure: Option<String>,
}

impl PairCensus {
    pub fn all_ok(&self) -> bool {
        self.identity_ok && self.ordering_ok && self.totals_ok && self.bounds_ok && self.public_ok
    }
}

fn fmt_seq(seq: &[u32]) -> String {
    let parts: Vec<String> = seq.iter().map(|v| v.to_string()).collect();
    parts.join("-")
}

/// Enumerates every ordered pair of simple `len`-edge paths in the complete
/// graph on n vertices and checks the overlap identities, the class-count
/// partition, and the integer counting bounds with zero tolerance.
///
/// Edge sets live in u64 bitmasks (edge id u*n+v, u < v) and shared-vertex
/// counts are recomputed from the masks, independently of the overlap module;
/// the public functions are cross-checked on a deterministic sample of pairs.
pub fn census_pairs(n: usize, len: usize) -> Result<PairCensus> {
    if n > ENUMERATION_CAP {
        return Err(Error::CapacityExceeded { what: "n", got: n, cap: ENUMERATION_CAP });
    }
    if n < 2 || len == 0 || len >= n {
        return invalid_arg(format!("need n >= 2 and 1 <= len <= n-1, got n={n}, len={len}"));
    }
    let mut paths: Vec<Vec<u32>> = Vec::new();
    for_each_path(n, len, |seq| paths.push(seq.to_vec()));
    let count = paths.len();
    if count as u128 != exact_path_count(n, len) {
        return invalid_arg("path enumeration does not match the closed-form count");
    }
    let edge_id = |a: u32, b: u32| -> u32 {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        lo * n as u32 + hi
    };
    // per-path edge bitmask and the ordered edge-id list
    let masks: Vec<u64> = paths
        .iter()
        .map(|p| p.windows(2).fold(0u64, |m, w| m | 1u64 << edge_id(w[0], w[1])))
        .collect();
    let id_lists: Vec<Vec<u32>> = paths
        .iter()
        .map(|p| p.windows(2).map(|w| edge_id(w[0], w[1])).collect())
        .collect();

    let mut bounds = vec![vec![0u128; len + 1]; len + 1];
    for (i, row) in bounds.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = binomial_bound_exact(n, len, i, j);
        }
    }

    struct RefOutcome {
        identity_bad: u64,
        ordering_bad: u64,
        total_bad: bool,
        bound_bad: u64,
        public_bad: u64,
        failure: Option<String>,
    }

    let outcomes: Vec<RefOutcome> = (0..count)
        .into_par_iter()
        .map(|ri| {
            let gmask = masks[ri];
            let gids = &id_lists[ri];
            let mut counts = vec![vec![0u64; len + 1]; len + 1];
            let mut out = RefOutcome {
                identity_bad: 0,
                ordering_bad: 0,
                total_bad: false,
                bound_bad: 0,
                public_bad: 0,
                failure: None,
            };
            for oi in 0..count {
                let shared_mask = gmask & masks[oi];
                let j = shared_mask.count_ones() as usize;
                let mut i = 0usize;
                let mut in_run = false;
                for &id in gids {
                    if shared_mask >> id & 1 == 1 {
                        if !in_run {
                            i += 1;
                            in_run = true;
                        }
                    } else {
                        in_run = false;
                    }
                }
                let mut vmask = 0u32;
                for &id in gids {
                    if shared_mask >> id & 1 == 1 {
                        vmask |= 1 << (id as usize / n);
                        vmask |= 1 << (id as usize % n);
                    }
                }
                let v = vmask.count_ones() as usize;
                if v != i + j {
                    out.identity_bad += 1;
                    out.failure.get_or_insert_with(|| {
                        format!(
                            "identity: ref {} vs {}: |V(S)|={v}, |S|={j}, runs={i}",
                            fmt_seq(&paths[ri]),
                            fmt_seq(&paths[oi])
                        )
                    });
                }
                if i > j {
                    out.ordering_bad += 1;
                    out.failure.get_or_insert_with(|| {
                        format!(
                            "ordering: ref {} vs {}: runs={i} > shared={j}",
                            fmt_seq(&paths[ri]),
                            fmt_seq(&paths[oi])
                        )
                    });
                }
                counts[i][j] += 1;
                // deterministic sparse cross-check of the public function,
                // including invariance under reversing the second path
                if (ri * count + oi) % 509 == 0 {
                    let a = Path::new(paths[ri].clone());
                    let b = Path::new(paths[oi].clone());
                    let prof = overlap_profile(&a, &b, n).expect("valid paths");
                    let rev = overlap_profile(&a, &b.reversed(), n).expect("valid paths");
                    let agrees = prof.shared_edges == j
                        && prof.shared_runs == i
                        && prof.shared_vertices == v
                        && rev.shared_edges == j
                        && rev.shared_runs == i;
                    if !agrees {
                        out.public_bad += 1;
                        out.failure.get_or_insert_with(|| {
                            format!(
                                "public profile disagrees on ref {} vs {}: got ({}, {}, {}), census ({i}, {j}, {v})",
                                fmt_seq(&paths[ri]),
                                fmt_seq(&paths[oi]),
                                prof.shared_runs,
                                prof.shared_edges,
                                prof.shared_vertices,
                            )
                        });
                    }
                }
            }
            let total: u64 = counts.iter().flatten().sum();
            if total as u128 != count as u128 {
                out.total_bad = true;
                out.failure.get_or_insert_with(|| {
                    format!("partition: ref {} classes sum to {total}, want {count}", fmt_seq(&paths[ri]))
                });
            }
            for (i, row) in counts.iter().enumerate() {
                for (j, &c) in row.iter().enumerate() {
                    if c as u128 > bounds[i][j] {
                        out.bound_bad += 1;
                        out.failure.get_or_insert_with(|| {
                            format!(
                                "bound: ref {} class (runs={i}, shared={j}) has {c} > {}",
                                fmt_seq(&paths[ri]),
                                bounds[i][j]
                            )
                        });
                    }
                }
            }
            out
        })
        .collect();

    // the public histogram must agree with the census at its own reference
    let canon: Vec<u32> = (0..=len as u32).collect();
    let canon_idx = paths.iter().position(|p| *p == canon).expect("canonical path enumerated");
    let hist = enumerate_overlap_histogram(n, len)?;
    let mut hist_ok = hist.total() as usize == count;
    {
        let gmask = masks[canon_idx];
        let gids = &id_lists[canon_idx];
        let mut counts = vec![vec![0u64; len + 1]; len + 1];
        for oi in 0..count {
            let shared_mask = gmask & masks[oi];
            let j = shared_mask.count_ones() as usize;
            let mut i = 0usize;
            let mut in_run = false;
            for &id in gids {
                if shared_mask >> id & 1 == 1 {
                    if !in_run {
                        i += 1;
                        in_run = true;
                    }
                } else {
                    in_run = false;
                }
            }
            counts[i][j] += 1;
        }
        for (i, row) in counts.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                let h = if i == 0 && j == 0 {
                    hist.disjoint
                } else {
                    hist.counts.get(&(i, j)).copied().unwrap_or(0)
                };
                if h != c {
                    hist_ok = false;
                }
            }
        }
    }

    let identity_bad: u64 = outcomes.iter().map(|o| o.identity_bad).sum();
    let ordering_bad: u64 = outcomes.iter().map(|o| o.ordering_bad).sum();
    let bound_bad: u64 = outcomes.iter().map(|o| o.bound_bad).sum();
    let public_bad: u64 = outcomes.iter().map(|o| o.public_bad).sum();
    let total_bad = outcomes.iter().any(|o| o.total_bad);
    let first_failure = outcomes.iter().find_map(|o| o.failure.clone()).or_else(|| {
        (!hist_ok).then(|| format!("histogram at n={n}, len={len} disagrees with census"))
    });
    Ok(PairCensus {
        n,
        len,
        pairs: (count as u128) * (count as u128),
        identity_ok: identity_bad == 0,
        ordering_ok: ordering_bad == 0,
        totals_ok: !total_bad,
        bounds_ok: bound_bad == 0,
        public_ok: public_bad == 0 && hist_ok,
        first_failure,
    })
}

/// Checks one split_witness call against its contract by direct re-summation.
/// Returns a violation description, or None when the contract holds.
pub fn split_contract_violation(inst: &Instance, path: &Path, l: usize) -> Result<Option<String>> {
    let piece = split_witness(inst, path, l)?;
    let plen = piece.path.len();
    if plen < l || plen >= 2 * l {
        return Ok(Some(format!("piece length {plen} outside [{l}, {})", 2 * l)));
    }
    // contiguity: the piece must appear verbatim in the parent path
    let contiguous = path
        .vertices
        .windows(plen + 1)
        .any(|w| w == piece.path.vertices.as_slice());
    if !contiguous {
        return Ok(Some(format!("piece {} not a consecutive block of {}", piece.path, path)));
    }
    let piece_avg = path_stats(inst, &piece.path)?.total_weight / plen as f64;
    if (piece_avg - piece.avg_weight).abs() > 1e-9 * piece_avg.abs().max(1.0) {
        return Ok(Some(format!(
            "reported average {} differs from recomputed {piece_avg}",
            piece.avg_weight
        )));
    }
    let whole_avg = path_stats(inst, path)?.total_weight / path.len() as f64;
    if piece.avg_weight > whole_avg * (1.0 + 1e-12) + 1e-12 {
        return Ok(Some(format!(
            "piece average {} exceeds whole-path average {whole_avg}",
            piece.avg_weight
        )));
    }
    Ok(None)
}

fn random_path(rng: &mut Rng64, n: usize, len: usize) -> Path {
    let mut verts: Vec<u32> = (0..n as u32).collect();
    for i in (1..n).rev() {
        let j = rng.next_below(i as u64 + 1) as usize;
        verts.swap(i, j);
    }
    verts.truncate(len + 1);
    Path::new(verts)
}

fn overlap_suite(max_n: usize) -> Result<CheckOutcome> {
    let mut pairs: u128 = 0;
    let mut failure: Option<String> = None;
    for n in 2..=max_n {
        for len in 1..n {
            let census = census_pairs(n, len)?;
            pairs += census.pairs;
            if !census.all_ok() && failure.is_none() {
                failure = census.first_failure.clone().or_else(|| {
                    Some(format!("census failed at n={n}, len={len}"))
                });
            }
        }
    }
    Ok(CheckOutcome {
        name: "overlap-identities".into(),
        passed: failure.is_none(),
        detail: failure.unwrap_or_else(|| {
            format!(
                "{pairs} ordered path pairs, n <= {max_n}: vertex identity, run ordering, \
                 partition totals, and integer class bounds all exact"
            )
        }),
    })
}

fn counting_suite(max_n: usize) -> Result<CheckOutcome> {
    let mut combos = 0u64;
    let mut failure: Option<String> = None;
    for n in 3..=max_n {
        for len in 2..n {
            let mut classes = vec![(0usize, 0usize)];
            for i in 1..=len {
                for j in i..=len {
                    classes.push((i, j));
                }
            }
            for (i, j) in classes {
                let b = counting_bound(n, len, i, j)?;
                combos += 1;
                if b.log_count > b.log_simplified + 1e-9 && failure.is_none() {
                    failure = Some(format!(
                        "n={n}, len={len}, (runs, shared)=({i}, {j}): binomial ln {} above simplified ln {}",
                        b.log_count, b.log_simplified
                    ));
                }
                let exact = binomial_bound_exact(n, len, i, j);
                let from_log = if b.log_count == f64::NEG_INFINITY { 0.0 } else { b.log_count.exp() };
                let agrees = if exact == 0 {
                    from_log == 0.0
                } else {
                    (from_log - exact as f64).abs() <= 1e-9 * exact as f64
                };
                if !agrees && failure.is_none() {
                    failure = Some(format!(
                        "n={n}, len={len}, (runs, shared)=({i}, {j}): log bound {from_log} vs integer {exact}"
                    ));
                }
            }
        }
    }
    Ok(CheckOutcome {
        name: "counting-bounds".into(),
        passed: failure.is_none(),
        detail: failure.unwrap_or_else(|| {
            format!("{combos} (n, len, class) combinations: binomial <= simplified, logs match integers")
        }),
    })
}

fn split_suite(reps: usize) -> Result<CheckOutcome> {
    let mut rng = Rng64::new(derive_seed(0x5eed_5811, &[41]));
    let mut failure: Option<String> = None;
    let mut checked = 0u64;
    for _ in 0..reps {
        let n = 8 + rng.next_below(33) as usize;
        let inst = Instance::generate(n, n as f64, rng.next_u64())?;
        let len = 1 + rng.next_below(n as u64 - 1) as usize;
        let path = random_path(&mut rng, n, len);
        let l = 1 + rng.next_below(len as u64) as usize;
        checked += 1;
        if let Some(v) = split_contract_violation(&inst, &path, l)? {
            if failure.is_none() {
                failure = Some(format!("n={n}, path {path}, l={l}: {v}"));
            }
        }
    }
    Ok(CheckOutcome {
        name: "split-witness".into(),
        passed: failure.is_none(),
        detail: failure.unwrap_or_else(|| {
            format!("{checked} random paths: piece shape, contiguity, and average contract hold")
        }),
    })
}

fn solver_suite(max_n: usize) -> Result<CheckOutcome> {
    let e_inv = 1f64 / std::f64::consts::E;
    let mut failure: Option<String> = None;
    let mut checked = 0u64;
    for n in 5..=max_n.min(7) {
        for seed in [11u64, 29, 47] {
            let inst = Instance::generate(n, n as f64, seed)?;
            let mut brute = vec![f64::INFINITY; n - 1];
            for len in 1..n {
                for_each_path(n, len, |seq| {
                    let w: f64 = seq
                        .windows(2)
                        .map(|e| inst.weight(e[0] as usize, e[1] as usize))
                        .sum();
                    if w < brute[len - 1] {
                        brute[len - 1] = w;
                    }
                });
            }
            let profile = min_weight_per_length(&inst, n - 1)?;
            for len in 1..n {
                checked += 1;
                let got = profile.weight(len);
                if (got - brute[len - 1]).abs() > 1e-9 && failure.is_none() {
                    failure = Some(format!(
                        "n={n}, seed {seed}, len {len}: profile {got} vs enumerated {}",
                        brute[len - 1]
                    ));
                }
            }
            for mult in [0.5, 1.0, 2.0, 4.0, 8.0] {
                let lambda = mult * e_inv;
                let want = (1..n).rev().find(|&len| brute[len - 1] <= lambda * len as f64).unwrap_or(0);
                let got = exact_l(&inst, lambda)?;
                checked += 1;
                if got != want && failure.is_none() {
                    failure = Some(format!(
                        "n={n}, seed {seed}, threshold {lambda}: solver L={got}, enumeration L={want}"
                    ));
                }
            }
        }
    }
    Ok(CheckOutcome {
        name: "solver-vs-enumeration".into(),
        passed: failure.is_none(),
        detail: failure.unwrap_or_else(|| {
            format!("{checked} profile entries and thresholds match full enumeration")
        }),
    })
}

/// Runs all four suites. `max_n` caps the exhaustive enumerations (7 keeps
/// the full run under a minute; 8 is the hard cap).
pub fn run_verification(max_n: usize) -> Result<Vec<CheckOutcome>> {
    if !(3..=ENUMERATION_CAP).contains(&max_n) {
        return invalid_arg(format!("max_n must be in [3, {ENUMERATION_CAP}], got {max_n}"));
    }
    Ok(vec![
        overlap_suite(max_n)?,
        counting_suite(max_n)?,
        split_suite(2_000)?,
        solver_suite(max_n)?,
    ])
}
