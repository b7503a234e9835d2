//! Reproducible experiment sweeps over (n, lambda) grids and scaling fits.
//!
//! Every record is pinned to seeds derived from the base seed and the grid
//! coordinates, so single records replay in isolation and a full sweep is
//! deterministic regardless of worker scheduling. Within one instance the
//! lambda grid is processed in ascending order and the heuristic can warm
//! start from the previous witness, which makes L nondecreasing along the
//! grid by construction.

use std::fmt;
use std::io::Write as IoWrite;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::first_moment_upper_certificate;
use crate::error::{invalid_arg, Error, Result};
use crate::model::{Instance, Path};
use crate::rng::derive_seed;
use crate::solver::{exact_l, heuristic_search, EXACT_CAP};

/// Failure probability attached to every record's length certificate.
pub const CERTIFICATE_FAIL_PROB: f64 = 0.01;

const E_INV: f64 = 0.36787944117144232160; // 1/e

/// How the lambda grid values map to thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaForm {
    /// Values are thresholds directly.
    Absolute,
    /// Values are window offsets x in lambda = 1/e + x / (ln n)^2.
    Window,
    /// Values are gaps eps in lambda = 1/e - eps.
    Subcritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMethod {
    Exact,
    Heuristic,
    Both,
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub n_grid: Vec<usize>,
    pub lambda_form: LambdaForm,
    pub lambda_values: Vec<f64>,
    pub replicates: usize,
    pub method: SweepMethod,
    /// Step budget per heuristic record; ignored by the exact solver.
    pub budget: u64,
    pub base_seed: u64,
    /// Chain heuristic witnesses along the ascending lambda grid.
    pub warm_start: bool,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return invalid_arg("n_grid must be nonempty");
        }
        if self.n_grid.iter().any(|n| *n < 2) {
            return invalid_arg("every n must be at least 2");
        }
        if self.lambda_values.is_empty() {
            return invalid_arg("lambda list must be nonempty");
        }
        if self.lambda_values.iter().any(|v| !v.is_finite()) {
            return invalid_arg("lambda values must be finite");
        }
        if self.replicates == 0 {
            return invalid_arg("replicates must be at least 1");
        }
        if self.method != SweepMethod::Exact && self.budget == 0 {
            return invalid_arg("heuristic sweeps need a positive budget");
        }
        if self.method != SweepMethod::Heuristic {
            let max_n = *self.n_grid.iter().max().unwrap();
            if max_n > EXACT_CAP {
                return invalid_arg(format!(
                    "exact method capped at n = {EXACT_CAP}, plan asks for {max_n}"
                ));
            }
        }
        for &n in &self.n_grid {
            for &v in &self.lambda_values {
                let lambda = self.effective_lambda(n, v);
                if !(lambda > 0.0) || !lambda.is_finite() {
                    return invalid_arg(format!(
                        "grid value {v} gives nonpositive threshold {lambda} at n = {n}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Threshold produced by one grid value at one n.
    pub fn effective_lambda(&self, n: usize, value: f64) -> f64 {
        match self.lambda_form {
            LambdaForm::Absolute => value,
            LambdaForm::Window => E_INV + value / (n as f64).ln().powi(2),
            LambdaForm::Subcritical => E_INV - value,
        }
    }

    /// Grid values ordered so effective thresholds ascend (for every n).
    pub fn values_in_ascending_lambda_order(&self) -> Vec<f64> {
        let mut v = self.lambda_values.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if self.lambda_form == LambdaForm::Subcritical {
            v.reverse();
        }
        v
    }

    /// Parses the flat key=value config format. Unknown or duplicate keys are
    /// errors; '#' starts a comment.
    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut n_grid: Option<Vec<usize>> = None;
        let mut lambda_form: Option<LambdaForm> = None;
        let mut lambda_values: Option<Vec<f64>> = None;
        let mut replicates: Option<usize> = None;
        let mut method: Option<SweepMethod> = None;
        let mut budget: Option<u64> = None;
        let mut base_seed: Option<u64> = None;
        let mut warm_start: Option<bool> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {lineno}: expected key = value")))?;
            let (key, value) = (key.trim(), value.trim());
            let dup = |k: &str| Error::Config(format!("line {lineno}: duplicate key {k}"));
            match key {
                "n_grid" => {
                    if n_grid.is_some() {
                        return Err(dup(key));
                    }
                    let parsed: std::result::Result<Vec<usize>, _> =
                        value.split(',').map(|t| t.trim().parse::<usize>()).collect();
                    n_grid = Some(parsed.map_err(|e| {
                        Error::Config(format!("line {lineno}: bad n_grid entry: {e}"))
                    })?);
                }
                "lambda_form" => {
                    if lambda_form.is_some() {
                        return Err(dup(key));
                    }
                    lambda_form = Some(match value {
                        "absolute" => LambdaForm::Absolute,
                        "window" => LambdaForm::Window,
                        "subcritical" => LambdaForm::Subcritical,
                        other => {
                            return Err(Error::Config(format!(
                                "line {lineno}: lambda_form must be absolute, window, or subcritical, got {other}"
                            )))
                        }
                    });
                }
                "lambda_values" => {
                    if lambda_values.is_some() {
                        return Err(dup(key));
                    }
                    let parsed: std::result::Result<Vec<f64>, _> =
                        value.split(',').map(|t| t.trim().parse::<f64>()).collect();
                    lambda_values = Some(parsed.map_err(|e| {
                        Error::Config(format!("line {lineno}: bad lambda value: {e}"))
                    })?);
                }
                "replicates" => {
                    if replicates.is_some() {
                        return Err(dup(key));
                    }
                    replicates = Some(value.parse().map_err(|e| {
                        Error::Config(format!("line {lineno}: bad replicates: {e}"))
                    })?);
                }
                "method" => {
                    if method.is_some() {
                        return Err(dup(key));
                    }
                    method = Some(match value {
                        "exact" => SweepMethod::Exact,
                        "heuristic" => SweepMethod::Heuristic,
                        "both" => SweepMethod::Both,
                        other => {
                            return Err(Error::Config(format!(
                                "line {lineno}: method must be exact, heuristic, or both, got {other}"
                            )))
                        }
                    });
                }
                "budget" => {
                    if budget.is_some() {
                        return Err(dup(key));
                    }
                    budget = Some(
                        value
                            .parse()
                            .map_err(|e| Error::Config(format!("line {lineno}: bad budget: {e}")))?,
                    );
                }
                "base_seed" => {
                    if base_seed.is_some() {
                        return Err(dup(key));
                    }
                    base_seed = Some(value.parse().map_err(|e| {
                        Error::Config(format!("line {lineno}: bad base_seed: {e}"))
                    })?);
                }
                "warm_start" => {
                    if warm_start.is_some() {
                        return Err(dup(key));
                    }
                    warm_start = Some(match value {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(Error::Config(format!(
                                "line {lineno}: warm_start must be true or false, got {other}"
                            )))
                        }
                    });
                }
                other => {
                    return Err(Error::Config(format!("line {lineno}: unknown key {other}")));
                }
            }
        }
        let missing = |k: &str| Error::Config(format!("missing required key {k}"));
        let plan = ExperimentPlan {
            n_grid: n_grid.ok_or_else(|| missing("n_grid"))?,
            lambda_form: lambda_form.ok_or_else(|| missing("lambda_form"))?,
            lambda_values: lambda_values.ok_or_else(|| missing("lambda_values"))?,
            replicates: replicates.ok_or_else(|| missing("replicates"))?,
            method: method.ok_or_else(|| missing("method"))?,
            budget: budget.unwrap_or(100_000),
            base_seed: base_seed.ok_or_else(|| missing("base_seed"))?,
            warm_start: warm_start.unwrap_or(true),
        };
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordMethod {
    Exact,
    Heuristic,
}

impl fmt::Display for RecordMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordMethod::Exact => "exact",
            RecordMethod::Heuristic => "heuristic",
        })
    }
}

/// One measured point of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRecord {
    pub n: usize,
    pub lambda: f64,
    pub replicate: usize,
    /// Seed the instance was generated from; identical across the lambda
    /// grid so the monotonicity of L is a statement about one instance.
    /// The heuristic's search stream additionally folds in the lambda index.
    pub seed: u64,
    pub method: RecordMethod,
    pub l: usize,
    pub upper_certificate: Option<usize>,
    pub runtime_ms: u64,
    pub budget_used: u64,
}

/// Runs the whole grid. Records come back sorted by (n index, ascending
/// lambda, replicate, method) and are bit-reproducible apart from runtime_ms.
pub fn run_sweep(plan: &ExperimentPlan) -> Result<Vec<ExperimentRecord>> {
    plan.validate()?;
    let values = plan.values_in_ascending_lambda_order();
    let tasks: Vec<(usize, usize)> = (0..plan.n_grid.len())
        .flat_map(|ni| (0..plan.replicates).map(move |rep| (ni, rep)))
        .collect();
    let chains: Vec<Vec<((usize, usize, usize, RecordMethod), ExperimentRecord)>> = tasks
        .par_iter()
        .map(|&(ni, rep)| {
            let n = plan.n_grid[ni];
            let seed = derive_seed(plan.base_seed, &[n as u64, rep as u64]);
            let inst = Instance::generate(n, n as f64, seed)?;
            let mut out = Vec::new();
            let mut warm: Option<Path> = None;
            for (li, &value) in values.iter().enumerate() {
                let lambda = plan.effective_lambda(n, value);
                let certificate = first_moment_upper_certificate(n, lambda, CERTIFICATE_FAIL_PROB)?;
                if plan.method != SweepMethod::Heuristic {
                    let start = Instant::now();
                    let l = exact_l(&inst, lambda)?;
                    out.push((
                        (ni, li, rep, RecordMethod::Exact),
                        ExperimentRecord {
                            n,
                            lambda,
                            replicate: rep,
                            seed,
                            method: RecordMethod::Exact,
                            l,
                            upper_certificate: certificate,
                            runtime_ms: start.elapsed().as_millis() as u64,
                            budget_used: 0,
                        },
                    ));
                }
                if plan.method != SweepMethod::Exact {
                    let search_seed =
                        derive_seed(plan.base_seed, &[n as u64, li as u64, rep as u64]);
                    let start = Instant::now();
                    let found =
                        heuristic_search(&inst, lambda, plan.budget, search_seed, warm.as_ref())?;
                    if plan.warm_start {
                        warm = found.witness.clone();
                    }
                    out.push((
                        (ni, li, rep, RecordMethod::Heuristic),
                        ExperimentRecord {
                            n,
                            lambda,
                            replicate: rep,
                            seed,
                            method: RecordMethod::Heuristic,
                            l: found.best_len,
                            upper_certificate: certificate,
                            runtime_ms: start.elapsed().as_millis() as u64,
                            budget_used: found.steps_used,
                        },
                    ));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut keyed: Vec<_> = chains.into_iter().flatten().collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(keyed.into_iter().map(|(_, r)| r).collect())
}

/// Version tag on the first line of every sweep CSV.
pub const CSV_VERSION_LINE: &str = "# percavg-sweep-v1";
const CSV_COLUMNS: &str = "n,lambda,replicate,seed,method,L,upper_certificate,runtime_ms,budget_used";

/// Writes records in the fixed, versioned CSV layout. The lambda column uses
/// shortest-roundtrip float formatting, so rereading it is exact.
pub fn write_csv<W: IoWrite>(records: &[ExperimentRecord], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_VERSION_LINE}")?;
    writeln!(w, "{CSV_COLUMNS}")?;
    for r in records {
        let cert = r
            .upper_certificate
            .map(|c| c.to_string())
            .unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.n, r.lambda, r.replicate, r.seed, r.method, r.l, cert, r.runtime_ms, r.budget_used
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Critical,
    Subcritical,
    Supercritical,
}

impl Regime {
    pub fn parse(s: &str) -> Result<Regime> {
        match s {
            "critical" => Ok(Regime::Critical),
            "subcritical" => Ok(Regime::Subcritical),
            "supercritical" => Ok(Regime::Supercritical),
            other => invalid_arg(format!(
                "regime must be critical, subcritical, or supercritical, got {other}"
            )),
        }
    }
}

/// Per-threshold regression line of the subcritical fit.
#[derive(Debug, Clone, Serialize)]
pub struct GroupSlope {
    /// Gap 1/e - lambda shared by the group.
    pub epsilon: f64,
    /// Slope of L * epsilon against ln n.
    pub slope: f64,
    pub slope_std_err: f64,
    pub points: usize,
}

/// Scaling-law fit of sweep records against one theoretical regime.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub regime: String,
    /// Critical: exponent of ln L in ln ln n (theory: 3).
    /// Supercritical: exponent of ln L in ln n (theory: between 1/4 and 1).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent_std_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent_ci95: Option<(f64, f64)>,
    /// Subcritical: slope of L * eps on ln n per eps group.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub group_slopes: Vec<GroupSlope>,
    /// Max over min of the group slopes (1 = perfectly stable).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope_stability: Option<f64>,
    pub points_used: usize,
    /// Set when any fitted record is heuristic: measured L is then only a
    /// lower bound on the true L, and so are the fitted quantities.
    pub lower_bounds_only: bool,
}

fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return invalid_arg("regression needs at least two distinct x values");
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let se = if xs.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok((slope, intercept, se))
}

fn distinct_n(records: &[&ExperimentRecord]) -> usize {
    let mut ns: Vec<usize> = records.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    ns.len()
}

/// Fits the scaling law of the chosen regime to the records. Records with
/// L = 0 carry no length signal and are skipped.
pub fn fit_scaling(records: &[ExperimentRecord], regime: Regime) -> Result<FitReport> {
    let used: Vec<&ExperimentRecord> = records.iter().filter(|r| r.l > 0).collect();
    if distinct_n(&used) < 3 {
        return invalid_arg("scaling fit needs at least 3 distinct n with nonzero L");
    }
    let lower_bounds_only = used.iter().any(|r| r.method == RecordMethod::Heuristic);
    let report = |exp: f64, se: f64, groups: Vec<GroupSlope>, stability: Option<f64>, pts: usize| {
        FitReport {
            regime: match regime {
                Regime::Critical => "critical",
                Regime::Subcritical => "subcritical",
                Regime::Supercritical => "supercritical",
            }
            .to_string(),
            exponent: (!exp.is_nan()).then_some(exp),
            exponent_std_err: (!exp.is_nan()).then_some(se),
            exponent_ci95: (!exp.is_nan()).then_some((exp - 1.96 * se, exp + 1.96 * se)),
            group_slopes: groups,
            slope_stability: stability,
            points_used: pts,
            lower_bounds_only,
        }
    };
    match regime {
        Regime::Critical => {
            let xs: Vec<f64> = used.iter().map(|r| (r.n as f64).ln().ln()).collect();
            let ys: Vec<f64> = used.iter().map(|r| (r.l as f64).ln()).collect();
            let (slope, _, se) = ols(&xs, &ys)?;
            Ok(report(slope, se, Vec::new(), None, used.len()))
        }
        Regime::Supercritical => {
            let xs: Vec<f64> = used.iter().map(|r| (r.n as f64).ln()).collect();
            let ys: Vec<f64> = used.iter().map(|r| (r.l as f64).ln()).collect();
            let (slope, _, se) = ols(&xs, &ys)?;
            Ok(report(slope, se, Vec::new(), None, used.len()))
        }
        Regime::Subcritical => {
            let mut groups: Vec<(u64, Vec<&ExperimentRecord>)> = Vec::new();
            for r in &used {
                let key = r.lambda.to_bits();
                match groups.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, v)) => v.push(r),
                    None => groups.push((key, vec![r])),
                }
            }
            groups.sort_by_key(|(k, _)| *k);
            let mut slopes = Vec::new();
            let mut pts = 0usize;
            for (key, group) in &groups {
                let lambda = f64::from_bits(*key);
                let eps = E_INV - lambda;
                if !(eps > 0.0) {
                    return invalid_arg(format!(
                        "threshold {lambda} is not below 1/e; not subcritical data"
                    ));
                }
                if distinct_n(group) < 3 {
                    return invalid_arg(format!(
                        "subcritical fit needs 3 distinct n per threshold; {lambda} has {}",
                        distinct_n(group)
                    ));
                }
                let xs: Vec<f64> = group.iter().map(|r| (r.n as f64).ln()).collect();
                let ys: Vec<f64> = group.iter().map(|r| r.l as f64 * eps).collect();
                let (slope, _, se) = ols(&xs, &ys)?;
                pts += group.len();
                slopes.push(GroupSlope {
                    epsilon: eps,
                    slope,
                    slope_std_err: se,
                    points: group.len(),
                });
            }
            let hi = slopes.iter().map(|g| g.slope).fold(f64::NEG_INFINITY, f64::max);
            let lo = slopes.iter().map(|g| g.slope).fold(f64::INFINITY, f64::min);
            let stability = if lo > 0.0 { Some(hi / lo) } else { None };
            Ok(report(f64::NAN, f64::NAN, slopes, stability, pts))
        }
    }
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return invalid_arg("rank correlation needs two equal-length samples of size >= 2");
    }
    let rank = |vals: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..vals.len()).collect();
        idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
        let mut ranks = vec![0.0; vals.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && vals[idx[j + 1]] == vals[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                ranks[k] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut dx = 0.0;
    let mut dy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mx) * (b - my);
        dx += (a - mx) * (a - mx);
        dy += (b - my) * (b - my);
    }
    if dx == 0.0 || dy == 0.0 {
        return invalid_arg("rank correlation undefined for a constant sample");
    }
    Ok(num / (dx * dy).sqrt())
}
