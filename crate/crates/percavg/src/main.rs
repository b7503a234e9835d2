//! Command-line surface: instance generation, single solves, sweep runs,
//! exhaustive verification, analytic tail values, and deviation estimates.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use percavg::analytic::{
    atypical_union_bound, bridge_lowertail, count_paths, expected_count,
    first_moment_upper_certificate, log_gamma_p, window_log_prob, BridgeTailMode, EventSpec,
};
use percavg::deviation::{
    estimate_p, estimate_p_direct, fit_deviation_rate, ConditionedSequenceSpec, RateObservation,
};
use percavg::model::Instance;
use percavg::rng::derive_seed;
use percavg::solver::{heuristic_search, min_weight_per_length};
use percavg::sweep::{fit_scaling, run_sweep, write_csv, ExperimentPlan, Regime};
use percavg::verify::run_verification;
use percavg::Error;

#[derive(Parser)]
#[command(
    name = "percavg",
    version,
    about = "Longest light paths in complete graphs with exponential edge weights",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate an instance and print its JSON header
    Gen(GenArgs),
    /// Compute L for one instance and print a JSON record with the witness
    Solve(SolveArgs),
    /// Run an experiment sweep from a config file
    Sweep(SweepArgs),
    /// Run the exhaustive cross-check suites and print a pass/fail table
    Verify(VerifyArgs),
    /// Print analytic tail and certificate values as CSV
    Tails(TailsArgs),
    /// Estimate corridor probabilities of conditioned walks as CSV
    Deviation(DeviationArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Edge weight mean; defaults to n
    #[arg(long)]
    edge_mean: Option<f64>,
    /// Write the header here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SolveMethod {
    Exact,
    Heuristic,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Average-weight threshold
    #[arg(long)]
    lambda: f64,
    #[arg(long, value_enum)]
    method: SolveMethod,
    /// Step budget for the heuristic
    #[arg(long, default_value_t = 100_000)]
    budget: u64,
    #[arg(long)]
    edge_mean: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Flat key=value plan file
    #[arg(long)]
    config: PathBuf,
    /// Write the records CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also fit this regime and print the report JSON (needs --out so the
    /// CSV and the JSON do not share stdout)
    #[arg(long, value_parser = Regime::parse)]
    fit: Option<Regime>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Cap for the exhaustive enumerations
    #[arg(long, default_value_t = 7)]
    max_n: usize,
    /// Emit the outcomes as JSON instead of the table
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TailsArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    lambda: f64,
    /// Path length for the per-length rows
    #[arg(long)]
    len: Option<usize>,
    /// Also evaluate the bridge lower tail at this point
    #[arg(long)]
    delta: Option<f64>,
    /// Failure probability for the length certificate
    #[arg(long, default_value_t = 0.01)]
    fail_prob: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum DeviationMethod {
    /// Per-step conditional sampling restricted to the corridor
    Sequential,
    /// Plain hit counting
    Direct,
}

#[derive(Args)]
struct DeviationArgs {
    /// Comma-separated walk lengths
    #[arg(long, value_delimiter = ',', required = true)]
    s_grid: Vec<usize>,
    /// Mean increment
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    /// Corridor half-width
    #[arg(long)]
    r: f64,
    #[arg(long)]
    reps: u64,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = DeviationMethod::Sequential)]
    method: DeviationMethod,
    /// Print the decay-rate fit as JSON instead of the per-point CSV
    #[arg(long)]
    fit: bool,
}

fn write_out(out: &Option<PathBuf>, content: &str) -> percavg::Result<()> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> percavg::Result<()> {
    let mean = a.edge_mean.unwrap_or(a.n as f64);
    let inst = Instance::generate(a.n, mean, a.seed)?;
    let header = serde_json::to_string_pretty(&inst.header()?)?;
    write_out(&a.out, &format!("{header}\n"))
}

fn cmd_solve(a: SolveArgs) -> percavg::Result<()> {
    let mean = a.edge_mean.unwrap_or(a.n as f64);
    let inst = Instance::generate(a.n, mean, a.seed)?;
    let record = match a.method {
        SolveMethod::Exact => {
            let profile = min_weight_per_length(&inst, a.n - 1)?;
            let mut l = 0;
            for cand in 1..=profile.l_max() {
                if profile.weight(cand) <= a.lambda * cand as f64 {
                    l = cand;
                }
            }
            let (witness, total) = if l > 0 {
                (profile.witness(l).vertices.clone(), profile.weight(l))
            } else {
                (Vec::new(), 0.0)
            };
            json!({
                "n": a.n,
                "edge_mean": mean,
                "seed": a.seed,
                "lambda": a.lambda,
                "method": "exact",
                "L": l,
                "total_weight": total,
                "witness": witness,
            })
        }
        SolveMethod::Heuristic => {
            let search_seed = derive_seed(a.seed, &[1]);
            let found = heuristic_search(&inst, a.lambda, a.budget, search_seed, None)?;
            let witness = found
                .witness
                .as_ref()
                .map(|p| p.vertices.clone())
                .unwrap_or_default();
            json!({
                "n": a.n,
                "edge_mean": mean,
                "seed": a.seed,
                "lambda": a.lambda,
                "method": "heuristic",
                "L": found.best_len,
                "total_weight": found.total_weight,
                "witness": witness,
                "budget_used": found.steps_used,
            })
        }
    };
    println!("{}", serde_json::to_string(&record)?);
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> percavg::Result<()> {
    if a.fit.is_some() && a.out.is_none() {
        return Err(Error::Config("--fit needs --out for the records CSV".into()));
    }
    let text = fs::read_to_string(&a.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", a.config.display())))?;
    let plan = ExperimentPlan::from_config_text(&text)?;
    let records = run_sweep(&plan)?;
    let mut csv = Vec::new();
    write_csv(&records, &mut csv)?;
    write_out(&a.out, std::str::from_utf8(&csv).expect("csv is utf8"))?;
    if let Some(regime) = a.fit {
        let report = fit_scaling(&records, regime)?;
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> percavg::Result<bool> {
    let outcomes = run_verification(a.max_n)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&outcomes)?);
    } else {
        for o in &outcomes {
            let mark = if o.passed { "PASS" } else { "FAIL" };
            println!("{mark}  {:<24} {}", o.name, o.detail);
        }
    }
    Ok(outcomes.iter().all(|o| o.passed))
}

fn cmd_tails(a: TailsArgs) -> percavg::Result<()> {
    let mut rows: Vec<(String, String, f64, f64)> = Vec::new();
    let union = atypical_union_bound(a.n)?;
    rows.push(("atypical_union_bound".into(), format!("n={}", a.n), union.exp(), union));
    let cert = first_moment_upper_certificate(a.n, a.lambda, a.fail_prob)?;
    let cert_val = cert.map(|c| c as f64).unwrap_or(f64::NAN);
    rows.push((
        "length_certificate".into(),
        format!("n={} lambda={} fail_prob={}", a.n, a.lambda, a.fail_prob),
        cert_val,
        cert_val.ln(),
    ));
    if let Some(len) = a.len {
        let count = count_paths(a.n, len)?;
        rows.push(("path_count".into(), format!("n={} len={len}", a.n), count.exp(), count));
        let tail = log_gamma_p(len as u64, a.lambda * len as f64 / a.n as f64)?;
        rows.push((
            "weight_tail".into(),
            format!("n={} len={len} lambda={}", a.n, a.lambda),
            tail.exp(),
            tail,
        ));
        let spec = EventSpec::with_tenth_log_cap(len, a.lambda, a.n);
        let window = window_log_prob(a.n, &spec)?;
        rows.push((
            "window_prob".into(),
            format!("n={} len={len} lambda={} window={}", a.n, a.lambda, spec.window),
            window.exp(),
            window,
        ));
        let expected = expected_count(a.n, &spec, 1.0)?;
        rows.push((
            "expected_window_count".into(),
            format!("n={} len={len} lambda={}", a.n, a.lambda),
            expected.exp(),
            expected,
        ));
    }
    if let Some(delta) = a.delta {
        let series = bridge_lowertail(delta, BridgeTailMode::Series)?;
        rows.push(("bridge_lowertail_series".into(), format!("delta={delta}"), series, series.ln()));
        let asym = bridge_lowertail(delta, BridgeTailMode::Asymptotic)?;
        rows.push((
            "bridge_lowertail_asymptotic".into(),
            format!("delta={delta}"),
            asym,
            asym.ln(),
        ));
    }
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    writeln!(w, "quantity,params,value,log_value")?;
    for (q, p, v, lv) in rows {
        writeln!(w, "{q},{p},{v},{lv}")?;
    }
    Ok(())
}

fn cmd_deviation(a: DeviationArgs) -> percavg::Result<()> {
    let mut observations = Vec::new();
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    if !a.fit {
        writeln!(w, "s,r,rho,p_hat,std_err,reps")?;
    }
    for (idx, &s) in a.s_grid.iter().enumerate() {
        let spec = ConditionedSequenceSpec::new(s, a.rho)?;
        let seed = derive_seed(a.seed, &[idx as u64, s as u64]);
        let est = match a.method {
            DeviationMethod::Sequential => estimate_p(&spec, a.r, a.reps, seed)?,
            DeviationMethod::Direct => estimate_p_direct(&spec, a.r, a.reps, seed)?,
        };
        if !a.fit {
            writeln!(w, "{s},{},{},{},{},{}", a.r, a.rho, est.p, est.std_err, est.reps)?;
        }
        observations.push(RateObservation { s, rho: a.rho, r: a.r, estimate: est });
    }
    if a.fit {
        let fit = fit_deviation_rate(&observations)?;
        writeln!(w, "{}", serde_json::to_string_pretty(&fit)?)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Gen(a) => cmd_gen(a).map(|()| true),
        Cmd::Solve(a) => cmd_solve(a).map(|()| true),
        Cmd::Sweep(a) => cmd_sweep(a).map(|()| true),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Tails(a) => cmd_tails(a).map(|()| true),
        Cmd::Deviation(a) => cmd_deviation(a).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
