//! Acceptance gate: ten independent criteria, one test per criterion so the
//! runner prints one pass/fail line for each. Every tolerance is pinned as a
//! literal next to its assertion; detail lines print under --nocapture.

use std::time::Instant;

use percavg::analytic::{
    bridge_lowertail, first_moment_upper_certificate, gamma_cdf, gamma_log_pdf, BridgeTailMode,
    EventSpec,
};
use percavg::deviation::{
    check_superadditivity, estimate_p, fit_deviation_rate, ConditionedSequenceSpec, Estimate,
    RateObservation,
};
use percavg::model::{for_each_path, Instance, Path};
use percavg::overlap::second_moment_ratio;
use percavg::rng::{derive_seed, Rng64};
use percavg::solver::{exact_l, min_weight_per_length, MinWeightProfile};
use percavg::sweep::{run_sweep, spearman, ExperimentPlan, LambdaForm, SweepMethod};
use percavg::verify::{census_pairs, split_contract_violation};

const E_INV: f64 = 0.36787944117144232160;

/// All ordered pairs of simple paths at n <= 7, every length: the shared
/// vertex count equals shared edges plus runs, runs never exceed shared
/// edges, the per-reference class counts partition the path set, and every
/// class count respects the integer product bound. Exact integers, no
/// tolerance; budget 60 s.
#[test]
fn criterion_01_overlap_census_is_exact() {
    let start = Instant::now();
    let mut pairs: u128 = 0;
    for n in 2..=7 {
        for len in 1..n {
            let census = census_pairs(n, len).unwrap();
            assert!(
                census.all_ok(),
                "criterion 1: FAIL at n={n}, len={len}: {:?}",
                census.first_failure
            );
            pairs += census.pairs;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 60.0, "criterion 1: FAIL - took {secs:.1} s, budget 60 s");
    println!("criterion 1: PASS - {pairs} ordered pairs exact in {secs:.1} s");
}

fn brute_minima(inst: &Instance, l_max: usize) -> Vec<f64> {
    let n = inst.n();
    let mut mins = vec![f64::INFINITY; l_max];
    for len in 1..=l_max {
        for_each_path(n, len, |seq| {
            let w: f64 = seq
                .windows(2)
                .map(|e| inst.weight(e[0] as usize, e[1] as usize))
                .sum();
            if w < mins[len - 1] {
                mins[len - 1] = w;
            }
        });
    }
    mins
}

const SOLVER_N_RANGE: std::ops::RangeInclusive<usize> = 5..=9;
const SOLVER_SEEDS: u64 = 100;
const LAMBDA_MULTIPLIERS: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

/// The dynamic program agrees bit-for-bit with full path enumeration on the
/// per-length minima, and the derived L agrees exactly, on 100 instances per
/// n in {5..9} across 5 thresholds. Budget 5 min.
#[test]
fn criterion_02_solver_matches_enumeration() {
    let start = Instant::now();
    let mut checked = 0u64;
    for n in SOLVER_N_RANGE {
        for rep in 0..SOLVER_SEEDS {
            let seed = derive_seed(0xacc2, &[n as u64, rep]);
            let inst = Instance::generate(n, n as f64, seed).unwrap();
            let brute = brute_minima(&inst, n - 1);
            let profile = min_weight_per_length(&inst, n - 1).unwrap();
            for len in 1..n {
                assert_eq!(
                    profile.weight(len).to_bits(),
                    brute[len - 1].to_bits(),
                    "criterion 2: FAIL - n={n} seed {seed} len {len}: profile {} vs enumerated {}",
                    profile.weight(len),
                    brute[len - 1]
                );
            }
            for mult in LAMBDA_MULTIPLIERS {
                let lambda = mult * E_INV;
                let want = (1..n)
                    .rev()
                    .find(|&len| brute[len - 1] <= lambda * len as f64)
                    .unwrap_or(0);
                let got = exact_l(&inst, lambda).unwrap();
                assert_eq!(
                    got, want,
                    "criterion 2: FAIL - n={n} seed {seed} lambda {lambda}: L {got} vs {want}"
                );
                checked += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 300.0, "criterion 2: FAIL - took {secs:.1} s, budget 300 s");
    println!("criterion 2: PASS - {checked} (instance, threshold) cases exact in {secs:.1} s");
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

/// Splitting monotonicity, zero tolerance: on every criterion-2 instance and
/// every pair l <= L, the best average over the piece-length window
/// [l, min(2l-1, L)] does not exceed the best average at length L; and
/// split_witness meets its shape/contiguity/average contract on 10^4 random
/// paths.
#[test]
fn criterion_03_window_minima_dominate_and_split_contract_holds() {
    let mut windows_checked = 0u64;
    for n in SOLVER_N_RANGE {
        for rep in 0..SOLVER_SEEDS {
            let seed = derive_seed(0xacc2, &[n as u64, rep]);
            let inst = Instance::generate(n, n as f64, seed).unwrap();
            let profile = min_weight_per_length(&inst, n - 1).unwrap();
            let l_max = profile.l_max();
            for l in 1..=l_max {
                for big in l..=l_max {
                    let window_best = (l..=(2 * l - 1).min(big))
                        .map(|lp| profile.weight(lp) / lp as f64)
                        .fold(f64::INFINITY, f64::min);
                    let at_big = profile.weight(big) / big as f64;
                    assert!(
                        window_best <= at_big,
                        "criterion 3: FAIL - n={n} seed {seed}: window [{l}, {}] best {window_best} \
                         above average {at_big} at length {big}",
                        (2 * l - 1).min(big)
                    );
                    windows_checked += 1;
                }
            }
        }
    }
    let mut rng = Rng64::new(derive_seed(0xacc3, &[1]));
    let split_trials = 10_000u32;
    for _ in 0..split_trials {
        let n = 8 + rng.next_below(25) as usize;
        let inst = Instance::generate(n, n as f64, rng.next_u64()).unwrap();
        let len = 1 + rng.next_below(n as u64 - 1) as usize;
        let path = random_path(&mut rng, n, len);
        let l = 1 + rng.next_below(len as u64) as usize;
        let violation = split_contract_violation(&inst, &path, l).unwrap();
        assert!(
            violation.is_none(),
            "criterion 3: FAIL - n={n}, path {path}, l={l}: {violation:?}"
        );
    }
    println!(
        "criterion 3: PASS - {windows_checked} window comparisons and {split_trials} split contracts"
    );
}

/// Distribution-function numerics: the closed form at (1, 2, 1) to 1e-12,
/// Simpson integration of the density to 1 within 1e-9 for shapes
/// {1, 5, 50, 500}, and agreement with 10^7-replicate Monte Carlo at
/// (1, 7, 5) within 3 standard errors.
#[test]
fn criterion_04_distribution_numerics() {
    let closed = 1.0 - 2.0 * (-1.0f64).exp();
    let got = gamma_cdf(1.0, 2, 1.0).unwrap();
    assert!(
        (got - closed).abs() < 1e-12,
        "criterion 4: FAIL - cdf(1,2,1) = {got}, closed form {closed}"
    );
    for k in [1u64, 5, 50, 500] {
        let hi = k as f64 + 40.0 * (k as f64).sqrt() + 60.0;
        let panels = 1usize << 20;
        let h = hi / panels as f64;
        let f = |z: f64| gamma_log_pdf(1.0, k, z).unwrap().exp();
        let mut sum = f(0.0) + f(hi);
        for i in 1..panels {
            sum += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let integral = sum * h / 3.0;
        assert!(
            (integral - 1.0).abs() < 1e-9,
            "criterion 4: FAIL - density at shape {k} integrates to {integral}"
        );
    }
    let mut rng = Rng64::new(derive_seed(0xacc4, &[7]));
    let reps = 10_000_000u64;
    let mut hits = 0u64;
    for _ in 0..reps {
        let total: f64 = (0..7).map(|_| rng.next_exp(1.0)).sum();
        if total <= 5.0 {
            hits += 1;
        }
    }
    let p_hat = hits as f64 / reps as f64;
    let se = (p_hat * (1.0 - p_hat) / reps as f64).sqrt();
    let exact = gamma_cdf(1.0, 7, 5.0).unwrap();
    assert!(
        (exact - p_hat).abs() <= 3.0 * se,
        "criterion 4: FAIL - cdf(1,7,5) = {exact}, Monte Carlo {p_hat} +- {se}"
    );
    println!("criterion 4: PASS - closed form, 4 integrals, Monte Carlo within {:.1} se", (exact - p_hat).abs() / se);
}

/// Bridge lower tail: saturates to 1 at 10 within 1e-12, series and
/// asymptotic forms within 1% of each other at 0.3, and the series is
/// monotone over the grid 0.2, 0.4, ..., 3.0.
#[test]
fn criterion_05_bridge_tail_series() {
    let sat = bridge_lowertail(10.0, BridgeTailMode::Series).unwrap();
    assert!(
        (sat - 1.0).abs() < 1e-12,
        "criterion 5: FAIL - series at 10 is {sat}"
    );
    let series = bridge_lowertail(0.3, BridgeTailMode::Series).unwrap();
    let asym = bridge_lowertail(0.3, BridgeTailMode::Asymptotic).unwrap();
    let ratio = series / asym;
    assert!(
        (0.99..=1.01).contains(&ratio),
        "criterion 5: FAIL - series/asymptotic at 0.3 is {ratio}"
    );
    let grid: Vec<f64> = (1..=15).map(|i| i as f64 * 0.2).collect();
    let values: Vec<f64> = grid
        .iter()
        .map(|&d| bridge_lowertail(d, BridgeTailMode::Series).unwrap())
        .collect();
    for w in values.windows(2) {
        assert!(
            w[0] <= w[1],
            "criterion 5: FAIL - series not monotone: {} then {}",
            w[0],
            w[1]
        );
    }
    assert!(values[0] < values[14], "criterion 5: FAIL - series flat across the grid");
    println!("criterion 5: PASS - saturation, 0.3 ratio {ratio:.4}, monotone on 15-point grid");
}

/// Corridor probabilities decay linearly in s/r^2: over s in {16,...,256} at
/// rho=1, r=2, reps=1e5, the fitted decay slope is positive beyond the
/// one-sided 95% t quantile (df=3), and the per-point rates over the upper
/// half of the grid agree within a factor of 3. Budget 10 min.
#[test]
fn criterion_06_corridor_decay_scaling() {
    let start = Instant::now();
    let reps = 100_000u64;
    let grid = [16usize, 32, 64, 128, 256];
    let mut obs = Vec::new();
    for &s in &grid {
        let spec = ConditionedSequenceSpec::new(s, 1.0).unwrap();
        let est = estimate_p(&spec, 2.0, reps, derive_seed(0xacc6, &[s as u64])).unwrap();
        assert!(est.p > 0.0, "criterion 6: FAIL - estimate vanished at s={s}");
        obs.push(RateObservation { s, rho: 1.0, r: 2.0, estimate: est });
    }
    let fit = fit_deviation_rate(&obs).unwrap();
    assert_eq!(fit.used, 5, "criterion 6: FAIL - censored points in the fit");
    let t95_df3 = 2.353;
    assert!(
        fit.slope > t95_df3 * fit.slope_std_err,
        "criterion 6: FAIL - slope {} +- {} not positive at 95%",
        fit.slope,
        fit.slope_std_err
    );
    let upper: Vec<f64> = fit.points[2..].iter().map(|p| p.rate.unwrap()).collect();
    let hi = upper.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lo = upper.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    assert!(
        hi / lo <= 3.0,
        "criterion 6: FAIL - upper-half rates spread {hi}/{lo} = {}",
        hi / lo
    );
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 600.0, "criterion 6: FAIL - took {secs:.1} s, budget 600 s");
    println!(
        "criterion 6: PASS - slope {:.4} +- {:.4}, rate spread {:.2}, {secs:.1} s",
        fit.slope,
        fit.slope_std_err,
        hi / lo
    );
}

/// Corridor probabilities are superadditive up to the 1e8 * r * sqrt(min)
/// slack: certified beyond 3 combined standard errors for the splits
/// (16,16), (16,64), (64,64) at rho=1/2, r=2, reps=1e5.
#[test]
fn criterion_07_superadditive_splitting() {
    let reps = 100_000u64;
    let r = 2.0;
    let est = |s: usize| -> Estimate {
        let spec = ConditionedSequenceSpec::new(s, 0.5).unwrap();
        estimate_p(&spec, r, reps, derive_seed(0xacc7, &[s as u64])).unwrap()
    };
    let mut margins = Vec::new();
    for (a, b) in [(16usize, 16usize), (16, 64), (64, 64)] {
        let ea = est(a);
        let eb = est(b);
        let whole = est(a + b);
        let check = check_superadditivity((a, &ea), (b, &eb), &whole, r).unwrap();
        assert!(
            check.certified,
            "criterion 7: FAIL - split ({a},{b}): margin {} vs 3 x {}",
            check.margin, check.combined_std_err
        );
        margins.push(check.margin);
    }
    println!(
        "criterion 7: PASS - margins {:.1}, {:.1}, {:.1} ln units beyond 3 combined se",
        margins[0], margins[1], margins[2]
    );
}

/// Second-moment assembly at n = 1e6 in the near-critical window: with the
/// deviation probability bracketed in {0.01, 1}, the correlated-pair sum
/// stays below the expected count (log ratio < 0). Analytic only; budget
/// 60 s.
#[test]
fn criterion_08_second_moment_domination() {
    let start = Instant::now();
    let n = 1_000_000usize;
    let ln_n = (n as f64).ln();
    let lambda = E_INV - ln_n.powi(-2);
    let len = (1e-3 * ln_n.powi(3)).floor() as usize;
    assert_eq!(len, 2, "criterion 8: configuration drifted");
    let spec = EventSpec::with_tenth_log_cap(len, lambda, n);
    let mut ratios = Vec::new();
    for dev_prob in [0.01, 1.0] {
        let ln_ratio = second_moment_ratio(n, &spec, dev_prob).unwrap();
        assert!(
            ln_ratio < 0.0,
            "criterion 8: FAIL - log ratio {ln_ratio} at dev_prob {dev_prob}"
        );
        ratios.push(ln_ratio);
    }
    let secs = start.elapsed().as_secs_f64();
    assert!(secs < 60.0, "criterion 8: FAIL - took {secs:.1} s, budget 60 s");
    println!(
        "criterion 8: PASS - log ratios {:.2} and {:.2} at dev_prob 0.01 and 1",
        ratios[0], ratios[1]
    );
}

fn l_from_profile(profile: &MinWeightProfile, lambda: f64) -> usize {
    (1..=profile.l_max())
        .rev()
        .find(|&len| profile.weight(len) <= lambda * len as f64)
        .unwrap_or(0)
}

/// Sandwich consistency: at n=12 over 100 instances and 5 thresholds, the
/// exact L stays strictly below the 1% first-moment length certificate in at
/// least 99% of the 500 cases.
#[test]
fn criterion_09_certificates_upper_bound_exact_l() {
    let n = 12usize;
    let mults = [0.6, 0.8, 1.0, 1.2, 1.4];
    let certs: Vec<usize> = mults
        .iter()
        .map(|m| {
            first_moment_upper_certificate(n, m * E_INV, 0.01)
                .unwrap()
                .expect("certificate exists at these thresholds")
        })
        .collect();
    let mut below = 0u32;
    let total = 100 * mults.len() as u32;
    for rep in 0..100u64 {
        let inst = Instance::generate(n, n as f64, derive_seed(0xacc9, &[rep])).unwrap();
        let profile = min_weight_per_length(&inst, n - 1).unwrap();
        for (mi, m) in mults.iter().enumerate() {
            if l_from_profile(&profile, m * E_INV) < certs[mi] {
                below += 1;
            }
        }
    }
    let need = (total as f64 * 0.99).ceil() as u32;
    assert!(
        below >= need,
        "criterion 9: FAIL - exact L below certificate in {below}/{total}, need {need}"
    );
    println!("criterion 9: PASS - {below}/{total} cases below certificates {certs:?}");
}

/// Subcritical growth trend: heuristic sweep over n in {2^10, 2^11, 2^12}
/// and gaps eps in {0.05, 0.1, 0.2}, 10 replicates: L rises with n at fixed
/// eps and with 1/eps at fixed n (Spearman > 0.8 on both axes), and
/// L*eps/ln n stays inside [0.02, 50]. Budget 30 min.
#[test]
fn criterion_10_subcritical_growth_trend() {
    let start = Instant::now();
    let plan = ExperimentPlan {
        n_grid: vec![1024, 2048, 4096],
        lambda_form: LambdaForm::Subcritical,
        lambda_values: vec![0.05, 0.1, 0.2],
        replicates: 10,
        method: SweepMethod::Heuristic,
        budget: 1_000_000,
        base_seed: 0xacc10,
        warm_start: true,
    };
    let records = run_sweep(&plan).unwrap();
    assert_eq!(records.len(), 90);
    let mut band_lo = f64::INFINITY;
    let mut band_hi = f64::NEG_INFINITY;
    for r in &records {
        let eps = E_INV - r.lambda;
        let band = r.l as f64 * eps / (r.n as f64).ln();
        band_lo = band_lo.min(band);
        band_hi = band_hi.max(band);
        assert!(
            (0.02..=50.0).contains(&band),
            "criterion 10: FAIL - n={}, eps={eps:.2}: L={} gives L*eps/ln n = {band}",
            r.n,
            r.l
        );
    }
    // growth in n at each fixed gap
    let mut rho_n: Vec<(f64, f64)> = Vec::new();
    for &eps in &plan.lambda_values {
        let pts: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| (E_INV - r.lambda - eps).abs() < 1e-12)
            .map(|r| (r.n as f64, r.l as f64))
            .collect();
        assert_eq!(pts.len(), 30);
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        rho_n.push((eps, spearman(&xs, &ys).unwrap()));
    }
    // growth in 1/eps at each fixed n
    let mut rho_e: Vec<(usize, f64)> = Vec::new();
    for &n in &plan.n_grid {
        let pts: Vec<(f64, f64)> = records
            .iter()
            .filter(|r| r.n == n)
            .map(|r| (1.0 / (E_INV - r.lambda), r.l as f64))
            .collect();
        assert_eq!(pts.len(), 30);
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        rho_e.push((n, spearman(&xs, &ys).unwrap()));
    }
    let secs = start.elapsed().as_secs_f64();
    // full measurement first, so a failed assertion still leaves the
    // evidence in the test output
    println!(
        "criterion 10: measured - 90 records, band [{band_lo:.3}, {band_hi:.3}], \
         Spearman(L, n) per eps {rho_n:.3?}, Spearman(L, 1/eps) per n {rho_e:.3?}, {secs:.0} s"
    );
    for &(eps, rho) in &rho_n {
        assert!(
            rho > 0.8,
            "criterion 10: FAIL - Spearman(L, n) = {rho:.3} at eps {eps}"
        );
    }
    for &(n, rho) in &rho_e {
        assert!(
            rho > 0.8,
            "criterion 10: FAIL - Spearman(L, 1/eps) = {rho:.3} at n {n}"
        );
    }
    assert!(secs < 1800.0, "criterion 10: FAIL - took {secs:.1} s, budget 1800 s");
    println!(
        "criterion 10: PASS - 90 records, band [{band_lo:.3}, {band_hi:.3}], both axes monotone, {secs:.0} s"
    );
}
