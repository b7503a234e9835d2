//! Corridor probabilities of conditioned increment sequences.
//!
//! s independent mean-1 exponential increments conditioned on their total
//! have prefix sums distributed as the order statistics of s-1 iid uniforms
//! on (0, total). The corridor event asks every prefix sum T_k to stay
//! within r of the line rho*k. Pinned blocks freeze chosen increments; the
//! free increments are then the smaller conditioned system, and pinned mass
//! shifts the corridor seen by each free prefix sum.
//!
//! Estimation is by sequential sampling: given T at the previous free level
//! and m interior points remaining, the next order statistic is the minimum
//! of m iid uniforms on the remaining range. Each step samples from that
//! law restricted to the corridor and multiplies the replicate weight by
//! the restricted mass, so the mean weight is an unbiased estimate of the
//! corridor probability even when it is far below any hit-counting floor.

use rayon::prelude::*;

use crate::analytic::{ln_factorial, log_sum_exp};
use crate::error::{invalid_arg, Result};
use crate::rng::{derive_seed, Rng64};

/// A run of consecutive increments frozen to explicit values.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnedBlock {
    /// Index of the first pinned increment (0-based).
    pub start: usize,
    pub values: Vec<f64>,
}

impl PinnedBlock {
    pub fn mass(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// s increments conditioned on summing to `total`, with optional pins.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedSequenceSpec {
    pub s: usize,
    /// Target slope of the prefix sums.
    pub rho: f64,
    /// Conditioned total; the canonical choice is rho * s.
    pub total: f64,
    pub pins: Vec<PinnedBlock>,
}

impl ConditionedSequenceSpec {
    pub fn new(s: usize, rho: f64) -> Result<Self> {
        let spec = ConditionedSequenceSpec { s, rho, total: rho * s as f64, pins: Vec::new() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_pins(s: usize, rho: f64, pins: Vec<PinnedBlock>) -> Result<Self> {
        let spec = ConditionedSequenceSpec { s, rho, total: rho * s as f64, pins };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.s < 2 {
            return invalid_arg(format!("need at least 2 increments, got {}", self.s));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return invalid_arg(format!("slope must be positive and finite, got {}", self.rho));
        }
        if !(self.total > 0.0) || !self.total.is_finite() {
            return invalid_arg(format!("total must be positive and finite, got {}", self.total));
        }
        let mut blocks: Vec<(usize, usize)> = Vec::new();
        for b in &self.pins {
            if b.values.is_empty() {
                return invalid_arg("pinned block with no values");
            }
            if b.values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return invalid_arg("pinned values must be positive and finite");
            }
            if b.start + b.values.len() > self.s {
                return invalid_arg(format!(
                    "pinned block [{}, {}) runs past the last increment {}",
                    b.start,
                    b.start + b.values.len(),
                    self.s
                ));
            }
            blocks.push((b.start, b.start + b.values.len()));
        }
        blocks.sort_unstable();
        for w in blocks.windows(2) {
            if w[1].0 < w[0].1 {
                return invalid_arg("pinned blocks overlap");
            }
        }
        if self.pinned_count() + 1 > self.s {
            return invalid_arg("at least one increment must stay free");
        }
        if self.pinned_mass() >= self.total {
            return invalid_arg("pinned mass must stay below the conditioned total");
        }
        Ok(())
    }

    /// Number of pinned increments.
    pub fn pinned_count(&self) -> usize {
        self.pins.iter().map(|b| b.values.len()).sum()
    }

    pub fn pinned_mass(&self) -> f64 {
        self.pins.iter().map(|b| b.mass()).sum()
    }

    /// Number of free increments.
    pub fn free_count(&self) -> usize {
        self.s - self.pinned_count()
    }

    /// Pinned value per increment index.
    fn pin_table(&self) -> Vec<Option<f64>> {
        let mut t = vec![None; self.s];
        for b in &self.pins {
            for (off, v) in b.values.iter().enumerate() {
                t[b.start + off] = Some(*v);
            }
        }
        t
    }
}

/// One draw of the conditioned sequence: pinned values verbatim, free values
/// iid exponentials rescaled so the total matches exactly in law.
pub fn sample_conditioned(spec: &ConditionedSequenceSpec, rng: &mut Rng64) -> Result<Vec<f64>> {
    spec.validate()?;
    let pins = spec.pin_table();
    let mut values = vec![0.0f64; spec.s];
    let mut free_sum = 0.0;
    for (i, pin) in pins.iter().enumerate() {
        match pin {
            Some(v) => values[i] = *v,
            None => {
                let x = rng.next_exp(1.0);
                values[i] = x;
                free_sum += x;
            }
        }
    }
    let scale = (spec.total - spec.pinned_mass()) / free_sum;
    for (i, pin) in pins.iter().enumerate() {
        if pin.is_none() {
            values[i] *= scale;
        }
    }
    Ok(values)
}

/// Largest distance of any prefix sum from the line rho*k.
pub fn deviation_of(values: &[f64], rho: f64) -> f64 {
    let mut acc = 0.0f64;
    let mut worst = 0.0f64;
    for (k, v) in values.iter().enumerate() {
        acc += v;
        worst = worst.max((acc - rho * (k + 1) as f64).abs());
    }
    worst
}

/// A probability estimate with its empirical standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub p: f64,
    pub std_err: f64,
    pub reps: u64,
}

impl Estimate {
    pub fn ln_p(&self) -> f64 {
        self.p.ln()
    }

    /// Standard error of ln p by the delta method.
    pub fn ln_std_err(&self) -> f64 {
        self.std_err / self.p
    }
}

/// Fixed parallel stream count; results are independent of thread scheduling.
const CHUNKS: u64 = 64;

fn run_chunked<F>(reps: u64, seed: u64, body: F) -> (f64, f64)
where
    F: Fn(&mut Rng64, u64) -> (f64, f64) + Sync,
{
    let parts: Vec<(u64, u64)> = (0..CHUNKS)
        .map(|c| (c, reps / CHUNKS + u64::from(c < reps % CHUNKS)))
        .filter(|(_, k)| *k > 0)
        .collect();
    let partials: Vec<(f64, f64)> = parts
        .par_iter()
        .map(|(c, k)| {
            let mut rng = Rng64::new(derive_seed(seed, &[*c]));
            body(&mut rng, *k)
        })
        .collect();
    partials
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y))
}

fn summarize(sum: f64, sum_sq: f64, reps: u64) -> Estimate {
    let n = reps as f64;
    let p = sum / n;
    let std_err = if reps > 1 {
        (((sum_sq - sum * sum / n) / (n - 1.0)).max(0.0) / n).sqrt()
    } else {
        0.0
    };
    Estimate { p, std_err, reps }
}

/// Corridor constraints reduced to the free prefix sums: one target interval
/// per sampled level, plus the verdict of every pin-determined constraint.
struct CorridorPlan {
    free_total: f64,
    /// Interval for the j-th free prefix sum, j = 1..free_count-1.
    intervals: Vec<(f64, f64)>,
    feasible: bool,
}

fn build_plan(spec: &ConditionedSequenceSpec, r: f64) -> Result<CorridorPlan> {
    spec.validate()?;
    if !(r > 0.0) || !r.is_finite() {
        return invalid_arg(format!("corridor half-width must be positive and finite, got {r}"));
    }
    let pins = spec.pin_table();
    let f = spec.free_count();
    let free_total = spec.total - spec.pinned_mass();
    let mut intervals = vec![(0.0f64, free_total); f.saturating_sub(1)];
    let mut feasible = true;
    let mut pinned_prefix = 0.0f64;
    let mut free_seen = 0usize;
    for k in 1..=spec.s {
        match pins[k - 1] {
            Some(v) => pinned_prefix += v,
            None => free_seen += 1,
        }
        let target = spec.rho * k as f64;
        if free_seen == 0 || free_seen == f {
            // prefix sum fully determined by pins and the total
            let value = pinned_prefix + if free_seen == f { free_total } else { 0.0 };
            if (value - target).abs() > r {
                feasible = false;
            }
        } else {
            let slot = &mut intervals[free_seen - 1];
            slot.0 = slot.0.max(target - r - pinned_prefix);
            slot.1 = slot.1.min(target + r - pinned_prefix);
        }
    }
    if intervals.iter().any(|(lo, hi)| lo > hi) {
        feasible = false;
    }
    Ok(CorridorPlan { free_total, intervals, feasible })
}

/// Estimates the corridor probability by sequential in-corridor sampling.
/// Unbiased; resolves probabilities far below 1/reps. An infeasible plan
/// (a pin-determined prefix outside the corridor, or an empty level
/// interval) returns exactly zero without sampling.
pub fn estimate_p(
    spec: &ConditionedSequenceSpec,
    r: f64,
    reps: u64,
    seed: u64,
) -> Result<Estimate> {
    if reps == 0 {
        return invalid_arg("reps must be at least 1");
    }
    let plan = build_plan(spec, r)?;
    if !plan.feasible {
        return Ok(Estimate { p: 0.0, std_err: 0.0, reps });
    }
    let levels = plan.intervals.len();
    let total = plan.free_total;
    let (sum, sum_sq) = run_chunked(reps, seed, |rng, k| {
        let mut acc = 0.0f64;
        let mut acc_sq = 0.0f64;
        for _ in 0..k {
            let mut t = 0.0f64;
            let mut ln_w = 0.0f64;
            let mut alive = true;
            for (j, &(ilo, ihi)) in plan.intervals.iter().enumerate() {
                let m = (levels - j) as f64;
                let lo = ilo.max(t);
                let hi = ihi.min(total);
                if lo >= hi {
                    alive = false;
                    break;
                }
                let span = total - t;
                let ln_a = m * ((total - lo) / span).ln();
                let ln_b = if hi >= total {
                    f64::NEG_INFINITY
                } else {
                    m * ((total - hi) / span).ln()
                };
                // restricted mass of the min-of-m-uniforms law on [lo, hi]
                let ln_q = if ln_b == f64::NEG_INFINITY {
                    ln_a
                } else {
                    ln_a + (-((ln_b - ln_a).exp())).ln_1p()
                };
                if !ln_q.is_finite() {
                    alive = false;
                    break;
                }
                ln_w += ln_q;
                let u = rng.next_unit();
                // inverse cdf through the log of the survival coordinate
                let ln_tail = log_sum_exp(&[ln_a + (1.0 - u).ln(), ln_b + u.ln()]);
                t = (total - span * (ln_tail / m).exp()).clamp(lo, hi);
            }
            if alive {
                let w = ln_w.exp();
                acc += w;
                acc_sq += w * w;
            }
        }
        (acc, acc_sq)
    });
    Ok(summarize(sum, sum_sq, reps))
}

/// Estimates the corridor probability by plain hit counting on conditioned
/// draws. The floor is 1/reps; kept as an independent cross-check of the
/// sequential estimator at moderate probabilities.
pub fn estimate_p_direct(
    spec: &ConditionedSequenceSpec,
    r: f64,
    reps: u64,
    seed: u64,
) -> Result<Estimate> {
    if reps == 0 {
        return invalid_arg("reps must be at least 1");
    }
    if !(r > 0.0) || !r.is_finite() {
        return invalid_arg(format!("corridor half-width must be positive and finite, got {r}"));
    }
    spec.validate()?;
    let (sum, sum_sq) = run_chunked(reps, seed, |rng, k| {
        let mut hits = 0u64;
        for _ in 0..k {
            let values = sample_conditioned(spec, rng).expect("validated spec");
            if deviation_of(&values, spec.rho) <= r {
                hits += 1;
            }
        }
        (hits as f64, hits as f64)
    });
    Ok(summarize(sum, sum_sq, reps))
}

/// Exact ln of the corridor probability for a pin-free spec with the
/// canonical total rho*s, by a count-distribution recursion over the
/// constraint thresholds of the rescaled uniform order statistics.
/// O(s^3) work; the reference the samplers are tested against.
pub fn exact_corridor_log_prob(s: usize, rho: f64, r: f64) -> Result<f64> {
    if s < 2 {
        return invalid_arg(format!("need at least 2 increments, got {s}"));
    }
    if !(rho > 0.0) || !rho.is_finite() || !(r > 0.0) || !r.is_finite() {
        return invalid_arg("slope and half-width must be positive and finite");
    }
    // rescale by rho: s-1 uniforms on (0, s), corridor half-width r/rho
    let r_eff = r / rho;
    let f = s - 1;
    let span = s as f64;
    // threshold -> (min count, max count); exact float merge is safe because
    // equal thresholds come from identical expressions
    let mut events: Vec<(f64, usize, usize)> = Vec::new();
    for k in 1..s {
        let a = k as f64 - r_eff;
        if a > 0.0 {
            events.push((a, 0, k - 1));
        }
        let b = k as f64 + r_eff;
        if b < span {
            events.push((b, k, f));
        }
    }
    events.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut merged: Vec<(f64, usize, usize)> = Vec::new();
    for (pos, lo, hi) in events {
        match merged.last_mut() {
            Some(m) if m.0 == pos => {
                m.1 = m.1.max(lo);
                m.2 = m.2.min(hi);
            }
            _ => merged.push((pos, lo, hi)),
        }
    }
    let mut dist = vec![0.0f64; f + 1];
    dist[0] = 1.0;
    let mut ln_p = 0.0f64;
    let mut t = 0.0f64;
    for (pos, lo, hi) in merged {
        let step = (pos - t) / (span - t);
        let ln_step = step.ln();
        let ln_stay = (-step).ln_1p();
        let mut next = vec![0.0f64; f + 1];
        for c in 0..=f {
            if dist[c] == 0.0 {
                continue;
            }
            let rem = (f - c) as u64;
            for d in 0..=(f - c) {
                let ln_w = ln_factorial(rem) - ln_factorial(d as u64) - ln_factorial(rem - d as u64)
                    + d as f64 * ln_step
                    + (rem - d as u64) as f64 * ln_stay;
                next[c + d] += dist[c] * ln_w.exp();
            }
        }
        for (c, v) in next.iter_mut().enumerate() {
            if c < lo || c > hi {
                *v = 0.0;
            }
        }
        let mass: f64 = next.iter().sum();
        if mass == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        ln_p += mass.ln();
        for v in next.iter_mut() {
            *v /= mass;
        }
        dist = next;
        t = pos;
    }
    Ok(ln_p)
}

/// One measured corridor probability, keyed by its geometry.
#[derive(Debug, Clone)]
pub struct RateObservation {
    pub s: usize,
    pub rho: f64,
    pub r: f64,
    pub estimate: Estimate,
}

/// One fitted point: the decay rate is -ln p normalized by s/(r/rho)^2.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RatePoint {
    pub s: usize,
    pub x: f64,
    pub rate: Option<f64>,
    /// True when the estimate is exactly zero (no replicate survived); such
    /// points carry no usable log and are excluded from the fit.
    pub censored: bool,
    /// One-sided 95% bound for a censored point by the rule of three: 3/reps.
    pub p_upper_95: Option<f64>,
}

/// Least-squares fit of -ln p against s/(r/rho)^2.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub slope_std_err: f64,
    pub intercept: f64,
    pub points: Vec<RatePoint>,
    /// Observations actually entering the regression.
    pub used: usize,
}

/// Fits the exponential decay rate of corridor probabilities: regress
/// -ln p on x = s/(r/rho)^2 over the uncensored observations.
pub fn fit_deviation_rate(observations: &[RateObservation]) -> Result<RateFit> {
    if observations.is_empty() {
        return invalid_arg("rate fit needs at least one observation");
    }
    let mut points = Vec::with_capacity(observations.len());
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for o in observations {
        if !(o.r > 0.0) || !(o.rho > 0.0) || o.s < 2 {
            return invalid_arg("malformed rate observation");
        }
        let r_eff = o.r / o.rho;
        let x = o.s as f64 / (r_eff * r_eff);
        let censored = !(o.estimate.p > 0.0);
        let rate = (!censored).then(|| -o.estimate.ln_p() / x);
        if !censored {
            xs.push(x);
            ys.push(-o.estimate.ln_p());
        }
        points.push(RatePoint {
            s: o.s,
            x,
            rate,
            censored,
            p_upper_95: censored.then(|| 3.0 / o.estimate.reps as f64),
        });
    }
    let n = xs.len();
    if n < 2 {
        return invalid_arg(format!("rate fit needs at least 2 uncensored observations, got {n}"));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return invalid_arg("rate fit needs at least two distinct x values");
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let slope_std_err = if n > 2 { (rss / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(RateFit { slope, slope_std_err, intercept, points, used: n })
}

/// Splitting comparison of corridor probabilities: is
/// p(s1 + s2) >= p(s1) * p(s2) / (1e8 * r * sqrt(min(s1, s2)))
/// supported by the estimates beyond three combined standard errors?
#[derive(Debug, Clone, Copy)]
pub struct SplitCheck {
    /// ln p(whole) - ln p(s1) - ln p(s2) + ln(1e8 r) + ln sqrt(min(s1, s2)).
    pub margin: f64,
    /// Combined standard error of the margin, in ln units.
    pub combined_std_err: f64,
    pub certified: bool,
}

pub fn check_superadditivity(
    first: (usize, &Estimate),
    second: (usize, &Estimate),
    whole: &Estimate,
    r: f64,
) -> Result<SplitCheck> {
    let (s1, e1) = first;
    let (s2, e2) = second;
    if s1 < 2 || s2 < 2 {
        return invalid_arg("split parts need at least 2 increments each");
    }
    if !(r > 0.0) || !r.is_finite() {
        return invalid_arg(format!("corridor half-width must be positive and finite, got {r}"));
    }
    for e in [e1, e2, whole] {
        if !(e.p > 0.0) {
            return invalid_arg("splitting check needs strictly positive estimates");
        }
    }
    let slack = (1e8 * r).ln() + 0.5 * (s1.min(s2) as f64).ln();
    let margin = whole.ln_p() - e1.ln_p() - e2.ln_p() + slack;
    let combined_std_err = (e1.ln_std_err().powi(2)
        + e2.ln_std_err().powi(2)
        + whole.ln_std_err().powi(2))
    .sqrt();
    Ok(SplitCheck { margin, combined_std_err, certified: margin >= 3.0 * combined_std_err })
}

/// Outcome of the pinned-versus-free comparison.
#[derive(Debug, Clone)]
pub struct PinnedComparison {
    pub pinned: Estimate,
    pub baseline: Estimate,
    pub pinned_log10: f64,
    pub bound_log10: f64,
    /// bound - pinned in log10 units; nonnegative means the bound holds.
    pub margin_log10: f64,
    pub combined_std_err_log10: f64,
    pub certified: bool,
}

/// Compares the pinned corridor probability against the free one blown up by
/// the tolerance factor r * sqrt(min(q, s-q)) * 10^(100 m r) * e^(c_star q / r^2),
/// where q increments sit in m pinned blocks. Hypotheses enforced:
/// r <= sqrt(s), q <= s - 10 r, every block mass at most 2 r, and the slope
/// in [1/4, 1]. `c_star` must upper-bound the corridor decay rate.
pub fn check_pinned_conditioning(
    spec: &ConditionedSequenceSpec,
    r: f64,
    c_star: f64,
    reps: u64,
    seed: u64,
) -> Result<PinnedComparison> {
    spec.validate()?;
    if spec.pins.is_empty() {
        return invalid_arg("pinned comparison needs at least one pinned block");
    }
    if !(r > 0.0) || !r.is_finite() {
        return invalid_arg(format!("corridor half-width must be positive and finite, got {r}"));
    }
    if !(c_star > 0.0) || !c_star.is_finite() {
        return invalid_arg(format!("rate bound must be positive and finite, got {c_star}"));
    }
    let s = spec.s;
    let q = spec.pinned_count();
    let m = spec.pins.len();
    if r * r > s as f64 {
        return invalid_arg(format!("hypothesis violated: need r <= sqrt(s), got r={r}, s={s}"));
    }
    if q as f64 > s as f64 - 10.0 * r {
        return invalid_arg(format!(
            "hypothesis violated: need q <= s - 10r, got q={q}, s={s}, r={r}"
        ));
    }
    for b in &spec.pins {
        if b.mass() > 2.0 * r {
            return invalid_arg(format!(
                "hypothesis violated: block mass {} exceeds 2r = {}",
                b.mass(),
                2.0 * r
            ));
        }
    }
    if !(0.25..=1.0).contains(&spec.rho) {
        return invalid_arg(format!("hypothesis violated: slope {} outside [1/4, 1]", spec.rho));
    }
    let pinned = estimate_p(spec, r, reps, derive_seed(seed, &[1]))?;
    let mut free_spec = spec.clone();
    free_spec.pins.clear();
    let baseline = estimate_p(&free_spec, r, reps, derive_seed(seed, &[2]))?;

    if pinned.p == 0.0 {
        return Ok(PinnedComparison {
            pinned,
            baseline,
            pinned_log10: f64::NEG_INFINITY,
            bound_log10: f64::NEG_INFINITY.max(baseline.p.log10()),
            margin_log10: f64::INFINITY,
            combined_std_err_log10: 0.0,
            certified: true,
        });
    }
    if baseline.p == 0.0 {
        return invalid_arg("baseline estimate vanished; raise reps");
    }
    let ln10 = std::f64::consts::LN_10;
    let pinned_log10 = pinned.p.log10();
    let bound_log10 = r.log10()
        + 0.5 * (q.min(s - q) as f64).log10()
        + 100.0 * m as f64 * r
        + c_star * q as f64 / (r * r) / ln10
        + baseline.p.log10();
    let combined_std_err_log10 =
        (pinned.ln_std_err().powi(2) + baseline.ln_std_err().powi(2)).sqrt() / ln10;
    let margin_log10 = bound_log10 - pinned_log10;
    Ok(PinnedComparison {
        pinned,
        baseline,
        pinned_log10,
        bound_log10,
        margin_log10,
        combined_std_err_log10,
        certified: margin_log10 >= 3.0 * combined_std_err_log10,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference grid from an independent arbitrary-precision recursion
    const UNIT_SLOPE_GRID: [(usize, f64); 5] = [
        (16, -1.4570),
        (32, -3.9403),
        (64, -9.2496),
        (128, -20.2128),
        (256, -42.4847),
    ];
    const HALF_SLOPE_GRID: [(usize, f64); 5] = [
        (16, -0.1323),
        (32, -0.6978),
        (64, -2.1762),
        (80, -2.9768),
        (128, -5.4780),
    ];

    #[test]
    fn exact_recursion_reproduces_reference_grid() {
        for (s, want) in UNIT_SLOPE_GRID {
            let got = exact_corridor_log_prob(s, 1.0, 2.0).unwrap();
            assert!((got - want).abs() < 1e-3, "s={s}: {got} vs {want}");
        }
        for (s, want) in HALF_SLOPE_GRID {
            let got = exact_corridor_log_prob(s, 0.5, 2.0).unwrap();
            assert!((got - want).abs() < 1e-3, "s={s}: {got} vs {want}");
        }
    }

    #[test]
    fn exact_recursion_closed_forms() {
        // corridor wider than the whole range: certain event
        assert_eq!(exact_corridor_log_prob(8, 1.0, 9.0).unwrap(), 0.0);
        // two increments: single uniform on (0, 2 rho), mass r/rho around rho
        for (rho, r) in [(1.0, 0.3), (0.5, 0.2), (2.0, 1.0)] {
            let got = exact_corridor_log_prob(2, rho, r).unwrap();
            let want = (r / rho).min(1.0).ln();
            assert!((got - want).abs() < 1e-12, "rho={rho} r={r}");
        }
    }

    #[test]
    fn sequential_estimator_matches_exact() {
        for (s, rho, r) in [(8usize, 1.0, 1.5), (16, 1.0, 2.0), (16, 0.5, 1.0), (32, 1.0, 3.0)] {
            let spec = ConditionedSequenceSpec::new(s, rho).unwrap();
            let est = estimate_p(&spec, r, 40_000, 11).unwrap();
            let exact = exact_corridor_log_prob(s, rho, r).unwrap().exp();
            assert!(
                (est.p - exact).abs() <= 4.0 * est.std_err + 1e-12,
                "s={s} rho={rho} r={r}: {} vs {exact} (se {})",
                est.p,
                est.std_err
            );
        }
    }

    #[test]
    fn direct_estimator_matches_exact() {
        for (s, rho, r) in [(8usize, 1.0, 1.5), (16, 0.5, 1.5)] {
            let spec = ConditionedSequenceSpec::new(s, rho).unwrap();
            let est = estimate_p_direct(&spec, r, 40_000, 7).unwrap();
            let exact = exact_corridor_log_prob(s, rho, r).unwrap().exp();
            assert!(
                (est.p - exact).abs() <= 4.0 * est.std_err + 1e-12,
                "s={s} rho={rho} r={r}: {} vs {exact}",
                est.p
            );
        }
    }

    #[test]
    fn sequential_resolves_deep_tails() {
        let spec = ConditionedSequenceSpec::new(128, 1.0).unwrap();
        let est = estimate_p(&spec, 2.0, 100_000, 3).unwrap();
        let want = -20.2128;
        assert!(est.p > 0.0);
        let rel = est.ln_std_err();
        assert!(rel < 0.2, "weight spread too wide: {rel}");
        assert!(
            (est.ln_p() - want).abs() <= 4.0 * rel + 1e-3,
            "ln p {} vs {want} (ln se {rel})",
            est.ln_p()
        );
    }

    #[test]
    fn estimator_is_deterministic_and_chunk_stable() {
        let spec = ConditionedSequenceSpec::new(16, 1.0).unwrap();
        let a = estimate_p(&spec, 2.0, 10_000, 5).unwrap();
        let b = estimate_p(&spec, 2.0, 10_000, 5).unwrap();
        assert_eq!(a.p.to_bits(), b.p.to_bits());
        assert_eq!(a.std_err.to_bits(), b.std_err.to_bits());
    }

    #[test]
    fn certain_corridor_gives_exact_one() {
        let spec = ConditionedSequenceSpec::new(8, 1.0).unwrap();
        let est = estimate_p(&spec, 8.0, 100, 1).unwrap();
        assert_eq!(est.p, 1.0);
        assert_eq!(est.std_err, 0.0);
    }

    #[test]
    fn infeasible_pins_give_exact_zero() {
        // determined prefix outside the corridor
        let spec = ConditionedSequenceSpec::with_pins(
            10,
            1.0,
            vec![PinnedBlock { start: 0, values: vec![5.0] }],
        )
        .unwrap();
        let est = estimate_p(&spec, 0.5, 1000, 1).unwrap();
        assert_eq!(est.p, 0.0);
        assert_eq!(est.std_err, 0.0);
        // pinned mass pushes two constraints of one level apart
        let spec = ConditionedSequenceSpec::with_pins(
            10,
            1.0,
            vec![PinnedBlock { start: 4, values: vec![4.0] }],
        )
        .unwrap();
        let est = estimate_p(&spec, 0.6, 1000, 1).unwrap();
        assert_eq!(est.p, 0.0);
    }

    #[test]
    fn pinned_estimates_match_direct() {
        let spec = ConditionedSequenceSpec::with_pins(
            12,
            1.0,
            vec![PinnedBlock { start: 5, values: vec![1.0, 1.2] }],
        )
        .unwrap();
        let seq = estimate_p(&spec, 2.5, 60_000, 9).unwrap();
        let dir = estimate_p_direct(&spec, 2.5, 60_000, 10).unwrap();
        let combined = (seq.std_err.powi(2) + dir.std_err.powi(2)).sqrt();
        assert!(
            (seq.p - dir.p).abs() <= 4.0 * combined,
            "sequential {} vs direct {} (se {combined})",
            seq.p,
            dir.p
        );
    }

    #[test]
    fn conditioned_draws_respect_pins_and_total() {
        let spec = ConditionedSequenceSpec::with_pins(
            20,
            0.5,
            vec![
                PinnedBlock { start: 3, values: vec![0.25, 0.5] },
                PinnedBlock { start: 11, values: vec![0.125] },
            ],
        )
        .unwrap();
        let mut rng = Rng64::new(42);
        for _ in 0..50 {
            let v = sample_conditioned(&spec, &mut rng).unwrap();
            assert_eq!(v.len(), 20);
            assert_eq!(v[3], 0.25);
            assert_eq!(v[4], 0.5);
            assert_eq!(v[11], 0.125);
            assert!(v.iter().all(|x| *x > 0.0));
            let sum: f64 = v.iter().sum();
            assert!((sum - spec.total).abs() < 1e-9 * spec.total);
        }
    }

    #[test]
    fn two_increment_prefix_is_uniform() {
        // T_1 | T_2 = 2 is uniform on (0, 2); one-sample KS at the 1% level
        let spec = ConditionedSequenceSpec::new(2, 1.0).unwrap();
        let n = 20_000usize;
        let mut rng = Rng64::new(8);
        let mut firsts: Vec<f64> = (0..n)
            .map(|_| sample_conditioned(&spec, &mut rng).unwrap()[0])
            .collect();
        firsts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d = 0.0f64;
        for (i, x) in firsts.iter().enumerate() {
            let cdf = (x / 2.0).clamp(0.0, 1.0);
            d = d.max((cdf - i as f64 / n as f64).abs());
            d = d.max((cdf - (i + 1) as f64 / n as f64).abs());
        }
        assert!(d * (n as f64).sqrt() < 1.628, "KS statistic {d}");
    }

    #[test]
    fn deviation_of_known_sequences() {
        assert!(deviation_of(&[1.0, 1.0, 1.0], 1.0).abs() < 1e-15);
        // prefix sums 2, 3 against slope 1: gaps 1 and 1
        assert!((deviation_of(&[2.0, 1.0], 1.0) - 1.0).abs() < 1e-15);
        assert!((deviation_of(&[0.5, 0.5, 3.0], 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rate_fit_recovers_synthetic_slope() {
        let slope = 0.65;
        let intercept = 0.4;
        let mut obs = Vec::new();
        for s in [16usize, 32, 64, 128] {
            let x = s as f64 / 4.0;
            let p = (-(slope * x + intercept)).exp();
            obs.push(RateObservation {
                s,
                rho: 1.0,
                r: 2.0,
                estimate: Estimate { p, std_err: 0.0, reps: 1_000_000 },
            });
        }
        // a zero estimate is censored with its rule-of-three bound, not fitted
        obs.push(RateObservation {
            s: 4096,
            rho: 1.0,
            r: 2.0,
            estimate: Estimate { p: 0.0, std_err: 0.0, reps: 1000 },
        });
        let fit = fit_deviation_rate(&obs).unwrap();
        assert_eq!(fit.used, 4);
        assert!((fit.slope - slope).abs() < 1e-9);
        assert!((fit.intercept - intercept).abs() < 1e-9);
        assert!(fit.points[4].censored);
        assert!(fit.points[4].rate.is_none());
        assert!((fit.points[4].p_upper_95.unwrap() - 0.003).abs() < 1e-15);
        assert!(fit.points[3].p_upper_95.is_none());
        // tiny but positive estimates stay in: resolving them is the point
        // of the sequential sampler
        assert!(!fit.points[3].censored);
        assert!(fit.points[3].rate.is_some());
        assert_eq!(fit.points.len(), 5);
        let r0 = fit.points[0].rate.unwrap();
        assert!((r0 - (slope + intercept / 4.0)).abs() < 1e-9);
    }

    #[test]
    fn rate_fit_argument_errors() {
        assert!(fit_deviation_rate(&[]).is_err());
        let one = RateObservation {
            s: 16,
            rho: 1.0,
            r: 2.0,
            estimate: Estimate { p: 0.5, std_err: 0.01, reps: 1000 },
        };
        assert!(fit_deviation_rate(&[one.clone()]).is_err());
        assert!(fit_deviation_rate(&[one.clone(), one]).is_err());
    }

    #[test]
    fn splitting_margin_on_exact_values() {
        let p = |s: usize| {
            let lp = exact_corridor_log_prob(s, 0.5, 2.0).unwrap();
            Estimate { p: lp.exp(), std_err: 0.0, reps: 1 }
        };
        for (a, b) in [(16usize, 16usize), (16, 64), (64, 64)] {
            let whole = p(a + b);
            let check = check_superadditivity((a, &p(a)), (b, &p(b)), &whole, 2.0).unwrap();
            assert!(check.certified);
            assert!(check.margin > 15.0, "margin {}", check.margin);
        }
    }

    #[test]
    fn pinned_comparison_certifies_small_case() {
        let spec = ConditionedSequenceSpec::with_pins(
            64,
            0.5,
            vec![PinnedBlock { start: 30, values: vec![0.6, 0.5] }],
        )
        .unwrap();
        let out = check_pinned_conditioning(&spec, 2.0, 0.8, 20_000, 77).unwrap();
        assert!(out.certified, "margin {}", out.margin_log10);
        assert!(out.margin_log10 > 0.0);
        assert!(out.pinned.p > 0.0 && out.baseline.p > 0.0);
    }

    #[test]
    fn pinned_comparison_enforces_hypotheses() {
        let pins = vec![PinnedBlock { start: 10, values: vec![0.5] }];
        let spec = ConditionedSequenceSpec::with_pins(64, 0.5, pins.clone()).unwrap();
        // r above sqrt(s)
        assert!(check_pinned_conditioning(&spec, 9.0, 0.8, 100, 1).is_err());
        // slope outside [1/4, 1]
        let steep = ConditionedSequenceSpec::with_pins(64, 1.5, pins.clone()).unwrap();
        assert!(check_pinned_conditioning(&steep, 2.0, 0.8, 100, 1).is_err());
        // block mass above 2r
        let heavy = ConditionedSequenceSpec::with_pins(
            64,
            0.5,
            vec![PinnedBlock { start: 10, values: vec![3.0, 3.0] }],
        )
        .unwrap();
        assert!(check_pinned_conditioning(&heavy, 2.0, 0.8, 100, 1).is_err());
        // no pins at all
        let free = ConditionedSequenceSpec::new(64, 0.5).unwrap();
        assert!(check_pinned_conditioning(&free, 2.0, 0.8, 100, 1).is_err());
        // q past s - 10r
        let wide = ConditionedSequenceSpec::with_pins(
            24,
            0.5,
            vec![PinnedBlock { start: 0, values: vec![0.1; 8] }],
        )
        .unwrap();
        assert!(check_pinned_conditioning(&wide, 2.0, 0.8, 100, 1).is_err());
    }

    #[test]
    fn spec_validation_rejects_malformed_pins() {
        assert!(ConditionedSequenceSpec::new(1, 1.0).is_err());
        assert!(ConditionedSequenceSpec::new(8, 0.0).is_err());
        let overlap = vec![
            PinnedBlock { start: 2, values: vec![0.1, 0.1] },
            PinnedBlock { start: 3, values: vec![0.1] },
        ];
        assert!(ConditionedSequenceSpec::with_pins(8, 1.0, overlap).is_err());
        let past_end = vec![PinnedBlock { start: 7, values: vec![0.1, 0.1] }];
        assert!(ConditionedSequenceSpec::with_pins(8, 1.0, past_end).is_err());
        let all_pinned = vec![PinnedBlock { start: 0, values: vec![0.1; 8] }];
        assert!(ConditionedSequenceSpec::with_pins(8, 1.0, all_pinned).is_err());
        let too_heavy = vec![PinnedBlock { start: 0, values: vec![9.0] }];
        assert!(ConditionedSequenceSpec::with_pins(8, 1.0, too_heavy).is_err());
        let nonpositive = vec![PinnedBlock { start: 0, values: vec![0.0] }];
        assert!(ConditionedSequenceSpec::with_pins(8, 1.0, nonpositive).is_err());
    }

    #[test]
    fn estimate_argument_errors() {
        let spec = ConditionedSequenceSpec::new(8, 1.0).unwrap();
        assert!(estimate_p(&spec, 0.0, 100, 1).is_err());
        assert!(estimate_p(&spec, 1.0, 0, 1).is_err());
        assert!(estimate_p_direct(&spec, -1.0, 100, 1).is_err());
        assert!(exact_corridor_log_prob(1, 1.0, 1.0).is_err());
        assert!(exact_corridor_log_prob(8, 1.0, 0.0).is_err());
    }
}
