//! Closed-form tail machinery for the model: Gamma path-weight tails, path
//! counting, union bounds, expected counts of window events, first-moment
//! length certificates, and the small-gap law of the Brownian bridge maximum.
//!
//! All pipeline probabilities are carried in natural-log scale; counts like
//! n^(l+1) and tails like n^(-l) overflow and underflow f64 long before the
//! regimes of interest.

use crate::error::{invalid_arg, Error, Result};

const LN_2PI: f64 = 1.8378770664093454835606594728112353;

/// ln(k!) with absolute error well under 1e-12 relative for all k.
/// Exact cumulative logs below 1024, Stirling series above.
pub fn ln_factorial(k: u64) -> f64 {
    use std::sync::OnceLock;
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    let table = TABLE.get_or_init(|| {
        let mut t = vec![0.0f64; 1024];
        let mut acc = 0.0;
        for i in 1..1024u64 {
            acc += (i as f64).ln();
            t[i as usize] = acc;
        }
        t
    });
    if k < 1024 {
        table[k as usize]
    } else {
        ln_gamma_stirling(k as f64 + 1.0)
    }
}

/// Stirling series for ln Gamma(x), accurate to ~1e-26 relative for x >= 1024.
fn ln_gamma_stirling(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    (x - 0.5) * x.ln() - x
        + 0.5 * LN_2PI
        + inv * (1.0 / 12.0 + inv2 * (-1.0 / 360.0 + inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

fn check_gamma_args(theta: f64, k: u64) -> Result<()> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::Domain(format!("scale must be positive and finite, got {theta}")));
    }
    if k == 0 {
        return Err(Error::Domain("shape k must be at least 1".into()));
    }
    Ok(())
}

/// Log density of the sum of `k` independent exponentials with mean `theta`
/// (the Gamma(scale = theta, integer shape = k) density) at z >= 0:
/// ln of z^(k-1) e^(-z/theta) / (theta^k (k-1)!).
pub fn gamma_log_pdf(theta: f64, k: u64, z: f64) -> Result<f64> {
    check_gamma_args(theta, k)?;
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("density argument must be nonnegative, got {z}")));
    }
    if z == 0.0 {
        // k = 1 gives the exponential density at 0; higher shapes vanish
        return Ok(if k == 1 { -theta.ln() } else { f64::NEG_INFINITY });
    }
    Ok((k as f64 - 1.0) * z.ln() - z / theta - k as f64 * theta.ln() - ln_factorial(k - 1))
}

/// Regularized lower incomplete gamma P(k, x) in log scale, for integer
/// shape k >= 1. Series below the shape, continued fraction above; the log
/// form stays exact down to tails like e^(-1400).
pub fn log_gamma_p(k: u64, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("shape k must be at least 1".into()));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("incomplete gamma argument must be >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let a = k as f64;
    if x < a + 1.0 {
        // P(k,x) = x^k e^-x / k! * sum_{j>=0} x^j / prod_{t=1..j} (k+t)
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        for j in 1..100_000u64 {
            term *= x / (a + j as f64);
            sum += term;
            if term < sum * 1e-17 {
                return Ok(a * x.ln() - x - ln_factorial(k) + sum.ln());
            }
        }
        Err(Error::Domain(format!("series for P({k}, {x}) did not converge")))
    } else {
        // upper tail Q(k,x) by Lentz's continued fraction, then P = 1 - Q
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..100_000u64 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                let ln_q = a * x.ln() - x - ln_factorial(k - 1) + h.ln();
                let q = ln_q.exp();
                return Ok(if q >= 1.0 { f64::NEG_INFINITY } else { (-q).ln_1p() });
            }
        }
        Err(Error::Domain(format!("continued fraction for Q({k}, {x}) did not converge")))
    }
}

/// P(sum of k exponentials of mean theta <= z), absolute error under 1e-12.
pub fn gamma_cdf(theta: f64, k: u64, z: f64) -> Result<f64> {
    check_gamma_args(theta, k)?;
    if !z.is_finite() || z < 0.0 {
        return Err(Error::Domain(format!("cdf argument must be nonnegative and finite, got {z}")));
    }
    Ok(log_gamma_p(k, z / theta)?.exp())
}

/// ln of the number of ordered simple paths with `len` edges on n vertices:
/// ln(n (n-1) ... (n-len)).
pub fn count_paths(n: usize, len: usize) -> Result<f64> {
    if len == 0 || len >= n {
        return invalid_arg(format!("need 1 <= len <= n-1, got len={len}, n={n}"));
    }
    Ok((0..=len).map(|i| ((n - i) as f64).ln()).sum())
}

/// ln of a union bound on the probability that any path is atypically light:
/// sum over lengths of (path count) * P(weight <= len/e - ln n), with the
/// weight of a length-len path distributed Gamma(scale n, shape len).
/// Lengths whose threshold is nonpositive contribute nothing.
pub fn atypical_union_bound(n: usize) -> Result<f64> {
    if n < 3 {
        return invalid_arg(format!("union bound needs n >= 3, got {n}"));
    }
    let ln_n = (n as f64).ln();
    let mut terms = Vec::new();
    let mut ln_paths = ln_n;
    for len in 1..n {
        ln_paths += ((n - len) as f64).ln();
        let z = (len as f64) / std::f64::consts::E - ln_n;
        if z <= 0.0 {
            continue;
        }
        terms.push(ln_paths + log_gamma_p(len as u64, z / n as f64)?);
    }
    Ok(log_sum_exp(&terms))
}

/// log(sum of exp(terms)); -inf for an empty slice.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// log(exp(a) - exp(b)) for a >= b.
fn log_diff_exp(a: f64, b: f64) -> f64 {
    debug_assert!(a >= b);
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a == b {
        return f64::NEG_INFINITY;
    }
    a + (-((b - a).exp())).ln_1p()
}

/// A window event for a path of `len` edges: total weight inside
/// [lambda*len - window, lambda*len] and prefix deviation under a cap.
///
/// The cap is `trunc` as an absolute bound; with `normalized` set, the bound
/// tightens proportionally to total weight relative to lambda*len (so lighter
/// paths get a stricter cap).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventSpec {
    pub len: usize,
    pub lambda: f64,
    /// Width of the weight window; the bounds pipeline uses 1.
    pub window: f64,
    /// Deviation cap (infinite = no deviation requirement).
    pub trunc: f64,
    /// Whether the cap scales with total weight over lambda*len.
    pub normalized: bool,
}

impl EventSpec {
    /// Window event with an absolute deviation cap.
    pub fn with_cap(len: usize, lambda: f64, cap: f64) -> EventSpec {
        EventSpec { len, lambda, window: 1.0, trunc: cap, normalized: false }
    }

    /// Window event whose cap scales with total weight relative to lambda*len.
    pub fn with_scaled_cap(len: usize, lambda: f64, cap: f64) -> EventSpec {
        EventSpec { len, lambda, window: 1.0, trunc: cap, normalized: true }
    }

    /// Window event with the conventional absolute cap ln(n)/10.
    pub fn with_tenth_log_cap(len: usize, lambda: f64, n: usize) -> EventSpec {
        EventSpec {
            len,
            lambda,
            window: 1.0,
            trunc: (n as f64).ln() / 10.0,
            normalized: false,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.len == 0 || self.len >= n {
            return invalid_arg(format!("event length {} out of range for n = {n}", self.len));
        }
        if !(self.lambda > 0.0) {
            return invalid_arg("event lambda must be positive");
        }
        if !(self.window > 0.0) {
            return invalid_arg("event window must be positive");
        }
        if !(self.trunc > 0.0) {
            return invalid_arg("event deviation cap must be positive");
        }
        Ok(())
    }
}

/// ln of the weight-window probability of `spec` at size n:
/// ln P(lambda*len - window <= Gamma(scale n, shape len) <= lambda*len).
pub fn window_log_prob(n: usize, spec: &EventSpec) -> Result<f64> {
    spec.validate(n)?;
    let theta = n as f64;
    let z_hi = spec.lambda * spec.len as f64;
    let z_lo = z_hi - spec.window;
    let hi = log_gamma_p(spec.len as u64, z_hi / theta)?;
    if z_lo <= 0.0 {
        return Ok(hi);
    }
    let lo = log_gamma_p(spec.len as u64, z_lo / theta)?;
    Ok(log_diff_exp(hi, lo))
}

/// ln of the expected number of paths realizing the event: path count times
/// window probability times the (externally estimated) probability that the
/// deviation stays under the cap.
pub fn expected_count(n: usize, spec: &EventSpec, dev_prob: f64) -> Result<f64> {
    if !(dev_prob > 0.0 && dev_prob <= 1.0) {
        return invalid_arg(format!("dev_prob must be in (0, 1], got {dev_prob}"));
    }
    Ok(count_paths(n, spec.len)? + window_log_prob(n, spec)? + dev_prob.ln())
}

/// Smallest length whose window union bound certifies P(L >= length) <= fail_prob:
/// the smallest l with sum over l' in [l, 2l) of
/// (paths of length l') * P(weight <= lambda*l') at most fail_prob.
/// Sound because any path of length >= l contains a piece with length in
/// [l, 2l) and average weight no larger. None if no length qualifies.
pub fn first_moment_upper_certificate(n: usize, lambda: f64, fail_prob: f64) -> Result<Option<usize>> {
    if n < 2 {
        return invalid_arg(format!("need n >= 2, got {n}"));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return invalid_arg(format!("lambda must be positive and finite, got {lambda}"));
    }
    if !(fail_prob > 0.0 && fail_prob <= 1.0) {
        return invalid_arg(format!("fail_prob must be in (0, 1], got {fail_prob}"));
    }
    let theta = n as f64;
    // per-length terms ln(count * tail), memoized once and reused by every window
    let mut terms: Vec<f64> = vec![f64::NEG_INFINITY];
    let mut ln_count = (n as f64).ln();
    let ln_fail = fail_prob.ln();
    for l in 1..n {
        let hi = (2 * l - 1).min(n - 1);
        while terms.len() <= hi {
            let len = terms.len();
            ln_count += ((n - len) as f64).ln();
            terms.push(ln_count + log_gamma_p(len as u64, lambda * len as f64 / theta)?);
        }
        let ln_sum = log_sum_exp(&terms[l..=hi]);
        if ln_sum.min(0.0) <= ln_fail {
            return Ok(Some(l));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BridgeTailMode {
    /// Leading-order small-gap form sqrt(2 pi)/delta * exp(-pi^2/(8 delta^2)).
    Asymptotic,
    /// Full expansion, truncated when the next term drops below 1e-16 of the
    /// partial sum; exact for every delta.
    Series,
}

/// P(max over [0,1] of |Brownian bridge| <= delta).
pub fn bridge_lowertail(delta: f64, mode: BridgeTailMode) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!("gap must be positive and finite, got {delta}")));
    }
    let pref = (2.0 * std::f64::consts::PI).sqrt() / delta;
    let rate = std::f64::consts::PI.powi(2) / (8.0 * delta * delta);
    match mode {
        BridgeTailMode::Asymptotic => Ok(pref * (-rate).exp()),
        BridgeTailMode::Series => {
            let v = if delta < 1.0 {
                // odd-term theta expansion; all terms positive
                let mut sum = 0.0f64;
                let mut k = 1u64;
                loop {
                    let t = (-((k * k) as f64) * rate).exp();
                    sum += t;
                    k += 2;
                    let next = (-((k * k) as f64) * rate).exp();
                    // the == 0 arm also stops when every term underflows
                    if next < 1e-16 * sum || next == 0.0 {
                        break;
                    }
                }
                pref * sum
            } else {
                // alternating expansion; fast for wide gaps
                let mut sum = 0.0f64;
                let mut k = 1u64;
                loop {
                    let t = (-2.0 * (k * k) as f64 * delta * delta).exp();
                    sum += if k % 2 == 1 { t } else { -t };
                    k += 1;
                    let next = (-2.0 * (k * k) as f64 * delta * delta).exp();
                    if next < 1e-16 * sum.abs() || next == 0.0 {
                        break;
                    }
                }
                1.0 - 2.0 * sum
            };
            Ok(v.clamp(0.0, 1.0))
        }
    }
}
