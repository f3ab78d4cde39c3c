//! Pass exponents, iterated logarithms, and pull-budget schedules.
//!
//! Everything downstream keys off three ingredient families:
//!
//! * `lambda_p` — the per-pass exponent `(2^(P-p+1) - 1) / (2^(P+1) - 1)`
//!   that splits the total budget `T` across passes,
//! * `ilog` / `log_star` — the iterated natural logarithm (clamped at 1)
//!   and its fixed-point index, which size the level hierarchy of the
//!   small-memory engine,
//! * the `schedule_*` constructors — integer pull budgets for the
//!   large-memory runners, the small-memory runner, and the level-based
//!   identification engine.
//!
//! Budgets are ceilings of products of real powers. Each ceiling is
//! evaluated twice — once as a direct product of powers, once in the log
//! domain — and the two results must agree after snapping values within
//! 1e-9 (relative) of an integer; disagreement is reported as a numeric
//! error rather than silently rounding either way.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default confidence parameter for the identification engine's schedule.
pub const DEFAULT_DELTA: f64 = 0.25;

/// Largest supported pass count; keeps `2^(P+1) - 1` inside `u64`.
pub const MAX_PASSES: u32 = 60;

/// Relative tolerance for snapping a near-integer float before a ceiling.
const SNAP_REL_TOL: f64 = 1e-9;

/// Iterated natural logarithm: `ilog(0, a) = a`, and
/// `ilog(k, a) = max(ln(ilog(k-1, a)), 1)` for `k >= 1`.
///
/// For `k >= 1` the argument must be strictly positive (the first log must
/// exist); afterwards the clamp keeps every iterate at least 1. Iteration
/// stops early once the value reaches exactly 1, so large `k` is cheap.
pub fn ilog(k: u32, a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::Domain(format!("ilog: argument must be finite, got {a}")));
    }
    if k == 0 {
        return Ok(a);
    }
    if a <= 0.0 {
        return Err(Error::Domain(format!(
            "ilog: argument must be positive for k >= 1, got {a}"
        )));
    }
    let mut x = a;
    for _ in 0..k {
        if x == 1.0 {
            break; // fixed point: max(ln 1, 1) = 1
        }
        x = x.ln().max(1.0);
    }
    Ok(x)
}

/// Log-star: the smallest `k >= 0` with `ilog(k, a) = 1`.
///
/// `log_star(1) = 0`, `log_star(e) = 1`, `log_star(15) = 2`. Any finite
/// positive argument reaches the fixed point within a handful of steps.
pub fn log_star(a: f64) -> Result<u32> {
    if !a.is_finite() || a <= 0.0 {
        return Err(Error::Domain(format!(
            "log_star: argument must be finite and positive, got {a}"
        )));
    }
    let mut x = a;
    let mut k = 0u32;
    while x != 1.0 {
        x = x.ln().max(1.0);
        k += 1;
        if k > 64 {
            return Err(Error::Numeric(format!(
                "log_star: no fixed point within 64 iterations for {a}"
            )));
        }
    }
    Ok(k)
}

/// Per-pass budget exponent `lambda_p = (2^(P-p+1) - 1) / (2^(P+1) - 1)`.
///
/// Strictly decreasing in `p`, with `lambda_P = 1 / (2^(P+1) - 1)`.
pub fn lambda_p(big_p: u32, p: u32) -> Result<f64> {
    let (num, den) = lambda_p_rational(big_p, p)?;
    Ok(num as f64 / den as f64)
}

/// `lambda_p` as an exact integer fraction `(numerator, denominator)`.
///
/// Exposed so identities such as `(2^(P+1) - 1) * (1 - lambda_1) = 2^P`
/// can be checked in exact arithmetic: the left side equals
/// `denominator - numerator` over 1.
pub fn lambda_p_rational(big_p: u32, p: u32) -> Result<(u64, u64)> {
    if p < 1 || p > big_p {
        return Err(Error::Domain(format!(
            "lambda_p: need 1 <= p <= P, got p={p}, P={big_p}"
        )));
    }
    if big_p > MAX_PASSES {
        return Err(Error::Domain(format!(
            "lambda_p: P={big_p} exceeds supported maximum {MAX_PASSES}"
        )));
    }
    let num = (1u64 << (big_p - p + 1)) - 1;
    let den = (1u64 << (big_p + 1)) - 1;
    Ok((num, den))
}

/// Pull budgets for the large-memory runners.
///
/// `l1` is the pass-1 budget. For each later pass `p` (2-based; index
/// `p - 2` into the vectors), `lp1[p-2]` funds the full-memory scan and
/// `lp2[p-2]` the short-list duel. Invariant: `lp1` grows by the exact
/// integer recurrence `lp1_p = ceil(m^3 * lp2_{p-1} / (n-m)^3)` with
/// `lp2_1 = l1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleLarge {
    pub l1: u64,
    pub lp1: Vec<u64>,
    pub lp2: Vec<u64>,
}

impl ScheduleLarge {
    /// Total pulls the runner spends inside pass `p` (1-based).
    pub fn pulls_in_pass(&self, p: usize) -> u64 {
        if p == 1 {
            self.l1
        } else {
            self.lp1[p - 2] + self.lp2[p - 2]
        }
    }

    /// Total pulls across all passes (exploitation excluded).
    pub fn pass_total(&self) -> u64 {
        self.l1
            + self.lp1.iter().sum::<u64>()
            + self.lp2.iter().sum::<u64>()
    }
}

/// Budget schedule for the large-memory runners.
///
/// With `lam_p = lambda_p(P, p)`:
///
/// * `l1      = ceil(2^(-2P)        * (n-m)^(3 lam_1) * n^(-2 lam_1) * T^(1 - lam_1))`
/// * `lp2[p]  = ceil(2^(-2P + 2p-2) * (n-m)^(3 lam_p) * n^(-2 lam_p) * T^(1 - lam_p))`
/// * `lp1[p]  = ceil(m^3 * lp2[p-1] / (n-m)^3)` (with `lp2[1] = l1`),
///   computed in exact integer arithmetic.
///
/// Preconditions: `2 <= m < n`, `P >= 1`, `T >= (n+1)^2`.
pub fn schedule_large(n: u64, m: u64, big_p: u32, t: u64) -> Result<ScheduleLarge> {
    if m < 2 || m >= n {
        return Err(Error::Config(format!(
            "schedule_large: need 2 <= m < n, got n={n}, m={m}"
        )));
    }
    if big_p < 1 || big_p > MAX_PASSES {
        return Err(Error::Config(format!(
            "schedule_large: need 1 <= P <= {MAX_PASSES}, got P={big_p}"
        )));
    }
    if t < (n + 1) * (n + 1) {
        return Err(Error::Config(format!(
            "schedule_large: need T >= (n+1)^2 = {}, got T={t}",
            (n + 1) * (n + 1)
        )));
    }
    let nm = n - m;
    let budget = |p: u32| -> Result<u64> {
        let lam = lambda_p(big_p, p)?;
        let two_exp = -2.0 * big_p as f64 + 2.0 * p as f64 - 2.0;
        let (nf, nmf, tf) = (n as f64, nm as f64, t as f64);
        let direct = two_exp.exp2() * nmf.powf(3.0 * lam) * nf.powf(-2.0 * lam) * tf.powf(1.0 - lam);
        let logdom = (two_exp * std::f64::consts::LN_2
            + 3.0 * lam * nmf.ln()
            - 2.0 * lam * nf.ln()
            + (1.0 - lam) * tf.ln())
        .exp();
        ceil_guarded(direct, logdom)
    };
    let l1 = budget(1)?;
    let mut lp1 = Vec::new();
    let mut lp2 = Vec::new();
    let mut prev = l1;
    for p in 2..=big_p {
        lp1.push(ceil_div_scaled(m, prev, nm)?);
        let b = budget(p)?;
        lp2.push(b);
        prev = b;
    }
    Ok(ScheduleLarge { l1, lp1, lp2 })
}

/// Gap targets and duel lengths for the small-memory runner.
///
/// `eps[0] = 1` and `eps[p]` is the pass-`p` accuracy target; `s[p-1]` is
/// the admission-duel length for pass `p`; `r` is the level count of the
/// embedded identification engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSmall {
    pub eps: Vec<f64>,
    pub s: Vec<u64>,
    pub r: usize,
}

/// Budget schedule for the small-memory runner, with the default
/// confidence `delta = 1/4`.
pub fn schedule_small(n: u64, m: u64, big_p: u32, t: u64) -> Result<ScheduleSmall> {
    schedule_small_with_delta(n, m, big_p, t, DEFAULT_DELTA)
}

/// Budget schedule for the small-memory runner.
///
/// * `r = min(log_star(n+1), m-1)`
/// * `eps[p] = 2^(P-p+1) * ((n+1) * ilog(m-1, n+1) / T)^((1 - lambda_p)/2)`
/// * `s[p-1] = ceil(2^5 / eps[p]^2 * ln(2^3 * ilog(r-1, n+1) / delta))`
///
/// Preconditions: `m >= 2`, `9m < 8n`, `P >= 1`, `T >= (n+1)^2`, and
/// `delta` in (0,1). The targets come out strictly decreasing in `p`;
/// if even `eps[1] >= 1` the pass count is too large for this horizon
/// and a config error names the offending value.
pub fn schedule_small_with_delta(
    n: u64,
    m: u64,
    big_p: u32,
    t: u64,
    delta: f64,
) -> Result<ScheduleSmall> {
    if m < 2 || 9 * m >= 8 * n {
        return Err(Error::Config(format!(
            "schedule_small: need 2 <= m < 8n/9, got n={n}, m={m}"
        )));
    }
    if big_p < 1 || big_p > MAX_PASSES {
        return Err(Error::Config(format!(
            "schedule_small: need 1 <= P <= {MAX_PASSES}, got P={big_p}"
        )));
    }
    if t < (n + 1) * (n + 1) {
        return Err(Error::Config(format!(
            "schedule_small: need T >= (n+1)^2 = {}, got T={t}",
            (n + 1) * (n + 1)
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!(
            "schedule_small: need delta in (0,1), got {delta}"
        )));
    }
    let ambient = (n + 1) as f64;
    let r = (log_star(ambient)? as usize).min((m - 1) as usize);
    let base = ambient * ilog(m as u32 - 1, ambient)? / t as f64;
    let log_term = (8.0 * ilog(r as u32 - 1, ambient)? / delta).ln();
    let mut eps = vec![1.0];
    let mut s = Vec::new();
    for p in 1..=big_p {
        let lam = lambda_p(big_p, p)?;
        let e = ((big_p - p + 1) as f64).exp2() * base.powf((1.0 - lam) / 2.0);
        if p == 1 && e >= 1.0 {
            return Err(Error::Config(format!(
                "schedule_small: pass count P={big_p} too large for horizon T={t} \
                 (accuracy target eps_1 = {e} is not below 1)"
            )));
        }
        let direct = 32.0 / (e * e) * log_term;
        let logdom = ((32.0f64).ln() - 2.0 * e.ln() + log_term.ln()).exp();
        s.push(ceil_guarded(direct, logdom)?);
        eps.push(e);
    }
    Ok(ScheduleSmall { eps, s, r })
}

/// Level widths and per-level sample counts for the identification engine.
///
/// `c[l-1]` is the prompt threshold of level `l` (1-based) and `s[l-1]`
/// the per-challenge sample count; `c[r-1]` always equals the ambient
/// arm count, so the top level can absorb the whole stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleBai {
    pub c: Vec<u64>,
    pub s: Vec<u64>,
}

/// Schedule for the level-based identification engine over an ambient
/// stream of `n` arms with `r` levels, accuracy `eps`, confidence `delta`.
///
/// * `c[l-1] = ceil(ilog(r - l, n))`
/// * `s[l-1] = ceil(2^(2l+3) / eps^2 * ln(2^(l+2) * c[l-1] / delta))`
///
/// Preconditions: `n >= 2`, `1 <= r <= 32`, `eps` in (0,1), `delta` in (0,1).
pub fn schedule_bai(n: u64, r: usize, eps: f64, delta: f64) -> Result<ScheduleBai> {
    if n < 2 {
        return Err(Error::Config(format!("schedule_bai: need n >= 2, got {n}")));
    }
    if r < 1 || r > 32 {
        return Err(Error::Config(format!("schedule_bai: need 1 <= r <= 32, got {r}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Config(format!("schedule_bai: need eps in (0,1), got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config(format!(
            "schedule_bai: need delta in (0,1), got {delta}"
        )));
    }
    let mut c = Vec::with_capacity(r);
    let mut s = Vec::with_capacity(r);
    for l in 1..=r {
        let width = snap(ilog((r - l) as u32, n as f64)?).ceil();
        if !(width >= 1.0 && width <= u64::MAX as f64) {
            return Err(Error::Numeric(format!(
                "schedule_bai: level width out of range at l={l}"
            )));
        }
        let cl = width as u64;
        let lead = ((2 * l + 3) as f64).exp2();
        let log_arg = ((l + 2) as f64).exp2() * cl as f64 / delta;
        let direct = lead / (eps * eps) * log_arg.ln();
        let logdom = (lead.ln() - 2.0 * eps.ln() + log_arg.ln().ln()).exp();
        s.push(ceil_guarded(direct, logdom)?);
        c.push(cl);
    }
    Ok(ScheduleBai { c, s })
}

/// Deterministic worst-case pull count of the identification engine over
/// an ambient stream of `n` arms: feeding can cost at most
/// `sum_l s[l] * floor(n / prod_{j<l} c[j])` and the final refresh at most
/// `r * s[r-1]`. Every run must stay at or below this, sample for sample.
pub fn bai_sample_cap(n: u64, sched: &ScheduleBai) -> u64 {
    let r = sched.c.len();
    let mut prod: u128 = 1;
    let mut total: u128 = 0;
    for l in 0..r {
        let visitors = if prod > n as u128 { 0 } else { n as u128 / prod };
        total += sched.s[l] as u128 * visitors;
        prod = prod.saturating_mul(sched.c[l] as u128);
    }
    total += r as u128 * sched.s[r - 1] as u128;
    u64::try_from(total).unwrap_or(u64::MAX)
}

/// Snap a float to the nearest integer when within 1e-9 relative distance.
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP_REL_TOL * r.abs().max(1.0) {
        r
    } else {
        x
    }
}

/// Ceiling of a positive real computed two ways; the evaluation orders
/// must agree after near-integer snapping.
fn ceil_guarded(direct: f64, logdom: f64) -> Result<u64> {
    if !direct.is_finite() || !logdom.is_finite() {
        return Err(Error::Numeric(format!(
            "ceiling of non-finite value (direct={direct}, log-domain={logdom})"
        )));
    }
    let ca = snap(direct).ceil();
    let cb = snap(logdom).ceil();
    if ca != cb {
        return Err(Error::Numeric(format!(
            "ceiling ambiguous near integer boundary: direct order gives {ca}, \
             log-domain order gives {cb} (raw {direct} vs {logdom})"
        )));
    }
    if ca < 1.0 {
        return Err(Error::Numeric(format!("budget must be positive, got {direct}")));
    }
    if ca > 9.0e18 {
        return Err(Error::Numeric(format!("budget {ca} overflows u64")));
    }
    Ok(ca as u64)
}

/// Exact integer `ceil(m^3 * l / d^3)` via 128-bit arithmetic.
fn ceil_div_scaled(m: u64, l: u64, d: u64) -> Result<u64> {
    let num = (m as u128)
        .checked_pow(3)
        .and_then(|c| c.checked_mul(l as u128))
        .ok_or_else(|| Error::Numeric(format!("m^3 * L overflows at m={m}, L={l}")))?;
    let den = (d as u128).pow(3);
    let q = num.div_ceil(den);
    u64::try_from(q).map_err(|_| Error::Numeric(format!("scan budget {q} overflows u64")))
}
