//! Offline best-arm retention.
//!
//! All `n` arms sit in memory from the start; the job is to discard
//! `n - m` of them while keeping at least one near-best arm. The routine
//! runs two mean duels: a coarse one over everything to crown `a1`, then
//! a focused one over a small random subset around `a1` to crown `a2`.
//! Only members of that subset can be dropped, and `a1`, `a2` never are.

use crate::instances::InstanceSpec;
use crate::osmd::find_best;
use crate::streamenv::{RunRecord, StreamEnv};
use crate::{Error, Result};

/// Parameters and pull budget for one retention run.
///
/// The two accuracy targets may arrive in either order: the duel lengths
/// are what matter, and `l1 = ceil(2n/eps0^2)` over all `n` arms pairs
/// naturally with the *coarser* target while `l2 = ceil(2(n-m+2)/eps1^2)`
/// over the small subset pairs with the finer one. Callers that want the
/// sharp retention guarantee should pass `eps1 < eps0`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarConfig {
    pub n: usize,
    pub m: usize,
    pub eps0: f64,
    pub eps1: f64,
    pub l1: u64,
    pub l2: u64,
}

impl BarConfig {
    pub fn new(n: usize, m: usize, eps0: f64, eps1: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("need at least two arms, got n={n}")));
        }
        if m < 2 || m > n {
            return Err(Error::Config(format!(
                "retention size must satisfy 2 <= m <= n, got m={m}, n={n}"
            )));
        }
        for (name, e) in [("eps0", eps0), ("eps1", eps1)] {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0,1), got {e}")));
            }
        }
        let l1 = (2.0 * n as f64 / (eps0 * eps0)).ceil() as u64;
        let l2 = (2.0 * (n - m + 2) as f64 / (eps1 * eps1)).ceil() as u64;
        Ok(BarConfig { n, m, eps0, eps1, l1, l2 })
    }

    /// Exact number of pulls one run consumes.
    pub fn total_pulls(&self) -> u64 {
        self.l1 + self.l2
    }
}

/// Everything one retention run decided, for structural checks.
#[derive(Debug, Clone)]
pub struct BarOutcome {
    /// The `m` slots left standing.
    pub survivors: Vec<usize>,
    /// Winner of the coarse duel over all arms.
    pub a1: usize,
    /// Winner of the focused duel over `s_prime`.
    pub a2: usize,
    /// The focused-duel subset: `a1` plus `n - m + 1` others.
    pub s_prime: Vec<usize>,
    /// The `n - m` slots dropped (all members of `s_prime`).
    pub dropped: Vec<usize>,
}

/// Build the no-stream arena: capacity `n`, a single pass whose arrivals
/// are read up front, and a budget of exactly the run's pull count.
pub fn bar_arena(inst: InstanceSpec, cfg: &BarConfig, seed: u64) -> Result<StreamEnv> {
    if inst.n != cfg.n {
        return Err(Error::Config(format!(
            "instance has {} arms but the config expects {}",
            inst.n, cfg.n
        )));
    }
    if inst.passes() != 1 {
        return Err(Error::Config("the retention arena is single-pass".into()));
    }
    let n = cfg.n;
    let mut env = StreamEnv::new(inst, 1, cfg.total_pulls(), n, seed)?;
    for _ in 0..n {
        env.read_next()?;
    }
    Ok(env)
}

/// Run retention inside an arena of `n` resident arms. On return exactly
/// `m` slots are occupied and the budget is fully spent.
pub fn run_bar(env: &mut StreamEnv, cfg: &BarConfig) -> Result<BarOutcome> {
    if env.n() != cfg.n || env.m() != cfg.n {
        return Err(Error::Config(format!(
            "arena shape (n={}, capacity={}) does not match config n={}",
            env.n(),
            env.m(),
            cfg.n
        )));
    }
    if env.occupied_count() != cfg.n {
        return Err(Error::Usage(format!(
            "retention needs all {} arms resident, found {}",
            cfg.n,
            env.occupied_count()
        )));
    }
    let everyone = env.occupied_slots();
    let a1 = find_best(env, &everyone, cfg.l1)?;

    let others: Vec<usize> = everyone.iter().copied().filter(|&s| s != a1).collect();
    let mut s_prime = vec![a1];
    s_prime.extend(env.choose_subset(&others, cfg.n - cfg.m + 1)?);
    let a2 = find_best(env, &s_prime, cfg.l2)?;

    let pool: Vec<usize> = s_prime
        .iter()
        .copied()
        .filter(|&s| s != a1 && s != a2)
        .collect();
    let dropped = env.choose_subset(&pool, cfg.n - cfg.m)?;
    for &s in &dropped {
        env.drop_slot(s)?;
    }
    debug_assert_eq!(env.occupied_count(), cfg.m);
    Ok(BarOutcome { survivors: env.occupied_slots(), a1, a2, s_prime, dropped })
}

/// Convenience wrapper: arena, run, and a finished record in one call.
pub fn run_bar_full(
    inst: InstanceSpec,
    cfg: &BarConfig,
    seed: u64,
) -> Result<(BarOutcome, RunRecord)> {
    let mut env = bar_arena(inst, cfg, seed)?;
    let outcome = run_bar(&mut env, cfg)?;
    let record = env.finish()?;
    Ok((outcome, record))
}
