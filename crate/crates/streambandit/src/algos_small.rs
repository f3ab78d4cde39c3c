//! The small-memory pipeline and its retention engine.
//!
//! With only a handful of slots the player cannot keep candidate sets
//! around, so each pass runs a two-stage filter instead:
//!
//! * an admission duel — every newly arriving arm plays a short
//!   mirror-descent duel against the current benchmark; losers are
//!   dropped on the spot,
//! * a level-based identification engine — duel winners are fed into a
//!   tournament ladder of `r` levels. A challenger is sampled `s_l`
//!   times at level `l` and either replaces that level's best or dies;
//!   every `c_l` challenges the level's best is promoted one level up
//!   and the level resets. The ladder holds at most `r = m-1` arms, so
//!   one slot is always free for the next arrival.
//!
//! At the end of each pass the ladder is settled (every level best is
//! re-sampled once more and the highest empirical mean wins): that winner
//! is the pass's king and seeds the next pass's ladder. After the last
//! pass the king is pulled until the game ends.

use crate::mathkit::{bai_sample_cap, log_star, schedule_bai, schedule_small_with_delta};
use crate::mathkit::{ScheduleBai, ScheduleSmall, DEFAULT_DELTA};
use crate::osmd::find_best;
use crate::streamenv::{Arrival, RunRecord, StreamEnv};
use crate::{Error, Result};

/// The level-ladder identification engine over one pass's arrivals.
#[derive(Debug, Clone)]
pub struct BaiState {
    r: usize,
    sched: ScheduleBai,
    eps: f64,
    delta: f64,
    /// Per level: the current best (slot, empirical mean), if any.
    level_best: Vec<Option<(usize, f64)>>,
    /// Per level: challenges seen since the last promotion.
    counters: Vec<u64>,
    /// Pulls consumed by feeds and the finish refreshes.
    pub samples_used: u64,
    fed_any: bool,
}

/// Fresh ladder for an ambient stream of `n` arms.
pub fn bai_new(n: u64, r: usize, eps: f64, delta: f64) -> Result<BaiState> {
    let sched = schedule_bai(n, r, eps, delta)?;
    Ok(BaiState {
        r,
        sched,
        eps,
        delta,
        level_best: vec![None; r],
        counters: vec![0; r],
        samples_used: 0,
        fed_any: false,
    })
}

impl BaiState {
    /// Accuracy target this ladder was built for.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Confidence parameter this ladder was built for.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The ladder's schedule (visible for cap computations).
    pub fn schedule(&self) -> &ScheduleBai {
        &self.sched
    }

    /// Worst-case pulls this ladder may consume over `n` fed arms,
    /// including the finish refreshes.
    pub fn sample_cap(&self, n: u64) -> u64 {
        bai_sample_cap(n, &self.sched)
    }

    /// The benchmark arm: the highest non-empty level's best, if any.
    pub fn benchmark_slot(&self) -> Option<usize> {
        self.level_best
            .iter()
            .rev()
            .flatten()
            .map(|&(slot, _)| slot)
            .next()
    }
}

fn sample_mean(env: &mut StreamEnv, slot: usize, count: u64) -> Result<f64> {
    let (done, sum) = env.pull_many(slot, count)?;
    if done < count {
        return Err(Error::GameOver);
    }
    Ok(sum / count as f64)
}

/// Feed one resident arm into the ladder. The arm climbs from level 1:
/// at each level it is sampled `s_l` times and either replaces the level
/// best (the old one is dropped) or is dropped itself; the level counter
/// advances either way, and a full counter promotes the level's best to
/// challenge the next level. The top level never promotes.
pub fn bai_feed(state: &mut BaiState, env: &mut StreamEnv, slot: usize) -> Result<()> {
    if !env.slot_occupied(slot) {
        return Err(Error::Usage(format!("bai_feed: slot {slot} is empty")));
    }
    state.fed_any = true;
    let mut challenger = slot;
    let mut level = 0usize; // 0-based internally
    loop {
        let mean = sample_mean(env, challenger, state.sched.s[level])?;
        state.samples_used += state.sched.s[level];
        let incumbent_mean = state.level_best[level].map_or(0.0, |(_, m)| m);
        if mean < incumbent_mean {
            env.drop_slot(challenger)?;
        } else {
            // Ties favor the challenger; an empty level (mean 0) always
            // loses to any empirical mean.
            if let Some((old, _)) = state.level_best[level].replace((challenger, mean)) {
                debug_assert_ne!(old, challenger);
                env.drop_slot(old)?;
            }
        }
        state.counters[level] += 1;
        if state.counters[level] == state.sched.c[level] && level + 1 < state.r {
            // Promotion: the settled best of this level challenges the
            // next one; this level starts over.
            let (promoted, _) = state.level_best[level]
                .take()
                .expect("a full level cannot be empty");
            state.counters[level] = 0;
            challenger = promoted;
            level += 1;
        } else {
            return Ok(());
        }
    }
}

/// Settle the ladder: re-sample every level best `s_r` times, return the
/// slot with the highest refreshed mean (ties go to the higher level),
/// and drop the rest.
pub fn bai_finish(state: &mut BaiState, env: &mut StreamEnv) -> Result<usize> {
    if !state.fed_any {
        return Err(Error::Usage("bai_finish: no arm was ever fed".into()));
    }
    let sr = state.sched.s[state.r - 1];
    let mut winner: Option<(usize, f64)> = None;
    let mut held: Vec<usize> = Vec::new();
    for entry in state.level_best.iter().flatten() {
        let (slot, _) = *entry;
        held.push(slot);
        let mean = sample_mean(env, slot, sr)?;
        state.samples_used += sr;
        // Ascending level order plus >= gives higher levels the tie.
        if winner.map_or(true, |(_, best)| mean >= best) {
            winner = Some((slot, mean));
        }
    }
    let (king, _) = winner.expect("fed_any implies a non-empty level");
    for slot in held {
        if slot != king {
            env.drop_slot(slot)?;
        }
    }
    state.level_best = vec![None; state.r];
    state.counters = vec![0; state.r];
    state.fed_any = false;
    Ok(king)
}

/// Validated parameters plus the pull schedule for one small-memory run.
#[derive(Debug, Clone)]
pub struct SmallRunConfig {
    pub n: usize,
    pub m: usize,
    pub big_p: usize,
    /// The horizon the schedule is built for. The environment's budget may
    /// exceed it (the surplus goes to exploitation).
    pub t: u64,
    pub delta: f64,
    pub schedule: ScheduleSmall,
}

impl SmallRunConfig {
    pub fn new(n: usize, m: usize, big_p: usize, t: u64) -> Result<Self> {
        Self::with_delta(n, m, big_p, t, DEFAULT_DELTA)
    }

    pub fn with_delta(n: usize, m: usize, big_p: usize, t: u64, delta: f64) -> Result<Self> {
        let schedule = schedule_small_with_delta(n as u64, m as u64, big_p as u32, t, delta)?;
        Ok(SmallRunConfig { n, m, big_p, t, delta, schedule })
    }
}

/// Drive the admission-plus-ladder passes `1..=upto`, returning the slot
/// of the king crowned by pass `upto`. The environment stays open so the
/// caller can keep playing (or abandon and measure).
pub fn run_small_passes(
    env: &mut StreamEnv,
    cfg: &SmallRunConfig,
    upto: usize,
    stage: &mut String,
) -> Result<usize> {
    if env.n() != cfg.n || env.m() != cfg.m || env.passes() != cfg.big_p {
        return Err(Error::Config(format!(
            "env (n={}, m={}, P={}) does not match config (n={}, m={}, P={})",
            env.n(),
            env.m(),
            env.passes(),
            cfg.n,
            cfg.m,
            cfg.big_p
        )));
    }
    if upto < 1 || upto > cfg.big_p {
        return Err(Error::Usage(format!(
            "run_small_passes: pass {upto} outside 1..={}",
            cfg.big_p
        )));
    }
    let ambient = (cfg.n + 1) as u64;
    let mut king: Option<usize> = None;
    for p in 1..=upto {
        *stage = format!("pass {p} admission stream");
        let mut ladder = bai_new(ambient, cfg.schedule.r, cfg.schedule.eps[p], cfg.delta)?;
        if let Some(k) = king.take() {
            // The previous king seeds the ladder before anything arrives.
            bai_feed(&mut ladder, env, k)?;
        }
        let duel_rounds = cfg.schedule.s[p - 1];
        while env.current_pass() == p {
            match env.arrive()? {
                Arrival::Resident(_) => {
                    // Already inside the filter (a level best); skip.
                }
                Arrival::New => {
                    let arrival = env.admit()?;
                    match ladder.benchmark_slot() {
                        None => {
                            // Nothing to duel against yet (very first arm).
                            bai_feed(&mut ladder, env, arrival)?;
                        }
                        Some(benchmark) => {
                            let w = find_best(env, &[benchmark, arrival], duel_rounds)?;
                            if w == arrival {
                                env.note_admission(arrival)?;
                                bai_feed(&mut ladder, env, arrival)?;
                            } else {
                                env.drop_slot(arrival)?;
                            }
                        }
                    }
                }
            }
        }
        *stage = format!("pass {p} retention finish");
        king = Some(bai_finish(&mut ladder, env)?);
    }
    Ok(king.expect("at least one pass ran"))
}

/// The full small-memory player: all passes, then pull the final king
/// until the game ends.
pub fn run_small(mut env: StreamEnv, cfg: &SmallRunConfig) -> Result<RunRecord> {
    let mut stage = String::new();
    match small_body(&mut env, cfg, &mut stage) {
        Ok(()) => env.finish(),
        Err(Error::GameOver) => env.finish_truncated(&stage),
        Err(other) => Err(other),
    }
}

fn small_body(env: &mut StreamEnv, cfg: &SmallRunConfig, stage: &mut String) -> Result<()> {
    let king = run_small_passes(env, cfg, cfg.big_p, stage)?;
    *stage = "exploitation".into();
    let remaining = env.remaining_budget();
    if remaining > 0 {
        let (done, _) = env.pull_many(king, remaining)?;
        debug_assert_eq!(done, remaining);
    }
    Ok(())
}

/// The standalone identification player: one pass feeds every arm through
/// the ladder (no admission duels), then the settled king is pulled until
/// the game ends. Uses `r = min(log*(n), m-1)` levels.
pub fn run_bai_stream(mut env: StreamEnv, eps: f64, delta: f64) -> Result<RunRecord> {
    let mut stage = String::new();
    match bai_stream_body(&mut env, eps, delta, &mut stage) {
        Ok(()) => env.finish(),
        Err(Error::GameOver) => env.finish_truncated(&stage),
        Err(other) => Err(other),
    }
}

/// The identification phase alone: feed every arm of the single pass
/// through a fresh ladder and settle it. Returns the king's slot and the
/// exact pull count the ladder consumed; the environment stays open.
pub fn run_bai_passes(
    env: &mut StreamEnv,
    eps: f64,
    delta: f64,
    stage: &mut String,
) -> Result<(usize, u64)> {
    if env.passes() != 1 {
        return Err(Error::Config(
            "the standalone identification player is a one-pass algorithm".into(),
        ));
    }
    let r = (log_star(env.n() as f64)? as usize).max(1).min(env.m() - 1);
    let mut ladder = bai_new(env.n() as u64, r, eps, delta)?;
    *stage = "identification stream".into();
    while env.current_pass() == 1 {
        let (slot, merged) = env.read_next()?;
        debug_assert!(!merged);
        bai_feed(&mut ladder, env, slot)?;
    }
    *stage = "identification finish".into();
    let king = bai_finish(&mut ladder, env)?;
    Ok((king, ladder.samples_used))
}

fn bai_stream_body(
    env: &mut StreamEnv,
    eps: f64,
    delta: f64,
    stage: &mut String,
) -> Result<()> {
    let (king, _) = run_bai_passes(env, eps, delta, stage)?;
    *stage = "exploitation".into();
    let remaining = env.remaining_budget();
    if remaining > 0 {
        env.pull_many(king, remaining)?;
    }
    Ok(())
}
