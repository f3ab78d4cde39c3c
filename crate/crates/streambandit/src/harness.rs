//! Monte-Carlo experiment engine: seeded repetitions, grid sweeps,
//! scaling-exponent fits, the fuzzing referee, and the acceptance battery.
//!
//! Everything here is deterministic given a base seed. Per-repetition
//! seeds derive from the base through a counter-splitting scheme, so grid
//! points are independent of each other and of scheduling order; rayon
//! fans repetitions out, but aggregation always folds in repetition order
//! to keep floating-point results bit-stable.

use crate::algos_large::{
    run_large_general, run_large_passes, run_large_simple, LargeRunConfig, LargeVariant,
};
use crate::algos_small::{run_bai_passes, run_small, run_small_passes, SmallRunConfig};
use crate::bar::{run_bar_full, BarConfig};
use crate::instances::{hard_instance, lower_bound_eps_raw, make_instance, HardFamily, InstanceSpec};
use crate::mathkit::{bai_sample_cap, schedule_bai};
use crate::osmd::{find_best, run_mirror_descent};
use crate::streamenv::{splitmix64, RunRecord, StreamEnv};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Version stamp written into every CSV row.
pub const CSV_SCHEMA_VERSION: u32 = 1;
/// Version stamp written into every summary document.
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Derive an independent seed from a base seed and a coordinate path
/// (grid point index, repetition index, sub-stream tag, ...). Different
/// paths give unrelated streams; the same path always gives the same one.
pub fn split_seed(base: u64, path: &[u64]) -> u64 {
    let mut x = splitmix64(base);
    for &c in path {
        x = splitmix64(x ^ splitmix64(c.wrapping_add(0x9E37_79B9_7F4A_7C15)));
    }
    x
}

/// The selectable players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmId {
    /// One-swap-per-pass player (requires m = n-1).
    LargeSimple,
    /// Half-memory-churn player (requires 9m >= 8n).
    LargeGeneral,
    /// Admission-duel + ladder player (requires 9m < 8n).
    Small,
    /// Uniform-random pulls over all arms; a calibration policy, not a
    /// contender (it plays with capacity n regardless of the grid's m).
    UniformBaseline,
}

impl AlgorithmId {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::LargeSimple => "large-simple",
            AlgorithmId::LargeGeneral => "large-general",
            AlgorithmId::Small => "small",
            AlgorithmId::UniformBaseline => "uniform-baseline",
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "large-simple" => Ok(AlgorithmId::LargeSimple),
            "large-general" => Ok(AlgorithmId::LargeGeneral),
            "small" => Ok(AlgorithmId::Small),
            "uniform-baseline" => Ok(AlgorithmId::UniformBaseline),
            other => Err(Error::Config(format!(
                "unknown algorithm {other:?}; expected large-simple, large-general, \
                 small, or uniform-baseline"
            ))),
        }
    }
}

impl std::fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Pick the shipped player for a memory size: the half-churn player when
/// memory is within a 8/9 fraction of the stream, the ladder player below
/// that. The one-swap player is only ever chosen by explicit request.
pub fn select_algorithm(n: usize, m: usize) -> Result<AlgorithmId> {
    if m < 2 {
        return Err(Error::Config(format!(
            "memory must satisfy m >= 2, got m={m}"
        )));
    }
    if m >= n {
        return Err(Error::Config(format!(
            "memory must satisfy m < n, got m={m} with n={n}"
        )));
    }
    Ok(if 9 * m >= 8 * n { AlgorithmId::LargeGeneral } else { AlgorithmId::Small })
}

/// Where each repetition's instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSource {
    /// A fully specified instance, used as-is for every repetition.
    Explicit { spec: InstanceSpec },
    /// Every arm fair at 1/2, identity orders.
    AllFair,
    /// Planted arm `j` at `level`, with the gap schedule derived from the
    /// lower-bound recipe (c1 = 1) at the grid point's shape, each entry
    /// clamped into (0, 1/4].
    Planted { j: usize, level: usize },
    /// Planted arm `j` at `level` with the same fixed gap at every level.
    PlantedGap { j: usize, level: usize, gap: f64 },
}

/// One cell of an experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "P")]
    pub big_p: usize,
    #[serde(rename = "T")]
    pub t: u64,
}

/// Build the concrete instance a repetition plays against.
pub fn realize_instance(
    source: &InstanceSource,
    point: GridPoint,
    seed: u64,
) -> Result<InstanceSpec> {
    match source {
        InstanceSource::Explicit { spec } => {
            if spec.n != point.n || spec.passes() != point.big_p {
                return Err(Error::Config(format!(
                    "explicit instance is ({} arms, {} passes) but the grid point \
                     wants ({}, {})",
                    spec.n,
                    spec.passes(),
                    point.n,
                    point.big_p
                )));
            }
            Ok(spec.clone())
        }
        InstanceSource::AllFair => {
            hard_instance(&HardFamily::all_fair(), point.n, point.big_p, seed)
        }
        InstanceSource::Planted { j, level } => {
            let raw = lower_bound_eps_raw(
                point.n as u64,
                point.m as u64,
                point.big_p as u32,
                point.t as f64,
                1.0,
            )?;
            let mut eps = vec![0.5];
            eps.extend(raw.iter().map(|&e| e.min(0.25)));
            hard_instance(&HardFamily::planted(*j, *level, eps), point.n, point.big_p, seed)
        }
        InstanceSource::PlantedGap { j, level, gap } => {
            let mut eps = vec![0.5];
            eps.extend(std::iter::repeat(*gap).take(point.big_p));
            hard_instance(&HardFamily::planted(*j, *level, eps), point.n, point.big_p, seed)
        }
    }
}

/// A declarative experiment: one algorithm, one instance source, a grid
/// of shapes, and seeded repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub algorithm: AlgorithmId,
    pub instance: InstanceSource,
    pub grid: Vec<GridPoint>,
    pub reps: u64,
    pub base_seed: u64,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::Config("an experiment needs at least one repetition".into()));
        }
        if self.grid.is_empty() {
            return Err(Error::Config("an experiment needs a nonempty grid".into()));
        }
        Ok(())
    }
}

/// Aggregates for one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub point: GridPoint,
    pub reps: u64,
    pub mean_regret: f64,
    pub se_regret: f64,
    pub mean_pass_rounds: Vec<f64>,
    pub mean_exploit_rounds: f64,
    pub violations: u64,
    pub truncations: u64,
}

/// Least-squares fit of log(regret) against log(T).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub stderr: f64,
    /// Points that entered the fit.
    pub used: usize,
    /// Points excluded for nonpositive regret.
    pub excluded: usize,
}

/// The whole experiment's results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: Experiment,
    pub points: Vec<PointSummary>,
    /// Present when the grid offers three or more distinct horizons with
    /// positive mean regret.
    pub exponent: Option<ExponentFit>,
}

impl Summary {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("summary serialization failed: {e}")))
    }
}

/// The theoretical regret exponent for a P-pass player.
pub fn slope_target(big_p: u32) -> f64 {
    let num = (big_p as f64).exp2();
    num / (2.0 * num - 1.0)
}

/// Sample mean and its standard error (sample stddev over sqrt reps).
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Play one repetition of `algorithm` on the realized instance.
pub fn run_one(
    algorithm: AlgorithmId,
    source: &InstanceSource,
    point: GridPoint,
    inst_seed: u64,
    env_seed: u64,
) -> Result<RunRecord> {
    let inst = realize_instance(source, point, inst_seed)?;
    match algorithm {
        AlgorithmId::LargeSimple => {
            let cfg =
                LargeRunConfig::new(point.n, point.m, point.big_p, point.t, LargeVariant::SimpleNm1)?;
            let env = StreamEnv::new(inst, point.big_p, point.t, point.m, env_seed)?;
            run_large_simple(env, &cfg)
        }
        AlgorithmId::LargeGeneral => {
            let cfg =
                LargeRunConfig::new(point.n, point.m, point.big_p, point.t, LargeVariant::General)?;
            let env = StreamEnv::new(inst, point.big_p, point.t, point.m, env_seed)?;
            run_large_general(env, &cfg)
        }
        AlgorithmId::Small => {
            let cfg = SmallRunConfig::new(point.n, point.m, point.big_p, point.t)?;
            let env = StreamEnv::new(inst, point.big_p, point.t, point.m, env_seed)?;
            run_small(env, &cfg)
        }
        AlgorithmId::UniformBaseline => {
            let mut env = StreamEnv::new(inst, point.big_p, point.t, point.n, env_seed)?;
            while env.current_pass() <= env.passes() {
                env.read_next()?;
            }
            let slots = env.occupied_slots();
            for _ in 0..point.t {
                let s = env.choose_one(&slots)?;
                env.pull(s)?;
            }
            env.finish()
        }
    }
}

/// Run the experiment and also return the per-repetition CSV text.
pub fn simulate_full(exp: &Experiment) -> Result<(Summary, String)> {
    exp.validate()?;
    let max_p = exp.grid.iter().map(|g| g.big_p).max().unwrap_or(1);
    let mut csv = String::from("run_id,algorithm,n,m,P,T,seed,pseudo_regret");
    for p in 1..=max_p {
        let _ = write!(csv, ",L_{p}");
    }
    csv.push_str(",violation,schema_version\n");

    let mut points = Vec::with_capacity(exp.grid.len());
    let mut run_id: u64 = 0;
    for (pi, &point) in exp.grid.iter().enumerate() {
        let records: Vec<RunRecord> = (0..exp.reps)
            .into_par_iter()
            .map(|rep| {
                let inst_seed = split_seed(exp.base_seed, &[pi as u64, rep, 0]);
                let env_seed = split_seed(exp.base_seed, &[pi as u64, rep, 1]);
                run_one(exp.algorithm, &exp.instance, point, inst_seed, env_seed)
            })
            .collect::<Result<Vec<_>>>()?;

        let mut regrets = Vec::with_capacity(records.len());
        let mut pass_sums = vec![0.0f64; point.big_p];
        let mut exploit_sum = 0.0f64;
        let mut violations = 0u64;
        let mut truncations = 0u64;
        for rec in &records {
            regrets.push(rec.pseudo_regret);
            for (p, &r) in rec.pass_rounds.iter().enumerate().take(point.big_p) {
                pass_sums[p] += r as f64;
            }
            exploit_sum += rec.exploit_rounds as f64;
            violations += rec.violation as u64;
            truncations += rec.truncated_stage.is_some() as u64;

            let _ = write!(
                csv,
                "{run_id},{},{},{},{},{},{},{}",
                exp.algorithm, point.n, point.m, point.big_p, point.t, rec.seed,
                rec.pseudo_regret
            );
            for p in 0..max_p {
                match rec.pass_rounds.get(p) {
                    Some(r) => {
                        let _ = write!(csv, ",{r}");
                    }
                    None => csv.push(','),
                }
            }
            let _ = writeln!(csv, ",{},{CSV_SCHEMA_VERSION}", rec.violation);
            run_id += 1;
        }
        let (mean_regret, se_regret) = mean_se(&regrets);
        points.push(PointSummary {
            point,
            reps: exp.reps,
            mean_regret,
            se_regret,
            mean_pass_rounds: pass_sums.iter().map(|s| s / exp.reps as f64).collect(),
            mean_exploit_rounds: exploit_sum / exp.reps as f64,
            violations,
            truncations,
        });
    }

    let fit_points: Vec<(f64, f64)> =
        points.iter().map(|p| (p.point.t as f64, p.mean_regret)).collect();
    let mut distinct_t: Vec<u64> = points.iter().map(|p| p.point.t).collect();
    distinct_t.sort_unstable();
    distinct_t.dedup();
    let exponent = if distinct_t.len() >= 3 {
        estimate_exponent(&fit_points).ok()
    } else {
        None
    };

    let summary = Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        experiment: exp.clone(),
        points,
        exponent,
    };
    Ok((summary, csv))
}

/// Run the experiment, keeping only the aggregates.
pub fn simulate(exp: &Experiment) -> Result<Summary> {
    simulate_full(exp).map(|(s, _)| s)
}

/// Least-squares slope of log(regret) on log(T). Points with nonpositive
/// regret are excluded (counted in the result); fewer than three usable
/// points, or fewer than three distinct horizons, is an error.
pub fn estimate_exponent(points: &[(f64, f64)]) -> Result<ExponentFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(t, r)| t > 0.0 && r > 0.0)
        .collect();
    let excluded = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::Usage(format!(
            "exponent fit needs at least 3 usable points, have {} ({} excluded \
             for nonpositive values)",
            usable.len(),
            excluded
        )));
    }
    let k = usable.len() as f64;
    let xs: Vec<f64> = usable.iter().map(|&(t, _)| t.ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|&(_, r)| r.ln()).collect();
    let xbar = xs.iter().sum::<f64>() / k;
    let ybar = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    if sxx <= 0.0 {
        return Err(Error::Usage("exponent fit needs distinct horizons".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let stderr = (sse.max(0.0) / (k - 2.0) / sxx).sqrt();
    Ok(ExponentFit { slope, stderr, used: usable.len(), excluded })
}

// ---------------------------------------------------------------------------
// Fuzzing referee
// ---------------------------------------------------------------------------

/// What a fuzzing session saw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FuzzReport {
    pub configs_run: u64,
    pub violations: u64,
    pub controls: u64,
    pub controls_tripped: u64,
    /// Human-readable notes on anything unexpected (empty on a clean run).
    pub notes: Vec<String>,
}

fn fuzz_pick(base: u64, i: u64, tag: u64, lo: u64, hi: u64) -> u64 {
    lo + split_seed(base, &[i, tag]) % (hi - lo + 1)
}

fn fuzz_means_orders(base: u64, i: u64, n: usize, big_p: usize) -> Result<InstanceSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(split_seed(base, &[i, 90]));
    let means: Vec<f64> = (0..n)
        .map(|a| {
            let u = splitmix64(split_seed(base, &[i, 91, a as u64]));
            (u >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect();
    let mut orders = Vec::with_capacity(big_p);
    for _ in 0..big_p {
        let mut perm: Vec<usize> = (1..=n).collect();
        perm.shuffle(&mut rng);
        orders.push(perm);
    }
    make_instance(means, orders)
}

fn fuzz_one(base: u64, i: u64) -> Result<RunRecord> {
    match i % 3 {
        0 => {
            let n = fuzz_pick(base, i, 0, 3, 20) as usize;
            let m = n - 1;
            // At n=3 the later passes have no pair to duel; single pass only.
            let big_p = if n == 3 { 1 } else { fuzz_pick(base, i, 1, 1, 3) as usize };
            let t = ((n + 1) * (n + 1)) as u64 * fuzz_pick(base, i, 2, 1, 24);
            let cfg = LargeRunConfig::new(n, m, big_p, t, LargeVariant::SimpleNm1)?;
            let inst = fuzz_means_orders(base, i, n, big_p)?;
            let env = StreamEnv::new(inst, big_p, t, m, split_seed(base, &[i, 3]))?;
            run_large_simple(env, &cfg)
        }
        1 => {
            let n = fuzz_pick(base, i, 0, 9, 27) as usize;
            let lo = (8 * n).div_ceil(9);
            let m = fuzz_pick(base, i, 1, lo as u64, (n - 1) as u64) as usize;
            let big_p = fuzz_pick(base, i, 2, 1, 3) as usize;
            let t = ((n + 1) * (n + 1)) as u64 * fuzz_pick(base, i, 3, 1, 16);
            let cfg = LargeRunConfig::new(n, m, big_p, t, LargeVariant::General)?;
            let inst = fuzz_means_orders(base, i, n, big_p)?;
            let env = StreamEnv::new(inst, big_p, t, m, split_seed(base, &[i, 4]))?;
            run_large_general(env, &cfg)
        }
        _ => {
            let n = fuzz_pick(base, i, 0, 6, 24) as usize;
            let m_hi = ((8 * n - 1) / 9).min(n - 1).max(2);
            let m = fuzz_pick(base, i, 1, 2, m_hi as u64) as usize;
            let big_p = fuzz_pick(base, i, 2, 1, 2) as usize;
            let mut mult = 32u64 << (split_seed(base, &[i, 5]) % 3);
            // The schedule rejects horizons too small for its accuracy
            // targets; escalate until it accepts.
            let cfg = loop {
                match SmallRunConfig::new(n, m, big_p, ((n + 1) * (n + 1)) as u64 * mult) {
                    Ok(cfg) => break cfg,
                    Err(Error::Config(_)) if mult < 1 << 20 => mult *= 4,
                    Err(e) => return Err(e),
                }
            };
            let inst = fuzz_means_orders(base, i, n, big_p)?;
            let env = StreamEnv::new(inst, big_p, cfg.t, m, split_seed(base, &[i, 6]))?;
            run_small(env, &cfg)
        }
    }
}

fn fair_arena(n: usize, m: usize, t: u64, seed: u64) -> StreamEnv {
    let inst = hard_instance(&HardFamily::all_fair(), n, 1, seed).expect("valid shape");
    StreamEnv::new(inst, 1, t, m, seed).expect("valid shape")
}

/// Negative control: admit more arms than memory holds.
fn control_hoarder() -> bool {
    let mut env = fair_arena(5, 2, 100, 11);
    let _ = env.read_next();
    let _ = env.read_next();
    let _ = env.read_next(); // third admission into two slots
    env.abandon("hoarder control").violation
}

/// Negative control: keep pulling after the budget is spent.
fn control_over_puller() -> bool {
    let mut env = fair_arena(2, 2, 5, 12);
    let _ = env.read_next();
    let slot = env.read_next().map(|x| x.0).unwrap_or(0);
    let _ = env.pull_many(slot, 5);
    let _ = env.pull(slot); // the one free game-over signal
    let _ = env.pull(slot); // pulling again is a violation
    env.abandon("over-puller control").violation
}

/// Negative control: pull a slot that holds nothing.
fn control_empty_puller() -> bool {
    let mut env = fair_arena(3, 2, 10, 13);
    let _ = env.pull(1);
    env.abandon("empty-slot control").violation
}

/// Run every shipped player across randomized valid configurations and
/// report rule violations, then confirm the referee still catches the
/// deliberately broken control policies. Violations are data, not errors.
pub fn fuzz_referee(configs: u64, base_seed: u64) -> FuzzReport {
    let outcomes: Vec<std::result::Result<bool, String>> = (0..configs)
        .into_par_iter()
        .map(|i| fuzz_one(base_seed, i).map(|r| r.violation).map_err(|e| format!("config {i}: {e}")))
        .collect();
    let mut violations = 0;
    let mut notes = Vec::new();
    for out in outcomes {
        match out {
            Ok(true) => violations += 1,
            Ok(false) => {}
            Err(note) => notes.push(note),
        }
    }
    let controls = [control_hoarder(), control_over_puller(), control_empty_puller()];
    let controls_tripped = controls.iter().filter(|&&c| c).count() as u64;
    for (k, tripped) in controls.iter().enumerate() {
        if !tripped {
            notes.push(format!("negative control {k} failed to trip the referee"));
        }
    }
    FuzzReport {
        configs_run: configs,
        violations,
        controls: controls.len() as u64,
        controls_tripped,
        notes,
    }
}

// ---------------------------------------------------------------------------
// Acceptance battery
// ---------------------------------------------------------------------------

/// One acceptance criterion's verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn criterion(
    id: u32,
    name: &str,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionResult {
    let (pass, detail) = match body() {
        Ok(x) => x,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult { id, name: name.to_string(), pass, detail }
}

/// A planted instance: arm `j` at 1/2 + gap, the rest fair, hard-family
/// arrival orders for the given level.
fn planted_gap_instance(
    n: usize,
    big_p: usize,
    j: usize,
    level: usize,
    gap: f64,
    seed: u64,
) -> Result<InstanceSpec> {
    let mut eps = vec![0.5];
    eps.extend(std::iter::repeat(gap).take(big_p));
    hard_instance(&HardFamily::planted(j, level, eps), n, big_p, seed)
}

/// Criterion 1: the referee sees no violations from the shipped players
/// across 10^4 randomized configurations, and every negative control trips.
pub fn criterion_1() -> CriterionResult {
    criterion(1, "referee integrity under fuzzing", || {
        let report = fuzz_referee(10_000, 0xACC0_0001);
        let pass = report.violations == 0
            && report.controls_tripped == report.controls
            && report.notes.is_empty();
        Ok((
            pass,
            format!(
                "{} configs, {} violations; {}/{} negative controls tripped{}",
                report.configs_run,
                report.violations,
                report.controls_tripped,
                report.controls,
                if report.notes.is_empty() {
                    String::new()
                } else {
                    format!("; notes: {}", report.notes.join(" | "))
                }
            ),
        ))
    })
}

fn md_duel_grid(
    reps: u64,
    base: u64,
    per_cell: impl Fn(usize, u64, u64) -> Result<f64> + Sync,
    bound: impl Fn(usize, u64) -> f64,
) -> Result<(bool, String)> {
    let mut pass = true;
    let mut lines = Vec::new();
    for &k in &[2usize, 5, 10] {
        for &l in &[1_000u64, 10_000] {
            let values: Vec<f64> = (0..reps)
                .into_par_iter()
                .map(|rep| per_cell(k, l, split_seed(base, &[k as u64, l, rep])))
                .collect::<Result<Vec<_>>>()?;
            let (mean, se) = mean_se(&values);
            let b = bound(k, l) + 3.0 * se;
            pass &= mean <= b;
            lines.push(format!("|S|={k} L={l}: {mean:.4} <= {b:.4}"));
        }
    }
    Ok((pass, lines.join("; ")))
}

/// Criterion 2: mean mirror-descent regret stays within sqrt(2|S|L).
pub fn criterion_2() -> CriterionResult {
    criterion(2, "mirror-descent regret bound", || {
        md_duel_grid(
            2000,
            0xACC0_0002,
            |k, l, seed| {
                let j = (splitmix64(seed) % k as u64) as usize;
                let mut means = vec![0.5; k];
                means[j] = 0.9;
                let order: Vec<usize> = (1..=k).collect();
                let inst = make_instance(means, vec![order])?;
                let mut env = StreamEnv::new(inst, 1, l, k, seed)?;
                let mut slots = Vec::with_capacity(k);
                for _ in 0..k {
                    slots.push(env.read_next()?.0);
                }
                run_mirror_descent(&mut env, &slots, l)?;
                Ok(env.finish()?.pseudo_regret)
            },
            |k, l| (2.0 * k as f64 * l as f64).sqrt(),
        )
    })
}

/// Criterion 3: the duel winner's mean gap stays within sqrt(2|S|/L).
pub fn criterion_3() -> CriterionResult {
    criterion(3, "duel-winner gap bound", || {
        md_duel_grid(
            5000,
            0xACC0_0003,
            |k, l, seed| {
                let j = (splitmix64(seed) % k as u64) as usize;
                let mut means = vec![0.5; k];
                means[j] = 0.9;
                let order: Vec<usize> = (1..=k).collect();
                let inst = make_instance(means.clone(), vec![order])?;
                let mut env = StreamEnv::new(inst, 1, l, k, seed)?;
                let mut slots = Vec::with_capacity(k);
                for _ in 0..k {
                    slots.push(env.read_next()?.0);
                }
                let winner = find_best(&mut env, &slots, l)?;
                Ok(0.9 - means[winner])
            },
            |k, l| (2.0 * k as f64 / l as f64).sqrt(),
        )
    })
}

/// Criterion 4: large-memory per-pass kings respect 10(n-m) eps_p / m.
pub fn criterion_4() -> CriterionResult {
    criterion(4, "large-memory king quality", || {
        let reps: u64 = 3000;
        let base: u64 = 0xACC0_0004;
        let batteries = [
            (9usize, 8usize, LargeVariant::SimpleNm1),
            (9, 8, LargeVariant::General),
            (18, 17, LargeVariant::SimpleNm1),
            (18, 16, LargeVariant::General),
        ];
        let mut pass = true;
        let mut lines = Vec::new();
        for (bi, &(n, m, variant)) in batteries.iter().enumerate() {
            for big_p in [1usize, 2] {
                let cfg = LargeRunConfig::new(n, m, big_p, 1_000_000, variant)?;
                let per_rep: Vec<Vec<f64>> = (0..reps)
                    .into_par_iter()
                    .map(|rep| {
                        let path = [bi as u64, big_p as u64, rep];
                        let j = 1 + (split_seed(base, &[path[0], path[1], rep, 9]) % n as u64)
                            as usize;
                        let inst = planted_gap_instance(
                            n,
                            big_p,
                            j,
                            big_p,
                            0.25,
                            split_seed(base, &[path[0], path[1], rep, 0]),
                        )?;
                        let mut env = StreamEnv::new(
                            inst,
                            big_p,
                            1_000_000,
                            m,
                            split_seed(base, &[path[0], path[1], rep, 1]),
                        )?;
                        let mut stage = String::new();
                        run_large_passes(&mut env, &cfg, &mut stage)?;
                        let rec = env.abandon("king measurement");
                        (1..=big_p)
                            .map(|p| {
                                rec.pass_best_means[p - 1]
                                    .map(|mu| 0.75 - mu)
                                    .ok_or_else(|| {
                                        Error::Usage(format!("pass {p} never completed"))
                                    })
                            })
                            .collect()
                    })
                    .collect::<Result<Vec<_>>>()?;
                for p in 1..=big_p {
                    let gaps: Vec<f64> = per_rep.iter().map(|g| g[p - 1]).collect();
                    let (mean, se) = mean_se(&gaps);
                    let eps_p = if p == 1 {
                        (1.0 / cfg.schedule.l1 as f64).sqrt()
                    } else {
                        (1.0 / cfg.schedule.lp2[p - 2] as f64).sqrt()
                    };
                    let bound = 10.0 * (n - m) as f64 * eps_p / m as f64 + 3.0 * se;
                    pass &= mean <= bound;
                    lines.push(format!(
                        "{} n={n} m={m} P={big_p} p={p}: {mean:.4} <= {bound:.4}",
                        match variant {
                            LargeVariant::SimpleNm1 => "simple",
                            LargeVariant::General => "general",
                        }
                    ));
                }
            }
        }
        Ok((pass, lines.join("; ")))
    })
}

/// Criterion 5: small-memory per-pass kings respect 2 eps_p.
pub fn criterion_5() -> CriterionResult {
    criterion(5, "small-memory king quality", || {
        let reps: u64 = 3000;
        let base: u64 = 0xACC0_0005;
        let n = 18usize;
        let t = 23_104u64; // (n+1)^2 * 64
        let mut pass = true;
        let mut lines = Vec::new();
        for (bi, &(m, big_p)) in [(2usize, 1usize), (5, 1), (2, 2), (5, 2)].iter().enumerate() {
            let cfg = SmallRunConfig::new(n, m, big_p, t)?;
            for upto in 1..=big_p {
                let gaps: Vec<f64> = (0..reps)
                    .into_par_iter()
                    .map(|rep| {
                        let path = [bi as u64, upto as u64, rep];
                        let j =
                            1 + (split_seed(base, &[path[0], path[1], rep, 9]) % n as u64) as usize;
                        let inst = planted_gap_instance(
                            n,
                            big_p,
                            j,
                            1,
                            0.25,
                            split_seed(base, &[path[0], path[1], rep, 0]),
                        )?;
                        let mut env = StreamEnv::new(
                            inst,
                            big_p,
                            4_000_000,
                            m,
                            split_seed(base, &[path[0], path[1], rep, 1]),
                        )?;
                        let mut stage = String::new();
                        let king = run_small_passes(&mut env, &cfg, upto, &mut stage)?;
                        for s in env.occupied_slots() {
                            if s != king {
                                env.drop_slot(s)?;
                            }
                        }
                        let rec = env.abandon("king measurement");
                        Ok(0.75 - rec.final_memory_means[0])
                    })
                    .collect::<Result<Vec<_>>>()?;
                let (mean, se) = mean_se(&gaps);
                let bound = 2.0 * cfg.schedule.eps[upto] + 3.0 * se;
                pass &= mean <= bound;
                lines.push(format!("m={m} P={big_p} p={upto}: {mean:.4} <= {bound:.4}"));
            }
        }
        Ok((pass, lines.join("; ")))
    })
}

/// Criterion 6: the identification ladder is PAC at (eps, 1/4) and never
/// exceeds its deterministic sample cap.
pub fn criterion_6() -> CriterionResult {
    criterion(6, "identification accuracy and sample cap", || {
        let reps: u64 = 2000;
        let base: u64 = 0xACC0_0006;
        let n = 50usize;
        let delta = 0.25;
        let mut pass = true;
        let mut lines = Vec::new();
        for &eps in &[0.05f64, 0.1] {
            let sched = schedule_bai(n as u64, 2, eps, delta)?;
            let cap = bai_sample_cap(n as u64, &sched);
            let results: Vec<(f64, u64)> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let tag = (eps * 100.0) as u64;
                    let j = 1 + (split_seed(base, &[tag, rep, 9]) % n as u64) as usize;
                    let mut means = vec![0.5; n];
                    means[j - 1] = 0.7;
                    let order: Vec<usize> = (1..=n).collect();
                    let inst = make_instance(means, vec![order])?;
                    let mut env =
                        StreamEnv::new(inst, 1, 2 * cap, 3, split_seed(base, &[tag, rep, 1]))?;
                    let mut stage = String::new();
                    let (_king, samples) = run_bai_passes(&mut env, eps, delta, &mut stage)?;
                    let rec = env.abandon("identification measurement");
                    Ok((0.7 - rec.final_memory_means[0], samples))
                })
                .collect::<Result<Vec<_>>>()?;
            let gaps: Vec<f64> = results.iter().map(|r| r.0).collect();
            let max_samples = results.iter().map(|r| r.1).max().unwrap_or(0);
            let (mean, se) = mean_se(&gaps);
            let bound = eps + 3.0 * se;
            let cell = mean <= bound && max_samples <= cap;
            pass &= cell;
            lines.push(format!(
                "eps={eps}: gap {mean:.4} <= {bound:.4}, max samples {max_samples} <= cap {cap}"
            ));
        }
        Ok((pass, lines.join("; ")))
    })
}

/// Criterion 7: retention keeps a near-best arm and spends exactly its
/// budget.
pub fn criterion_7() -> CriterionResult {
    criterion(7, "retention gap and exact budget", || {
        let reps: u64 = 5000;
        let base: u64 = 0xACC0_0007;
        let (n, m) = (18usize, 16usize);
        let mut pass = true;
        let mut lines = Vec::new();
        for (gi, &(e0, e1)) in [(0.5f64, 0.25f64), (0.4, 0.2), (0.3, 0.15)].iter().enumerate() {
            let cfg = BarConfig::new(n, m, e0, e1)?;
            let gaps: Vec<f64> = (0..reps)
                .into_par_iter()
                .map(|rep| {
                    let j = 1 + (split_seed(base, &[gi as u64, rep, 9]) % n as u64) as usize;
                    let mut means = vec![0.5; n];
                    means[j - 1] = 0.75;
                    let order: Vec<usize> = (1..=n).collect();
                    let inst = make_instance(means.clone(), vec![order])?;
                    let (out, rec) =
                        run_bar_full(inst, &cfg, split_seed(base, &[gi as u64, rep, 1]))?;
                    if rec.rounds_used != cfg.total_pulls() {
                        return Err(Error::Usage(format!(
                            "run used {} pulls, expected {}",
                            rec.rounds_used,
                            cfg.total_pulls()
                        )));
                    }
                    let kept = out
                        .survivors
                        .iter()
                        .map(|&s| means[s])
                        .fold(f64::NEG_INFINITY, f64::max);
                    Ok(0.75 - kept)
                })
                .collect::<Result<Vec<_>>>()?;
            let (mean, se) = mean_se(&gaps);
            let frac = 2.0 * (n - m) as f64 * e1;
            let bound = (frac / n as f64).max(frac / m as f64) + 3.0 * se;
            pass &= mean <= bound;
            lines.push(format!("eps=({e0},{e1}): {mean:.4} <= {bound:.4}"));
        }
        Ok((pass, lines.join("; ")))
    })
}

/// Worst-over-j mean regret of the dispatched player on the planted
/// family at one (P, T) cell: sweep every planted position, return the
/// largest per-j mean.
pub fn worst_over_j(
    n: usize,
    m: usize,
    big_p: usize,
    t: u64,
    reps_per_j: u64,
    base: u64,
) -> Result<(f64, usize)> {
    let cfg = LargeRunConfig::new(n, m, big_p, t, LargeVariant::General)?;
    let raw = lower_bound_eps_raw(n as u64, m as u64, big_p as u32, t as f64, 1.0)?;
    let mut eps = vec![0.5];
    eps.extend(raw.iter().map(|&e| e.min(0.25)));
    let mut worst = f64::NEG_INFINITY;
    let mut worst_j = 0;
    for j in 1..=n {
        let regrets: Vec<f64> = (0..reps_per_j)
            .into_par_iter()
            .map(|rep| {
                let fam = HardFamily::planted(j, big_p, eps.clone());
                let inst =
                    hard_instance(&fam, n, big_p, split_seed(base, &[j as u64, rep, 0]))?;
                let env =
                    StreamEnv::new(inst, big_p, t, m, split_seed(base, &[j as u64, rep, 1]))?;
                Ok(run_large_general(env, &cfg)?.pseudo_regret)
            })
            .collect::<Result<Vec<_>>>()?;
        let (mean, _) = mean_se(&regrets);
        if mean > worst {
            worst = mean;
            worst_j = j;
        }
    }
    Ok((worst, worst_j))
}

/// Criterion 8: the fitted regret-vs-horizon exponent matches the P-pass
/// target on the hard family, and deepening passes flattens the curve.
pub fn criterion_8() -> CriterionResult {
    criterion(8, "regret scaling exponent", || {
        let base: u64 = 0xACC0_0008;
        let (n, m) = (9usize, 8usize);
        let horizons: Vec<u64> = (14..=20).map(|k| 1u64 << k).collect();
        let reps_per_j: u64 = 112; // 9 positions x 112 > 1000 runs per point
        let mut slopes = Vec::new();
        let mut lines = Vec::new();
        let mut pass = true;
        for big_p in [1usize, 2] {
            let mut points = Vec::new();
            for &t in &horizons {
                let (worst, _) = worst_over_j(
                    n,
                    m,
                    big_p,
                    t,
                    reps_per_j,
                    split_seed(base, &[big_p as u64, t]),
                )?;
                points.push((t as f64, worst));
            }
            let fit = estimate_exponent(&points)?;
            let target = slope_target(big_p as u32);
            pass &= (fit.slope - target).abs() <= 0.08;
            lines.push(format!(
                "P={big_p}: slope {:.4} vs target {target:.4} (stderr {:.4})",
                fit.slope, fit.stderr
            ));
            slopes.push(fit.slope);
        }
        pass &= slopes[1] < slopes[0];
        lines.push(format!(
            "P=2 slope {} P=1 slope",
            if slopes[1] < slopes[0] { "below" } else { "NOT below" }
        ));
        Ok((pass, lines.join("; ")))
    })
}

/// Criterion 9: all-equal means leave every player with regret exactly 0.
pub fn criterion_9() -> CriterionResult {
    criterion(9, "zero regret on all-equal means", || {
        let mut lines = Vec::new();
        let mut pass = true;
        let mut check = |name: &str, rec: RunRecord| {
            let ok = rec.pseudo_regret == 0.0 && !rec.violation;
            pass &= ok;
            lines.push(format!(
                "{name}: regret {}{}",
                rec.pseudo_regret,
                if rec.violation { " (violation!)" } else { "" }
            ));
        };

        let cfg = LargeRunConfig::new(9, 8, 2, 2000, LargeVariant::SimpleNm1)?;
        let inst = hard_instance(&HardFamily::all_fair(), 9, 2, 1)?;
        check("large-simple", run_large_simple(StreamEnv::new(inst, 2, 2000, 8, 2)?, &cfg)?);

        let cfg = LargeRunConfig::new(9, 8, 2, 2000, LargeVariant::General)?;
        let inst = hard_instance(&HardFamily::all_fair(), 9, 2, 3)?;
        check("large-general", run_large_general(StreamEnv::new(inst, 2, 2000, 8, 4)?, &cfg)?);

        let cfg = SmallRunConfig::new(18, 2, 1, 23_104)?;
        let inst = hard_instance(&HardFamily::all_fair(), 18, 1, 5)?;
        check("small", run_small(StreamEnv::new(inst, 1, 23_104, 2, 6)?, &cfg)?);

        let cfg = BarConfig::new(12, 10, 0.4, 0.2)?;
        let inst = hard_instance(&HardFamily::all_fair(), 12, 1, 7)?;
        let (_, rec) = run_bar_full(inst, &cfg, 8)?;
        check("bar", rec);

        let inst = hard_instance(&HardFamily::all_fair(), 10, 1, 9)?;
        check(
            "bai-stream",
            crate::algos_small::run_bai_stream(
                StreamEnv::new(inst, 1, 150_000, 3, 10)?,
                0.2,
                0.25,
            )?,
        );

        let point = GridPoint { n: 3, m: 3, big_p: 1, t: 1000 };
        check(
            "uniform-baseline",
            run_one(AlgorithmId::UniformBaseline, &InstanceSource::AllFair, point, 11, 12)?,
        );

        Ok((pass, lines.join("; ")))
    })
}

/// Criterion 10: the same base seed reproduces byte-identical CSV output.
pub fn criterion_10() -> CriterionResult {
    criterion(10, "byte-identical reproducibility", || {
        let exp = Experiment {
            algorithm: AlgorithmId::LargeGeneral,
            instance: InstanceSource::PlantedGap { j: 3, level: 1, gap: 0.25 },
            grid: vec![GridPoint { n: 9, m: 8, big_p: 1, t: 20_000 }],
            reps: 200,
            base_seed: 4242,
        };
        let (s1, c1) = simulate_full(&exp)?;
        let (s2, c2) = simulate_full(&exp)?;
        let mut other = exp.clone();
        other.base_seed = 4243;
        let (_, c3) = simulate_full(&other)?;
        let pass = c1 == c2 && s1 == s2 && c1 != c3;
        Ok((
            pass,
            format!(
                "same seed: csv {} ({} bytes), summary {}; different seed differs: {}",
                if c1 == c2 { "identical" } else { "DIFFERS" },
                c1.len(),
                if s1 == s2 { "identical" } else { "DIFFERS" },
                c1 != c3
            ),
        ))
    })
}

/// The full acceptance battery, in order.
pub fn run_all_criteria() -> Vec<CriterionResult> {
    vec![
        criterion_1(),
        criterion_2(),
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_selection_matches_the_memory_split() {
        assert_eq!(select_algorithm(9, 8).unwrap(), AlgorithmId::LargeGeneral);
        assert_eq!(select_algorithm(9, 7).unwrap(), AlgorithmId::Small);
        assert!(select_algorithm(9, 9).is_err(), "m < n required");
        let err = select_algorithm(9, 1).unwrap_err().to_string();
        assert!(err.contains("m >= 2"), "message must cite the m >= 2 rule: {err}");
    }

    #[test]
    fn algorithm_ids_round_trip_through_their_names() {
        for id in [
            AlgorithmId::LargeSimple,
            AlgorithmId::LargeGeneral,
            AlgorithmId::Small,
            AlgorithmId::UniformBaseline,
        ] {
            assert_eq!(AlgorithmId::parse(id.name()).unwrap(), id);
        }
        assert!(AlgorithmId::parse("banditron").is_err());
    }

    #[test]
    fn split_seed_is_deterministic_and_order_sensitive() {
        assert_eq!(split_seed(7, &[1, 2, 3]), split_seed(7, &[1, 2, 3]));
        assert_ne!(split_seed(7, &[1, 2]), split_seed(7, &[2, 1]));
        assert_ne!(split_seed(7, &[1]), split_seed(8, &[1]));
        assert_ne!(split_seed(7, &[0, 1]), split_seed(7, &[0, 2]));
    }

    #[test]
    fn exponent_fit_recovers_synthetic_power_laws() {
        let ts = [100.0f64, 1e3, 1e4, 1e5, 1e6];
        let exact: Vec<(f64, f64)> = ts.iter().map(|&t| (t, t.powf(2.0 / 3.0))).collect();
        let fit = estimate_exponent(&exact).unwrap();
        assert!((fit.slope - 2.0 / 3.0).abs() < 1e-9, "slope {}", fit.slope);
        assert!(fit.stderr < 1e-9);

        let scaled: Vec<(f64, f64)> = ts.iter().map(|&t| (t, 5.0 * t.powf(4.0 / 7.0))).collect();
        let fit = estimate_exponent(&scaled).unwrap();
        assert!((fit.slope - 4.0 / 7.0).abs() < 1e-9, "intercept must not bias the slope");

        let mut with_zero = exact.clone();
        with_zero.push((2e6, 0.0));
        let fit = estimate_exponent(&with_zero).unwrap();
        assert_eq!(fit.excluded, 1);
        assert_eq!(fit.used, 5);

        assert!(estimate_exponent(&exact[..2]).is_err(), "need three usable points");
        let flat = [(100.0, 5.0), (100.0, 6.0), (100.0, 7.0)];
        assert!(estimate_exponent(&flat).is_err(), "need distinct horizons");
    }

    #[test]
    fn slope_targets_follow_the_pass_count() {
        assert!((slope_target(1) - 2.0 / 3.0).abs() < 1e-12);
        assert!((slope_target(2) - 4.0 / 7.0).abs() < 1e-12);
        assert!((slope_target(3) - 8.0 / 15.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_baseline_matches_its_closed_form_regret() {
        // Uniform play over means (0.9, 0.5, 0.5) loses (0.4+0.4)/3 per
        // round on average: 800 expected at T=3000.
        let means = vec![0.9, 0.5, 0.5];
        let inst = make_instance(means, vec![vec![1, 2, 3]]).unwrap();
        let exp = Experiment {
            algorithm: AlgorithmId::UniformBaseline,
            instance: InstanceSource::Explicit { spec: inst },
            grid: vec![GridPoint { n: 3, m: 3, big_p: 1, t: 3000 }],
            reps: 400,
            base_seed: 99,
        };
        let summary = simulate(&exp).unwrap();
        let point = &summary.points[0];
        assert!(
            (point.mean_regret - 800.0).abs() <= 3.0 * point.se_regret,
            "mean {} se {}",
            point.mean_regret,
            point.se_regret
        );
        assert_eq!(point.violations, 0);
    }

    #[test]
    fn all_equal_instances_summarize_to_exactly_zero() {
        let exp = Experiment {
            algorithm: AlgorithmId::LargeGeneral,
            instance: InstanceSource::AllFair,
            grid: vec![GridPoint { n: 9, m: 8, big_p: 1, t: 2000 }],
            reps: 50,
            base_seed: 5,
        };
        let summary = simulate(&exp).unwrap();
        assert_eq!(summary.points[0].mean_regret, 0.0);
        assert_eq!(summary.points[0].se_regret, 0.0);
    }

    #[test]
    fn quadrupling_repetitions_quarters_the_squared_se() {
        let mk = |reps| Experiment {
            algorithm: AlgorithmId::UniformBaseline,
            instance: InstanceSource::PlantedGap { j: 1, level: 1, gap: 0.25 },
            grid: vec![GridPoint { n: 3, m: 3, big_p: 1, t: 1000 }],
            reps,
            base_seed: 500,
        };
        let se_small = simulate(&mk(100)).unwrap().points[0].se_regret;
        let se_large = simulate(&mk(400)).unwrap().points[0].se_regret;
        let ratio = (se_small * se_small) / (se_large * se_large);
        assert!(
            (2.0..8.0).contains(&ratio),
            "SE^2 ratio {ratio} should sit near 4"
        );
    }

    #[test]
    fn csv_layout_matches_the_declared_schema() {
        let exp = Experiment {
            algorithm: AlgorithmId::LargeGeneral,
            instance: InstanceSource::AllFair,
            grid: vec![
                GridPoint { n: 9, m: 8, big_p: 2, t: 2000 },
                GridPoint { n: 9, m: 8, big_p: 1, t: 1000 },
            ],
            reps: 3,
            base_seed: 17,
        };
        let (summary, csv) = simulate_full(&exp).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 2 * 3, "header plus reps x points rows");
        assert_eq!(
            lines[0],
            "run_id,algorithm,n,m,P,T,seed,pseudo_regret,L_1,L_2,violation,schema_version"
        );
        for (i, row) in lines[1..].iter().enumerate() {
            let cols: Vec<&str> = row.split(',').collect();
            assert_eq!(cols.len(), 12, "row {i}: {row}");
            assert_eq!(cols[0], i.to_string(), "run ids count up in order");
            assert_eq!(cols[1], "large-general");
            assert_eq!(*cols.last().unwrap(), "1");
        }
        // The one-pass point leaves the padded L_2 column empty.
        let one_pass_row = lines[4];
        assert_eq!(one_pass_row.split(',').nth(9), Some(""));
        assert_eq!(summary.points.len(), 2);

        let (_, again) = simulate_full(&exp).unwrap();
        assert_eq!(csv, again, "same base seed, same bytes");
    }

    #[test]
    fn summaries_serialize_with_their_schema_version() {
        let exp = Experiment {
            algorithm: AlgorithmId::UniformBaseline,
            instance: InstanceSource::AllFair,
            grid: vec![GridPoint { n: 3, m: 3, big_p: 1, t: 100 }],
            reps: 2,
            base_seed: 1,
        };
        let summary = simulate(&exp).unwrap();
        let json = summary.to_json().unwrap();
        assert!(json.contains("\"schema_version\": 1"));
        let back: Summary = serde_json::from_str(&json).unwrap();
        assert_eq!(back, summary);
    }

    #[test]
    fn experiment_validation_rejects_degenerate_shapes() {
        let mut exp = Experiment {
            algorithm: AlgorithmId::Small,
            instance: InstanceSource::AllFair,
            grid: vec![],
            reps: 0,
            base_seed: 0,
        };
        assert!(exp.validate().is_err(), "empty grid");
        exp.grid.push(GridPoint { n: 18, m: 2, big_p: 1, t: 23_104 });
        assert!(exp.validate().is_err(), "zero reps");
        exp.reps = 1;
        assert!(exp.validate().is_ok());
    }

    #[test]
    fn realized_instances_match_their_sources() {
        let point = GridPoint { n: 9, m: 8, big_p: 2, t: 100_000 };
        let inst =
            realize_instance(&InstanceSource::PlantedGap { j: 4, level: 1, gap: 0.2 }, point, 3)
                .unwrap();
        assert_eq!(inst.means[3], 0.7);
        assert_eq!(inst.means.iter().filter(|&&mu| mu == 0.5).count(), 8);

        // The lower-bound recipe's gaps land inside (0, 1/4].
        let inst =
            realize_instance(&InstanceSource::Planted { j: 1, level: 2 }, point, 3).unwrap();
        let gap = inst.means[0] - 0.5;
        assert!(gap > 0.0 && gap <= 0.25, "gap {gap}");

        let spec = make_instance(vec![0.5; 4], vec![vec![1, 2, 3, 4]]).unwrap();
        let bad = realize_instance(
            &InstanceSource::Explicit { spec },
            GridPoint { n: 5, m: 2, big_p: 1, t: 100 },
            0,
        );
        assert!(bad.is_err(), "shape mismatch must be caught");
    }

    #[test]
    fn mini_fuzz_session_is_clean_and_controls_trip() {
        let report = fuzz_referee(60, 0xBEEF);
        assert_eq!(report.violations, 0, "notes: {:?}", report.notes);
        assert_eq!(report.controls_tripped, report.controls);
        assert!(report.notes.is_empty(), "{:?}", report.notes);
    }

    #[test]
    fn worst_over_j_sweeps_every_position() {
        let (worst, j) = worst_over_j(9, 8, 1, 4096, 20, 77).unwrap();
        assert!(worst.is_finite() && worst > 0.0);
        assert!((1..=9).contains(&j));
    }
}
