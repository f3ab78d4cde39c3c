//! Command-line front end: declarative experiment configs, direct runs,
//! grid sweeps, the referee fuzzer, standalone identification and
//! retention tools, and the acceptance battery.
//!
//! Exit codes: 0 success, 1 configuration error, 2 referee violation,
//! 3 acceptance failure. Every emitted artifact embeds the resolved
//! config and base seed. Worker-pool size comes from `--jobs`, falling
//! back to the `STREAMBANDIT_JOBS` environment variable.

use crate::algos_small::run_bai_passes;
use crate::bar::{run_bar_full, BarConfig};
use crate::harness::{
    criterion_1, criterion_10, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
    criterion_7, criterion_8, criterion_9, fuzz_referee, select_algorithm, simulate_full,
    split_seed, AlgorithmId, CriterionResult, Experiment, GridPoint, InstanceSource,
    SUMMARY_SCHEMA_VERSION,
};
use crate::instances::make_instance;
use crate::mathkit::{bai_sample_cap, log_star, schedule_bai};
use crate::plot::{render_loglog_svg, PlotSeries};
use crate::streamenv::StreamEnv;
use crate::{Error, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "streambandit",
    version,
    about = "Memory-constrained streaming bandit engine and experiment harness"
)]
struct Cli {
    /// Worker threads (default: STREAMBANDIT_JOBS env var, then all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment point (or a config file) and emit CSV + JSON.
    Run(RunArgs),
    /// Run a config-file experiment grid and emit CSV + JSON + SVG.
    Sweep(SweepArgs),
    /// Run the acceptance battery; exit 3 if any criterion fails.
    Accept(AcceptArgs),
    /// Fuzz the referee across randomized configurations of every player.
    Fuzz(FuzzArgs),
    /// Standalone best-arm identification runs with the ladder player.
    Bai(BaiArgs),
    /// Standalone best-arm retention runs.
    Bar(BarArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Player: large-simple, large-general, small, or uniform-baseline
    /// (default: dispatch by the memory rule).
    #[arg(long)]
    alg: Option<String>,
    /// Arms per pass.
    #[arg(long)]
    n: Option<usize>,
    /// Memory slots.
    #[arg(long)]
    m: Option<usize>,
    /// Number of passes.
    #[arg(long = "P")]
    big_p: Option<usize>,
    /// Round budget.
    #[arg(long = "T")]
    t: Option<u64>,
    /// Monte-Carlo repetitions.
    #[arg(long, default_value_t = 100)]
    reps: u64,
    /// Base seed for all repetition streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Instance family: planted-gap, planted, or all-fair.
    #[arg(long, default_value = "planted-gap")]
    instance: String,
    /// Planted arm position (1-based).
    #[arg(long, default_value_t = 1)]
    j: usize,
    /// Pass the planted arm hides behind.
    #[arg(long, default_value_t = 1)]
    level: usize,
    /// Gap of the planted arm (planted-gap family).
    #[arg(long, default_value_t = 0.25)]
    gap: f64,
    /// Experiment config file (flat JSON); excludes the shape flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, as key=value (repeatable; needs --config).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory for artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Experiment config file (flat JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override one config key, as key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory for artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct AcceptArgs {
    /// Comma-separated criterion ids to run (default: all ten).
    #[arg(long)]
    only: Option<String>,
    /// Output directory for artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FuzzArgs {
    /// Randomized configurations to run.
    #[arg(long, default_value_t = 10_000)]
    configs: u64,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BaiArgs {
    /// Stream size.
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Memory slots.
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Identification accuracy target.
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Failure probability target.
    #[arg(long, default_value_t = 0.25)]
    delta: f64,
    /// Gap of the planted best arm.
    #[arg(long, default_value_t = 0.2)]
    gap: f64,
    /// Monte-Carlo repetitions.
    #[arg(long, default_value_t = 100)]
    reps: u64,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BarArgs {
    /// Arms in the arena.
    #[arg(long, default_value_t = 18)]
    n: usize,
    /// Arms to retain.
    #[arg(long, default_value_t = 16)]
    m: usize,
    /// First-stage accuracy.
    #[arg(long, default_value_t = 0.5)]
    eps0: f64,
    /// Second-stage accuracy.
    #[arg(long, default_value_t = 0.25)]
    eps1: f64,
    /// Gap of the planted best arm.
    #[arg(long, default_value_t = 0.25)]
    gap: f64,
    /// Monte-Carlo repetitions.
    #[arg(long, default_value_t = 100)]
    reps: u64,
    /// Base seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for artifacts.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Parse argv and dispatch; returns the process exit code.
pub fn dispatch<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    init_workers(cli.jobs);
    let outcome = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Accept(a) => cmd_accept(a),
        Command::Fuzz(a) => cmd_fuzz(a),
        Command::Bai(a) => cmd_bai(a),
        Command::Bar(a) => cmd_bar(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn resolve_jobs(flag: Option<usize>, env_value: Option<&str>) -> Option<usize> {
    flag.or_else(|| env_value.and_then(|s| s.trim().parse().ok()))
        .filter(|&k| k > 0)
}

fn init_workers(flag: Option<usize>) {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| {
        let env_value = std::env::var("STREAMBANDIT_JOBS").ok();
        if let Some(k) = resolve_jobs(flag, env_value.as_deref()) {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
    });
}

// ---------------------------------------------------------------------------
// Flat JSON config schema
// ---------------------------------------------------------------------------

/// On-disk form of an [`Experiment`]: the instance source's fields are
/// flattened to the top level so config files stay flat (the grid list is
/// the only nesting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFile {
    pub algorithm: AlgorithmId,
    #[serde(flatten)]
    pub instance: InstanceSource,
    pub grid: Vec<GridPoint>,
    pub reps: u64,
    pub base_seed: u64,
}

impl From<Experiment> for ExperimentFile {
    fn from(exp: Experiment) -> Self {
        ExperimentFile {
            algorithm: exp.algorithm,
            instance: exp.instance,
            grid: exp.grid,
            reps: exp.reps,
            base_seed: exp.base_seed,
        }
    }
}

impl From<ExperimentFile> for Experiment {
    fn from(file: ExperimentFile) -> Self {
        Experiment {
            algorithm: file.algorithm,
            instance: file.instance,
            grid: file.grid,
            reps: file.reps,
            base_seed: file.base_seed,
        }
    }
}

const BASE_KEYS: [&str; 5] = ["algorithm", "kind", "grid", "reps", "base_seed"];

fn parse_experiment_value(value: serde_json::Value) -> Result<Experiment> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::Config("config top level must be a JSON object".into()))?;
    let kind = obj
        .get("kind")
        .and_then(serde_json::Value::as_str)
        .ok_or_else(|| Error::Config("config needs a string \"kind\" naming the instance family".into()))?;
    let allowed: &[&str] = match kind {
        "explicit" => &["spec"],
        "all-fair" => &[],
        "planted" => &["j", "level"],
        "planted-gap" => &["j", "level", "gap"],
        other => {
            return Err(Error::Config(format!(
                "unknown instance kind {other:?}; expected explicit, all-fair, planted, \
                 or planted-gap"
            )))
        }
    };
    for key in obj.keys() {
        if !BASE_KEYS.contains(&key.as_str()) && !allowed.contains(&key.as_str()) {
            return Err(Error::Config(format!(
                "unknown config key {key:?} for instance kind {kind:?}"
            )));
        }
    }
    let file: ExperimentFile = serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("config does not match the experiment schema: {e}")))?;
    let exp = Experiment::from(file);
    exp.validate()?;
    Ok(exp)
}

/// Parse a flat-JSON experiment config, after applying `key=value`
/// overrides. Unknown keys are rejected; override values are
/// type-checked against the schema.
pub fn load_experiment(text: &str, sets: &[String]) -> Result<Experiment> {
    let mut value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("config is not valid JSON: {e}")))?;
    apply_overrides(&mut value, sets)?;
    parse_experiment_value(value)
}

fn apply_overrides(value: &mut serde_json::Value, sets: &[String]) -> Result<()> {
    if sets.is_empty() {
        return Ok(());
    }
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Config("config top level must be a JSON object".into()))?;
    for set in sets {
        let (key, raw) = set.split_once('=').ok_or_else(|| {
            Error::Config(format!("override {set:?} must look like key=value"))
        })?;
        // A value that parses as JSON is taken structurally; anything
        // else is a bare string (so algorithm=small needs no quoting).
        let parsed = serde_json::from_str::<serde_json::Value>(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        obj.insert(key.to_string(), parsed);
    }
    Ok(())
}

/// The experiment re-serialized in the flat config schema (compact).
pub fn experiment_to_config_json(exp: &Experiment) -> Result<String> {
    serde_json::to_string(&ExperimentFile::from(exp.clone()))
        .map_err(|e| Error::Config(format!("config serialization failed: {e}")))
}

// ---------------------------------------------------------------------------
// Subcommand handlers
// ---------------------------------------------------------------------------

fn write_artifact(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn build_run_experiment(args: &RunArgs) -> Result<Experiment> {
    if let Some(path) = &args.config {
        if args.alg.is_some()
            || args.n.is_some()
            || args.m.is_some()
            || args.big_p.is_some()
            || args.t.is_some()
        {
            return Err(Error::Config(
                "pass either --config or the shape flags (--alg/--n/--m/--P/--T), not both"
                    .into(),
            ));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        return load_experiment(&text, &args.set);
    }
    if !args.set.is_empty() {
        return Err(Error::Config("--set overrides need --config".into()));
    }
    let (n, m, big_p, t) = match (args.n, args.m, args.big_p, args.t) {
        (Some(n), Some(m), Some(p), Some(t)) => (n, m, p, t),
        _ => {
            return Err(Error::Config(
                "run needs --n, --m, --P and --T (or a --config file)".into(),
            ))
        }
    };
    let algorithm = match &args.alg {
        Some(name) => AlgorithmId::parse(name)?,
        None => select_algorithm(n, m)?,
    };
    if algorithm != AlgorithmId::UniformBaseline && m < 2 {
        return Err(Error::Config(format!(
            "memory must satisfy m >= 2, got m={m}"
        )));
    }
    let instance = match args.instance.as_str() {
        "all-fair" => InstanceSource::AllFair,
        "planted" => InstanceSource::Planted { j: args.j, level: args.level },
        "planted-gap" => {
            InstanceSource::PlantedGap { j: args.j, level: args.level, gap: args.gap }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown instance family {other:?}; expected planted-gap, planted, or all-fair"
            )))
        }
    };
    let exp = Experiment {
        algorithm,
        instance,
        grid: vec![GridPoint { n, m, big_p, t }],
        reps: args.reps,
        base_seed: args.seed,
    };
    exp.validate()?;
    Ok(exp)
}

fn emit_experiment(exp: &Experiment, out: &Path, stem: &str) -> Result<u8> {
    let (summary, csv) = simulate_full(exp)?;
    let config_json = experiment_to_config_json(exp)?;

    write_artifact(out, &format!("{stem}-config.json"), &format!("{config_json}\n"))?;
    write_artifact(out, &format!("{stem}.csv"), &format!("# config {config_json}\n{csv}"))?;
    write_artifact(out, &format!("{stem}-summary.json"), &summary.to_json()?)?;

    if exp.grid.len() >= 2 {
        let mut keys: Vec<(usize, usize, usize)> = Vec::new();
        let mut series: Vec<PlotSeries> = Vec::new();
        for ps in &summary.points {
            let key = (ps.point.n, ps.point.m, ps.point.big_p);
            let idx = match keys.iter().position(|&k| k == key) {
                Some(i) => i,
                None => {
                    keys.push(key);
                    series.push(PlotSeries {
                        label: format!("n={} m={} P={}", key.0, key.1, key.2),
                        points: Vec::new(),
                    });
                    keys.len() - 1
                }
            };
            series[idx].points.push((ps.point.t as f64, ps.mean_regret));
        }
        match render_loglog_svg("pseudo-regret vs horizon", &config_json, &series) {
            Ok(svg) => {
                write_artifact(out, &format!("{stem}.svg"), &svg)?;
            }
            Err(e) => eprintln!("note: skipping plot: {e}"),
        }
    }

    for ps in &summary.points {
        println!(
            "n={} m={} P={} T={}: mean regret {:.4} (se {:.4}), {} violations, {} truncated",
            ps.point.n,
            ps.point.m,
            ps.point.big_p,
            ps.point.t,
            ps.mean_regret,
            ps.se_regret,
            ps.violations,
            ps.truncations
        );
    }
    if let Some(fit) = &summary.exponent {
        println!(
            "fitted log-log exponent: {:.4} (stderr {:.4}, {} points used, {} excluded)",
            fit.slope, fit.stderr, fit.used, fit.excluded
        );
    }
    println!("artifacts written to {}", out.display());

    let violations: u64 = summary.points.iter().map(|p| p.violations).sum();
    Ok(if violations > 0 { 2 } else { 0 })
}

fn cmd_run(args: &RunArgs) -> Result<u8> {
    let exp = build_run_experiment(args)?;
    emit_experiment(&exp, &args.out, "run")
}

fn cmd_sweep(args: &SweepArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| {
        Error::Config(format!("cannot read config {}: {e}", args.config.display()))
    })?;
    let exp = load_experiment(&text, &args.set)?;
    emit_experiment(&exp, &args.out, "sweep")
}

/// The acceptance criterion with the given id (1 through 10).
pub fn criterion_by_id(id: u32) -> Option<fn() -> CriterionResult> {
    match id {
        1 => Some(criterion_1),
        2 => Some(criterion_2),
        3 => Some(criterion_3),
        4 => Some(criterion_4),
        5 => Some(criterion_5),
        6 => Some(criterion_6),
        7 => Some(criterion_7),
        8 => Some(criterion_8),
        9 => Some(criterion_9),
        10 => Some(criterion_10),
        _ => None,
    }
}

fn cmd_accept(args: &AcceptArgs) -> Result<u8> {
    let ids: Vec<u32> = match &args.only {
        None => (1..=10).collect(),
        Some(list) => {
            let mut ids = Vec::new();
            for part in list.split(',') {
                let id: u32 = part.trim().parse().map_err(|_| {
                    Error::Config(format!("--only takes criterion ids, got {part:?}"))
                })?;
                if criterion_by_id(id).is_none() {
                    return Err(Error::Config(format!("no acceptance criterion {id}")));
                }
                ids.push(id);
            }
            ids
        }
    };
    let mut results = Vec::new();
    for id in &ids {
        let run = criterion_by_id(*id).expect("validated above");
        let r = run();
        println!("{} {:>2} {} — {}", if r.pass { "PASS" } else { "FAIL" }, r.id, r.name, r.detail);
        results.push(r);
    }
    let all_pass = results.iter().all(|r| r.pass);
    let doc = serde_json::json!({
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "battery": "acceptance",
        "criteria_requested": ids,
        "criteria": results,
        "all_pass": all_pass,
    });
    let body = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    write_artifact(&args.out, "acceptance.json", &body)?;
    println!("acceptance: {}", if all_pass { "PASS" } else { "FAIL" });
    Ok(if all_pass { 0 } else { 3 })
}

fn cmd_fuzz(args: &FuzzArgs) -> Result<u8> {
    let report = fuzz_referee(args.configs, args.seed);
    println!(
        "{} configs, {} violations; {}/{} negative controls tripped",
        report.configs_run, report.violations, report.controls_tripped, report.controls
    );
    for note in &report.notes {
        eprintln!("note: {note}");
    }
    let doc = serde_json::json!({
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "config": { "configs": args.configs, "seed": args.seed },
        "report": report,
    });
    let body = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    write_artifact(&args.out, "fuzz.json", &body)?;
    if report.violations > 0 || report.controls_tripped < report.controls {
        Ok(2)
    } else if !report.notes.is_empty() {
        Ok(1)
    } else {
        Ok(0)
    }
}

fn cmd_bai(args: &BaiArgs) -> Result<u8> {
    if args.m < 2 {
        return Err(Error::Config(format!("memory must satisfy m >= 2, got m={}", args.m)));
    }
    if args.n < 2 || args.m > args.n {
        return Err(Error::Config(format!(
            "identification needs 2 <= m <= n, got n={} m={}",
            args.n, args.m
        )));
    }
    if !(args.gap > 0.0 && args.gap <= 0.5) {
        return Err(Error::Config(format!("gap must lie in (0, 1/2], got {}", args.gap)));
    }
    let r = (log_star(args.n as f64)? as usize).min(args.m - 1).max(1);
    let sched = schedule_bai(args.n as u64, r, args.eps, args.delta)?;
    let cap = bai_sample_cap(args.n as u64, &sched);
    let best_mean = 0.5 + args.gap;

    let rows: Vec<(u64, f64, u64, bool)> = (0..args.reps)
        .into_par_iter()
        .map(|rep| {
            let j = 1 + (split_seed(args.seed, &[rep, 9]) % args.n as u64) as usize;
            let mut means = vec![0.5; args.n];
            means[j - 1] = best_mean;
            let order: Vec<usize> = (1..=args.n).collect();
            let inst = make_instance(means, vec![order])?;
            let env_seed = split_seed(args.seed, &[rep, 1]);
            let mut env = StreamEnv::new(inst, 1, 2 * cap, args.m, env_seed)?;
            let mut stage = String::new();
            let (_king, samples) = run_bai_passes(&mut env, args.eps, args.delta, &mut stage)?;
            let rec = env.abandon("identification measurement");
            Ok((env_seed, best_mean - rec.final_memory_means[0], samples, rec.violation))
        })
        .collect::<Result<Vec<_>>>()?;

    let config = serde_json::json!({
        "n": args.n, "m": args.m, "eps": args.eps, "delta": args.delta,
        "gap": args.gap, "reps": args.reps, "seed": args.seed,
    });
    let mut csv = format!("# config {config}\nrep,seed,gap,samples,cap,violation\n");
    for (rep, row) in rows.iter().enumerate() {
        let _ = writeln!(csv, "{rep},{},{},{},{cap},{}", row.0, row.1, row.2, row.3);
    }
    write_artifact(&args.out, "bai.csv", &csv)?;

    let gaps: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
    let max_samples = rows.iter().map(|r| r.2).max().unwrap_or(0);
    let violations = rows.iter().filter(|r| r.3).count() as u64;
    let doc = serde_json::json!({
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "config": config,
        "levels": r,
        "mean_gap": mean_gap,
        "max_samples": max_samples,
        "sample_cap": cap,
        "within_cap": max_samples <= cap,
        "violations": violations,
    });
    let body = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    write_artifact(&args.out, "bai-summary.json", &body)?;
    println!(
        "mean gap {mean_gap:.4} (target {}), max samples {max_samples} of cap {cap}, \
         {violations} violations",
        args.eps
    );
    println!("artifacts written to {}", args.out.display());
    Ok(if violations > 0 { 2 } else { 0 })
}

fn cmd_bar(args: &BarArgs) -> Result<u8> {
    if !(args.gap > 0.0 && args.gap <= 0.5) {
        return Err(Error::Config(format!("gap must lie in (0, 1/2], got {}", args.gap)));
    }
    let cfg = BarConfig::new(args.n, args.m, args.eps0, args.eps1)?;
    let best_mean = 0.5 + args.gap;

    let rows: Vec<(u64, f64, u64, bool)> = (0..args.reps)
        .into_par_iter()
        .map(|rep| {
            let j = 1 + (split_seed(args.seed, &[rep, 9]) % args.n as u64) as usize;
            let mut means = vec![0.5; args.n];
            means[j - 1] = best_mean;
            let order: Vec<usize> = (1..=args.n).collect();
            let inst = make_instance(means.clone(), vec![order])?;
            let env_seed = split_seed(args.seed, &[rep, 1]);
            let (out, rec) = run_bar_full(inst, &cfg, env_seed)?;
            let kept = out
                .survivors
                .iter()
                .map(|&s| means[s])
                .fold(f64::NEG_INFINITY, f64::max);
            Ok((env_seed, best_mean - kept, rec.rounds_used, rec.violation))
        })
        .collect::<Result<Vec<_>>>()?;

    let config = serde_json::json!({
        "n": args.n, "m": args.m, "eps0": args.eps0, "eps1": args.eps1,
        "gap": args.gap, "reps": args.reps, "seed": args.seed,
    });
    let mut csv = format!("# config {config}\nrep,seed,retention_gap,rounds_used,violation\n");
    for (rep, row) in rows.iter().enumerate() {
        let _ = writeln!(csv, "{rep},{},{},{},{}", row.0, row.1, row.2, row.3);
    }
    write_artifact(&args.out, "bar.csv", &csv)?;

    let gaps: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
    let exact_budget = rows.iter().all(|r| r.2 == cfg.total_pulls());
    let violations = rows.iter().filter(|r| r.3).count() as u64;
    let frac = 2.0 * (args.n - args.m) as f64 * args.eps1;
    let doc = serde_json::json!({
        "schema_version": SUMMARY_SCHEMA_VERSION,
        "config": config,
        "pulls_first_stage": cfg.l1,
        "pulls_second_stage": cfg.l2,
        "mean_retention_gap": mean_gap,
        "retention_bound_over_n": frac / args.n as f64,
        "retention_bound_over_m": frac / args.m as f64,
        "exact_budget": exact_budget,
        "violations": violations,
    });
    let body = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Config(format!("report serialization failed: {e}")))?;
    write_artifact(&args.out, "bar-summary.json", &body)?;
    println!(
        "mean retention gap {mean_gap:.4}, budget {} ({}), {violations} violations",
        cfg.total_pulls(),
        if exact_budget { "spent exactly" } else { "NOT exact" }
    );
    println!("artifacts written to {}", args.out.display());
    Ok(if violations > 0 { 2 } else { 0 })
}
