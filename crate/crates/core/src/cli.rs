//! Command-line surface: file formats, random instances, batch runs and reports.
//!
//! Exit codes: 0 ok, 1 a lemma check found violations, 2 malformed input,
//! 3 bad configuration.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{gen_instance, AdversaryParams, Coefficient};
use crate::analysis::{check_dsc_trace, minima, AnalysisError, ReportRow};
use crate::baselines::{AdmitAllEdf, FeasibilityGuard};
use crate::dsc::{DscConfig, DscPolicy, DEFAULT_BETA_STR};
use crate::engine::{
    run_simulation, run_simulation_with_sink, OnlinePolicy, PolicyDecision, SimulationTrace,
    TentativeSchedule,
};
use crate::model::{empirical_ratio, Instance, Job, OutcomeStatus, Profit, ProfitLedger, Tick};
use crate::oracle::{offline_optimal, DEFAULT_LIMIT};

pub const SEED_ENV: &str = "COMMITSCHED_SEED";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Malformed(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Malformed(_) | CliError::Io { .. } => 2,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---- instance files ----

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    version: u32,
    jobs: Vec<JobRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JobRecord {
    id: u32,
    r: Tick,
    p: Tick,
    d: Tick,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v: Option<Tick>,
}

pub fn instance_to_json(instance: &Instance) -> String {
    let file = InstanceFile {
        version: FORMAT_VERSION,
        jobs: instance
            .jobs()
            .iter()
            .map(|j| JobRecord {
                id: j.id.0,
                r: j.release,
                p: j.proc,
                d: j.deadline,
                v: None,
            })
            .collect(),
    };
    // one job per line keeps files diffable
    let mut out = format!("{{\"version\":{},\"jobs\":[", file.version);
    for (i, job) in file.jobs.iter().enumerate() {
        out.push_str(if i == 0 { "\n  " } else { ",\n  " });
        out.push_str(&serde_json::to_string(job).expect("plain struct"));
    }
    out.push_str(if file.jobs.is_empty() { "]}\n" } else { "\n]}\n" });
    out
}

pub fn instance_from_json(text: &str) -> Result<Instance, CliError> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| CliError::Malformed(format!("instance: {e}")))?;
    if file.version != FORMAT_VERSION {
        return Err(CliError::Malformed(format!(
            "unsupported instance version {}",
            file.version
        )));
    }
    let jobs = file
        .jobs
        .into_iter()
        .map(|j| {
            let mut job =
                Job::new(j.id, j.r, j.p, j.d).map_err(|e| CliError::Malformed(e.to_string()))?;
            if let Some(v) = j.v {
                job.value = v;
                crate::model::validate_job(&job).map_err(|e| CliError::Malformed(e.to_string()))?;
            }
            Ok(job)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Instance::new(jobs).map_err(|e| CliError::Malformed(e.to_string()))
}

pub fn read_instance(path: &Path) -> Result<Instance, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    instance_from_json(&text).map_err(|e| match e {
        CliError::Malformed(m) => CliError::Malformed(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Writes through a sibling temporary file so readers never see half a file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_instance(path: &Path, instance: &Instance) -> Result<(), CliError> {
    write_atomic(path, instance_to_json(instance).as_bytes())
}

pub fn read_trace(path: &Path) -> Result<SimulationTrace, CliError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    SimulationTrace::from_json_lines(io::BufReader::new(file)).map_err(|(line, msg)| {
        CliError::Malformed(format!("{}:{line}: {msg}", path.display()))
    })
}

// ---- random instances ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomGenConfig {
    pub seed: u64,
    pub n: usize,
    /// Mean gap between releases. Derived from `load_factor` when absent.
    pub arrival: Option<f64>,
    pub proc: (Tick, Tick),
    pub laxity: (f64, f64),
    /// Target `sum proc / horizon`.
    pub load_factor: Option<f64>,
}

impl Default for RandomGenConfig {
    fn default() -> Self {
        RandomGenConfig {
            seed: 1,
            n: 12,
            arrival: None,
            proc: (1, 10),
            laxity: (1.0, 3.0),
            load_factor: Some(1.0),
        }
    }
}

impl RandomGenConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if self.proc.0 == 0 || self.proc.0 > self.proc.1 {
            return bad("proc range must satisfy 1 <= min <= max");
        }
        if !(self.laxity.0 >= 1.0 && self.laxity.0 <= self.laxity.1 && self.laxity.1.is_finite()) {
            return bad("laxity range must satisfy 1 <= min <= max");
        }
        match (self.arrival, self.load_factor) {
            (Some(a), _) if !(a >= 0.0 && a.is_finite()) => bad("arrival mean must be >= 0"),
            (None, Some(l)) if !(l > 0.0 && l.is_finite()) => bad("load factor must be > 0"),
            (None, None) => bad("give an arrival mean or a load factor"),
            _ => Ok(()),
        }
    }

    pub fn arrival_mean(&self) -> f64 {
        self.arrival.unwrap_or_else(|| {
            let mean_proc = (self.proc.0 + self.proc.1) as f64 / 2.0;
            mean_proc / self.load_factor.expect("validated")
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedInstance {
    #[serde(skip)]
    pub instance: Instance,
    pub seed: u64,
    pub jobs: usize,
    /// `sum proc / (last deadline - first release)`.
    pub realized_load: f64,
}

pub fn gen_random(config: &RandomGenConfig) -> Result<GeneratedInstance, CliError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let gaps = Geometric::new(1.0 / (1.0 + config.arrival_mean()))
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut release: Tick = 0;
    let mut jobs = Vec::with_capacity(config.n);
    for i in 0..config.n {
        if i > 0 {
            release += gaps.sample(&mut rng) as Tick;
        }
        let proc = rng.random_range(config.proc.0..=config.proc.1);
        let laxity = if config.laxity.0 < config.laxity.1 {
            rng.random_range(config.laxity.0..config.laxity.1)
        } else {
            config.laxity.0
        };
        let window = ((laxity * proc as f64).ceil() as Tick).max(proc);
        let job = Job::new(i as u32, release, proc, release + window)
            .map_err(|e| CliError::Config(e.to_string()))?;
        jobs.push(job);
    }
    let instance = Instance::new(jobs).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(GeneratedInstance {
        seed: config.seed,
        jobs: instance.len(),
        realized_load: realized_load(&instance),
        instance,
    })
}

pub fn realized_load(instance: &Instance) -> f64 {
    let jobs = instance.jobs();
    let (Some(first), Some(last)) = (
        jobs.iter().map(|j| j.release).min(),
        jobs.iter().map(|j| j.deadline).max(),
    ) else {
        return 0.0;
    };
    instance.total_work() as f64 / (last - first) as f64
}

/// The seed from the environment wins over the configured one.
pub fn effective_seed(configured: u64) -> Result<u64, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}={v:?} is not a 64-bit seed"))),
        Err(std::env::VarError::NotPresent) => Ok(configured),
        Err(e) => Err(CliError::Config(format!("{SEED_ENV}: {e}"))),
    }
}

// ---- policies and runs ----

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    Dsc(DscConfig),
    AdmitAllEdf,
    FeasibilityGuard,
}

pub const POLICY_NAMES: [&str; 3] = ["dsc", "admit-all-edf", "feasibility-guard"];

impl PolicySpec {
    pub fn parse(name: &str, beta: f64) -> Result<Self, CliError> {
        match name {
            "dsc" => DscConfig::new(beta)
                .map(PolicySpec::Dsc)
                .map_err(|e| CliError::Config(e.to_string())),
            "admit-all-edf" => Ok(PolicySpec::AdmitAllEdf),
            "feasibility-guard" => Ok(PolicySpec::FeasibilityGuard),
            other => Err(CliError::Config(format!(
                "unknown policy {other:?}; expected one of {}",
                POLICY_NAMES.join(", ")
            ))),
        }
    }
}

impl OnlinePolicy for PolicySpec {
    fn name(&self) -> &str {
        match self {
            PolicySpec::Dsc(_) => "dsc",
            PolicySpec::AdmitAllEdf => "admit-all-edf",
            PolicySpec::FeasibilityGuard => "feasibility-guard",
        }
    }

    fn decide(&self, job: &Job, schedule: &TentativeSchedule, now: Tick) -> PolicyDecision {
        match self {
            PolicySpec::Dsc(c) => DscPolicy::new(*c).decide(job, schedule, now),
            PolicySpec::AdmitAllEdf => AdmitAllEdf.decide(job, schedule, now),
            PolicySpec::FeasibilityGuard => FeasibilityGuard.decide(job, schedule, now),
        }
    }
}

pub fn parse_beta(text: &str) -> Result<f64, CliError> {
    let beta: f64 = text
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("beta {text:?} is not a number")))?;
    DscConfig::new(beta).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(beta)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunSummary {
    pub profit: Profit,
    pub completed: usize,
    pub failed: usize,
    pub declined: usize,
    pub total_shortage: Tick,
}

impl RunSummary {
    pub fn of(ledger: &ProfitLedger) -> Self {
        RunSummary {
            profit: ledger.profit(),
            completed: ledger.count(|s| matches!(s, OutcomeStatus::Completed)),
            failed: ledger.count(|s| matches!(s, OutcomeStatus::Failed { .. })),
            declined: ledger.count(|s| matches!(s, OutcomeStatus::Declined)),
            total_shortage: ledger.total_shortage(),
        }
    }
}

fn engine_err(e: impl std::fmt::Display) -> CliError {
    CliError::Malformed(format!("simulation failed: {e}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRun {
    pub instance: String,
    pub policy: String,
    pub summary: RunSummary,
    /// The JSON-lines trace.
    pub trace: String,
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))
}

/// Runs every policy on every instance on `threads` workers (0 = all cores).
/// Output order follows the input order regardless of scheduling.
pub fn run_batch(
    instances: &[(String, Instance)],
    policies: &[PolicySpec],
    threads: usize,
) -> Result<Vec<BatchRun>, CliError> {
    let pairs: Vec<(&String, &Instance, &PolicySpec)> = instances
        .iter()
        .flat_map(|(name, inst)| policies.iter().map(move |p| (name, inst, p)))
        .collect();
    pool(threads)?.install(|| {
        pairs
            .par_iter()
            .map(|(name, inst, policy)| {
                let (ledger, trace) = run_simulation(inst, *policy).map_err(engine_err)?;
                Ok(BatchRun {
                    instance: (*name).clone(),
                    policy: policy.name().to_string(),
                    summary: RunSummary::of(&ledger),
                    trace: trace.to_json_lines(),
                })
            })
            .collect()
    })
}

/// One row per (instance, policy), computed in parallel, in input order.
pub fn report_rows(
    instances: &[(String, Instance)],
    policies: &[PolicySpec],
    oracle_limit: usize,
    threads: usize,
) -> Result<Vec<ReportRow>, CliError> {
    let per_instance: Vec<Vec<ReportRow>> = pool(threads)?.install(|| {
        instances
            .par_iter()
            .map(|(name, inst)| {
                let oracle = offline_optimal(inst, oracle_limit)
                    .map_err(|e| CliError::Config(format!("{name}: {e}")))?;
                policies
                    .iter()
                    .map(|policy| {
                        let (ledger, _) = run_simulation(inst, policy).map_err(engine_err)?;
                        let profit = ledger.profit();
                        Ok(ReportRow {
                            instance: name.clone(),
                            policy: policy.name().to_string(),
                            profit,
                            oracle: oracle.value,
                            ratio: empirical_ratio(profit, oracle.value).ok(),
                        })
                    })
                    .collect()
            })
            .collect::<Result<_, CliError>>()
    })?;
    Ok(per_instance.into_iter().flatten().collect())
}

/// CSV with one row per run and a trailing `min` row per policy.
pub fn report_csv(rows: &[ReportRow]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::Config(e.to_string());
    w.write_record(["instance", "policy", "profit", "oracle", "ratio"])
        .map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.instance.clone(),
            r.policy.clone(),
            r.profit.to_string(),
            r.oracle.to_string(),
            r.ratio.map(|x| format!("{x:.9}")).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    for (policy, min) in minima(rows) {
        w.write_record(["min", &policy, "", "", &format!("{min:.9}")])
            .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
}

/// Every `*.json` instance file directly inside `dir`, sorted by file name.
pub fn read_instance_dir(dir: &Path) -> Result<Vec<(String, Instance)>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .map(|e| e.map(|e| e.path()).map_err(io_err(dir)))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "json") && p.is_file());
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok((name, read_instance(p)?))
        })
        .collect()
}

// ---- command line ----

#[derive(Debug, Parser)]
#[command(name = "commitsched", version, about = "Online deadline scheduling with commitment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate random instance files.
    GenRandom(GenRandomArgs),
    /// Generate the adversary's tight-job chain for a coefficient c.
    GenAdversary(GenAdversaryArgs),
    /// Simulate a policy; writes a JSON-lines trace and prints a summary.
    Run(RunArgs),
    /// Print the offline optimum of an instance as JSON.
    Oracle(OracleArgs),
    /// Check a DSC trace against the busy-interval lemmas.
    Check(CheckArgs),
    /// Competitive-ratio CSV over a directory of instance files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenRandomArgs {
    /// Base seed; COMMITSCHED_SEED overrides it.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Jobs per instance.
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    /// Mean gap between releases in ticks; overrides --load-factor.
    #[arg(long)]
    pub arrival: Option<f64>,
    /// Target total work over horizon.
    #[arg(long, default_value_t = 1.0)]
    pub load_factor: f64,
    #[arg(long, default_value_t = 1)]
    pub proc_min: Tick,
    #[arg(long, default_value_t = 10)]
    pub proc_max: Tick,
    #[arg(long, default_value_t = 1.0)]
    pub laxity_min: f64,
    #[arg(long, default_value_t = 3.0)]
    pub laxity_max: f64,
    /// Number of instances; with more than one, --out is a directory and
    /// instance i uses seed + i.
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenAdversaryArgs {
    /// Growth coefficient, 1 < c < 3 + 2*sqrt(2). Decimals are handled exactly.
    #[arg(long)]
    pub c: String,
    /// Ticks per unit length.
    #[arg(long, default_value_t = crate::adversary::DEFAULT_SCALE)]
    pub scale: Tick,
    /// Ticks between releases.
    #[arg(long, default_value_t = crate::adversary::DEFAULT_EPSILON)]
    pub epsilon: Tick,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// dsc, admit-all-edf or feasibility-guard.
    #[arg(long, default_value = "dsc")]
    pub policy: String,
    /// DSC threshold parameter.
    #[arg(long, default_value = DEFAULT_BETA_STR)]
    pub beta: String,
    /// Where to write the JSON-lines trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Refuse instances with more jobs than this.
    #[arg(long, default_value_t = DEFAULT_LIMIT)]
    pub limit: usize,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long, default_value = DEFAULT_BETA_STR)]
    pub beta: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory of instance files (*.json).
    #[arg(long)]
    pub dir: PathBuf,
    /// Comma-separated policy names.
    #[arg(long, default_value = "dsc,admit-all-edf,feasibility-guard", value_delimiter = ',')]
    pub policies: Vec<String>,
    #[arg(long, default_value = DEFAULT_BETA_STR)]
    pub beta: String,
    #[arg(long, default_value_t = DEFAULT_LIMIT)]
    pub limit: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// What a successful command found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    Violation,
}

#[derive(Debug, Serialize)]
struct LemmaVerdict<'a> {
    lemma: &'a str,
    passed: bool,
    checked: usize,
    violations: &'a [crate::analysis::Violation],
}

fn json_line(out: &mut dyn Write, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string(value).expect("serializable");
    writeln!(out, "{text}").map_err(io_err(Path::new("<stdout>")))
}

pub fn cmd_gen_random(args: &GenRandomArgs, out: &mut dyn Write) -> Result<Verdict, CliError> {
    let base = RandomGenConfig {
        seed: effective_seed(args.seed)?,
        n: args.n,
        arrival: args.arrival,
        proc: (args.proc_min, args.proc_max),
        laxity: (args.laxity_min, args.laxity_max),
        load_factor: Some(args.load_factor),
    };
    if args.count == 0 {
        return Err(CliError::Config("--count must be positive".into()));
    }
    if args.count > 1 {
        fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    }
    let width = args.count.to_string().len().max(4);
    for i in 0..args.count {
        let config = RandomGenConfig {
            seed: base.seed.wrapping_add(i),
            ..base.clone()
        };
        let g = gen_random(&config)?;
        let path = if args.count > 1 {
            args.out.join(format!("random-{i:0width$}.json"))
        } else {
            args.out.clone()
        };
        write_instance(&path, &g.instance)?;
        json_line(out, &g)?;
    }
    Ok(Verdict::Ok)
}

pub fn cmd_gen_adversary(args: &GenAdversaryArgs, out: &mut dyn Write) -> Result<Verdict, CliError> {
    let config = |e: crate::adversary::AdversaryError| CliError::Config(e.to_string());
    let c = Coefficient::parse(&args.c).map_err(config)?;
    let params = AdversaryParams::new(c, args.scale, args.epsilon).map_err(config)?;
    let instance = gen_instance(&params).map_err(config)?;
    write_instance(&args.out, &instance)?;
    json_line(
        out,
        &serde_json::json!({
            "c": args.c,
            "jobs": instance.len(),
            "procs": instance.jobs().iter().map(|j| j.proc).collect::<Vec<_>>(),
        }),
    )?;
    Ok(Verdict::Ok)
}

pub fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<Verdict, CliError> {
    let policy = PolicySpec::parse(&args.policy, parse_beta(&args.beta)?)?;
    let instance = read_instance(&args.instance)?;
    let ledger = match &args.trace {
        Some(path) => {
            let mut sink = crate::engine::JsonLinesSink::new(Vec::new());
            let ledger =
                run_simulation_with_sink(&instance, &policy, &mut sink).map_err(engine_err)?;
            write_atomic(path, &sink.into_inner())?;
            ledger
        }
        None => run_simulation(&instance, &policy).map_err(engine_err)?.0,
    };
    json_line(out, &RunSummary::of(&ledger))?;
    Ok(Verdict::Ok)
}

pub fn cmd_oracle(args: &OracleArgs, out: &mut dyn Write) -> Result<Verdict, CliError> {
    let instance = read_instance(&args.instance)?;
    let result =
        offline_optimal(&instance, args.limit).map_err(|e| CliError::Config(e.to_string()))?;
    json_line(out, &result)?;
    Ok(Verdict::Ok)
}

pub fn cmd_check(args: &CheckArgs, out: &mut dyn Write) -> Result<Verdict, CliError> {
    let beta = parse_beta(&args.beta)?;
    let instance = read_instance(&args.instance)?;
    let trace = read_trace(&args.trace)?;
    let suite = check_dsc_trace(&trace, &instance, beta).map_err(|e| match e {
        AnalysisError::MalformedTrace(_) | AnalysisError::NotADscTrace(_) => {
            CliError::Malformed(e.to_string())
        }
        other => CliError::Config(other.to_string()),
    })?;
    let verdicts: Vec<LemmaVerdict> = suite
        .reports
        .iter()
        .map(|r| LemmaVerdict {
            lemma: r.lemma,
            passed: r.passed(),
            checked: r.checked,
            violations: &r.violations,
        })
        .collect();
    json_line(
        out,
        &serde_json::json!({
            "passed": suite.passed(),
            "intervals": suite.intervals,
            "profit": suite.profit,
            "lemmas": verdicts,
        }),
    )?;
    Ok(if suite.passed() {
        Verdict::Ok
    } else {
        Verdict::Violation
    })
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<Verdict, CliError> {
    let beta = parse_beta(&args.beta)?;
    let policies = args
        .policies
        .iter()
        .map(|p| PolicySpec::parse(p.trim(), beta))
        .collect::<Result<Vec<_>, _>>()?;
    let instances = read_instance_dir(&args.dir)?;
    let rows = report_rows(&instances, &policies, args.limit, args.threads)?;
    let csv = report_csv(&rows)?;
    match &args.out {
        Some(path) => write_atomic(path, csv.as_bytes())?,
        None => out
            .write_all(csv.as_bytes())
            .map_err(io_err(Path::new("<stdout>")))?,
    }
    Ok(Verdict::Ok)
}

pub fn execute(command: &Command, out: &mut dyn Write) -> Result<Verdict, CliError> {
    match command {
        Command::GenRandom(a) => cmd_gen_random(a, out),
        Command::GenAdversary(a) => cmd_gen_adversary(a, out),
        Command::Run(a) => cmd_run(a, out),
        Command::Oracle(a) => cmd_oracle(a, out),
        Command::Check(a) => cmd_check(a, out),
        Command::Report(a) => cmd_report(a, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match execute(&cli.command, out) {
        Ok(Verdict::Ok) => 0,
        Ok(Verdict::Violation) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
