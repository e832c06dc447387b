//! Post-hoc analysis of simulation traces.
//!
//! A busy interval is a maximal stretch of back-to-back execution. Every job
//! is attributed to the busy interval containing its release; its signed
//! profit (value if completed, minus shortage if failed) counts towards the
//! interval's peace or contention total depending on how it was admitted.
//! The lemma checkers below verify the structural inequalities DSC's
//! competitive bound rests on, interval by interval.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::engine::{run_simulation, EventKind, OnlinePolicy, SimulationTrace};
use crate::model::{empirical_ratio, Instance, JobId, Profit, Tick};
use crate::oracle::{offline_optimal, OracleError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("malformed trace: {0}")]
    MalformedTrace(String),
    #[error("trace lacks DSC decision metadata for job {0}")]
    NotADscTrace(JobId),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("simulation failed: {0}")]
    Engine(String),
}

fn malformed(msg: impl Into<String>) -> AnalysisError {
    AnalysisError::MalformedTrace(msg.into())
}

/// Closed interval `[start, end]` of uninterrupted execution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BusyInterval {
    pub start: Tick,
    pub end: Tick,
}

impl BusyInterval {
    pub fn len(&self) -> Tick {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn contains(&self, t: Tick) -> bool {
        self.start <= t && t <= self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Admission {
    Peace,
    Contention,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntervalProfit {
    pub interval: BusyInterval,
    pub total: Profit,
    pub peace: Profit,
    pub contention: Profit,
    /// Shortage at the end of the interval of each failed job released in it.
    pub shortages: BTreeMap<JobId, Tick>,
    /// Declined jobs released in the interval, with their deadlines.
    pub declined: Vec<(JobId, Tick)>,
    pub admitted: BTreeMap<JobId, Admission>,
}

impl IntervalProfit {
    pub fn total_shortage(&self) -> Tick {
        self.shortages.values().sum()
    }
}

/// Merges back-to-back executions into maximal busy intervals.
pub fn busy_intervals(trace: &SimulationTrace) -> Result<Vec<BusyInterval>, AnalysisError> {
    let mut out: Vec<BusyInterval> = Vec::new();
    for (job, start, end) in trace.executions() {
        if start >= end {
            return Err(malformed(format!("empty execution of {job} at {start}")));
        }
        match out.last_mut() {
            Some(last) if start < last.end => {
                return Err(malformed(format!(
                    "execution of {job} at {start} overlaps busy time ending {}",
                    last.end
                )))
            }
            Some(last) if start == last.end => last.end = end,
            _ => out.push(BusyInterval { start, end }),
        }
    }
    Ok(out)
}

fn interval_of(intervals: &[BusyInterval], t: Tick) -> Option<usize> {
    // the later interval wins when t is a shared endpoint; that cannot happen
    // for maximal intervals, which never touch
    let idx = intervals.partition_point(|b| b.start <= t);
    (idx > 0 && intervals[idx - 1].contains(t)).then(|| idx - 1)
}

#[derive(Debug, Default)]
struct JobRecord {
    release: Option<Tick>,
    admission: Option<Admission>,
    declined: bool,
    completed: bool,
    shortage: Option<Tick>,
    first_exec: Option<Tick>,
    last_exec: Option<Tick>,
}

fn collect_records(
    trace: &SimulationTrace,
    require_quotes: bool,
) -> Result<BTreeMap<JobId, JobRecord>, AnalysisError> {
    let mut records: BTreeMap<JobId, JobRecord> = BTreeMap::new();
    let mut last_t = 0;
    for e in &trace.events {
        if e.t < last_t {
            return Err(malformed(format!("event at {} after event at {last_t}", e.t)));
        }
        last_t = e.t;
        match &e.kind {
            EventKind::Release { job } => {
                let r = records.entry(*job).or_default();
                if r.release.replace(e.t).is_some() {
                    return Err(malformed(format!("{job} released twice")));
                }
            }
            EventKind::AcceptAppend { job } => {
                decide(&mut records, *job, Some(Admission::Peace))?;
            }
            EventKind::AcceptContention {
                job,
                profit_accept,
                profit_decline,
                ..
            } => {
                if require_quotes && (profit_accept.is_none() || profit_decline.is_none()) {
                    return Err(AnalysisError::NotADscTrace(*job));
                }
                decide(&mut records, *job, Some(Admission::Contention))?;
            }
            EventKind::Decline {
                job,
                profit_accept,
                profit_decline,
            } => {
                if require_quotes && (profit_accept.is_none() || profit_decline.is_none()) {
                    return Err(AnalysisError::NotADscTrace(*job));
                }
                decide(&mut records, *job, None)?;
            }
            EventKind::Execute { job, start, end } => {
                let r = records.entry(*job).or_default();
                if r.admission.is_none() {
                    return Err(malformed(format!("{job} executes without admission")));
                }
                r.first_exec.get_or_insert(*start);
                r.last_exec = Some(*end);
            }
            EventKind::Complete { job } => {
                let r = records.entry(*job).or_default();
                if r.completed || r.shortage.is_some() {
                    return Err(malformed(format!("{job} finished twice")));
                }
                r.completed = true;
            }
            EventKind::Fail { job, shortage } => {
                let r = records.entry(*job).or_default();
                if r.completed || r.shortage.is_some() {
                    return Err(malformed(format!("{job} finished twice")));
                }
                r.shortage = Some(*shortage);
            }
            EventKind::Idle { .. } => {}
        }
    }
    Ok(records)
}

fn decide(
    records: &mut BTreeMap<JobId, JobRecord>,
    job: JobId,
    admission: Option<Admission>,
) -> Result<(), AnalysisError> {
    let r = records.entry(job).or_default();
    if r.release.is_none() {
        return Err(malformed(format!("decision for unreleased {job}")));
    }
    if r.admission.is_some() || r.declined {
        return Err(malformed(format!("{job} decided twice")));
    }
    match admission {
        Some(a) => r.admission = Some(a),
        None => r.declined = true,
    }
    Ok(())
}

/// Attributes every job's profit to the busy interval containing its release.
pub fn interval_profits(
    trace: &SimulationTrace,
    instance: &Instance,
) -> Result<Vec<IntervalProfit>, AnalysisError> {
    let intervals = busy_intervals(trace)?;
    let records = collect_records(trace, true)?;
    let mut out: Vec<IntervalProfit> = intervals
        .iter()
        .map(|b| IntervalProfit {
            interval: *b,
            total: 0,
            peace: 0,
            contention: 0,
            shortages: BTreeMap::new(),
            declined: Vec::new(),
            admitted: BTreeMap::new(),
        })
        .collect();

    for (id, rec) in &records {
        let job = instance
            .get(*id)
            .ok_or_else(|| malformed(format!("{id} is not in the instance")))?;
        let release = rec
            .release
            .ok_or_else(|| malformed(format!("{id} has events but no release")))?;
        if release != job.release {
            return Err(malformed(format!("{id} released at {release}, expected {}", job.release)));
        }
        let Some(idx) = interval_of(&intervals, release) else {
            if rec.admission.is_some() || rec.declined {
                return Err(malformed(format!("{id} released at {release} while idle")));
            }
            continue;
        };
        let b = &mut out[idx];
        if rec.declined {
            b.declined.push((*id, job.deadline));
            continue;
        }
        let Some(admission) = rec.admission else {
            return Err(malformed(format!("{id} released without a decision")));
        };
        if let (Some(first), Some(last)) = (rec.first_exec, rec.last_exec) {
            if first < b.interval.start || last > b.interval.end {
                return Err(malformed(format!(
                    "{id} executes outside the busy interval of its release"
                )));
            }
        }
        let profit: Profit = match (rec.completed, rec.shortage) {
            (true, None) => job.value as Profit,
            (false, Some(s)) => {
                b.shortages.insert(*id, s);
                -(s as Profit)
            }
            _ => return Err(malformed(format!("{id} was admitted but never settled"))),
        };
        b.total += profit;
        match admission {
            Admission::Peace => b.peace += profit,
            Admission::Contention => b.contention += profit,
        }
        b.admitted.insert(*id, admission);
    }
    for job in instance.jobs() {
        if !records.contains_key(&job.id) {
            return Err(malformed(format!("{} never released", job.id)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub interval: Option<BusyInterval>,
    pub job: Option<JobId>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub lemma: &'static str,
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

// Absorbs double rounding when both sides are large tick counts.
fn le(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + 1e-12 * lhs.abs().max(rhs.abs()).max(1.0)
}

/// `|B| <= T_B + C_B / (beta - 1)` for every busy interval.
pub fn check_lemma_capacity(profits: &[IntervalProfit], beta: f64) -> LemmaReport {
    let violations = profits
        .iter()
        .filter_map(|p| {
            let lhs = p.interval.len() as f64;
            let rhs = p.total as f64 + p.contention as f64 / (beta - 1.0);
            (!le(lhs, rhs)).then_some(Violation {
                interval: Some(p.interval),
                job: None,
                lhs,
                rhs,
            })
        })
        .collect();
    LemmaReport {
        lemma: "capacity",
        checked: profits.len(),
        violations,
    }
}

/// For every job declined during `B`:
/// `d_i - end(B) - sum of shortages in B <= (1 + beta) T_B`.
pub fn check_lemma_declined(profits: &[IntervalProfit], beta: f64) -> LemmaReport {
    let mut checked = 0;
    let mut violations = Vec::new();
    for p in profits {
        let shortage = p.total_shortage() as f64;
        let rhs = (1.0 + beta) * p.total as f64;
        for &(job, deadline) in &p.declined {
            checked += 1;
            let lhs = deadline as f64 - p.interval.end as f64 - shortage;
            if !le(lhs, rhs) {
                violations.push(Violation {
                    interval: Some(p.interval),
                    job: Some(job),
                    lhs,
                    rhs,
                });
            }
        }
    }
    LemmaReport {
        lemma: "declined",
        checked,
        violations,
    }
}

/// Every peace-scheduled job that failed has `[r, d]` inside busy time.
/// Release and deadline are read off the trace (failures are logged at the
/// deadline).
pub fn check_lemma_peace(
    trace: &SimulationTrace,
    intervals: &[BusyInterval],
) -> Result<LemmaReport, AnalysisError> {
    let records = collect_records(trace, false)?;
    let mut checked = 0;
    let mut violations = Vec::new();
    for (id, rec) in &records {
        if rec.admission != Some(Admission::Peace) || rec.shortage.is_none() {
            continue;
        }
        checked += 1;
        let release = rec.release.expect("decided jobs were released");
        let deadline = fail_time(trace, *id).expect("failed jobs have a fail event");
        if !covered(intervals, release, deadline) {
            violations.push(Violation {
                interval: interval_of(intervals, release).map(|i| intervals[i]),
                job: Some(*id),
                lhs: release as f64,
                rhs: deadline as f64,
            });
        }
    }
    Ok(LemmaReport {
        lemma: "peace",
        checked,
        violations,
    })
}

/// Every contention-scheduled job has `[r, d]` inside busy time.
pub fn check_contention_containment(
    trace: &SimulationTrace,
    instance: &Instance,
    intervals: &[BusyInterval],
) -> Result<LemmaReport, AnalysisError> {
    let records = collect_records(trace, false)?;
    let mut checked = 0;
    let mut violations = Vec::new();
    for (id, rec) in &records {
        if rec.admission != Some(Admission::Contention) {
            continue;
        }
        checked += 1;
        let job = instance
            .get(*id)
            .ok_or_else(|| malformed(format!("{id} is not in the instance")))?;
        if !covered(intervals, job.release, job.deadline) {
            violations.push(Violation {
                interval: interval_of(intervals, job.release).map(|i| intervals[i]),
                job: Some(*id),
                lhs: job.release as f64,
                rhs: job.deadline as f64,
            });
        }
    }
    Ok(LemmaReport {
        lemma: "contention-containment",
        checked,
        violations,
    })
}

/// Every decline happens while the processor is busy, so an offline
/// schedule can only run a declined job outside busy time after the end of
/// the interval it was declined in.
pub fn check_declined_while_busy(
    trace: &SimulationTrace,
    intervals: &[BusyInterval],
) -> LemmaReport {
    let mut checked = 0;
    let mut violations = Vec::new();
    for e in &trace.events {
        if let EventKind::Decline { job, .. } = e.kind {
            checked += 1;
            let busy = interval_of(intervals, e.t).is_some_and(|i| e.t < intervals[i].end);
            if !busy {
                violations.push(Violation {
                    interval: None,
                    job: Some(job),
                    lhs: e.t as f64,
                    rhs: e.t as f64,
                });
            }
        }
    }
    LemmaReport {
        lemma: "declined-while-busy",
        checked,
        violations,
    }
}

/// `sum of shortages in B <= |B| - T_B` for every busy interval.
pub fn check_lemma_shortage(profits: &[IntervalProfit]) -> LemmaReport {
    let violations = profits
        .iter()
        .filter_map(|p| {
            let lhs = p.total_shortage() as Profit;
            let rhs = p.interval.len() as Profit - p.total;
            (lhs > rhs).then_some(Violation {
                interval: Some(p.interval),
                job: None,
                lhs: lhs as f64,
                rhs: rhs as f64,
            })
        })
        .collect();
    LemmaReport {
        lemma: "shortage",
        checked: profits.len(),
        violations,
    }
}

fn fail_time(trace: &SimulationTrace, id: JobId) -> Option<Tick> {
    trace.events.iter().find_map(|e| match e.kind {
        EventKind::Fail { job, .. } if job == id => Some(e.t),
        _ => None,
    })
}

fn covered(intervals: &[BusyInterval], from: Tick, to: Tick) -> bool {
    interval_of(intervals, from).is_some_and(|i| intervals[i].end >= to)
}

/// Every check on one DSC trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSuite {
    pub intervals: usize,
    pub profit: Profit,
    pub reports: Vec<LemmaReport>,
}

impl LemmaSuite {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(LemmaReport::passed)
    }
}

pub fn check_dsc_trace(
    trace: &SimulationTrace,
    instance: &Instance,
    beta: f64,
) -> Result<LemmaSuite, AnalysisError> {
    let intervals = busy_intervals(trace)?;
    let profits = interval_profits(trace, instance)?;
    let reports = vec![
        check_lemma_capacity(&profits, beta),
        check_lemma_declined(&profits, beta),
        check_lemma_peace(trace, &intervals)?,
        check_lemma_shortage(&profits),
        check_contention_containment(trace, instance, &intervals)?,
        check_declined_while_busy(trace, &intervals),
    ];
    Ok(LemmaSuite {
        intervals: intervals.len(),
        profit: profits.iter().map(|p| p.total).sum(),
        reports,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub instance: String,
    pub policy: String,
    pub profit: Profit,
    pub oracle: Tick,
    /// `None` when the oracle value is zero.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetitiveReport {
    pub rows: Vec<ReportRow>,
    /// Smallest defined ratio per policy.
    pub minima: BTreeMap<String, f64>,
}

/// Runs every policy on every instance and compares against the oracle.
pub fn competitive_report(
    instances: &[(String, Instance)],
    policies: &[&dyn OnlinePolicy],
    oracle_limit: usize,
) -> Result<CompetitiveReport, AnalysisError> {
    let mut rows = Vec::new();
    for (name, instance) in instances {
        let oracle = offline_optimal(instance, oracle_limit)?;
        for policy in policies {
            let (ledger, _) = run_simulation(instance, *policy)
                .map_err(|e| AnalysisError::Engine(e.to_string()))?;
            let profit = ledger.profit();
            rows.push(ReportRow {
                instance: name.clone(),
                policy: policy.name().to_string(),
                profit,
                oracle: oracle.value,
                ratio: empirical_ratio(profit, oracle.value).ok(),
            });
        }
    }
    Ok(CompetitiveReport {
        minima: minima(&rows),
        rows,
    })
}

pub fn minima(rows: &[ReportRow]) -> BTreeMap<String, f64> {
    let mut minima: BTreeMap<String, f64> = BTreeMap::new();
    let policies: BTreeSet<&str> = rows.iter().map(|r| r.policy.as_str()).collect();
    for policy in policies {
        let min = rows
            .iter()
            .filter(|r| r.policy == policy)
            .filter_map(|r| r.ratio)
            .fold(f64::INFINITY, f64::min);
        if min.is_finite() {
            minima.insert(policy.to_string(), min);
        }
    }
    minima
}
