//! Jobs, instances and profit bookkeeping.
//!
//! Time is an integer number of ticks. A job is the quadruple
//! `(release, proc, deadline, value)` under the proportional value model, so
//! `value` always equals `proc`. An admitted job that misses its deadline pays
//! its unfinished work (the shortage) as a penalty.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One abstract time quantum. Durations and instants share the type.
pub type Tick = u128;

/// Signed profit in ticks of value.
pub type Profit = i128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JobId(pub u32);

impl fmt::Display for JobId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("job {id}: deadline {deadline} is earlier than release + proc = {earliest}")]
    DeadlineTooEarly {
        id: JobId,
        deadline: Tick,
        earliest: Tick,
    },
    #[error("job {id}: processing time must be at least one tick")]
    NonPositiveLength { id: JobId },
    #[error("job {id}: value {value} differs from processing time {proc}")]
    ValueMismatch { id: JobId, value: Tick, proc: Tick },
    #[error("job {id}: release + proc overflows the tick range")]
    TickOverflow { id: JobId },
    #[error("duplicate job id {0}")]
    DuplicateId(JobId),
    #[error("offline value is zero; the ratio is undefined")]
    ZeroOfflineValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Job {
    pub id: JobId,
    pub release: Tick,
    pub proc: Tick,
    pub deadline: Tick,
    pub value: Tick,
}

impl Job {
    /// Builds a validated job with `value = proc`.
    pub fn new(id: u32, release: Tick, proc: Tick, deadline: Tick) -> Result<Self, ModelError> {
        let job = Job {
            id: JobId(id),
            release,
            proc,
            deadline,
            value: proc,
        };
        validate_job(&job)?;
        Ok(job)
    }

    /// A job that must run continuously from release to meet its deadline.
    pub fn is_tight(&self) -> bool {
        self.release + self.proc == self.deadline
    }

    pub fn laxity(&self) -> Tick {
        self.deadline - self.release - self.proc
    }
}

pub fn validate_job(job: &Job) -> Result<(), ModelError> {
    if job.proc < 1 {
        return Err(ModelError::NonPositiveLength { id: job.id });
    }
    if job.value != job.proc {
        return Err(ModelError::ValueMismatch {
            id: job.id,
            value: job.value,
            proc: job.proc,
        });
    }
    let earliest = job
        .release
        .checked_add(job.proc)
        .ok_or(ModelError::TickOverflow { id: job.id })?;
    if job.deadline < earliest {
        return Err(ModelError::DeadlineTooEarly {
            id: job.id,
            deadline: job.deadline,
            earliest,
        });
    }
    Ok(())
}

/// A finite job set ordered by release time; simultaneous releases keep their
/// input order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Instance {
    jobs: Vec<Job>,
}

impl Instance {
    pub fn new(mut jobs: Vec<Job>) -> Result<Self, ModelError> {
        let mut seen = BTreeSet::new();
        for job in &jobs {
            validate_job(job)?;
            if !seen.insert(job.id) {
                return Err(ModelError::DuplicateId(job.id));
            }
        }
        // stable: ties stay in input order
        jobs.sort_by_key(|j| j.release);
        Ok(Instance { jobs })
    }

    pub fn empty() -> Self {
        Instance::default()
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jobs.is_empty()
    }

    pub fn get(&self, id: JobId) -> Option<&Job> {
        self.jobs.iter().find(|j| j.id == id)
    }

    pub fn total_work(&self) -> Tick {
        self.jobs.iter().map(|j| j.proc).sum()
    }

    /// The jobs whose index (in release order) is below `count`.
    pub fn prefix(&self, count: usize) -> Instance {
        Instance {
            jobs: self.jobs[..count.min(self.jobs.len())].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum OutcomeStatus {
    Completed,
    Failed { shortage: Tick },
    Declined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobOutcome {
    pub status: OutcomeStatus,
    pub executed: Tick,
}

impl JobOutcome {
    pub fn completed(proc: Tick) -> Self {
        JobOutcome {
            status: OutcomeStatus::Completed,
            executed: proc,
        }
    }

    pub fn failed(proc: Tick, executed: Tick) -> Self {
        JobOutcome {
            status: OutcomeStatus::Failed {
                shortage: proc - executed,
            },
            executed,
        }
    }

    pub fn declined() -> Self {
        JobOutcome {
            status: OutcomeStatus::Declined,
            executed: 0,
        }
    }

    /// Signed contribution to profit given the job's value.
    pub fn profit(&self, value: Tick) -> Profit {
        match self.status {
            OutcomeStatus::Completed => value as Profit,
            OutcomeStatus::Failed { shortage } => -(shortage as Profit),
            OutcomeStatus::Declined => 0,
        }
    }

    /// Checks the outcome against the job it describes.
    pub fn is_consistent_with(&self, job: &Job) -> bool {
        match self.status {
            OutcomeStatus::Completed => self.executed == job.proc,
            OutcomeStatus::Failed { shortage } => {
                shortage >= 1 && shortage <= job.proc && shortage + self.executed == job.proc
            }
            OutcomeStatus::Declined => self.executed == 0,
        }
    }
}

/// Per-job outcomes of one run. Values are carried alongside the outcome so
/// the ledger can be summed without the instance.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ProfitLedger {
    entries: BTreeMap<JobId, LedgerEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub value: Tick,
    pub outcome: JobOutcome,
}

impl ProfitLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, job: &Job, outcome: JobOutcome) {
        self.entries.insert(
            job.id,
            LedgerEntry {
                value: job.value,
                outcome,
            },
        );
    }

    pub fn outcome(&self, id: JobId) -> Option<&JobOutcome> {
        self.entries.get(&id).map(|e| &e.outcome)
    }

    pub fn entries(&self) -> impl Iterator<Item = (JobId, &LedgerEntry)> {
        self.entries.iter().map(|(id, e)| (*id, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn profit(&self) -> Profit {
        profit_of(self)
    }

    pub fn count(&self, pred: impl Fn(&OutcomeStatus) -> bool) -> usize {
        self.entries.values().filter(|e| pred(&e.outcome.status)).count()
    }

    pub fn total_shortage(&self) -> Tick {
        self.entries
            .values()
            .map(|e| match e.outcome.status {
                OutcomeStatus::Failed { shortage } => shortage,
                _ => 0,
            })
            .sum()
    }

    /// Union of two ledgers over disjoint job ids.
    pub fn merge(mut self, other: ProfitLedger) -> ProfitLedger {
        self.entries.extend(other.entries);
        self
    }
}

/// Completed value minus shortage penalties. Declined jobs contribute nothing.
pub fn profit_of(ledger: &ProfitLedger) -> Profit {
    ledger
        .entries
        .values()
        .map(|e| e.outcome.profit(e.value))
        .sum()
}

pub fn empirical_ratio(online_profit: Profit, offline_value: Tick) -> Result<f64, ModelError> {
    if offline_value == 0 {
        return Err(ModelError::ZeroOfflineValue);
    }
    Ok(online_profit as f64 / offline_value as f64)
}
