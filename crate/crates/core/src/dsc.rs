//! The DSC admission policy.
//!
//! A job that fits after the end of the tentative schedule is always admitted
//! and appended. Otherwise the policy prices the contention insertion: the
//! accept side earns the new job's value minus the extra shortage it forces on
//! displaced jobs; the decline side keeps the value of displaced jobs that were
//! going to complete, minus the shortage they were already carrying. The job is
//! admitted only if `accept > (1 + beta) * decline`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{AffectedJob, OnlinePolicy, PolicyDecision, QuotedProfits, TentativeSchedule};
use crate::model::{Job, JobId, Profit, Tick};

/// `1 + sqrt(2)`, the threshold that minimises the worst-case ratio bound.
/// Written as the command-line default so both parse to the same double, one
/// ulp above the nearest.
#[allow(clippy::excessive_precision)]
pub const DEFAULT_BETA: f64 = 2.414_213_562_373_095_15;

/// Decimal form of [`DEFAULT_BETA`] used on the command line.
pub const DEFAULT_BETA_STR: &str = "2.41421356237309515";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DscError {
    #[error("beta must lie in (1, 3], got {0}")]
    BetaOutOfRange(f64),
    #[error("job {0} is appendable and has no contention quote")]
    Appendable(JobId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DscConfig {
    beta: f64,
}

impl DscConfig {
    pub fn new(beta: f64) -> Result<Self, DscError> {
        // NaN fails both comparisons
        if beta > 1.0 && beta <= 3.0 {
            Ok(DscConfig { beta })
        } else {
            Err(DscError::BetaOutOfRange(beta))
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn threshold_multiplier(&self) -> f64 {
        1.0 + self.beta
    }
}

impl Default for DscConfig {
    fn default() -> Self {
        DscConfig { beta: DEFAULT_BETA }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfitQuote {
    pub profit_accept: Profit,
    pub profit_decline: Profit,
    pub affected: Vec<AffectedJob>,
}

/// Prices admitting `job` by contention insertion against declining it.
pub fn quote(job: &Job, schedule: &TentativeSchedule, now: Tick) -> Result<ProfitQuote, DscError> {
    price(job, schedule, now).map(|(q, _)| q)
}

fn price(
    job: &Job,
    schedule: &TentativeSchedule,
    now: Tick,
) -> Result<(ProfitQuote, TentativeSchedule), DscError> {
    if schedule.is_appendable(job, now) {
        return Err(DscError::Appendable(job.id));
    }
    let (next, affected) = schedule
        .contention_insert(job, now)
        .map_err(|_| DscError::Appendable(job.id))?;

    let mut profit_decline: Profit = 0;
    let mut extra_shortage: Profit = 0;
    for hit in &affected {
        let before = schedule
            .admitted_job(hit.job)
            .expect("affected jobs are admitted");
        if before.completes_as_planned() {
            profit_decline += before.job.value as Profit;
        } else {
            profit_decline -= before.planned_shortage() as Profit;
        }
        // shortage grows by exactly the lost allocation
        extra_shortage += hit.lost as Profit;
    }
    let profit_accept = job.value as Profit - extra_shortage;
    Ok((
        ProfitQuote {
            profit_accept,
            profit_decline,
            affected,
        },
        next,
    ))
}

/// Strict comparison `accept > (1 + beta) * decline` in double precision.
pub fn accepts(profit_accept: Profit, profit_decline: Profit, config: &DscConfig) -> bool {
    profit_accept as f64 > config.threshold_multiplier() * profit_decline as f64
}

pub fn dsc_decide(
    job: &Job,
    schedule: &TentativeSchedule,
    now: Tick,
    config: &DscConfig,
) -> PolicyDecision {
    if schedule.is_appendable(job, now) {
        return PolicyDecision::AcceptAppend;
    }
    let (q, next) = price(job, schedule, now).expect("unappendable job always has a quote");
    let quoted = Some(QuotedProfits {
        accept: q.profit_accept,
        decline: q.profit_decline,
    });
    if accepts(q.profit_accept, q.profit_decline, config) {
        PolicyDecision::AcceptContention {
            schedule: next,
            affected: q.affected,
            quote: quoted,
        }
    } else {
        PolicyDecision::Decline { quote: quoted }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct DscPolicy {
    pub config: DscConfig,
}

impl DscPolicy {
    pub fn new(config: DscConfig) -> Self {
        DscPolicy { config }
    }
}

impl OnlinePolicy for DscPolicy {
    fn name(&self) -> &str {
        "dsc"
    }

    fn decide(&self, job: &Job, schedule: &TentativeSchedule, now: Tick) -> PolicyDecision {
        dsc_decide(job, schedule, now, &self.config)
    }
}
