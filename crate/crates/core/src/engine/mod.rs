//! Tentative schedules and the deterministic event loop that drives an online
//! policy over an instance.
//!
//! The engine releases jobs one at a time, asks the policy for a decision and
//! then executes the head of the tentative schedule until the next event
//! (release, segment boundary or deadline). At a given tick, completions and
//! deadline failures are settled first, then releases, then execution resumes.

mod schedule;
mod trace;

use std::io;

use thiserror::Error;

pub use schedule::{AdmittedJob, AffectedJob, Segment, TentativeSchedule};
pub use trace::{EventKind, JsonLinesSink, SimulationTrace, Tee, TraceEvent, TraceSink};

use crate::model::{Instance, Job, JobId, JobOutcome, Profit, ProfitLedger, Tick};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("job {0} does not fit after the end of the schedule")]
    NotAppendable(JobId),
    #[error("job {0} is appendable; contention insertion does not apply")]
    PreconditionViolated(JobId),
    #[error("job {0} is already admitted")]
    AlreadyAdmitted(JobId),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("policy {policy} broke its contract on job {job}: {reason}")]
    PolicyContractViolation {
        policy: String,
        job: JobId,
        reason: String,
    },
    #[error("trace sink failed: {0}")]
    Sink(String),
}

impl EngineError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        EngineError::InvalidSchedule(msg.into())
    }
}

impl From<io::Error> for EngineError {
    fn from(e: io::Error) -> Self {
        EngineError::Sink(e.to_string())
    }
}

/// Accept/decline profits a policy computed for a contested job.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuotedProfits {
    pub accept: Profit,
    pub decline: Profit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyDecision {
    /// Admit and place at the end of the current schedule.
    AcceptAppend,
    /// Admit and replace the tentative schedule with `schedule`, which must
    /// contain the new job and every previously admitted job.
    AcceptContention {
        schedule: TentativeSchedule,
        affected: Vec<AffectedJob>,
        quote: Option<QuotedProfits>,
    },
    Decline {
        quote: Option<QuotedProfits>,
    },
}

/// An online admission and scheduling policy. It sees only the released job
/// and the current tentative schedule.
pub trait OnlinePolicy {
    fn name(&self) -> &str;

    fn decide(&self, job: &Job, schedule: &TentativeSchedule, now: Tick) -> PolicyDecision;
}

impl<P: OnlinePolicy + ?Sized> OnlinePolicy for &P {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn decide(&self, job: &Job, schedule: &TentativeSchedule, now: Tick) -> PolicyDecision {
        (**self).decide(job, schedule, now)
    }
}

impl<P: OnlinePolicy + ?Sized> OnlinePolicy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn decide(&self, job: &Job, schedule: &TentativeSchedule, now: Tick) -> PolicyDecision {
        (**self).decide(job, schedule, now)
    }
}

pub fn end_of_schedule(schedule: &TentativeSchedule, now: Tick) -> Tick {
    schedule.end(now)
}

pub fn is_appendable(job: &Job, schedule: &TentativeSchedule, now: Tick) -> bool {
    schedule.is_appendable(job, now)
}

pub fn run_simulation(
    instance: &Instance,
    policy: &dyn OnlinePolicy,
) -> Result<(ProfitLedger, SimulationTrace), EngineError> {
    let mut events = Vec::new();
    let ledger = run_simulation_with_sink(instance, policy, &mut events)?;
    Ok((ledger, SimulationTrace { events }))
}

/// Runs `policy` over `instance`, streaming events into `sink`.
pub fn run_simulation_with_sink(
    instance: &Instance,
    policy: &dyn OnlinePolicy,
    sink: &mut dyn TraceSink,
) -> Result<ProfitLedger, EngineError> {
    Simulation {
        policy,
        sink,
        schedule: TentativeSchedule::new(),
        ledger: ProfitLedger::new(),
        now: 0,
    }
    .run(instance)
}

struct Simulation<'a> {
    policy: &'a dyn OnlinePolicy,
    sink: &'a mut dyn TraceSink,
    schedule: TentativeSchedule,
    ledger: ProfitLedger,
    now: Tick,
}

impl Simulation<'_> {
    fn emit(&mut self, t: Tick, kind: EventKind) -> Result<(), EngineError> {
        self.sink.record(&TraceEvent { t, kind })?;
        Ok(())
    }

    fn run(mut self, instance: &Instance) -> Result<ProfitLedger, EngineError> {
        let jobs = instance.jobs();
        let mut next = 0usize;
        let mut idle_until: Option<Tick> = None;

        loop {
            self.settle_deadlines()?;

            while next < jobs.len() && jobs[next].release == self.now {
                self.release(&jobs[next])?;
                next += 1;
            }

            let next_release = jobs.get(next).map(|j| j.release);
            let next_deadline = self
                .schedule
                .admitted()
                .map(|a| a.job.deadline)
                .filter(|d| *d > self.now)
                .min();
            if next_release.is_none() && next_deadline.is_none() && !self.schedule.has_segments()
            {
                break;
            }

            let boundary = self.schedule.head().map(|h| {
                if h.start > self.now {
                    h.start
                } else {
                    h.end
                }
            });
            let target = [next_release, next_deadline, boundary]
                .into_iter()
                .flatten()
                .min()
                .expect("at least one pending event");

            if let Some(piece) = self.schedule.execute_head(self.now, target) {
                idle_until = None;
                self.emit(
                    piece.start,
                    EventKind::Execute {
                        job: piece.job,
                        start: piece.start,
                        end: piece.end,
                    },
                )?;
                self.now = piece.end;
                let done = self
                    .schedule
                    .admitted_job(piece.job)
                    .is_some_and(|a| a.executed == a.job.proc);
                if done {
                    let a = self.schedule.remove(piece.job).expect("job is admitted");
                    self.ledger.record(&a.job, JobOutcome::completed(a.job.proc));
                    self.emit(self.now, EventKind::Complete { job: piece.job })?;
                }
            } else {
                // idle until the next planned segment or release
                let idle_end = match (self.schedule.head(), next_release) {
                    (Some(h), Some(r)) => Some(h.start.min(r)),
                    (Some(h), None) => Some(h.start),
                    (None, r) => r,
                };
                if let Some(end) = idle_end {
                    if idle_until != Some(end) && end > self.now {
                        self.emit(
                            self.now,
                            EventKind::Idle {
                                start: self.now,
                                end,
                            },
                        )?;
                        idle_until = Some(end);
                    }
                }
                self.now = target;
            }
        }
        Ok(self.ledger)
    }

    fn settle_deadlines(&mut self) -> Result<(), EngineError> {
        let due: Vec<JobId> = self
            .schedule
            .admitted()
            .filter(|a| a.job.deadline <= self.now)
            .map(|a| a.job.id)
            .collect();
        for id in due {
            let a = self.schedule.remove(id).expect("job is admitted");
            debug_assert!(a.executed < a.job.proc);
            self.ledger
                .record(&a.job, JobOutcome::failed(a.job.proc, a.executed));
            self.emit(
                self.now,
                EventKind::Fail {
                    job: id,
                    shortage: a.job.proc - a.executed,
                },
            )?;
        }
        Ok(())
    }

    fn release(&mut self, job: &Job) -> Result<(), EngineError> {
        let now = self.now;
        self.emit(now, EventKind::Release { job: job.id })?;
        let violation = |reason: String| EngineError::PolicyContractViolation {
            policy: self.policy.name().to_string(),
            job: job.id,
            reason,
        };
        match self.policy.decide(job, &self.schedule, now) {
            PolicyDecision::AcceptAppend => {
                self.schedule
                    .append(job, now)
                    .map_err(|e| violation(e.to_string()))?;
                self.emit(now, EventKind::AcceptAppend { job: job.id })?;
            }
            PolicyDecision::AcceptContention {
                schedule,
                affected,
                quote,
            } => {
                schedule
                    .validate(now)
                    .map_err(|e| violation(e.to_string()))?;
                let expected = self.schedule.replan(Some(job), Vec::new());
                if !schedule.same_admitted_state(&expected) {
                    return Err(violation(
                        "replacement schedule changes the admitted job set or progress".into(),
                    ));
                }
                if affected != self.schedule.losses_to(&schedule) {
                    return Err(violation("reported affected set is wrong".into()));
                }
                self.schedule = schedule;
                self.emit(
                    now,
                    EventKind::AcceptContention {
                        job: job.id,
                        affected,
                        profit_accept: quote.map(|q| q.accept),
                        profit_decline: quote.map(|q| q.decline),
                    },
                )?;
            }
            PolicyDecision::Decline { quote } => {
                self.ledger.record(job, JobOutcome::declined());
                self.emit(
                    now,
                    EventKind::Decline {
                        job: job.id,
                        profit_accept: quote.map(|q| q.accept),
                        profit_decline: quote.map(|q| q.decline),
                    },
                )?;
            }
        }
        debug_assert!(self.schedule.validate(now).is_ok());
        Ok(())
    }
}
