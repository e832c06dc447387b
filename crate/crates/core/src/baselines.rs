//! Reference policies to compare DSC against.

use crate::engine::{OnlinePolicy, PolicyDecision, Segment, TentativeSchedule};
use crate::model::{Job, JobId, Tick};
use crate::oracle::edf_feasible;

/// Lays out remaining work earliest-deadline-first from `now`, cutting every
/// job at its deadline. Ties go to the smaller id.
pub fn edf_layout(mut work: Vec<(JobId, Tick, Tick)>, now: Tick) -> Vec<Segment> {
    work.sort_by_key(|&(id, _, deadline)| (deadline, id));
    let mut pointer = now;
    let mut segments = Vec::with_capacity(work.len());
    for (id, remaining, deadline) in work {
        if remaining == 0 || pointer >= deadline {
            continue;
        }
        let end = (pointer + remaining).min(deadline);
        segments.push(Segment::new(id, pointer, end));
        pointer = end;
    }
    segments
}

fn pending_work(schedule: &TentativeSchedule, job: &Job) -> Vec<(JobId, Tick, Tick)> {
    schedule
        .admitted()
        .map(|a| (a.job.id, a.remaining(), a.job.deadline))
        .chain(std::iter::once((job.id, job.proc, job.deadline)))
        .collect()
}

fn accept_with_edf(job: &Job, schedule: &TentativeSchedule, now: Tick) -> PolicyDecision {
    let next = schedule.replan(Some(job), edf_layout(pending_work(schedule, job), now));
    let affected = schedule.losses_to(&next);
    PolicyDecision::AcceptContention {
        schedule: next,
        affected,
        quote: None,
    }
}

/// Admits every job and re-plans all admitted work by EDF at each release.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdmitAllEdf;

impl OnlinePolicy for AdmitAllEdf {
    fn name(&self) -> &str {
        "admit-all-edf"
    }

    fn decide(&self, job: &Job, schedule: &TentativeSchedule, now: Tick) -> PolicyDecision {
        accept_with_edf(job, schedule, now)
    }
}

/// Admits a job only if all admitted work plus the new job is still
/// preemptively feasible from now; never pays a penalty.
#[derive(Debug, Clone, Copy, Default)]
pub struct FeasibilityGuard;

impl OnlinePolicy for FeasibilityGuard {
    fn name(&self) -> &str {
        "feasibility-guard"
    }

    fn decide(&self, job: &Job, schedule: &TentativeSchedule, now: Tick) -> PolicyDecision {
        let outstanding: Vec<Job> = pending_work(schedule, job)
            .into_iter()
            .filter(|&(_, remaining, _)| remaining > 0)
            .map(|(id, remaining, deadline)| Job {
                id,
                release: now,
                proc: remaining,
                deadline,
                value: remaining,
            })
            .collect();
        if edf_feasible(&outstanding) {
            accept_with_edf(job, schedule, now)
        } else {
            PolicyDecision::Decline { quote: None }
        }
    }
}

pub fn admit_all_edf_policy() -> AdmitAllEdf {
    AdmitAllEdf
}

pub fn feasibility_guard_policy() -> FeasibilityGuard {
    FeasibilityGuard
}
