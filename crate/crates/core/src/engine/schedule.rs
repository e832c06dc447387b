use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::model::{Job, JobId, Tick};

/// A half-open allocation `[start, end)` of the processor to one job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segment {
    pub job: JobId,
    pub start: Tick,
    pub end: Tick,
}

impl Segment {
    pub fn new(job: JobId, start: Tick, end: Tick) -> Self {
        Segment { job, start, end }
    }

    pub fn len(&self) -> Tick {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// An admitted job that has neither completed nor reached its deadline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdmittedJob {
    pub job: Job,
    pub executed: Tick,
    /// Total length of this job's future segments.
    pub allocated: Tick,
}

impl AdmittedJob {
    pub fn remaining(&self) -> Tick {
        self.job.proc - self.executed
    }

    /// Unfinished work at the deadline if the schedule runs as planned.
    pub fn planned_shortage(&self) -> Tick {
        self.remaining() - self.allocated
    }

    pub fn completes_as_planned(&self) -> bool {
        self.planned_shortage() == 0
    }
}

/// Future work lost by one job when the schedule changed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffectedJob {
    pub job: JobId,
    pub lost: Tick,
}

/// The planned future use of the processor together with the state of every
/// admitted, unfinished job.
///
/// Segments are sorted, disjoint, start no earlier than the current time and
/// never extend past their job's deadline. An admitted job may have less
/// future allocation than remaining work; the difference is its planned
/// shortage.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TentativeSchedule {
    segments: VecDeque<Segment>,
    admitted: BTreeMap<JobId, AdmittedJob>,
}

impl TentativeSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn segments(&self) -> impl ExactSizeIterator<Item = &Segment> + '_ {
        self.segments.iter()
    }

    pub fn admitted(&self) -> impl Iterator<Item = &AdmittedJob> + '_ {
        self.admitted.values()
    }

    pub fn admitted_job(&self, id: JobId) -> Option<&AdmittedJob> {
        self.admitted.get(&id)
    }

    pub fn has_segments(&self) -> bool {
        !self.segments.is_empty()
    }

    pub fn head(&self) -> Option<&Segment> {
        self.segments.front()
    }

    /// End of the last planned segment, or `now` when nothing is planned.
    pub fn end(&self, now: Tick) -> Tick {
        self.segments.back().map_or(now, |s| s.end.max(now))
    }

    pub fn allocation(&self, id: JobId) -> Tick {
        self.admitted.get(&id).map_or(0, |a| a.allocated)
    }

    /// Whether `job` fits after the current end of the schedule.
    pub fn is_appendable(&self, job: &Job, now: Tick) -> bool {
        self.end(now) + job.proc <= job.deadline
    }

    pub fn append(&mut self, job: &Job, now: Tick) -> Result<(), EngineError> {
        if self.admitted.contains_key(&job.id) {
            return Err(EngineError::AlreadyAdmitted(job.id));
        }
        if !self.is_appendable(job, now) {
            return Err(EngineError::NotAppendable(job.id));
        }
        let start = self.end(now);
        self.segments
            .push_back(Segment::new(job.id, start, start + job.proc));
        self.admitted.insert(
            job.id,
            AdmittedJob {
                job: *job,
                executed: 0,
                allocated: job.proc,
            },
        );
        Ok(())
    }

    /// Tight-schedules `job` on `[d - p, d)` and re-lays the displaced suffix.
    ///
    /// Everything planned at or after `d - p` (splitting a straddling segment)
    /// is moved to start at `d` in its original order. Each moved piece is cut
    /// at its own job's deadline; pieces that no longer fit at all are dropped
    /// and the following pieces close the gap. Returns the new schedule and
    /// every job whose future allocation shrank.
    pub fn contention_insert(
        &self,
        job: &Job,
        now: Tick,
    ) -> Result<(TentativeSchedule, Vec<AffectedJob>), EngineError> {
        if self.admitted.contains_key(&job.id) {
            return Err(EngineError::AlreadyAdmitted(job.id));
        }
        if self.is_appendable(job, now) {
            return Err(EngineError::PreconditionViolated(job.id));
        }
        let split = job.deadline - job.proc;
        if split < now {
            return Err(EngineError::PreconditionViolated(job.id));
        }

        let mut prefix: Vec<Segment> = Vec::with_capacity(self.segments.len() + 1);
        let mut suffix: Vec<Segment> = Vec::new();
        for seg in &self.segments {
            if seg.end <= split {
                prefix.push(*seg);
            } else if seg.start >= split {
                suffix.push(*seg);
            } else {
                prefix.push(Segment::new(seg.job, seg.start, split));
                suffix.push(Segment::new(seg.job, split, seg.end));
            }
        }
        let prefix_end = prefix.last().map_or(split, |s| s.end);
        prefix.push(Segment::new(job.id, split, job.deadline));

        let mut pointer = job.deadline.max(prefix_end);
        let mut segments: VecDeque<Segment> = prefix.into();
        for piece in suffix {
            let deadline = self.admitted[&piece.job].job.deadline;
            if pointer >= deadline {
                continue;
            }
            let end = (pointer + piece.len()).min(deadline);
            push_merged(&mut segments, Segment::new(piece.job, pointer, end));
            pointer = end;
        }

        let mut admitted = self.admitted.clone();
        admitted.insert(
            job.id,
            AdmittedJob {
                job: *job,
                executed: 0,
                allocated: 0,
            },
        );
        let next = TentativeSchedule::from_parts(segments, admitted);
        let affected = self.losses_to(&next);
        Ok((next, affected))
    }

    /// Builds a schedule for the already admitted jobs plus `new_job` from an
    /// arbitrary segment list, as a policy that re-plans from scratch would.
    pub fn replan(&self, new_job: Option<&Job>, segments: Vec<Segment>) -> TentativeSchedule {
        let mut admitted = self.admitted.clone();
        if let Some(job) = new_job {
            admitted.insert(
                job.id,
                AdmittedJob {
                    job: *job,
                    executed: 0,
                    allocated: 0,
                },
            );
        }
        let mut merged = VecDeque::with_capacity(segments.len());
        for seg in segments.into_iter().filter(|s| !s.is_empty()) {
            push_merged(&mut merged, seg);
        }
        TentativeSchedule::from_parts(merged, admitted)
    }

    /// Jobs of `self` whose allocation is smaller in `next`.
    pub fn losses_to(&self, next: &TentativeSchedule) -> Vec<AffectedJob> {
        self.admitted
            .values()
            .filter_map(|a| {
                let after = next.allocation(a.job.id);
                (after < a.allocated).then(|| AffectedJob {
                    job: a.job.id,
                    lost: a.allocated - after,
                })
            })
            .collect()
    }

    fn from_parts(
        segments: VecDeque<Segment>,
        mut admitted: BTreeMap<JobId, AdmittedJob>,
    ) -> TentativeSchedule {
        for a in admitted.values_mut() {
            a.allocated = 0;
        }
        for seg in &segments {
            if let Some(a) = admitted.get_mut(&seg.job) {
                a.allocated += seg.len();
            }
        }
        TentativeSchedule { segments, admitted }
    }

    /// Checks every structural invariant at time `now`.
    pub fn validate(&self, now: Tick) -> Result<(), EngineError> {
        let mut cursor = now;
        let mut allocated: BTreeMap<JobId, Tick> = BTreeMap::new();
        for seg in &self.segments {
            let Some(a) = self.admitted.get(&seg.job) else {
                return Err(EngineError::invalid(format!(
                    "segment for unadmitted job {}",
                    seg.job
                )));
            };
            if seg.is_empty() {
                return Err(EngineError::invalid(format!("empty segment for {}", seg.job)));
            }
            if seg.start < cursor {
                return Err(EngineError::invalid(format!(
                    "segment [{}, {}) of {} overlaps or precedes {}",
                    seg.start, seg.end, seg.job, cursor
                )));
            }
            if seg.end > a.job.deadline {
                return Err(EngineError::invalid(format!(
                    "segment of {} ends at {} past deadline {}",
                    seg.job, seg.end, a.job.deadline
                )));
            }
            cursor = seg.end;
            *allocated.entry(seg.job).or_default() += seg.len();
        }
        for a in self.admitted.values() {
            let planned = allocated.get(&a.job.id).copied().unwrap_or(0);
            if planned != a.allocated {
                return Err(EngineError::invalid(format!(
                    "allocation bookkeeping of {} is {} but segments sum to {}",
                    a.job.id, a.allocated, planned
                )));
            }
            if a.executed + planned > a.job.proc {
                return Err(EngineError::invalid(format!(
                    "{} is planned {} ticks beyond its processing time",
                    a.job.id,
                    a.executed + planned - a.job.proc
                )));
            }
        }
        Ok(())
    }

    /// Runs the head segment from `now` up to `until`. Returns the executed
    /// piece, if the processor was busy at `now`.
    pub(crate) fn execute_head(&mut self, now: Tick, until: Tick) -> Option<Segment> {
        let head = self.segments.front_mut()?;
        if head.start > now || until <= now {
            return None;
        }
        let end = until.min(head.end);
        let piece = Segment::new(head.job, now, end);
        head.start = end;
        if head.is_empty() {
            self.segments.pop_front();
        }
        let a = self
            .admitted
            .get_mut(&piece.job)
            .expect("segments only reference admitted jobs");
        a.executed += piece.len();
        a.allocated -= piece.len();
        Some(piece)
    }

    pub(crate) fn remove(&mut self, id: JobId) -> Option<AdmittedJob> {
        self.segments.retain(|s| s.job != id);
        self.admitted.remove(&id)
    }

    pub(crate) fn same_admitted_state(&self, other: &TentativeSchedule) -> bool {
        self.admitted.len() == other.admitted.len()
            && self.admitted.iter().zip(other.admitted.iter()).all(
                |((ia, a), (ib, b))| ia == ib && a.job == b.job && a.executed == b.executed,
            )
    }
}

fn push_merged(segments: &mut VecDeque<Segment>, seg: Segment) {
    if let Some(last) = segments.back_mut() {
        if last.job == seg.job && last.end == seg.start {
            last.end = seg.end;
            return;
        }
    }
    segments.push_back(seg);
}
