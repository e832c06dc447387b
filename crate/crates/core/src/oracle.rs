//! Exact offline optimum for small instances.
//!
//! The clairvoyant scheduler never gains from admitting a job it cannot
//! finish, so the optimum is the largest total processing time over subsets
//! that are preemptively feasible on one machine. Feasibility is checked two
//! independent ways: by simulating preemptive EDF and by the demand bound over
//! every (release, deadline) window. Debug builds assert they agree on every
//! subset the search queries.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Instance, Job, JobId, Tick};

pub const DEFAULT_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("instance has {size} jobs, above the oracle limit of {limit}")]
    InstanceTooLarge { size: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: Tick,
    pub witness: Vec<JobId>,
}

/// Preemptive EDF from the earliest release; true iff every job meets its
/// deadline. Advances between releases in closed form.
pub fn edf_feasible(jobs: &[Job]) -> bool {
    let mut order: Vec<&Job> = jobs.iter().collect();
    order.sort_by_key(|j| (j.release, j.id));
    // (deadline, id, remaining)
    let mut ready: BinaryHeap<Reverse<(Tick, JobId, Tick)>> = BinaryHeap::new();
    let mut next = 0;
    let mut now: Tick = order.first().map_or(0, |j| j.release);
    loop {
        while next < order.len() && order[next].release <= now {
            let j = order[next];
            ready.push(Reverse((j.deadline, j.id, j.proc)));
            next += 1;
        }
        let next_release = order.get(next).map(|j| j.release);
        let Some(Reverse((deadline, id, remaining))) = ready.pop() else {
            match next_release {
                Some(r) => {
                    now = r;
                    continue;
                }
                None => return true,
            }
        };
        let finish = now + remaining;
        match next_release {
            Some(r) if r < finish => {
                let ran = r - now;
                ready.push(Reverse((deadline, id, remaining - ran)));
                now = r;
            }
            _ => {
                if finish > deadline {
                    return false;
                }
                now = finish;
            }
        }
    }
}

/// Demand-bound test: for every window `[a, b]` with `a` a release and `b` a
/// deadline, the work of jobs released at or after `a` and due by `b` fits.
pub fn interval_load_feasible(jobs: &[Job]) -> bool {
    for a in jobs.iter().map(|j| j.release) {
        for b in jobs.iter().map(|j| j.deadline).filter(|b| *b >= a) {
            let load: Tick = jobs
                .iter()
                .filter(|j| j.release >= a && j.deadline <= b)
                .map(|j| j.proc)
                .sum();
            if load > b - a {
                return false;
            }
        }
    }
    true
}

fn feasible(jobs: &[Job]) -> bool {
    let edf = edf_feasible(jobs);
    debug_assert_eq!(
        edf,
        interval_load_feasible(jobs),
        "feasibility tests disagree on {jobs:?}"
    );
    edf
}

/// Maximum total processing time over feasible subsets. Ties go to the
/// lexicographically smallest sorted id list.
pub fn offline_optimal(instance: &Instance, limit: usize) -> Result<OracleResult, OracleError> {
    if instance.len() > limit {
        return Err(OracleError::InstanceTooLarge {
            size: instance.len(),
            limit,
        });
    }
    // Feasibility is closed under taking subsets, so a depth-first search
    // that only extends feasible sets is exhaustive. Long jobs first makes the
    // value bound bite early.
    let mut jobs: Vec<Job> = instance.jobs().to_vec();
    jobs.sort_by(|a, b| b.proc.cmp(&a.proc).then(a.id.cmp(&b.id)));
    let mut suffix_work = vec![0; jobs.len() + 1];
    for i in (0..jobs.len()).rev() {
        suffix_work[i] = suffix_work[i + 1] + jobs[i].proc;
    }
    let mut search = Search {
        jobs: &jobs,
        suffix_work: &suffix_work,
        chosen: Vec::with_capacity(jobs.len()),
        best: OracleResult {
            value: 0,
            witness: Vec::new(),
        },
    };
    search.descend(0, 0);
    Ok(search.best)
}

struct Search<'a> {
    jobs: &'a [Job],
    suffix_work: &'a [Tick],
    chosen: Vec<Job>,
    best: OracleResult,
}

impl Search<'_> {
    fn descend(&mut self, index: usize, value: Tick) {
        if value + self.suffix_work[index] < self.best.value {
            return;
        }
        if index == self.jobs.len() {
            self.offer(value);
            return;
        }
        let job = self.jobs[index];
        self.chosen.push(job);
        if feasible(&self.chosen) {
            self.descend(index + 1, value + job.proc);
        }
        self.chosen.pop();
        self.descend(index + 1, value);
    }

    fn offer(&mut self, value: Tick) {
        let mut witness: Vec<JobId> = self.chosen.iter().map(|j| j.id).collect();
        witness.sort();
        if value > self.best.value || (value == self.best.value && witness < self.best.witness) {
            self.best = OracleResult { value, witness };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(id: u32, r: Tick, p: Tick, d: Tick) -> Job {
        Job::new(id, r, p, d).unwrap()
    }

    #[test]
    fn edf_examples() {
        assert!(edf_feasible(&[job(0, 0, 5, 5)]));
        assert!(!edf_feasible(&[job(0, 0, 5, 5), job(1, 0, 5, 5)]));
        assert!(edf_feasible(&[job(0, 0, 5, 10), job(1, 0, 5, 10)]));
        assert!(edf_feasible(&[]));
        // needs preemption: the long job yields to the tight one at t=2
        assert!(edf_feasible(&[job(0, 0, 6, 9), job(1, 2, 3, 5)]));
    }

    #[test]
    fn interval_load_examples() {
        assert!(!interval_load_feasible(&[job(0, 0, 5, 5), job(1, 0, 5, 5)]));
        assert!(interval_load_feasible(&[]));
        // windows: [0,9] carries 7, [2,6] carries 4, [0,6] carries only T1
        assert!(interval_load_feasible(&[job(0, 0, 3, 9), job(1, 2, 4, 6)]));
        assert!(!interval_load_feasible(&[job(0, 0, 6, 7), job(1, 2, 4, 6)]));
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(
            offline_optimal(&Instance::empty(), DEFAULT_LIMIT).unwrap(),
            OracleResult {
                value: 0,
                witness: vec![]
            }
        );

        let two = Instance::new(vec![
            job(0, 0, 1_000_000, 1_000_000),
            job(1, 1, 2_000_000, 2_000_001),
        ])
        .unwrap();
        let r = offline_optimal(&two, DEFAULT_LIMIT).unwrap();
        assert_eq!(r.value, 2_000_000);
        assert_eq!(r.witness, vec![JobId(1)]);

        let disjoint =
            Instance::new(vec![job(0, 0, 2, 2), job(1, 2, 3, 5), job(2, 7, 1, 8)]).unwrap();
        let r = offline_optimal(&disjoint, DEFAULT_LIMIT).unwrap();
        assert_eq!(r.value, 6);
        assert_eq!(r.witness, vec![JobId(0), JobId(1), JobId(2)]);
    }

    #[test]
    fn ties_pick_smallest_witness() {
        let inst = Instance::new(vec![job(2, 0, 4, 4), job(0, 0, 2, 4), job(1, 0, 2, 4)]).unwrap();
        let r = offline_optimal(&inst, DEFAULT_LIMIT).unwrap();
        assert_eq!(r.value, 4);
        assert_eq!(r.witness, vec![JobId(0), JobId(1)]);
    }

    #[test]
    fn limit_is_enforced() {
        let jobs = (0..5).map(|i| job(i, 0, 1, 100)).collect();
        let inst = Instance::new(jobs).unwrap();
        assert_eq!(
            offline_optimal(&inst, 4),
            Err(OracleError::InstanceTooLarge { size: 5, limit: 4 })
        );
    }

    /// Plain 2^n enumeration for cross-checking the pruned search.
    fn enumerate(instance: &Instance) -> Tick {
        let jobs = instance.jobs();
        (0u32..1 << jobs.len())
            .filter_map(|mask| {
                let subset: Vec<Job> = jobs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, j)| *j)
                    .collect();
                interval_load_feasible(&subset).then(|| subset.iter().map(|j| j.proc).sum())
            })
            .max()
            .unwrap_or(0)
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_jobs(max: usize) -> impl Strategy<Value = Vec<Job>> {
            proptest::collection::vec((0u64..20, 1u64..8, 0u64..10), 0..max).prop_map(|v| {
                v.into_iter()
                    .enumerate()
                    .map(|(i, (r, p, s))| job(i as u32, r as Tick, p as Tick, (r + p + s) as Tick))
                    .collect()
            })
        }

        proptest! {
            #[test]
            fn feasibility_tests_agree(jobs in arb_jobs(10)) {
                prop_assert_eq!(edf_feasible(&jobs), interval_load_feasible(&jobs));
            }

            #[test]
            fn pruned_search_matches_enumeration(jobs in arb_jobs(10)) {
                let inst = Instance::new(jobs).unwrap();
                let r = offline_optimal(&inst, DEFAULT_LIMIT).unwrap();
                prop_assert_eq!(r.value, enumerate(&inst));
                let witness: Vec<Job> = r.witness.iter().map(|id| *inst.get(*id).unwrap()).collect();
                prop_assert!(edf_feasible(&witness));
                prop_assert_eq!(witness.iter().map(|j| j.proc).sum::<Tick>(), r.value);
            }
        }
    }
}
