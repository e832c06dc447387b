// Price a contention insertion by hand and compare with DSC's decision.

use std::error::Error;

use commitsched::dsc::{dsc_decide, quote, DscConfig};
use commitsched::engine::{PolicyDecision, TentativeSchedule};
use commitsched::model::Job;

pub fn run_example() -> Result<Vec<bool>, Box<dyn Error>> {
    let running = Job::new(0, 0, 1_000_000, 1_000_000)?;
    let mut schedule = TentativeSchedule::new();
    schedule.append(&running, 0)?;

    let config = DscConfig::default();
    let mut decisions = Vec::new();
    // a tight job released at t=0 overlaps T0 completely; only a long one is worth it
    for (id, proc) in [(1, 2_000_000), (2, 5_000_000)] {
        let job = Job::new(id, 0, proc, proc)?;
        let q = quote(&job, &schedule, 0)?;
        let decision = dsc_decide(&job, &schedule, 0, &config);
        let accepted = matches!(decision, PolicyDecision::AcceptContention { .. });
        println!(
            "{}: accept {} vs (1 + beta) * decline {:.0} -> {}",
            job.id,
            q.profit_accept,
            config.threshold_multiplier() * q.profit_decline as f64,
            if accepted { "accept" } else { "decline" }
        );
        decisions.push(accepted);
    }
    Ok(decisions)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
