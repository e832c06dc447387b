// Run DSC on a handful of jobs and print what happened to each one.

use std::error::Error;

use commitsched::dsc::DscPolicy;
use commitsched::engine::run_simulation;
use commitsched::model::{Instance, Job};

pub fn run_example() -> Result<i128, Box<dyn Error>> {
    let instance = Instance::new(vec![
        Job::new(0, 0, 6, 12)?,
        Job::new(1, 2, 3, 9)?,
        // tight, and would have to push T0 past its deadline
        Job::new(2, 3, 8, 11)?,
        Job::new(3, 14, 2, 20)?,
    ])?;
    let (ledger, trace) = run_simulation(&instance, &DscPolicy::default())?;
    for (id, entry) in ledger.entries() {
        println!("{id}: {:?} (executed {})", entry.outcome.status, entry.outcome.executed);
    }
    println!("{} trace events, profit {}", trace.events.len(), ledger.profit());
    Ok(ledger.profit())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
