// Split a DSC run into busy intervals and check the per-interval inequalities.

use std::error::Error;

use commitsched::adversary::{gen_instance, AdversaryParams};
use commitsched::analysis::{check_dsc_trace, interval_profits};
use commitsched::dsc::{DscPolicy, DEFAULT_BETA};
use commitsched::engine::run_simulation;

pub fn run_example() -> Result<bool, Box<dyn Error>> {
    let instance = gen_instance(&AdversaryParams::from_decimal("4")?)?;
    let (_, trace) = run_simulation(&instance, &DscPolicy::default())?;

    for p in interval_profits(&trace, &instance)? {
        println!(
            "[{}, {}]: T = {} = P {} + C {}, shortage {}",
            p.interval.start,
            p.interval.end,
            p.total,
            p.peace,
            p.contention,
            p.total_shortage()
        );
    }
    let suite = check_dsc_trace(&trace, &instance, DEFAULT_BETA)?;
    for r in &suite.reports {
        println!("{:>24}: {} checked, {} violations", r.lemma, r.checked, r.violations.len());
    }
    Ok(suite.passed())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
