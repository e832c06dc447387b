// Build the adversary's tight-job chain and show no online scheduler beats 1/c on it.

use std::error::Error;

use commitsched::adversary::{gen_instance, gen_sequence, verify_upper_bound, AdversaryParams};
use commitsched::dsc::DscPolicy;
use commitsched::engine::run_simulation;
use commitsched::oracle::offline_optimal;

/// (c, best online ratio over all strategies, DSC's ratio)
pub type Row = (String, f64, f64);

pub fn run_example() -> Result<Vec<Row>, Box<dyn Error>> {
    let mut rows = Vec::new();
    for c in ["2", "4", "5.8"] {
        let params = AdversaryParams::from_decimal(c)?;
        let seq = gen_sequence(&params)?;
        let instance = gen_instance(&params)?;
        let report = verify_upper_bound(&instance, &params)?;

        let (ledger, _) = run_simulation(&instance, &DscPolicy::default())?;
        let opt = offline_optimal(&instance, instance.len())?;
        let dsc = ledger.profit() as f64 / opt.value as f64;
        println!(
            "c={c}: {} jobs, best online ratio {:.6} (1/c = {:.6}), DSC {:.6}",
            seq.job_count(),
            report.best_ratio,
            report.bound,
            dsc
        );
        rows.push((c.to_string(), report.best_ratio, dsc));
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
