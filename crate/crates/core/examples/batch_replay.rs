// Run a random corpus on several threads and confirm the traces replay exactly.

use std::error::Error;

use commitsched::cli::{gen_random, run_batch, PolicySpec, RandomGenConfig};
use commitsched::dsc::DscConfig;

pub fn run_example() -> Result<usize, Box<dyn Error>> {
    let instances = (0..32)
        .map(|seed| {
            let g = gen_random(&RandomGenConfig {
                seed,
                n: 14,
                ..Default::default()
            })?;
            Ok((format!("r{seed}"), g.instance))
        })
        .collect::<Result<Vec<_>, Box<dyn Error>>>()?;
    let policies = [PolicySpec::Dsc(DscConfig::default()), PolicySpec::FeasibilityGuard];

    let serial = run_batch(&instances, &policies, 1)?;
    let parallel = run_batch(&instances, &policies, 4)?;
    if serial != parallel {
        return Err("thread count changed a trace".into());
    }
    let profit: i128 = serial.iter().map(|r| r.summary.profit).sum();
    println!("{} runs replayed identically, total profit {profit}", serial.len());
    Ok(serial.len())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
