// Compare every policy against the exact offline optimum on random instances.

use std::error::Error;

use commitsched::analysis::competitive_report;
use commitsched::baselines::{AdmitAllEdf, FeasibilityGuard};
use commitsched::cli::{gen_random, RandomGenConfig};
use commitsched::dsc::DscPolicy;
use commitsched::engine::OnlinePolicy;

pub fn run_example() -> Result<Vec<(String, f64)>, Box<dyn Error>> {
    let instances = (0..20)
        .map(|seed| {
            let config = RandomGenConfig {
                seed,
                n: 10,
                load_factor: Some(if seed % 2 == 0 { 0.7 } else { 2.5 }),
                ..Default::default()
            };
            Ok((format!("random-{seed}"), gen_random(&config)?.instance))
        })
        .collect::<Result<Vec<_>, Box<dyn Error>>>()?;
    let policies: [&dyn OnlinePolicy; 3] = [&DscPolicy::default(), &AdmitAllEdf, &FeasibilityGuard];
    let report = competitive_report(&instances, &policies, 20)?;
    for (policy, min) in &report.minima {
        println!("{policy:>18}: worst ratio {min:.4}");
    }
    Ok(report.minima.into_iter().collect())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example().map(|_| ())
}
