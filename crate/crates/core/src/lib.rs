//! Online preemptive deadline scheduling with admission commitment.

pub mod adversary;
pub mod analysis;
pub mod baselines;
pub mod cli;
pub mod dsc;
pub mod engine;
pub mod model;
pub mod oracle;
