//! Correlation sweep: separation error of a correlated source against `M_s`.
//!
//! `cargo run --release --example theorem_sweep [seeds]`

use speckle_ica::separability::{summarize, theorem_scaling_experiment, TheoremSweep};

fn main() -> speckle_ica::Result<()> {
    let seeds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let sweep = TheoremSweep { seeds, ..Default::default() };
    let rows = theorem_scaling_experiment(&sweep)?;
    let summary = summarize(&rows);
    println!("{:>6} {:>10} {:>10} {:>8}", "rho", "M_s+M_n", "dist", "valid");
    for m in &summary.medians {
        println!("{:>6.2} {:>10.4} {:>10.5} {:>8}", m.correlation, m.m, m.distance, m.valid);
    }
    println!("C = {:.4}  fitted exponent = {:.3}", summary.constant, summary.exponent);
    Ok(())
}
