//! Measured phase-screen correlation length against the closed-form law.
//!
//! `cargo run --release --example phase_screen`

use speckle_ica::diagnostics::screen_coherence;
use speckle_ica::optics::{Modality, OpticsConfig};

fn main() -> speckle_ica::Result<()> {
    println!("{:>6} {:>10} {:>10} {:>8}", "k0σ", "measured", "predicted", "error");
    for k0_sigma in [0.5, 1.0, 3.0] {
        let mut cfg = OpticsConfig::desk(Modality::Shg, 0.75);
        cfg.screen_k0_sigma = k0_sigma;
        let c = screen_coherence(&cfg, 2, 0.5)?;
        println!("{k0_sigma:>6} {:>10.4} {:>10.4} {:>7.1}%", c.fitted_length, c.predicted_length, 100.0 * c.relative_error());
    }
    Ok(())
}
