//! Circularity and coherence radius of the SLM speckle at the scatterer plane.
//!
//! `cargo run --release --example speckle [seeds]`

use speckle_ica::diagnostics::{speckle_statistics, SpeckleProbe};
use speckle_ica::optics::{Modality, OpticsConfig};

fn main() -> speckle_ica::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let cfg = OpticsConfig::desk(Modality::Shg, 0.75);
    let s = speckle_statistics(&cfg, &(0..seeds).collect::<Vec<_>>(), &SpeckleProbe::default())?;
    println!("seeds                 {}", s.seeds);
    println!("variance imbalance    {:.4}", s.variance_imbalance);
    println!("re/im correlation     {:.4}", s.cross_correlation);
    println!("E|E|^4 / (E|E|^2)^2   {:.4}", s.fourth_moment_ratio);
    println!("coherence radius      {:.4} (expected {:.4}, pixel {:.4})", s.half_coherence_radius, s.expected_radius, s.pitch);
    println!("circular: {}  radius within a pixel: {}", s.is_circular(0.1), s.radius_within_one_pixel());
    Ok(())
}
