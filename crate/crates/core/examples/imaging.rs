//! One imaging run of a named scenario: separation, improved DORT and DORT.
//!
//! `cargo run --release --example imaging [shg_u|linear_u|shg_v] [seed] [out_dir]`
//!
//! Writes `improved.pgm` and `dort.pgm` to the output directory (default `.`).

use std::path::PathBuf;

use speckle_ica::experiment::artifacts::write_pgm;
use speckle_ica::experiment::pipeline::run_imaging;
use speckle_ica::experiment::{ExperimentConfig, Scenario};

fn main() -> speckle_ica::Result<()> {
    let mut args = std::env::args().skip(1);
    let scenario = match args.next().as_deref() {
        Some("linear_u") => Scenario::LinearU,
        Some("shg_v") => Scenario::ShgV,
        _ => Scenario::ShgU,
    };
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let out = PathBuf::from(args.next().unwrap_or_else(|| ".".into()));
    let setup = ExperimentConfig::new(scenario).resolve()?.imaging_setup()?;
    let o = run_imaging(&setup, seed)?;
    println!("{} scatterers, pixel {:.3}λ", o.scene.len(), o.improved.image.pitch);
    println!("singular values {:?}", o.singular_values.iter().map(|s| format!("{s:.3e}")).collect::<Vec<_>>());
    println!("source distances {:?}", o.alignment.distances.iter().map(|d| format!("{d:.3}")).collect::<Vec<_>>());
    println!("improved DORT {:?}", o.improved_score);
    println!("DORT          {:?}", o.dort_score);
    std::fs::create_dir_all(&out)?;
    write_pgm(&o.improved.image, &out.join("improved.pgm"))?;
    write_pgm(&o.dort, &out.join("dort.pgm"))?;
    Ok(())
}
