//! Normalized kurtosis of the three reference source families.
//!
//! `cargo run --release --example kurtosis [samples]`

use ndarray::Array1;
use num_complex::Complex64;
use rand::Rng;
use speckle_ica::moments::kurtosis_of;
use speckle_ica::rngfield::{circular_normal, rng};

fn main() -> speckle_ica::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100_000);
    let mut r = rng(7);
    let gauss = Array1::from_shape_fn(n, |_| circular_normal(&mut r));
    let squared = gauss.mapv(|z| z * z);
    let unimodular = Array1::from_shape_fn(n, |_| Complex64::from_polar(1.0, r.random_range(0.0..std::f64::consts::TAU)));
    for (name, y, expected) in [("circular gaussian", &gauss, 0.0), ("squared gaussian", &squared, 4.0), ("unimodular", &unimodular, -1.0)] {
        println!("{name:<18} K = {:+.4} (closed form {expected:+})", kurtosis_of(y.view())?.value);
    }
    Ok(())
}
