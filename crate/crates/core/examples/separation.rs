//! Deflationary separation of mixed unimodular sources.
//!
//! `cargo run --release --example separation [sources] [samples]`

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use speckle_ica::ica::{align_sources, separate, ExtractionOptions};
use speckle_ica::moments::{whiten, SampleMatrix, SamplingAxis};
use speckle_ica::rngfield::{circular_normal, rng};

fn main() -> speckle_ica::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let n = args.next().flatten().unwrap_or(4);
    let samples = args.next().flatten().unwrap_or(100_000);
    let mut r = rng(3);
    let s = Array2::from_shape_fn((n, samples), |_| Complex64::from_polar(1.0, r.random_range(0.0..std::f64::consts::TAU)));
    let a = Array2::from_shape_fn((n, n), |_| circular_normal(&mut r));
    let truth = SampleMatrix::new(s.clone(), SamplingAxis::Realizations);
    let white = whiten(&SampleMatrix::new(a.dot(&s), SamplingAxis::Realizations), n)?;
    let result = separate(&white, n, &ExtractionOptions::default())?;
    let al = align_sources(&result.source_matrix(), &truth)?;
    for (i, (&t, d)) in al.assignment.iter().zip(&al.distances).enumerate() {
        println!("estimate {i} -> source {t}: K = {:+.3}, distance {:.4} rad", result.kurtosis[i], d);
    }
    Ok(())
}
