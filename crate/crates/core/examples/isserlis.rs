//! Gaussian moment oracle against Monte-Carlo averages.
//!
//! `cargo run --release --example isserlis`

use ndarray::{array, Array2};
use num_complex::Complex64;
use ndarray_linalg::Cholesky;
use ndarray_linalg::UPLO;
use speckle_ica::moments::{empirical_moment, isserlis_moment, Factor, GaussianMoments};
use speckle_ica::rngfield::{circular_normal, rng};

fn main() -> speckle_ica::Result<()> {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let cov = array![[c(1.0, 0.0), c(0.5, 0.2), c(0.1, 0.0)], [c(0.5, -0.2), c(1.0, 0.0), c(0.3, -0.1)], [c(0.1, 0.0), c(0.3, 0.1), c(1.0, 0.0)]];
    let l = cov.cholesky(UPLO::Lower)?;
    let mut r = rng(11);
    let z = Array2::from_shape_fn((3, 1_000_000), |_| circular_normal(&mut r));
    let x = l.dot(&z);
    let g = GaussianMoments::circular(cov);
    let (p, q) = (Factor::plain, Factor::conj);
    let patterns: [(&str, Vec<Factor>); 3] = [
        ("E x0 x0* x1 x1*", vec![p(0), q(0), p(1), q(1)]),
        ("E x0 x1* x2 x2*", vec![p(0), q(1), p(2), q(2)]),
        ("E |x0|^4 |x1|^4", vec![p(0), p(0), q(0), q(0), p(1), p(1), q(1), q(1)]),
    ];
    for (name, pat) in patterns {
        let want = isserlis_moment(&g, &pat)?;
        let got = empirical_moment(&x, &pat);
        println!("{name:<18} oracle {:>8.4} {:>+8.4}i   sampled {:>8.4} {:>+8.4}i", want.re, want.im, got.re, got.im);
    }
    Ok(())
}
