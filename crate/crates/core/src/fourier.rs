//! Centered two-dimensional discrete Fourier transforms.
//!
//! For an `n x n` array indexed from the grid center `c = n/2`,
//! `centered(a, sign)` computes
//! `out[m] = sum_p a[p] exp(sign * 2 pi i (m - c).(p - c) / n)`
//! without normalization.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Exponent sign of the transform kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Negative,
    Positive,
}

/// Planned square 2D transform of a fixed size.
pub struct Fft2 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Centered transform, returning a new array.
    pub fn centered(&self, a: ArrayView2<Complex64>, sign: Sign) -> Array2<Complex64> {
        let n = self.n;
        assert_eq!(a.dim(), (n, n), "transform size mismatch");
        let c = n / 2;
        // Move the center sample to index 0 so the plain DFT applies.
        let mut buf = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let si = (i + c) % n;
            for j in 0..n {
                buf[i * n + j] = a[[si, (j + c) % n]];
            }
        }
        let plan = match sign {
            Sign::Negative => &self.forward,
            Sign::Positive => &self.inverse,
        };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(&mut buf, &mut scratch);
        transpose_in_place(&mut buf, n);
        plan.process_with_scratch(&mut buf, &mut scratch);
        transpose_in_place(&mut buf, n);
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            let si = (i + n - c) % n;
            for j in 0..n {
                out[[i, j]] = buf[si * n + (j + n - c) % n];
            }
        }
        out
    }
}

fn transpose_in_place(buf: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// Evaluates `sum_q spec[q] exp(sign * 2 pi i f_q . x)` at an arbitrary point,
/// where `f_q = (q - c) / side` are the centered bin frequencies.
pub fn evaluate_at(spec: ArrayView2<Complex64>, side: f64, x: [f64; 2], sign: Sign) -> Complex64 {
    let n = spec.nrows();
    let c = n / 2;
    let s = match sign {
        Sign::Negative => -1.0,
        Sign::Positive => 1.0,
    };
    let phasors = |coord: f64| -> Vec<Complex64> {
        (0..n)
            .map(|q| Complex64::from_polar(1.0, s * 2.0 * std::f64::consts::PI * (q as f64 - c as f64) * coord / side))
            .collect()
    };
    let a = phasors(x[0]);
    let b = phasors(x[1]);
    let mut total = Complex64::new(0.0, 0.0);
    for (q1, row) in spec.outer_iter().enumerate() {
        let inner: Complex64 = row.iter().zip(&b).map(|(v, p)| v * p).sum();
        total += a[q1] * inner;
    }
    total
}
