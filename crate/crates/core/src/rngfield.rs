//! Seeded randomness: stationary Gaussian random fields, phase screens and
//! circular complex noise.
//!
//! Random media are described by a *scale length* `ℓ` (the `ℓ_0` of a screen,
//! the `ℓ_SLM` of the modulator). The synthesized field has covariance
//! `exp(-r²/(8ℓ²))`, i.e. a 1/e correlation length of `2√2 ℓ`; with this
//! convention a screen `exp(ikσV)` decorrelates as `exp(-r²/l_c²)` with
//! `l_c = 2√2 ℓ/(kσ)` at small lags. [`gaussian_field`] itself is
//! parameterized directly by the 1/e correlation length.

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Grid, Plane, RealField};
use crate::fourier::{Fft2, Sign};
use crate::moments::{SampleMatrix, SamplingAxis};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derives the seed of realization `j` from a base seed.
pub fn split_seed(base: u64, j: u64) -> u64 {
    base ^ j.wrapping_mul(GOLDEN_GAMMA)
}

/// The crate-wide deterministic generator.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Circular complex standard normal sample with `E|z|² = 1`.
pub fn circular_normal<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// 1/e correlation length of the field synthesized for scale length `scale`.
pub fn scale_to_correlation_length(scale: f64) -> f64 {
    2.0 * std::f64::consts::SQRT_2 * scale
}

/// Isoplanatic length `2√2 ℓ_0 / (kσ)` of a screen `exp(ikσV)`.
pub fn screen_correlation_length(scale: f64, k: f64, sigma: f64) -> f64 {
    2.0 * std::f64::consts::SQRT_2 * scale / (k * sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomFieldSpec {
    /// 1/e length of the covariance `exp(-r²/ℓ²)`.
    pub correlation_length: f64,
    pub side_length: f64,
    pub points: usize,
    pub seed: u64,
}

impl RandomFieldSpec {
    pub fn grid(&self) -> Grid {
        Grid::from_window(self.side_length, self.points)
    }

    pub fn check(&self) -> Result<()> {
        let pitch = self.grid().pitch;
        if !(self.correlation_length > 2.0 * pitch) {
            return Err(Error::UnderResolved { correlation_length: self.correlation_length, pitch });
        }
        Ok(())
    }
}

/// Stationary Gaussian field with covariance `exp(-|r|²/ℓ²)`, normalized to
/// zero empirical mean and unit empirical variance.
pub fn gaussian_field(spec: &RandomFieldSpec) -> Result<RealField> {
    gaussian_field_with(spec, &Fft2::new(spec.points))
}

/// As [`gaussian_field`], reusing a planned transform of matching size.
pub fn gaussian_field_with(spec: &RandomFieldSpec, fft: &Fft2) -> Result<RealField> {
    spec.check()?;
    let grid = spec.grid();
    let n = spec.points;
    if fft.size() != n {
        return Err(Error::GridMismatch(format!("transform size {} vs grid {n}", fft.size())));
    }
    let mut rng = rng(spec.seed);
    let ell = spec.correlation_length;
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let amp: Vec<f64> = (0..n).map(|q| grid.frequency(q)).collect();
    let mut spectrum = Array2::from_shape_fn((n, n), |(q1, q2)| {
        let f2 = amp[q1] * amp[q1] + amp[q2] * amp[q2];
        Complex64::new((-pi2 * ell * ell * f2 / 2.0).exp(), 0.0)
    });
    for v in spectrum.iter_mut() {
        *v *= circular_normal(&mut rng);
    }
    let complex_field = fft.centered(spectrum.view(), Sign::Positive);
    let mut values = complex_field.mapv(|z| z.re);
    let mean = values.mean().unwrap_or(0.0);
    values.mapv_inplace(|v| v - mean);
    let var = values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64;
    if var <= 0.0 {
        return Err(Error::ZeroData);
    }
    let scale = var.sqrt().recip();
    values.mapv_inplace(|v| v * scale);
    RealField::new(values, grid.pitch)
}

/// Screen `exp(ikσV(x)) · 1{|x| ≤ R_s}` on the grid of `v`.
pub fn phase_screen(v: &RealField, k: f64, sigma: f64, support_radius: f64) -> Field {
    let grid = v.grid;
    let coords = grid.coords();
    let values = Array2::from_shape_fn((grid.points, grid.points), |(i, j)| {
        let r2 = coords[i] * coords[i] + coords[j] * coords[j];
        if r2 <= support_radius * support_radius {
            Complex64::from_polar(1.0, k * sigma * v.values[[i, j]])
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Field { values, grid, plane: Plane::Screen }
}

/// I.i.d. circular complex Gaussian entries with `E|n|² = sigma_n²`.
pub fn complex_circular_noise(rows: usize, cols: usize, sigma_n: f64, seed: u64, axis: SamplingAxis) -> Result<SampleMatrix> {
    if !(sigma_n >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise sigma {sigma_n} must be non-negative")));
    }
    let mut data = Array2::zeros((rows, cols));
    if sigma_n > 0.0 {
        let mut rng = rng(seed);
        for v in data.iter_mut() {
            *v = circular_normal(&mut rng) * sigma_n;
        }
    }
    Ok(SampleMatrix::new(data, axis))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seed: u64) -> RandomFieldSpec {
        RandomFieldSpec { correlation_length: 4.0, side_length: 512.0, points: 512, seed }
    }

    /// Radially averaged periodic autocorrelation at integer lag `r` (pixels) along the axes.
    fn axis_autocorrelation(f: &RealField, lag: usize) -> f64 {
        let n = f.grid.points;
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = f.values[[i, j]];
                acc += v * f.values[[(i + lag) % n, j]] + v * f.values[[i, (j + lag) % n]];
            }
        }
        acc / (2.0 * (n * n) as f64)
    }

    #[test]
    fn field_moments_and_correlation() {
        let f = gaussian_field(&spec(7)).unwrap();
        assert!(f.mean().abs() <= 0.05);
        let var = f.variance();
        assert!((0.9..=1.1).contains(&var));
        let c = axis_autocorrelation(&f, 4);
        assert!((c - (-1.0f64).exp()).abs() < 0.1, "autocorrelation {c}");
    }

    #[test]
    fn field_is_deterministic() {
        let a = gaussian_field(&spec(11)).unwrap();
        let b = gaussian_field(&spec(11)).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn field_normality_within_clt_bounds() {
        let f = gaussian_field(&spec(5)).unwrap();
        let n = f.values.len() as f64;
        let skew = f.values.iter().map(|v| v.powi(3)).sum::<f64>() / n;
        let exkurt = f.values.iter().map(|v| v.powi(4)).sum::<f64>() / n - 3.0;
        // effective number of independent samples (L_D/ℓ)²
        let neff = (512.0f64 / 4.0).powi(2);
        assert!(skew.abs() < 4.0 * (6.0 / neff).sqrt(), "skew {skew}");
        assert!(exkurt.abs() < 4.0 * (24.0 / neff).sqrt(), "excess kurtosis {exkurt}");
    }

    #[test]
    fn under_resolved_field_is_rejected() {
        let s = RandomFieldSpec { correlation_length: 1.5, side_length: 512.0, points: 512, seed: 1 };
        assert!(matches!(gaussian_field(&s), Err(Error::UnderResolved { .. })));
    }

    #[test]
    fn screen_is_pupil_for_zero_sigma_and_unimodular_inside() {
        let v = gaussian_field(&RandomFieldSpec { correlation_length: 8.0, side_length: 64.0, points: 64, seed: 2 }).unwrap();
        let s0 = phase_screen(&v, 2.0 * std::f64::consts::PI, 0.0, 20.0);
        let s1 = phase_screen(&v, 2.0 * std::f64::consts::PI, 0.3, 20.0);
        let coords = v.grid.coords();
        for i in 0..64 {
            for j in 0..64 {
                let inside = coords[i].powi(2) + coords[j].powi(2) <= 400.0;
                let want = if inside { 1.0 } else { 0.0 };
                assert_eq!(s0.values[[i, j]], Complex64::new(want, 0.0));
                assert!((s1.values[[i, j]].norm() - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn noise_power_and_circularity() {
        let n = complex_circular_noise(1, 100_000, 0.1, 9, SamplingAxis::Realizations).unwrap();
        let p = n.data.iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e5;
        assert!((p - 0.01).abs() < 0.05 * 0.01);
        let pseudo: Complex64 = n.data.iter().map(|z| z * z).sum::<Complex64>() / 1e5;
        assert!(pseudo.norm() < 3.0 / (1e5f64).sqrt() * 0.01);
        let z = complex_circular_noise(2, 10, 0.0, 9, SamplingAxis::Realizations).unwrap();
        assert!(z.data.iter().all(|v| *v == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn seed_splitting_rule() {
        assert_eq!(split_seed(5, 0), 5);
        assert_eq!(split_seed(5, 1), 5 ^ 0x9E37_79B9_7F4A_7C15);
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn synthesized_fields_have_unit_variance(seed in any::<u64>(), len in 2.0f64..6.0) {
            let spec = RandomFieldSpec { correlation_length: len, side_length: 32.0, points: 64, seed };
            let f = gaussian_field(&spec).unwrap();
            prop_assert!(f.values.iter().all(|v| v.is_finite()));
            prop_assert!((f.variance() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn seed_splitting_is_deterministic_and_spreads(base in any::<u64>(), j in 0u64..1000) {
            prop_assert_eq!(split_seed(base, j), split_seed(base, j));
            prop_assert_ne!(split_seed(base, j), split_seed(base, j + 1));
        }
    }
}
