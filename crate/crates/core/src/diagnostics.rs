//! Statistical checks of the simulated optics: speckle circularity and
//! coherence, and the phase-screen coherence law.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{Fft2, Sign};
use crate::optics::{Illuminator, OpticsConfig, Screen};
use crate::rngfield::{gaussian_field_with, split_seed};

/// Ensemble statistics of `W(·, 0)` over illumination seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeckleStats {
    pub seeds: usize,
    /// `|E{(Re W)²} − E{(Im W)²}| / E{|W|²}`.
    pub variance_imbalance: f64,
    /// `|E{Re W · Im W}| / E{|W|²}`.
    pub cross_correlation: f64,
    /// `E{|W|⁴}/(E{|W|²})²`.
    pub fourth_moment_ratio: f64,
    /// Radius where the radially averaged coherence first drops below one half.
    pub half_coherence_radius: f64,
    /// `λ/2NA`.
    pub expected_radius: f64,
    pub pitch: f64,
    /// Radially averaged `|E{W(x)W*(x+r)}|/E{|W|²}` at integer pixel radii.
    pub coherence: Vec<f64>,
}

impl SpeckleStats {
    pub fn is_circular(&self, tolerance: f64) -> bool {
        self.variance_imbalance < tolerance && self.cross_correlation < tolerance
    }

    pub fn radius_within_one_pixel(&self) -> bool {
        (self.half_coherence_radius - self.expected_radius).abs() <= self.pitch
    }
}

/// Where [`speckle_statistics`] looks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeckleProbe {
    /// Probe center on the sample plane.
    pub center: [f64; 2],
    /// Moments are pooled over `(2·half_patch+1)²` points.
    pub half_patch: usize,
    /// Side in pixels of the square used for the coherence estimate.
    pub patch: usize,
}

/// Default probe offset; the unscattered part of the SLM field focuses near the origin.
pub const DEFAULT_PROBE_CENTER: [f64; 2] = [6.0, 6.0];

impl Default for SpeckleProbe {
    fn default() -> Self {
        Self { center: DEFAULT_PROBE_CENTER, half_patch: 8, patch: 64 }
    }
}

/// Moments pooled over a block of points and coherence from the zero-padded
/// autocorrelation of a square patch, both around `probe.center`.
pub fn speckle_statistics(cfg: &OpticsConfig, seeds: &[u64], probe: &SpeckleProbe) -> Result<SpeckleStats> {
    if seeds.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = cfg.grid_points;
    let grid = cfg.grid();
    let (half_patch, patch) = (probe.half_patch, probe.patch);
    let (ci, cj) = match (grid.nearest_index(probe.center[0]), grid.nearest_index(probe.center[1])) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::InvalidArgument("probe center outside the grid".into())),
    };
    let reach = half_patch.max(patch / 2 + patch % 2);
    if patch == 0 || ci < reach || cj < reach || ci + reach >= n || cj + reach >= n {
        return Err(Error::InvalidArgument(format!("probe patch {patch} / half patch {half_patch} does not fit the grid")));
    }
    let screen = Screen::generate(cfg)?;
    let illuminator = Illuminator::new(cfg, &screen)?;
    let pad = 2 * patch;
    let fft = Fft2::new(pad);

    struct Acc {
        rr: f64,
        ii: f64,
        ri: f64,
        p2: f64,
        p4: f64,
        count: f64,
        corr: Array2<Complex64>,
    }
    let partial: Vec<Acc> = seeds
        .par_iter()
        .map(|&s| -> Result<Acc> {
            let w = illuminator.field(s)?.values;
            let mut acc = Acc { rr: 0.0, ii: 0.0, ri: 0.0, p2: 0.0, p4: 0.0, count: 0.0, corr: Array2::zeros((pad, pad)) };
            for i in ci - half_patch..=ci + half_patch {
                for j in cj - half_patch..=cj + half_patch {
                    let z = w[[i, j]];
                    acc.rr += z.re * z.re;
                    acc.ii += z.im * z.im;
                    acc.ri += z.re * z.im;
                    acc.p2 += z.norm_sqr();
                    acc.p4 += z.norm_sqr().powi(2);
                    acc.count += 1.0;
                }
            }
            let (li, lj) = (ci - patch / 2, cj - patch / 2);
            let mut padded = Array2::<Complex64>::zeros((pad, pad));
            for a in 0..patch {
                for b in 0..patch {
                    padded[[a, b]] = w[[li + a, lj + b]];
                }
            }
            let spec = fft.centered(padded.view(), Sign::Negative).mapv(|z| Complex64::new(z.norm_sqr(), 0.0));
            acc.corr = fft.centered(spec.view(), Sign::Positive);
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let (mut rr, mut ii, mut ri, mut p2, mut p4, mut count) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut corr = Array2::<Complex64>::zeros((pad, pad));
    for a in &partial {
        rr += a.rr;
        ii += a.ii;
        ri += a.ri;
        p2 += a.p2;
        p4 += a.p4;
        count += a.count;
        corr += &a.corr;
    }
    let e2 = p2 / count;

    // the centered transform puts lag 0 at index pad/2; overlap count normalizes the estimate
    let mid = pad / 2;
    let max_r = patch / 2;
    let mut sums = vec![0.0; max_r + 1];
    let mut hits = vec![0.0; max_r + 1];
    for a in 0..pad {
        for b in 0..pad {
            let (da, db) = (a as isize - mid as isize, b as isize - mid as isize);
            let r = ((da * da + db * db) as f64).sqrt().round() as usize;
            if r > max_r {
                continue;
            }
            let overlap = ((patch as isize - da.abs()) * (patch as isize - db.abs())) as f64;
            if overlap <= 0.0 {
                continue;
            }
            sums[r] += corr[[a, b]].norm() / overlap;
            hits[r] += 1.0;
        }
    }
    let raw: Vec<f64> = sums.iter().zip(&hits).map(|(s, h)| if *h > 0.0 { s / h } else { 0.0 }).collect();
    let coherence: Vec<f64> = raw.iter().map(|v| v / raw[0]).collect();
    let pitch = cfg.pitch();
    let half = coherence
        .windows(2)
        .enumerate()
        .find(|(_, w)| w[1] < 0.5)
        .map(|(r, w)| (r as f64 + (w[0] - 0.5) / (w[0] - w[1])) * pitch)
        .unwrap_or(max_r as f64 * pitch);

    Ok(SpeckleStats {
        seeds: seeds.len(),
        variance_imbalance: ((rr - ii) / count).abs() / e2,
        cross_correlation: (ri / count).abs() / e2,
        fourth_moment_ratio: (p4 / count) / (e2 * e2),
        half_coherence_radius: half,
        expected_radius: cfg.lambda / (2.0 * cfg.na),
        pitch,
        coherence,
    })
}

/// `E{e^{ik(S(v) − S(v+r))}}` at lags `r = m·pitch` along both axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreenCoherence {
    pub lags: Vec<f64>,
    pub coherence: Vec<f64>,
    /// `l_c` from the small-lag fit `−ln|coh| ≈ r²/l_c²`.
    pub fitted_length: f64,
    /// `2√2 ℓ_0/(kσ)`.
    pub predicted_length: f64,
}

impl ScreenCoherence {
    pub fn relative_error(&self) -> f64 {
        (self.fitted_length - self.predicted_length).abs() / self.predicted_length
    }
}

/// Lags up to `max_lag` (in units of the screen scale length `ℓ_0`), averaged
/// over the central half of the grid and over `realizations` screens drawn
/// from `cfg.screen_seed`.
pub fn screen_coherence(cfg: &OpticsConfig, realizations: usize, max_lag: f64) -> Result<ScreenCoherence> {
    if realizations == 0 {
        return Err(Error::EmptySamples);
    }
    let pitch = cfg.pitch();
    let lags_px = ((max_lag * cfg.screen_scale) / pitch).floor() as usize;
    if lags_px == 0 {
        return Err(Error::InvalidArgument("maximum lag below one pixel".into()));
    }
    let k = cfg.return_wavenumber();
    let sigma = cfg.screen_sigma();
    let spec = cfg.screen_spec();
    let fft = Fft2::new(spec.points);
    let n = spec.points;
    let (lo, hi) = (n / 4, 3 * n / 4);
    let per: Vec<Vec<Complex64>> = (0..realizations as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<Complex64>> {
            let mut s = spec;
            s.seed = split_seed(cfg.screen_seed, r);
            let v = gaussian_field_with(&s, &fft)?.values;
            Ok((1..=lags_px)
                .map(|m| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut cnt = 0.0;
                    for i in lo..hi {
                        for j in lo..hi {
                            for (a, b) in [(i + m, j), (i, j + m)] {
                                acc += Complex64::from_polar(1.0, k * sigma * (v[[i, j]] - v[[a, b]]));
                                cnt += 1.0;
                            }
                        }
                    }
                    acc / cnt
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let lags: Vec<f64> = (1..=lags_px).map(|m| m as f64 * pitch).collect();
    let coherence: Vec<f64> = (0..lags_px).map(|m| (per.iter().map(|p| p[m]).sum::<Complex64>() / realizations as f64).norm()).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for (r, c) in lags.iter().zip(&coherence) {
        num += r * r * -c.ln();
        den += r.powi(4);
    }
    let slope = num / den;
    Ok(ScreenCoherence { lags, coherence, fitted_length: slope.sqrt().recip(), predicted_length: cfg.screen_l_c() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::Modality;

    #[test]
    fn speckle_is_circular_with_expected_coherence() {
        let cfg = OpticsConfig::desk(Modality::Shg, 0.75);
        let seeds: Vec<u64> = (0..40).collect();
        let s = speckle_statistics(&cfg, &seeds, &SpeckleProbe::default()).unwrap();
        assert!(s.is_circular(0.1), "{s:?}");
        assert!((s.fourth_moment_ratio - 2.0).abs() < 0.2, "{}", s.fourth_moment_ratio);
        assert!(s.radius_within_one_pixel(), "{} vs {}", s.half_coherence_radius, s.expected_radius);
        assert!((s.coherence[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ballistic_focus_breaks_circularity_at_the_origin() {
        let mut cfg = OpticsConfig::desk(Modality::Shg, 0.75);
        cfg.screen_k0_sigma = 0.0;
        let seeds: Vec<u64> = (0..40).collect();
        let s = speckle_statistics(&cfg, &seeds, &SpeckleProbe { center: [0.0, 0.0], ..Default::default() }).unwrap();
        assert!(s.fourth_moment_ratio > 2.5, "{s:?}");
    }

    #[test]
    fn screen_coherence_follows_the_gaussian_law() {
        let mut cfg = OpticsConfig::desk(Modality::Shg, 0.75);
        cfg.screen_k0_sigma = 1.0;
        let c = screen_coherence(&cfg, 2, 0.5).unwrap();
        assert!(c.relative_error() < 0.15, "{c:?}");
        assert!(c.coherence.windows(2).all(|w| w[1] <= w[0] + 1e-3));
    }
}
