//! Independence diagnostics for the separation error bound, the RGO
//! resonance checks, and the correlation-sweep experiment that probes the
//! `dist(w_e, w_0) = O([M_s + M_n]^{1/4})` scaling.

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use ndarray_linalg::SVD;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ica::{extract_from, true_extraction_vectors, ExtractionOptions, Init, SignConstraint};
use crate::moments::{covariance, whiten, SampleMatrix, SamplingAxis};
use crate::optics::OpticsConfig;
use crate::rngfield::{circular_normal, complex_circular_noise, rng, split_seed};
use crate::scene::Scene;

const UNIT_TOLERANCE: f64 = 1e-8;

fn vec_norm(v: ArrayView1<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn inner(a: ArrayView1<Complex64>, b: ArrayView1<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `arccos(Re(x, y))` for unit vectors, with `(x, y) = x^H y`.
pub fn sphere_distance(x: ArrayView1<Complex64>, y: ArrayView1<Complex64>) -> Result<f64> {
    for v in [x, y] {
        let n = vec_norm(v);
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::NotUnitNorm { norm: n });
        }
    }
    if x.len() != y.len() {
        return Err(Error::GridMismatch(format!("vector lengths {} and {}", x.len(), y.len())));
    }
    Ok(inner(x, y).re.clamp(-1.0, 1.0).acos())
}

/// `w e^{i arg(w, w0)}`, so that `(w_e, w0) = |(w, w0)|`.
pub fn phase_align(w: ArrayView1<Complex64>, w0: ArrayView1<Complex64>) -> Array1<Complex64> {
    let ip = inner(w, w0);
    let ph = if ip.norm() > 0.0 { ip / ip.norm() } else { Complex64::new(1.0, 0.0) };
    w.mapv(|z| z * ph)
}

/// Sphere distance after aligning the global phase of `w` to `w0`.
pub fn phase_aligned_distance(w: ArrayView1<Complex64>, w0: ArrayView1<Complex64>) -> Result<f64> {
    sphere_distance(phase_align(w, w0).view(), w0)
}

/// The five contributions to `M_s` at their maximizing indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityTerms {
    pub distinguished: usize,
    /// `|E{|s_j|²|s_1|²} − E|s_j|² E|s_1|²|`.
    pub intensity: f64,
    /// `|E{s_j² s̄_1²} − E{s_j²} E{s̄_1²}|`.
    pub pseudo: f64,
    /// Index `j` maximizing the first pair.
    pub j: Option<usize>,
    /// `|E{s_j s_i s̄_1²} − E{s_j s_i} E{s̄_1²}|`.
    pub cross_pseudo: f64,
    /// `|E{s_j s̄_i |s_1|²} − E{s_j s_1} E{s̄_i s̄_1}|`.
    pub cross_intensity: f64,
    /// Indices `(i, j)` maximizing the second pair.
    pub ij: Option<(usize, usize)>,
    /// `max_{ab} |C_ab − δ_ab|`.
    pub covariance: f64,
    pub total: f64,
}

fn mean_of<F: Fn(usize) -> Complex64>(n: usize, f: F) -> Complex64 {
    (0..n).map(f).sum::<Complex64>() / n as f64
}

/// `M_s` of the source rows with `distinguished` playing the role of `s_1`.
pub fn m_s(sources: &SampleMatrix, distinguished: usize) -> Result<SeparabilityTerms> {
    let x = &sources.data;
    let (count, n) = x.dim();
    if count < 2 {
        return Err(Error::TooFewSources { needed: 2, got: count });
    }
    if distinguished >= count {
        return Err(Error::InvalidArgument(format!("distinguished index {distinguished} out of {count}")));
    }
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    let s1 = x.row(distinguished);
    let a1: Vec<f64> = s1.iter().map(|z| z.norm_sqr()).collect();
    let c1sq: Vec<Complex64> = s1.iter().map(|z| (z * z).conj()).collect();
    let e_a1 = a1.iter().sum::<f64>() / n as f64;
    let e_c1sq = mean_of(n, |k| c1sq[k]);
    let others: Vec<usize> = (0..count).filter(|&j| j != distinguished).collect();

    let mut best1 = (-1.0, 0.0, 0.0, None);
    for &j in &others {
        let sj = x.row(j);
        let t1 = (mean_of(n, |k| Complex64::new(sj[k].norm_sqr() * a1[k], 0.0)) - mean_of(n, |k| Complex64::new(sj[k].norm_sqr(), 0.0)) * e_a1).norm();
        let t2 = (mean_of(n, |k| sj[k] * sj[k] * c1sq[k]) - mean_of(n, |k| sj[k] * sj[k]) * e_c1sq).norm();
        if t1 + t2 > best1.0 {
            best1 = (t1 + t2, t1, t2, Some(j));
        }
    }

    let mut best2 = (0.0, 0.0, 0.0, None);
    for &i in &others {
        for &j in &others {
            if i == j {
                continue;
            }
            let (si, sj) = (x.row(i), x.row(j));
            let t3 = (mean_of(n, |k| sj[k] * si[k] * c1sq[k]) - mean_of(n, |k| sj[k] * si[k]) * e_c1sq).norm();
            let t4 = (mean_of(n, |k| sj[k] * si[k].conj() * a1[k]) - mean_of(n, |k| sj[k] * s1[k]) * mean_of(n, |k| (si[k] * s1[k]).conj())).norm();
            if best2.3.is_none() || t3 + t4 > best2.0 {
                best2 = (t3 + t4, t3, t4, Some((i, j)));
            }
        }
    }

    let c = covariance(x);
    let mut cov = 0.0f64;
    for ((a, b), v) in c.indexed_iter() {
        let d = if a == b { v - 1.0 } else { *v };
        cov = cov.max(d.norm());
    }
    Ok(SeparabilityTerms {
        distinguished,
        intensity: best1.1,
        pseudo: best1.2,
        j: best1.3,
        cross_pseudo: best2.1,
        cross_intensity: best2.2,
        ij: best2.3,
        covariance: cov,
        total: best1.0 + best2.0 + cov,
    })
}

/// How `M_n` reads its moments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseMomentForm {
    /// `max_j E|n_j|² + E|n_j|⁴`.
    #[default]
    Modulus,
    /// `max_j |E{n_j²} + E{n_j⁴}|`.
    Literal,
}

pub fn m_n(noise: &SampleMatrix, form: NoiseMomentForm) -> f64 {
    let n = noise.samples();
    if n == 0 {
        return 0.0;
    }
    noise
        .data
        .rows()
        .into_iter()
        .map(|row| match form {
            NoiseMomentForm::Modulus => row.iter().map(|z| z.norm_sqr() + z.norm_sqr() * z.norm_sqr()).sum::<f64>() / n as f64,
            NoiseMomentForm::Literal => (row.iter().map(|z| z * z + z.powi(4)).sum::<Complex64>() / n as f64).norm(),
        })
        .fold(0.0, f64::max)
}

/// `|E|s|⁴ − 2 − |E s²|²|` of each row (rows of unit second moment).
pub fn kurtosis_gaps(sources: &SampleMatrix) -> Vec<f64> {
    let n = sources.samples() as f64;
    sources
        .data
        .rows()
        .into_iter()
        .map(|row| {
            let m4 = row.iter().map(|z| z.norm_sqr() * z.norm_sqr()).sum::<f64>() / n;
            let p = row.iter().map(|z| z * z).sum::<Complex64>() / n;
            (m4 - 2.0 - p.norm_sqr()).abs()
        })
        .collect()
}

/// Full report for one choice of distinguished source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityReport {
    pub terms: SeparabilityTerms,
    pub m_n: f64,
    pub kurtosis_gaps: Vec<f64>,
}

pub fn separability_report(sources: &SampleMatrix, noise: Option<&SampleMatrix>, distinguished: usize, form: NoiseMomentForm) -> Result<SeparabilityReport> {
    Ok(SeparabilityReport {
        terms: m_s(sources, distinguished)?,
        m_n: noise.map_or(0.0, |n| m_n(n, form)),
        kurtosis_gaps: kurtosis_gaps(sources),
    })
}

/// Geometric conditions under which RGO Green's functions stop being separable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RgoCheck {
    pub distinguished: usize,
    pub ell_c_out: f64,
    /// Pairs closer than `ℓ_{c,out}`.
    pub close_pairs: Vec<(usize, usize)>,
    /// The distinguished scatterer lies within `ℓ_{c,out}` of the origin.
    pub near_origin: bool,
    /// `(i, j, 1)` with `|x_i + x_j − 2x_1| < ℓ_{c,out}`.
    pub resonances: Vec<(usize, usize, usize)>,
}

impl RgoCheck {
    pub fn is_clean(&self) -> bool {
        self.close_pairs.is_empty() && !self.near_origin && self.resonances.is_empty()
    }
}

pub fn rgo_separability_check(scene: &Scene, cfg: &OpticsConfig, distinguished: usize) -> Result<RgoCheck> {
    let n = scene.len();
    if distinguished >= n {
        return Err(Error::InvalidArgument(format!("distinguished index {distinguished} out of {n}")));
    }
    let l = cfg.ell_c_out();
    let x = &scene.positions;
    let dist = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let mut close_pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if dist(x[i], x[j]) < l {
                close_pairs.push((i, j));
            }
        }
    }
    let x1 = x[distinguished];
    let mut resonances = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if i == distinguished || j == distinguished {
                continue;
            }
            let r = [x[i][0] + x[j][0] - 2.0 * x1[0], x[i][1] + x[j][1] - 2.0 * x1[1]];
            if r[0].hypot(r[1]) < l {
                resonances.push((i, j, distinguished));
            }
        }
    }
    Ok(RgoCheck { distinguished, ell_c_out: l, close_pairs, near_origin: x1[0].hypot(x1[1]) < l, resonances })
}

/// [`rgo_separability_check`] for every choice of distinguished scatterer.
pub fn rgo_check_all(scene: &Scene, cfg: &OpticsConfig) -> Result<Vec<RgoCheck>> {
    (0..scene.len()).map(|d| rgo_separability_check(scene, cfg, d)).collect()
}

/// Whether any distinguished choice exhibits a resonant triple.
pub fn has_resonance(scene: &Scene, cfg: &OpticsConfig) -> Result<bool> {
    Ok(rgo_check_all(scene, cfg)?.iter().any(|c| !c.resonances.is_empty()))
}

/// Parameters of the correlation/noise sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremSweep {
    pub correlations: Vec<f64>,
    pub noise_sigmas: Vec<f64>,
    pub seeds: usize,
    pub samples: usize,
    pub sources: usize,
    pub seed: u64,
}

impl Default for TheoremSweep {
    fn default() -> Self {
        Self {
            correlations: vec![0.05, 0.1, 0.15, 0.2, 0.3, 0.4],
            noise_sigmas: vec![0.0],
            seeds: 10,
            samples: 100_000,
            sources: 3,
            seed: 1,
        }
    }
}

/// Minimum kurtosis gap of the distinguished source for a sweep point to count.
pub const KURTOSIS_GAP_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremRow {
    pub correlation: f64,
    pub noise_sigma: f64,
    pub seed_index: usize,
    pub intensity: f64,
    pub pseudo: f64,
    pub cross_pseudo: f64,
    pub cross_intensity: f64,
    pub covariance: f64,
    pub m_s: f64,
    pub m_n: f64,
    pub distance: f64,
    pub kurtosis_gap: f64,
    pub iterations: usize,
    /// Empty when the point is valid.
    pub flag: String,
}

/// One sweep point: `x = As + n` with `s_2 = ρ s_1 + √(1−ρ²) z`, extraction of
/// the correlated source started at its true vector `w_0`.
pub fn theorem_point(sweep: &TheoremSweep, correlation: f64, noise_sigma: f64, seed_index: usize) -> Result<TheoremRow> {
    if sweep.sources < 2 {
        return Err(Error::TooFewSources { needed: 2, got: sweep.sources });
    }
    if !(0.0..1.0).contains(&correlation) {
        return Err(Error::InvalidArgument(format!("correlation {correlation} outside [0, 1)")));
    }
    let (count, n) = (sweep.sources, sweep.samples);
    let seed = split_seed(split_seed(sweep.seed, seed_index as u64), (correlation.to_bits()) ^ noise_sigma.to_bits().rotate_left(17));
    let mut r = rng(seed);
    let mut s = Array2::from_shape_fn((count, n), |_| Complex64::from_polar(1.0, r.random_range(0.0..std::f64::consts::TAU)));
    let c = (1.0 - correlation * correlation).sqrt();
    for k in 0..n {
        s[[1, k]] = correlation * s[[0, k]] + c * s[[1, k]];
    }
    let sources = SampleMatrix::new(s, SamplingAxis::Realizations).normalized_rows();

    let mixing = loop {
        let a = Array2::from_shape_fn((count, count), |_| circular_normal(&mut r));
        let (_, sv, _) = a.svd(false, false)?;
        if sv[0] / sv[count - 1] < 10.0 {
            break a;
        }
    };
    let noise = complex_circular_noise(count, n, noise_sigma, split_seed(seed, 1), SamplingAxis::Realizations)?;
    let x = mixing.dot(&sources.data) + &noise.data;
    let white = whiten(&SampleMatrix::new(x, SamplingAxis::Realizations), count)?;
    let w0 = true_extraction_vectors(&white.map.dot(&mixing))?.swap_remove(1);

    let report = separability_report(&sources, Some(&noise), 1, NoiseMomentForm::Modulus)?;
    let gap = report.kurtosis_gaps[1];
    let mut row = TheoremRow {
        correlation,
        noise_sigma,
        seed_index,
        intensity: report.terms.intensity,
        pseudo: report.terms.pseudo,
        cross_pseudo: report.terms.cross_pseudo,
        cross_intensity: report.terms.cross_intensity,
        covariance: report.terms.covariance,
        m_s: report.terms.total,
        m_n: report.m_n,
        distance: f64::NAN,
        kurtosis_gap: gap,
        iterations: 0,
        flag: String::new(),
    };
    if gap < KURTOSIS_GAP_THRESHOLD {
        row.flag = format!("kurtosis gap {gap:.3} below {KURTOSIS_GAP_THRESHOLD}");
        return Ok(row);
    }
    let opts = ExtractionOptions { sign: SignConstraint::Free, init: Init::Given(w0.clone()), restarts: 1, ..Default::default() };
    match extract_from(&white.data, &opts) {
        Ok(ex) => {
            row.distance = phase_aligned_distance(ex.w.view(), w0.view())?;
            row.iterations = ex.iterations;
            if !ex.converged {
                row.flag = "not converged".into();
            }
        }
        Err(e) => row.flag = e.to_string(),
    }
    Ok(row)
}

/// All sweep points, ordered by (noise, correlation, seed).
pub fn theorem_scaling_experiment(sweep: &TheoremSweep) -> Result<Vec<TheoremRow>> {
    let mut jobs = Vec::new();
    for &sigma in &sweep.noise_sigmas {
        for &rho in &sweep.correlations {
            for s in 0..sweep.seeds {
                jobs.push((rho, sigma, s));
            }
        }
    }
    jobs.par_iter().map(|&(rho, sigma, s)| theorem_point(sweep, rho, sigma, s)).collect()
}

/// Medians of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMedian {
    pub correlation: f64,
    pub noise_sigma: f64,
    pub m: f64,
    pub distance: f64,
    pub valid: usize,
}

/// Per-point medians plus the fitted law `dist ≈ C M^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub medians: Vec<SweepMedian>,
    /// `max median(dist)/median(M)^{1/4}` over the sweep.
    pub constant: f64,
    /// Least-squares slope of `ln dist` against `ln M` over the medians.
    pub exponent: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

pub fn summarize(rows: &[TheoremRow]) -> SweepSummary {
    let mut keys: Vec<(f64, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| *k == (r.correlation, r.noise_sigma)) {
            keys.push((r.correlation, r.noise_sigma));
        }
    }
    let medians: Vec<SweepMedian> = keys
        .iter()
        .map(|&(rho, sigma)| {
            let sel: Vec<&TheoremRow> = rows.iter().filter(|r| r.correlation == rho && r.noise_sigma == sigma && r.flag.is_empty() && r.distance.is_finite()).collect();
            SweepMedian {
                correlation: rho,
                noise_sigma: sigma,
                m: median(sel.iter().map(|r| r.m_s + r.m_n).collect()),
                distance: median(sel.iter().map(|r| r.distance).collect()),
                valid: sel.len(),
            }
        })
        .collect();
    let usable: Vec<&SweepMedian> = medians.iter().filter(|m| m.valid > 0 && m.m > 0.0 && m.distance > 0.0).collect();
    let constant = usable.iter().map(|m| m.distance / m.m.powf(0.25)).fold(0.0, f64::max);
    let exponent = if usable.len() >= 2 {
        let lx: Vec<f64> = usable.iter().map(|m| m.m.ln()).collect();
        let ly: Vec<f64> = usable.iter().map(|m| m.distance.ln()).collect();
        let mx = lx.iter().sum::<f64>() / lx.len() as f64;
        let my = ly.iter().sum::<f64>() / ly.len() as f64;
        let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    SweepSummary { medians, constant, exponent }
}

pub fn write_theorem_csv(rows: &[TheoremRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
