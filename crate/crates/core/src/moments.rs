//! Empirical statistics over a sampling axis, pre-whitening, kurtosis and an
//! Isserlis (Wick) oracle for moments of jointly Gaussian complex variables.

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use ndarray_linalg::{JobSvd, SVDDC};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the columns of a [`SampleMatrix`] index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingAxis {
    /// Independent realizations (e.g. illuminations).
    Realizations,
    /// Camera pixels treated as sampling points.
    CameraPixels,
}

/// `N × N_sa` complex observations; row `i` is variable `i`, columns are samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub data: Array2<Complex64>,
    pub axis: SamplingAxis,
}

impl SampleMatrix {
    pub fn new(data: Array2<Complex64>, axis: SamplingAxis) -> Self {
        Self { data, axis }
    }

    pub fn variables(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, Complex64> {
        self.data.row(i)
    }

    /// Rescales each row to unit empirical second moment.
    pub fn normalized_rows(&self) -> Self {
        let mut data = self.data.clone();
        for mut row in data.rows_mut() {
            let p = row.iter().map(|z| z.norm_sqr()).sum::<f64>() / row.len() as f64;
            if p > 0.0 {
                row.mapv_inplace(|z| z / p.sqrt());
            }
        }
        Self { data, axis: self.axis }
    }
}

/// `(1/N_sa) Σ_j samples_j`.
pub fn empirical_expectation<'a, I>(samples: I) -> Result<Complex64>
where
    I: IntoIterator<Item = &'a Complex64>,
{
    let mut n = 0usize;
    let mut acc = Complex64::new(0.0, 0.0);
    for v in samples {
        acc += v;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    Ok(acc / n as f64)
}

/// Mean of a product-free sample vector (infallible convenience for non-empty data).
pub fn mean(v: ArrayView1<Complex64>) -> Complex64 {
    v.sum() / v.len() as f64
}

/// Empirical covariance `E{x x*}` of the rows (no centering).
pub fn covariance(x: &Array2<Complex64>) -> Array2<Complex64> {
    let n = x.ncols() as f64;
    let xh = x.t().mapv(|z| z.conj());
    x.dot(&xh) / n
}

/// Data whitened to the retained dimension together with its map.
#[derive(Debug, Clone)]
pub struct WhitenedData {
    /// `N × N_sa`, empirical covariance identity.
    pub data: Array2<Complex64>,
    /// `N × N_raw`: `data = map · (raw - mean)`.
    pub map: Array2<Complex64>,
    /// Row means removed from the raw data.
    pub mean: Array1<Complex64>,
    /// All singular values of the centered raw data divided by `√N_sa`, descending.
    pub singular_values: Array1<f64>,
    pub axis: SamplingAxis,
}

impl WhitenedData {
    pub fn dimension(&self) -> usize {
        self.data.nrows()
    }

    pub fn samples(&self) -> usize {
        self.data.ncols()
    }

    /// Wraps data that is already white (identity map, zero mean).
    pub fn assume_white(data: Array2<Complex64>, axis: SamplingAxis) -> Self {
        let n = data.nrows();
        Self {
            map: Array2::eye(n),
            mean: Array1::zeros(n),
            singular_values: Array1::ones(n),
            data,
            axis,
        }
    }
}

const RANK_TOLERANCE: f64 = 1e-6;

/// Centers the rows and projects onto the top-`n` singular subspace with unit covariance.
pub fn whiten(x: &SampleMatrix, n: usize) -> Result<WhitenedData> {
    let raw = &x.data;
    let (rows, nsa) = raw.dim();
    if nsa == 0 {
        return Err(Error::EmptySamples);
    }
    if n == 0 || n > rows {
        return Err(Error::RankDeficient { requested: n, rank: rows.min(nsa) });
    }
    let mean = raw.mean_axis(Axis(1)).ok_or(Error::EmptySamples)?;
    let centered = raw - &mean.view().insert_axis(Axis(1));
    let scaled = &centered / (nsa as f64).sqrt();
    let (u, sv, _) = scaled.svddc(JobSvd::Some)?;
    let u = u.ok_or_else(|| Error::Linalg("svd returned no left vectors".into()))?;
    // LAPACK returns singular values in descending order; ties keep index order.
    let s1 = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > RANK_TOLERANCE * s1).count();
    if s1 == 0.0 || rank < n {
        return Err(Error::RankDeficient { requested: n, rank });
    }
    let mut map = Array2::zeros((n, rows));
    for k in 0..n {
        let inv = 1.0 / sv[k];
        for r in 0..rows {
            map[[k, r]] = u[[r, k]].conj() * inv;
        }
    }
    let data = map.dot(&centered);
    Ok(WhitenedData { data, map, mean, singular_values: sv, axis: x.axis })
}

/// Kurtosis of `y = w* x` and its ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KurtosisValue {
    /// Normalized contrast `[E|y|⁴ − 2(E|y|²)² − |E y²|²]/(E|y|²)²`.
    pub value: f64,
    pub fourth_moment: f64,
    pub second_moment: f64,
    pub pseudo_variance: Complex64,
}

/// Projection `y_t = Σ_i conj(w_i) x_{i,t}`.
pub fn project(w: ArrayView1<Complex64>, x: &Array2<Complex64>) -> Array1<Complex64> {
    let wc = w.mapv(|z| z.conj());
    wc.dot(x)
}

/// Kurtosis statistics of a sample vector.
pub fn kurtosis_of(y: ArrayView1<Complex64>) -> Result<KurtosisValue> {
    let n = y.len();
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    let (mut m2, mut m4, mut p) = (0.0, 0.0, Complex64::new(0.0, 0.0));
    for z in y {
        let a = z.norm_sqr();
        m2 += a;
        m4 += a * a;
        p += z * z;
    }
    let nf = n as f64;
    let (m2, m4, p) = (m2 / nf, m4 / nf, p / nf);
    if m2 == 0.0 {
        return Err(Error::ZeroData);
    }
    let value = (m4 - 2.0 * m2 * m2 - p.norm_sqr()) / (m2 * m2);
    Ok(KurtosisValue { value, fourth_moment: m4, second_moment: m2, pseudo_variance: p })
}

/// Kurtosis `K(w)` of `y = w* x` for a unit vector `w` and whitened data.
pub fn kurtosis(w: ArrayView1<Complex64>, x: &WhitenedData) -> Result<KurtosisValue> {
    let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnitNorm { norm });
    }
    if w.len() != x.dimension() {
        return Err(Error::InvalidArgument(format!("vector length {} vs data dimension {}", w.len(), x.dimension())));
    }
    kurtosis_of(project(w, &x.data).view())
}

/// One factor `W_index` or `conj(W_index)` of a Gaussian moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Factor {
    pub index: usize,
    pub conjugated: bool,
}

impl Factor {
    pub fn plain(index: usize) -> Self {
        Self { index, conjugated: false }
    }

    pub fn conj(index: usize) -> Self {
        Self { index, conjugated: true }
    }
}

/// Second-order description of zero-mean jointly Gaussian complex variables.
#[derive(Debug, Clone)]
pub struct GaussianMoments {
    /// `cov[a][b] = E{W_a conj(W_b)}` (Hermitian).
    pub cov: Array2<Complex64>,
    /// `pseudo[a][b] = E{W_a W_b}` (symmetric; zero for circular variables).
    pub pseudo: Array2<Complex64>,
}

impl GaussianMoments {
    pub fn circular(cov: Array2<Complex64>) -> Self {
        let n = cov.nrows();
        Self { cov, pseudo: Array2::zeros((n, n)) }
    }

    fn pair(&self, a: Factor, b: Factor) -> Complex64 {
        match (a.conjugated, b.conjugated) {
            (false, true) => self.cov[[a.index, b.index]],
            (true, false) => self.cov[[b.index, a.index]],
            (false, false) => self.pseudo[[a.index, b.index]],
            (true, true) => self.pseudo[[a.index, b.index]].conj(),
        }
    }
}

/// `E{Π factors}` by summing products of pair moments over all perfect matchings.
pub fn isserlis_moment(moments: &GaussianMoments, pattern: &[Factor]) -> Result<Complex64> {
    if pattern.len() % 2 == 1 {
        return Err(Error::OddOrder(pattern.len()));
    }
    if pattern.len() > 8 {
        return Err(Error::OrderTooHigh(pattern.len()));
    }
    Ok(matchings(moments, pattern))
}

fn matchings(m: &GaussianMoments, rest: &[Factor]) -> Complex64 {
    if rest.is_empty() {
        return Complex64::new(1.0, 0.0);
    }
    let first = rest[0];
    let mut total = Complex64::new(0.0, 0.0);
    for k in 1..rest.len() {
        let p = m.pair(first, rest[k]);
        if p == Complex64::new(0.0, 0.0) {
            continue;
        }
        let remaining: Vec<Factor> = rest[1..].iter().enumerate().filter(|(i, _)| i + 1 != k).map(|(_, f)| *f).collect();
        total += p * matchings(m, &remaining);
    }
    total
}

/// Empirical `E{Π factors}` from samples (rows indexed by factor index).
pub fn empirical_moment(x: &Array2<Complex64>, pattern: &[Factor]) -> Complex64 {
    let nsa = x.ncols();
    let mut acc = Complex64::new(0.0, 0.0);
    for t in 0..nsa {
        let mut prod = Complex64::new(1.0, 0.0);
        for f in pattern {
            let v = x[[f.index, t]];
            prod *= if f.conjugated { v.conj() } else { v };
        }
        acc += prod;
    }
    acc / nsa as f64
}

/// Keeps the first `n` rows of a matrix (helper for truncated views).
pub fn leading_rows(x: &Array2<Complex64>, n: usize) -> Array2<Complex64> {
    x.slice(s![..n, ..]).to_owned()
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::rngfield::{circular_normal, rng};
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn kurtosis_decomposes_at_unit_power(seed in any::<u64>(), n in 16usize..400) {
            let mut r = rng(seed);
            let y = Array1::from_shape_fn(n, |_| circular_normal(&mut r) + circular_normal(&mut r).powi(2) * 0.3);
            let m2 = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
            let y = y.mapv(|z| z / m2.sqrt());
            let k = kurtosis_of(y.view()).unwrap();
            prop_assert!((k.second_moment - 1.0).abs() < 1e-12);
            prop_assert!((k.value - (k.fourth_moment - 2.0 - k.pseudo_variance.norm_sqr())).abs() < 1e-10);
        }

        #[test]
        fn whitened_covariance_is_identity(seed in any::<u64>(), dim in 1usize..5) {
            let mut r = rng(seed);
            let a = Array2::from_shape_fn((dim + 1, dim), |_| circular_normal(&mut r));
            let s = Array2::from_shape_fn((dim, 500), |_| circular_normal(&mut r));
            let w = whiten(&SampleMatrix::new(a.dot(&s), SamplingAxis::Realizations), dim).unwrap();
            let err = (&covariance(&w.data) - &Array2::<Complex64>::eye(dim)).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(err < 1e-10, "{}", err);
        }

        #[test]
        fn isserlis_ignores_factor_order(seed in any::<u64>()) {
            let mut r = rng(seed);
            let l = Array2::from_shape_fn((3, 3), |_| circular_normal(&mut r));
            let cov = l.dot(&l.t().mapv(|z| z.conj()));
            let m = GaussianMoments::circular(cov);
            let pat = [Factor::plain(0), Factor::conj(1), Factor::plain(2), Factor::conj(2), Factor::plain(1), Factor::conj(0)];
            let mut rev = pat;
            rev.reverse();
            let a = isserlis_moment(&m, &pat).unwrap();
            let b = isserlis_moment(&m, &rev).unwrap();
            prop_assert!((a - b).norm() < 1e-9 * (1.0 + a.norm()));
        }
    }
}
