//! DORT and improved-DORT imaging from the reflection matrix.
//!
//! Images live on the grid dual to the camera: with `M` camera pixels per axis
//! at pitch `Δu`, the image pitch is `2π z_s/(k M Δu)` and back-propagation
//! `∫ f(u) e^{iky·u/z_s} du` is a centered DFT of size `M` weighted by `Δu²`.

use ndarray::{Array1, Array2, ArrayView1};
use ndarray_linalg::{JobSvd, SVDDC};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{Fft2, Sign};
use crate::optics::Camera;

/// How many singular triplets to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncation {
    Fixed(usize),
    /// Keep `σ_k > τ σ_1`.
    Relative(f64),
}

#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    /// `N_p × N`.
    pub u: Array2<Complex64>,
    pub singular_values: Array1<f64>,
    /// `N_r × N`.
    pub v: Array2<Complex64>,
    pub retained: usize,
    /// Absolute singular-value cut that was applied.
    pub threshold: f64,
}

const RANK_TOLERANCE: f64 = 1e-10;

pub fn svd_truncate(r: &Array2<Complex64>, policy: Truncation) -> Result<TruncatedSvd> {
    if r.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Err(Error::ZeroData);
    }
    let (u, s, vt) = r.svddc(JobSvd::Some)?;
    let u = u.ok_or_else(|| Error::Linalg("svd returned no left vectors".into()))?;
    let vt = vt.ok_or_else(|| Error::Linalg("svd returned no right vectors".into()))?;
    let rank = s.iter().filter(|&&v| v > RANK_TOLERANCE * s[0]).count();
    let (retained, threshold) = match policy {
        Truncation::Fixed(n) => {
            if n == 0 || n > rank {
                return Err(Error::RankDeficient { requested: n, rank });
            }
            (n, s[n - 1])
        }
        Truncation::Relative(tau) => (s.iter().filter(|&&v| v > tau * s[0]).count().max(1), tau * s[0]),
    };
    let v = Array2::from_shape_fn((vt.ncols(), retained), |(j, k)| vt[[k, j]].conj());
    Ok(TruncatedSvd {
        u: u.slice(ndarray::s![.., ..retained]).to_owned(),
        singular_values: s.slice(ndarray::s![..retained]).to_owned(),
        v,
        retained,
        threshold,
    })
}

/// A local maximum of an image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: (usize, usize),
    pub position: [f64; 2],
    pub value: f64,
}

/// Real image on a centered square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    pub values: Array2<f64>,
    pub pitch: f64,
}

impl ImageGrid {
    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn window(&self) -> f64 {
        self.size() as f64 * self.pitch
    }

    pub fn position(&self, index: (usize, usize)) -> [f64; 2] {
        let c = (self.size() / 2) as f64;
        [(index.0 as f64 - c) * self.pitch, (index.1 as f64 - c) * self.pitch]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    pub fn normalized(mut self) -> Self {
        let m = self.max();
        if m > 0.0 {
            self.values.mapv_inplace(|v| v / m);
        }
        self
    }

    /// Local maxima (8-neighbourhood) at or above `fraction` of the global maximum, strongest first.
    pub fn peaks(&self, fraction: f64) -> Vec<Peak> {
        let n = self.size();
        let floor = fraction * self.max();
        let mut out = Vec::new();
        if self.max() <= 0.0 {
            return out;
        }
        for i in 0..n {
            for j in 0..n {
                let v = self.values[[i, j]];
                if v < floor || v <= 0.0 {
                    continue;
                }
                let mut is_max = true;
                'nb: for di in -1isize..=1 {
                    for dj in -1isize..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (a, b) = (i as isize + di, j as isize + dj);
                        if a < 0 || b < 0 || a >= n as isize || b >= n as isize {
                            continue;
                        }
                        let w = self.values[[a as usize, b as usize]];
                        // ties resolve towards the first index so plateaus give one peak
                        if w > v || (w == v && (a, b) < (i as isize, j as isize)) {
                            is_max = false;
                            break 'nb;
                        }
                    }
                }
                if is_max {
                    out.push(Peak { index: (i, j), position: self.position((i, j)), value: v });
                }
            }
        }
        out.sort_by(|a, b| b.value.total_cmp(&a.value));
        out
    }

    /// Image with `y → −y`.
    pub fn flipped(&self) -> Self {
        let n = self.size();
        // on odd grids index m ↔ 2c − m is exact
        let c = n / 2;
        let values = Array2::from_shape_fn((n, n), |(i, j)| {
            let (a, b) = (2 * c as isize - i as isize, 2 * c as isize - j as isize);
            if a < 0 || b < 0 || a >= n as isize || b >= n as isize {
                0.0
            } else {
                self.values[[a as usize, b as usize]]
            }
        });
        Self { values, pitch: self.pitch }
    }
}

/// Complex image on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage {
    pub values: Array2<Complex64>,
    pub pitch: f64,
}

impl ComplexImage {
    pub fn modulus(&self) -> ImageGrid {
        ImageGrid { values: self.values.mapv(|z| z.norm()), pitch: self.pitch }
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Index of the largest modulus (first in row-major order on ties).
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut bv = -1.0;
        for ((i, j), z) in self.values.indexed_iter() {
            if z.norm() > bv {
                bv = z.norm();
                best = (i, j);
            }
        }
        best
    }

    /// Peak offset from the grid center in pixels, optionally refined by a
    /// per-axis parabola through the modulus.
    pub fn peak_offset(&self, subpixel: bool) -> [f64; 2] {
        let (i, j) = self.argmax();
        let n = self.values.nrows();
        let c = (n / 2) as f64;
        let mut off = [i as f64 - c, j as f64 - c];
        if subpixel {
            let m = |a: usize, b: usize| self.values[[a, b]].norm();
            if i > 0 && i + 1 < n {
                off[0] += parabola(m(i - 1, j), m(i, j), m(i + 1, j));
            }
            if j > 0 && j + 1 < n {
                off[1] += parabola(m(i, j - 1), m(i, j), m(i, j + 1));
            }
        }
        off
    }

    pub fn normalized(mut self) -> Self {
        let m = self.max_modulus();
        if m > 0.0 {
            self.values.mapv_inplace(|z| z / m);
        }
        self
    }
}

fn parabola(l: f64, c: f64, r: f64) -> f64 {
    let d = l - 2.0 * c + r;
    if d.abs() < 1e-300 {
        0.0
    } else {
        (0.5 * (l - r) / d).clamp(-0.5, 0.5)
    }
}

/// Back-propagates camera-plane data: `Σ_p f(u_p) e^{iky·u_p/z_s} Δu²`.
pub struct BackPropagator {
    camera: Camera,
    fft: Fft2,
}

impl BackPropagator {
    pub fn new(camera: &Camera) -> Self {
        Self { camera: camera.clone(), fft: Fft2::new(camera.side_pixels()) }
    }

    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn pitch(&self) -> f64 {
        self.camera.image_pitch()
    }

    pub fn apply(&self, f: ArrayView1<Complex64>) -> Result<ComplexImage> {
        if f.len() != self.camera.pixels() {
            return Err(Error::GridMismatch(format!("{} samples for {} camera pixels", f.len(), self.camera.pixels())));
        }
        let a = self.camera.to_array(&f.to_owned());
        let w = self.camera.pixel_pitch().powi(2);
        let values = self.fft.centered(a.view(), Sign::Positive).mapv(|z| z * w);
        Ok(ComplexImage { values, pitch: self.pitch() })
    }
}

/// `J_j = J̃_j / max|J̃_j|` for one singular vector.
pub fn dort_image(u_j: ArrayView1<Complex64>, bp: &BackPropagator) -> Result<ComplexImage> {
    Ok(bp.apply(u_j)?.normalized())
}

/// Indicator of `|g| > η_F max|g|`.
pub fn filter_mask(modulus: &Array2<f64>, eta_f: f64) -> Result<Array2<bool>> {
    if !(0.0..=1.0).contains(&eta_f) {
        return Err(Error::InvalidArgument(format!("filter level {eta_f} outside [0, 1]")));
    }
    let m = modulus.iter().cloned().fold(0.0, f64::max);
    Ok(modulus.mapv(|v| v > eta_f * m))
}

fn filtered(img: &ComplexImage, eta_f: f64) -> Result<ComplexImage> {
    let mask = filter_mask(&img.values.mapv(|z| z.norm()), eta_f)?;
    let mut values = img.values.clone();
    ndarray::Zip::from(&mut values).and(&mask).for_each(|v, &keep| {
        if !keep {
            *v = Complex64::new(0.0, 0.0);
        }
    });
    Ok(ComplexImage { values, pitch: img.pitch })
}

/// `J = |(1/N) Σ_j J_j F(J_j)|`.
pub fn dort_combined(images: &[ComplexImage], eta_f: f64) -> Result<ImageGrid> {
    let first = images.first().ok_or(Error::EmptySamples)?;
    let mut acc = Array2::<Complex64>::zeros(first.values.dim());
    for img in images {
        acc += &filtered(img, eta_f)?.values;
    }
    let n = images.len() as f64;
    Ok(ImageGrid { values: acc.mapv(|z| z.norm() / n), pitch: first.pitch })
}

/// Classical DORT image from the retained left singular vectors.
pub fn dort(u: &Array2<Complex64>, bp: &BackPropagator, eta_f: f64) -> Result<ImageGrid> {
    let images: Vec<ComplexImage> = (0..u.ncols()).map(|j| dort_image(u.column(j), bp)).collect::<Result<_>>()?;
    dort_combined(&images, eta_f)
}

/// `g_ij(y) = ∫ G_i(u) Ḡ_j(u) e^{iky·u/z_s} du`.
pub fn cross_green_image(g_i: ArrayView1<Complex64>, g_j: ArrayView1<Complex64>, bp: &BackPropagator) -> Result<ComplexImage> {
    if g_i.len() != g_j.len() {
        return Err(Error::GridMismatch("Green's functions of different lengths".into()));
    }
    let prod: Array1<Complex64> = g_i.iter().zip(g_j.iter()).map(|(a, b)| a * b.conj()).collect();
    bp.apply(prod.view())
}

/// Shifts an image by `offset` pixels (`out[m] = in[m − offset]`), bilinear, zero fill.
pub fn shift_image(img: &ImageGrid, offset: [f64; 2]) -> ImageGrid {
    let n = img.size() as isize;
    let sample = |a: isize, b: isize| if a < 0 || b < 0 || a >= n || b >= n { 0.0 } else { img.values[[a as usize, b as usize]] };
    let values = Array2::from_shape_fn(img.values.dim(), |(i, j)| {
        let (fi, fj) = (i as f64 - offset[0], j as f64 - offset[1]);
        let (i0, j0) = (fi.floor(), fj.floor());
        let (ti, tj) = (fi - i0, fj - j0);
        let (i0, j0) = (i0 as isize, j0 as isize);
        (1.0 - ti) * (1.0 - tj) * sample(i0, j0) + ti * (1.0 - tj) * sample(i0 + 1, j0) + (1.0 - ti) * tj * sample(i0, j0 + 1) + ti * tj * sample(i0 + 1, j0 + 1)
    });
    ImageGrid { values, pitch: img.pitch }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovedDortOptions {
    pub eta_f: f64,
    pub eta_i: f64,
    /// Refine relative shifts below one pixel.
    pub subpixel: bool,
    pub merge: MergeOrder,
}

impl Default for ImprovedDortOptions {
    fn default() -> Self {
        Self { eta_f: 0.99, eta_i: 0.2, subpixel: false, merge: MergeOrder::Chain }
    }
}

/// Order in which anchor images are registered onto the merged image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeOrder {
    /// Walk from the latest anchor to its strongest unvisited partner.
    #[default]
    Chain,
    /// Attach the unvisited anchor with the strongest link to any visited one.
    Strongest,
}

/// One step of the merge traversal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeLink {
    pub from: usize,
    pub to: usize,
    /// `y*_{from,to}` in pixels.
    pub shift: [f64; 2],
    pub beta: f64,
    /// The link did not pass `β ≥ η_I β_from,from`.
    pub low_confidence: bool,
}

#[derive(Debug, Clone)]
pub struct ImprovedDort {
    /// Final image, peaks at `x_ℓ − x_first`, max 1.
    pub image: ImageGrid,
    /// Per-anchor images `I_i`.
    pub anchors: Vec<ImageGrid>,
    /// `β_ij = max |f_ij|`.
    pub beta: Array2<f64>,
    /// Peak offsets `y*_ij` (pixels).
    pub shifts: Vec<Vec<[f64; 2]>>,
    pub links: Vec<MergeLink>,
    /// `max |g_ji(y) − conj(g_ij(−y))|` relative to `max |g|`.
    pub hermitian_defect: f64,
}

fn heaviside(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Improved DORT from estimated Green's functions (camera pixels, one per scatterer).
pub fn improved_dort(greens: &[Array1<Complex64>], bp: &BackPropagator, opts: &ImprovedDortOptions) -> Result<ImprovedDort> {
    let n = greens.len();
    if n < 2 {
        return Err(Error::TooFewSources { needed: 2, got: n });
    }
    if !(0.0..=1.0).contains(&opts.eta_f) || !(opts.eta_i >= 0.0) {
        return Err(Error::InvalidArgument(format!("η_F = {} and η_I = {} out of range", opts.eta_f, opts.eta_i)));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let g: Vec<ComplexImage> = pairs.par_iter().map(|&(i, j)| cross_green_image(greens[i].view(), greens[j].view(), bp)).collect::<Result<_>>()?;
    let at = |i: usize, j: usize| &g[i * n + j];

    let size = at(0, 0).values.nrows();
    let c = size / 2;
    let mut gmax: f64 = 0.0;
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (gij, gji) = (&at(i, j).values, &at(j, i).values);
            for a in 0..size {
                for b in 0..size {
                    let (ma, mb) = (2 * c as isize - a as isize, 2 * c as isize - b as isize);
                    if ma < 0 || mb < 0 || ma >= size as isize || mb >= size as isize {
                        continue;
                    }
                    defect = defect.max((gji[[a, b]] - gij[[ma as usize, mb as usize]].conj()).norm());
                    gmax = gmax.max(gij[[a, b]].norm());
                }
            }
        }
    }

    let f: Vec<ComplexImage> = g.iter().map(|img| filtered(img, opts.eta_f)).collect::<Result<_>>()?;
    let beta = Array2::from_shape_fn((n, n), |(i, j)| f[i * n + j].max_modulus());
    let shifts: Vec<Vec<[f64; 2]>> = (0..n).map(|i| (0..n).map(|j| g[i * n + j].peak_offset(opts.subpixel)).collect()).collect();
    let passes = |i: usize, j: usize| i == j || beta[[i, j]] > 0.0 && heaviside(beta[[i, j]] - opts.eta_i * beta[[i, i]]) > 0.0;

    let pitch = bp.pitch();
    let anchors: Vec<ImageGrid> = (0..n)
        .map(|i| {
            let mut acc = Array2::<f64>::zeros((size, size));
            for j in 0..n {
                if passes(i, j) {
                    let b = beta[[i, j]];
                    acc.zip_mut_with(&f[i * n + j].values, |a, z| *a += z.norm() / b);
                }
            }
            ImageGrid { values: acc, pitch }
        })
        .collect();

    let mut visited = vec![false; n];
    let mut offset = vec![[0.0f64; 2]; n];
    visited[0] = true;
    let mut merged = anchors[0].values.clone();
    let mut current = 0;
    let mut links = Vec::new();
    for _ in 1..n {
        let best_from = |a: usize| (0..n).filter(|&j| !visited[j]).max_by(|&x, &y| beta[[a, x]].total_cmp(&beta[[a, y]]).then(y.cmp(&x)));
        let mut pick = match opts.merge {
            MergeOrder::Chain => best_from(current).filter(|&j| passes(current, j)).map(|j| (current, j)),
            MergeOrder::Strongest => None,
        };
        if pick.is_none() {
            // strongest link from the visited set, preferring ones above threshold
            let mut best: Option<(usize, usize, bool, f64)> = None;
            for a in (0..n).filter(|&a| visited[a]) {
                for j in (0..n).filter(|&j| !visited[j]) {
                    let cand = (a, j, passes(a, j), beta[[a, j]]);
                    let better = match best {
                        None => true,
                        Some((_, _, p, b)) => (cand.2 && !p) || (cand.2 == p && cand.3 > b),
                    };
                    if better {
                        best = Some(cand);
                    }
                }
            }
            pick = best.map(|(a, j, _, _)| (a, j));
        }
        let Some((a, j)) = pick else { break };
        let s = shifts[a][j];
        offset[j] = [offset[a][0] + s[0], offset[a][1] + s[1]];
        merged += &shift_image(&anchors[j], offset[j]).values;
        links.push(MergeLink { from: a, to: j, shift: s, beta: beta[[a, j]], low_confidence: !passes(a, j) });
        visited[j] = true;
        current = j;
    }
    let image = ImageGrid { values: merged, pitch }.flipped().normalized();
    Ok(ImprovedDort { image, anchors, beta, shifts, links, hermitian_defect: if gmax > 0.0 { defect / gmax } else { 0.0 } })
}

/// Matching of image peaks against true positions, up to a global shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalizationScore {
    pub hits: usize,
    pub misses: usize,
    pub false_peaks: usize,
}

/// Peaks are local maxima at or above half the global maximum. Every pairing of
/// a peak with a true point proposes a global shift, which is refined once by
/// the mean offset of the pairs it matched; truths are matched greedily to the
/// nearest unused peak within `tolerance_px` pixels, and the shift with the
/// most hits (then the smallest summed distance) wins.
pub fn localization_score(image: &ImageGrid, truth: &[[f64; 2]], tolerance_px: f64) -> LocalizationScore {
    let peaks = image.peaks(0.5);
    let p = image.pitch;
    let pk: Vec<[f64; 2]> = peaks.iter().map(|q| [q.position[0] / p, q.position[1] / p]).collect();
    let tr: Vec<[f64; 2]> = truth.iter().map(|t| [t[0] / p, t[1] / p]).collect();
    let matching = |shift: [f64; 2]| {
        let mut candidates = Vec::new();
        for (ti, t) in tr.iter().enumerate() {
            for (pi, q) in pk.iter().enumerate() {
                let d = (t[0] + shift[0] - q[0]).hypot(t[1] + shift[1] - q[1]);
                if d <= tolerance_px + 1e-9 {
                    candidates.push((d, ti, pi));
                }
            }
        }
        candidates.sort_by(|x, y| x.0.total_cmp(&y.0));
        let (mut used_t, mut used_p) = (vec![false; tr.len()], vec![false; pk.len()]);
        let mut pairs = Vec::new();
        for (d, ti, pi) in candidates {
            if !used_t[ti] && !used_p[pi] {
                used_t[ti] = true;
                used_p[pi] = true;
                pairs.push((d, ti, pi));
            }
        }
        pairs
    };
    let mut best = (0usize, f64::INFINITY);
    for a in &pk {
        for b in &tr {
            let first = matching([a[0] - b[0], a[1] - b[1]]);
            let m = first.len().max(1) as f64;
            let refined = [
                first.iter().map(|&(_, ti, pi)| pk[pi][0] - tr[ti][0]).sum::<f64>() / m,
                first.iter().map(|&(_, ti, pi)| pk[pi][1] - tr[ti][1]).sum::<f64>() / m,
            ];
            for pairs in [first, matching(refined)] {
                let hits = pairs.len();
                let total: f64 = pairs.iter().map(|x| x.0).sum();
                if hits > best.0 || (hits == best.0 && total < best.1) {
                    best = (hits, total);
                }
            }
        }
    }
    LocalizationScore { hits: best.0, misses: truth.len() - best.0, false_peaks: peaks.len() - best.0 }
}

/// Relative positions `x_ℓ − x_0`, the frame of the improved-DORT image.
pub fn relative_positions(positions: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let Some(o) = positions.first() else { return Vec::new() };
    positions.iter().map(|x| [x[0] - o[0], x[1] - o[1]]).collect()
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::rngfield::{circular_normal, rng};
    use proptest::prelude::*;
    use rand::Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn truncated_svd_is_orthonormal_and_sorted(seed in any::<u64>(), rows in 4usize..20, cols in 4usize..12, keep in 1usize..4) {
            let mut r = rng(seed);
            let m = Array2::from_shape_fn((rows, cols), |_| circular_normal(&mut r));
            let t = svd_truncate(&m, Truncation::Fixed(keep)).unwrap();
            let gu = t.u.t().mapv(|z| z.conj()).dot(&t.u);
            let gv = t.v.t().mapv(|z| z.conj()).dot(&t.v);
            for ((i, j), z) in gu.indexed_iter() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((z - want).norm() < 1e-10 && (gv[[i, j]] - want).norm() < 1e-10);
            }
            prop_assert!(t.singular_values.windows(2).into_iter().all(|w| w[0] >= w[1] && w[1] >= 0.0));
        }

        #[test]
        fn normalized_images_peak_at_one(seed in any::<u64>()) {
            let mut r = rng(seed);
            let img = ImageGrid { values: Array2::from_shape_fn((15, 15), |_| r.random_range(0.0..3.0)), pitch: 0.3 }.normalized();
            prop_assert!((img.max() - 1.0).abs() < 1e-12);
            prop_assert!(img.values.iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn score_accounts_for_every_scatterer(seed in any::<u64>(), n in 1usize..6, dx in -5i32..5, dy in -5i32..5) {
            let mut r = rng(seed);
            let pitch = 0.5;
            let mut values = Array2::zeros((41, 41));
            let mut truth = Vec::new();
            let mut cells: Vec<(usize, usize)> = Vec::new();
            while cells.len() < n {
                let c = (r.random_range(8..33usize), r.random_range(8..33usize));
                if cells.iter().all(|d| c.0.abs_diff(d.0).max(c.1.abs_diff(d.1)) >= 4) {
                    cells.push(c);
                }
            }
            for &(i, j) in &cells {
                values[[i, j]] = 1.0;
                truth.push([(i as f64 - 20.0) * pitch, (j as f64 - 20.0) * pitch]);
            }
            let img = ImageGrid { values, pitch };
            let s = localization_score(&img, &truth, 1.0);
            prop_assert_eq!(s.hits + s.misses, n);
            prop_assert_eq!(s.hits, n);
            // the score is blind to a common translation of the truth
            let moved: Vec<[f64; 2]> = truth.iter().map(|t| [t[0] + dx as f64 * pitch, t[1] + dy as f64 * pitch]).collect();
            prop_assert_eq!(localization_score(&img, &moved, 1.0), s);
        }

        #[test]
        fn integer_shifts_are_exact(seed in any::<u64>(), dx in -4i32..4, dy in -4i32..4) {
            let mut r = rng(seed);
            let img = ImageGrid { values: Array2::from_shape_fn((21, 21), |_| r.random_range(0.0..1.0)), pitch: 1.0 };
            let s = shift_image(&img, [dx as f64, dy as f64]);
            for i in 5..16usize {
                for j in 5..16usize {
                    let (si, sj) = ((i as i32 + dx) as usize, (j as i32 + dy) as usize);
                    prop_assert!((s.values[[si, sj]] - img.values[[i, j]]).abs() < 1e-12);
                }
            }
        }
    }
}
