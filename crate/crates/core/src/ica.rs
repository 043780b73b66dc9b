//! Kurtosis-based independent component analysis on whitened complex data.
//!
//! The optimized quantity is the scale-invariant contrast
//! `K̃(w) = [E|y|⁴ − 2(E|y|²)² − |E y²|²] / (E|y|²)²` with `y = w^H x`.
//! Along a ray `w + μg` numerator and denominator are real quartics in `μ`,
//! so the best step is found among the real roots of the derivative
//! numerator.

use ndarray::{Array1, Array2, ArrayView1};
use ndarray_linalg::{Eig, Inverse};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{project, whiten, SampleMatrix, SamplingAxis, WhitenedData};
use crate::rngfield::{rng, split_seed};
use crate::separability::phase_aligned_distance;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Which sign of the kurtosis an extraction must reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignConstraint {
    #[default]
    Free,
    Negative,
    Positive,
}

impl SignConstraint {
    fn admits(&self, k: f64) -> bool {
        match self {
            SignConstraint::Free => true,
            SignConstraint::Negative => k < 0.0,
            SignConstraint::Positive => k > 0.0,
        }
    }

    /// `true` if `a` is a better contrast value than `b` for this target.
    fn prefers(&self, a: f64, b: f64) -> bool {
        match self {
            SignConstraint::Free => a.abs() > b.abs(),
            SignConstraint::Negative => a < b,
            SignConstraint::Positive => a > b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Column `r mod N` of `I + M`, `M` real uniform in `[-scale, scale]`, for restart `r`.
    IdentityPerturbation { scale: f64 },
    Given(Array1<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionOptions {
    pub sign: SignConstraint,
    pub max_iterations: usize,
    pub angle_tolerance: f64,
    pub init: Init,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        Self {
            sign: SignConstraint::Free,
            max_iterations: 200,
            angle_tolerance: 1e-6,
            init: Init::IdentityPerturbation { scale: 0.05 },
            restarts: 5,
            seed: 0,
        }
    }
}

impl ExtractionOptions {
    pub fn check(&self) -> Result<()> {
        if !(self.angle_tolerance > 0.0) {
            return Err(Error::InvalidArgument("angle tolerance must be positive".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("at least one restart is required".into()));
        }
        Ok(())
    }
}

fn norm(v: ArrayView1<Complex64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn inner(a: ArrayView1<Complex64>, b: ArrayView1<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn check_data(x: &Array2<Complex64>) -> Result<()> {
    if x.ncols() == 0 {
        return Err(Error::EmptySamples);
    }
    Ok(())
}

/// `K̃(w)`; invariant under `w → αw`.
pub fn normalized_contrast(w: ArrayView1<Complex64>, x: &Array2<Complex64>) -> Result<f64> {
    check_data(x)?;
    let y = project(w, x);
    contrast_of(y.view())
}

fn contrast_of(y: ArrayView1<Complex64>) -> Result<f64> {
    let n = y.len() as f64;
    let (mut m2, mut m4, mut p) = (0.0, 0.0, ZERO);
    for z in y.iter() {
        let a = z.norm_sqr();
        m2 += a;
        m4 += a * a;
        p += z * z;
    }
    let (m2, m4, p) = (m2 / n, m4 / n, p / n);
    if m2 <= 0.0 {
        return Err(Error::ZeroData);
    }
    Ok((m4 - 2.0 * m2 * m2 - p.norm_sqr()) / (m2 * m2))
}

/// `(K̃(w), G)` with `G = 2 ∂K̃/∂w̄`, so that `dK̃ = Re(d^H G)` for a step `d`.
pub fn contrast_gradient(w: ArrayView1<Complex64>, x: &Array2<Complex64>) -> Result<(f64, Array1<Complex64>)> {
    check_data(x)?;
    let nw = norm(w);
    if (nw - 1.0).abs() > 1e-10 {
        return Err(Error::NotUnitNorm { norm: nw });
    }
    let n = x.ncols() as f64;
    let y = project(w, x);
    let (mut m2, mut m4, mut p) = (0.0, 0.0, ZERO);
    for z in y.iter() {
        let a = z.norm_sqr();
        m2 += a;
        m4 += a * a;
        p += z * z;
    }
    let (m2, m4, p) = (m2 / n, m4 / n, p / n);
    if m2 <= 0.0 {
        return Err(Error::ZeroData);
    }
    let ybar_abs2 = y.mapv(|z| z.conj() * z.norm_sqr());
    let ybar = y.mapv(|z| z.conj());
    let e_xy3 = x.dot(&ybar_abs2) / n;
    let e_xybar = x.dot(&ybar) / n;
    let e_xy = x.dot(&y) / n;
    let big_p = m4 - 2.0 * m2 * m2 - p.norm_sqr();
    let big_q = m2 * m2;
    let dp = &e_xy3 * 2.0 - &e_xybar * (4.0 * m2) - &e_xy * (2.0 * p.conj());
    let dq = &e_xybar * (2.0 * m2);
    let grad = (dp * big_q - dq * big_p) * (2.0 / (big_q * big_q));
    Ok((big_p / big_q, grad))
}

/// Numerator and denominator of `K̃(w + μg)` as quartics in `μ` (ascending coefficients).
#[derive(Debug, Clone, PartialEq)]
pub struct LinePolynomials {
    pub numerator: [f64; 5],
    pub denominator: [f64; 5],
}

impl LinePolynomials {
    pub fn value(&self, mu: f64) -> f64 {
        poly_eval(&self.numerator, mu) / poly_eval(&self.denominator, mu)
    }

    /// `P'Q − PQ'`, trimmed of leading coefficients that cancel.
    pub fn derivative_numerator(&self) -> Vec<f64> {
        let dp = poly_derivative(&self.numerator);
        let dq = poly_derivative(&self.denominator);
        let a = poly_mul(&dp, &self.denominator);
        let b = poly_mul(&self.numerator, &dq);
        let mut out: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u - v).collect();
        let scale = out.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        while out.len() > 1 && out.last().map_or(false, |c| c.abs() <= 1e-11 * scale) {
            out.pop();
        }
        out
    }
}

pub fn line_polynomials(w: ArrayView1<Complex64>, g: ArrayView1<Complex64>, x: &Array2<Complex64>) -> Result<LinePolynomials> {
    check_data(x)?;
    let n = x.ncols() as f64;
    let y0 = project(w, x);
    let y1 = project(g, x);
    let mut e = [0.0f64; 9];
    let (mut p0, mut p01, mut p1) = (ZERO, ZERO, ZERO);
    for (a0, a1) in y0.iter().zip(y1.iter()) {
        let a = a0.norm_sqr();
        let b = 2.0 * (a0 * a1.conj()).re;
        let c = a1.norm_sqr();
        e[0] += a;
        e[1] += b;
        e[2] += c;
        e[3] += a * a;
        e[4] += a * b;
        e[5] += b * b;
        e[6] += a * c;
        e[7] += b * c;
        e[8] += c * c;
        p0 += a0 * a0;
        p01 += a0 * a1;
        p1 += a1 * a1;
    }
    for v in e.iter_mut() {
        *v /= n;
    }
    let (p0, p01, p1) = (p0 / n, p01 / n, p1 / n);
    let m2 = [e[0], e[1], e[2]];
    let m4 = [e[3], 2.0 * e[4], e[5] + 2.0 * e[6], 2.0 * e[7], e[8]];
    let pc = [p0, 2.0 * p01, p1];
    let mut abs_p = [0.0f64; 5];
    for i in 0..3 {
        for j in 0..3 {
            abs_p[i + j] += (pc[i] * pc[j].conj()).re;
        }
    }
    let m2sq = poly_mul(&m2, &m2);
    let mut numerator = [0.0; 5];
    let mut denominator = [0.0; 5];
    for k in 0..5 {
        numerator[k] = m4[k] - 2.0 * m2sq[k] - abs_p[k];
        denominator[k] = m2sq[k];
    }
    Ok(LinePolynomials { numerator, denominator })
}

/// Outcome of [`exact_line_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch {
    pub step: f64,
    pub value: f64,
    /// No real critical point improved on `μ = 0`.
    pub stagnated: bool,
}

/// Best step `μ*` along `w + μg` among `μ = 0` and the real critical points.
pub fn exact_line_search(w: ArrayView1<Complex64>, g: ArrayView1<Complex64>, x: &Array2<Complex64>, sign: SignConstraint) -> Result<LineSearch> {
    if norm(g) == 0.0 {
        return Err(Error::InvalidArgument("line search direction is zero".into()));
    }
    let polys = line_polynomials(w, g, x)?;
    let roots = real_roots(&polys.derivative_numerator());
    let mut best = LineSearch { step: 0.0, value: polys.value(0.0), stagnated: true };
    for mu in roots {
        let v = polys.value(mu);
        if v.is_finite() && sign.prefers(v, best.value) {
            best = LineSearch { step: mu, value: v, stagnated: false };
        }
    }
    Ok(best)
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, a)| k as f64 * a).collect()
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Real roots from companion-matrix eigenvalues, polished by Newton steps.
fn real_roots(c: &[f64]) -> Vec<f64> {
    let deg = c.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let mut companion = Array2::<f64>::zeros((deg, deg));
    for i in 1..deg {
        companion[[i, i - 1]] = 1.0;
    }
    for i in 0..deg {
        companion[[i, deg - 1]] = -c[i] / lead;
    }
    let Ok((eigs, _)) = companion.eig() else {
        return Vec::new();
    };
    let dc = poly_derivative(c);
    eigs.iter()
        .filter(|z| z.im.abs() <= 1e-6 * (1.0 + z.re.abs()))
        .map(|z| {
            let mut r = z.re;
            for _ in 0..8 {
                let d = poly_eval(&dc, r);
                if d == 0.0 {
                    break;
                }
                let step = poly_eval(c, r) / d;
                r -= step;
                if step.abs() <= 1e-15 * (1.0 + r.abs()) {
                    break;
                }
            }
            r
        })
        .filter(|r| r.is_finite())
        .collect()
}

/// Result of one extraction.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    /// Unit extraction vector; largest-modulus entry real positive.
    pub w: Array1<Complex64>,
    /// `w^H x` scaled to unit second moment.
    pub source: Array1<Complex64>,
    pub kurtosis: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stagnated: bool,
    pub restart: usize,
}

fn fix_phase(w: &mut Array1<Complex64>) {
    let (mut best, mut idx) = (-1.0, 0);
    for (i, z) in w.iter().enumerate() {
        if z.norm() > best {
            best = z.norm();
            idx = i;
        }
    }
    if best > 0.0 {
        let ph = w[idx] / best;
        w.mapv_inplace(|z| z * ph.conj());
        w[idx] = Complex64::new(w[idx].norm(), 0.0);
    }
}

fn normalized(v: Array1<Complex64>) -> Array1<Complex64> {
    let n = norm(v.view());
    v.mapv(|z| z / n)
}

fn initial_vector(init: &Init, dim: usize, restart: usize, seed: u64) -> Result<Array1<Complex64>> {
    let v = match init {
        Init::Given(w) => {
            if w.len() != dim {
                return Err(Error::InvalidArgument(format!("initial vector has length {} for dimension {dim}", w.len())));
            }
            w.clone()
        }
        Init::IdentityPerturbation { scale } => {
            let mut r = rng(split_seed(seed, restart as u64));
            let mut v = Array1::from_shape_fn(dim, |_| Complex64::new(r.random_range(-*scale..=*scale), 0.0));
            v[restart % dim] += 1.0;
            v
        }
    };
    if norm(v.view()) == 0.0 {
        return Err(Error::InvalidArgument("initial vector is zero".into()));
    }
    Ok(normalized(v))
}

struct Run {
    w: Array1<Complex64>,
    value: f64,
    iterations: usize,
    converged: bool,
    stagnated: bool,
}

fn run_from(mut w: Array1<Complex64>, x: &Array2<Complex64>, opts: &ExtractionOptions) -> Result<Run> {
    let mut value = normalized_contrast(w.view(), x)?;
    let mut stagnated = false;
    for it in 0..opts.max_iterations {
        let (_, g) = contrast_gradient(w.view(), x)?;
        if norm(g.view()) < 1e-14 {
            return Ok(Run { w, value, iterations: it, converged: true, stagnated });
        }
        let ls = exact_line_search(w.view(), g.view(), x, opts.sign)?;
        stagnated = ls.stagnated;
        let next = normalized(&w + &g.mapv(|z| z * ls.step));
        let overlap = inner(next.view(), w.view()).norm().min(1.0);
        w = next;
        value = ls.value;
        if overlap.acos() < opts.angle_tolerance {
            return Ok(Run { w, value, iterations: it + 1, converged: true, stagnated });
        }
    }
    Ok(Run { w, value, iterations: opts.max_iterations, converged: false, stagnated })
}

/// Extracts one source from whitened data `x` (`N × N_sa`).
pub fn extract_from(x: &Array2<Complex64>, opts: &ExtractionOptions) -> Result<Extraction> {
    opts.check()?;
    check_data(x)?;
    let dim = x.nrows();
    let finish = |mut w: Array1<Complex64>, value: f64, iterations, converged, stagnated, restart| -> Result<Extraction> {
        fix_phase(&mut w);
        let y = project(w.view(), x);
        let m2 = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / y.len() as f64;
        if m2 <= 0.0 {
            return Err(Error::ZeroData);
        }
        let source = y.mapv(|z| z / m2.sqrt());
        Ok(Extraction { w, source, kurtosis: value, iterations, converged, stagnated, restart })
    };
    if dim == 1 {
        let w = Array1::from_elem(1, Complex64::new(1.0, 0.0));
        let value = normalized_contrast(w.view(), x)?;
        return finish(w, value, 0, true, false, 0);
    }
    let restarts = match opts.init {
        Init::Given(_) => 1,
        _ => opts.restarts,
    };
    let runs: Vec<Run> = (0..restarts)
        .into_par_iter()
        .map(|r| run_from(initial_vector(&opts.init, dim, r, opts.seed)?, x, opts))
        .collect::<Result<_>>()?;
    let mut best: Option<(usize, &Run)> = None;
    for (r, run) in runs.iter().enumerate() {
        if !opts.sign.admits(run.value) {
            continue;
        }
        if best.map_or(true, |(_, b)| opts.sign.prefers(run.value, b.value)) {
            best = Some((r, run));
        }
    }
    let Some((r, run)) = best else {
        let values: Vec<String> = runs.iter().map(|r| format!("{:.4}", r.value)).collect();
        return Err(Error::SignConstraint(format!("no restart reached a {:?} kurtosis (values {})", opts.sign, values.join(", "))));
    };
    finish(run.w.clone(), run.value, run.iterations, run.converged, run.stagnated, r)
}

pub fn extract_one(x: &WhitenedData, opts: &ExtractionOptions) -> Result<Extraction> {
    extract_from(&x.data, opts)
}

/// `X − h s̃` with `h = E{x s̃*}/E{|s̃|²}`; returns the residual and `h`.
pub fn deflate(x: &Array2<Complex64>, source: ArrayView1<Complex64>) -> Result<(Array2<Complex64>, Array1<Complex64>)> {
    check_data(x)?;
    if source.len() != x.ncols() {
        return Err(Error::GridMismatch(format!("source length {} vs {} samples", source.len(), x.ncols())));
    }
    let n = x.ncols() as f64;
    let power = source.iter().map(|z| z.norm_sqr()).sum::<f64>() / n;
    if power <= 0.0 {
        return Err(Error::ZeroData);
    }
    let conj = source.mapv(|z| z.conj());
    let h = x.dot(&conj) / (n * power);
    let mut out = x.clone();
    for (mut row, hk) in out.rows_mut().into_iter().zip(h.iter()) {
        row.zip_mut_with(&source, |a, s| *a -= hk * s);
    }
    Ok((out, h))
}

/// Outcome of [`separate`]; partial when a round fails.
#[derive(Debug, Clone)]
pub struct SeparationResult {
    /// Extraction vectors in the coordinates of the input whitened data.
    pub vectors: Vec<Array1<Complex64>>,
    pub sources: Vec<Array1<Complex64>>,
    pub kurtosis: Vec<f64>,
    /// `h` of each round, in that round's coordinates.
    pub deflation_coefficients: Vec<Array1<Complex64>>,
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// `max_k |E{x'_k s̃*}|` after each deflation.
    pub residual_orthogonality: Vec<f64>,
    pub failures: Vec<(usize, String)>,
    pub axis: SamplingAxis,
}

impl SeparationResult {
    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn source_matrix(&self) -> SampleMatrix {
        let cols = self.sources.first().map_or(0, |s| s.len());
        let mut data = Array2::zeros((self.sources.len(), cols));
        for (i, s) in self.sources.iter().enumerate() {
            data.row_mut(i).assign(s);
        }
        SampleMatrix::new(data, self.axis)
    }

    /// Extraction vectors expressed on the raw (pre-whitening) variables.
    pub fn raw_vectors(&self, white: &WhitenedData) -> Vec<Array1<Complex64>> {
        let mh = white.map.t().mapv(|z| z.conj());
        self.vectors.iter().map(|v| mh.dot(v)).collect()
    }

    /// `‖X − Σ_{i≤m} h_i s̃_i‖/‖X‖` for `m = 1..N`, with `h_i = E{x s̃_i*}` on the input data.
    pub fn reconstruction_residuals(&self, x: &Array2<Complex64>) -> Vec<f64> {
        let total = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut r = x.clone();
        let mut out = Vec::new();
        for s in &self.sources {
            if let Ok((next, _)) = deflate(&r, s.view()) {
                r = next;
            }
            out.push(r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / total);
        }
        out
    }
}

/// `N` rounds of extraction and deflation, re-whitening the residual before each round.
pub fn separate(x: &WhitenedData, count: usize, opts: &ExtractionOptions) -> Result<SeparationResult> {
    opts.check()?;
    let dim = x.dimension();
    if count == 0 || count > dim {
        return Err(Error::RankDeficient { requested: count, rank: dim });
    }
    let mut result = SeparationResult {
        vectors: Vec::new(),
        sources: Vec::new(),
        kurtosis: Vec::new(),
        deflation_coefficients: Vec::new(),
        iterations: Vec::new(),
        converged: Vec::new(),
        residual_orthogonality: Vec::new(),
        failures: Vec::new(),
        axis: x.axis,
    };
    let mut data = x.data.clone();
    // data = transform · x.data
    let mut transform = Array2::<Complex64>::eye(dim);
    for round in 0..count {
        let mut round_opts = opts.clone();
        round_opts.seed = split_seed(opts.seed, round as u64);
        if let Init::Given(_) = opts.init {
            round_opts.init = Init::IdentityPerturbation { scale: 0.05 };
            if round == 0 {
                round_opts.init = opts.init.clone();
            }
        }
        let ex = match extract_from(&data, &round_opts) {
            Ok(ex) => ex,
            Err(e) => {
                result.failures.push((round, e.to_string()));
                break;
            }
        };
        let th = transform.t().mapv(|z| z.conj());
        let mut u = th.dot(&ex.w);
        let un = norm(u.view());
        u.mapv_inplace(|z| z / un);
        result.vectors.push(u);
        result.kurtosis.push(ex.kurtosis);
        result.iterations.push(ex.iterations);
        result.converged.push(ex.converged);
        let (residual, h) = deflate(&data, ex.source.view())?;
        let n = residual.ncols() as f64;
        let conj = ex.source.mapv(|z| z.conj());
        let ortho = (residual.dot(&conj) / n).iter().fold(0.0f64, |m, z| m.max(z.norm()));
        result.residual_orthogonality.push(ortho);
        result.sources.push(ex.source.clone());
        if round + 1 < count {
            let y = project(ex.w.view(), &data);
            let c = (y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n).sqrt();
            let rewhite = whiten(&SampleMatrix::new(residual, x.axis), data.nrows() - 1)?;
            let mut step = Array2::<Complex64>::eye(data.nrows());
            for a in 0..step.nrows() {
                for b in 0..step.ncols() {
                    step[[a, b]] -= h[a] * ex.w[b].conj() / c;
                }
            }
            transform = rewhite.map.dot(&step).dot(&transform);
            data = rewhite.data;
        }
        result.deflation_coefficients.push(h);
    }
    Ok(result)
}

/// Optimal assignment `row → column` maximizing the summed weight (`rows ≤ cols`).
pub fn max_weight_assignment(weights: &Array2<f64>) -> Vec<usize> {
    let (n, m) = weights.dim();
    assert!(n <= m, "assignment needs rows ≤ cols");
    // Shortest augmenting paths on costs −w, 1-based potentials.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = -weights[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

/// Matching of estimates to ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// `assignment[i]` is the truth index matched to estimate `i`.
    pub assignment: Vec<usize>,
    /// Sphere distance after phase alignment, per estimate.
    pub distances: Vec<f64>,
    /// `|⟨ŝ_i, ŝ_j⟩|` of the matched unit vectors.
    pub correlations: Vec<f64>,
}

fn align_rows(est: &[Array1<Complex64>], truth: &[Array1<Complex64>]) -> Result<Alignment> {
    if est.len() != truth.len() {
        return Err(Error::InvalidArgument(format!("{} estimates vs {} truths", est.len(), truth.len())));
    }
    let unit = |v: &Array1<Complex64>| normalized(v.clone());
    let e: Vec<_> = est.iter().map(unit).collect();
    let t: Vec<_> = truth.iter().map(unit).collect();
    let n = e.len();
    let corr = Array2::from_shape_fn((n, n), |(i, j)| inner(e[i].view(), t[j].view()).norm());
    let assignment = max_weight_assignment(&corr);
    let mut distances = Vec::with_capacity(n);
    let mut correlations = Vec::with_capacity(n);
    for (i, &j) in assignment.iter().enumerate() {
        distances.push(phase_aligned_distance(e[i].view(), t[j].view())?);
        correlations.push(corr[[i, j]]);
    }
    Ok(Alignment { assignment, distances, correlations })
}

/// Matches estimated sources to true source rows (sample space).
pub fn align_to_truth(result: &SeparationResult, truth: &SampleMatrix) -> Result<Alignment> {
    let rows: Vec<Array1<Complex64>> = truth.data.rows().into_iter().map(|r| r.to_owned()).collect();
    align_rows(&result.sources, &rows)
}

/// Matches source rows of two sample matrices.
pub fn align_sources(estimated: &SampleMatrix, truth: &SampleMatrix) -> Result<Alignment> {
    let e: Vec<_> = estimated.data.rows().into_iter().map(|r| r.to_owned()).collect();
    let t: Vec<_> = truth.data.rows().into_iter().map(|r| r.to_owned()).collect();
    align_rows(&e, &t)
}

/// Unit columns of `(A⁻¹)^H` for a square mixing matrix `A` in whitened coordinates.
pub fn true_extraction_vectors(mixing: &Array2<Complex64>) -> Result<Vec<Array1<Complex64>>> {
    let inv = mixing.inv()?;
    let ih = inv.t().mapv(|z| z.conj());
    Ok((0..ih.ncols()).map(|j| normalized(ih.column(j).to_owned())).collect())
}

/// Matches extraction vectors to the true ones in `w`-space.
pub fn align_vectors(vectors: &[Array1<Complex64>], truth: &[Array1<Complex64>]) -> Result<Alignment> {
    align_rows(vectors, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rngfield::circular_normal;
    use ndarray_linalg::SVD;
    use std::f64::consts::PI;

    /// Unimodular sources with uniform phase, `N × n`.
    fn phase_sources(count: usize, n: usize, seed: u64) -> Array2<Complex64> {
        let mut r = rng(seed);
        Array2::from_shape_fn((count, n), |_| Complex64::from_polar(1.0, r.random_range(0.0..2.0 * PI)))
    }

    fn random_unitary(n: usize, seed: u64) -> Array2<Complex64> {
        let mut r = rng(seed);
        let a = Array2::from_shape_fn((n, n), |_| circular_normal(&mut r));
        let (u, _, vt) = a.svd(true, true).unwrap();
        u.unwrap().dot(&vt.unwrap())
    }

    fn random_unit(n: usize, r: &mut rand_chacha::ChaCha8Rng) -> Array1<Complex64> {
        normalized(Array1::from_shape_fn(n, |_| circular_normal(r)))
    }

    fn mixed(count: usize, n: usize, seed: u64) -> (Array2<Complex64>, Array2<Complex64>, Array2<Complex64>) {
        let s = phase_sources(count, n, seed);
        let a = random_unitary(count, seed + 100);
        (a.dot(&s), a, s)
    }

    #[test]
    fn contrast_is_scale_invariant() {
        let (x, _, _) = mixed(3, 2000, 1);
        let mut r = rng(4);
        for _ in 0..5 {
            let w = random_unit(3, &mut r);
            let k = normalized_contrast(w.view(), &x).unwrap();
            let alpha = circular_normal(&mut r) * 3.0;
            let k2 = normalized_contrast(w.mapv(|z| z * alpha).view(), &x).unwrap();
            assert!((k - k2).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (x, _, _) = mixed(3, 5000, 2);
        let mut r = rng(8);
        let w = random_unit(3, &mut r);
        let (_, g) = contrast_gradient(w.view(), &x).unwrap();
        for _ in 0..10 {
            let d = random_unit(3, &mut r);
            let eps = 1e-6;
            let kp = normalized_contrast((&w + &d.mapv(|z| z * eps)).view(), &x).unwrap();
            let km = normalized_contrast((&w - &d.mapv(|z| z * eps)).view(), &x).unwrap();
            let fd = (kp - km) / (2.0 * eps);
            let an = inner(d.view(), g.view()).re;
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "fd {fd} vs {an}");
        }
    }

    #[test]
    fn gradient_is_phase_equivariant() {
        let (x, _, _) = mixed(2, 3000, 3);
        let mut r = rng(9);
        let w = random_unit(2, &mut r);
        let ph = Complex64::from_polar(1.0, 0.7);
        let (_, g) = contrast_gradient(w.view(), &x).unwrap();
        let (_, g2) = contrast_gradient(w.mapv(|z| z * ph).view(), &x).unwrap();
        for (a, b) in g.iter().zip(g2.iter()) {
            assert!((a * ph - b).norm() < 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn gradient_vanishes_at_exact_solution() {
        // two sources whose moments make the identity an exact critical point:
        // s1 takes the four phases {1, i, -1, -i}, s2 the same phases in a crossed order
        let n = 16;
        let ph = [Complex64::new(1.0, 0.0), Complex64::i(), Complex64::new(-1.0, 0.0), -Complex64::i()];
        let x = Array2::from_shape_fn((2, n), |(k, j)| if k == 0 { ph[j % 4] } else { ph[(j / 4) % 4] });
        let w = Array1::from(vec![Complex64::new(1.0, 0.0), ZERO]);
        let (_, g) = contrast_gradient(w.view(), &x).unwrap();
        let tangent = &g - &w.mapv(|z| z * inner(w.view(), g.view()));
        assert!(norm(tangent.view()) < 1e-8);
    }

    #[test]
    fn line_polynomials_match_direct_evaluation() {
        let (x, _, _) = mixed(3, 4000, 5);
        let mut r = rng(10);
        let w = random_unit(3, &mut r);
        let g = random_unit(3, &mut r);
        let polys = line_polynomials(w.view(), g.view(), &x).unwrap();
        for mu in [-1.3, -0.4, 0.0, 0.5, 2.1] {
            let direct = normalized_contrast((&w + &g.mapv(|z| z * mu)).view(), &x).unwrap();
            assert!((polys.value(mu) - direct).abs() <= 1e-10 * direct.abs().max(1.0));
            // derivative numerator against a central difference of K̃
            let h = 1e-5;
            let fd = (polys.value(mu + h) - polys.value(mu - h)) / (2.0 * h);
            let q = poly_eval(&polys.denominator, mu);
            let an = poly_eval(&polys.derivative_numerator(), mu) / (q * q);
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-2), "{fd} vs {an}");
        }
        assert!(polys.derivative_numerator().len() <= 7);
    }

    #[test]
    fn line_search_beats_grid() {
        let (x, _, _) = mixed(2, 5000, 6);
        let mut r = rng(11);
        for _ in 0..5 {
            let w = random_unit(2, &mut r);
            let (_, g) = contrast_gradient(w.view(), &x).unwrap();
            let ls = exact_line_search(w.view(), g.view(), &x, SignConstraint::Negative).unwrap();
            let gn = norm(g.view());
            for i in 0..100 {
                let mu = (-2.0 + 4.0 * i as f64 / 99.0) / gn;
                let k = normalized_contrast((&w + &g.mapv(|z| z * mu)).view(), &x).unwrap();
                assert!(ls.value <= k + 1e-12);
            }
        }
    }

    #[test]
    fn line_search_is_stationary_at_an_optimum() {
        let (x, _, _) = mixed(2, 5000, 7);
        let opts = ExtractionOptions { sign: SignConstraint::Negative, angle_tolerance: 1e-13, max_iterations: 500, ..Default::default() };
        let ex = extract_from(&x, &opts).unwrap();
        let (_, g) = contrast_gradient(ex.w.view(), &x).unwrap();
        let t = Array1::from(vec![-ex.w[1].conj(), ex.w[0].conj()]);
        let ls = exact_line_search(ex.w.view(), t.view(), &x, SignConstraint::Negative).unwrap();
        assert!(ls.step.abs() < 1e-8, "step {} (|g| {})", ls.step, norm(g.view()));
    }

    #[test]
    fn extraction_recovers_a_column() {
        let (x, a, _) = mixed(2, 100_000, 12);
        let ex = extract_from(&x, &ExtractionOptions { sign: SignConstraint::Negative, ..Default::default() }).unwrap();
        let truth = true_extraction_vectors(&a).unwrap();
        let best = truth.iter().map(|t| phase_aligned_distance(ex.w.view(), t.view()).unwrap()).fold(f64::INFINITY, f64::min);
        assert!(best < 0.05, "distance {best}");
        assert!((ex.kurtosis + 1.0).abs() < 0.05);
        let max = ex.w.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let lead = ex.w.iter().find(|z| z.norm() == max).unwrap();
        assert!(lead.im == 0.0 && lead.re > 0.0);
    }

    #[test]
    fn contrast_never_worsens_along_iterations() {
        let (x, _, _) = mixed(3, 20_000, 13);
        let mut w = initial_vector(&Init::IdentityPerturbation { scale: 0.05 }, 3, 0, 1).unwrap();
        let mut prev = normalized_contrast(w.view(), &x).unwrap();
        for _ in 0..20 {
            let (_, g) = contrast_gradient(w.view(), &x).unwrap();
            let ls = exact_line_search(w.view(), g.view(), &x, SignConstraint::Negative).unwrap();
            w = normalized(&w + &g.mapv(|z| z * ls.step));
            let k = normalized_contrast(w.view(), &x).unwrap();
            assert!(k <= prev + 1e-12);
            prev = k;
        }
    }

    #[test]
    fn single_dimension_is_trivial() {
        let (x, _, _) = mixed(1, 1000, 14);
        let ex = extract_from(&x, &ExtractionOptions::default()).unwrap();
        assert_eq!(ex.w, Array1::from(vec![Complex64::new(1.0, 0.0)]));
    }

    #[test]
    fn unreachable_sign_is_reported() {
        let (x, _, _) = mixed(2, 5000, 15);
        let r = extract_from(&x, &ExtractionOptions { sign: SignConstraint::Positive, ..Default::default() });
        assert!(matches!(r, Err(Error::SignConstraint(_))));
    }

    #[test]
    fn deflation_removes_an_exact_source() {
        let (x, _, s) = mixed(3, 4000, 16);
        let (res, _) = deflate(&x, s.row(1)).unwrap();
        let sv = res.svd(false, false).unwrap().1;
        assert!(sv[2] / sv[0] < 1e-6);
        let conj = s.row(1).mapv(|z| z.conj());
        let ortho = res.dot(&conj) / 4000.0;
        assert!(ortho.iter().all(|z| z.norm() < 1e-10));
        let mut r = rng(3);
        let noise = Array1::from_shape_fn(4000, |_| circular_normal(&mut r));
        let (res, h) = deflate(&x, noise.view()).unwrap();
        assert!(h.iter().all(|z| z.norm() < 0.1));
        assert!((&res - &x).iter().all(|z| z.norm() < 0.5));
    }

    fn white(x: &Array2<Complex64>) -> WhitenedData {
        whiten(&SampleMatrix::new(x.clone(), SamplingAxis::Realizations), x.nrows()).unwrap()
    }

    #[test]
    fn separation_recovers_all_sources() {
        let (x, _, s) = mixed(4, 100_000, 17);
        let wd = white(&x);
        let res = separate(&wd, 4, &ExtractionOptions { sign: SignConstraint::Negative, ..Default::default() }).unwrap();
        assert!(res.failures.is_empty());
        let al = align_to_truth(&res, &SampleMatrix::new(s, SamplingAxis::Realizations)).unwrap();
        assert!(al.distances.iter().all(|d| *d < 0.1), "{:?}", al.distances);
        assert!(res.residual_orthogonality.iter().all(|o| *o < 1e-10));
        let resid = res.reconstruction_residuals(&wd.data);
        assert!(resid.windows(2).all(|p| p[1] < p[0]));
        assert!(*resid.last().unwrap() < 1e-8);
        for v in &res.vectors {
            assert!((norm(v.view()) - 1.0).abs() < 1e-10);
        }
        // extraction vectors reproduce the sources on the original whitened data
        for (v, src) in res.vectors.iter().zip(&res.sources) {
            let y = project(v.view(), &wd.data);
            let c = inner(y.view(), src.view()).norm() / (norm(y.view()) * norm(src.view()));
            assert!(c > 1.0 - 1e-8);
        }
    }

    #[test]
    fn separation_of_one_matches_extraction() {
        let (x, _, _) = mixed(2, 5000, 18);
        let wd = white(&x);
        let opts = ExtractionOptions { sign: SignConstraint::Negative, ..Default::default() };
        let res = separate(&wd, 1, &opts).unwrap();
        let ex = extract_one(&wd, &ExtractionOptions { seed: split_seed(0, 0), ..opts }).unwrap();
        assert!((&res.vectors[0] - &ex.w).iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn separation_ignores_row_order() {
        let (x, _, s) = mixed(3, 50_000, 19);
        let mut swapped = x.clone();
        swapped.row_mut(0).assign(&x.row(2));
        swapped.row_mut(2).assign(&x.row(0));
        let opts = ExtractionOptions { sign: SignConstraint::Negative, ..Default::default() };
        let truth = SampleMatrix::new(s, SamplingAxis::Realizations);
        for data in [x, swapped] {
            let res = separate(&white(&data), 3, &opts).unwrap();
            let al = align_to_truth(&res, &truth).unwrap();
            assert!(al.distances.iter().all(|d| *d < 0.1));
        }
    }

    #[test]
    fn alignment_recovers_permutation_and_phase() {
        let s = phase_sources(4, 64, 20);
        let truth = SampleMatrix::new(s.clone(), SamplingAxis::Realizations);
        let al = align_sources(&truth, &truth).unwrap();
        assert_eq!(al.assignment, vec![0, 1, 2, 3]);
        assert!(al.distances.iter().all(|d| d.abs() < 1e-7));
        let perm = [2usize, 0, 3, 1];
        let est = Array2::from_shape_fn((4, 64), |(i, j)| s[[perm[i], j]] * Complex64::from_polar(1.0, i as f64));
        let al = align_sources(&SampleMatrix::new(est, SamplingAxis::Realizations), &truth).unwrap();
        assert_eq!(al.assignment, perm.to_vec());
        assert!(al.distances.iter().all(|d| d.abs() < 1e-7));
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..n {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut r = rng(21);
        for trial in 0..20 {
            let truth = phase_sources(4, 64, 100 + trial);
            let est = Array2::from_shape_fn((4, 64), |_| circular_normal(&mut r));
            let al = align_sources(&SampleMatrix::new(est.clone(), SamplingAxis::Realizations), &SampleMatrix::new(truth.clone(), SamplingAxis::Realizations)).unwrap();
            let corr = Array2::from_shape_fn((4, 4), |(i, j)| {
                let a = normalized(est.row(i).to_owned());
                let b = normalized(truth.row(j).to_owned());
                inner(a.view(), b.view()).norm()
            });
            let score = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| corr[[i, j]]).sum::<f64>();
            let best = permutations(4).into_iter().map(|p| score(&p)).fold(f64::MIN, f64::max);
            assert!((score(&al.assignment) - best).abs() < 1e-12);
        }
    }
}
