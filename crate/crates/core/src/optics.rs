//! Fourier-optics forward model.
//!
//! Geometry: a spatial light modulator (SLM) is imaged through a lens of focal
//! length `z_s` onto the sample plane `z = 0`; a thin random phase screen sits at
//! `z = L` between them. Illuminations are speckle fields `W(x, 0)`; the return
//! path from a point scatterer to the camera is the Green's function `G(u; x)`.
//! All lengths are in wavelengths.
//!
//! Discretization: the sample/screen plane uses an `n × n` grid of pitch
//! `h = L_D/n`. The SLM and camera planes are its Fourier duals, with pitches
//! `λ z_s / L_D` (SLM) and `2π z_s/(k L_D)` (camera, return wavenumber `k`).
//! The camera keeps every `camera_stride`-th dual sample inside `[-L_C, L_C]²`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Grid, Plane, RealField};
use crate::fourier::{evaluate_at, Fft2, Sign};
use crate::rngfield::{gaussian_field_with, phase_screen, scale_to_correlation_length, screen_correlation_length, RandomFieldSpec};

/// How a scatterer re-emits the illumination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    /// Second-harmonic generation: response `W²`, return at `2k₀`.
    Shg,
    /// Linear scattering: response `W`, return at `k₀`.
    Linear,
}

impl Modality {
    pub fn harmonic(&self) -> f64 {
        match self {
            Modality::Shg => 2.0,
            Modality::Linear => 1.0,
        }
    }
}

/// Optical system parameters (lengths in λ).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticsConfig {
    pub lambda: f64,
    pub z_s: f64,
    /// Screen distance `L`.
    pub screen_distance: f64,
    /// Computational window side `L_D`.
    pub window: f64,
    pub grid_points: usize,
    pub na: f64,
    pub slm_radius: f64,
    /// Screen pupil radius `R_s`.
    pub pupil_radius: f64,
    /// Camera half-side `L_C`.
    pub camera_half_side: f64,
    pub camera_stride: usize,
    pub modality: Modality,
    /// Screen scale length `ℓ_0`.
    pub screen_scale: f64,
    /// Screen strength `k₀σ`.
    pub screen_k0_sigma: f64,
    pub screen_seed: u64,
    /// SLM scale length `ℓ_SLM`.
    pub slm_scale: f64,
    /// SLM phase strength `σ_SLM`.
    pub slm_sigma: f64,
}

/// Image window targeted by the default camera decimation.
pub const DEFAULT_IMAGE_WINDOW: f64 = 32.0;

impl OpticsConfig {
    fn with_geometry(modality: Modality, na: f64, z_s: f64, window: f64, grid_points: usize) -> Self {
        let stride = (window / DEFAULT_IMAGE_WINDOW).round().max(1.0) as usize;
        Self {
            lambda: 1.0,
            z_s,
            screen_distance: 0.25 * z_s,
            window,
            grid_points,
            na,
            slm_radius: na * z_s,
            pupil_radius: 0.45 * window,
            camera_half_side: na * z_s,
            camera_stride: stride,
            modality,
            screen_scale: 4.0,
            screen_k0_sigma: 1.0,
            screen_seed: 1,
            slm_scale: 2.0,
            slm_sigma: 2.0,
        }
    }

    /// Full-size parameter set: `z_s = L_D = 500λ`, `L = z_s/4`, 2048² grid.
    pub fn table1(modality: Modality, na: f64) -> Self {
        Self::with_geometry(modality, na, 500.0, 500.0, 2048)
    }

    /// Desk-scale set: the full-size set with `z_s`, `L_D` and the grid scaled by 1/4,
    /// which keeps the pitch and every dimensionless ratio.
    pub fn desk(modality: Modality, na: f64) -> Self {
        Self::with_geometry(modality, na, 125.0, 125.0, 512)
    }

    pub fn k0(&self) -> f64 {
        2.0 * PI / self.lambda
    }

    /// Wavenumber of the return path.
    pub fn return_wavenumber(&self) -> f64 {
        self.modality.harmonic() * self.k0()
    }

    /// Screen fluctuation amplitude `σ` (in λ).
    pub fn screen_sigma(&self) -> f64 {
        self.screen_k0_sigma / self.k0()
    }

    pub fn grid(&self) -> Grid {
        Grid::from_window(self.window, self.grid_points)
    }

    pub fn pitch(&self) -> f64 {
        self.window / self.grid_points as f64
    }

    pub fn slm_grid(&self) -> Grid {
        Grid::new(self.grid_points, self.lambda * self.z_s / self.window)
    }

    pub fn camera(&self) -> Camera {
        Camera::new(self, self.return_wavenumber())
    }

    /// `λ/(2 NA)`.
    pub fn ell_c_in(&self) -> f64 {
        self.lambda / (2.0 * self.na)
    }

    /// `π z_s/(k L_C)` at the return wavenumber; also the image pixel size.
    pub fn ell_c_out(&self) -> f64 {
        PI * self.z_s / (self.return_wavenumber() * self.camera_half_side)
    }

    /// Isoplanatic length of the screen at the return wavenumber.
    pub fn screen_l_c(&self) -> f64 {
        screen_correlation_length(self.screen_scale, self.return_wavenumber(), self.screen_sigma())
    }

    /// `(z_s/(k R_s²), σL/(ℓ_0 R_s))` at the return wavenumber.
    pub fn stationary_phase_validity(&self) -> (f64, f64) {
        stationary_phase_numbers(self.z_s, self.return_wavenumber(), self.pupil_radius, self.screen_sigma(), self.screen_distance, self.screen_scale)
    }

    pub fn screen_spec(&self) -> RandomFieldSpec {
        RandomFieldSpec {
            correlation_length: scale_to_correlation_length(self.screen_scale),
            side_length: self.window,
            points: self.grid_points,
            seed: self.screen_seed,
        }
    }

    pub fn slm_spec(&self, seed: u64) -> RandomFieldSpec {
        let g = self.slm_grid();
        RandomFieldSpec {
            correlation_length: scale_to_correlation_length(self.slm_scale),
            side_length: g.side(),
            points: self.grid_points,
            seed,
        }
    }

    /// Phase step per SLM pixel of the defocus term at the SLM pupil edge.
    pub fn slm_phase_step(&self) -> f64 {
        self.k0() * self.screen_distance * self.slm_radius * self.slm_grid().pitch / (self.z_s * self.z_s)
    }

    /// Phase step per spectral bin of the Fresnel transfer function at the
    /// illumination band edge `NA/λ`.
    pub fn fresnel_phase_step(&self) -> f64 {
        let band = self.na / self.lambda + 3.0 * self.screen_k0_sigma * std::f64::consts::SQRT_2
            / (2.0 * PI * scale_to_correlation_length(self.screen_scale));
        fresnel_step(self.screen_distance, self.k0(), band, self.window)
    }

    /// Physics and resolution checks; returns human-readable violations.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let h = self.pitch();
        if !(self.lambda > 0.0 && self.z_s > 0.0 && self.window > 0.0 && self.na > 0.0 && self.grid_points >= 8) {
            v.push("lengths, NA and grid size must be positive (grid ≥ 8)".into());
            return v;
        }
        if self.screen_distance <= 0.0 || self.screen_distance >= self.z_s {
            v.push(format!("screen distance {} must lie in (0, z_s)", self.screen_distance));
        }
        if h >= self.ell_c_in() {
            v.push(format!("grid pitch {h:.4} does not resolve λ/(2NA) = {:.4}", self.ell_c_in()));
        }
        let cam = self.camera();
        if cam.half < 1 || cam.half * cam.stride + 1 > self.grid_points / 2 {
            v.push(format!(
                "camera half-side {} exceeds the representable band {:.3} at pitch {h:.4}",
                self.camera_half_side,
                (self.grid_points / 2 - 1) as f64 * cam.du
            ));
        }
        if self.pupil_radius > self.window / 2.0 {
            v.push(format!("pupil radius {} exceeds half window {}", self.pupil_radius, self.window / 2.0));
        }
        if self.slm_radius > self.slm_grid().side() / 2.0 {
            v.push("SLM pupil exceeds the SLM window".into());
        }
        if self.slm_phase_step() > PI {
            v.push(format!("SLM defocus aliasing: {:.3} rad per pixel", self.slm_phase_step()));
        }
        if self.fresnel_phase_step() > PI {
            v.push(format!("Fresnel transfer aliasing: {:.3} rad per bin", self.fresnel_phase_step()));
        }
        for (name, scale, pitch) in [("screen", self.screen_scale, h), ("SLM", self.slm_scale, self.slm_grid().pitch)] {
            let len = scale_to_correlation_length(scale);
            if len <= 2.0 * pitch {
                v.push(format!("{name} correlation length {len:.3} under-resolved by pitch {pitch:.3}"));
            }
        }
        if self.camera_stride == 0 {
            v.push("camera stride must be ≥ 1".into());
        }
        v
    }
}

/// `(z_s/(k R_s²), σL/(ℓ_0 R_s))`.
pub fn stationary_phase_numbers(z_s: f64, k: f64, pupil_radius: f64, sigma: f64, screen_distance: f64, scale: f64) -> (f64, f64) {
    (z_s / (k * pupil_radius * pupil_radius), sigma * screen_distance / (scale * pupil_radius))
}

fn fresnel_step(distance: f64, k: f64, band: f64, side: f64) -> f64 {
    // d/dq of 2π² d f²/k with f = q/side
    4.0 * PI * PI * distance.abs() * band / (k * side)
}

/// Camera pixel layout on the return-path dual grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    /// Dual-grid pitch `2π z_s/(k L_D)`.
    pub du: f64,
    pub stride: usize,
    /// Pixels per half axis: indices `t ∈ [-half, half]`.
    pub half: usize,
    pub k: f64,
    pub z_s: f64,
}

impl Camera {
    pub fn new(cfg: &OpticsConfig, k: f64) -> Self {
        let du = 2.0 * PI * cfg.z_s / (k * cfg.window);
        let stride = cfg.camera_stride.max(1);
        let half = (cfg.camera_half_side / (stride as f64 * du) + 1e-9).floor() as usize;
        Self { du, stride, half, k, z_s: cfg.z_s }
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.du * self.stride as f64
    }

    pub fn side_pixels(&self) -> usize {
        2 * self.half + 1
    }

    pub fn pixels(&self) -> usize {
        self.side_pixels() * self.side_pixels()
    }

    /// Half-side of the square covered by the pixel cells (quadrature domain).
    pub fn quadrature_half_side(&self) -> f64 {
        self.side_pixels() as f64 * self.pixel_pitch() / 2.0
    }

    /// Coordinate of flattened pixel `p` (row-major over `(t1, t2)`).
    pub fn u(&self, p: usize) -> [f64; 2] {
        let m = self.side_pixels();
        let (a, b) = (p / m, p % m);
        [(a as f64 - self.half as f64) * self.pixel_pitch(), (b as f64 - self.half as f64) * self.pixel_pitch()]
    }

    pub fn coords(&self) -> Vec<[f64; 2]> {
        (0..self.pixels()).map(|p| self.u(p)).collect()
    }

    /// Pitch of the back-propagated image grid, `2π z_s/(k M Δu_c)`.
    pub fn image_pitch(&self) -> f64 {
        2.0 * PI * self.z_s / (self.k * self.side_pixels() as f64 * self.pixel_pitch())
    }

    /// Reshapes a flattened camera vector to its `M × M` array.
    pub fn to_array(&self, v: &Array1<Complex64>) -> Array2<Complex64> {
        let m = self.side_pixels();
        Array2::from_shape_fn((m, m), |(a, b)| v[a * m + b])
    }
}

/// A shared screen realization `S = σ V`.
#[derive(Debug, Clone)]
pub struct Screen {
    pub v: RealField,
    pub sigma: f64,
    pub radius: f64,
}

impl Screen {
    pub fn generate(cfg: &OpticsConfig) -> Result<Self> {
        let spec = cfg.screen_spec();
        let v = gaussian_field_with(&spec, &Fft2::new(spec.points))?;
        Ok(Self { v, sigma: cfg.screen_sigma(), radius: cfg.pupil_radius })
    }

    /// Screen with `S = 0` (pupil only).
    pub fn flat(cfg: &OpticsConfig) -> Self {
        let grid = cfg.grid();
        Self {
            v: RealField { values: Array2::zeros((grid.points, grid.points)), grid },
            sigma: 0.0,
            radius: cfg.pupil_radius,
        }
    }

    /// Path-length fluctuation `S(x)` by bilinear interpolation.
    pub fn s_at(&self, x: [f64; 2]) -> f64 {
        if self.sigma == 0.0 {
            0.0
        } else {
            self.sigma * self.v.interpolate(x)
        }
    }

    pub fn inside(&self, x: [f64; 2]) -> bool {
        x[0] * x[0] + x[1] * x[1] <= self.radius * self.radius
    }

    /// Transmission `e^{ikS} P` on the screen grid.
    pub fn transmission(&self, k: f64) -> Field {
        phase_screen(&self.v, k, self.sigma, self.radius)
    }
}

/// SLM-to-screen-plane field `W(x, L)`, normalized to preserve energy.
pub fn slm_illumination(cfg: &OpticsConfig, seed: u64) -> Result<Field> {
    let fft = Fft2::new(cfg.grid_points);
    let pre = slm_pupil_phase(cfg)?;
    slm_illumination_with(cfg, seed, &fft, &pre)
}

fn slm_pupil_phase(cfg: &OpticsConfig) -> Result<Array2<Complex64>> {
    let step = cfg.slm_phase_step();
    if step > PI {
        return Err(Error::Aliasing { stage: "SLM defocus", phase_step: step });
    }
    let g = cfg.slm_grid();
    let c = g.coords();
    let (k0, l, z) = (cfg.k0(), cfg.screen_distance, cfg.z_s);
    Ok(Array2::from_shape_fn((g.points, g.points), |(i, j)| {
        let r2 = c[i] * c[i] + c[j] * c[j];
        if r2 <= cfg.slm_radius * cfg.slm_radius {
            Complex64::from_polar(1.0, k0 * l * r2 / (2.0 * z * z))
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

fn slm_illumination_with(cfg: &OpticsConfig, seed: u64, fft: &Fft2, pre: &Array2<Complex64>) -> Result<Field> {
    let g = cfg.slm_grid();
    let mut f = pre.clone();
    if cfg.slm_sigma != 0.0 {
        let v = gaussian_field_with(&cfg.slm_spec(seed), fft)?;
        ndarray::Zip::from(&mut f).and(&v.values).for_each(|a, &b| {
            if *a != Complex64::new(0.0, 0.0) {
                *a *= Complex64::from_polar(1.0, cfg.slm_sigma * b);
            }
        });
    }
    let scale = Complex64::from_polar(g.pitch * g.pitch / (cfg.lambda * cfg.z_s), cfg.k0() * (2.0 * cfg.z_s - cfg.screen_distance));
    let values = fft.centered(f.view(), Sign::Negative).mapv(|z| z * scale);
    Field::new(values, cfg.pitch(), Plane::Screen)
}

/// Unimodular Fresnel transfer function `e^{ikd} e^{-i 2π² d |f|²/k}` on the centered bins.
fn fresnel_transfer(grid: Grid, distance: f64, k: f64) -> Array2<Complex64> {
    let f: Vec<f64> = (0..grid.points).map(|q| grid.frequency(q)).collect();
    let a = 2.0 * PI * PI * distance / k;
    Array2::from_shape_fn((grid.points, grid.points), |(i, j)| Complex64::from_polar(1.0, k * distance - a * (f[i] * f[i] + f[j] * f[j])))
}

/// Radius (cycles per λ) enclosing all but `1e-10` of the spectral energy.
fn band_edge(spec: &Array2<Complex64>, grid: Grid) -> f64 {
    let n = grid.points;
    let nbins = n;
    let fmax = (2.0f64).sqrt() * (n / 2) as f64 / grid.side();
    let mut hist = vec![0.0; nbins + 1];
    let mut total = 0.0;
    for i in 0..n {
        let fi = grid.frequency(i);
        for j in 0..n {
            let fj = grid.frequency(j);
            let e = spec[[i, j]].norm_sqr();
            let r = (fi * fi + fj * fj).sqrt();
            hist[((r / fmax) * nbins as f64) as usize] += e;
            total += e;
        }
    }
    let mut tail = 0.0;
    for b in (0..=nbins).rev() {
        tail += hist[b];
        if tail > 1e-10 * total {
            return (b + 1) as f64 * fmax / nbins as f64;
        }
    }
    0.0
}

/// Paraxial propagation by `distance` (negative values back-propagate).
///
/// Unitary on the grid; rejects inputs whose band edge would alias the
/// transfer-function chirp.
pub fn fresnel_propagate(f: &Field, distance: f64, k: f64) -> Result<Field> {
    let fft = Fft2::new(f.grid.points);
    let spec = fft.centered(f.values.view(), Sign::Negative);
    let step = fresnel_step(distance, k, band_edge(&spec, f.grid), f.grid.side());
    if step > PI {
        return Err(Error::Aliasing { stage: "Fresnel transfer", phase_step: step });
    }
    let h = fresnel_transfer(f.grid, distance, k);
    let prod = &spec * &h;
    let n2 = (f.grid.points * f.grid.points) as f64;
    let values = fft.centered(prod.view(), Sign::Positive).mapv(|z| z / n2);
    Ok(Field { values, grid: f.grid, plane: f.plane })
}

/// Generates sample-plane illuminations for one screen realization.
pub struct Illuminator {
    cfg: OpticsConfig,
    fft: Fft2,
    slm_pre: Array2<Complex64>,
    screen: Field,
    transfer: Array2<Complex64>,
}

impl Illuminator {
    pub fn new(cfg: &OpticsConfig, screen: &Screen) -> Result<Self> {
        let step = cfg.fresnel_phase_step();
        if step > PI {
            return Err(Error::Aliasing { stage: "Fresnel transfer", phase_step: step });
        }
        let grid = cfg.grid();
        if screen.v.grid.points != grid.points || (screen.v.grid.pitch - grid.pitch).abs() > 1e-12 * grid.pitch {
            return Err(Error::GridMismatch("screen realization does not match the sample grid".into()));
        }
        Ok(Self {
            cfg: cfg.clone(),
            fft: Fft2::new(cfg.grid_points),
            slm_pre: slm_pupil_phase(cfg)?,
            screen: screen.transmission(cfg.k0()),
            transfer: fresnel_transfer(grid, cfg.screen_distance, cfg.k0()),
        })
    }

    /// Spectrum of `W(·, 0)` on the centered bins (unnormalized inverse DFT convention).
    fn spectrum(&self, seed: u64) -> Result<Array2<Complex64>> {
        let at_screen = slm_illumination_with(&self.cfg, seed, &self.fft, &self.slm_pre)?;
        let through = &at_screen.values * &self.screen.values;
        Ok(self.fft.centered(through.view(), Sign::Negative) * &self.transfer)
    }

    /// Full sample-plane field `W(·, 0)`.
    pub fn field(&self, seed: u64) -> Result<Field> {
        let spec = self.spectrum(seed)?;
        let n2 = (self.cfg.grid_points * self.cfg.grid_points) as f64;
        let values = self.fft.centered(spec.view(), Sign::Positive).mapv(|z| z / n2);
        Field::new(values, self.cfg.pitch(), Plane::Sample)
    }

    /// `W(x, 0)` at arbitrary points (band-limited interpolation).
    pub fn at(&self, seed: u64, points: &[[f64; 2]]) -> Result<Vec<Complex64>> {
        let spec = self.spectrum(seed)?;
        let n2 = (self.cfg.grid_points * self.cfg.grid_points) as f64;
        Ok(points.iter().map(|&x| evaluate_at(spec.view(), self.cfg.window, x, Sign::Positive) / n2).collect())
    }
}

/// Sample-plane illumination for the screen realization selected by `cfg.screen_seed`.
pub fn incoming_field(cfg: &OpticsConfig, seed: u64) -> Result<Field> {
    let screen = Screen::generate(cfg)?;
    Illuminator::new(cfg, &screen)?.field(seed)
}

/// Random-geometrical-optics Green's function at one camera point.
pub fn green_rgo(cfg: &OpticsConfig, u: [f64; 2], x: [f64; 2], screen: &Screen) -> Complex64 {
    let k = cfg.return_wavenumber();
    let r = cfg.screen_distance / cfg.z_s;
    let v = [x[0] + r * u[0], x[1] + r * u[1]];
    if !screen.inside(v) {
        return Complex64::new(0.0, 0.0);
    }
    let phase = -k * (u[0] * x[0] + u[1] * x[1]) / cfg.z_s + k * screen.s_at(v);
    Complex64::from_polar(1.0, phase)
}

/// [`green_rgo`] over all camera pixels.
pub fn green_rgo_camera(cfg: &OpticsConfig, x: [f64; 2], screen: &Screen) -> Array1<Complex64> {
    let cam = cfg.camera();
    Array1::from_iter((0..cam.pixels()).map(|p| green_rgo(cfg, cam.u(p), x, screen)))
}

/// Full-wave Green's functions on the camera for one screen realization.
///
/// The screen plane is resampled by an integer factor so that the point-source
/// chirp `e^{ik|v-x|²/2L}` stays below π per sample out to the pupil edge.
pub struct GreenSolver {
    cfg: OpticsConfig,
    camera: Camera,
    oversample: usize,
    fine_grid: Grid,
    fft: Fft2,
    transmission: Array2<Complex64>,
    max_offset: f64,
}

impl GreenSolver {
    /// `max_offset` bounds `|x_j|` for the scatterers that will be queried.
    pub fn new(cfg: &OpticsConfig, screen: &Screen, max_offset: f64) -> Result<Self> {
        let k = cfg.return_wavenumber();
        let h = cfg.pitch();
        let reach = screen.radius + max_offset;
        let mut oversample = 1usize;
        while k * reach * h / (oversample as f64 * cfg.screen_distance) > PI {
            oversample *= 2;
            if oversample > 8 {
                return Err(Error::Aliasing { stage: "Green's function chirp", phase_step: k * reach * h / cfg.screen_distance });
            }
        }
        let n = cfg.grid_points;
        let nf = n * oversample;
        let fine_grid = Grid::new(nf, h / oversample as f64);
        let fine_v = if oversample == 1 || screen.sigma == 0.0 {
            if screen.sigma == 0.0 {
                Array2::zeros((nf, nf))
            } else {
                screen.v.values.clone()
            }
        } else {
            upsample(&screen.v.values, oversample)
        };
        let c = fine_grid.coords();
        let transmission = Array2::from_shape_fn((nf, nf), |(i, j)| {
            if c[i] * c[i] + c[j] * c[j] <= screen.radius * screen.radius {
                Complex64::from_polar(1.0, k * screen.sigma * fine_v[[i, j]])
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        Ok(Self { cfg: cfg.clone(), camera: Camera::new(cfg, k), oversample, fine_grid, fft: Fft2::new(nf), transmission, max_offset })
    }

    pub fn camera(&self) -> &Camera {
        &self.camera
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }

    /// `G(u; x)` on the camera pixels, without the constant propagation phase, so
    /// that the free-space limit is the plane wave `e^{-ik u·x/z_s}`.
    pub fn green(&self, x: [f64; 2]) -> Result<Array1<Complex64>> {
        if x[0].hypot(x[1]) > self.max_offset + 1e-12 {
            return Err(Error::InvalidArgument(format!("scatterer offset {:?} exceeds the solver bound {}", x, self.max_offset)));
        }
        let cfg = &self.cfg;
        let k = self.camera.k;
        let l = cfg.screen_distance;
        let c = self.fine_grid.coords();
        let nf = self.fine_grid.points;
        let mut f = self.transmission.clone();
        for i in 0..nf {
            let dx = c[i] - x[0];
            for j in 0..nf {
                let a = &mut f[[i, j]];
                if *a != Complex64::new(0.0, 0.0) {
                    let dy = c[j] - x[1];
                    *a *= Complex64::from_polar(1.0, k * (dx * dx + dy * dy) / (2.0 * l));
                }
            }
        }
        let spec = self.fft.centered(f.view(), Sign::Negative);
        let hf = self.fine_grid.pitch;
        let global = Complex64::new(0.0, -k * hf * hf / (2.0 * PI * l));
        let centre = nf / 2;
        let cam = &self.camera;
        let m = cam.side_pixels();
        let mut out = Array1::zeros(cam.pixels());
        for a in 0..m {
            for b in 0..m {
                let ia = (centre as isize + (a as isize - cam.half as isize) * cam.stride as isize) as usize;
                let ib = (centre as isize + (b as isize - cam.half as isize) * cam.stride as isize) as usize;
                let p = a * m + b;
                let u = cam.u(p);
                let quad = k * l * (u[0] * u[0] + u[1] * u[1]) / (2.0 * cfg.z_s * cfg.z_s);
                out[p] = spec[[ia, ib]] * global * Complex64::from_polar(1.0, quad);
            }
        }
        Ok(out)
    }
}

/// Band-limited upsampling of a real periodic grid by an integer factor.
fn upsample(values: &Array2<f64>, factor: usize) -> Array2<f64> {
    let n = values.nrows();
    let nf = n * factor;
    let spec = Fft2::new(n).centered(values.mapv(|v| Complex64::new(v, 0.0)).view(), Sign::Negative);
    let mut padded = Array2::zeros((nf, nf));
    let off = nf / 2 - n / 2;
    for i in 0..n {
        for j in 0..n {
            padded[[i + off, j + off]] = spec[[i, j]];
        }
    }
    let n2 = (n * n) as f64;
    Fft2::new(nf).centered(padded.view(), Sign::Positive).mapv(|z| z.re / n2)
}

/// Single-scatterer convenience wrapper around [`GreenSolver`].
pub fn green_full(cfg: &OpticsConfig, x: [f64; 2], screen: &Screen) -> Result<Array1<Complex64>> {
    GreenSolver::new(cfg, screen, x[0].hypot(x[1]))?.green(x)
}

/// Phase-invariant normalized inner product `|⟨a, b⟩|/(‖a‖‖b‖)`.
pub fn normalized_overlap(a: &Array1<Complex64>, b: &Array1<Complex64>) -> f64 {
    let ip: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    let na = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let nb = b.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    ip.norm() / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(modality: Modality, na: f64) -> OpticsConfig {
        let mut c = OpticsConfig::desk(modality, na);
        c.grid_points = 256;
        c.window = 62.5;
        c.z_s = 62.5;
        c.screen_distance = 0.25 * c.z_s;
        c.slm_radius = na * c.z_s;
        c.camera_half_side = na * c.z_s;
        c.pupil_radius = 0.45 * c.window;
        c.camera_stride = 2;
        c
    }

    #[test]
    fn table1_stationary_phase_number() {
        let c = OpticsConfig::table1(Modality::Linear, 0.75);
        let (a1, _) = c.stationary_phase_validity();
        assert!((a1 - 500.0 / (2.0 * PI * 225.0 * 225.0)).abs() < 1e-15);
        assert!((a1 - 1.57e-3).abs() < 0.01e-3);
        let (_, a2) = stationary_phase_numbers(500.0, 2.0 * PI, 225.0, 0.0, 125.0, 4.0);
        assert_eq!(a2, 0.0);
        let (b1, b2) = stationary_phase_numbers(500.0, 2.0 * PI, 450.0, 0.2, 125.0, 4.0);
        let (c1, c2) = stationary_phase_numbers(500.0, 2.0 * PI, 225.0, 0.2, 125.0, 4.0);
        assert!((b1 * 4.0 - c1).abs() < 1e-15 && (b2 * 2.0 - c2).abs() < 1e-15);
    }

    #[test]
    fn profiles_pass_checks_and_report_lengths() {
        for m in [Modality::Shg, Modality::Linear] {
            let c = OpticsConfig::desk(m, if m == Modality::Shg { 0.75 } else { 1.5 });
            assert!(c.violations().is_empty(), "{:?}", c.violations());
        }
        let shg = OpticsConfig::desk(Modality::Shg, 0.75);
        assert!((shg.ell_c_out() - 1.0 / (4.0 * 0.75)).abs() < 1e-12);
        assert!((shg.ell_c_in() - 1.0 / 1.5).abs() < 1e-12);
        let mut lin = OpticsConfig::desk(Modality::Linear, 1.5);
        lin.screen_k0_sigma = 3.0;
        assert!((lin.screen_l_c() - 2.0 * 2f64.sqrt() * 4.0 / 3.0).abs() < 1e-12);
        lin.grid_points = 32;
        assert!(lin.violations().iter().any(|v| v.contains("resolve")));
    }

    #[test]
    fn slm_transform_preserves_energy() {
        let c = small(Modality::Linear, 0.75);
        let w = slm_illumination(&c, 3).unwrap();
        let g = c.slm_grid();
        let input = slm_pupil_phase(&c).unwrap().iter().map(|z| z.norm_sqr()).sum::<f64>() * g.pitch * g.pitch;
        assert!((w.energy() - input).abs() < 1e-6 * input);
    }

    #[test]
    fn unmodulated_slm_gives_centered_airy_pattern() {
        let mut c = small(Modality::Linear, 0.75);
        c.slm_sigma = 0.0;
        c.screen_distance = 1e-9;
        let w = slm_illumination(&c, 0).unwrap();
        let (imax, _) = w.values.iter().enumerate().fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
        let n = c.grid_points;
        assert_eq!((imax / n, imax % n), (n / 2, n / 2));
    }

    #[test]
    fn fresnel_round_trip_and_unitarity() {
        let c = small(Modality::Linear, 0.75);
        let w = slm_illumination(&c, 5).unwrap();
        let k = c.k0();
        let fwd = fresnel_propagate(&w, c.screen_distance, k).unwrap();
        assert!((fwd.energy() - w.energy()).abs() < 1e-6 * w.energy());
        let back = fresnel_propagate(&fwd, -c.screen_distance, k).unwrap();
        let err = (&back.values - &w.values).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let norm = w.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-8 * norm);
    }

    #[test]
    fn gaussian_beam_matches_closed_form() {
        let n = 256;
        let pitch = 0.25;
        let grid = Grid::new(n, pitch);
        let (w0, d, k) = (3.0, 20.0, 2.0 * PI);
        let cs = grid.coords();
        let beam = Array2::from_shape_fn((n, n), |(i, j)| Complex64::new((-(cs[i] * cs[i] + cs[j] * cs[j]) / (w0 * w0)).exp(), 0.0));
        let f = Field::new(beam, pitch, Plane::Sample).unwrap();
        let out = fresnel_propagate(&f, d, k).unwrap();
        let zr = k * w0 * w0 / 2.0;
        let q = Complex64::new(1.0, d / zr);
        let peak = 1.0 / q.norm();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let r2 = cs[i] * cs[i] + cs[j] * cs[j];
                let want = Complex64::from_polar(1.0, k * d) / q * (-(r2) / (w0 * w0 * q)).exp();
                err = err.max((out.values[[i, j]] - want).norm());
            }
        }
        assert!(err < 1e-3 * peak, "max error {err}");
    }

    #[test]
    fn rgo_is_unimodular_and_plane_wave_without_screen() {
        let c = small(Modality::Shg, 0.75);
        let flat = Screen::flat(&c);
        let x = [1.3, -0.7];
        let g = green_rgo_camera(&c, x, &flat);
        let cam = c.camera();
        let k = c.return_wavenumber();
        for p in 0..cam.pixels() {
            let u = cam.u(p);
            let want = Complex64::from_polar(1.0, -k * (u[0] * x[0] + u[1] * x[1]) / c.z_s);
            assert!((g[p] - want).norm() < 1e-12);
        }
        let rough = Screen::generate(&c).unwrap();
        for z in green_rgo_camera(&c, x, &rough).iter() {
            let m = z.norm();
            assert!(m == 0.0 || (m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_green_agrees_with_rgo() {
        let mut c = small(Modality::Shg, 0.75);
        c.screen_k0_sigma = 1.0;
        let screen = Screen::generate(&c).unwrap();
        let x = [0.8, -1.1];
        let full = green_full(&c, x, &screen).unwrap();
        let rgo = green_rgo_camera(&c, x, &screen);
        let ov = normalized_overlap(&full, &rgo);
        assert!(ov > 0.9, "overlap {ov}");
    }

    #[test]
    fn distant_scatterers_are_nearly_orthogonal() {
        let c = small(Modality::Linear, 0.75);
        let screen = Screen::generate(&c).unwrap();
        let solver = GreenSolver::new(&c, &screen, 4.0).unwrap();
        let a = solver.green([-2.0, 0.5]).unwrap();
        let b = solver.green([2.0, -0.5]).unwrap();
        assert!(normalized_overlap(&a, &b) < 0.2);
    }

    #[test]
    fn free_space_full_green_is_a_tilted_plane_wave() {
        let c = small(Modality::Linear, 0.75);
        let flat = Screen::flat(&c);
        let x = [0.5, -0.3];
        let g = GreenSolver::new(&c, &flat, 1.0).unwrap().green(x).unwrap();
        let cam = c.camera();
        let k = c.return_wavenumber();
        let plane = Array1::from_iter((0..cam.pixels()).map(|p| {
            let u = cam.u(p);
            Complex64::from_polar(1.0, -k * (u[0] * x[0] + u[1] * x[1]) / c.z_s)
        }));
        let ip: Complex64 = plane.iter().zip(&g).map(|(a, b)| a.conj() * b).sum();
        let ov = normalized_overlap(&g, &plane);
        assert!(ov > 0.95, "overlap {ov}");
        // pupil-edge ripple is zero-mean, so the projected phase is the plane wave's
        assert!(ip.arg().abs() < 0.1, "residual phase {}", ip.arg());
    }
}
