//! Point-scatterer scenes and reflection-matrix assembly.

use std::path::Path;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{SampleMatrix, SamplingAxis};
use crate::optics::{green_rgo_camera, Camera, GreenSolver, Illuminator, Modality, OpticsConfig, Screen};
use crate::rngfield::{complex_circular_noise, rng, split_seed};

/// Point scatterers inside a square window centered on the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub positions: Vec<[f64; 2]>,
    /// Scattering amplitudes `V_s(x_j)`.
    pub amplitudes: Vec<Complex64>,
    pub window_side: f64,
    pub min_separation: f64,
}

impl Scene {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Largest distance from the origin.
    pub fn max_offset(&self) -> f64 {
        self.positions.iter().map(|x| x[0].hypot(x[1])).fold(0.0, f64::max)
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for (i, a) in self.positions.iter().enumerate() {
            for b in &self.positions[i + 1..] {
                d = d.min((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        d
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x", "y", "re_amp", "im_amp"])?;
        for (x, a) in self.positions.iter().zip(&self.amplitudes) {
            w.serialize((x[0], x[1], a.re, a.im))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a scene written by [`Scene::write_csv`]; the window is the given side.
    pub fn read_csv(path: &Path, window_side: f64) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut positions = Vec::new();
        let mut amplitudes = Vec::new();
        for rec in r.deserialize() {
            let (x, y, re, im): (f64, f64, f64, f64) = rec?;
            if x.abs() > window_side / 2.0 || y.abs() > window_side / 2.0 {
                return Err(Error::InvalidArgument(format!("scatterer ({x}, {y}) lies outside the {window_side}λ window")));
            }
            positions.push([x, y]);
            amplitudes.push(Complex64::new(re, im));
        }
        Ok(Self { positions, amplitudes, window_side, min_separation: 0.0 })
    }
}

const ATTEMPTS_PER_POINT: usize = 2000;
const RESTARTS: usize = 50;

/// Uniform i.i.d. positions with unit amplitudes, resampled until all pairwise
/// distances reach `min_separation`.
pub fn make_scene(count: usize, window_side: f64, min_separation: f64, seed: u64) -> Result<Scene> {
    if !(window_side > 0.0) || !(min_separation >= 0.0) {
        return Err(Error::InvalidArgument("window must be positive and separation non-negative".into()));
    }
    let half = window_side / 2.0;
    let mut r = rng(seed);
    let packing_error = || Error::Packing { count, window: window_side, min_separation, attempts: RESTARTS * ATTEMPTS_PER_POINT };
    // Disks of radius min_separation/2 cannot cover more than the window grown by that radius.
    let grown = window_side + min_separation;
    if count as f64 * std::f64::consts::PI * min_separation * min_separation / 4.0 > 0.9069 * grown * grown {
        return Err(packing_error());
    }
    'restart: for _ in 0..RESTARTS {
        let mut positions: Vec<[f64; 2]> = Vec::with_capacity(count);
        while positions.len() < count {
            let mut placed = false;
            for _ in 0..ATTEMPTS_PER_POINT {
                let p = [r.random_range(-half..=half), r.random_range(-half..=half)];
                if positions.iter().all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) >= min_separation) {
                    positions.push(p);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'restart;
            }
        }
        return Ok(Scene { amplitudes: vec![Complex64::new(1.0, 0.0); count], positions, window_side, min_separation });
    }
    Err(packing_error())
}

/// Which Green's function generates the return path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GreenModel {
    #[default]
    Full,
    Rgo,
}

/// Which factor of `R = GρH^T` plays the role of the sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Sources `G^*`, sampled over camera pixels.
    U,
    /// Sources `H^T`, sampled over illuminations.
    V,
}

/// Noiseless factors of the reflection matrix for one scene and screen.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    /// `G_{iℓ}`, camera pixels × scatterers.
    pub green: Array2<Complex64>,
    /// `H_{jℓ}`, illuminations × scatterers.
    pub incident: Array2<Complex64>,
    pub amplitudes: Array1<Complex64>,
    pub camera: Camera,
    pub illumination_seeds: Vec<u64>,
    pub modality: Modality,
}

impl ForwardModel {
    /// Draws the screen from `cfg.screen_seed` and evaluates `N_r` illuminations
    /// with seeds `split_seed(seed, j)`.
    pub fn new(scene: &Scene, cfg: &OpticsConfig, illuminations: usize, seed: u64, model: GreenModel) -> Result<Self> {
        if scene.is_empty() {
            return Err(Error::InvalidArgument("scene has no scatterers".into()));
        }
        let screen = Screen::generate(cfg)?;
        Self::with_screen(scene, cfg, &screen, illuminations, seed, model)
    }

    pub fn with_screen(scene: &Scene, cfg: &OpticsConfig, screen: &Screen, illuminations: usize, seed: u64, model: GreenModel) -> Result<Self> {
        let n = scene.len();
        let camera = cfg.camera();
        let columns: Vec<Array1<Complex64>> = match model {
            GreenModel::Full => {
                let solver = GreenSolver::new(cfg, screen, scene.max_offset())?;
                scene.positions.par_iter().map(|&x| solver.green(x)).collect::<Result<_>>()?
            }
            GreenModel::Rgo => scene.positions.iter().map(|&x| green_rgo_camera(cfg, x, screen)).collect(),
        };
        let mut green = Array2::zeros((camera.pixels(), n));
        for (l, c) in columns.iter().enumerate() {
            green.column_mut(l).assign(c);
        }

        let illuminator = Illuminator::new(cfg, screen)?;
        let seeds: Vec<u64> = (0..illuminations as u64).map(|j| split_seed(seed, j)).collect();
        let rows: Vec<Vec<Complex64>> = seeds.par_iter().map(|&s| illuminator.at(s, &scene.positions)).collect::<Result<_>>()?;
        let power = cfg.modality.harmonic() as i32;
        let incident = Array2::from_shape_fn((illuminations, n), |(j, l)| rows[j][l].powi(power));
        Ok(Self {
            green,
            incident,
            amplitudes: Array1::from(scene.amplitudes.clone()),
            camera,
            illumination_seeds: seeds,
            modality: cfg.modality,
        })
    }

    /// `GρH^T`.
    pub fn noiseless(&self) -> Array2<Complex64> {
        let mut g = self.green.clone();
        for (mut col, a) in g.columns_mut().into_iter().zip(&self.amplitudes) {
            col.mapv_inplace(|z| z * a);
        }
        g.dot(&self.incident.t())
    }

    pub fn reflection_matrix(&self, noise_sigma: f64, noise_seed: u64) -> Result<ReflectionMatrix> {
        let mut entries = self.noiseless();
        if noise_sigma > 0.0 {
            let (p, r) = entries.dim();
            let n = complex_circular_noise(p, r, noise_sigma, noise_seed, SamplingAxis::CameraPixels)?;
            entries += &n.data;
        }
        Ok(ReflectionMatrix {
            entries,
            pixels: self.camera.coords(),
            illumination_seeds: self.illumination_seeds.clone(),
            modality: self.modality,
            noise_sigma,
        })
    }

    /// True sources for one side, each row scaled to unit empirical second moment.
    pub fn sources(&self, side: Side) -> SampleMatrix {
        let (data, axis) = match side {
            Side::U => (self.green.t().mapv(|z| z.conj()), SamplingAxis::CameraPixels),
            Side::V => (self.incident.t().to_owned(), SamplingAxis::Realizations),
        };
        SampleMatrix::new(data, axis).normalized_rows()
    }
}

/// Measured fields: camera pixels × illuminations.
#[derive(Debug, Clone)]
pub struct ReflectionMatrix {
    pub entries: Array2<Complex64>,
    pub pixels: Vec<[f64; 2]>,
    pub illumination_seeds: Vec<u64>,
    pub modality: Modality,
    pub noise_sigma: f64,
}

impl ReflectionMatrix {
    pub fn pixels(&self) -> usize {
        self.entries.nrows()
    }

    pub fn illuminations(&self) -> usize {
        self.entries.ncols()
    }
}

/// Noise seed used by [`reflection_matrix`] for a given base seed.
pub fn noise_seed(seed: u64) -> u64 {
    split_seed(seed, u64::MAX)
}

/// `R = GρH^T + n` with the full Green's function.
pub fn reflection_matrix(scene: &Scene, cfg: &OpticsConfig, illuminations: usize, noise_sigma: f64, seed: u64) -> Result<ReflectionMatrix> {
    ForwardModel::new(scene, cfg, illuminations, seed, GreenModel::Full)?.reflection_matrix(noise_sigma, noise_seed(seed))
}

/// Ground-truth sources for `side`, using the same construction as [`reflection_matrix`].
pub fn sources_ground_truth(scene: &Scene, cfg: &OpticsConfig, illuminations: usize, seed: u64, side: Side) -> Result<SampleMatrix> {
    Ok(ForwardModel::new(scene, cfg, illuminations, seed, GreenModel::Full)?.sources(side))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::kurtosis_of;
    use ndarray_linalg::SVD;

    fn cfg(modality: Modality) -> OpticsConfig {
        let mut c = OpticsConfig::desk(modality, 0.75);
        c.grid_points = 256;
        c.window = 62.5;
        c.z_s = 62.5;
        c.screen_distance = 0.25 * c.z_s;
        c.slm_radius = 0.75 * c.z_s;
        c.camera_half_side = 0.75 * c.z_s;
        c.pupil_radius = 0.45 * c.window;
        c.camera_stride = 2;
        c
    }

    fn singular_values(a: &Array2<Complex64>) -> Vec<f64> {
        a.svd(false, false).unwrap().1.to_vec()
    }

    #[test]
    fn single_scatterer_scene() {
        let s = make_scene(1, 4.0, 10.0, 1).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.positions[0].iter().all(|v| v.abs() <= 2.0));
    }

    #[test]
    fn scene_stays_in_window() {
        let s = make_scene(50, 12.0, 0.0, 4).unwrap();
        assert_eq!(s.len(), 50);
        assert!(s.positions.iter().all(|p| p[0].abs() <= 6.0 && p[1].abs() <= 6.0));
        assert!(s.amplitudes.iter().all(|a| *a == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn separation_is_enforced() {
        let s = make_scene(10, 8.0, 1.0, 3).unwrap();
        let mut pairs = 0;
        for i in 0..10 {
            for j in i + 1..10 {
                let (a, b) = (s.positions[i], s.positions[j]);
                assert!((a[0] - b[0]).hypot(a[1] - b[1]) >= 1.0);
                pairs += 1;
            }
        }
        assert_eq!(pairs, 45);
    }

    #[test]
    fn infeasible_packing_is_reported() {
        assert!(matches!(make_scene(100, 2.0, 1.0, 1), Err(Error::Packing { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let s = make_scene(4, 6.0, 1.0, 8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scene.csv");
        s.write_csv(&p).unwrap();
        let back = Scene::read_csv(&p, 6.0).unwrap();
        assert_eq!(back.positions, s.positions);
        assert_eq!(back.amplitudes, s.amplitudes);
    }

    #[test]
    fn noiseless_rank_matches_scatterer_count() {
        let c = cfg(Modality::Shg);
        let one = make_scene(1, 4.0, 0.0, 2).unwrap();
        let sv = singular_values(&reflection_matrix(&one, &c, 20, 0.0, 5).unwrap().entries);
        assert!(sv[1] / sv[0] < 1e-8);
        let three = make_scene(3, 4.0, 1.0, 2).unwrap();
        let sv = singular_values(&reflection_matrix(&three, &c, 20, 0.0, 5).unwrap().entries);
        assert!(sv[2] / sv[0] > 1e-6 && sv[3] / sv[0] < 1e-8, "{sv:?}");
    }

    #[test]
    fn shg_squares_linear_incident_fields() {
        let scene = make_scene(2, 4.0, 1.0, 6).unwrap();
        let shg = ForwardModel::new(&scene, &cfg(Modality::Shg), 8, 3, GreenModel::Rgo).unwrap();
        let lin = ForwardModel::new(&scene, &cfg(Modality::Linear), 8, 3, GreenModel::Rgo).unwrap();
        for (a, b) in shg.incident.iter().zip(lin.incident.iter()) {
            assert!((a - b * b).norm() < 1e-12 * (1.0 + a.norm()));
        }
        for (a, b) in shg.green.iter().zip(lin.green.iter()) {
            assert_eq!(a.norm() == 0.0, b.norm() == 0.0);
        }
    }

    #[test]
    fn reflection_matrix_is_additive_in_scenes() {
        let c = cfg(Modality::Linear);
        let screen = Screen::generate(&c).unwrap();
        let a = make_scene(2, 4.0, 1.0, 10).unwrap();
        let b = make_scene(2, 4.0, 1.0, 11).unwrap();
        let mut both = a.clone();
        both.positions.extend(&b.positions);
        both.amplitudes.extend(&b.amplitudes);
        let r = |s: &Scene| ForwardModel::with_screen(s, &c, &screen, 6, 4, GreenModel::Rgo).unwrap().noiseless();
        let diff = &r(&both) - &(r(&a) + r(&b));
        assert!(diff.iter().all(|z| z.norm() < 1e-10));
    }

    #[test]
    fn ground_truth_sources() {
        let c = cfg(Modality::Shg);
        let scene = make_scene(2, 4.0, 1.0, 12).unwrap();
        let fm = ForwardModel::new(&scene, &c, 400, 9, GreenModel::Rgo).unwrap();
        for z in fm.green.iter() {
            assert!(z.norm() == 0.0 || (z.norm() - 1.0).abs() < 1e-12);
        }
        for side in [Side::U, Side::V] {
            let s = fm.sources(side);
            for i in 0..s.variables() {
                let m2 = s.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>() / s.samples() as f64;
                assert!((m2 - 1.0).abs() < 1e-12);
            }
        }
        // 4 in expectation; the eighth-moment estimator is too noisy at 400 samples for more than the sign
        let v = fm.sources(Side::V);
        let k = kurtosis_of(v.row(0)).unwrap().value;
        assert!(k > 1.0, "kurtosis {k}");
    }
}
