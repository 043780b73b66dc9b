//! Reflection matrix → SVD → separation → DORT and improved-DORT images.

use ndarray::{Array1, Array2};
use ndarray_linalg::Inverse;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ica::{align_sources, separate, Alignment, ExtractionOptions, SeparationResult};
use crate::imaging::{dort, improved_dort, localization_score, svd_truncate, BackPropagator, ImageGrid, ImprovedDort, ImprovedDortOptions, LocalizationScore, Truncation};
use crate::moments::{whiten, SampleMatrix, SamplingAxis};
use crate::optics::{OpticsConfig, Screen};
use crate::rngfield::split_seed;
use crate::scene::{make_scene, ForwardModel, GreenModel, Scene, Side};
use crate::separability::{rgo_check_all, RgoCheck};

/// Scene draws rejected for resonant triples before giving up.
pub const SCENE_ATTEMPTS: u64 = 200;

/// Everything one imaging run consumes.
#[derive(Debug, Clone)]
pub struct ImagingSetup {
    pub optics: OpticsConfig,
    pub side: Side,
    pub count: usize,
    pub window: f64,
    pub min_separation: f64,
    pub avoid_resonances: bool,
    pub realizations: usize,
    pub noise_sigma: f64,
    pub green_model: GreenModel,
    pub ica: ExtractionOptions,
    pub imaging: ImprovedDortOptions,
    pub tolerance_px: f64,
}

/// Per-run seeds derived from the run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub run: u64,
    pub scene: u64,
    pub screen: u64,
    pub illumination: u64,
    pub noise: u64,
    pub ica: u64,
}

impl RunSeeds {
    pub fn derive(run: u64) -> Self {
        Self {
            run,
            scene: split_seed(run, 0),
            screen: split_seed(run, 1),
            illumination: split_seed(run, 2),
            noise: split_seed(run, 3),
            ica: split_seed(run, 4),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ImagingOutcome {
    pub seeds: RunSeeds,
    pub scene: Scene,
    /// Scene draws rejected before this one.
    pub rejected_scenes: u64,
    pub rgo_checks: Vec<RgoCheck>,
    pub singular_values: Vec<f64>,
    pub separation: SeparationResult,
    /// Recovered sources against the true ones.
    pub alignment: Alignment,
    pub improved: ImprovedDort,
    pub dort: ImageGrid,
    pub improved_score: LocalizationScore,
    pub dort_score: LocalizationScore,
}

impl ImagingOutcome {
    pub fn improved_hit_rate(&self) -> f64 {
        self.improved_score.hits as f64 / self.scene.len() as f64
    }
}

/// Draws a scene, rejecting resonant triples when requested.
pub fn draw_scene(setup: &ImagingSetup, seed: u64) -> Result<(Scene, u64, Vec<RgoCheck>)> {
    for attempt in 0..SCENE_ATTEMPTS {
        let scene = make_scene(setup.count, setup.window, setup.min_separation, split_seed(seed, attempt))?;
        let checks = rgo_check_all(&scene, &setup.optics)?;
        if !setup.avoid_resonances || checks.iter().all(|c| c.resonances.is_empty()) {
            return Ok((scene, attempt, checks));
        }
    }
    Err(Error::InvalidArgument(format!("no resonance-free scene in {SCENE_ATTEMPTS} draws")))
}

/// `R · pinv(S)` for `S` of shape `N × N_r`.
fn green_from_incident(r: &Array2<Complex64>, s: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let sh = s.t().mapv(|z| z.conj());
    let gram = s.dot(&sh);
    let inv = gram.inv()?;
    Ok(r.dot(&sh).dot(&inv))
}

pub fn run_imaging(setup: &ImagingSetup, run_seed: u64) -> Result<ImagingOutcome> {
    let seeds = RunSeeds::derive(run_seed);
    let (scene, rejected_scenes, rgo_checks) = draw_scene(setup, seeds.scene)?;
    let mut optics = setup.optics.clone();
    optics.screen_seed = seeds.screen;
    let screen = Screen::generate(&optics)?;
    let fm = ForwardModel::with_screen(&scene, &optics, &screen, setup.realizations, seeds.illumination, setup.green_model)?;
    let r = fm.reflection_matrix(setup.noise_sigma, seeds.noise)?;
    let n = scene.len();
    let svd = svd_truncate(&r.entries, Truncation::Fixed(n))?;

    let data = match setup.side {
        Side::U => SampleMatrix::new(svd.u.t().mapv(|z| z.conj()), SamplingAxis::CameraPixels),
        Side::V => SampleMatrix::new(svd.v.t().mapv(|z| z.conj()), SamplingAxis::Realizations),
    };
    let white = whiten(&data, n)?;
    let mut ica = setup.ica.clone();
    ica.seed = seeds.ica;
    let separation = separate(&white, n, &ica)?;
    if separation.len() < n {
        let why = separation.failures.first().map(|f| f.1.clone()).unwrap_or_default();
        return Err(Error::IncompleteSeparation { extracted: separation.len(), requested: n, reason: why });
    }
    let estimated = separation.source_matrix();
    let alignment = align_sources(&estimated, &fm.sources(setup.side))?;

    let greens: Vec<Array1<Complex64>> = match setup.side {
        Side::U => separation.sources.iter().map(|s| s.mapv(|z| z.conj())).collect(),
        Side::V => {
            let g = green_from_incident(&r.entries, &estimated.data)?;
            g.columns().into_iter().map(|c| c.to_owned()).collect()
        }
    };
    let bp = BackPropagator::new(&fm.camera);
    let improved = improved_dort(&greens, &bp, &setup.imaging)?;
    let dort_image = dort(&svd.u, &bp, setup.imaging.eta_f)?;
    let improved_score = localization_score(&improved.image, &scene.positions, setup.tolerance_px);
    let dort_score = localization_score(&dort_image, &scene.positions, setup.tolerance_px);

    Ok(ImagingOutcome {
        seeds,
        scene,
        rejected_scenes,
        rgo_checks,
        singular_values: svd.singular_values.to_vec(),
        separation,
        alignment,
        improved,
        dort: dort_image,
        improved_score,
        dort_score,
    })
}
