//! Configuration-driven experiment runner.
//!
//! A run resolves its config, writes `config.resolved.json`, executes the
//! scenario and finishes with `manifest.json`. Imaging runs that fail part way
//! keep the artifacts already written and record the failure in the manifest.

pub mod artifacts;
pub mod config;
pub mod pipeline;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{screen_coherence, speckle_statistics, ScreenCoherence, SpeckleStats};
use crate::error::{Error, Result};
use crate::imaging::LocalizationScore;
use crate::moments::kurtosis_of;
use crate::optics::{stationary_phase_numbers, OpticsConfig};
use crate::rngfield::{circular_normal, rng, split_seed};
use crate::scene::make_scene;
use crate::separability::{summarize, theorem_scaling_experiment, write_theorem_csv};

use artifacts::{sha256_hex, write_json, write_peaks_csv, write_pgm, write_rows_csv, DerivedQuantities, Manifest, RunStatus};
pub use config::{ExperimentConfig, Profile, Scenario, SCHEMA_VERSION};
pub use pipeline::{run_imaging, ImagingOutcome, ImagingSetup, RunSeeds};

/// Environment variable naming the default output root.
pub const OUTPUT_ENV: &str = "SPECKLE_ICA_OUT";

/// Command-line style overrides applied before resolution.
#[derive(Debug, Clone, Default)]
pub struct RunOverrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub profile: Option<Profile>,
}

pub fn derived_quantities(o: &OpticsConfig) -> DerivedQuantities {
    let cam = o.camera();
    DerivedQuantities {
        ell_c_in: o.ell_c_in(),
        ell_c_out: o.ell_c_out(),
        screen_l_c: o.screen_l_c(),
        image_pixel: cam.image_pitch(),
        grid_pitch: o.pitch(),
        camera_pixels: cam.pixels(),
        return_wavenumber: o.return_wavenumber(),
        stationary_phase: stationary_phase_numbers(o.z_s, o.return_wavenumber(), o.pupil_radius, o.screen_sigma(), o.screen_distance, o.screen_scale),
    }
}

/// Result of [`validate`]: everything that would stop or invalidate a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub scenario: String,
    pub schema_errors: Vec<String>,
    pub physics_violations: Vec<String>,
    pub derived: Option<DerivedQuantities>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.schema_errors.is_empty() && self.physics_violations.is_empty()
    }
}

/// Schema and physics checks without running anything.
pub fn validate(cfg: &ExperimentConfig) -> ValidationReport {
    let schema_errors = cfg.schema_errors();
    let mut physics_violations = Vec::new();
    let mut derived = None;
    if schema_errors.is_empty() {
        match cfg.resolve() {
            Ok(r) => {
                if let Some(o) = &r.optics {
                    physics_violations.extend(o.violations());
                    derived = Some(derived_quantities(o));
                }
                if r.scenario.is_imaging() {
                    if let (Some(n), Some(w), Some(d)) = (r.scene.count, r.scene.window, r.scene.min_separation) {
                        if let Err(e) = make_scene(n, w, d, r.seed.unwrap_or(1)) {
                            physics_violations.push(format!("scene packing: {e}"));
                        }
                        if let Some(o) = &r.optics {
                            let reach = 0.5 * w * std::f64::consts::SQRT_2;
                            let field = 0.5 * o.window;
                            if reach > 0.5 * field {
                                physics_violations.push(format!("scene window {w} reaches beyond half the computational half-window {field}"));
                            }
                        }
                    }
                }
            }
            Err(e) => physics_violations.push(e.to_string()),
        }
    }
    ValidationReport { scenario: cfg.scenario.name().into(), schema_errors, physics_violations, derived }
}

/// Where a run writes: `--out`, then the config's `output`, then `$SPECKLE_ICA_OUT/<scenario>`, then `runs/<scenario>`.
pub fn output_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    if let Some(p) = out {
        return p.to_path_buf();
    }
    if let Some(p) = &cfg.output {
        return p.clone();
    }
    let root = std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(cfg.scenario.name())
}

/// Per-run row of the imaging summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImagingRow {
    pub run: usize,
    pub seed: u64,
    pub scatterers: usize,
    pub rejected_scenes: u64,
    pub improved_hits: usize,
    pub improved_misses: usize,
    pub improved_false_peaks: usize,
    pub dort_hits: usize,
    pub dort_misses: usize,
    pub dort_false_peaks: usize,
    pub max_source_distance: f64,
    pub min_source_correlation: f64,
    pub converged: usize,
    pub low_confidence_links: usize,
    pub hermitian_defect: f64,
}

impl ImagingRow {
    fn new(run: usize, o: &ImagingOutcome) -> Self {
        let s = |x: &LocalizationScore| (x.hits, x.misses, x.false_peaks);
        let (ih, im, ifp) = s(&o.improved_score);
        let (dh, dm, dfp) = s(&o.dort_score);
        Self {
            run,
            seed: o.seeds.run,
            scatterers: o.scene.len(),
            rejected_scenes: o.rejected_scenes,
            improved_hits: ih,
            improved_misses: im,
            improved_false_peaks: ifp,
            dort_hits: dh,
            dort_misses: dm,
            dort_false_peaks: dfp,
            max_source_distance: o.alignment.distances.iter().cloned().fold(0.0, f64::max),
            min_source_correlation: o.alignment.correlations.iter().cloned().fold(f64::INFINITY, f64::min),
            converged: o.separation.converged.iter().filter(|c| **c).count(),
            low_confidence_links: o.improved.links.iter().filter(|l| l.low_confidence).count(),
            hermitian_defect: o.improved.hermitian_defect,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SingularValueRow {
    index: usize,
    value: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct KurtosisCheck {
    name: String,
    expected: f64,
    tolerance: f64,
    values: Vec<f64>,
    passing: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScreenLaw {
    k0_sigma: f64,
    coherence: ScreenCoherence,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DiagnosticsSummary {
    speckle: SpeckleStats,
    screen: Vec<ScreenLaw>,
    kurtosis: Vec<KurtosisCheck>,
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl RunReport {
    pub fn succeeded(&self) -> bool {
        self.manifest.status == RunStatus::Ok
    }
}

/// Resolves, validates and executes `cfg`. Config problems return `Err(Error::Config)`;
/// pipeline problems return `Ok` with a failed manifest.
pub fn run(cfg: &ExperimentConfig, overrides: &RunOverrides) -> Result<RunReport> {
    let mut cfg = cfg.clone();
    if let Some(p) = overrides.profile {
        cfg.profile = p;
    }
    if let Some(s) = overrides.seed {
        cfg.seed = Some(s);
    }
    let report = validate(&cfg);
    if !report.is_clean() {
        let mut all = report.schema_errors;
        all.extend(report.physics_violations);
        return Err(Error::Config(all.join("; ")));
    }
    let resolved = cfg.resolve()?;
    let dir = output_dir(&resolved, overrides.out.as_deref());
    std::fs::create_dir_all(&dir)?;
    let resolved_json = resolved.to_json()?;
    std::fs::write(dir.join("config.resolved.json"), &resolved_json)?;
    let mut files = vec![PathBuf::from("config.resolved.json")];
    let mut failures = Vec::new();

    let summary = match resolved.scenario {
        Scenario::ShgV | Scenario::ShgU | Scenario::LinearU => run_imaging_scenario(&resolved, &dir, &mut files, &mut failures)?,
        Scenario::TheoremSweep => run_theorem(&resolved, &dir, &mut files, &mut failures)?,
        Scenario::Diagnostics => run_diagnostics(&resolved, &dir, &mut files, &mut failures)?,
    };

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        scenario: resolved.scenario.name().into(),
        config_hash: sha256_hex(resolved_json.as_bytes()),
        config: serde_json::to_value(&resolved)?,
        derived: resolved.optics.as_ref().map(derived_quantities),
        status: if failures.is_empty() { RunStatus::Ok } else { RunStatus::Failed },
        failures,
        files,
        summary,
    };
    write_json(&manifest, &dir.join("manifest.json"))?;
    Ok(RunReport { dir, manifest })
}

fn run_imaging_scenario(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<PathBuf>, failures: &mut Vec<String>) -> Result<serde_json::Value> {
    let setup = cfg.imaging_setup()?;
    let base = cfg.seed.unwrap_or(1);
    let mut rows = Vec::new();
    for r in 0..cfg.repeats.unwrap_or(1) {
        let seed = split_seed(base, r as u64);
        let outcome = match run_imaging(&setup, seed) {
            Ok(o) => o,
            Err(e) => {
                failures.push(format!("run {r} (seed {seed}): {e}"));
                break;
            }
        };
        let sub = PathBuf::from(format!("run_{r:02}"));
        std::fs::create_dir_all(dir.join(&sub))?;
        let mut put = |name: &str| {
            files.push(sub.join(name));
            dir.join(&sub).join(name)
        };
        write_pgm(&outcome.improved.image, &put("improved.pgm"))?;
        write_pgm(&outcome.dort, &put("dort.pgm"))?;
        write_peaks_csv(&outcome.improved.image.peaks(0.5), &put("improved_peaks.csv"))?;
        write_peaks_csv(&outcome.dort.peaks(0.5), &put("dort_peaks.csv"))?;
        outcome.scene.write_csv(&put("scene.csv"))?;
        let sv: Vec<SingularValueRow> = outcome.singular_values.iter().enumerate().map(|(index, &value)| SingularValueRow { index, value }).collect();
        write_rows_csv(&sv, &put("singular_values.csv"))?;
        rows.push(ImagingRow::new(r, &outcome));
        write_rows_csv(&rows, &dir.join("runs.csv"))?;
    }
    if !rows.is_empty() {
        files.push(PathBuf::from("runs.csv"));
    }
    let full = rows.iter().filter(|r| r.improved_hits as f64 >= 0.9 * r.scatterers as f64).count();
    let dominated = rows.iter().all(|r| r.improved_hits >= r.dort_hits);
    Ok(serde_json::json!({
        "runs": rows.len(),
        "runs_with_90pct_localized": full,
        "improved_never_worse_than_dort": dominated,
        "mean_improved_hits": rows.iter().map(|r| r.improved_hits as f64).sum::<f64>() / rows.len().max(1) as f64,
        "mean_dort_hits": rows.iter().map(|r| r.dort_hits as f64).sum::<f64>() / rows.len().max(1) as f64,
    }))
}

fn run_theorem(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<PathBuf>, failures: &mut Vec<String>) -> Result<serde_json::Value> {
    let sweep = cfg.theorem.clone().ok_or_else(|| Error::Config("theorem parameters missing".into()))?;
    let rows = match theorem_scaling_experiment(&sweep) {
        Ok(rows) => rows,
        Err(e) => {
            failures.push(format!("theorem sweep: {e}"));
            return Ok(serde_json::Value::Null);
        }
    };
    write_theorem_csv(&rows, &dir.join("theorem.csv"))?;
    files.push(PathBuf::from("theorem.csv"));
    let summary = summarize(&rows);
    Ok(serde_json::to_value(summary)?)
}

fn run_diagnostics(cfg: &ExperimentConfig, dir: &Path, files: &mut Vec<PathBuf>, failures: &mut Vec<String>) -> Result<serde_json::Value> {
    let params = cfg.diagnostics.clone().unwrap_or_default();
    let optics = cfg.optics.clone().ok_or_else(|| Error::Config("optics unresolved".into()))?;
    let base = cfg.seed.unwrap_or(1);
    let seeds: Vec<u64> = (0..params.speckle_seeds as u64).map(|j| split_seed(base, j)).collect();
    let speckle = match speckle_statistics(&optics, &seeds, &params.probe) {
        Ok(s) => s,
        Err(e) => {
            failures.push(format!("speckle statistics: {e}"));
            return Ok(serde_json::Value::Null);
        }
    };
    let mut screen = Vec::new();
    for &k0s in &params.screen_k0_sigmas {
        let mut o = optics.clone();
        o.screen_k0_sigma = k0s;
        match screen_coherence(&o, params.screen_realizations, params.screen_max_lag) {
            Ok(c) => screen.push(ScreenLaw { k0_sigma: k0s, coherence: c }),
            Err(e) => failures.push(format!("screen coherence at k0σ = {k0s}: {e}")),
        }
    }
    let kurtosis = kurtosis_identities(params.kurtosis_samples, params.kurtosis_seeds, base)?;
    let summary = DiagnosticsSummary { speckle, screen, kurtosis };
    write_json(&summary, &dir.join("diagnostics.json"))?;
    files.push(PathBuf::from("diagnostics.json"));
    let coh: Vec<SingularValueRow> = summary.speckle.coherence.iter().enumerate().map(|(index, &value)| SingularValueRow { index, value }).collect();
    write_rows_csv(&coh, &dir.join("speckle_coherence.csv"))?;
    files.push(PathBuf::from("speckle_coherence.csv"));
    Ok(serde_json::to_value(&summary)?)
}

/// Empirical kurtosis of circular Gaussian, squared circular Gaussian and
/// unimodular spread-phase samples.
fn kurtosis_identities(samples: usize, seeds: usize, base: u64) -> Result<Vec<KurtosisCheck>> {
    use ndarray::Array1;
    use rand::Rng;
    let cases: [(&str, f64, f64); 3] = [("circular_gaussian", 0.0, 0.1), ("squared_gaussian", 4.0, 0.5), ("unimodular", -1.0, 0.05)];
    let mut out = Vec::new();
    for (c, (name, expected, tol)) in cases.iter().enumerate() {
        let mut values = Vec::new();
        for s in 0..seeds as u64 {
            let mut r = rng(split_seed(split_seed(base, 1000 + c as u64), s));
            let y: Array1<num_complex::Complex64> = Array1::from_shape_fn(samples, |_| match c {
                0 => circular_normal(&mut r),
                1 => circular_normal(&mut r).powi(2),
                _ => num_complex::Complex64::from_polar(1.0, r.random_range(0.0..std::f64::consts::TAU)),
            });
            values.push(kurtosis_of(y.view())?.value);
        }
        let passing = values.iter().filter(|v| (*v - expected).abs() <= *tol).count();
        out.push(KurtosisCheck { name: name.to_string(), expected: *expected, tolerance: *tol, values, passing });
    }
    Ok(out)
}

/// Runs `cfg` once per value of the dotted `param`, in subdirectories `<out>/<param>=<value>`.
pub fn sweep(cfg: &ExperimentConfig, param: &str, values: &[serde_json::Value], overrides: &RunOverrides) -> Result<Vec<RunReport>> {
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let base = output_dir(cfg, overrides.out.as_deref());
    let variants: Vec<ExperimentConfig> = values.iter().map(|v| cfg.with_value(param, v.clone())).collect::<Result<_>>()?;
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for (v, c) in values.iter().zip(&variants) {
        let label = match v {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        let o = RunOverrides { out: Some(base.join(format!("{param}={label}"))), ..overrides.clone() };
        let rep = run(c, &o)?;
        rows.push(SweepRow { param: param.into(), value: label, dir: rep.dir.display().to_string(), status: format!("{:?}", rep.manifest.status).to_lowercase(), config_hash: rep.manifest.config_hash.clone() });
        reports.push(rep);
    }
    std::fs::create_dir_all(&base)?;
    write_rows_csv(&rows, &base.join("sweep.csv"))?;
    Ok(reports)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SweepRow {
    param: String,
    value: String,
    dir: String,
    status: String,
    config_hash: String,
}
