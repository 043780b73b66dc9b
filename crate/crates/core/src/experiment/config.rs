//! Versioned JSON experiment configuration and its resolution against a profile.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::SpeckleProbe;
use crate::error::{Error, Result};
use crate::ica::{ExtractionOptions, Init, SignConstraint};
use crate::imaging::{ImprovedDortOptions, MergeOrder};
use crate::optics::{Modality, OpticsConfig};
use crate::scene::{GreenModel, Side};
use crate::separability::TheoremSweep;

use super::pipeline::ImagingSetup;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    ShgV,
    ShgU,
    LinearU,
    TheoremSweep,
    Diagnostics,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::ShgV => "shg_v",
            Scenario::ShgU => "shg_u",
            Scenario::LinearU => "linear_u",
            Scenario::TheoremSweep => "theorem_sweep",
            Scenario::Diagnostics => "diagnostics",
        }
    }

    pub fn is_imaging(&self) -> bool {
        matches!(self, Scenario::ShgV | Scenario::ShgU | Scenario::LinearU)
    }

    pub fn modality(&self) -> Modality {
        match self {
            Scenario::LinearU => Modality::Linear,
            _ => Modality::Shg,
        }
    }

    pub fn side(&self) -> Side {
        match self {
            Scenario::ShgV => Side::V,
            _ => Side::U,
        }
    }
}

/// Parameter profile: `desk` (512² grid, reduced counts) or `paper` (2048² grid).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    #[default]
    Desk,
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile '{other}' (expected desk or paper)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneParams {
    pub count: Option<usize>,
    pub window: Option<f64>,
    /// Absolute minimum separation; overrides `separation_factor`.
    pub min_separation: Option<f64>,
    /// Minimum separation in units of `ℓ_{c,out}`.
    pub separation_factor: Option<f64>,
    pub avoid_resonances: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcaParams {
    pub sign: Option<SignConstraint>,
    pub max_iterations: Option<usize>,
    pub angle_tolerance: Option<f64>,
    pub init_scale: Option<f64>,
    pub restarts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagingParams {
    pub eta_f: Option<f64>,
    pub eta_i: Option<f64>,
    pub subpixel: Option<bool>,
    pub merge: Option<MergeOrder>,
    pub tolerance_px: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsParams {
    pub speckle_seeds: usize,
    pub probe: SpeckleProbe,
    pub screen_k0_sigmas: Vec<f64>,
    pub screen_realizations: usize,
    /// Largest screen lag used in the coherence fit, in units of `ℓ_0`.
    pub screen_max_lag: f64,
    pub kurtosis_samples: usize,
    pub kurtosis_seeds: usize,
}

impl Default for DiagnosticsParams {
    fn default() -> Self {
        Self {
            speckle_seeds: 200,
            probe: SpeckleProbe::default(),
            screen_k0_sigmas: vec![0.5, 1.0, 3.0],
            screen_realizations: 2,
            screen_max_lag: 0.5,
            kurtosis_samples: 10_000,
            kurtosis_seeds: 20,
        }
    }
}

/// On-disk experiment description. Every optional field is filled by [`ExperimentConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub scenario: Scenario,
    #[serde(default)]
    pub profile: Profile,
    /// Numerical aperture; ignored when `optics` is given.
    pub na: Option<f64>,
    /// Screen strength `k₀σ`; applied on top of `optics` when both are given.
    pub k0_sigma: Option<f64>,
    /// Complete optics override.
    pub optics: Option<OpticsConfig>,
    #[serde(default)]
    pub scene: SceneParams,
    pub realizations: Option<usize>,
    pub noise_sigma: Option<f64>,
    pub green_model: Option<GreenModel>,
    #[serde(default)]
    pub ica: IcaParams,
    #[serde(default)]
    pub imaging: ImagingParams,
    /// Base seed; run `r` uses `split_seed(seed, r)`.
    pub seed: Option<u64>,
    pub repeats: Option<usize>,
    pub theorem: Option<TheoremSweep>,
    pub diagnostics: Option<DiagnosticsParams>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario,
            profile: Profile::Desk,
            na: None,
            k0_sigma: None,
            optics: None,
            scene: SceneParams::default(),
            realizations: None,
            noise_sigma: None,
            green_model: None,
            ica: IcaParams::default(),
            imaging: ImagingParams::default(),
            seed: None,
            repeats: None,
            theorem: None,
            diagnostics: None,
            output: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("config does not parse: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", cfg.schema_version)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fills every default for the scenario and profile; the result re-resolves to itself.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let s = self.scenario;
        let desk = self.profile == Profile::Desk;
        let mut out = self.clone();

        let (na, k0_sigma) = match s {
            Scenario::LinearU => (1.5, 3.0),
            _ => (0.75, 1.0),
        };
        let na = self.na.unwrap_or(na);
        let mut optics = match &self.optics {
            Some(o) => o.clone(),
            None if desk => OpticsConfig::desk(s.modality(), na),
            None => OpticsConfig::table1(s.modality(), na),
        };
        if self.optics.is_none() || self.k0_sigma.is_some() {
            optics.screen_k0_sigma = self.k0_sigma.unwrap_or(k0_sigma);
        }
        out.na = Some(optics.na);
        out.k0_sigma = Some(optics.screen_k0_sigma);

        let (count, window, realizations) = match (s, desk) {
            (Scenario::ShgV, true) => (25, 12.0, 2500),
            (Scenario::ShgV, false) => (50, 12.0, 10_000),
            (Scenario::ShgU, true) => (5, 8.0, 500),
            (Scenario::ShgU, false) => (10, 8.0, 500),
            (Scenario::LinearU, true) => (5, 5.0, 500),
            (Scenario::LinearU, false) => (10, 5.0, 500),
            _ => (0, 0.0, 0),
        };
        if s.is_imaging() {
            let factor = self.scene.separation_factor.unwrap_or(1.5);
            out.scene = SceneParams {
                count: Some(self.scene.count.unwrap_or(count)),
                window: Some(self.scene.window.unwrap_or(window)),
                min_separation: Some(self.scene.min_separation.unwrap_or(factor * optics.ell_c_out())),
                separation_factor: Some(factor),
                avoid_resonances: Some(self.scene.avoid_resonances.unwrap_or(true)),
            };
            out.realizations = Some(self.realizations.unwrap_or(realizations));
            out.noise_sigma = Some(self.noise_sigma.unwrap_or(0.0));
            out.green_model = Some(self.green_model.unwrap_or_default());
            let sign = match s.side() {
                Side::U => SignConstraint::Negative,
                Side::V => SignConstraint::Positive,
            };
            let d = ExtractionOptions::default();
            let scale = match d.init {
                Init::IdentityPerturbation { scale } => scale,
                Init::Given(_) => 0.05,
            };
            out.ica = IcaParams {
                sign: Some(self.ica.sign.unwrap_or(sign)),
                max_iterations: Some(self.ica.max_iterations.unwrap_or(d.max_iterations)),
                angle_tolerance: Some(self.ica.angle_tolerance.unwrap_or(d.angle_tolerance)),
                init_scale: Some(self.ica.init_scale.unwrap_or(scale)),
                restarts: Some(self.ica.restarts.unwrap_or(d.restarts)),
            };
            let d = ImprovedDortOptions::default();
            out.imaging = ImagingParams {
                eta_f: Some(self.imaging.eta_f.unwrap_or(d.eta_f)),
                eta_i: Some(self.imaging.eta_i.unwrap_or(d.eta_i)),
                subpixel: Some(self.imaging.subpixel.unwrap_or(d.subpixel)),
                merge: Some(self.imaging.merge.unwrap_or(d.merge)),
                tolerance_px: Some(self.imaging.tolerance_px.unwrap_or(1.0)),
            };
        }
        out.optics = Some(optics);
        out.seed = Some(self.seed.unwrap_or(1));
        out.repeats = Some(self.repeats.unwrap_or(if s.is_imaging() { 10 } else { 1 }));
        if s == Scenario::TheoremSweep {
            let mut t = self.theorem.clone().unwrap_or_default();
            match self.seed {
                Some(seed) => t.seed = seed,
                None if self.theorem.is_none() => t.seed = 1,
                None => out.seed = Some(t.seed),
            }
            out.theorem = Some(t);
        }
        if s == Scenario::Diagnostics {
            out.diagnostics = Some(self.diagnostics.clone().unwrap_or_default());
        }
        Ok(out)
    }

    /// Schema-level problems that make the config unusable.
    pub fn schema_errors(&self) -> Vec<String> {
        let mut v = Vec::new();
        let positive = |name: &str, x: Option<f64>, v: &mut Vec<String>| {
            if let Some(x) = x {
                if !(x > 0.0) || !x.is_finite() {
                    v.push(format!("{name} must be positive, got {x}"));
                }
            }
        };
        positive("na", self.na, &mut v);
        positive("scene.window", self.scene.window, &mut v);
        positive("imaging.tolerance_px", self.imaging.tolerance_px, &mut v);
        if let Some(k) = self.k0_sigma {
            if !(k >= 0.0) {
                v.push(format!("k0_sigma must be non-negative, got {k}"));
            }
        }
        if let Some(n) = self.noise_sigma {
            if !(n >= 0.0) {
                v.push(format!("noise_sigma must be non-negative, got {n}"));
            }
        }
        if self.scene.count == Some(0) && self.scenario.is_imaging() {
            v.push("scene.count must be at least 1".into());
        }
        if self.scenario.is_imaging() && matches!(self.scene.count, Some(1)) {
            v.push("imaging needs at least 2 scatterers".into());
        }
        if let Some(e) = self.imaging.eta_f {
            if !(0.0..=1.0).contains(&e) {
                v.push(format!("imaging.eta_f must lie in [0, 1], got {e}"));
            }
        }
        if let Some(e) = self.imaging.eta_i {
            if !(e >= 0.0) {
                v.push(format!("imaging.eta_i must be non-negative, got {e}"));
            }
        }
        if self.ica.restarts == Some(0) {
            v.push("ica.restarts must be at least 1".into());
        }
        if self.repeats == Some(0) {
            v.push("repeats must be at least 1".into());
        }
        if let (Some(c), Some(r)) = (self.scene.count, self.realizations) {
            if self.scenario.side() == Side::V && self.scenario.is_imaging() && r < c {
                v.push(format!("{r} realizations cannot separate {c} sources"));
            }
        }
        if self.scenario == Scenario::TheoremSweep {
            if let Some(t) = &self.theorem {
                if t.correlations.iter().any(|r| !(0.0..1.0).contains(r)) {
                    v.push("theorem.correlations must lie in [0, 1)".into());
                }
                if t.sources < 2 || t.seeds == 0 || t.samples == 0 {
                    v.push("theorem needs ≥ 2 sources, ≥ 1 seed and ≥ 1 sample".into());
                }
            }
        }
        v
    }

    /// Imaging inputs of a resolved config.
    pub fn imaging_setup(&self) -> Result<ImagingSetup> {
        let missing = |what: &str| Error::Config(format!("{what} is unresolved; call resolve() first"));
        if !self.scenario.is_imaging() {
            return Err(Error::Config(format!("scenario {} does not image", self.scenario.name())));
        }
        let optics = self.optics.clone().ok_or_else(|| missing("optics"))?;
        Ok(ImagingSetup {
            side: self.scenario.side(),
            count: self.scene.count.ok_or_else(|| missing("scene.count"))?,
            window: self.scene.window.ok_or_else(|| missing("scene.window"))?,
            min_separation: self.scene.min_separation.ok_or_else(|| missing("scene.min_separation"))?,
            avoid_resonances: self.scene.avoid_resonances.unwrap_or(true),
            realizations: self.realizations.ok_or_else(|| missing("realizations"))?,
            noise_sigma: self.noise_sigma.unwrap_or(0.0),
            green_model: self.green_model.unwrap_or_default(),
            ica: ExtractionOptions {
                sign: self.ica.sign.ok_or_else(|| missing("ica.sign"))?,
                max_iterations: self.ica.max_iterations.ok_or_else(|| missing("ica.max_iterations"))?,
                angle_tolerance: self.ica.angle_tolerance.ok_or_else(|| missing("ica.angle_tolerance"))?,
                init: Init::IdentityPerturbation { scale: self.ica.init_scale.ok_or_else(|| missing("ica.init_scale"))? },
                restarts: self.ica.restarts.ok_or_else(|| missing("ica.restarts"))?,
                seed: 0,
            },
            imaging: ImprovedDortOptions {
                eta_f: self.imaging.eta_f.ok_or_else(|| missing("imaging.eta_f"))?,
                eta_i: self.imaging.eta_i.ok_or_else(|| missing("imaging.eta_i"))?,
                subpixel: self.imaging.subpixel.unwrap_or(false),
                merge: self.imaging.merge.unwrap_or_default(),
            },
            tolerance_px: self.imaging.tolerance_px.ok_or_else(|| missing("imaging.tolerance_px"))?,
            optics,
        })
    }

    /// Sets a value addressed by a dotted path (e.g. `imaging.eta_f`) through the JSON form.
    pub fn with_value(&self, path: &str, value: serde_json::Value) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        let mut node = &mut doc;
        let parts: Vec<&str> = path.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node.as_object_mut().ok_or_else(|| Error::Config(format!("'{path}' does not address an object field")))?;
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), value.clone());
                break;
            }
            let entry = obj.entry(part.to_string()).or_insert(serde_json::Value::Null);
            if entry.is_null() {
                *entry = serde_json::Value::Object(Default::default());
            }
            node = entry;
        }
        serde_json::from_value(doc).map_err(|e| Error::Config(format!("setting '{path}' gives an invalid config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_is_idempotent_and_round_trips() {
        for s in [Scenario::ShgV, Scenario::ShgU, Scenario::LinearU, Scenario::TheoremSweep, Scenario::Diagnostics] {
            let r = ExperimentConfig::new(s).resolve().unwrap();
            assert_eq!(r.resolve().unwrap(), r, "{}", s.name());
            assert_eq!(ExperimentConfig::from_json(&r.to_json().unwrap()).unwrap(), r);
        }
    }

    #[test]
    fn scenario_defaults() {
        let lin = ExperimentConfig::new(Scenario::LinearU).resolve().unwrap();
        let o = lin.optics.as_ref().unwrap();
        assert_eq!((o.na, o.screen_k0_sigma, o.modality), (1.5, 3.0, Modality::Linear));
        assert!((o.screen_l_c() - 2.0 * 2f64.sqrt() * 4.0 / 3.0).abs() < 1e-12);
        let shg = ExperimentConfig::new(Scenario::ShgU).resolve().unwrap();
        assert_eq!(shg.scene.count, Some(5));
        assert_eq!(shg.ica.sign, Some(SignConstraint::Negative));
        let v = ExperimentConfig::new(Scenario::ShgV).resolve().unwrap();
        assert_eq!(v.ica.sign, Some(SignConstraint::Positive));
        assert!(v.imaging_setup().is_ok());
    }

    #[test]
    fn bad_documents_are_rejected() {
        assert!(matches!(ExperimentConfig::from_json("{"), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_json(r#"{"schema_version": 9, "scenario": "shg_u"}"#), Err(Error::Config(_))));
        assert!(matches!(ExperimentConfig::from_json(r#"{"schema_version": 1, "scenario": "shg_u", "bogus": 1}"#), Err(Error::Config(_))));
        let c = ExperimentConfig::from_json(r#"{"schema_version": 1, "scenario": "shg_u", "imaging": {"eta_f": 1.5}}"#).unwrap();
        assert_eq!(c.schema_errors().len(), 1);
    }

    #[test]
    fn dotted_paths_set_nested_values() {
        let c = ExperimentConfig::new(Scenario::ShgU);
        let d = c.with_value("imaging.eta_f", serde_json::json!(0.5)).unwrap();
        assert_eq!(d.imaging.eta_f, Some(0.5));
        let e = d.with_value("k0_sigma", serde_json::json!(2.0)).unwrap();
        assert_eq!(e.k0_sigma, Some(2.0));
        assert!(c.with_value("imaging.eta_f", serde_json::json!("high")).is_err());
    }
}
