//! Flat run configuration: TOML file, then `--set key=value` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ddgm_core::denoise::BumpProfile;
use ddgm_core::phantom::{SupportedTexturePrior, TexturePrior};
use ddgm_core::schedule::ScheduleKind;
use ddgm_core::solvers::{Method, ReconstructionConfig};
use ddgm_core::tomo::{NoiseLevel, TiltGeometry};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    /// Stationary Gaussian texture.
    Texture,
    /// Texture under a circular support envelope.
    Supported,
    /// Random Gaussian blobs (no analytic denoiser).
    Blobs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    Algebraic,
    Ddgm,
    Dps,
    Ddrm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleName {
    Geometric,
    Sampler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenoiserKind {
    /// Exact MMSE denoiser for the configured Gaussian prior.
    Gaussian,
    /// Predicts zero noise.
    Passthrough,
    /// Served over the wire protocol at `endpoint`.
    Remote,
}

/// Every key has a default; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    /// Input directory (dataset written by an earlier command).
    pub input: Option<PathBuf>,
    pub output: PathBuf,
    /// Also write PNG previews.
    pub png: bool,

    pub height: usize,
    pub width: usize,
    /// Number of images to synthesize or generate.
    pub count: usize,
    pub prior: PriorKind,
    pub prior_variance: f64,
    pub prior_length: f64,
    pub prior_smoothness: f64,
    pub support_radius: f64,
    pub support_outside: f64,
    pub blobs: usize,

    pub angles: usize,
    pub angle_min: f64,
    pub angle_max: f64,
    /// Detector bins; defaults to the image width.
    pub bins: Option<usize>,
    /// Ratio of clean-sinogram RMS to noise standard deviation (`inf` for noiseless).
    pub snr: f64,
    /// Absolute noise standard deviation; overrides `snr`.
    pub noise_sigma: Option<f64>,

    pub method: MethodKind,
    /// Gradient step size; tuned automatically when absent.
    pub step_size: Option<f64>,
    pub grad_steps: usize,
    pub schedule: ScheduleName,
    pub sigma_first: f64,
    pub sigma_last: f64,
    pub steps: usize,
    pub alpha: f64,
    pub beta: f64,
    pub zeta: f64,
    pub rescaled: bool,
    pub eta: f64,
    pub eta_b: f64,
    pub threshold: f64,
    pub sigma_init: f64,

    pub denoiser: DenoiserKind,
    pub endpoint: Option<String>,
    pub timeout_secs: u64,
    /// Patch size for blended denoising; 0 disables patching.
    pub patch: usize,
    pub stride: usize,
    pub profile: BumpProfile,

    /// Sweep grid: key name to the list of values it takes.
    pub grid: BTreeMap<String, Vec<toml::Value>>,
}

impl Default for Config {
    fn default() -> Self {
        let texture = SupportedTexturePrior::default();
        Config {
            seed: 0,
            input: None,
            output: PathBuf::from("out"),
            png: false,
            height: 32,
            width: 32,
            count: 8,
            prior: PriorKind::Supported,
            prior_variance: texture.texture.variance,
            prior_length: texture.texture.correlation_length,
            prior_smoothness: texture.texture.smoothness,
            support_radius: texture.radius_fraction,
            support_outside: texture.outside_amplitude,
            blobs: 6,
            angles: 32,
            angle_min: -60.0,
            angle_max: 60.0,
            bins: None,
            snr: 30.0,
            noise_sigma: None,
            method: MethodKind::Ddgm,
            step_size: None,
            grad_steps: 25,
            schedule: ScheduleName::Geometric,
            sigma_first: 3.0,
            sigma_last: 0.03,
            steps: 50,
            alpha: 0.183,
            beta: 0.5,
            zeta: 0.1,
            rescaled: true,
            eta: 1.0,
            eta_b: 1.0,
            threshold: 1.0 / 30.0,
            sigma_init: 30.0,
            denoiser: DenoiserKind::Gaussian,
            endpoint: None,
            timeout_secs: 30,
            patch: 0,
            stride: 48,
            profile: BumpProfile::Printed,
            grid: BTreeMap::new(),
        }
    }
}

/// Environment variable that, when set, routes denoising to a remote server.
pub const ENDPOINT_ENV: &str = "DDGM_DENOISER_ENDPOINT";

impl Config {
    /// Defaults for the wide-image blending demo.
    pub fn blend_demo_defaults() -> Self {
        Config {
            height: 64,
            width: 512,
            prior: PriorKind::Texture,
            prior_length: 2.0,
            grad_steps: 15,
            patch: 64,
            stride: 48,
            ..Config::default()
        }
    }

    /// Defaults, then the file (TOML, or a manifest JSON whose `config` is
    /// reused), then `key=value` overrides.
    pub fn load(base: Config, file: Option<&Path>, overrides: &[String]) -> Result<Config, CliError> {
        let mut table = match toml::Value::try_from(&base) {
            Ok(toml::Value::Table(t)) => t,
            _ => return Err(CliError::config("defaults did not serialize to a table")),
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("reading {}: {e}", path.display())))?;
            let loaded = if path.extension().is_some_and(|e| e == "json") {
                from_manifest(&text, path)?
            } else {
                text.parse::<toml::Table>().map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
            };
            for (k, v) in loaded {
                table.insert(k, v);
            }
        }
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("override {item:?} is not key=value")))?;
            table.insert(key.trim().to_string(), parse_value(value.trim()));
        }
        let cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config(format!("invalid configuration: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one sweep cell's overrides.
    pub fn with_values(&self, values: &[(String, toml::Value)]) -> Result<Config, CliError> {
        let mut table = match toml::Value::try_from(self) {
            Ok(toml::Value::Table(t)) => t,
            _ => return Err(CliError::config("configuration did not serialize to a table")),
        };
        for (k, v) in values {
            table.insert(k.clone(), v.clone());
        }
        table.remove("grid");
        let cfg: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config(format!("invalid grid cell: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |key: &str, why: &str| Err(CliError::config(format!("key `{key}`: {why}")));
        if self.height == 0 || self.width == 0 {
            return bad("height", "image dimensions must be positive");
        }
        if self.angles == 0 {
            return bad("angles", "need at least one projection angle");
        }
        if self.bins == Some(0) {
            return bad("bins", "need at least one detector bin");
        }
        if !(self.snr > 0.0) {
            return bad("snr", "must be positive (use inf for noiseless data)");
        }
        if self.noise_sigma.is_some_and(|s| !(s >= 0.0)) {
            return bad("noise_sigma", "must be non-negative");
        }
        if self.step_size.is_some_and(|s| !(s > 0.0)) {
            return bad("step_size", "must be positive");
        }
        if !(self.zeta >= 0.0) {
            return bad("zeta", "must be non-negative");
        }
        if self.patch > 0 && (self.stride == 0 || self.stride > self.patch) {
            return bad("stride", "must satisfy 0 < stride <= patch");
        }
        for key in self.grid.keys() {
            if key == "grid" || !Config::default().has_key(key) {
                return bad(key, "unknown key in grid");
            }
        }
        Ok(())
    }

    fn has_key(&self, key: &str) -> bool {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(map)) => map.contains_key(key),
            _ => false,
        }
    }

    /// Tilt geometry for images `width` pixels wide (the default bin count).
    pub fn geometry(&self, width: usize) -> Result<TiltGeometry, CliError> {
        TiltGeometry::new(self.angles, self.angle_min, self.angle_max, self.bins.unwrap_or(width))
            .map_err(|e| CliError::config(format!("geometry: {e}")))
    }

    pub fn noise_level(&self) -> NoiseLevel {
        match self.noise_sigma {
            Some(s) => NoiseLevel::Sigma(s),
            None if self.snr.is_infinite() => NoiseLevel::Noiseless,
            None => NoiseLevel::Snr(self.snr),
        }
    }

    pub fn texture(&self) -> TexturePrior {
        TexturePrior {
            variance: self.prior_variance,
            correlation_length: self.prior_length,
            smoothness: self.prior_smoothness,
        }
    }

    pub fn supported(&self) -> SupportedTexturePrior {
        SupportedTexturePrior {
            texture: self.texture(),
            radius_fraction: self.support_radius,
            outside_amplitude: self.support_outside,
        }
    }

    pub fn schedule_kind(&self) -> ScheduleKind {
        match self.schedule {
            ScheduleName::Geometric => ScheduleKind::Geometric {
                sigma_first: self.sigma_first,
                sigma_last: self.sigma_last,
                steps: self.steps,
            },
            ScheduleName::Sampler => ScheduleKind::Sampler {
                sigma_first: self.sigma_first,
                alpha: self.alpha,
                beta: self.beta,
                steps: self.steps,
            },
        }
    }

    /// The solver configuration, given the effective step size.
    pub fn reconstruction(&self, step_size: f64) -> ReconstructionConfig {
        let method = match self.method {
            MethodKind::Algebraic => Method::Algebraic { step_size, steps: self.grad_steps },
            MethodKind::Ddgm => Method::Ddgm { step_size, grad_steps: self.grad_steps, schedule: self.schedule_kind() },
            MethodKind::Dps => Method::Dps {
                schedule: self.schedule_kind(),
                beta: self.beta,
                zeta: self.zeta,
                rescaled: self.rescaled,
            },
            MethodKind::Ddrm => Method::Ddrm {
                steps: self.steps,
                sigma_init: self.sigma_init,
                sigma_final: self.sigma_last,
                eta: self.eta,
                eta_b: self.eta_b,
                threshold: self.threshold,
            },
        };
        ReconstructionConfig { method, seed: self.seed }
    }

    /// Remote endpoint, with the environment taking precedence.
    pub fn effective_endpoint(&self) -> Option<String> {
        std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty()).or_else(|| self.endpoint.clone())
    }
}

/// Parses an override value as TOML, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn from_manifest(text: &str, path: &Path) -> Result<toml::Table, CliError> {
    let json: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let config = json
        .get("config")
        .ok_or_else(|| CliError::config(format!("{} has no `config` entry", path.display())))?;
    // JSON has no infinity; a noiseless run's `snr` is written as null
    let mut config = config.clone();
    let noiseless = config.get("snr").is_some_and(|v| v.is_null());
    if let (true, Some(map)) = (noiseless, config.as_object_mut()) {
        map.remove("snr");
    }
    let mut cfg: Config = serde_json::from_value(config)
        .map_err(|e| CliError::config(format!("{}: invalid configuration: {e}", path.display())))?;
    if noiseless {
        cfg.snr = f64::INFINITY;
    }
    match toml::Value::try_from(&cfg) {
        Ok(toml::Value::Table(t)) => Ok(t),
        _ => Err(CliError::config("manifest configuration did not serialize to a table")),
    }
}
