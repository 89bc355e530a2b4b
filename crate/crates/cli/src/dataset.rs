//! On-disk layout shared by the commands.
//!
//! A dataset directory holds raw image/sinogram files plus a `dataset.json`
//! index. Every command also writes a `manifest.json` with the effective
//! configuration and the SHA-256 of each output file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ddgm_core::image::{Image, Sinogram};
use ddgm_core::io;
use ddgm_core::tomo::TiltGeometry;

use crate::config::Config;
use crate::CliError;

pub const INDEX_FILE: &str = "dataset.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub name: String,
    /// Image `[height, width]`.
    pub shape: [usize; 2],
    /// Ground-truth image stem, relative to the dataset directory.
    pub truth: Option<String>,
    /// Sinogram stem, relative to the dataset directory.
    pub sinogram: Option<String>,
    pub noise_sigma: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Index {
    pub entries: Vec<Entry>,
}

impl Index {
    pub fn load(dir: &Path) -> Result<Index, CliError> {
        let path = dir.join(INDEX_FILE);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::runtime(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(INDEX_FILE);
        write_json(&path, self)?;
        Ok(path)
    }
}

/// Loaded problem: truth is optional, the sinogram is required.
pub struct Case {
    pub name: String,
    pub shape: (usize, usize),
    pub truth: Option<Image>,
    pub sinogram: Sinogram,
    pub geometry: TiltGeometry,
    pub noise_sigma: f64,
}

pub fn load_cases(dir: &Path) -> Result<Vec<Case>, CliError> {
    let index = Index::load(dir)?;
    let mut cases = Vec::new();
    for e in index.entries {
        let Some(sino) = &e.sinogram else { continue };
        let (sinogram, geometry) = io::read_sinogram(&dir.join(sino))?;
        let truth = match &e.truth {
            Some(t) => Some(io::read_image(&dir.join(t))?),
            None => None,
        };
        cases.push(Case { name: e.name, shape: (e.shape[0], e.shape[1]), truth, sinogram, geometry, noise_sigma: e.noise_sigma.unwrap_or(0.0) });
    }
    if cases.is_empty() {
        return Err(CliError::runtime(format!("{} lists no sinograms", dir.join(INDEX_FILE).display())));
    }
    Ok(cases)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::runtime(e.to_string()))?;
    text.push('\n');
    io::write_atomic(path, text.as_bytes())?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::runtime(format!("reading {}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Collects outputs and writes the manifest last.
pub struct Manifest {
    dir: PathBuf,
    command: &'static str,
    outputs: Vec<PathBuf>,
    results: serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize)]
struct OutputRecord {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct ManifestRecord<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a Config,
    results: &'a serde_json::Map<String, serde_json::Value>,
    outputs: Vec<OutputRecord>,
}

impl Manifest {
    pub fn new(dir: &Path, command: &'static str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("creating {}: {e}", dir.display())))?;
        Ok(Manifest { dir: dir.to_path_buf(), command, outputs: Vec::new(), results: Default::default() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn add_output(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    pub fn add_image(&mut self, stem: &Path, img: &Image, png: bool) -> Result<(), CliError> {
        io::write_image(stem, img)?;
        self.outputs.push(io::data_path(stem));
        self.outputs.push(io::header_path(stem));
        if png {
            let path = stem.with_extension("png");
            io::write_png(&path, img.as_slice(), img.height(), img.width())?;
            self.outputs.push(path);
        }
        Ok(())
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.results.insert(key.to_string(), value);
    }

    pub fn write(self, config: &Config) -> Result<PathBuf, CliError> {
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for p in &self.outputs {
            let rel = p.strip_prefix(&self.dir).unwrap_or(p);
            outputs.push(OutputRecord { path: rel.display().to_string(), sha256: sha256_file(p)? });
        }
        let record = ManifestRecord {
            tool: "ddgm",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config,
            results: &self.results,
            outputs,
        };
        let path = self.dir.join(MANIFEST_FILE);
        write_json(&path, &record)?;
        Ok(path)
    }
}
