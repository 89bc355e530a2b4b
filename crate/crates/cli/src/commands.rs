//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ddgm_core::denoise::{
    Denoiser, Endpoint, GaussianPrior, GaussianPriorDenoiser, PassThroughDenoiser, PatchifiedDenoiser,
    RemoteDenoiser,
};
use ddgm_core::io;
use ddgm_core::metrics::{mse, seam_score, ssim, SsimParams};
use ddgm_core::phantom::blob_phantom;
use ddgm_core::rng::{derive_seed, seeded, SeededRng};
use ddgm_core::schedule::{alpha_for_ratio, NoiseSchedule, ScheduleKind};
use ddgm_core::solvers::{
    auto_tune_lambda, batch_evaluate, reconstruct as run_solver, sample_unconditional, EvalCase, EvalReport,
    ImageScores, Problem, RunTrace,
};
use ddgm_core::tomo::{
    power_iteration_sigma_max_sq, simulate_sinogram, svd, MatrixBudget, ProjectionOperator, SpectralDecomposition,
    TiltGeometry,
};
use ddgm_core::Image;

use crate::config::{Config, DenoiserKind, MethodKind, PriorKind, ENDPOINT_ENV};
use crate::dataset::{load_cases, write_json, Case, Entry, Index, Manifest, MANIFEST_FILE};
use crate::CliError;

// Independent random streams derived from the configured seed. Reconstructions
// use `derive_seed(seed, i)` directly, matching the batch evaluator.
const TRUTH_STREAM: u64 = 1 << 32;
const NOISE_STREAM: u64 = 2 << 32;
const SAMPLE_STREAM: u64 = 3 << 32;

const SWEEP_CSV: &str = "sweep.csv";
const CELL_DIR: &str = "cells";

/// Builds one denoiser per worker from the configuration.
pub struct DenoiserFactory {
    source: Source,
    patch: usize,
    stride: usize,
    profile: ddgm_core::denoise::BumpProfile,
}

enum Source {
    Gaussian(GaussianPrior),
    Passthrough,
    Remote(Endpoint, Duration),
}

impl DenoiserFactory {
    /// For images of `shape`. A non-empty `DDGM_DENOISER_ENDPOINT` selects the
    /// remote denoiser regardless of the `denoiser` key.
    pub fn new(cfg: &Config, shape: (usize, usize)) -> Result<Self, CliError> {
        let kind = if std::env::var(ENDPOINT_ENV).is_ok_and(|s| !s.is_empty()) {
            DenoiserKind::Remote
        } else {
            cfg.denoiser
        };
        let source = match kind {
            DenoiserKind::Passthrough => Source::Passthrough,
            DenoiserKind::Remote => {
                let endpoint = cfg.effective_endpoint().ok_or_else(|| {
                    CliError::config(format!("key `endpoint`: required for the remote denoiser (or set {ENDPOINT_ENV})"))
                })?;
                let endpoint = endpoint
                    .parse::<Endpoint>()
                    .map_err(|e| CliError::config(format!("key `endpoint`: {e}")))?;
                Source::Remote(endpoint, Duration::from_secs(cfg.timeout_secs))
            }
            DenoiserKind::Gaussian => {
                let (h, w) = if cfg.patch > 0 { (cfg.patch, cfg.patch) } else { shape };
                Source::Gaussian(prior(cfg, h, w)?.ok_or_else(|| {
                    CliError::config("key `prior`: blobs have no analytic denoiser; use a remote or passthrough denoiser")
                })?)
            }
        };
        Ok(DenoiserFactory { source, patch: cfg.patch, stride: cfg.stride, profile: cfg.profile })
    }

    pub fn make(&self) -> ddgm_core::Result<Box<dyn Denoiser>> {
        let base: Box<dyn Denoiser> = match &self.source {
            Source::Gaussian(p) => Box::new(GaussianPriorDenoiser::new(p.clone())),
            Source::Passthrough => Box::new(PassThroughDenoiser),
            Source::Remote(endpoint, timeout) => Box::new(RemoteDenoiser::connect(endpoint, *timeout)?),
        };
        if self.patch == 0 {
            return Ok(base);
        }
        Ok(Box::new(PatchifiedDenoiser::new(base, self.patch, self.stride, self.profile)?))
    }
}

/// Gaussian prior for the configured prior kind; `None` for blobs.
fn prior(cfg: &Config, h: usize, w: usize) -> Result<Option<GaussianPrior>, CliError> {
    Ok(match cfg.prior {
        PriorKind::Texture => Some(cfg.texture().prior(h, w)?),
        PriorKind::Supported => Some(cfg.supported().prior(h, w)?),
        PriorKind::Blobs => None,
    })
}

/// Draws ground-truth images from the configured prior.
struct TruthSampler {
    prior: Option<GaussianPrior>,
    blobs: usize,
    shape: (usize, usize),
}

impl TruthSampler {
    fn new(cfg: &Config) -> Result<Self, CliError> {
        Ok(TruthSampler { prior: prior(cfg, cfg.height, cfg.width)?, blobs: cfg.blobs, shape: (cfg.height, cfg.width) })
    }

    fn draw(&self, rng: &mut SeededRng) -> Result<Image, CliError> {
        let (h, w) = self.shape;
        Ok(match &self.prior {
            Some(p) => p.sample(rng, h, w)?,
            None => blob_phantom(h, w, self.blobs, rng)?,
        })
    }
}

fn require_input(cfg: &Config) -> Result<&Path, CliError> {
    cfg.input.as_deref().ok_or_else(|| CliError::config("key `input`: this command needs an input dataset"))
}

fn entry_name(i: usize) -> String {
    format!("{i:04}")
}

fn sinogram_outputs(stem: &Path) -> [PathBuf; 2] {
    [io::data_path(stem), io::header_path(stem)]
}

pub fn synthesize(cfg: &Config) -> Result<(), CliError> {
    let mut manifest = Manifest::new(&cfg.output, "synthesize")?;
    let sampler = TruthSampler::new(cfg)?;
    let mut index = Index::default();
    for i in 0..cfg.count {
        let name = entry_name(i);
        let img = sampler.draw(&mut seeded(derive_seed(cfg.seed, TRUTH_STREAM + i as u64)))?;
        let rel = format!("truth/x_{name}");
        manifest.add_image(&manifest.dir().join(&rel), &img, cfg.png)?;
        index.entries.push(Entry { name, shape: [cfg.height, cfg.width], truth: Some(rel), sinogram: None, noise_sigma: None });
    }
    manifest.add_output(index.save(&cfg.output)?);
    manifest.result("count", cfg.count);
    manifest.write(cfg)?;
    Ok(())
}

pub fn simulate(cfg: &Config) -> Result<(), CliError> {
    let input = require_input(cfg)?;
    let source = Index::load(input)?;
    let mut manifest = Manifest::new(&cfg.output, "simulate")?;
    let mut index = Index::default();
    let mut sigmas = Vec::new();
    for (i, entry) in source.entries.iter().enumerate() {
        let Some(truth_rel) = &entry.truth else { continue };
        let truth = io::read_image(&input.join(truth_rel))?;
        let (h, w) = truth.shape();
        let op = ProjectionOperator::new(cfg.geometry(w)?, h, w)?;
        let mut rng = seeded(derive_seed(cfg.seed, NOISE_STREAM + i as u64));
        let sim = simulate_sinogram(&truth, &op, cfg.noise_level(), &mut rng)?;

        let truth_out = format!("truth/x_{}", entry.name);
        manifest.add_image(&manifest.dir().join(&truth_out), &truth, cfg.png)?;
        let sino_out = format!("sino/y_{}", entry.name);
        let stem = manifest.dir().join(&sino_out);
        io::write_sinogram(&stem, &sim.sinogram, op.geometry())?;
        for p in sinogram_outputs(&stem) {
            manifest.add_output(p);
        }
        sigmas.push(sim.noise_sigma);
        index.entries.push(Entry {
            name: entry.name.clone(),
            shape: [h, w],
            truth: Some(truth_out),
            sinogram: Some(sino_out),
            noise_sigma: Some(sim.noise_sigma),
        });
    }
    if index.entries.is_empty() {
        return Err(CliError::runtime(format!("{} has no ground-truth images to project", input.display())));
    }
    manifest.add_output(index.save(&cfg.output)?);
    manifest.result("noise_sigma", sigmas);
    manifest.write(cfg)?;
    Ok(())
}

/// The shared operator of a dataset; every case must use one shape and geometry.
fn dataset_operator(cases: &[Case]) -> Result<ProjectionOperator, CliError> {
    let first = &cases[0];
    for c in cases {
        if c.shape != first.shape || c.geometry != first.geometry {
            return Err(CliError::runtime(format!(
                "case {} differs in shape or geometry from case {}; split the dataset",
                c.name, first.name
            )));
        }
    }
    let (h, w) = first.shape;
    Ok(ProjectionOperator::new(first.geometry.clone(), h, w)?)
}

fn spectral_for(cfg: &Config, op: &ProjectionOperator) -> Result<Option<SpectralDecomposition>, CliError> {
    if cfg.method != MethodKind::Ddrm {
        return Ok(None);
    }
    Ok(Some(svd(&op.build_matrix(MatrixBudget::default())?)?))
}

fn factory_for(cfg: &Config, shape: (usize, usize)) -> Result<Option<DenoiserFactory>, CliError> {
    if cfg.method == MethodKind::Algebraic {
        return Ok(None);
    }
    DenoiserFactory::new(cfg, shape).map(Some)
}

/// Re-raises a per-worker denoiser construction failure (held by reference).
fn worker_error(e: &ddgm_core::Error) -> ddgm_core::Error {
    use ddgm_core::Error as E;
    match e {
        E::Protocol(m) => E::Protocol(m.clone()),
        E::Parameter(m) => E::Parameter(m.clone()),
        E::Connectivity(m) => E::Connectivity(m.clone()),
        other => E::Connectivity(other.to_string()),
    }
}

fn step_size_for(cfg: &Config, op: &ProjectionOperator, y: &ddgm_core::Sinogram) -> Result<f64, CliError> {
    match cfg.step_size {
        Some(s) => Ok(s),
        None if matches!(cfg.method, MethodKind::Algebraic | MethodKind::Ddgm) => Ok(auto_tune_lambda(op, y)?),
        // unused by the remaining methods
        None => Ok(0.0),
    }
}

#[derive(Serialize)]
struct RunTotals {
    grad_evals: usize,
    net_evals: usize,
}

pub fn reconstruct(cfg: &Config) -> Result<(), CliError> {
    let input = require_input(cfg)?;
    let cases = load_cases(input)?;
    let op = dataset_operator(&cases)?;
    let step_size = step_size_for(cfg, &op, &cases[0].sinogram)?;
    let spectral = spectral_for(cfg, &op)?;
    let factory = factory_for(cfg, op.image_shape())?;
    let solver = cfg.reconstruction(step_size);

    let runs: Vec<ddgm_core::Result<(Image, RunTrace)>> = cases
        .par_iter()
        .enumerate()
        .map_init(
            || factory.as_ref().map(|f| f.make()).transpose(),
            |denoiser, (i, case)| {
                let denoiser = match denoiser {
                    Ok(d) => d.as_mut().map(|d| d.as_mut() as &mut dyn Denoiser),
                    Err(e) => return Err(worker_error(e)),
                };
                let mut problem = Problem::new(&op, &case.sinogram).with_noise_sigma(case.noise_sigma);
                if let Some(t) = &case.truth {
                    problem = problem.with_truth(t);
                }
                let mut case_cfg = solver.clone();
                case_cfg.seed = derive_seed(cfg.seed, i as u64);
                run_solver(&case_cfg, &problem, denoiser, spectral.as_ref())
            },
        )
        .collect();

    let mut manifest = Manifest::new(&cfg.output, "reconstruct")?;
    let mut index = Index::default();
    let mut scores = Vec::new();
    let mut totals = RunTotals { grad_evals: 0, net_evals: 0 };
    for (i, (case, run)) in cases.iter().zip(runs).enumerate() {
        let (x, trace) = run?;
        totals.grad_evals += trace.grad_evals;
        totals.net_evals += trace.net_evals;
        let rel = format!("recon/x_{}", case.name);
        manifest.add_image(&manifest.dir().join(&rel), &x, cfg.png)?;
        let trace_path = manifest.dir().join(format!("trace/trace_{}.csv", case.name));
        io::write_atomic(&trace_path, trace.to_csv().as_bytes())?;
        manifest.add_output(trace_path);
        index.entries.push(Entry {
            name: case.name.clone(),
            shape: [x.height(), x.width()],
            truth: Some(rel),
            sinogram: None,
            noise_sigma: None,
        });
        if let Some(t) = &case.truth {
            let data_residual = match trace.records.last() {
                Some(r) => r.data_residual,
                None => ddgm_core::solvers::data_residual(&op, &x, &case.sinogram)?,
            };
            scores.push(ImageScores {
                index: i,
                mse: mse(&x, t)?,
                ssim: ssim(&x, t, &SsimParams::for_reference(t))?,
                data_residual,
            });
        }
    }
    manifest.add_output(index.save(&cfg.output)?);
    manifest.result("method", solver.method.tag());
    manifest.result("step_size", step_size);
    manifest.result("totals", &totals);
    if scores.len() == cases.len() {
        let report = EvalReport::from_scores(scores)?;
        eprintln!(
            "{} images: mse {:.4e} ± {:.1e}, ssim {:.4} ± {:.4}",
            cases.len(),
            report.mse.0,
            report.mse.1,
            report.ssim.0,
            report.ssim.1
        );
        manifest.result("evaluation", &report);
    }
    manifest.write(cfg)?;
    Ok(())
}

pub fn generate(cfg: &Config) -> Result<(), CliError> {
    let schedule = NoiseSchedule::from_kind(cfg.schedule_kind())?;
    let alpha = match schedule.kind() {
        ScheduleKind::Sampler { alpha, .. } => *alpha,
        ScheduleKind::Geometric { .. } => alpha_for_ratio(schedule.decay_ratio(), cfg.beta)?,
    };
    let shape = (cfg.height, cfg.width);
    let factory = DenoiserFactory::new(cfg, shape)?;
    let samples: Vec<ddgm_core::Result<Image>> = (0..cfg.count)
        .into_par_iter()
        .map_init(
            || factory.make(),
            |denoiser, i| {
                let denoiser = denoiser.as_mut().map_err(|e| worker_error(e))?;
                let seed = derive_seed(cfg.seed, SAMPLE_STREAM + i as u64);
                sample_unconditional(denoiser.as_mut(), &schedule, alpha, cfg.beta, shape, seed)
            },
        )
        .collect();

    let mut manifest = Manifest::new(&cfg.output, "generate")?;
    let mut index = Index::default();
    for (i, sample) in samples.into_iter().enumerate() {
        let name = entry_name(i);
        let rel = format!("samples/x_{name}");
        manifest.add_image(&manifest.dir().join(&rel), &sample?, cfg.png)?;
        index.entries.push(Entry { name, shape: [cfg.height, cfg.width], truth: Some(rel), sinogram: None, noise_sigma: None });
    }
    manifest.add_output(index.save(&cfg.output)?);
    manifest.result("alpha", alpha);
    manifest.write(cfg)?;
    Ok(())
}

/// A stored sweep cell.
#[derive(Debug, Serialize, Deserialize)]
struct CellRecord {
    values: BTreeMap<String, serde_json::Value>,
    step_size: f64,
    report: EvalReport,
}

/// Cartesian product in key order, last key varying fastest.
fn grid_cells(grid: &BTreeMap<String, Vec<toml::Value>>) -> Vec<Vec<(String, toml::Value)>> {
    let mut cells = vec![Vec::new()];
    for (key, values) in grid {
        cells = cells
            .into_iter()
            .flat_map(|cell| {
                values.iter().map(move |v| {
                    let mut next = cell.clone();
                    next.push((key.clone(), v.clone()));
                    next
                })
            })
            .collect();
    }
    cells
}

/// Content key of a cell: its full configuration minus where files go.
fn cell_key(cell: &Config) -> Result<String, CliError> {
    let mut keyed = cell.clone();
    keyed.input = None;
    keyed.output = PathBuf::new();
    keyed.png = false;
    let text = serde_json::to_string(&keyed).map_err(|e| CliError::runtime(e.to_string()))?;
    Ok(hex::encode(&Sha256::digest(text.as_bytes())[..8]))
}

fn display_value(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn sweep(cfg: &Config) -> Result<(), CliError> {
    let input = require_input(cfg)?;
    if cfg.grid.is_empty() {
        return Err(CliError::config("key `grid`: a sweep needs at least one grid key"));
    }
    let cases = load_cases(input)?;
    let op = dataset_operator(&cases)?;
    let eval_cases = cases
        .iter()
        .map(|c| {
            let truth = c.truth.clone().ok_or_else(|| CliError::runtime(format!("case {} has no ground truth", c.name)))?;
            Ok(EvalCase { truth, y: c.sinogram.clone(), noise_sigma: c.noise_sigma })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let cells = grid_cells(&cfg.grid);
    let cell_dir = cfg.output.join(CELL_DIR);
    let mut manifest = Manifest::new(&cfg.output, "sweep")?;
    let mut tuned: Option<f64> = None;
    let mut spectral: Option<SpectralDecomposition> = None;
    let mut records = Vec::with_capacity(cells.len());
    for values in &cells {
        let cell = cfg.with_values(values)?;
        let path = cell_dir.join(format!("{}.json", cell_key(&cell)?));
        let cached = std::fs::read_to_string(&path).ok().and_then(|t| serde_json::from_str::<CellRecord>(&t).ok());
        if cached.is_none() {
            let step_size = match cell.step_size {
                Some(s) => s,
                None if matches!(cell.method, MethodKind::Algebraic | MethodKind::Ddgm) => match tuned {
                    Some(s) => s,
                    None => *tuned.insert(auto_tune_lambda(&op, &eval_cases[0].y)?),
                },
                None => 0.0,
            };
            if cell.method == MethodKind::Ddrm && spectral.is_none() {
                spectral = spectral_for(&cell, &op)?;
            }
            let factory = factory_for(&cell, op.image_shape())?;
            let report = batch_evaluate(&cell.reconstruction(step_size), &op, &eval_cases, spectral.as_ref(), || {
                factory.as_ref().map(|f| f.make()).transpose()
            })?;
            let record = CellRecord {
                values: values
                    .iter()
                    .map(|(k, v)| Ok((k.clone(), serde_json::to_value(v).map_err(|e| CliError::runtime(e.to_string()))?)))
                    .collect::<Result<_, CliError>>()?,
                step_size,
                report,
            };
            write_json(&path, &record)?;
            eprintln!("cell {}: mse {:.4e}", describe(values), record.report.mse.0);
        }
        // re-read so fresh and resumed sweeps format identical numbers
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        let record: CellRecord =
            serde_json::from_str(&text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
        manifest.add_output(path);
        records.push((values, record));
    }

    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = cfg.grid.keys().cloned().collect();
    header.extend(
        ["step_size", "mse_mean", "mse_se", "ssim_mean", "ssim_se", "residual_mean", "residual_se"].map(String::from),
    );
    writer.write_record(&header).map_err(csv_error)?;
    for (values, r) in &records {
        let mut row: Vec<String> = values.iter().map(|(_, v)| display_value(v)).collect();
        let rep = &r.report;
        row.extend(
            [r.step_size, rep.mse.0, rep.mse.1, rep.ssim.0, rep.ssim.1, rep.data_residual.0, rep.data_residual.1]
                .map(|v| v.to_string()),
        );
        writer.write_record(&row).map_err(csv_error)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::runtime(e.to_string()))?;
    let csv_path = cfg.output.join(SWEEP_CSV);
    io::write_atomic(&csv_path, &bytes)?;
    manifest.add_output(csv_path);
    manifest.result("cells", cells.len());
    manifest.write(cfg)?;
    Ok(())
}

fn describe(values: &[(String, toml::Value)]) -> String {
    values.iter().map(|(k, v)| format!("{k}={}", display_value(v))).collect::<Vec<_>>().join(" ")
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::runtime(format!("writing csv: {e}"))
}

/// Seam statistics beyond this many standard errors fail the demo.
const SEAM_LIMIT: f64 = 2.0;

pub fn blend_demo(cfg: &Config) -> Result<(), CliError> {
    if cfg.patch == 0 {
        return Err(CliError::config("key `patch`: the blending demo needs patch > 0"));
    }
    let (h, w) = (cfg.height, cfg.width);
    let truth = TruthSampler::new(cfg)?.draw(&mut seeded(derive_seed(cfg.seed, TRUTH_STREAM)))?;
    let geometry: TiltGeometry = cfg.geometry(w)?;
    let op = ProjectionOperator::new(geometry, h, w)?;
    let sim = simulate_sinogram(&truth, &op, cfg.noise_level(), &mut seeded(derive_seed(cfg.seed, NOISE_STREAM)))?;
    // the full auto-tune is slow on wide images; half the inverse Lipschitz bound is safe
    let step_size = match cfg.step_size {
        Some(s) => s,
        None => 0.5 / power_iteration_sigma_max_sq(&op, 100)?,
    };
    let spectral = spectral_for(cfg, &op)?;
    let mut denoiser = factory_for(cfg, (h, w))?.map(|f| f.make()).transpose()?;
    let problem = Problem::new(&op, &sim.sinogram).with_noise_sigma(sim.noise_sigma).with_truth(&truth);
    let (x, trace) = run_solver(
        &cfg.reconstruction(step_size),
        &problem,
        denoiser.as_mut().map(|d| d.as_mut() as &mut dyn Denoiser),
        spectral.as_ref(),
    )?;

    let (_, cols) = PatchifiedDenoiser::new(PassThroughDenoiser, cfg.patch, cfg.stride, cfg.profile)?.grid(h, w);
    let mut boundaries: Vec<usize> =
        cols.iter().flat_map(|&c| [c, c + cfg.patch]).filter(|&j| j > 0 && j < w).collect();
    boundaries.sort_unstable();
    boundaries.dedup();
    let seam = seam_score(&x, &boundaries)?;

    let mut manifest = Manifest::new(&cfg.output, "blend-demo")?;
    manifest.add_image(&manifest.dir().join("truth"), &truth, cfg.png)?;
    manifest.add_image(&manifest.dir().join("recon"), &x, cfg.png)?;
    let stem = manifest.dir().join("sinogram");
    io::write_sinogram(&stem, &sim.sinogram, op.geometry())?;
    for p in sinogram_outputs(&stem) {
        manifest.add_output(p);
    }
    let trace_path = manifest.dir().join("trace.csv");
    io::write_atomic(&trace_path, trace.to_csv().as_bytes())?;
    manifest.add_output(trace_path);
    manifest.result("step_size", step_size);
    manifest.result("mse", mse(&x, &truth)?);
    manifest.result("boundaries", &boundaries);
    manifest.result("seam", seam);
    manifest.write(cfg)?;

    eprintln!("seam z {:+.2} over {} boundaries (limit ±{SEAM_LIMIT})", seam.z, boundaries.len());
    if seam.z.abs() > SEAM_LIMIT {
        return Err(CliError::runtime(format!("visible seams: boundary z-score {:+.2} exceeds {SEAM_LIMIT}", seam.z)));
    }
    Ok(())
}

pub fn report(paths: &[PathBuf]) -> Result<(), CliError> {
    let mut out = String::new();
    for path in paths {
        let path = if path.is_dir() {
            let csv = path.join(SWEEP_CSV);
            if csv.exists() { csv } else { path.join(MANIFEST_FILE) }
        } else {
            path.clone()
        };
        if path.extension().is_some_and(|e| e == "csv") {
            out.push_str(&sweep_table(&path)?);
        } else {
            out.push_str(&manifest_table(&path)?);
        }
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

fn sweep_table(path: &Path) -> Result<String, CliError> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(String::from).collect();
    let keys = header.iter().position(|h| h == "step_size").unwrap_or(header.len());
    let col = |name: &str| header.iter().position(|h| h == name);
    let pairs = [("MSE", "mse"), ("SSIM", "ssim"), ("residual", "residual")];

    let mut columns: Vec<String> = header[..keys].to_vec();
    columns.extend(pairs.iter().map(|(title, _)| title.to_string()));
    let mut table = format!("## {}\n\n| {} |\n|{}\n", path.display(), columns.join(" | "), "---|".repeat(columns.len()));
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        let mut cells: Vec<String> = (0..keys).map(|i| row[i].to_string()).collect();
        for (_, stem) in pairs {
            let get = |suffix: &str| {
                col(&format!("{stem}_{suffix}")).and_then(|i| row.get(i)).and_then(|v| v.parse::<f64>().ok())
            };
            cells.push(match (get("mean"), get("se")) {
                (Some(m), Some(s)) => format!("{m:.4e} ± {s:.1e}"),
                _ => "-".to_string(),
            });
        }
        table.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    Ok(table)
}

fn manifest_table(path: &Path) -> Result<String, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::runtime(format!("reading {}: {e}", path.display())))?;
    let json: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::runtime(format!("{}: {e}", path.display())))?;
    let command = json.get("command").and_then(|c| c.as_str()).unwrap_or("?");
    let mut table = format!("## {} ({command})\n\n| result | value |\n|---|---|\n", path.display());
    let Some(results) = json.get("results").and_then(|r| r.as_object()) else {
        return Ok(table);
    };
    for (key, value) in results {
        if key == "evaluation" {
            for metric in ["mse", "ssim", "data_residual"] {
                if let Some([m, s]) = value.get(metric).and_then(|v| v.as_array()).map(|a| a.as_slice()) {
                    let (m, s) = (m.as_f64().unwrap_or(f64::NAN), s.as_f64().unwrap_or(f64::NAN));
                    table.push_str(&format!("| {metric} | {m:.4e} ± {s:.1e} |\n"));
                }
            }
        } else {
            table.push_str(&format!("| {key} | {value} |\n"));
        }
    }
    Ok(table)
}
