//! Reconstruction and generation procedures.
//!
//! Every solver is single-threaded and deterministic given its seed: the
//! only randomness comes from a [`SeededRng`](crate::rng::SeededRng) created
//! from the config seed, drawn in a fixed order.

mod ddgm;
mod ddrm;
mod dps;
mod evaluate;
mod gradient;
mod sampler;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use ddgm::{ddgm_reconstruct, DdgmParams};
pub use ddrm::{ddrm_reconstruct, DdrmParams};
pub use dps::{dps_guidance_gradient, dps_reconstruct, dps_step, DpsGuidance, DpsParams};
pub use evaluate::{batch_evaluate, EvalCase, EvalReport, ImageScores};
pub use gradient::{algebraic_reconstruct, auto_tune_lambda, data_residual, gradient_descent_data, GradientOutcome};
pub use sampler::{langevin_update, sample_unconditional};

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::image::{Image, Sinogram};
use crate::metrics;
use crate::schedule::{NoiseSchedule, ScheduleKind};
use crate::tomo::{LinearOperator, SpectralDecomposition};

/// The data side of a reconstruction: operator, measurements, and optionally
/// the ground truth (only used for trace diagnostics).
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub op: &'a dyn LinearOperator,
    pub y: &'a Sinogram,
    /// Measurement noise `σ_y`; only the spectral baseline uses it.
    pub noise_sigma: f64,
    pub truth: Option<&'a Image>,
}

impl<'a> Problem<'a> {
    pub fn new(op: &'a dyn LinearOperator, y: &'a Sinogram) -> Self {
        Problem { op, y, noise_sigma: 0.0, truth: None }
    }

    pub fn with_noise_sigma(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn with_truth(mut self, truth: &'a Image) -> Self {
        self.truth = Some(truth);
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let (a, b) = self.op.sinogram_shape();
        self.y.ensure_shape(a, b)?;
        if let Some(t) = self.truth {
            let (h, w) = self.op.image_shape();
            t.ensure_shape(h, w)?;
        }
        Ok(())
    }

    pub(crate) fn record(&self, n: usize, sigma: f64, x: &Image) -> Result<TraceRecord> {
        let data_residual = data_residual(self.op, x, self.y)?;
        let mse = match self.truth {
            Some(t) => Some(metrics::mse(x, t)?),
            None => None,
        };
        Ok(TraceRecord { n, sigma, data_residual, mse })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based outer iteration.
    pub n: usize,
    pub sigma: f64,
    /// `‖Ax - y‖²` at the end of the iteration.
    pub data_residual: f64,
    pub mse: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    /// Gradient evaluations of the data term.
    pub grad_evals: usize,
    /// Denoiser evaluations.
    pub net_evals: usize,
}

impl RunTrace {
    pub const CSV_HEADER: &'static str = "n,sigma,data_residual,mse_opt";

    /// `n,sigma,data_residual,mse_opt` rows; the MSE column is empty without ground truth.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let mse = r.mse.map(|m| format!("{m:e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{:e},{:e},{}", r.n, r.sigma, r.data_residual, mse);
        }
        out
    }
}

/// Method tag plus method-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Algebraic {
        step_size: f64,
        steps: usize,
    },
    Ddgm {
        step_size: f64,
        grad_steps: usize,
        schedule: ScheduleKind,
    },
    Dps {
        schedule: ScheduleKind,
        beta: f64,
        zeta: f64,
        rescaled: bool,
    },
    Ddrm {
        steps: usize,
        sigma_init: f64,
        sigma_final: f64,
        eta: f64,
        eta_b: f64,
        threshold: f64,
    },
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Algebraic { .. } => "algebraic",
            Method::Ddgm { .. } => "ddgm",
            Method::Dps { .. } => "dps",
            Method::Ddrm { .. } => "ddrm",
        }
    }

    pub fn needs_denoiser(&self) -> bool {
        !matches!(self, Method::Algebraic { .. })
    }

    pub fn needs_spectral(&self) -> bool {
        matches!(self, Method::Ddrm { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    #[serde(flatten)]
    pub method: Method,
    pub seed: u64,
}

/// Runs the configured solver.
pub fn reconstruct(
    cfg: &ReconstructionConfig,
    problem: &Problem<'_>,
    denoiser: Option<&mut dyn Denoiser>,
    spectral: Option<&SpectralDecomposition>,
) -> Result<(Image, RunTrace)> {
    let need = || Error::Capability("this method needs a denoiser".to_string());
    match &cfg.method {
        Method::Algebraic { step_size, steps } => algebraic_reconstruct(problem, *step_size, *steps),
        Method::Ddgm { step_size, grad_steps, schedule } => {
            let params = DdgmParams {
                step_size: *step_size,
                grad_steps: *grad_steps,
                schedule: NoiseSchedule::from_kind(*schedule)?,
            };
            ddgm_reconstruct(problem, denoiser.ok_or_else(need)?, &params, cfg.seed)
        }
        Method::Dps { schedule, beta, zeta, rescaled } => {
            let params = DpsParams::new(NoiseSchedule::from_kind(*schedule)?, *beta, *zeta, *rescaled)?;
            dps_reconstruct(problem, denoiser.ok_or_else(need)?, &params, cfg.seed)
        }
        Method::Ddrm { steps, sigma_init, sigma_final, eta, eta_b, threshold } => {
            let params = DdrmParams {
                steps: *steps,
                sigma_init: *sigma_init,
                sigma_final: *sigma_final,
                eta: *eta,
                eta_b: *eta_b,
                threshold: *threshold,
            };
            ddrm_reconstruct(problem, spectral, denoiser.ok_or_else(need)?, &params, cfg.seed)
        }
    }
}
