//! Test-set evaluation: per-image scores and mean ± standard error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::image::{Image, Sinogram};
use crate::metrics::{mean_se, mse, ssim, SsimParams};
use crate::rng::derive_seed;
use crate::solvers::{reconstruct, Problem, ReconstructionConfig};
use crate::tomo::{LinearOperator, SpectralDecomposition};

#[derive(Debug, Clone)]
pub struct EvalCase {
    pub truth: Image,
    pub y: Sinogram,
    pub noise_sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageScores {
    pub index: usize,
    pub mse: f64,
    pub ssim: f64,
    pub data_residual: f64,
}

/// Each summary is `(mean, standard error)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_image: Vec<ImageScores>,
    pub mse: (f64, f64),
    pub ssim: (f64, f64),
    pub data_residual: (f64, f64),
}

impl EvalReport {
    pub fn from_scores(per_image: Vec<ImageScores>) -> Result<Self> {
        let col = |f: fn(&ImageScores) -> f64| per_image.iter().map(f).collect::<Vec<_>>();
        Ok(EvalReport {
            mse: mean_se(&col(|s| s.mse))?,
            ssim: mean_se(&col(|s| s.ssim))?,
            data_residual: mean_se(&col(|s| s.data_residual))?,
            per_image,
        })
    }
}

/// Reconstructs every case with `cfg` and scores it against its truth.
///
/// Case `i` runs with seed `derive_seed(cfg.seed, i)`, so results do not
/// depend on scheduling. Cases run in parallel; `make_denoiser` is called
/// once per worker and may return `None` for methods that need no denoiser.
pub fn batch_evaluate<F>(
    cfg: &ReconstructionConfig,
    op: &dyn LinearOperator,
    cases: &[EvalCase],
    spectral: Option<&SpectralDecomposition>,
    make_denoiser: F,
) -> Result<EvalReport>
where
    F: Fn() -> Result<Option<Box<dyn Denoiser>>> + Sync,
{
    if cases.is_empty() {
        return Err(Error::param("test set is empty"));
    }
    let scores = cases
        .par_iter()
        .enumerate()
        .map_init(&make_denoiser, |denoiser, (index, case)| {
            let denoiser = match denoiser {
                Ok(d) => d.as_deref_mut(),
                Err(e) => return Err(Error::Capability(format!("could not create denoiser: {e}"))),
            };
            let problem = Problem::new(op, &case.y).with_noise_sigma(case.noise_sigma).with_truth(&case.truth);
            let case_cfg = ReconstructionConfig { method: cfg.method.clone(), seed: derive_seed(cfg.seed, index as u64) };
            let (x, trace) = reconstruct(&case_cfg, &problem, denoiser.map(|d| d as &mut dyn Denoiser), spectral)?;
            let data_residual = match trace.records.last() {
                Some(r) => r.data_residual,
                None => super::data_residual(op, &x, &case.y)?,
            };
            Ok(ImageScores {
                index,
                mse: mse(&x, &case.truth)?,
                ssim: ssim(&x, &case.truth, &SsimParams::for_reference(&case.truth))?,
                data_residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_scores(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::Method;
    use crate::tomo::ProjectionOperator;

    fn cases(op: &ProjectionOperator, n: usize) -> Vec<EvalCase> {
        (0..n)
            .map(|k| {
                let truth = Image::from_fn(16, 16, |i, j| ((i * (k + 1)) as f64 * 0.3).sin() + (j as f64 * 0.2).cos());
                EvalCase { y: op.forward(&truth).unwrap(), truth, noise_sigma: 0.0 }
            })
            .collect()
    }

    #[test]
    fn single_image_has_zero_standard_error() {
        let op = ProjectionOperator::limited_angle(16, 8).unwrap();
        let cfg = ReconstructionConfig { method: Method::Algebraic { step_size: 1e-3, steps: 5 }, seed: 1 };
        let report = batch_evaluate(&cfg, &op, &cases(&op, 1), None, || Ok(None)).unwrap();
        assert_eq!(report.mse.1, 0.0);
        assert_eq!(report.per_image.len(), 1);
    }

    #[test]
    fn empty_set_rejected() {
        let op = ProjectionOperator::limited_angle(16, 8).unwrap();
        let cfg = ReconstructionConfig { method: Method::Algebraic { step_size: 1e-3, steps: 5 }, seed: 1 };
        assert!(batch_evaluate(&cfg, &op, &[], None, || Ok(None)).is_err());
    }

    #[test]
    fn missing_denoiser_is_reported() {
        let op = ProjectionOperator::limited_angle(16, 8).unwrap();
        let cfg = ReconstructionConfig {
            method: Method::Ddgm {
                step_size: 1e-3,
                grad_steps: 1,
                schedule: crate::schedule::ScheduleKind::Geometric { sigma_first: 1.0, sigma_last: 0.1, steps: 3 },
            },
            seed: 1,
        };
        let err = batch_evaluate(&cfg, &op, &cases(&op, 2), None, || Ok(None)).unwrap_err();
        assert!(matches!(err, Error::Capability(_)));
    }
}
