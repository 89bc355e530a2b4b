//! Gradient descent on the data term interleaved with noise injection and denoising.

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::{seeded, standard_normal_image};
use crate::schedule::NoiseSchedule;
use crate::solvers::{gradient_descent_data, Problem, RunTrace};

#[derive(Debug, Clone, PartialEq)]
pub struct DdgmParams {
    /// Gradient step size `λ`.
    pub step_size: f64,
    /// Gradient steps `K` per noise level.
    pub grad_steps: usize,
    pub schedule: NoiseSchedule,
}

/// Starting from `x = 0`, for each level `σ_n`: `K` gradient steps on
/// `‖Ax - y‖²`, then `x ← x + σ_n ε_n`, then `x ← x - σ_n ε̂(x)`.
///
/// The denoiser is called with `σ_n` as its operating level. One trace
/// record is written per level.
pub fn ddgm_reconstruct(
    problem: &Problem<'_>,
    denoiser: &mut dyn Denoiser,
    params: &DdgmParams,
    seed: u64,
) -> Result<(Image, RunTrace)> {
    problem.validate()?;
    if !params.schedule.is_geometric() {
        return Err(Error::param("this method expects a geometric schedule"));
    }
    let (h, w) = problem.op.image_shape();
    let mut rng = seeded(seed);
    let mut x = Image::zeros(h, w);
    let mut trace = RunTrace::default();
    for (i, &sigma) in params.schedule.sigmas().iter().enumerate() {
        x = gradient_descent_data(x, problem.y, problem.op, params.step_size, params.grad_steps)?.x;
        trace.grad_evals += params.grad_steps;
        let noise = standard_normal_image(&mut rng, h, w);
        x.axpy(sigma, &noise);
        let eps_hat = denoiser.predict_noise(&x, sigma)?;
        x.ensure_same_shape(&eps_hat)?;
        x.axpy(-sigma, &eps_hat);
        trace.net_evals += 1;
        if !x.is_finite() {
            return Err(Error::Numerical(format!("iterate became non-finite at level {}", i + 1)));
        }
        trace.records.push(problem.record(i + 1, sigma, &x)?);
    }
    Ok((x, trace))
}
