//! Diffusion posterior sampling with a residual-normalized data gradient.

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::image::{Image, Sinogram};
use crate::rng::{seeded, standard_normal_image, SeededRng};
use crate::schedule::{alpha_for_ratio, NoiseSchedule, ScheduleKind};
use crate::solvers::sampler::{check_step_params, langevin_update};
use crate::solvers::{Problem, RunTrace};
use crate::tomo::LinearOperator;

#[derive(Debug, Clone, PartialEq)]
pub struct DpsParams {
    pub schedule: NoiseSchedule,
    pub alpha: f64,
    pub beta: f64,
    /// Guidance weight `ζ`.
    pub zeta: f64,
    /// Divide the guidance by `√(1 + σ_n²)`.
    pub rescaled: bool,
}

impl DpsParams {
    /// Takes `α` from a sampler schedule; for a geometric schedule, picks the
    /// `α` whose sampler decay matches the schedule's ratio for this `β`.
    pub fn new(schedule: NoiseSchedule, beta: f64, zeta: f64, rescaled: bool) -> Result<Self> {
        if !(zeta >= 0.0 && zeta.is_finite()) {
            return Err(Error::param(format!("zeta must be non-negative, got {zeta}")));
        }
        let alpha = match *schedule.kind() {
            ScheduleKind::Sampler { alpha, beta: schedule_beta, .. } => {
                if schedule_beta != beta {
                    return Err(Error::param(format!(
                        "beta {beta} disagrees with the schedule's beta {schedule_beta}"
                    )));
                }
                alpha
            }
            ScheduleKind::Geometric { .. } => alpha_for_ratio(schedule.decay_ratio(), beta)?,
        };
        check_step_params(alpha, beta)?;
        Ok(DpsParams { schedule, alpha, beta, zeta, rescaled })
    }
}

/// Gradient of `‖A(x - σ ε̂(x)) - y‖²` with respect to `x`, plus the pieces
/// the update reuses.
#[derive(Debug, Clone)]
pub struct DpsGuidance {
    pub eps_hat: Image,
    pub gradient: Image,
    /// `‖A x̂ - y‖` with `x̂ = x - σ ε̂`.
    pub residual_norm: f64,
}

/// `(I - σJ)ᵀ · 2Aᵀ(A x̂ - y)` with `J = ∂ε̂/∂x`.
///
/// Denoisers that cannot provide `Jᵀv` are treated as locally constant
/// (`J = 0`), leaving `2Aᵀ(A x̂ - y)`.
pub fn dps_guidance_gradient(
    denoiser: &mut dyn Denoiser,
    op: &dyn LinearOperator,
    y: &Sinogram,
    x: &Image,
    sigma: f64,
) -> Result<DpsGuidance> {
    let eps_hat = denoiser.predict_noise(x, sigma)?;
    guidance_from(denoiser, op, y, x, sigma, eps_hat)
}

fn guidance_from(
    denoiser: &mut dyn Denoiser,
    op: &dyn LinearOperator,
    y: &Sinogram,
    x: &Image,
    sigma: f64,
    eps_hat: Image,
) -> Result<DpsGuidance> {
    x.ensure_same_shape(&eps_hat)?;
    let mut x_hat = x.clone();
    x_hat.axpy(-sigma, &eps_hat);
    let mut r = op.forward(&x_hat)?;
    r.axpy(-1.0, y);
    let residual_norm = r.norm_sq().sqrt();
    let mut g = op.adjoint(&r)?;
    g.scale(2.0);
    let mut gradient = g.clone();
    if let Some(jt) = denoiser.noise_vjp(x, &g, sigma)? {
        gradient.axpy(-sigma, &jt);
    }
    Ok(DpsGuidance { eps_hat, gradient, residual_norm })
}

/// One sampler step plus `-ζ ∇/‖A x̂ - y‖` (further divided by `√(1+σ²)` when
/// rescaled). The guidance is skipped when `ζ = 0` or the residual vanishes;
/// with `ζ = 0` the step is bit-identical to [`langevin_update`].
#[allow(clippy::too_many_arguments)]
pub fn dps_step(
    x: &Image,
    sigma: f64,
    denoiser: &mut dyn Denoiser,
    y: &Sinogram,
    op: &dyn LinearOperator,
    params: &DpsParams,
    rng: &mut SeededRng,
) -> Result<Image> {
    let eps_hat = denoiser.predict_noise(x, sigma)?;
    let noise = standard_normal_image(rng, x.height(), x.width());
    let mut next = x.clone();
    if params.zeta == 0.0 {
        langevin_update(&mut next, &eps_hat, &noise, sigma, params.alpha, params.beta)?;
        return Ok(next);
    }
    let guidance = guidance_from(denoiser, op, y, x, sigma, eps_hat)?;
    langevin_update(&mut next, &guidance.eps_hat, &noise, sigma, params.alpha, params.beta)?;
    if guidance.residual_norm > 0.0 {
        let mut weight = params.zeta / guidance.residual_norm;
        if params.rescaled {
            weight /= (1.0 + sigma * sigma).sqrt();
        }
        next.axpy(-weight, &guidance.gradient);
    }
    Ok(next)
}

/// Iterates [`dps_step`] over the schedule from `x₁ = σ₁ ε₁`.
pub fn dps_reconstruct(
    problem: &Problem<'_>,
    denoiser: &mut dyn Denoiser,
    params: &DpsParams,
    seed: u64,
) -> Result<(Image, RunTrace)> {
    problem.validate()?;
    let (h, w) = problem.op.image_shape();
    let mut rng = seeded(seed);
    let mut x = standard_normal_image(&mut rng, h, w);
    x.scale(params.schedule.first());
    let mut trace = RunTrace::default();
    for (i, &sigma) in params.schedule.sigmas().iter().enumerate() {
        x = dps_step(&x, sigma, denoiser, problem.y, problem.op, params, &mut rng)?;
        trace.net_evals += 1;
        if params.zeta != 0.0 {
            trace.grad_evals += 1;
        }
        if !x.is_finite() {
            return Err(Error::Numerical(format!("iterate became non-finite at level {}", i + 1)));
        }
        trace.records.push(problem.record(i + 1, sigma, &x)?);
    }
    Ok((x, trace))
}
