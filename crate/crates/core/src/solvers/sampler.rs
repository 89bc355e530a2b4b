//! Unconditional annealed sampling with a noise-prediction denoiser.

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::{seeded, standard_normal_image};
use crate::schedule::NoiseSchedule;

/// `x ← x - α σ ε̂ + √(αβ) σ ε`.
pub fn langevin_update(x: &mut Image, eps_hat: &Image, noise: &Image, sigma: f64, alpha: f64, beta: f64) -> Result<()> {
    x.ensure_same_shape(eps_hat)?;
    x.ensure_same_shape(noise)?;
    x.axpy(-alpha * sigma, eps_hat);
    x.axpy((alpha * beta).sqrt() * sigma, noise);
    Ok(())
}

pub(crate) fn check_step_params(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(format!("alpha must be positive, got {alpha}")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::param(format!("beta must be non-negative, got {beta}")));
    }
    Ok(())
}

/// Draws an image by starting from `x₁ = σ₁ ε₁` and applying one
/// [`langevin_update`] per schedule level; returns `x_{N+1}`.
///
/// Per step, the denoiser is queried before the fresh noise is drawn.
pub fn sample_unconditional(
    denoiser: &mut dyn Denoiser,
    schedule: &NoiseSchedule,
    alpha: f64,
    beta: f64,
    shape: (usize, usize),
    seed: u64,
) -> Result<Image> {
    check_step_params(alpha, beta)?;
    let (h, w) = shape;
    let mut rng = seeded(seed);
    let mut x = standard_normal_image(&mut rng, h, w);
    x.scale(schedule.first());
    for &sigma in schedule.sigmas() {
        let eps_hat = denoiser.predict_noise(&x, sigma)?;
        let noise = standard_normal_image(&mut rng, h, w);
        langevin_update(&mut x, &eps_hat, &noise, sigma, alpha, beta)?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{Covariance, GaussianPrior, GaussianPriorDenoiser, PassThroughDenoiser};

    #[test]
    fn passthrough_variance_follows_recursion() {
        let (alpha, beta) = (0.183, 0.5);
        let schedule = NoiseSchedule::sampler(2.0, alpha, beta, 10).unwrap();
        let mut want = schedule.first().powi(2);
        for s in schedule.sigmas() {
            want += alpha * beta * s * s;
        }
        let runs = 2000;
        let mut sum_sq = 0.0;
        let mut sum = 0.0;
        for seed in 0..runs {
            let x = sample_unconditional(&mut PassThroughDenoiser, &schedule, alpha, beta, (2, 2), seed).unwrap();
            sum += x.sum();
            sum_sq += x.norm_sq();
        }
        let n = (runs * 4) as f64;
        let var = sum_sq / n;
        // variance of a sample variance of Gaussians: 2σ⁴/n
        let se = want * (2.0 / n).sqrt();
        assert!((var - want).abs() < 4.0 * se, "{var} vs {want}");
        assert!((sum / n).abs() < 4.0 * (want / n).sqrt());
    }

    #[test]
    fn gaussian_prior_samples_have_unit_variance() {
        let prior = GaussianPrior::zero_mean(Covariance::isotropic(1.0).unwrap());
        let (alpha, beta) = (0.1, 0.5);
        let schedule = NoiseSchedule::sampler(10.0, alpha, beta, 200).unwrap();
        let mut den = GaussianPriorDenoiser::new(prior);
        let mut sum_sq = 0.0;
        let runs = 1000;
        for seed in 0..runs {
            let x = sample_unconditional(&mut den, &schedule, alpha, beta, (1, 1), seed).unwrap();
            sum_sq += x.norm_sq();
        }
        let var = sum_sq / runs as f64;
        assert!((var - 1.0).abs() < 0.15, "variance {var}");
    }

    #[test]
    fn deterministic() {
        let schedule = NoiseSchedule::sampler(3.0, 0.183, 0.5, 5).unwrap();
        let a = sample_unconditional(&mut PassThroughDenoiser, &schedule, 0.183, 0.5, (3, 4), 11).unwrap();
        let b = sample_unconditional(&mut PassThroughDenoiser, &schedule, 0.183, 0.5, (3, 4), 11).unwrap();
        assert_eq!(a, b);
    }
}
