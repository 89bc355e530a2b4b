//! Noise-prediction denoisers.
//!
//! A [`Denoiser`] maps a corrupted image `x` to `ε̂`, its predicted unscaled
//! noise content, so that `x - σ ε̂` is the denoised image for the noise level
//! `σ` at which `x` was corrupted. Learned denoisers are not conditioned on
//! `σ` and ignore it; the analytic Gaussian instance needs it to evaluate its
//! closed form, so every call carries the operating level as a side channel.

mod gaussian;
mod patch;
pub mod protocol;
mod remote;

pub use gaussian::{Covariance, GaussianPrior, GaussianPriorDenoiser, PriorMean};
pub use patch::{bump_1d, bump_weight, BumpProfile, PatchifiedDenoiser};
pub use remote::{Endpoint, RemoteDenoiser};

use crate::error::Result;
use crate::image::Image;

pub trait Denoiser: Send {
    /// Predicts `ε̂` for an image corrupted at noise level `sigma`.
    fn predict_noise(&mut self, x: &Image, sigma: f64) -> Result<Image>;

    /// Vector-Jacobian product `Jᵀ v` with `J = ∂ε̂/∂x` at `x`.
    ///
    /// `Ok(None)` means the Jacobian is not available (e.g. across a process
    /// boundary); callers then treat `ε̂` as locally constant.
    fn noise_vjp(&mut self, _x: &Image, _v: &Image, _sigma: f64) -> Result<Option<Image>> {
        Ok(None)
    }

    /// Noise levels the denoiser was built or trained for.
    fn valid_range(&self) -> (f64, f64) {
        (0.0, f64::INFINITY)
    }

    fn name(&self) -> &'static str;
}

impl<D: Denoiser + ?Sized> Denoiser for Box<D> {
    fn predict_noise(&mut self, x: &Image, sigma: f64) -> Result<Image> {
        (**self).predict_noise(x, sigma)
    }

    fn noise_vjp(&mut self, x: &Image, v: &Image, sigma: f64) -> Result<Option<Image>> {
        (**self).noise_vjp(x, v, sigma)
    }

    fn valid_range(&self) -> (f64, f64) {
        (**self).valid_range()
    }

    fn name(&self) -> &'static str {
        (**self).name()
    }
}

/// Predicts zero noise everywhere: the denoising step becomes a no-op.
#[derive(Debug, Clone, Copy, Default)]
pub struct PassThroughDenoiser;

impl Denoiser for PassThroughDenoiser {
    fn predict_noise(&mut self, x: &Image, _sigma: f64) -> Result<Image> {
        Ok(Image::zeros(x.height(), x.width()))
    }

    fn noise_vjp(&mut self, x: &Image, _v: &Image, _sigma: f64) -> Result<Option<Image>> {
        Ok(Some(Image::zeros(x.height(), x.width())))
    }

    fn name(&self) -> &'static str {
        "passthrough"
    }
}

/// `x - σ ε̂(x)`.
pub fn denoise(denoiser: &mut dyn Denoiser, x: &Image, sigma: f64) -> Result<Image> {
    let eps = denoiser.predict_noise(x, sigma)?;
    x.ensure_same_shape(&eps)?;
    let mut out = x.clone();
    out.axpy(-sigma, &eps);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn passthrough_predicts_zero() {
        let x = Image::from_fn(3, 4, |i, j| (i + j) as f64);
        let eps = PassThroughDenoiser.predict_noise(&x, 2.0).unwrap();
        assert_eq!(eps, Image::zeros(3, 4));
        assert_eq!(denoise(&mut PassThroughDenoiser, &x, 2.0).unwrap(), x);
    }
}
