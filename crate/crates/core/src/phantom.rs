//! Synthetic ground-truth images.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::denoise::{Covariance, GaussianPrior};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::SeededRng;

/// Stationary Gaussian texture prior, see [`Covariance::stationary`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TexturePrior {
    pub variance: f64,
    pub correlation_length: f64,
    pub smoothness: f64,
}

impl Default for TexturePrior {
    fn default() -> Self {
        TexturePrior { variance: 1.0, correlation_length: 2.0, smoothness: 1.0 }
    }
}

impl TexturePrior {
    pub fn prior(&self, height: usize, width: usize) -> Result<GaussianPrior> {
        Ok(GaussianPrior::zero_mean(Covariance::stationary(
            height,
            width,
            self.variance,
            self.correlation_length,
            self.smoothness,
        )?))
    }
}

/// A [`TexturePrior`] modulated by a radial support envelope: `Σ = D Σₛ D`
/// with `D` equal to 1 inside a centered disc, `outside_amplitude` outside,
/// and a smooth transition of about one pixel.
///
/// Unlike the stationary texture, this prior couples Fourier modes, so
/// measured components carry information about unmeasured ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportedTexturePrior {
    pub texture: TexturePrior,
    /// Disc radius as a fraction of `min(height, width)`.
    pub radius_fraction: f64,
    pub outside_amplitude: f64,
}

impl Default for SupportedTexturePrior {
    fn default() -> Self {
        SupportedTexturePrior {
            texture: TexturePrior { variance: 1.0, correlation_length: 3.0, smoothness: 1.0 },
            radius_fraction: 0.4,
            outside_amplitude: 0.05,
        }
    }
}

impl SupportedTexturePrior {
    pub fn envelope(&self, height: usize, width: usize) -> Image {
        let radius = self.radius_fraction * height.min(width) as f64;
        let (cy, cx) = ((height as f64 - 1.0) / 2.0, (width as f64 - 1.0) / 2.0);
        Image::from_fn(height, width, |i, j| {
            let r = (i as f64 - cy).hypot(j as f64 - cx);
            let inside = 1.0 / (1.0 + (r - radius).exp());
            self.outside_amplitude + (1.0 - self.outside_amplitude) * inside
        })
    }

    /// Builds the dense covariance; cost grows as `(height · width)³`.
    pub fn prior(&self, height: usize, width: usize) -> Result<GaussianPrior> {
        if !(self.radius_fraction > 0.0 && self.outside_amplitude >= 0.0) {
            return Err(Error::param("support prior needs a positive radius and non-negative outside amplitude"));
        }
        let base = self.texture.prior(height, width)?.covariance.to_dense(height, width)?;
        let d = self.envelope(height, width);
        let d = d.as_slice();
        let mut m = base;
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                m[(r, c)] *= d[r] * d[c];
            }
        }
        // remove round-off asymmetry from the FFT route
        let m = (&m + m.transpose()) * 0.5;
        Ok(GaussianPrior::zero_mean(Covariance::dense(height, width, m)?))
    }
}

pub fn gaussian_texture(prior: &TexturePrior, height: usize, width: usize, rng: &mut SeededRng) -> Result<Image> {
    prior.prior(height, width)?.sample(rng, height, width)
}

/// Sum of `count` random elliptical Gaussian blobs of both signs, centered inside
/// the inscribed circle, then standardized to zero mean and unit variance.
pub fn blob_phantom(height: usize, width: usize, count: usize, rng: &mut SeededRng) -> Result<Image> {
    if count == 0 {
        return Err(Error::param("blob phantom needs at least one blob"));
    }
    let radius = 0.5 * height.min(width) as f64;
    let (cy, cx) = ((height as f64 - 1.0) / 2.0, (width as f64 - 1.0) / 2.0);
    let mut img = Image::zeros(height, width);
    for _ in 0..count {
        let r = radius * 0.7 * rng.random::<f64>().sqrt();
        let phi = rng.random::<f64>() * std::f64::consts::TAU;
        let (by, bx) = (cy + r * phi.sin(), cx + r * phi.cos());
        let sy = radius * (0.05 + 0.2 * rng.random::<f64>());
        let sx = radius * (0.05 + 0.2 * rng.random::<f64>());
        let amp = if rng.random::<bool>() { 1.0 } else { -1.0 } * (0.5 + rng.random::<f64>());
        for i in 0..height {
            for j in 0..width {
                let dy = (i as f64 - by) / sy;
                let dx = (j as f64 - bx) / sx;
                let v = img.get(i, j) + amp * (-0.5 * (dx * dx + dy * dy)).exp();
                img.set(i, j, v);
            }
        }
    }
    let mean = img.mean();
    img.as_mut_slice().iter_mut().for_each(|v| *v -= mean);
    let sd = (img.norm_sq() / img.len() as f64).sqrt();
    if sd > 0.0 {
        img.scale(1.0 / sd);
    }
    Ok(img)
}
