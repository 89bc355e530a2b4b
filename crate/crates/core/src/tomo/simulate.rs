use crate::error::{Error, Result};
use crate::image::{Image, Sinogram};
use crate::rng::{fill_standard_normal, SeededRng};
use crate::tomo::LinearOperator;

/// Measurement noise setting for [`simulate_sinogram`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseLevel {
    /// `σ_y = RMS(Ax) / snr`.
    Snr(f64),
    /// Fixed `σ_y`.
    Sigma(f64),
    /// `y = Ax` exactly.
    Noiseless,
}

#[derive(Debug, Clone)]
pub struct SimulatedSinogram {
    pub sinogram: Sinogram,
    pub noise_sigma: f64,
}

/// `y = A x + σ_y ε` with `ε` i.i.d. standard normal.
///
/// Under [`NoiseLevel::Snr`] the noise scale is chosen so that the RMS of the
/// clean sinogram divided by `σ_y` equals the requested ratio.
pub fn simulate_sinogram(
    x: &Image,
    op: &dyn LinearOperator,
    noise: NoiseLevel,
    rng: &mut SeededRng,
) -> Result<SimulatedSinogram> {
    let clean = op.forward(x)?;
    let sigma = match noise {
        NoiseLevel::Noiseless => 0.0,
        NoiseLevel::Sigma(s) if s >= 0.0 && s.is_finite() => s,
        NoiseLevel::Sigma(s) => return Err(Error::param(format!("noise sigma must be >= 0, got {s}"))),
        NoiseLevel::Snr(snr) if snr.is_infinite() && snr > 0.0 => 0.0,
        NoiseLevel::Snr(snr) if snr > 0.0 => {
            let rms = (clean.norm_sq() / clean.len() as f64).sqrt();
            rms / snr
        }
        NoiseLevel::Snr(snr) => return Err(Error::param(format!("snr must be positive, got {snr}"))),
    };
    if sigma == 0.0 {
        return Ok(SimulatedSinogram { sinogram: clean, noise_sigma: 0.0 });
    }
    let mut eps = vec![0.0; clean.len()];
    fill_standard_normal(rng, &mut eps);
    let (a, b) = clean.shape();
    let mut values = clean.into_vec();
    for (v, e) in values.iter_mut().zip(&eps) {
        *v += sigma * e;
    }
    Ok(SimulatedSinogram { sinogram: Sinogram::from_vec(a, b, values)?, noise_sigma: sigma })
}
