//! Spectral restoration baseline: each singular component of `A = U S Vᵀ` is
//! updated according to its singular value and the current noise level.
//!
//! The per-component rules follow the variance-exploding form of Kawar et
//! al., "Denoising Diffusion Restoration Models" (NeurIPS 2022).
//! Singular values below `threshold` are treated as zero, and the process
//! starts at `sigma_init`.

use nalgebra::DVector;

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::rng::{fill_standard_normal, seeded};
use crate::schedule::NoiseSchedule;
use crate::solvers::{Problem, RunTrace};
use crate::tomo::SpectralDecomposition;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DdrmParams {
    /// Denoiser evaluations `N`.
    pub steps: usize,
    pub sigma_init: f64,
    pub sigma_final: f64,
    pub eta: f64,
    pub eta_b: f64,
    /// Singular values strictly below this are zeroed.
    pub threshold: f64,
}

impl Default for DdrmParams {
    fn default() -> Self {
        DdrmParams { steps: 10, sigma_init: 30.0, sigma_final: 0.03, eta: 1.0, eta_b: 1.0, threshold: 1.0 / 30.0 }
    }
}

impl DdrmParams {
    fn validate(&self) -> Result<()> {
        for (name, v) in [("eta", self.eta), ("eta_b", self.eta_b)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.threshold >= 0.0) {
            return Err(Error::param(format!("threshold must be non-negative, got {}", self.threshold)));
        }
        Ok(())
    }

    /// `σ_1 … σ_N` (geometric), then a final target of 0.
    fn levels(&self) -> Result<Vec<f64>> {
        let mut levels = match self.steps {
            0 => return Err(Error::param("spectral baseline needs at least one step")),
            1 => vec![self.sigma_init],
            n => NoiseSchedule::geometric(self.sigma_init, self.sigma_final, n)?.sigmas().to_vec(),
        };
        levels.push(0.0);
        Ok(levels)
    }
}

/// A component's measurement: `ȳ_i = (Uᵀy)_i / s_i` with noise `σ_y / s_i`.
#[derive(Debug, Clone, Copy)]
struct Measured {
    value: f64,
    noise: f64,
}

/// Mean and standard deviation of one component at the next level.
fn component_update(
    x_bar: f64,
    x0_bar: f64,
    measured: Option<Measured>,
    sigma_t: f64,
    sigma_next: f64,
    p: &DdrmParams,
) -> (f64, f64) {
    let keep = (1.0 - p.eta * p.eta).sqrt();
    match measured {
        None => (x0_bar + keep * sigma_next * (x_bar - x0_bar) / sigma_t, p.eta * sigma_next),
        Some(m) if sigma_next < m.noise => {
            (x0_bar + keep * sigma_next * (m.value - x0_bar) / m.noise, p.eta * sigma_next)
        }
        Some(m) => {
            let var = sigma_next * sigma_next - p.eta_b * p.eta_b * m.noise * m.noise;
            ((1.0 - p.eta_b) * x0_bar + p.eta_b * m.value, var.max(0.0).sqrt())
        }
    }
}

pub fn ddrm_reconstruct(
    problem: &Problem<'_>,
    spectral: Option<&SpectralDecomposition>,
    denoiser: &mut dyn Denoiser,
    params: &DdrmParams,
    seed: u64,
) -> Result<(Image, RunTrace)> {
    problem.validate()?;
    params.validate()?;
    let spectral =
        spectral.ok_or_else(|| Error::Capability("this method needs the SVD of the operator".into()))?;
    let (h, w) = problem.op.image_shape();
    let n = h * w;
    let m = problem.y.len();
    if spectral.v.shape() != (n, n) || spectral.u.nrows() != m {
        return Err(Error::dim(format!(
            "decomposition with U {:?} and V {:?} does not match a {m}x{n} operator",
            spectral.u.shape(),
            spectral.v.shape()
        )));
    }
    let sigma_y = problem.noise_sigma;
    let uty = spectral.u.tr_mul(&DVector::from_column_slice(problem.y.as_slice()));
    let measured: Vec<Option<Measured>> = (0..n)
        .map(|i| match spectral.singular_values.get(i) {
            Some(&s) if s > 0.0 && s >= params.threshold => Some(Measured { value: uty[i] / s, noise: sigma_y / s }),
            _ => None,
        })
        .collect();

    let levels = params.levels()?;
    let mut rng = seeded(seed);
    let mut z = vec![0.0; n];

    fill_standard_normal(&mut rng, &mut z);
    let sigma_1 = levels[0];
    let mut x_bar = DVector::from_fn(n, |i, _| match measured[i] {
        Some(mi) if sigma_1 >= mi.noise => {
            mi.value + (sigma_1 * sigma_1 - mi.noise * mi.noise).sqrt() * z[i]
        }
        _ => sigma_1 * z[i],
    });

    let mut trace = RunTrace::default();
    for step in 0..levels.len() - 1 {
        let (sigma_t, sigma_next) = (levels[step], levels[step + 1]);
        let x = Image::from_vec(h, w, (&spectral.v * &x_bar).as_slice().to_vec())?;
        let eps_hat = denoiser.predict_noise(&x, sigma_t)?;
        x.ensure_same_shape(&eps_hat)?;
        trace.net_evals += 1;
        let mut x0 = x;
        x0.axpy(-sigma_t, &eps_hat);
        let x0_bar = spectral.v.tr_mul(&DVector::from_column_slice(x0.as_slice()));
        fill_standard_normal(&mut rng, &mut z);
        for i in 0..n {
            let (mean, sd) = component_update(x_bar[i], x0_bar[i], measured[i], sigma_t, sigma_next, params);
            x_bar[i] = mean + sd * z[i];
        }
        let x = Image::from_vec(h, w, (&spectral.v * &x_bar).as_slice().to_vec())?;
        if !x.is_finite() {
            return Err(Error::Numerical(format!("iterate became non-finite at step {}", step + 1)));
        }
        trace.records.push(problem.record(step + 1, sigma_t, &x)?);
    }
    let x = Image::from_vec(h, w, (&spectral.v * &x_bar).as_slice().to_vec())?;
    Ok((x, trace))
}
