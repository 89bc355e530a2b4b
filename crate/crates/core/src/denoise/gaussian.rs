//! Exact MMSE denoising under a Gaussian prior `x₀ ~ N(μ, Σ)`.
//!
//! For `x = x₀ + σ ε` the posterior mean is `x̂ = μ + Σ(Σ + σ²I)⁻¹(x - μ)`,
//! which is exactly the target a noise-prediction net is trained towards.
//! Every covariance form is diagonal in some orthonormal basis, so the shrink
//! operator is applied as a per-mode gain `λ / (λ + σ²)`.

use nalgebra::{DMatrix, DVector};

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::fourier;
use crate::image::Image;
use crate::rng::{standard_normal_image, SeededRng};

#[derive(Debug, Clone, PartialEq)]
pub enum PriorMean {
    Constant(f64),
    Field(Image),
}

/// Prior covariance over the flattened (row-major) pixels.
#[derive(Debug, Clone)]
pub enum Covariance {
    /// `Σ = v I`, valid for any image shape.
    Isotropic { variance: f64 },
    /// Independent pixels with per-pixel variances.
    Diagonal { height: usize, width: usize, variances: Vec<f64> },
    /// Periodic stationary covariance, diagonalized by the 2D DFT. `spectrum`
    /// holds the (real, even) eigenvalue for each DFT bin in row-major order.
    Stationary { height: usize, width: usize, spectrum: Vec<f64> },
    /// General symmetric PSD matrix, stored by its eigendecomposition.
    Dense { height: usize, width: usize, eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64> },
}

impl Covariance {
    pub fn isotropic(variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::param(format!("prior variance must be positive, got {variance}")));
        }
        Ok(Covariance::Isotropic { variance })
    }

    pub fn diagonal(height: usize, width: usize, variances: Vec<f64>) -> Result<Self> {
        if variances.len() != height * width {
            return Err(Error::dim("diagonal covariance length does not match image shape"));
        }
        if variances.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::param("diagonal covariance entries must be finite and >= 0"));
        }
        Ok(Covariance::Diagonal { height, width, variances })
    }

    /// Stationary texture prior with power spectrum
    /// `p(k) ∝ (1 + (2π ℓ |k|)²)^-(ν+1)`, scaled so the pixel variance is `variance`.
    pub fn stationary(
        height: usize,
        width: usize,
        variance: f64,
        correlation_length: f64,
        smoothness: f64,
    ) -> Result<Self> {
        if !(variance > 0.0) || !(correlation_length >= 0.0) || !(smoothness >= 0.0) {
            return Err(Error::param(format!(
                "stationary prior needs variance > 0, length >= 0, smoothness >= 0 \
                 (got {variance}, {correlation_length}, {smoothness})"
            )));
        }
        let mut spectrum = Vec::with_capacity(height * width);
        for ki in 0..height {
            let fy = fourier::frequency(ki, height);
            for kj in 0..width {
                let fx = fourier::frequency(kj, width);
                let r2 = (2.0 * std::f64::consts::PI * correlation_length).powi(2) * (fx * fx + fy * fy);
                spectrum.push((1.0 + r2).powf(-(smoothness + 1.0)));
            }
        }
        let mean_power = spectrum.iter().sum::<f64>() / spectrum.len() as f64;
        spectrum.iter_mut().for_each(|p| *p *= variance / mean_power);
        Ok(Covariance::Stationary { height, width, spectrum })
    }

    /// Eigendecomposes an explicit symmetric PSD matrix.
    pub fn dense(height: usize, width: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let n = height * width;
        if matrix.shape() != (n, n) {
            return Err(Error::dim(format!(
                "covariance is {:?}, expected {n}x{n}",
                matrix.shape()
            )));
        }
        let asym = (&matrix - matrix.transpose()).abs().max();
        let scale = matrix.abs().max().max(f64::MIN_POSITIVE);
        if asym > 1e-10 * scale {
            return Err(Error::param(format!("covariance is not symmetric (max asymmetry {asym:e})")));
        }
        let eig = matrix.symmetric_eigen();
        let min = eig.eigenvalues.min();
        if min < -1e-10 * scale {
            return Err(Error::param(format!("covariance is not PSD (eigenvalue {min:e})")));
        }
        let eigenvalues = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        Ok(Covariance::Dense { height, width, eigenvalues, eigenvectors: eig.eigenvectors })
    }

    /// Required image shape, if the covariance is tied to one.
    pub fn shape(&self) -> Option<(usize, usize)> {
        match self {
            Covariance::Isotropic { .. } => None,
            Covariance::Diagonal { height, width, .. }
            | Covariance::Stationary { height, width, .. }
            | Covariance::Dense { height, width, .. } => Some((*height, *width)),
        }
    }

    /// `Σ v`.
    pub fn apply(&self, v: &Image) -> Result<Image> {
        self.apply_spectral(v, |l| l)
    }

    /// The explicit `n × n` matrix for `height × width` images.
    pub fn to_dense(&self, height: usize, width: usize) -> Result<DMatrix<f64>> {
        let n = height * width;
        let mut out = DMatrix::zeros(n, n);
        let mut e = Image::zeros(height, width);
        for p in 0..n {
            e.as_mut_slice()[p] = 1.0;
            let col = self.apply(&e)?;
            out.column_mut(p).copy_from_slice(col.as_slice());
            e.as_mut_slice()[p] = 0.0;
        }
        Ok(out)
    }

    /// Applies `g(λ)` to every eigenmode of `v`: returns `Q g(Λ) Qᵀ v`.
    fn apply_spectral(&self, v: &Image, gain: impl Fn(f64) -> f64) -> Result<Image> {
        if let Some((h, w)) = self.shape() {
            v.ensure_shape(h, w)?;
        }
        let (h, w) = v.shape();
        let out = match self {
            Covariance::Isotropic { variance } => {
                let g = gain(*variance);
                v.as_slice().iter().map(|x| g * x).collect()
            }
            Covariance::Diagonal { variances, .. } => {
                v.as_slice().iter().zip(variances).map(|(x, l)| gain(*l) * x).collect()
            }
            Covariance::Stationary { spectrum, .. } => {
                let mult: Vec<f64> = spectrum.iter().map(|&l| gain(l)).collect();
                fourier::filter_real(v.as_slice(), h, w, &mult)
            }
            Covariance::Dense { eigenvalues, eigenvectors, .. } => {
                let coeffs = eigenvectors.tr_mul(&DVector::from_column_slice(v.as_slice()));
                let scaled = DVector::from_iterator(
                    coeffs.len(),
                    coeffs.iter().zip(eigenvalues).map(|(c, l)| gain(*l) * c),
                );
                (eigenvectors * scaled).as_slice().to_vec()
            }
        };
        Image::from_vec(h, w, out)
    }

    fn eigenvalues(&self, n: usize) -> Vec<f64> {
        match self {
            Covariance::Isotropic { variance } => vec![*variance; n],
            Covariance::Diagonal { variances, .. } => variances.clone(),
            Covariance::Stationary { spectrum, .. } => spectrum.clone(),
            Covariance::Dense { eigenvalues, .. } => eigenvalues.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaussianPrior {
    pub mean: PriorMean,
    pub covariance: Covariance,
}

impl GaussianPrior {
    pub fn new(mean: PriorMean, covariance: Covariance) -> Result<Self> {
        if let (PriorMean::Field(m), Some((h, w))) = (&mean, covariance.shape()) {
            m.ensure_shape(h, w)?;
        }
        Ok(GaussianPrior { mean, covariance })
    }

    pub fn zero_mean(covariance: Covariance) -> Self {
        GaussianPrior { mean: PriorMean::Constant(0.0), covariance }
    }

    fn subtract_mean(&self, x: &Image) -> Result<Image> {
        let mut centered = x.clone();
        match &self.mean {
            PriorMean::Constant(c) => centered.as_mut_slice().iter_mut().for_each(|v| *v -= c),
            PriorMean::Field(m) => {
                m.ensure_same_shape(x)?;
                centered.axpy(-1.0, m);
            }
        }
        Ok(centered)
    }

    fn add_mean(&self, x: &mut Image) {
        match &self.mean {
            PriorMean::Constant(c) => x.as_mut_slice().iter_mut().for_each(|v| *v += c),
            PriorMean::Field(m) => x.axpy(1.0, m),
        }
    }

    /// `Σ(Σ + σ²I)⁻¹ v`.
    pub fn shrink(&self, v: &Image, sigma: f64) -> Result<Image> {
        let s2 = sigma * sigma;
        self.covariance.apply_spectral(v, |l| if l + s2 > 0.0 { l / (l + s2) } else { 0.0 })
    }

    /// Posterior mean of `x₀` given `x = x₀ + σ ε`.
    pub fn posterior_mean(&self, x: &Image, sigma: f64) -> Result<Image> {
        let centered = self.subtract_mean(x)?;
        let mut out = self.shrink(&centered, sigma)?;
        self.add_mean(&mut out);
        Ok(out)
    }

    /// Draws `μ + Σ^½ ε`.
    pub fn sample(&self, rng: &mut SeededRng, height: usize, width: usize) -> Result<Image> {
        if let Some((h, w)) = self.covariance.shape() {
            if (h, w) != (height, width) {
                return Err(Error::dim(format!("prior is {h}x{w}, requested {height}x{width}")));
            }
        }
        let white = standard_normal_image(rng, height, width);
        let mut out = self.covariance.apply_spectral(&white, f64::sqrt)?;
        self.add_mean(&mut out);
        Ok(out)
    }

    /// Per-pixel MMSE at noise level `σ`: `tr(σ²Σ(Σ+σ²I)⁻¹) / n`.
    pub fn mmse_per_pixel(&self, sigma: f64, height: usize, width: usize) -> f64 {
        let n = height * width;
        let s2 = sigma * sigma;
        let eig = self.covariance.eigenvalues(n);
        eig.iter().map(|l| s2 * l / (l + s2)).sum::<f64>() / eig.len() as f64
    }
}

/// The closed-form MMSE denoiser, returning `ε̂ = (x - x̂) / σ`.
#[derive(Debug, Clone)]
pub struct GaussianPriorDenoiser {
    prior: GaussianPrior,
}

impl GaussianPriorDenoiser {
    pub fn new(prior: GaussianPrior) -> Self {
        GaussianPriorDenoiser { prior }
    }

    pub fn prior(&self) -> &GaussianPrior {
        &self.prior
    }
}

impl Denoiser for GaussianPriorDenoiser {
    fn predict_noise(&mut self, x: &Image, sigma: f64) -> Result<Image> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::param(format!("analytic denoiser needs sigma > 0, got {sigma}")));
        }
        let xhat = self.prior.posterior_mean(x, sigma)?;
        let mut eps = x.clone();
        eps.axpy(-1.0, &xhat);
        eps.scale(1.0 / sigma);
        Ok(eps)
    }

    /// `J = (I - S)/σ` with `S = Σ(Σ+σ²I)⁻¹` symmetric, so `Jᵀ v = (v - S v)/σ`.
    fn noise_vjp(&mut self, _x: &Image, v: &Image, sigma: f64) -> Result<Option<Image>> {
        let sv = self.prior.shrink(v, sigma)?;
        let mut out = v.clone();
        out.axpy(-1.0, &sv);
        out.scale(1.0 / sigma);
        Ok(Some(out))
    }

    fn name(&self) -> &'static str {
        "analytic"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn identity_prior_closed_form() {
        let mut d = GaussianPriorDenoiser::new(GaussianPrior::zero_mean(Covariance::isotropic(1.0).unwrap()));
        let x = Image::from_fn(2, 3, |i, j| i as f64 - j as f64 * 0.5);
        let sigma = 0.7;
        let eps = d.predict_noise(&x, sigma).unwrap();
        for (e, v) in eps.as_slice().iter().zip(x.as_slice()) {
            assert!((e - v * sigma / (1.0 + sigma * sigma)).abs() < 1e-15);
        }
    }

    #[test]
    fn diagonal_two_pixel_example() {
        let cov = Covariance::diagonal(1, 2, vec![4.0, 1.0]).unwrap();
        let mut d = GaussianPriorDenoiser::new(GaussianPrior::zero_mean(cov));
        let x = Image::from_vec(1, 2, vec![1.0, 1.0]).unwrap();
        let xhat = d.prior().posterior_mean(&x, 1.0).unwrap();
        assert!((xhat.get(0, 0) - 0.8).abs() < 1e-15);
        assert!((xhat.get(0, 1) - 0.5).abs() < 1e-15);
        let eps = d.predict_noise(&x, 1.0).unwrap();
        assert!((eps.get(0, 0) - 0.2).abs() < 1e-15);
        assert!((eps.get(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dense_matches_direct_solve() {
        // oracle: explicit (Σ + σ²I)⁻¹ by LU
        let n = 6;
        let b = DMatrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) as f64).sin());
        let sigma_mat = &b * b.transpose() + DMatrix::identity(n, n) * 0.1;
        let prior = GaussianPrior::new(
            PriorMean::Field(Image::from_fn(2, 3, |i, j| (i + 2 * j) as f64 * 0.1)),
            Covariance::dense(2, 3, sigma_mat.clone()).unwrap(),
        )
        .unwrap();
        let x = Image::from_fn(2, 3, |i, j| (i * 3 + j) as f64 - 2.0);
        let sigma = 0.8;
        let got = prior.posterior_mean(&x, sigma).unwrap();

        let mu = DVector::from_iterator(n, (0..n).map(|p| ((p / 3) + 2 * (p % 3)) as f64 * 0.1));
        let xv = DVector::from_column_slice(x.as_slice());
        let inv = (&sigma_mat + DMatrix::identity(n, n) * sigma * sigma).try_inverse().unwrap();
        let want = &mu + &sigma_mat * inv * (xv - &mu);
        for (g, w) in got.as_slice().iter().zip(want.iter()) {
            assert!((g - w).abs() < 1e-10);
        }
    }

    #[test]
    fn stationary_matches_dense_circulant() {
        // build the circulant covariance explicitly and compare shrink outputs
        let (h, w) = (4, 5);
        let cov = Covariance::stationary(h, w, 1.0, 1.2, 1.0).unwrap();
        let Covariance::Stationary { spectrum, .. } = &cov else { unreachable!() };
        let n = h * w;
        // c(r) = (1/n) Σ_k p(k) cos(2π k·r)
        let kernel = |di: usize, dj: usize| -> f64 {
            let mut acc = 0.0;
            for ki in 0..h {
                for kj in 0..w {
                    let phase = 2.0 * std::f64::consts::PI
                        * (ki as f64 * di as f64 / h as f64 + kj as f64 * dj as f64 / w as f64);
                    acc += spectrum[ki * w + kj] * phase.cos();
                }
            }
            acc / n as f64
        };
        let dense = DMatrix::from_fn(n, n, |p, q| {
            let (pi, pj, qi, qj) = (p / w, p % w, q / w, q % w);
            kernel((pi + h - qi) % h, (pj + w - qj) % w)
        });
        assert!((dense[(0, 0)] - 1.0).abs() < 1e-12, "pixel variance {}", dense[(0, 0)]);
        let dense_prior = GaussianPrior::zero_mean(Covariance::dense(h, w, dense).unwrap());
        let stat_prior = GaussianPrior::zero_mean(cov);
        let v = standard_normal_image(&mut seeded(4), h, w);
        let a = stat_prior.shrink(&v, 0.6).unwrap();
        let b = dense_prior.shrink(&v, 0.6).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!((stat_prior.mmse_per_pixel(0.6, h, w) - dense_prior.mmse_per_pixel(0.6, h, w)).abs() < 1e-10);
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(Covariance::dense(1, 2, m).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(Covariance::dense(1, 2, m).is_err());
    }

    #[test]
    fn vjp_matches_finite_difference() {
        let mut d = GaussianPriorDenoiser::new(GaussianPrior::zero_mean(
            Covariance::stationary(4, 4, 1.0, 1.0, 1.0).unwrap(),
        ));
        let mut rng = seeded(21);
        let x = standard_normal_image(&mut rng, 4, 4);
        let v = standard_normal_image(&mut rng, 4, 4);
        let sigma = 0.9;
        let jtv = d.noise_vjp(&x, &v, sigma).unwrap().unwrap();
        // J is symmetric, so compare with directional derivative J v
        let h = 1e-6;
        let mut xp = x.clone();
        xp.axpy(h, &v);
        let mut xm = x.clone();
        xm.axpy(-h, &v);
        let mut fd = d.predict_noise(&xp, sigma).unwrap();
        fd.axpy(-1.0, &d.predict_noise(&xm, sigma).unwrap());
        fd.scale(0.5 / h);
        for (a, b) in jtv.as_slice().iter().zip(fd.as_slice()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn stationary_sample_variance() {
        let prior = GaussianPrior::zero_mean(Covariance::stationary(32, 32, 1.0, 2.0, 1.0).unwrap());
        let mut rng = seeded(3);
        let mut acc = 0.0;
        let mut count = 0usize;
        for _ in 0..40 {
            let s = prior.sample(&mut rng, 32, 32).unwrap();
            acc += s.norm_sq();
            count += s.len();
        }
        let var = acc / count as f64;
        assert!((var - 1.0).abs() < 0.1, "variance {var}");
    }
}
