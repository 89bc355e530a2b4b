//! Reconstruction quality metrics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier;
use crate::image::Image;

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let sum: f64 = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// Gaussian-window SSIM settings. Defaults follow the common reference
/// implementation: 11-tap window, σ = 1.5, K1 = 0.01, K2 = 0.03.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub window_sigma: f64,
    pub k1: f64,
    pub k2: f64,
    pub data_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        SsimParams { window: 11, window_sigma: 1.5, k1: 0.01, k2: 0.03, data_range: 1.0 }
    }
}

impl SsimParams {
    /// Default window with `data_range = max - min` of the reference image
    /// (1.0 if the reference is constant).
    pub fn for_reference(reference: &Image) -> Self {
        let (lo, hi) = reference.min_max();
        let range = hi - lo;
        SsimParams { data_range: if range > 0.0 { range } else { 1.0 }, ..Default::default() }
    }

    /// Normalized 1D window; the 2D window is its outer product.
    pub fn kernel_1d(&self) -> Vec<f64> {
        let c = (self.window as f64 - 1.0) / 2.0;
        let raw: Vec<f64> = (0..self.window)
            .map(|k| (-((k as f64 - c).powi(2)) / (2.0 * self.window_sigma * self.window_sigma)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::param(format!("SSIM window must be odd and positive, got {}", self.window)));
        }
        if !(self.data_range > 0.0) || !(self.window_sigma > 0.0) {
            return Err(Error::param("SSIM needs data_range > 0 and window sigma > 0"));
        }
        Ok(())
    }
}

/// Valid-mode separable correlation of a row-major field with `kernel` along both axes.
fn filter_valid(values: &[f64], h: usize, w: usize, kernel: &[f64]) -> (Vec<f64>, usize, usize) {
    let k = kernel.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut rows = vec![0.0; h * ow];
    for i in 0..h {
        for j in 0..ow {
            rows[i * ow + j] = (0..k).map(|t| kernel[t] * values[i * w + j + t]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for i in 0..oh {
        for j in 0..ow {
            out[i * ow + j] = (0..k).map(|t| kernel[t] * rows[(i + t) * ow + j]).sum();
        }
    }
    (out, oh, ow)
}

/// Mean local SSIM over every window position fully inside the image.
pub fn ssim(a: &Image, b: &Image, params: &SsimParams) -> Result<f64> {
    a.ensure_same_shape(b)?;
    params.validate()?;
    let (h, w) = a.shape();
    if h < params.window || w < params.window {
        return Err(Error::dim(format!(
            "image {h}x{w} is smaller than the {}x{} SSIM window",
            params.window, params.window
        )));
    }
    let kernel = params.kernel_1d();
    let (xa, xb) = (a.as_slice(), b.as_slice());
    let sq = |f: &dyn Fn(usize) -> f64| (0..xa.len()).map(f).collect::<Vec<f64>>();
    let (mu_a, oh, ow) = filter_valid(xa, h, w, &kernel);
    let (mu_b, ..) = filter_valid(xb, h, w, &kernel);
    let (e_aa, ..) = filter_valid(&sq(&|p| xa[p] * xa[p]), h, w, &kernel);
    let (e_bb, ..) = filter_valid(&sq(&|p| xb[p] * xb[p]), h, w, &kernel);
    let (e_ab, ..) = filter_valid(&sq(&|p| xa[p] * xb[p]), h, w, &kernel);

    let c1 = (params.k1 * params.data_range).powi(2);
    let c2 = (params.k2 * params.data_range).powi(2);
    let mut total = 0.0;
    for p in 0..oh * ow {
        let (ma, mb) = (mu_a[p], mu_b[p]);
        let var_a = e_aa[p] - ma * ma;
        let var_b = e_bb[p] - mb * mb;
        let cov = e_ab[p] - ma * mb;
        total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
    }
    Ok(total / (oh * ow) as f64)
}

/// Sample standard deviation over `√n`; zero for a single value.
pub fn standard_error(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n == 0 {
        return Err(Error::param("standard error of an empty sample"));
    }
    if n == 1 {
        return Ok(0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((var / n as f64).sqrt())
}

/// Mean and standard error of a sample.
pub fn mean_se(values: &[f64]) -> Result<(f64, f64)> {
    let se = standard_error(values)?;
    Ok((values.iter().sum::<f64>() / values.len() as f64, se))
}

/// Fraction of (mean-removed) spectral power at radial frequencies above half
/// Nyquist, i.e. `|k| > 0.25` cycles/pixel. Zero for a constant image.
pub fn highband_energy_ratio(a: &Image) -> Result<f64> {
    let (h, w) = a.shape();
    if h < 8 || w < 8 {
        return Err(Error::dim(format!("high-band ratio needs at least 8x8, got {h}x{w}")));
    }
    let mean = a.mean();
    let mut buf: Vec<Complex64> = a.as_slice().iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    fourier::fft2(&mut buf, h, w, false);
    let (mut high, mut total) = (0.0, 0.0);
    for ki in 0..h {
        let fy = fourier::frequency(ki, h);
        for kj in 0..w {
            let fx = fourier::frequency(kj, w);
            let p = buf[ki * w + kj].norm_sqr();
            total += p;
            if (fx * fx + fy * fy).sqrt() > 0.25 {
                high += p;
            }
        }
    }
    Ok(if total > 0.0 { high / total } else { 0.0 })
}

/// Column-difference statistics at patch boundaries versus elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeamScore {
    pub boundary_mean: f64,
    pub interior_mean: f64,
    pub interior_sd: f64,
    /// `(boundary_mean - interior_mean) / (interior_sd / √#boundaries)`.
    pub z: f64,
    /// Largest single-boundary deviation in interior standard deviations.
    pub max_boundary_z: f64,
}

/// Compares `d_j = mean_i |x[i, j] - x[i, j-1]|` at the listed boundary
/// columns `j` against all other columns.
pub fn seam_score(img: &Image, boundaries: &[usize]) -> Result<SeamScore> {
    let (h, w) = img.shape();
    let is_boundary = |j: usize| boundaries.contains(&j);
    let diff = |j: usize| (0..h).map(|i| (img.get(i, j) - img.get(i, j - 1)).abs()).sum::<f64>() / h as f64;
    let (mut inner, mut edge) = (Vec::new(), Vec::new());
    for j in 1..w {
        if is_boundary(j) {
            edge.push(diff(j));
        } else {
            inner.push(diff(j));
        }
    }
    if edge.is_empty() || inner.len() < 2 {
        return Err(Error::param("seam score needs at least one boundary and two interior columns"));
    }
    let (interior_mean, interior_se) = mean_se(&inner)?;
    let interior_sd = interior_se * (inner.len() as f64).sqrt();
    let boundary_mean = edge.iter().sum::<f64>() / edge.len() as f64;
    let scale = if interior_sd > 0.0 { interior_sd } else { f64::MIN_POSITIVE };
    let z = (boundary_mean - interior_mean) / (scale / (edge.len() as f64).sqrt());
    let max_boundary_z = edge.iter().map(|d| ((d - interior_mean) / scale).abs()).fold(0.0, f64::max);
    Ok(SeamScore { boundary_mean, interior_mean, interior_sd, z, max_boundary_z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, standard_normal_image};

    #[test]
    fn seam_detects_step() {
        let mut rng = seeded(2);
        let mut img = standard_normal_image(&mut rng, 16, 64);
        let smooth = seam_score(&img, &[16, 32]).unwrap();
        assert!(smooth.z.abs() < 3.0, "{smooth:?}");
        for i in 0..16 {
            for j in 32..64 {
                img.set(i, j, img.get(i, j) + 10.0);
            }
        }
        let stepped = seam_score(&img, &[16, 32]).unwrap();
        assert!(stepped.max_boundary_z > 10.0, "{stepped:?}");
    }

    #[test]
    fn mse_basics() {
        let z = Image::zeros(3, 3);
        let o = Image::filled(3, 3, 1.0);
        assert_eq!(mse(&z, &z).unwrap(), 0.0);
        assert_eq!(mse(&z, &o).unwrap(), 1.0);
        assert!(mse(&z, &Image::zeros(3, 4)).is_err());
    }

    #[test]
    fn mse_matches_loop() {
        let mut rng = seeded(1);
        let a = standard_normal_image(&mut rng, 4, 4);
        let b = standard_normal_image(&mut rng, 4, 4);
        let mut acc = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let d = a.get(i, j) - b.get(i, j);
                acc += d * d;
            }
        }
        assert!((mse(&a, &b).unwrap() - acc / 16.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_identity_and_symmetry() {
        let mut rng = seeded(2);
        let a = standard_normal_image(&mut rng, 16, 16);
        let b = standard_normal_image(&mut rng, 16, 16);
        let p = SsimParams::for_reference(&a);
        assert!((ssim(&a, &a, &p).unwrap() - 1.0).abs() < 1e-9);
        let ab = ssim(&a, &b, &p).unwrap();
        assert!((ab - ssim(&b, &a, &p).unwrap()).abs() < 1e-12);
        assert!((-1.0..=1.0).contains(&ab));
    }

    #[test]
    fn ssim_window_too_large() {
        let a = Image::zeros(10, 20);
        assert!(matches!(ssim(&a, &a, &SsimParams::default()), Err(Error::Dimension(_))));
    }

    #[test]
    fn kernel_normalized() {
        let k = SsimParams::default().kernel_1d();
        assert_eq!(k.len(), 11);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(k.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn standard_error_cases() {
        assert_eq!(standard_error(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert_eq!(standard_error(&[5.0]).unwrap(), 0.0);
        assert!((standard_error(&[0.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(standard_error(&[]).is_err());
    }

    #[test]
    fn highband_cases() {
        assert_eq!(highband_energy_ratio(&Image::filled(16, 16, 2.5)).unwrap(), 0.0);
        assert!(highband_energy_ratio(&Image::zeros(4, 16)).is_err());
    }
}
