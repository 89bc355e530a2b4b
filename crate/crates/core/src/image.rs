//! Dense 2D scalar fields: reconstructions ([`Image`]) and measurements ([`Sinogram`]).
//!
//! Both are stored row-major in `f64`. The on-disk container is 32-bit (see
//! [`crate::io`]); in memory everything stays in double precision so the
//! operator identities hold to ~1e-12.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A `height × width` image, row-major (`values[i * width + j]` is row `i`, column `j`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl Image {
    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height >= 1 && width >= 1, "image dimensions must be positive");
        Image { height, width, values: vec![0.0; height * width] }
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        let mut img = Image::zeros(height, width);
        img.values.fill(value);
        img
    }

    /// Builds an image from row-major values, rejecting bad shapes and non-finite data.
    pub fn from_vec(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::dim(format!("image shape {height}x{width} has a zero axis")));
        }
        if values.len() != height * width {
            return Err(Error::dim(format!(
                "expected {} values for a {height}x{width} image, got {}",
                height * width,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite pixel at flat index {pos}")));
        }
        Ok(Image { height, width, values })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut img = Image::zeros(height, width);
        for i in 0..height {
            for j in 0..width {
                img.values[i * width + j] = f(i, j);
            }
        }
        img
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.width + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.width + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_shape(&self, height: usize, width: usize) -> Result<()> {
        if self.shape() != (height, width) {
            return Err(Error::dim(format!(
                "image is {}x{}, expected {height}x{width}",
                self.height, self.width
            )));
        }
        Ok(())
    }

    pub fn ensure_same_shape(&self, other: &Image) -> Result<()> {
        other.ensure_shape(self.height, self.width)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Image) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn dot(&self, other: &Image) -> f64 {
        dot(&self.values, &other.values)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.values, &self.values)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Copies the `rows × cols` window whose top-left corner is `(top, left)`.
    pub fn crop(&self, top: usize, left: usize, rows: usize, cols: usize) -> Image {
        assert!(top + rows <= self.height && left + cols <= self.width);
        let mut out = Image::zeros(rows, cols);
        for i in 0..rows {
            let src = (top + i) * self.width + left;
            out.values[i * cols..(i + 1) * cols].copy_from_slice(&self.values[src..src + cols]);
        }
        out
    }
}

/// Stacked tilt views: one row of `bins` detector values per projection angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    num_angles: usize,
    bins: usize,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn zeros(num_angles: usize, bins: usize) -> Self {
        Sinogram { num_angles, bins, values: vec![0.0; num_angles * bins] }
    }

    pub fn from_vec(num_angles: usize, bins: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_angles * bins {
            return Err(Error::dim(format!(
                "expected {} values for a {num_angles}x{bins} sinogram, got {}",
                num_angles * bins,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite sinogram value at flat index {pos}")));
        }
        Ok(Sinogram { num_angles, bins, values })
    }

    #[inline]
    pub fn num_angles(&self) -> usize {
        self.num_angles
    }

    #[inline]
    pub fn bins(&self) -> usize {
        self.bins
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.num_angles, self.bins)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, angle: usize) -> &[f64] {
        &self.values[angle * self.bins..(angle + 1) * self.bins]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn axpy(&mut self, alpha: f64, other: &Sinogram) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn dot(&self, other: &Sinogram) -> f64 {
        dot(&self.values, &other.values)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.values, &self.values)
    }

    pub fn ensure_shape(&self, num_angles: usize, bins: usize) -> Result<()> {
        if self.shape() != (num_angles, bins) {
            return Err(Error::dim(format!(
                "sinogram is {}x{}, expected {num_angles}x{bins}",
                self.num_angles, self.bins
            )));
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes_and_nan() {
        assert!(matches!(Image::from_vec(2, 2, vec![0.0; 3]), Err(Error::Dimension(_))));
        assert!(matches!(Image::from_vec(0, 2, vec![]), Err(Error::Dimension(_))));
        assert!(matches!(
            Image::from_vec(1, 2, vec![0.0, f64::NAN]),
            Err(Error::Numerical(_))
        ));
        assert!(Sinogram::from_vec(2, 3, vec![0.0; 5]).is_err());
    }

    #[test]
    fn crop_picks_window() {
        let img = Image::from_fn(4, 5, |i, j| (i * 10 + j) as f64);
        let c = img.crop(1, 2, 2, 3);
        assert_eq!(c.as_slice(), &[12.0, 13.0, 14.0, 22.0, 23.0, 24.0]);
    }
}
