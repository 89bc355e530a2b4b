//! Joseph-style ray-driven projector.
//!
//! Pixel `(i, j)` has its center at `x = j - (W-1)/2`, `y = i - (H-1)/2`
//! (unit pixel pitch, rotation about the image center). A view at angle `θ`
//! measures line integrals along the direction `(-sin θ, cos θ)`; detector
//! bin `b` sits at signed offset `t = b - (B-1)/2` along `(cos θ, sin θ)`.
//! At `θ = 0` the rays run down the image columns, so the view is the
//! per-column sum.
//!
//! Each ray is sampled once per image row (when `|cos θ| >= |sin θ|`) or once
//! per image column otherwise, linearly interpolating between the two nearest
//! pixels, and weighted by the path length per step (`1/|cos θ|` or
//! `1/|sin θ|`). Forward and adjoint walk the same samples, so the adjoint is
//! exact to rounding.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::image::{Image, Sinogram};
use crate::tomo::{LinearOperator, TiltGeometry};

/// Upper bound on dense matrix entries that [`ProjectionOperator::build_matrix`] may allocate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixBudget {
    pub max_entries: usize,
}

impl Default for MatrixBudget {
    /// Enough for a 64×64 image with 64 views.
    fn default() -> Self {
        MatrixBudget { max_entries: (64 * 64) * (64 * 64) }
    }
}

#[derive(Debug, Clone, Copy)]
struct View {
    cos: f64,
    sin: f64,
}

#[derive(Debug, Clone)]
pub struct ProjectionOperator {
    geometry: TiltGeometry,
    height: usize,
    width: usize,
    views: Vec<View>,
}

impl ProjectionOperator {
    pub fn new(geometry: TiltGeometry, height: usize, width: usize) -> Result<Self> {
        geometry.validate()?;
        if height == 0 || width == 0 {
            return Err(Error::dim(format!("image shape {height}x{width} has a zero axis")));
        }
        let views = geometry
            .angles_deg()
            .into_iter()
            .map(|deg| {
                let rad = deg.to_radians();
                // snap the trig values of axis-aligned views so 0° is an exact column sum
                let (sin, cos) = if deg == 0.0 { (0.0, 1.0) } else { rad.sin_cos() };
                View { cos, sin }
            })
            .collect();
        Ok(ProjectionOperator { geometry, height, width, views })
    }

    /// Square image of side `size`, detector width equal to the image width.
    pub fn limited_angle(size: usize, num_angles: usize) -> Result<Self> {
        ProjectionOperator::new(TiltGeometry::limited_angle(num_angles, size), size, size)
    }

    pub fn geometry(&self) -> &TiltGeometry {
        &self.geometry
    }

    pub fn image_shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn sinogram_shape(&self) -> (usize, usize) {
        (self.geometry.num_angles, self.geometry.detector_bins)
    }

    /// Number of image unknowns (matrix columns).
    pub fn domain_len(&self) -> usize {
        self.height * self.width
    }

    /// Number of measurements (matrix rows).
    pub fn range_len(&self) -> usize {
        self.geometry.num_angles * self.geometry.detector_bins
    }

    /// Visits every `(pixel_index, weight)` sample of one ray.
    #[inline]
    fn walk_ray(&self, view: View, bin: usize, mut visit: impl FnMut(usize, f64)) {
        let (h, w) = (self.height, self.width);
        let t = bin as f64 - (self.geometry.detector_bins as f64 - 1.0) / 2.0;
        let cx = (w as f64 - 1.0) / 2.0;
        let cy = (h as f64 - 1.0) / 2.0;
        if view.cos.abs() >= view.sin.abs() {
            // one sample per image row: x = (t - y sin) / cos
            let step = 1.0 / view.cos.abs();
            for i in 0..h {
                let y = i as f64 - cy;
                let col = (t - y * view.sin) / view.cos + cx;
                interpolate(col, w, |j, frac| visit(i * w + j, frac * step));
            }
        } else {
            // one sample per image column: y = (t - x cos) / sin
            let step = 1.0 / view.sin.abs();
            for j in 0..w {
                let x = j as f64 - cx;
                let row = (t - x * view.cos) / view.sin + cy;
                interpolate(row, h, |i, frac| visit(i * w + j, frac * step));
            }
        }
    }

    /// `A x`: one row of the sinogram per tilt view.
    pub fn forward(&self, x: &Image) -> Result<Sinogram> {
        x.ensure_shape(self.height, self.width)?;
        let (angles, bins) = self.sinogram_shape();
        let pixels = x.as_slice();
        let mut out = vec![0.0; angles * bins];
        for (a, &view) in self.views.iter().enumerate() {
            for b in 0..bins {
                let mut acc = 0.0;
                self.walk_ray(view, b, |p, wgt| acc += wgt * pixels[p]);
                out[a * bins + b] = acc;
            }
        }
        Sinogram::from_vec(angles, bins, out)
    }

    /// `Aᵀ s`: backprojection along the same samples as [`forward`](Self::forward).
    pub fn adjoint(&self, s: &Sinogram) -> Result<Image> {
        let (angles, bins) = self.sinogram_shape();
        s.ensure_shape(angles, bins)?;
        let data = s.as_slice();
        let mut out = Image::zeros(self.height, self.width);
        let pixels = out.as_mut_slice();
        for (a, &view) in self.views.iter().enumerate() {
            for b in 0..bins {
                let v = data[a * bins + b];
                if v == 0.0 {
                    continue;
                }
                self.walk_ray(view, b, |p, wgt| pixels[p] += wgt * v);
            }
        }
        Ok(out)
    }

    /// Dense `A` with columns indexed by row-major pixel order and rows by
    /// `angle * bins + bin`. Column `j` is the projection of the `j`-th basis image.
    pub fn build_matrix(&self, budget: MatrixBudget) -> Result<DMatrix<f64>> {
        let (rows, cols) = (self.range_len(), self.domain_len());
        let entries = rows.saturating_mul(cols);
        if entries > budget.max_entries {
            return Err(Error::Capacity(format!(
                "dense projection matrix needs {rows}x{cols} = {entries} entries, budget is {}",
                budget.max_entries
            )));
        }
        let mut matrix = DMatrix::zeros(rows, cols);
        let bins = self.geometry.detector_bins;
        // Filling by ray gives the same entries as projecting each basis image,
        // since a ray's samples are exactly the nonzeros of its matrix row.
        for (a, &view) in self.views.iter().enumerate() {
            for b in 0..bins {
                let r = a * bins + b;
                self.walk_ray(view, b, |p, wgt| matrix[(r, p)] += wgt);
            }
        }
        Ok(matrix)
    }
}

impl LinearOperator for ProjectionOperator {
    fn image_shape(&self) -> (usize, usize) {
        ProjectionOperator::image_shape(self)
    }

    fn sinogram_shape(&self) -> (usize, usize) {
        ProjectionOperator::sinogram_shape(self)
    }

    fn forward(&self, x: &Image) -> Result<Sinogram> {
        ProjectionOperator::forward(self, x)
    }

    fn adjoint(&self, s: &Sinogram) -> Result<Image> {
        ProjectionOperator::adjoint(self, s)
    }
}

/// Linear interpolation weights at fractional index `pos` on `0..n`,
/// treating samples outside the grid as zero.
#[inline]
fn interpolate(pos: f64, n: usize, mut visit: impl FnMut(usize, f64)) {
    let base = pos.floor();
    if base < -1.0 || base > n as f64 - 1.0 {
        return;
    }
    let frac = pos - base;
    let k = base as isize;
    if k >= 0 && frac < 1.0 {
        visit(k as usize, 1.0 - frac);
    }
    if frac > 0.0 && k + 1 < n as isize {
        visit((k + 1) as usize, frac);
    }
}
