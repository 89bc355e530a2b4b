use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::image::{Image, Sinogram};

/// A linear measurement map from images to sinogram-shaped data.
///
/// Solvers only need `A` and `Aᵀ`, so they accept any implementation; the
/// tomographic [`ProjectionOperator`](crate::tomo::ProjectionOperator) is the
/// main one and [`DenseOperator`] covers small explicit matrices.
pub trait LinearOperator: Sync {
    fn image_shape(&self) -> (usize, usize);
    fn sinogram_shape(&self) -> (usize, usize);
    fn forward(&self, x: &Image) -> Result<Sinogram>;
    fn adjoint(&self, s: &Sinogram) -> Result<Image>;
}

/// Explicit matrix acting on row-major flattened images.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
    image_shape: (usize, usize),
    sinogram_shape: (usize, usize),
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>, image_shape: (usize, usize), sinogram_shape: (usize, usize)) -> Result<Self> {
        if matrix.shape() != (sinogram_shape.0 * sinogram_shape.1, image_shape.0 * image_shape.1) {
            return Err(Error::dim(format!(
                "matrix {:?} does not map {image_shape:?} images to {sinogram_shape:?} data",
                matrix.shape()
            )));
        }
        Ok(DenseOperator { matrix, image_shape, sinogram_shape })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn image_shape(&self) -> (usize, usize) {
        self.image_shape
    }

    fn sinogram_shape(&self) -> (usize, usize) {
        self.sinogram_shape
    }

    fn forward(&self, x: &Image) -> Result<Sinogram> {
        x.ensure_shape(self.image_shape.0, self.image_shape.1)?;
        let out = &self.matrix * DVector::from_column_slice(x.as_slice());
        Sinogram::from_vec(self.sinogram_shape.0, self.sinogram_shape.1, out.as_slice().to_vec())
    }

    fn adjoint(&self, s: &Sinogram) -> Result<Image> {
        s.ensure_shape(self.sinogram_shape.0, self.sinogram_shape.1)?;
        let out = self.matrix.tr_mul(&DVector::from_column_slice(s.as_slice()));
        Image::from_vec(self.image_shape.0, self.image_shape.1, out.as_slice().to_vec())
    }
}
