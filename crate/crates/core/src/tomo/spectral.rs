use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::rng::{seeded, standard_normal_image};
use crate::tomo::LinearOperator;

/// `A = U Σ Vᵀ` with singular values in descending order.
///
/// For an `m × n` matrix, `u` is `m × k` and `singular_values` has `k = min(m, n)`
/// entries. `v` is always the full `n × n` basis; its columns past `k` span the
/// null space of `A`, which spectral solvers need to treat unmeasured components.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl SpectralDecomposition {
    pub fn rank_cutoff(&self) -> usize {
        self.singular_values.len()
    }

    /// `U Σ V_kᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let k = self.singular_values.len();
        let mut us = self.u.clone();
        for (c, s) in self.singular_values.iter().enumerate() {
            us.column_mut(c).scale_mut(*s);
        }
        us * self.v.columns(0, k).transpose()
    }

    /// Fraction of singular values strictly below `fraction * σ_max`.
    pub fn fraction_below(&self, fraction: f64) -> f64 {
        let Some(&top) = self.singular_values.first() else {
            return 0.0;
        };
        let below = self.singular_values.iter().filter(|&&s| s < fraction * top).count();
        below as f64 / self.singular_values.len() as f64
    }
}

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITER: usize = 1_000_000;

/// Full SVD of a dense matrix.
pub fn svd(matrix: &DMatrix<f64>) -> Result<SpectralDecomposition> {
    let (m, n) = matrix.shape();
    if m == 0 || n == 0 {
        return Err(Error::dim("cannot decompose an empty matrix"));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    // nalgebra's thin SVD only yields a full V when m >= n; pad with zero
    // rows otherwise.
    let padded;
    let work = if m < n {
        padded = matrix.clone().resize_vertically(n, 0.0);
        &padded
    } else {
        matrix
    };
    let dec = work.clone().try_svd(true, true, SVD_EPS, SVD_MAX_ITER).ok_or_else(|| {
        Error::Numerical(format!(
            "SVD of {m}x{n} matrix did not converge within {SVD_MAX_ITER} iterations (eps {SVD_EPS:e})"
        ))
    })?;
    let (Some(u), Some(v_t)) = (dec.u, dec.v_t) else {
        return Err(Error::Numerical("SVD returned no singular vectors".into()));
    };
    let k = m.min(n);
    let singular_values: Vec<f64> = dec.singular_values.iter().take(k).copied().collect();
    let u = u.view((0, 0), (m, k)).into_owned();
    Ok(SpectralDecomposition { u, singular_values, v: v_t.transpose() })
}

/// Largest eigenvalue of `AᵀA` (i.e. `σ_max²`) by power iteration from a fixed start.
pub fn power_iteration_sigma_max_sq(op: &dyn LinearOperator, iterations: usize) -> Result<f64> {
    let (h, w) = op.image_shape();
    let mut x = standard_normal_image(&mut seeded(0x5eed), h, w);
    let norm = x.norm_sq().sqrt();
    x.scale(1.0 / norm);
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let y = op.adjoint(&op.forward(&x)?)?;
        let ny = y.norm_sq().sqrt();
        if ny == 0.0 {
            return Ok(0.0);
        }
        estimate = x.dot(&y);
        x = y;
        x.scale(1.0 / ny);
    }
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomo::ProjectionOperator;

    fn orthonormality_error(m: &DMatrix<f64>) -> f64 {
        let g = m.transpose() * m;
        (g - DMatrix::identity(m.ncols(), m.ncols())).abs().max()
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let d = svd(&DMatrix::identity(5, 5)).unwrap();
        assert!(d.singular_values.iter().all(|&s| (s - 1.0).abs() < 1e-14));
    }

    #[test]
    fn diagonal_values_sorted() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 3.0, 2.0]));
        let d = svd(&m).unwrap();
        for (s, want) in d.singular_values.iter().zip([3.0, 2.0, 1.0]) {
            assert!((s - want).abs() < 1e-14);
        }
    }

    #[test]
    fn wide_matrix_gets_full_right_basis() {
        let m = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, -1.0, 0.5, 0.0, 3.0, 1.0]);
        let d = svd(&m).unwrap();
        assert_eq!(d.u.shape(), (2, 2));
        assert_eq!(d.v.shape(), (4, 4));
        assert!(orthonormality_error(&d.u) < 1e-12);
        assert!(orthonormality_error(&d.v) < 1e-12);
        assert!((d.reconstruct() - &m).norm() / m.norm() < 1e-12);
    }

    #[test]
    fn tall_matrix_round_trips() {
        let m = DMatrix::from_fn(6, 3, |i, j| ((i * 3 + j) as f64).cos());
        let d = svd(&m).unwrap();
        assert_eq!(d.u.shape(), (6, 3));
        assert!(d.singular_values.windows(2).all(|w| w[0] >= w[1]));
        assert!((d.reconstruct() - &m).norm() / m.norm() < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(svd(&m), Err(Error::Numerical(_))));
    }

    #[test]
    fn power_iteration_matches_svd() {
        let op = ProjectionOperator::limited_angle(8, 6).unwrap();
        let a = op.build_matrix(Default::default()).unwrap();
        let d = svd(&a).unwrap();
        let l = power_iteration_sigma_max_sq(&op, 300).unwrap();
        let want = d.singular_values[0].powi(2);
        assert!((l - want).abs() / want < 1e-8, "{l} vs {want}");
    }
}
