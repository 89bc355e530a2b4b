//! Parallel-beam limited-angle tomography: geometry, projector, dense/SVD views,
//! and noisy sinogram simulation.

mod geometry;
mod operator;
mod projector;
mod simulate;
mod spectral;

pub use geometry::TiltGeometry;
pub use operator::{DenseOperator, LinearOperator};
pub use projector::{MatrixBudget, ProjectionOperator};
pub use simulate::{simulate_sinogram, NoiseLevel, SimulatedSinogram};
pub use spectral::{power_iteration_sigma_max_sq, svd, SpectralDecomposition};
