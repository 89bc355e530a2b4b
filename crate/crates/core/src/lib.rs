//! Limited-angle tomographic reconstruction with diffusion denoising priors.
//!
//! The crate is organized around the measurement model `y = A x + σ_y ε`:
//!
//! - [`tomo`]: the parallel-beam projection operator, its adjoint, the dense
//!   matrix and SVD views, and noisy sinogram simulation.
//! - [`denoise`]: the noise-prediction interface with an exact Gaussian MMSE
//!   instance, a pass-through instance, a remote instance speaking a framed
//!   binary protocol, and a patch-blending wrapper for large images.
//! - [`schedule`]: precomputed noise-level sequences.
//! - [`solvers`]: algebraic reconstruction, diffusive denoising of gradient
//!   minimization, the unconditional sampler, DPS* and a DDRM-style baseline.
//! - [`metrics`]: MSE, SSIM, standard errors and a high-frequency energy proxy.
//! - [`io`]: the raw float container with its JSON sidecar and PNG export.

// `!(x > 0.0)` is used deliberately so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod denoise;
pub mod error;
pub mod fourier;
pub mod image;
pub mod io;
pub mod metrics;
pub mod phantom;
pub mod rng;
pub mod schedule;
pub mod solvers;
pub mod tomo;

pub use crate::error::{Error, Result};
pub use crate::image::{Image, Sinogram};
