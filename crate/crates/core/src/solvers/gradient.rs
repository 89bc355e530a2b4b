//! Plain gradient descent on `‖Ax - y‖²` and the step-size search.

use crate::error::{Error, Result};
use crate::image::{Image, Sinogram};
use crate::solvers::{Problem, RunTrace};
use crate::tomo::{power_iteration_sigma_max_sq, LinearOperator};

/// A residual more than this many times its starting value aborts the descent.
const DIVERGENCE_FACTOR: f64 = 10.0;

pub fn data_residual(op: &dyn LinearOperator, x: &Image, y: &Sinogram) -> Result<f64> {
    let mut r = op.forward(x)?;
    r.axpy(-1.0, y);
    Ok(r.norm_sq())
}

#[derive(Debug, Clone)]
pub struct GradientOutcome {
    pub x: Image,
    /// `‖Ax - y‖²` before each update (length `K`).
    pub residuals: Vec<f64>,
}

/// `K` updates `x ← x - λ · 2Aᵀ(Ax - y)`.
pub fn gradient_descent_data(
    x: Image,
    y: &Sinogram,
    op: &dyn LinearOperator,
    step_size: f64,
    steps: usize,
) -> Result<GradientOutcome> {
    if !(step_size > 0.0 && step_size.is_finite()) {
        return Err(Error::param(format!("step size must be positive, got {step_size}")));
    }
    let mut x = x;
    let mut residuals = Vec::with_capacity(steps);
    for k in 0..steps {
        let mut r = op.forward(&x)?;
        r.axpy(-1.0, y);
        let res = r.norm_sq();
        if !res.is_finite() || (k > 0 && res > DIVERGENCE_FACTOR * residuals[0]) {
            return Err(Error::StepSize { initial: residuals[0], current: res, step: k });
        }
        residuals.push(res);
        let grad = op.adjoint(&r)?;
        x.axpy(-2.0 * step_size, &grad);
    }
    Ok(GradientOutcome { x, residuals })
}

/// Early-stopped gradient descent from `x = 0`.
pub fn algebraic_reconstruct(problem: &Problem<'_>, step_size: f64, steps: usize) -> Result<(Image, RunTrace)> {
    problem.validate()?;
    let (h, w) = problem.op.image_shape();
    let out = gradient_descent_data(Image::zeros(h, w), problem.y, problem.op, step_size, steps)?;
    let trace = RunTrace { records: vec![problem.record(1, 0.0, &out.x)?], grad_evals: steps, net_evals: 0 };
    Ok((out.x, trace))
}

const PROBE_STEPS: usize = 20;
const BISECTION_ROUNDS: usize = 40;
const POWER_ITERATIONS: usize = 300;
/// Returned step sizes never exceed this fraction of `1/σ_max²`, past which
/// the top singular component stops contracting.
const STABILITY_MARGIN: f64 = 0.95;

/// True when `PROBE_STEPS` updates from zero never increase the residual and
/// end strictly below where they started.
fn probe_decreases(op: &dyn LinearOperator, y: &Sinogram, step_size: f64) -> Result<bool> {
    let (h, w) = op.image_shape();
    let mut x = Image::zeros(h, w);
    let mut prev = f64::INFINITY;
    let mut first = None;
    for _ in 0..=PROBE_STEPS {
        let mut r = op.forward(&x)?;
        r.axpy(-1.0, y);
        let res = r.norm_sq();
        if !res.is_finite() || res > prev {
            return Ok(false);
        }
        first.get_or_insert(res);
        prev = res;
        x.axpy(-2.0 * step_size, &op.adjoint(&r)?);
    }
    Ok(prev < first.unwrap_or(0.0))
}

/// Largest step size for which gradient descent on `‖Ax - y‖²` from zero
/// decreases the residual monotonically, found by bisection between a
/// converging and a diverging bracket built around `1/(2σ_max²)`.
///
/// Falls back to `1/(2σ_max²)` when the bracket cannot be established (e.g.
/// `y = 0`), and to 1.0 when `A = 0`, where every step size is harmless.
pub fn auto_tune_lambda(op: &dyn LinearOperator, y: &Sinogram) -> Result<f64> {
    let lipschitz = power_iteration_sigma_max_sq(op, POWER_ITERATIONS)?;
    if lipschitz <= 0.0 {
        return Ok(1.0);
    }
    let fallback = 0.5 / lipschitz;
    let cap = STABILITY_MARGIN / lipschitz;
    if y.norm_sq() == 0.0 {
        return Ok(fallback);
    }

    let mut lo = fallback;
    let mut found_lo = false;
    for _ in 0..60 {
        if probe_decreases(op, y, lo)? {
            found_lo = true;
            break;
        }
        lo *= 0.5;
    }
    let mut hi = 4.0 / lipschitz;
    let mut found_hi = false;
    for _ in 0..60 {
        if !probe_decreases(op, y, hi)? {
            found_hi = true;
            break;
        }
        hi *= 2.0;
    }
    if !found_lo || !found_hi {
        return Ok(fallback);
    }
    for _ in 0..BISECTION_ROUNDS {
        let mid = 0.5 * (lo + hi);
        if probe_decreases(op, y, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo.min(cap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, standard_normal_image};
    use crate::tomo::{svd, DenseOperator, ProjectionOperator, TiltGeometry};

    #[test]
    fn zero_steps_is_identity() {
        let op = ProjectionOperator::limited_angle(8, 4).unwrap();
        let x = standard_normal_image(&mut seeded(1), 8, 8);
        let y = op.forward(&standard_normal_image(&mut seeded(2), 8, 8)).unwrap();
        let out = gradient_descent_data(x.clone(), &y, &op, 0.01, 0).unwrap();
        assert_eq!(out.x, x);
    }

    #[test]
    fn step_above_stability_bound_diverges() {
        let op = ProjectionOperator::limited_angle(8, 6).unwrap();
        let d = svd(&op.build_matrix(Default::default()).unwrap()).unwrap();
        let bound = 1.0 / d.singular_values[0].powi(2);
        let mut rng = seeded(3);
        for _ in 0..5 {
            let y = op.forward(&standard_normal_image(&mut rng, 8, 8)).unwrap();
            let err = gradient_descent_data(Image::zeros(8, 8), &y, &op, 1.2 * bound, 500).unwrap_err();
            assert!(matches!(err, Error::StepSize { .. }));
            // and just below the bound it converges monotonically
            let ok = gradient_descent_data(Image::zeros(8, 8), &y, &op, 0.9 * bound, 500).unwrap();
            assert!(ok.residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        }
    }

    fn scalar_identity() -> ProjectionOperator {
        ProjectionOperator::new(TiltGeometry::single(0.0, 1), 1, 1).unwrap()
    }

    #[test]
    fn identity_operator_lambda_range() {
        let op = scalar_identity();
        let y = Sinogram::from_vec(1, 1, vec![2.0]).unwrap();
        let lambda = auto_tune_lambda(&op, &y).unwrap();
        assert!((0.5..1.0).contains(&lambda), "lambda {lambda}");
    }

    #[test]
    fn lambda_within_factor_of_power_estimate() {
        let op = ProjectionOperator::limited_angle(16, 16).unwrap();
        let y = op.forward(&standard_normal_image(&mut seeded(9), 16, 16)).unwrap();
        let lambda = auto_tune_lambda(&op, &y).unwrap();
        let reference = 0.5 / power_iteration_sigma_max_sq(&op, 500).unwrap();
        assert!(lambda >= reference / 4.0 && lambda <= reference * 4.0, "{lambda} vs {reference}");
        // deterministic
        assert_eq!(lambda, auto_tune_lambda(&op, &y).unwrap());
    }

    #[test]
    fn zero_operator_accepts_anything() {
        let op = DenseOperator::new(nalgebra::DMatrix::zeros(4, 4), (2, 2), (2, 2)).unwrap();
        let y = Sinogram::from_vec(2, 2, vec![1.0, -1.0, 0.5, 2.0]).unwrap();
        assert_eq!(auto_tune_lambda(&op, &y).unwrap(), 1.0);
        let x = standard_normal_image(&mut seeded(5), 2, 2);
        let out = gradient_descent_data(x.clone(), &y, &op, 1.0, 10).unwrap();
        assert_eq!(out.x, x);
    }

    #[test]
    fn zero_data_falls_back() {
        let op = ProjectionOperator::limited_angle(8, 4).unwrap();
        let lambda = auto_tune_lambda(&op, &Sinogram::zeros(4, 8)).unwrap();
        let l = power_iteration_sigma_max_sq(&op, POWER_ITERATIONS).unwrap();
        assert_eq!(lambda, 0.5 / l);
    }
}
