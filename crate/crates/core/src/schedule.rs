//! Noise-level sequences for the diffusion loops.
//!
//! Two families are supported, both precomputed so a run can be logged and
//! replayed verbatim:
//!
//! - geometric: `σ_n = σ_1 (σ_N / σ_1)^((n-1)/(N-1))`, used by the
//!   reconstruction loop;
//! - the sampler schedule `σ_n = σ_1 ((1-α)² + αβ)^((n-1)/2)` whose decay is
//!   tied to the step size `α` and noise fraction `β` of the sampler update.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    Geometric { sigma_first: f64, sigma_last: f64, steps: usize },
    Sampler { sigma_first: f64, alpha: f64, beta: f64, steps: usize },
}

/// Serialized as its [`ScheduleKind`]; the levels are recomputed on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleKind", into = "ScheduleKind")]
pub struct NoiseSchedule {
    kind: ScheduleKind,
    sigmas: Vec<f64>,
}

impl NoiseSchedule {
    /// Exponentially decaying levels from `sigma_first` to `sigma_last`, endpoints exact.
    pub fn geometric(sigma_first: f64, sigma_last: f64, steps: usize) -> Result<Self> {
        if !(sigma_last > 0.0 && sigma_first > sigma_last && sigma_first.is_finite()) {
            return Err(Error::param(format!(
                "geometric schedule needs sigma_first > sigma_last > 0, got {sigma_first} and {sigma_last}"
            )));
        }
        if steps < 2 {
            return Err(Error::param(format!("geometric schedule needs at least 2 steps, got {steps}")));
        }
        let ratio = sigma_last / sigma_first;
        let last = (steps - 1) as f64;
        let sigmas = (0..steps)
            .map(|k| match k {
                0 => sigma_first,
                k if k + 1 == steps => sigma_last,
                k => sigma_first * ratio.powf(k as f64 / last),
            })
            .collect();
        Ok(NoiseSchedule { kind: ScheduleKind::Geometric { sigma_first, sigma_last, steps }, sigmas })
    }

    /// Sampler schedule; requires `(1-α)² + αβ < 1` so the levels decay.
    pub fn sampler(sigma_first: f64, alpha: f64, beta: f64, steps: usize) -> Result<Self> {
        if !(sigma_first > 0.0 && sigma_first.is_finite()) {
            return Err(Error::param(format!("sigma_first must be positive, got {sigma_first}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(beta > 0.0) {
            return Err(Error::param(format!("beta must be positive, got {beta}")));
        }
        let decay = sampler_decay(alpha, beta);
        if decay >= 1.0 {
            return Err(Error::param(format!(
                "(1-alpha)^2 + alpha*beta = {decay} does not decay (alpha {alpha}, beta {beta})"
            )));
        }
        if steps < 1 {
            return Err(Error::param("sampler schedule needs at least 1 step"));
        }
        let sigmas = (0..steps).map(|k| sigma_first * decay.powf(k as f64 / 2.0)).collect();
        Ok(NoiseSchedule { kind: ScheduleKind::Sampler { sigma_first, alpha, beta, steps }, sigmas })
    }

    pub fn from_kind(kind: ScheduleKind) -> Result<Self> {
        match kind {
            ScheduleKind::Geometric { sigma_first, sigma_last, steps } => {
                NoiseSchedule::geometric(sigma_first, sigma_last, steps)
            }
            ScheduleKind::Sampler { sigma_first, alpha, beta, steps } => {
                NoiseSchedule::sampler(sigma_first, alpha, beta, steps)
            }
        }
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.sigmas[0]
    }

    pub fn last(&self) -> f64 {
        self.sigmas[self.sigmas.len() - 1]
    }

    pub fn is_geometric(&self) -> bool {
        matches!(self.kind, ScheduleKind::Geometric { .. })
    }

    /// Constant ratio `σ_{n+1} / σ_n` (1 for a single-level schedule).
    pub fn decay_ratio(&self) -> f64 {
        match self.kind {
            ScheduleKind::Geometric { sigma_first, sigma_last, steps } => {
                (sigma_last / sigma_first).powf(1.0 / (steps - 1) as f64)
            }
            ScheduleKind::Sampler { alpha, beta, .. } => sampler_decay(alpha, beta).sqrt(),
        }
    }
}

impl TryFrom<ScheduleKind> for NoiseSchedule {
    type Error = Error;

    fn try_from(kind: ScheduleKind) -> Result<Self> {
        NoiseSchedule::from_kind(kind)
    }
}

impl From<NoiseSchedule> for ScheduleKind {
    fn from(schedule: NoiseSchedule) -> Self {
        schedule.kind
    }
}

/// `(1-α)² + αβ`, the per-step variance decay of the sampler schedule.
pub fn sampler_decay(alpha: f64, beta: f64) -> f64 {
    (1.0 - alpha).powi(2) + alpha * beta
}

/// The sampler step size `α` whose schedule decays by `ratio` per step for a given `β`:
/// the smaller root of `(1-α)² + αβ = ratio²`.
pub fn alpha_for_ratio(ratio: f64, beta: f64) -> Result<f64> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::param(format!("decay ratio must lie in (0, 1), got {ratio}")));
    }
    let b = 2.0 - beta;
    let disc = b * b - 4.0 * (1.0 - ratio * ratio);
    if disc < 0.0 {
        return Err(Error::param(format!("no sampler step size reaches ratio {ratio} with beta {beta}")));
    }
    let alpha = (b - disc.sqrt()) / 2.0;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param(format!("derived alpha {alpha} is outside (0, 1)")));
    }
    Ok(alpha)
}
