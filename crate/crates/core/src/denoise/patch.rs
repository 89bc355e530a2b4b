//! Running a patch-sized denoiser over an arbitrarily large image.
//!
//! The image is tiled by `p × p` patches at stride `s`; each patch is denoised
//! independently and the predictions are averaged with the separable weight
//! `B[x, y] = b(2x/p - 1) b(2y/p - 1)`, normalized by the total weight that
//! reaches each pixel.

use serde::{Deserialize, Serialize};

use crate::denoise::Denoiser;
use crate::error::{Error, Result};
use crate::image::Image;

/// 1D blending profile `b(u)` on `|u| < 1` (zero elsewhere).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BumpProfile {
    /// `1 - exp(-1 / max(1 - u², 0.2))`: rises from ≈0.632 at the center to ≈0.993 near the edge.
    #[default]
    Printed,
    /// `exp(-1 / max(1 - u², 0.2))`: ≈0.368 at the center, falling to ≈0.0067 near the edge.
    Decaying,
}

pub fn bump_1d(u: f64, profile: BumpProfile) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let e = (-1.0 / (1.0 - u * u).max(0.2)).exp();
    match profile {
        BumpProfile::Printed => 1.0 - e,
        BumpProfile::Decaying => e,
    }
}

/// `B[i, j]` for pixel offsets `(i, j)` inside a patch of side `patch`.
pub fn bump_weight(i: isize, j: isize, patch: usize, profile: BumpProfile) -> f64 {
    let p = patch as f64;
    if i < 0 || j < 0 || i as usize >= patch || j as usize >= patch {
        return 0.0;
    }
    bump_1d(2.0 * i as f64 / p - 1.0, profile) * bump_1d(2.0 * j as f64 / p - 1.0, profile)
}

/// Patch origins along an axis of length `len`: `0, s, 2s, …` with the last
/// patch pulled flush against the far border.
fn patch_starts(len: usize, patch: usize, stride: usize) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut s = 0;
    while s + patch < len {
        starts.push(s);
        s += stride;
    }
    starts.push(len - patch);
    starts.dedup();
    starts
}

pub struct PatchifiedDenoiser<D> {
    inner: D,
    patch: usize,
    stride: usize,
    profile: BumpProfile,
}

impl<D: Denoiser> PatchifiedDenoiser<D> {
    pub const DEFAULT_PATCH: usize = 128;
    pub const DEFAULT_STRIDE: usize = 96;

    pub fn new(inner: D, patch: usize, stride: usize, profile: BumpProfile) -> Result<Self> {
        if patch == 0 || stride == 0 || stride > patch {
            return Err(Error::param(format!(
                "patch blending needs 0 < stride <= patch, got stride {stride}, patch {patch}"
            )));
        }
        Ok(PatchifiedDenoiser { inner, patch, stride, profile })
    }

    pub fn with_defaults(inner: D) -> Self {
        PatchifiedDenoiser {
            inner,
            patch: Self::DEFAULT_PATCH,
            stride: Self::DEFAULT_STRIDE,
            profile: BumpProfile::Printed,
        }
    }

    pub fn inner(&self) -> &D {
        &self.inner
    }

    pub fn patch(&self) -> usize {
        self.patch
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Patch origins `(rows, cols)` covering an image of the given shape.
    pub fn grid(&self, height: usize, width: usize) -> (Vec<usize>, Vec<usize>) {
        (patch_starts(height, self.patch, self.stride), patch_starts(width, self.patch, self.stride))
    }
}

/// Per-pixel running blend. Values are accumulated relative to the first
/// contribution (the anchor) so that a single contributor, or contributors
/// that all agree, reproduce the value bit-for-bit.
struct Blend {
    anchor: Vec<f64>,
    seen: Vec<u32>,
    weight: Vec<f64>,
    weighted_diff: Vec<f64>,
    plain_diff: Vec<f64>,
}

impl Blend {
    fn new(n: usize) -> Self {
        Blend {
            anchor: vec![0.0; n],
            seen: vec![0; n],
            weight: vec![0.0; n],
            weighted_diff: vec![0.0; n],
            plain_diff: vec![0.0; n],
        }
    }

    #[inline]
    fn add(&mut self, p: usize, w: f64, value: f64) {
        if self.seen[p] == 0 {
            self.anchor[p] = value;
        } else {
            let d = value - self.anchor[p];
            self.weighted_diff[p] += w * d;
            self.plain_diff[p] += d;
        }
        self.seen[p] += 1;
        self.weight[p] += w;
    }

    fn finish(self, height: usize, width: usize) -> Result<Image> {
        let values = (0..self.anchor.len())
            .map(|p| {
                if self.seen[p] <= 1 {
                    self.anchor[p]
                } else if self.weight[p] > 0.0 {
                    self.anchor[p] + self.weighted_diff[p] / self.weight[p]
                } else {
                    // every covering patch puts this pixel on its zero-weight rim
                    self.anchor[p] + self.plain_diff[p] / self.seen[p] as f64
                }
            })
            .collect();
        Image::from_vec(height, width, values)
    }
}

impl<D: Denoiser> Denoiser for PatchifiedDenoiser<D> {
    fn predict_noise(&mut self, x: &Image, sigma: f64) -> Result<Image> {
        let (h, w) = x.shape();
        if h < self.patch || w < self.patch {
            return Err(Error::dim(format!(
                "image {h}x{w} is smaller than the {p}x{p} patch",
                p = self.patch
            )));
        }
        let (rows, cols) = self.grid(h, w);
        if rows.len() == 1 && cols.len() == 1 {
            return self.inner.predict_noise(x, sigma);
        }
        let p = self.patch;
        let profile_1d: Vec<f64> =
            (0..p).map(|k| bump_1d(2.0 * k as f64 / p as f64 - 1.0, self.profile)).collect();
        let mut blend = Blend::new(h * w);
        for &top in &rows {
            for &left in &cols {
                let patch = x.crop(top, left, p, p);
                let eps = self.inner.predict_noise(&patch, sigma)?;
                eps.ensure_shape(p, p)?;
                for di in 0..p {
                    for dj in 0..p {
                        let wgt = profile_1d[di] * profile_1d[dj];
                        blend.add((top + di) * w + left + dj, wgt, eps.get(di, dj));
                    }
                }
            }
        }
        blend.finish(h, w)
    }

    fn valid_range(&self) -> (f64, f64) {
        self.inner.valid_range()
    }

    fn name(&self) -> &'static str {
        "patchified"
    }
}
