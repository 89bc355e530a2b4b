use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tilt series layout: `num_angles` views uniformly spaced over
/// `[angle_min, angle_max]` degrees, both endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltGeometry {
    pub num_angles: usize,
    pub angle_min: f64,
    pub angle_max: f64,
    pub detector_bins: usize,
}

impl TiltGeometry {
    pub fn new(num_angles: usize, angle_min: f64, angle_max: f64, detector_bins: usize) -> Result<Self> {
        let geometry = TiltGeometry { num_angles, angle_min, angle_max, detector_bins };
        geometry.validate()?;
        Ok(geometry)
    }

    /// The acquisition used throughout: `num_angles` views over ±60°.
    pub fn limited_angle(num_angles: usize, detector_bins: usize) -> Self {
        TiltGeometry { num_angles, angle_min: -60.0, angle_max: 60.0, detector_bins }
    }

    /// Single view at `angle` degrees.
    pub fn single(angle: f64, detector_bins: usize) -> Self {
        TiltGeometry { num_angles: 1, angle_min: angle, angle_max: angle, detector_bins }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_angles == 0 {
            return Err(Error::param("tilt geometry needs at least one angle"));
        }
        if self.detector_bins == 0 {
            return Err(Error::param("tilt geometry needs at least one detector bin"));
        }
        if !self.angle_min.is_finite() || !self.angle_max.is_finite() {
            return Err(Error::param("tilt angles must be finite"));
        }
        // A single view is described by one angle; ranges need min < max.
        if self.num_angles > 1 && self.angle_min >= self.angle_max {
            return Err(Error::param(format!(
                "angle_min ({}) must be below angle_max ({})",
                self.angle_min, self.angle_max
            )));
        }
        if self.num_angles == 1 && self.angle_min > self.angle_max {
            return Err(Error::param("angle_min exceeds angle_max"));
        }
        Ok(())
    }

    /// Inclusive linspace of view angles in degrees.
    pub fn angles_deg(&self) -> Vec<f64> {
        if self.num_angles == 1 {
            return vec![self.angle_min];
        }
        let span = self.angle_max - self.angle_min;
        let last = (self.num_angles - 1) as f64;
        (0..self.num_angles)
            .map(|k| {
                if k + 1 == self.num_angles {
                    self.angle_max
                } else {
                    self.angle_min + span * k as f64 / last
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclusive_linspace() {
        let g = TiltGeometry::new(5, -60.0, 60.0, 8).unwrap();
        assert_eq!(g.angles_deg(), vec![-60.0, -30.0, 0.0, 30.0, 60.0]);
    }

    #[test]
    fn rejects_inverted_range() {
        assert!(TiltGeometry::new(3, 10.0, -10.0, 4).is_err());
        assert!(TiltGeometry::new(3, 10.0, 10.0, 4).is_err());
        assert!(TiltGeometry::new(0, -1.0, 1.0, 4).is_err());
    }

    #[test]
    fn angles_strictly_increase() {
        let g = TiltGeometry::limited_angle(128, 128);
        let a = g.angles_deg();
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a[0], -60.0);
        assert_eq!(a[127], 60.0);
    }
}
