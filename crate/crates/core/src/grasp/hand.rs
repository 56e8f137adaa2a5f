use nalgebra::{Isometry3, Translation3};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{yaw_rotation, Vec3};
use crate::tactile::FINGERS;

/// Three-finger hand seen from above. Fingers 1 and 2 sit on the +x side of
/// the palm, `spread` apart along y; finger 3 faces them from −x. Each
/// finger's aperture is its distance from the palm center along x.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandGeometry {
    /// Fingertip sphere radius.
    pub finger_radius: f64,
    /// Separation of fingers 1 and 2 along hand y.
    pub finger_spread: f64,
    pub min_aperture: f64,
    pub max_aperture: f64,
}

impl Default for HandGeometry {
    fn default() -> Self {
        Self {
            finger_radius: 0.004,
            finger_spread: 0.03,
            min_aperture: 0.005,
            max_aperture: 0.06,
        }
    }
}

impl HandGeometry {
    pub fn validate(&self) -> Result<()> {
        let ok = self.finger_radius > 0.0
            && self.finger_spread >= 0.0
            && self.min_aperture >= 0.0
            && self.max_aperture > self.min_aperture
            && [self.finger_radius, self.finger_spread, self.max_aperture]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Config("rig.hand: inconsistent finger geometry".into()))
        }
    }
}

/// Kinematic hand state: palm position (fingertip centers share its
/// height), heading and per-finger aperture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hand {
    pub position: Vec3,
    pub yaw: f64,
    pub aperture: [f64; FINGERS],
}

impl Hand {
    pub fn new(position: Vec3, yaw: f64, aperture: f64) -> Self {
        Self {
            position,
            yaw,
            aperture: [aperture; FINGERS],
        }
    }

    /// Hand frame → base frame.
    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), yaw_rotation(self.yaw))
    }

    /// Unit x and y axes of the hand in the base frame.
    pub fn axes(&self) -> (Vec3, Vec3) {
        let (s, c) = self.yaw.sin_cos();
        (Vec3::new(c, s, 0.0), Vec3::new(-s, c, 0.0))
    }

    pub fn fingertip_offsets(&self, g: &HandGeometry) -> [Vec3; FINGERS] {
        let half = g.finger_spread / 2.0;
        [
            Vec3::new(self.aperture[0], half, 0.0),
            Vec3::new(self.aperture[1], -half, 0.0),
            Vec3::new(-self.aperture[2], 0.0, 0.0),
        ]
    }

    /// Fingertip sphere centers in the base frame.
    pub fn fingertips(&self, g: &HandGeometry) -> [Vec3; FINGERS] {
        let iso = self.isometry();
        self.fingertip_offsets(g).map(|o| iso.transform_point(&o.into()).coords)
    }

    /// Height of the lowest fingertip point.
    pub fn tip_bottom(&self, g: &HandGeometry) -> f64 {
        self.position.z - g.finger_radius
    }
}

/// Smallest signed angle taking `from` to `to`.
pub fn angle_diff(to: f64, from: f64) -> f64 {
    let d = (to - from).rem_euclid(std::f64::consts::TAU);
    if d > std::f64::consts::PI {
        d - std::f64::consts::TAU
    } else {
        d
    }
}
