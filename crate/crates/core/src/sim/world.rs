use nalgebra::{Isometry3, Translation3, UnitQuaternion};
use serde::Deserialize;

use super::shape::Primitive;
use crate::error::{Error, Result};
use crate::geometry::{yaw_rotation, Rgb, Vec3};

/// Object geometry as named in scenario files. Object frames have z up with
/// the origin on the table surface under the object.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum ShapeSpec {
    Box { size: [f64; 3] },
    Cylinder { radius: f64, height: f64 },
    Ball { radius: f64 },
    /// A bar lying along object x.
    Capsule { radius: f64, length: f64 },
    /// Capsule handle with a shallow ellipsoidal bowl at its +x end.
    Spoon,
    /// Low folded cloth, as a box.
    Towel,
}

/// One primitive placed in its object's frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Part {
    pub primitive: Primitive,
    pub placement: Isometry3<f64>,
}

fn part(primitive: Primitive, center: Vec3) -> Part {
    Part {
        primitive,
        placement: Isometry3::from_parts(Translation3::from(center), UnitQuaternion::identity()),
    }
}

pub const SPOON_HANDLE_RADIUS: f64 = 0.007;
pub const SPOON_HANDLE_HALF_LENGTH: f64 = 0.06;
pub const SPOON_HANDLE_CENTER_X: f64 = -0.035;
pub const SPOON_BOWL_RADII: [f64; 3] = [0.025, 0.018, 0.008];
pub const SPOON_BOWL_CENTER_X: f64 = 0.045;
pub const TOWEL_SIZE: [f64; 3] = [0.14, 0.05, 0.03];

impl ShapeSpec {
    pub fn parts(&self) -> Vec<Part> {
        match *self {
            ShapeSpec::Box { size } => {
                let half = Vec3::from(size) / 2.0;
                vec![part(Primitive::Box { half }, Vec3::new(0.0, 0.0, half.z))]
            }
            ShapeSpec::Cylinder { radius, height } => vec![part(
                Primitive::Cylinder { radius, half_height: height / 2.0 },
                Vec3::new(0.0, 0.0, height / 2.0),
            )],
            ShapeSpec::Ball { radius } => vec![part(
                Primitive::Ellipsoid { radii: Vec3::repeat(radius) },
                Vec3::new(0.0, 0.0, radius),
            )],
            ShapeSpec::Capsule { radius, length } => vec![part(
                Primitive::Capsule { radius, half_length: length / 2.0 },
                Vec3::new(0.0, 0.0, radius),
            )],
            ShapeSpec::Spoon => vec![
                part(
                    Primitive::Capsule {
                        radius: SPOON_HANDLE_RADIUS,
                        half_length: SPOON_HANDLE_HALF_LENGTH,
                    },
                    Vec3::new(SPOON_HANDLE_CENTER_X, 0.0, SPOON_HANDLE_RADIUS),
                ),
                part(
                    Primitive::Ellipsoid { radii: Vec3::from(SPOON_BOWL_RADII) },
                    Vec3::new(SPOON_BOWL_CENTER_X, 0.0, SPOON_BOWL_RADII[2]),
                ),
            ],
            ShapeSpec::Towel => ShapeSpec::Box { size: TOWEL_SIZE }.parts(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims: Vec<f64> = match self {
            ShapeSpec::Box { size } => size.to_vec(),
            ShapeSpec::Cylinder { radius, height } => vec![*radius, *height],
            ShapeSpec::Ball { radius } => vec![*radius],
            ShapeSpec::Capsule { radius, length } => vec![*radius, *length],
            ShapeSpec::Spoon | ShapeSpec::Towel => Vec::new(),
        };
        if dims.iter().all(|d| *d > 0.0 && d.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("object dimensions must be positive".into()))
        }
    }
}

/// A rigid object: its parts and its pose in the base frame.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldObject {
    pub label: String,
    pub shape: ShapeSpec,
    pub parts: Vec<Part>,
    /// Object frame → base frame.
    pub pose: Isometry3<f64>,
    pub color: Rgb,
}

impl WorldObject {
    /// An object resting on the table at `(x, y)` with heading `yaw`.
    pub fn on_table(label: impl Into<String>, shape: ShapeSpec, xy: [f64; 2], yaw: f64, color: Rgb) -> Self {
        let parts = shape.parts();
        Self {
            label: label.into(),
            shape,
            parts,
            pose: Isometry3::from_parts(Translation3::new(xy[0], xy[1], 0.0), yaw_rotation(yaw)),
            color,
        }
    }

    pub fn position(&self) -> Vec3 {
        self.pose.translation.vector
    }

    pub fn yaw(&self) -> f64 {
        let x = self.pose.rotation * Vec3::x();
        x.y.atan2(x.x)
    }

    /// Placement of part `i` in the base frame.
    pub fn part_pose(&self, i: usize) -> Isometry3<f64> {
        self.pose * self.parts[i].placement
    }

    /// Signed distance from a base-frame point to the object's surface.
    pub fn sdf(&self, p: &Vec3) -> f64 {
        (0..self.parts.len())
            .map(|i| {
                let local = self.part_pose(i).inverse_transform_point(&(*p).into());
                self.parts[i].primitive.sdf(&local.coords)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Height of the highest surface point above the object origin.
    pub fn height(&self) -> f64 {
        self.parts
            .iter()
            .map(|p| p.placement.translation.vector.z + p.primitive.bottom())
            .fold(0.0, f64::max)
    }

    /// Lowest surface point height in the base frame, for upright objects.
    pub fn lowest_z(&self) -> f64 {
        self.parts
            .iter()
            .map(|p| self.pose.translation.vector.z + p.placement.translation.vector.z - p.primitive.bottom())
            .fold(f64::INFINITY, f64::min)
    }
}

/// A horizontal table whose top is the plane z = 0.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Table {
    pub center: [f64; 2],
    pub size: [f64; 2],
    pub thickness: f64,
    pub color: Rgb,
}

impl Default for Table {
    fn default() -> Self {
        Self {
            center: [0.45, 0.0],
            size: [0.4, 0.4],
            thickness: 0.02,
            color: [140, 110, 80],
        }
    }
}

impl Table {
    pub fn primitive(&self) -> (Primitive, Isometry3<f64>) {
        let half = Vec3::new(self.size[0] / 2.0, self.size[1] / 2.0, self.thickness / 2.0);
        (
            Primitive::Box { half },
            Isometry3::translation(self.center[0], self.center[1], -self.thickness / 2.0),
        )
    }

    pub fn sdf(&self, p: &Vec3) -> f64 {
        let (prim, pose) = self.primitive();
        prim.sdf(&pose.inverse_transform_point(&(*p).into()).coords)
    }

    pub fn top_area(&self) -> f64 {
        self.size[0] * self.size[1]
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        (x - self.center[0]).abs() <= self.size[0] / 2.0 && (y - self.center[1]).abs() <= self.size[1] / 2.0
    }
}

/// Gravity is −z in the base frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WorldModel {
    pub table: Option<Table>,
    pub objects: Vec<WorldObject>,
}

impl WorldModel {
    /// Distance to the nearest surface of any object or the table.
    pub fn sdf(&self, p: &Vec3) -> f64 {
        let objects = self.objects.iter().map(|o| o.sdf(p)).fold(f64::INFINITY, f64::min);
        match &self.table {
            Some(t) => objects.min(t.sdf(p)),
            None => objects,
        }
    }

    pub fn object(&self, label: &str) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.label == label)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objects_rest_on_the_table() {
        for shape in [
            ShapeSpec::Spoon,
            ShapeSpec::Towel,
            ShapeSpec::Box { size: [0.05, 0.04, 0.03] },
            ShapeSpec::Cylinder { radius: 0.04, height: 0.1 },
            ShapeSpec::Ball { radius: 0.03 },
            ShapeSpec::Capsule { radius: 0.01, length: 0.1 },
        ] {
            let o = WorldObject::on_table("x", shape, [0.4, 0.1], 0.7, [0, 0, 0]);
            assert!(o.lowest_z().abs() < 1e-12);
            assert!((o.yaw() - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn spoon_parts_touch() {
        let s = WorldObject::on_table("spoon", ShapeSpec::Spoon, [0.0, 0.0], 0.0, [0, 0, 0]);
        // Handle tip lies inside the bowl.
        let tip = Vec3::new(SPOON_HANDLE_CENTER_X + SPOON_HANDLE_HALF_LENGTH, 0.0, SPOON_HANDLE_RADIUS);
        assert!(s.sdf(&tip) < 0.0);
        assert!((s.height() - 0.016).abs() < 1e-12);
    }

    #[test]
    fn table_distance() {
        let t = Table::default();
        assert!((t.sdf(&Vec3::new(0.45, 0.0, 0.01)) - 0.01).abs() < 1e-12);
        assert!(t.contains_xy(0.3, 0.1));
        assert!(!t.contains_xy(0.0, 0.0));
    }
}
