use std::borrow::Cow;
use std::fmt;

use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, UnitQuaternion};

use super::Vec3;
use crate::error::{Error, Result};

/// Name of a coordinate frame. Transforms carry one on each side so that
/// chaining them in the wrong order is an error instead of a silent bug.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frame(Cow<'static, str>);

impl Frame {
    pub const CAMERA: Frame = Frame(Cow::Borrowed("camera"));
    pub const BASE: Frame = Frame(Cow::Borrowed("base"));
    pub const WRIST: Frame = Frame(Cow::Borrowed("wrist"));
    pub const TAG: Frame = Frame(Cow::Borrowed("tag"));
    pub const OBJECT: Frame = Frame(Cow::Borrowed("object"));
    pub const HAND: Frame = Frame(Cow::Borrowed("hand"));

    pub fn new(name: impl Into<String>) -> Self {
        Frame(Cow::Owned(name.into()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A rigid motion mapping coordinates expressed in `from` into coordinates
/// expressed in `to`: `p_to = R * p_from + t`.
///
/// Equivalently, this is the pose of frame `from` as seen from frame `to`.
/// Naming follows `to_to_from`, e.g. `base_to_camera` maps camera
/// coordinates into the base frame.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: UnitQuaternion<f64>,
    translation: Vec3,
    from: Frame,
    to: Frame,
}

impl RigidTransform {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vec3, from: Frame, to: Frame) -> Self {
        let mut rotation = rotation;
        rotation.renormalize();
        Self {
            rotation,
            translation,
            from,
            to,
        }
    }

    pub fn identity(frame: Frame) -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vec3::zeros(),
            from: frame.clone(),
            to: frame,
        }
    }

    pub fn from_translation(translation: Vec3, from: Frame, to: Frame) -> Self {
        Self::new(UnitQuaternion::identity(), translation, from, to)
    }

    /// Builds a transform from `tx ty tz qw qx qy qz`. The quaternion is
    /// normalized; a zero quaternion is rejected.
    pub fn from_xyz_wxyz(v: [f64; 7], from: Frame, to: Frame) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite transform component".into()));
        }
        let q = nalgebra::Quaternion::new(v[3], v[4], v[5], v[6]);
        if q.norm() < 1e-12 {
            return Err(Error::InvalidArgument("zero quaternion".into()));
        }
        Ok(Self::new(
            UnitQuaternion::from_quaternion(q),
            Vec3::new(v[0], v[1], v[2]),
            from,
            to,
        ))
    }

    /// `tx ty tz qw qx qy qz`, with the quaternion in the `qw >= 0` hemisphere.
    pub fn to_xyz_wxyz(&self) -> [f64; 7] {
        let mut q = *self.rotation.quaternion();
        if q.w < 0.0 {
            q = -q;
        }
        [
            self.translation.x,
            self.translation.y,
            self.translation.z,
            q.w,
            q.i,
            q.j,
            q.k,
        ]
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        *self.rotation.to_rotation_matrix().matrix()
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn from_frame(&self) -> &Frame {
        &self.from
    }

    pub fn to_frame(&self) -> &Frame {
        &self.to
    }

    /// Same motion, new frame labels.
    pub fn relabeled(&self, from: Frame, to: Frame) -> Self {
        Self {
            rotation: self.rotation,
            translation: self.translation,
            from,
            to,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let inv = self.rotation.inverse();
        Self {
            rotation: inv,
            translation: -(inv * self.translation),
            from: self.to.clone(),
            to: self.from.clone(),
        }
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    ///
    /// Requires `self.from == other.to`; the result maps `other.from` into
    /// `self.to`.
    pub fn compose(&self, other: &RigidTransform) -> Result<Self> {
        if self.from != other.to {
            return Err(Error::FrameMismatch {
                expected: self.from.clone(),
                found: other.to.clone(),
            });
        }
        Ok(Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
            other.from.clone(),
            self.to.clone(),
        ))
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        self.rotation.angle()
    }

    /// Heading of the transformed x-axis projected onto the xy-plane.
    pub fn yaw(&self) -> f64 {
        let x = self.rotation * Vec3::x();
        x.y.atan2(x.x)
    }
}

/// Rotation about the z axis.
pub fn yaw_rotation(yaw: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vec3::z_axis(), yaw)
}

/// Rotation from three orthonormal column axes. The matrix is
/// re-orthonormalized before conversion.
pub fn rotation_from_axes(x: &Vec3, y: &Vec3, z: &Vec3) -> UnitQuaternion<f64> {
    let m = Matrix3::from_columns(&[*x, *y, *z]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix(&m))
}

/// Rotation of `angle` radians about `axis` (need not be normalized).
pub fn axis_angle(axis: &Vec3, angle: f64) -> UnitQuaternion<f64> {
    match Unit::try_new(*axis, 1e-12) {
        Some(a) => UnitQuaternion::from_axis_angle(&a, angle),
        None => UnitQuaternion::identity(),
    }
}
