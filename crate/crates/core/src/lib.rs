pub mod calibration;
pub mod error;
pub mod geometry;
pub mod grasp;
pub mod perception;
pub mod recognition;
pub mod sim;
pub mod tactile;

pub use error::{Error, Result};
pub use geometry::{Frame, NeighborIndex, PointCloud, RigidTransform, Vec3};
