//! Frame-aware 3D primitives shared by every other module.
//!
//! Camera frames are right-handed with +z along the optical axis, +x to the
//! right of the image and +y down. The robot base frame has +z up, with the
//! table top at z = 0 in the simulator.

mod cloud;
mod index;
pub mod io;
mod transform;

pub use cloud::{PointCloud, Rgb};
pub use index::NeighborIndex;
pub use transform::{axis_angle, rotation_from_axes, yaw_rotation, Frame, RigidTransform};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Maps `c` through `t`; `c` must be expressed in `t`'s source frame.
pub fn transform_cloud(t: &RigidTransform, c: &PointCloud) -> crate::Result<PointCloud> {
    c.transformed(t)
}

/// Symmetric 3x3 eigen-decomposition with eigenpairs sorted by ascending
/// eigenvalue.
pub(crate) fn sorted_eigen(m: nalgebra::Matrix3<f64>) -> ([f64; 3], [Vec3; 3]) {
    let eig = nalgebra::SymmetricEigen::new(m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.map(|i| eig.eigenvalues[i]);
    let vectors = order.map(|i| eig.eigenvectors.column(i).into_owned().normalize());
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn transform_preserves_pairwise_distances(
            seed in any::<u64>(),
            n in 2usize..40,
            angle in -3.1f64..3.1,
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
            tx in -5.0f64..5.0, ty in -5.0f64..5.0, tz in -5.0f64..5.0,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<Vec3> = (0..n)
                .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let cloud = PointCloud::new(pts, Vec3::zeros(), Frame::CAMERA).unwrap();
            let t = RigidTransform::new(axis_angle(&Vec3::new(ax, ay, az), angle), Vec3::new(tx, ty, tz), Frame::CAMERA, Frame::BASE);
            let out = transform_cloud(&t, &cloud).unwrap();
            for i in 0..n {
                for j in (i + 1)..n {
                    let before = (cloud.points()[i] - cloud.points()[j]).norm();
                    let after = (out.points()[i] - out.points()[j]).norm();
                    prop_assert!((before - after).abs() < 1e-9);
                }
            }
        }
    }
}
