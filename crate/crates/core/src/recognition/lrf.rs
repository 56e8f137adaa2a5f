use nalgebra::{Matrix3, UnitQuaternion};

use crate::error::{Error, Result};
use crate::geometry::{rotation_from_axes, sorted_eigen, NeighborIndex, PointCloud, Vec3};

/// A right-handed orthonormal frame attached to a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalFrame {
    pub origin: Vec3,
    /// x, y, z axes.
    pub axes: [Vec3; 3],
}

impl LocalFrame {
    /// Coordinates of `p` in this frame.
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        let d = p - self.origin;
        Vec3::new(self.axes[0].dot(&d), self.axes[1].dot(&d), self.axes[2].dot(&d))
    }

    /// Matrix whose columns are the axes.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&self.axes)
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        rotation_from_axes(&self.axes[0], &self.axes[1], &self.axes[2])
    }
}

/// Repeatable frame from the distance-weighted covariance of the points
/// within `radius` of `center`.
///
/// x is the largest-variance direction, z the smallest, y = z × x. x and z
/// are each flipped so that most neighbors project positively; exact ties
/// fall back to the sign of the summed projections, and then to facing the
/// cloud's viewpoint.
pub fn local_frame(c: &PointCloud, center: &Vec3, radius: f64) -> Result<LocalFrame> {
    let index = NeighborIndex::new(c.points());
    let neighbors = index.radius_search(center, radius);
    frame_from_neighbors(c.points(), &neighbors, center, radius, c.viewpoint())
}

pub(crate) fn frame_from_neighbors(
    points: &[Vec3],
    neighbors: &[usize],
    center: &Vec3,
    radius: f64,
    viewpoint: &Vec3,
) -> Result<LocalFrame> {
    if neighbors.len() < 3 {
        return Err(Error::Degenerate("fewer than three neighbors"));
    }
    let mut cov = Matrix3::zeros();
    let mut total = 0.0;
    for &i in neighbors {
        let d = points[i] - center;
        let w = (radius - d.norm()).max(0.0);
        cov += w * d * d.transpose();
        total += w;
    }
    if !(total > 0.0) {
        return Err(Error::Degenerate("all neighbors on the support boundary"));
    }
    cov /= total;
    let (values, vectors) = sorted_eigen(cov);
    if !(values[1] > 1e-12 * values[2].max(f64::MIN_POSITIVE)) {
        return Err(Error::Degenerate("neighborhood has rank below two"));
    }
    let eps = 1e-9 * radius;
    let toward_view = viewpoint - center;
    let x = disambiguate(vectors[2], points, neighbors, center, eps, &toward_view);
    let z = disambiguate(vectors[0], points, neighbors, center, eps, &toward_view);
    let y = z.cross(&x).normalize();
    Ok(LocalFrame {
        origin: *center,
        axes: [x, y, z],
    })
}

fn disambiguate(axis: Vec3, points: &[Vec3], neighbors: &[usize], center: &Vec3, eps: f64, view: &Vec3) -> Vec3 {
    let (mut pos, mut neg, mut sum) = (0usize, 0usize, 0.0);
    for &i in neighbors {
        let p = axis.dot(&(points[i] - center));
        if p > eps {
            pos += 1;
        } else if p < -eps {
            neg += 1;
        }
        sum += p;
    }
    let flip = if pos != neg {
        neg > pos
    } else if sum.abs() > eps {
        sum < 0.0
    } else {
        axis.dot(view) < 0.0
    };
    if flip {
        -axis
    } else {
        axis
    }
}
