use nalgebra::Matrix3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{sorted_eigen, NeighborIndex, PointCloud, Vec3};

/// Per-point surface normals, parallel to a cloud's points.
///
/// Points whose neighborhood has fewer than three members, or whose
/// neighbors are collinear, get a zero normal and are flagged in
/// `degenerate`; descriptor code skips them.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalField {
    normals: Vec<Vec3>,
    degenerate: Vec<bool>,
}

impl NormalField {
    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn is_degenerate(&self, i: usize) -> bool {
        self.degenerate[i]
    }

    pub fn degenerate_count(&self) -> usize {
        self.degenerate.iter().filter(|&&d| d).count()
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    /// Normals for the given point subset, in order.
    pub fn select(&self, indices: &[usize]) -> NormalField {
        NormalField {
            normals: indices.iter().map(|&i| self.normals[i]).collect(),
            degenerate: indices.iter().map(|&i| self.degenerate[i]).collect(),
        }
    }
}

/// Covariance of `points[indices]` about their mean, or `None` when fewer
/// than three points are given.
pub(crate) fn neighborhood_covariance(points: &[Vec3], indices: &[usize]) -> Option<Matrix3<f64>> {
    if indices.len() < 3 {
        return None;
    }
    let n = indices.len() as f64;
    let mean = indices.iter().fold(Vec3::zeros(), |acc, &i| acc + points[i]) / n;
    let mut cov = Matrix3::zeros();
    for &i in indices {
        let d = points[i] - mean;
        cov += d * d.transpose();
    }
    Some(cov / n)
}

/// Smallest-eigenvalue direction of the covariance, or `None` if the
/// neighborhood spans less than a plane.
pub(crate) fn plane_normal(cov: Matrix3<f64>) -> Option<Vec3> {
    let (values, vectors) = sorted_eigen(cov);
    if !(values[1] > 1e-12 * values[2].max(f64::MIN_POSITIVE)) {
        return None;
    }
    Some(vectors[0])
}

pub fn estimate_normals(c: &PointCloud, radius: f64) -> Result<NormalField> {
    if c.is_empty() {
        return Err(Error::Empty("cannot estimate normals of an empty cloud"));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("normal radius must be positive, got {radius}")));
    }
    let index = NeighborIndex::new(c.points());
    Ok(estimate_normals_with(c, &index, radius))
}

pub(crate) fn estimate_normals_with(c: &PointCloud, index: &NeighborIndex, radius: f64) -> NormalField {
    let points = c.points();
    let viewpoint = *c.viewpoint();
    let results: Vec<Option<Vec3>> = points
        .par_iter()
        .map_init(Vec::new, |buf, p| {
            index.radius_search_into(p, radius, buf);
            let mut n = plane_normal(neighborhood_covariance(points, buf)?)?;
            if n.dot(&(viewpoint - p)) < 0.0 {
                n = -n;
            }
            Some(n)
        })
        .collect();
    NormalField {
        degenerate: results.iter().map(Option::is_none).collect(),
        normals: results.into_iter().map(|n| n.unwrap_or_else(Vec3::zeros)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Frame;
    use rand::{Rng, SeedableRng};

    fn grid(viewpoint: Vec3) -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                pts.push(Vec3::new(i as f64 * 0.005, j as f64 * 0.005, 0.0));
            }
        }
        PointCloud::new(pts, viewpoint, Frame::CAMERA).unwrap()
    }

    #[test]
    fn plane_normals_face_the_viewpoint() {
        let up = estimate_normals(&grid(Vec3::new(0.0, 0.0, 1.0)), 0.012).unwrap();
        assert_eq!(up.degenerate_count(), 0);
        for n in up.normals() {
            assert!((n - Vec3::z()).norm() < 1e-6);
        }
        let down = estimate_normals(&grid(Vec3::new(0.0, 0.0, -1.0)), 0.012).unwrap();
        for n in down.normals() {
            assert!((n + Vec3::z()).norm() < 1e-6);
        }
    }

    #[test]
    fn sphere_normals_are_radial() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec3> = (0..2000)
            .map(|_| {
                let v = Vec3::new(
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                );
                v.normalize()
            })
            .collect();
        let viewpoint = Vec3::new(0.0, 0.0, 5.0);
        let cloud = PointCloud::new(pts.clone(), viewpoint, Frame::CAMERA).unwrap();
        let field = estimate_normals(&cloud, 0.25).unwrap();
        let mut checked = 0;
        for (p, n) in pts.iter().zip(field.normals()) {
            // Near-grazing points can legitimately flip; check clearly facing ones.
            let view = (viewpoint - p).normalize();
            if p.dot(&view) > 10f64.to_radians().sin() {
                let angle = n.dot(p).clamp(-1.0, 1.0).acos().to_degrees();
                assert!(angle < 5.0, "normal off by {angle} degrees at {p:?}");
                checked += 1;
            }
        }
        assert!(checked > 500);
    }

    #[test]
    fn sparse_and_collinear_points_are_flagged() {
        let line: Vec<Vec3> = (0..10).map(|i| Vec3::new(i as f64 * 0.001, 0.0, 0.0)).collect();
        let mut pts = line;
        pts.push(Vec3::new(1.0, 1.0, 1.0));
        let cloud = PointCloud::new(pts, Vec3::z(), Frame::CAMERA).unwrap();
        let field = estimate_normals(&cloud, 0.005).unwrap();
        assert_eq!(field.degenerate_count(), 11);
        assert_eq!(field.normals()[10], Vec3::zeros());
    }

    #[test]
    fn rejects_empty_cloud() {
        let cloud = PointCloud::empty(Vec3::zeros(), Frame::CAMERA);
        assert!(matches!(estimate_normals(&cloud, 0.01), Err(Error::Empty(_))));
    }
}
