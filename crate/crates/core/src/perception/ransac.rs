use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::normals::{neighborhood_covariance, plane_normal};
use super::Cluster;
use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Vec3};

const REFIT_ROUNDS: usize = 5;

/// The plane `normal · p = offset`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlaneModel {
    pub normal: Vec3,
    pub offset: f64,
}

impl PlaneModel {
    /// Normalizes `normal`; returns `None` for a zero vector.
    pub fn new(normal: Vec3, offset: f64) -> Option<Self> {
        let len = normal.norm();
        (len > 0.0 && len.is_finite()).then(|| Self {
            normal: normal / len,
            offset: offset / len,
        })
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }

    /// Plane through three points, or `None` if they are collinear.
    pub fn through(a: &Vec3, b: &Vec3, c: &Vec3) -> Option<Self> {
        let u = b - a;
        let v = c - a;
        let n = u.cross(&v);
        if n.norm() <= 1e-12 * u.norm() * v.norm() {
            return None;
        }
        let n = n.normalize();
        Some(Self {
            normal: n,
            offset: n.dot(a),
        })
    }

    /// Total least-squares plane through `points[indices]`.
    pub fn fit(points: &[Vec3], indices: &[usize]) -> Option<Self> {
        let cov = neighborhood_covariance(points, indices)?;
        let n = plane_normal(cov)?;
        let mean = indices.iter().fold(Vec3::zeros(), |acc, &i| acc + points[i]) / indices.len() as f64;
        Some(Self {
            normal: n,
            offset: n.dot(&mean),
        })
    }

    /// Same plane with the normal flipped, if needed, to face `viewpoint`.
    pub fn facing(self, viewpoint: &Vec3) -> Self {
        if self.signed_distance(viewpoint) < 0.0 {
            Self {
                normal: -self.normal,
                offset: -self.offset,
            }
        } else {
            self
        }
    }

    fn inliers(&self, points: &[Vec3], threshold: f64) -> Vec<usize> {
        points
            .iter()
            .enumerate()
            .filter(|(_, p)| self.signed_distance(p).abs() <= threshold)
            .map(|(i, _)| i)
            .collect()
    }

    fn inlier_count(&self, points: &[Vec3], threshold: f64) -> usize {
        points
            .iter()
            .filter(|p| self.signed_distance(p).abs() <= threshold)
            .count()
    }
}

/// Finds the dominant plane by random sample consensus.
///
/// Each iteration draws three distinct points; collinear draws are skipped.
/// The hypothesis with the most inliers (first one wins ties) is refit by
/// least squares on its inliers, and the inlier set is reselected against
/// the refit until it stops changing. The returned inliers are exactly the
/// points within `dist_threshold` of the returned plane, whose normal faces
/// the cloud's viewpoint.
pub fn segment_plane_ransac(
    c: &PointCloud,
    dist_threshold: f64,
    max_iters: usize,
    seed: u64,
) -> Result<(PlaneModel, Cluster)> {
    if !(dist_threshold > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "plane threshold must be positive, got {dist_threshold}"
        )));
    }
    let points = c.points();
    if points.len() < 3 {
        return Err(Error::NoPlane("fewer than three points"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(PlaneModel, usize)> = None;
    for _ in 0..max_iters {
        let s = rand::seq::index::sample(&mut rng, points.len(), 3);
        let Some(model) = PlaneModel::through(&points[s.index(0)], &points[s.index(1)], &points[s.index(2)])
        else {
            continue;
        };
        let count = model.inlier_count(points, dist_threshold);
        if best.is_none_or(|(_, b)| count > b) {
            best = Some((model, count));
        }
    }
    let mut model = match best {
        Some((m, _)) => m,
        // Every draw was collinear; fall back to the whole-cloud fit, which
        // also tells us whether any plane exists at all.
        None => {
            let all: Vec<usize> = (0..points.len()).collect();
            PlaneModel::fit(points, &all).ok_or(Error::NoPlane("all points are collinear"))?
        }
    };
    let mut inliers = model.inliers(points, dist_threshold);
    for _ in 0..REFIT_ROUNDS {
        let Some(refit) = PlaneModel::fit(points, &inliers) else {
            break;
        };
        let next = refit.inliers(points, dist_threshold);
        model = refit;
        if next == inliers {
            break;
        }
        inliers = next;
    }
    let inliers = model.inliers(points, dist_threshold);
    Ok((model.facing(c.viewpoint()), Cluster::from_sorted(inliers)))
}
