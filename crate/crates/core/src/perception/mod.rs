//! Tabletop segmentation: plane removal, normals, Euclidean clustering and
//! color sub-segmentation.

mod cluster;
mod normals;
mod ransac;

pub use cluster::{color_split, euclidean_cluster, hue, hue_distance, remove_indices, Cluster};
pub use normals::{estimate_normals, NormalField};
pub use ransac::{segment_plane_ransac, PlaneModel};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

/// Tunable segmentation parameters. Lengths in meters.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerceptionConfig {
    pub normal_radius: f64,
    pub plane_threshold: f64,
    pub plane_iterations: usize,
    pub cluster_tolerance: f64,
    pub min_cluster_size: usize,
    pub max_cluster_size: usize,
    /// Sub-segment clusters by hue.
    pub color_split: bool,
    pub hue_tolerance_deg: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            normal_radius: 0.01,
            plane_threshold: 0.005,
            plane_iterations: 500,
            cluster_tolerance: 0.02,
            min_cluster_size: 50,
            max_cluster_size: 1_000_000,
            color_split: false,
            hue_tolerance_deg: 30.0,
        }
    }
}

impl PerceptionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("normal_radius", self.normal_radius),
            ("plane_threshold", self.plane_threshold),
            ("cluster_tolerance", self.cluster_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("perception.{name} must be positive")));
            }
        }
        if self.min_cluster_size == 0 || self.min_cluster_size > self.max_cluster_size {
            return Err(Error::Config(
                "perception cluster sizes must satisfy 1 <= min <= max".into(),
            ));
        }
        if !(self.hue_tolerance_deg >= 0.0) {
            return Err(Error::Config("perception.hue_tolerance_deg must be >= 0".into()));
        }
        Ok(())
    }
}

/// Result of segmenting a tabletop scene.
#[derive(Clone, Debug)]
pub struct SceneSegmentation {
    /// The removed support plane, if one was found.
    pub plane: Option<PlaneModel>,
    /// The scene with the plane removed; clusters index into this cloud.
    pub objects: PointCloud,
    pub clusters: Vec<Cluster>,
}

impl SceneSegmentation {
    pub fn cluster_clouds(&self) -> Vec<PointCloud> {
        self.clusters.iter().map(|k| self.objects.select(k.indices())).collect()
    }
}

/// Removes the dominant plane and clusters what remains.
pub fn segment_scene(c: &PointCloud, cfg: &PerceptionConfig, seed: u64) -> Result<SceneSegmentation> {
    cfg.validate()?;
    let (plane, objects) = match segment_plane_ransac(c, cfg.plane_threshold, cfg.plane_iterations, seed) {
        Ok((plane, inliers)) => (Some(plane), remove_indices(c, &inliers)?),
        Err(Error::NoPlane(_)) => (None, c.clone()),
        Err(e) => return Err(e),
    };
    let mut clusters = euclidean_cluster(
        &objects,
        cfg.cluster_tolerance,
        cfg.min_cluster_size,
        cfg.max_cluster_size,
    );
    if cfg.color_split && objects.colors().is_some() {
        let mut split = Vec::new();
        for k in &clusters {
            split.extend(color_split(
                &objects,
                k,
                cfg.cluster_tolerance,
                cfg.hue_tolerance_deg,
                cfg.min_cluster_size,
            )?);
        }
        split.sort_by(|a, b| b.len().cmp(&a.len()).then(a.indices()[0].cmp(&b.indices()[0])));
        clusters = split;
    }
    Ok(SceneSegmentation {
        plane,
        objects,
        clusters,
    })
}
