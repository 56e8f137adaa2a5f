use std::path::Path;

use rayon::prelude::*;
use serde::Deserialize;

use super::descriptor::{global_descriptor, read_descriptor, write_descriptor, Descriptor, DescriptorKind, LocalDescriber};
use super::lrf::frame_from_neighbors;
use crate::error::{Error, Result};
use crate::geometry::io::{read_cloud, write_cloud};
use crate::geometry::{Frame, PointCloud, RigidTransform, Vec3};
use crate::perception::{estimate_normals, NormalField};

const MODEL_FILE: &str = "model.cloud";
const GLOBAL_FILE: &str = "global.desc";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Global,
    Local,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecognitionConfig {
    /// Neighborhood radius for the normals that feed the descriptors.
    pub normal_radius: f64,
    /// Support radius of local descriptors.
    pub local_radius: f64,
    /// Minimum spacing of uniformly subsampled keypoints.
    pub keypoint_spacing: f64,
    /// Best scores below this are reported as no match.
    pub match_threshold: f64,
    pub mode: MatchMode,
}

impl Default for RecognitionConfig {
    fn default() -> Self {
        Self {
            normal_radius: 0.03,
            local_radius: 0.04,
            keypoint_spacing: 0.02,
            match_threshold: 0.6,
            mode: MatchMode::Global,
        }
    }
}

impl RecognitionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("normal_radius", self.normal_radius),
            ("local_radius", self.local_radius),
            ("keypoint_spacing", self.keypoint_spacing),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("recognition.{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.match_threshold) {
            return Err(Error::Config("recognition.match_threshold must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// A known object: its model cloud and the descriptors computed from it.
#[derive(Clone, Debug)]
pub struct ObjectTemplate {
    pub label: String,
    pub cloud: PointCloud,
    pub normals: NormalField,
    pub global: Descriptor,
    pub keypoints: Vec<(Vec3, Descriptor)>,
}

impl ObjectTemplate {
    pub fn build(label: impl Into<String>, cloud: PointCloud, cfg: &RecognitionConfig) -> Result<Self> {
        let normals = estimate_normals(&cloud, cfg.normal_radius)?;
        let global = global_descriptor(&cloud, &normals)?;
        Self::with_global(label.into(), cloud, normals, global, cfg)
    }

    fn with_global(
        label: String,
        cloud: PointCloud,
        normals: NormalField,
        global: Descriptor,
        cfg: &RecognitionConfig,
    ) -> Result<Self> {
        let keypoints = describe_keypoints(&cloud, &normals, cfg)?;
        Ok(Self {
            label,
            cloud,
            normals,
            global,
            keypoints,
        })
    }

    /// Writes `<dir>/<label>/model.cloud` and `global.desc`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref().join(&self.label);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_cloud(dir.join(MODEL_FILE), &self.cloud)?;
        write_descriptor(dir.join(GLOBAL_FILE), &self.global)
    }

    /// Loads one template directory; the label is the directory name.
    /// Local descriptors are recomputed from the model cloud.
    pub fn load(dir: impl AsRef<Path>, cfg: &RecognitionConfig) -> Result<Self> {
        let dir = dir.as_ref();
        let label = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::Config(format!("bad template directory {}", dir.display())))?
            .to_string();
        let cloud = read_cloud(dir.join(MODEL_FILE), Frame::OBJECT)?;
        let global = read_descriptor(dir.join(GLOBAL_FILE))?;
        if global.kind() != DescriptorKind::Global {
            return Err(Error::DescriptorMismatch(format!("{label}: stored descriptor is not global")));
        }
        let normals = estimate_normals(&cloud, cfg.normal_radius)?;
        Self::with_global(label, cloud, normals, global, cfg)
    }
}

/// Loads every subdirectory of `dir` as a template, in name order.
pub fn load_database(dir: impl AsRef<Path>, cfg: &RecognitionConfig) -> Result<Vec<ObjectTemplate>> {
    let dir = dir.as_ref();
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    entries.sort();
    entries.iter().map(|p| ObjectTemplate::load(p, cfg)).collect()
}

/// Greedy subsample in index order keeping points at least `spacing` apart.
pub fn uniform_keypoints(points: &[Vec3], spacing: f64) -> Vec<Vec3> {
    let mut keep: Vec<Vec3> = Vec::new();
    let s2 = spacing * spacing;
    for p in points {
        if keep.iter().all(|k| (k - p).norm_squared() >= s2) {
            keep.push(*p);
        }
    }
    keep
}

pub(crate) fn describe_keypoints(
    cloud: &PointCloud,
    normals: &NormalField,
    cfg: &RecognitionConfig,
) -> Result<Vec<(Vec3, Descriptor)>> {
    let describer = LocalDescriber::new(cloud, normals)?;
    let out: Vec<Option<(Vec3, Descriptor)>> = uniform_keypoints(cloud.points(), cfg.keypoint_spacing)
        .into_par_iter()
        .map(|k| describer.describe(&k, cfg.local_radius).ok().map(|d| (k, d)))
        .collect();
    Ok(out.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Match {
    pub index: usize,
    pub label: String,
    pub score: f64,
}

/// Template maximizing histogram intersection with `d`; the first one in
/// database order wins ties. `None` when the database is empty or the best
/// score is below `threshold`.
///
/// A local query is scored against each template's best-matching keypoint.
pub fn match_descriptor(d: &Descriptor, db: &[ObjectTemplate], threshold: f64) -> Result<Option<Match>> {
    let mut best: Option<Match> = None;
    for (index, t) in db.iter().enumerate() {
        let score = match d.kind() {
            DescriptorKind::Global => d.intersection(&t.global)?,
            DescriptorKind::Local => best_local(d, t)?,
        };
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(Match {
                index,
                label: t.label.clone(),
                score,
            });
        }
    }
    Ok(best.filter(|b| b.score >= threshold))
}

fn best_local(d: &Descriptor, t: &ObjectTemplate) -> Result<f64> {
    let mut best: f64 = 0.0;
    for (_, k) in &t.keypoints {
        best = best.max(d.intersection(k)?);
    }
    Ok(best)
}

/// Scores a set of local descriptors: each template gets the mean over
/// query keypoints of the best keypoint intersection.
pub fn match_local_set(query: &[Descriptor], db: &[ObjectTemplate], threshold: f64) -> Result<Option<Match>> {
    if query.is_empty() {
        return Ok(None);
    }
    let mut best: Option<Match> = None;
    for (index, t) in db.iter().enumerate() {
        let mut total = 0.0;
        for q in query {
            total += best_local(q, t)?;
        }
        let score = total / query.len() as f64;
        if best.as_ref().is_none_or(|b| score > b.score) {
            best = Some(Match {
                index,
                label: t.label.clone(),
                score,
            });
        }
    }
    Ok(best.filter(|b| b.score >= threshold))
}

/// Object pose in the cluster's frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseEstimate {
    pub label: String,
    /// Maps object coordinates (origin at the template centroid) into the
    /// cluster's frame.
    pub pose: RigidTransform,
    pub confidence: f64,
    /// False when the cluster's or template's frame was degenerate and the
    /// rotation is identity by default.
    pub rotation_valid: bool,
    /// Half extents of the cluster along the pose axes, about the centroid.
    pub half_extents: Vec3,
}

/// Confidence cap for position-only estimates.
pub const LOW_CONFIDENCE: f64 = 0.25;

/// Whole-cloud frame at the centroid, with support just covering every point.
fn centroid_frame(c: &PointCloud) -> Result<(Vec3, Result<[Vec3; 3]>)> {
    let centroid = c.centroid().ok_or(Error::Empty("cannot estimate the pose of an empty cluster"))?;
    let reach = c.points().iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
    let all: Vec<usize> = (0..c.len()).collect();
    let radius = reach * 1.01 + 1e-9;
    let axes = frame_from_neighbors(c.points(), &all, &centroid, radius, c.viewpoint()).map(|f| f.axes);
    Ok((centroid, axes))
}

/// Translation is the cluster centroid; rotation carries the template's
/// centroid frame onto the cluster's.
pub fn estimate_pose(cluster: &PointCloud, template: &ObjectTemplate, score: f64) -> Result<PoseEstimate> {
    let (centroid, cluster_axes) = centroid_frame(cluster)?;
    let (_, template_axes) = centroid_frame(&template.cloud)?;
    let score = score.clamp(0.0, 1.0);
    let (rotation, rotation_valid, confidence) = match (cluster_axes, template_axes) {
        (Ok(a), Ok(b)) => {
            let fa = nalgebra::Matrix3::from_columns(&a);
            let fb = nalgebra::Matrix3::from_columns(&b);
            let r = nalgebra::Rotation3::from_matrix(&(fa * fb.transpose()));
            (nalgebra::UnitQuaternion::from_rotation_matrix(&r), true, score)
        }
        _ => (nalgebra::UnitQuaternion::identity(), false, score.min(LOW_CONFIDENCE)),
    };
    let pose = RigidTransform::new(rotation, centroid, Frame::OBJECT, cluster.frame().clone());
    let axes = pose.rotation_matrix();
    let mut half_extents = Vec3::zeros();
    for p in cluster.points() {
        let d = axes.transpose() * (p - centroid);
        half_extents = half_extents.sup(&d.abs());
    }
    Ok(PoseEstimate {
        label: template.label.clone(),
        pose,
        confidence,
        rotation_valid,
        half_extents,
    })
}
