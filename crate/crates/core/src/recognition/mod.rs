//! Descriptor extraction, template matching and coarse pose estimation.

mod descriptor;
mod lrf;
mod template;

pub use descriptor::{
    format_descriptor, global_descriptor, local_descriptor, parse_descriptor, read_descriptor,
    write_descriptor, Descriptor, DescriptorKind, GLOBAL_BINS, LOCAL_BINS,
};
pub use lrf::{local_frame, LocalFrame};
pub use template::{
    estimate_pose, load_database, match_descriptor, match_local_set, uniform_keypoints, Match,
    MatchMode, ObjectTemplate, PoseEstimate, RecognitionConfig, LOW_CONFIDENCE,
};

use crate::error::Result;
use crate::geometry::PointCloud;
use crate::perception::{estimate_normals, segment_scene, PerceptionConfig};

/// Outcome for one segmented cluster.
#[derive(Clone, Debug)]
pub struct Recognition {
    pub cluster: PointCloud,
    /// Best score against the database, even when below threshold.
    pub score: f64,
    /// Present when the cluster matched a template.
    pub estimate: Option<PoseEstimate>,
}

/// Describes a cluster and matches it against `db` using `cfg.mode`.
pub fn recognize_cluster(
    cluster: &PointCloud,
    db: &[ObjectTemplate],
    cfg: &RecognitionConfig,
) -> Result<Recognition> {
    let normals = estimate_normals(cluster, cfg.normal_radius)?;
    let best = match cfg.mode {
        MatchMode::Global => match_descriptor(&global_descriptor(cluster, &normals)?, db, 0.0)?,
        MatchMode::Local => {
            let descs: Vec<Descriptor> = template::describe_keypoints(cluster, &normals, cfg)?
                .into_iter()
                .map(|(_, d)| d)
                .collect();
            match_local_set(&descs, db, 0.0)?
        }
    };
    let score = best.as_ref().map_or(0.0, |m| m.score);
    let estimate = match best {
        Some(m) if m.score >= cfg.match_threshold => Some(estimate_pose(cluster, &db[m.index], m.score)?),
        _ => None,
    };
    Ok(Recognition {
        cluster: cluster.clone(),
        score,
        estimate,
    })
}

/// Segments a scene and recognizes each cluster, largest first.
pub fn recognize_scene(
    scene: &PointCloud,
    db: &[ObjectTemplate],
    perception: &PerceptionConfig,
    cfg: &RecognitionConfig,
    seed: u64,
) -> Result<Vec<Recognition>> {
    cfg.validate()?;
    let seg = segment_scene(scene, perception, seed)?;
    seg.cluster_clouds()
        .iter()
        .map(|c| recognize_cluster(c, db, cfg))
        .collect()
}
