//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use vtgrasp::geometry::{Frame, PointCloud, RigidTransform, Vec3};
use vtgrasp::perception::{segment_scene, PerceptionConfig};
use vtgrasp::recognition::{ObjectTemplate, RecognitionConfig};
use vtgrasp::sim::render::{look_at, render_cloud, RenderParams};
use vtgrasp::sim::world::{ShapeSpec, Table, WorldModel, WorldObject};

pub fn shapes() -> Vec<(&'static str, ShapeSpec)> {
    vec![
        ("cup", ShapeSpec::Cylinder { radius: 0.04, height: 0.1 }),
        ("block", ShapeSpec::Box { size: [0.08, 0.06, 0.05] }),
        ("ball", ShapeSpec::Ball { radius: 0.035 }),
        ("spoon", ShapeSpec::Spoon),
        ("towel", ShapeSpec::Towel),
    ]
}

pub fn camera() -> RigidTransform {
    look_at(Vec3::new(0.45, -0.35, 0.45), Vec3::new(0.45, 0.0, 0.0), Vec3::z()).unwrap()
}

/// The visible part of `shape` standing alone at the table center, in the
/// base frame.
pub fn object_view(shape: &ShapeSpec, seed: u64) -> PointCloud {
    let world = WorldModel {
        table: Some(Table::default()),
        objects: vec![WorldObject::on_table("o", shape.clone(), [0.45, 0.0], 0.0, [200, 60, 30])],
    };
    let cam = camera();
    let params = RenderParams { density: 150_000.0, depth_noise: 0.0 };
    let scene = render_cloud(&world, &cam, &params, seed).unwrap();
    let base = scene.transformed(&cam).unwrap();
    let seg = segment_scene(&base, &PerceptionConfig::default(), seed).unwrap();
    seg.cluster_clouds().into_iter().next().unwrap()
}

pub fn templates(cfg: &RecognitionConfig) -> Vec<ObjectTemplate> {
    shapes()
        .iter()
        .map(|(label, s)| ObjectTemplate::build(*label, object_view(s, 1).relabeled(Frame::OBJECT), cfg).unwrap())
        .collect()
}

/// Adds isotropic Gaussian noise of standard deviation `sigma` to every point.
pub fn jitter(c: &PointCloud, sigma: f64, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Normal::new(0.0, sigma).unwrap();
    let pts = c
        .points()
        .iter()
        .map(|p| p + Vec3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng)))
        .collect();
    PointCloud::new(pts, *c.viewpoint(), c.frame().clone()).unwrap()
}

pub fn nearest_to_centroid(c: &PointCloud) -> Vec3 {
    let m = c.centroid().unwrap();
    *c.points()
        .iter()
        .min_by(|a, b| (*a - m).norm().total_cmp(&(*b - m).norm()))
        .unwrap()
}
