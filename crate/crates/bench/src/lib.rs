//! Inputs shared by the benchmarks.

use std::path::PathBuf;

use vtgrasp::geometry::{PointCloud, RigidTransform, Vec3};
use vtgrasp::sim::render::{look_at, render_cloud, RenderParams};
use vtgrasp::sim::world::{ShapeSpec, Table, WorldModel, WorldObject};
use vtgrasp::sim::Scenario;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::load(fixture(name), &[]).expect("bundled scenario loads")
}

pub fn camera() -> RigidTransform {
    look_at(Vec3::new(0.45, -0.35, 0.45), Vec3::new(0.45, 0.0, 0.0), Vec3::z()).expect("camera pose")
}

/// Three objects on the table, rendered and expressed in the base frame.
pub fn tabletop(density: f64) -> PointCloud {
    let world = WorldModel {
        table: Some(Table::default()),
        objects: vec![
            WorldObject::on_table("cup", ShapeSpec::Cylinder { radius: 0.04, height: 0.1 }, [0.4, -0.1], 0.0, [200, 40, 40]),
            WorldObject::on_table("block", ShapeSpec::Box { size: [0.08, 0.06, 0.05] }, [0.5, 0.05], 0.3, [40, 200, 40]),
            WorldObject::on_table("spoon", ShapeSpec::Spoon, [0.42, 0.12], 1.0, [180, 180, 190]),
        ],
    };
    let cam = camera();
    let params = RenderParams { density, depth_noise: 0.001 };
    render_cloud(&world, &cam, &params, 1)
        .and_then(|c| c.transformed(&cam))
        .expect("scene renders")
}
