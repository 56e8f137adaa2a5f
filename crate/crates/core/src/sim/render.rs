use nalgebra::Isometry3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::shape::Primitive;
use super::world::WorldModel;
use crate::error::{Error, Result};
use crate::geometry::{rotation_from_axes, Frame, PointCloud, RigidTransform, Rgb, Vec3};

const INSIDE_TOLERANCE: f64 = 1e-9;

/// Camera pose (camera → base) at `eye` looking at `target`, with image
/// "up" as close to `up` as possible. The camera frame has +z forward,
/// +x right and +y down.
pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<RigidTransform> {
    let z = (target - eye)
        .try_normalize(1e-12)
        .ok_or_else(|| Error::InvalidArgument("camera target coincides with eye".into()))?;
    let x = z
        .cross(&up)
        .try_normalize(1e-9)
        .ok_or_else(|| Error::InvalidArgument("camera up is parallel to the view direction".into()))?;
    let y = z.cross(&x);
    Ok(RigidTransform::new(rotation_from_axes(&x, &y, &z), eye, Frame::CAMERA, Frame::BASE))
}

/// Surface sampling density and noise of the depth camera.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderParams {
    /// Points per square meter of surface, before culling.
    pub density: f64,
    /// Isotropic Gaussian noise, meters.
    pub depth_noise: f64,
}

enum Surface {
    Part { primitive: Primitive, pose: Isometry3<f64>, color: Rgb },
    TableTop { center: [f64; 2], size: [f64; 2], color: Rgb },
}

/// Renders the visible surfaces of `world` as seen from `camera`
/// (camera → base), returning a cloud in the camera frame with its
/// viewpoint at the origin.
///
/// Every primitive is sampled uniformly by area. Samples are dropped if
/// their normal faces away from the camera, if they lie inside another
/// primitive, or if the ray from the camera hits any surface first.
pub fn render_cloud(world: &WorldModel, camera: &RigidTransform, params: &RenderParams, seed: u64) -> Result<PointCloud> {
    if camera.from_frame() != &Frame::CAMERA || camera.to_frame() != &Frame::BASE {
        return Err(Error::FrameMismatch {
            expected: Frame::CAMERA,
            found: camera.from_frame().clone(),
        });
    }
    if !(params.density > 0.0) || !(params.depth_noise >= 0.0) {
        return Err(Error::InvalidArgument("render density must be positive and noise non-negative".into()));
    }
    let eye = *camera.translation();
    if world.sdf(&eye) <= 0.0 {
        return Err(Error::InvalidArgument("camera is inside scene geometry".into()));
    }

    let mut occluders: Vec<(Primitive, Isometry3<f64>)> = Vec::new();
    let mut surfaces = Vec::new();
    for o in &world.objects {
        for i in 0..o.parts.len() {
            let pose = o.part_pose(i);
            occluders.push((o.parts[i].primitive, pose));
            surfaces.push(Surface::Part {
                primitive: o.parts[i].primitive,
                pose,
                color: o.color,
            });
        }
    }
    if let Some(t) = &world.table {
        occluders.push(t.primitive());
        surfaces.push(Surface::TableTop {
            center: t.center,
            size: t.size,
            color: t.color,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, params.depth_noise).expect("finite noise");
    let mut points = Vec::new();
    let mut colors = Vec::new();
    for (si, surface) in surfaces.iter().enumerate() {
        let area = match surface {
            Surface::Part { primitive, .. } => primitive.area(),
            Surface::TableTop { size, .. } => size[0] * size[1],
        };
        let count = (area * params.density).round() as usize;
        for _ in 0..count {
            let (p, n, color) = match surface {
                Surface::Part { primitive, pose, color } => {
                    let (p, n) = primitive.sample_surface(&mut rng);
                    (pose.transform_point(&p.into()).coords, pose.rotation * n, *color)
                }
                Surface::TableTop { center, size, color } => {
                    let x = center[0] + size[0] * (rng.random::<f64>() - 0.5);
                    let y = center[1] + size[1] * (rng.random::<f64>() - 0.5);
                    (Vec3::new(x, y, 0.0), Vec3::z(), *color)
                }
            };
            let ray = p - eye;
            if n.dot(&ray) >= 0.0 {
                continue;
            }
            let hidden = occluders.iter().enumerate().any(|(oi, (prim, pose))| {
                let local_eye = pose.inverse_transform_point(&eye.into()).coords;
                let local_dir = pose.inverse_transform_vector(&ray);
                if prim.ray(&local_eye, &local_dir).is_some_and(|t| t < 1.0 - 1e-9) {
                    return true;
                }
                // Table-top samples sit exactly on the table box; skip it.
                oi != si && prim.contains(&pose.inverse_transform_point(&p.into()).coords, INSIDE_TOLERANCE)
            });
            if hidden {
                continue;
            }
            let jitter = if params.depth_noise > 0.0 {
                Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                Vec3::zeros()
            };
            points.push(camera.inverse().apply(&(p + jitter)));
            colors.push(color);
        }
    }
    PointCloud::with_colors(points, colors, Vec3::zeros(), Frame::CAMERA)
}
