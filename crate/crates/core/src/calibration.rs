//! Camera-to-base calibration from a tag rigidly mounted on the wrist.
//!
//! Each observation pairs the tag pose seen by the camera with the wrist pose
//! from forward kinematics. With the mount offset `wrist_to_tag` known, one
//! observation closes the chain
//! `base_to_camera = base_to_wrist ∘ wrist_to_tag ∘ camera_to_tag⁻¹`;
//! several are averaged.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix4, UnitQuaternion, Vector4};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::io::parse_pose_fields;
use crate::geometry::{axis_angle, Frame, RigidTransform, Vec3};

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationObservation {
    /// Tag pose in the camera frame (tag → camera).
    pub cam_to_tag: RigidTransform,
    /// Wrist pose in the base frame (wrist → base).
    pub base_to_wrist: RigidTransform,
}

impl CalibrationObservation {
    pub fn new(cam_to_tag: RigidTransform, base_to_wrist: RigidTransform) -> Result<Self> {
        expect_frames(&cam_to_tag, &Frame::TAG, &Frame::CAMERA)?;
        expect_frames(&base_to_wrist, &Frame::WRIST, &Frame::BASE)?;
        Ok(Self {
            cam_to_tag,
            base_to_wrist,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationResult {
    /// Camera pose in the base frame (camera → base).
    pub base_to_camera: RigidTransform,
    /// Mean distance of per-observation camera positions from their mean, meters.
    pub residual: f64,
    pub n_observations: usize,
}

fn expect_frames(t: &RigidTransform, from: &Frame, to: &Frame) -> Result<()> {
    if t.from_frame() != from {
        return Err(Error::FrameMismatch {
            expected: from.clone(),
            found: t.from_frame().clone(),
        });
    }
    if t.to_frame() != to {
        return Err(Error::FrameMismatch {
            expected: to.clone(),
            found: t.to_frame().clone(),
        });
    }
    Ok(())
}

pub fn solve_single(obs: &CalibrationObservation, wrist_to_tag: &RigidTransform) -> Result<RigidTransform> {
    obs.base_to_wrist
        .compose(wrist_to_tag)?
        .compose(&obs.cam_to_tag.inverse())
}

/// Averages per-observation solutions: arithmetic mean of translations and
/// the principal eigenvector of `Σ q qᵀ` for rotation.
pub fn solve_batch(obs: &[CalibrationObservation], wrist_to_tag: &RigidTransform) -> Result<CalibrationResult> {
    if obs.is_empty() {
        return Err(Error::Empty("no calibration observations"));
    }
    let solutions = obs
        .iter()
        .map(|o| solve_single(o, wrist_to_tag))
        .collect::<Result<Vec<_>>>()?;
    let n = solutions.len() as f64;
    let mean_t = solutions.iter().fold(Vec3::zeros(), |acc, s| acc + s.translation()) / n;
    let rotation = average_rotation(solutions.iter().map(|s| *s.rotation()));
    let residual = solutions
        .iter()
        .map(|s| (s.translation() - mean_t).norm())
        .sum::<f64>()
        / n;
    Ok(CalibrationResult {
        base_to_camera: RigidTransform::new(rotation, mean_t, Frame::CAMERA, Frame::BASE),
        residual,
        n_observations: solutions.len(),
    })
}

/// Eigenvector average of unit quaternions, sign-aligned to the first input.
pub fn average_rotation(rotations: impl IntoIterator<Item = UnitQuaternion<f64>>) -> UnitQuaternion<f64> {
    let mut m = Matrix4::zeros();
    let mut first: Option<Vector4<f64>> = None;
    for q in rotations {
        let v = q.quaternion().coords;
        first.get_or_insert(v);
        m += v * v.transpose();
    }
    let Some(first) = first else {
        return UnitQuaternion::identity();
    };
    let eig = nalgebra::SymmetricEigen::new(m);
    let imax = eig.eigenvalues.imax();
    let mut v = eig.eigenvectors.column(imax).into_owned();
    if v.dot(&first) < 0.0 {
        v = -v;
    }
    UnitQuaternion::from_quaternion(nalgebra::Quaternion::from(v))
}

/// Translation distance in meters and relative rotation angle in degrees.
pub fn calibration_error(estimate: &RigidTransform, truth: &RigidTransform) -> Result<(f64, f64)> {
    expect_frames(estimate, truth.from_frame(), truth.to_frame())?;
    let dt = (estimate.translation() - truth.translation()).norm();
    let dr = estimate.rotation().angle_to(truth.rotation()).to_degrees();
    Ok((dt, dr))
}

/// Gaussian disturbance of an observed tag pose: per-axis translation noise
/// and a rotation about a uniformly random axis through the tag origin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObservationNoise {
    pub translation_sigma: f64,
    pub rotation_sigma_deg: f64,
}

impl ObservationNoise {
    pub const NONE: Self = Self {
        translation_sigma: 0.0,
        rotation_sigma_deg: 0.0,
    };

    pub fn perturb(&self, t: &RigidTransform, rng: &mut impl Rng) -> RigidTransform {
        let ts = Normal::new(0.0, self.translation_sigma).expect("finite sigma");
        let rs = Normal::new(0.0, self.rotation_sigma_deg.to_radians()).expect("finite sigma");
        let dt = Vec3::new(ts.sample(rng), ts.sample(rng), ts.sample(rng));
        let axis = Vec3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let dr = axis_angle(&axis, rs.sample(rng));
        RigidTransform::new(dr * t.rotation(), t.translation() + dt, t.from_frame().clone(), t.to_frame().clone())
    }
}

/// Generates observations of a known camera pose from random wrist poses in
/// the box `[lo, hi]` (base frame), with tag tilts up to ±30°.
pub fn simulate_observations(
    base_to_camera: &RigidTransform,
    wrist_to_tag: &RigidTransform,
    n: usize,
    workspace: (Vec3, Vec3),
    noise: ObservationNoise,
    rng: &mut impl Rng,
) -> Result<Vec<CalibrationObservation>> {
    let (lo, hi) = workspace;
    let camera_to_base = base_to_camera.inverse();
    (0..n)
        .map(|_| {
            let p = Vec3::new(
                rng.random_range(lo.x..=hi.x),
                rng.random_range(lo.y..=hi.y),
                rng.random_range(lo.z..=hi.z),
            );
            let yaw = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let tilt_axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0);
            let tilt = rng.random_range(-30f64..30.0).to_radians();
            let rot = axis_angle(&tilt_axis, tilt) * axis_angle(&Vec3::z(), yaw);
            let base_to_wrist = RigidTransform::new(rot, p, Frame::WRIST, Frame::BASE);
            let cam_to_tag = camera_to_base.compose(&base_to_wrist)?.compose(wrist_to_tag)?;
            CalibrationObservation::new(noise.perturb(&cam_to_tag, rng), base_to_wrist)
        })
        .collect()
}

/// `tx ty tz qw qx qy qz`.
pub fn format_transform(t: &RigidTransform) -> String {
    let v = t.to_xyz_wxyz();
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x}");
    }
    s
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then(|| (i + 1, body.split_whitespace().collect()))
    })
}

/// One observation per line: `cam_to_tag` then `base_to_wrist`, each as
/// `tx ty tz qw qx qy qz`. `#` starts a comment.
pub fn parse_observations(text: &str) -> Result<Vec<CalibrationObservation>> {
    data_lines(text)
        .map(|(line, fields)| {
            if fields.len() != 14 {
                return Err(Error::parse(line, format!("expected 14 numbers, found {}", fields.len())));
            }
            let wrap = |e: Error| match e {
                Error::InvalidArgument(m) => Error::parse(line, m),
                e => e,
            };
            let cam = RigidTransform::from_xyz_wxyz(parse_pose_fields(&fields[..7], line)?, Frame::TAG, Frame::CAMERA)
                .map_err(wrap)?;
            let wrist =
                RigidTransform::from_xyz_wxyz(parse_pose_fields(&fields[7..], line)?, Frame::WRIST, Frame::BASE)
                    .map_err(wrap)?;
            CalibrationObservation::new(cam, wrist)
        })
        .collect()
}

pub fn format_observations(obs: &[CalibrationObservation]) -> String {
    let mut s = String::from("# cam_to_tag (tx ty tz qw qx qy qz)  base_to_wrist (tx ty tz qw qx qy qz)\n");
    for o in obs {
        let _ = writeln!(s, "{} {}", format_transform(&o.cam_to_tag), format_transform(&o.base_to_wrist));
    }
    s
}

/// A single transform line, labeled `from → to`.
pub fn parse_transform(text: &str, from: Frame, to: Frame) -> Result<RigidTransform> {
    let mut lines = data_lines(text);
    let (line, fields) = lines.next().ok_or_else(|| Error::parse(1, "missing transform"))?;
    if let Some((extra, _)) = lines.next() {
        return Err(Error::parse(extra, "expected a single transform line"));
    }
    RigidTransform::from_xyz_wxyz(parse_pose_fields(&fields, line)?, from, to).map_err(|e| match e {
        Error::InvalidArgument(m) => Error::parse(line, m),
        e => e,
    })
}

pub fn read_observations(path: impl AsRef<Path>) -> Result<Vec<CalibrationObservation>> {
    let path = path.as_ref();
    parse_observations(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_transform(rng: &mut impl Rng, from: Frame, to: Frame) -> RigidTransform {
        let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let t = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        RigidTransform::new(axis_angle(&axis, rng.random_range(-3.0..3.0)), t, from, to)
    }

    fn workspace() -> (Vec3, Vec3) {
        (Vec3::new(0.3, -0.2, 0.1), Vec3::new(0.6, 0.2, 0.4))
    }

    #[test]
    fn identity_chain_gives_wrist_pose() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let wrist = random_transform(&mut rng, Frame::WRIST, Frame::BASE);
        let obs = CalibrationObservation::new(
            RigidTransform::identity(Frame::TAG).relabeled(Frame::TAG, Frame::CAMERA),
            wrist.clone(),
        )
        .unwrap();
        let mount = RigidTransform::identity(Frame::TAG).relabeled(Frame::TAG, Frame::WRIST);
        let cam = solve_single(&obs, &mount).unwrap();
        assert!((cam.translation() - wrist.translation()).norm() < 1e-12);
        assert!(cam.rotation().angle_to(wrist.rotation()) < 1e-12);
    }

    #[test]
    fn exact_observations_match_matrix_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let truth = random_transform(&mut rng, Frame::CAMERA, Frame::BASE);
            let mount = random_transform(&mut rng, Frame::TAG, Frame::WRIST);
            let obs = simulate_observations(&truth, &mount, 1, workspace(), ObservationNoise::NONE, &mut rng).unwrap();
            let got = solve_single(&obs[0], &mount).unwrap();
            let oracle = obs[0].base_to_wrist.to_homogeneous()
                * mount.to_homogeneous()
                * obs[0].cam_to_tag.to_homogeneous().try_inverse().unwrap();
            for (a, b) in got.to_homogeneous().iter().zip(truth.to_homogeneous().iter()) {
                assert!((a - b).abs() < 1e-9);
            }
            for (a, b) in got.to_homogeneous().iter().zip(oracle.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn batch_of_one_and_noiseless_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let truth = random_transform(&mut rng, Frame::CAMERA, Frame::BASE);
        let mount = random_transform(&mut rng, Frame::TAG, Frame::WRIST);
        let noise = ObservationNoise { translation_sigma: 0.005, rotation_sigma_deg: 1.0 };
        let one = simulate_observations(&truth, &mount, 1, workspace(), noise, &mut rng).unwrap();
        let r = solve_batch(&one, &mount).unwrap();
        assert_eq!(r.residual, 0.0);
        let single = solve_single(&one[0], &mount).unwrap();
        assert_eq!(r.base_to_camera.translation(), single.translation());
        assert!(r.base_to_camera.rotation().angle_to(single.rotation()) < 1e-9);

        let ten = simulate_observations(&truth, &mount, 10, workspace(), ObservationNoise::NONE, &mut rng).unwrap();
        let r = solve_batch(&ten, &mount).unwrap();
        assert!(r.residual < 1e-9);
        let (dt, dr) = calibration_error(&r.base_to_camera, &truth).unwrap();
        assert!(dt < 1e-9 && dr < 1e-7);
        assert!(solve_batch(&[], &mount).is_err());
    }

    #[test]
    fn error_metric() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_transform(&mut rng, Frame::CAMERA, Frame::BASE);
        assert_eq!(calibration_error(&a, &a).unwrap(), (0.0, 0.0));
        let shifted = RigidTransform::new(*a.rotation(), a.translation() + Vec3::new(0.03, 0.0, 0.0), Frame::CAMERA, Frame::BASE);
        let (dt, dr) = calibration_error(&shifted, &a).unwrap();
        assert!((dt - 0.03).abs() < 1e-12 && dr == 0.0);
        for _ in 0..20 {
            let b = random_transform(&mut rng, Frame::CAMERA, Frame::BASE);
            let rel = a.rotation_matrix().transpose() * b.rotation_matrix();
            let oracle = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos().to_degrees();
            assert!((calibration_error(&b, &a).unwrap().1 - oracle).abs() < 1e-6);
        }
        let wrong = a.relabeled(Frame::TAG, Frame::BASE);
        assert!(calibration_error(&wrong, &a).is_err());
    }

    #[test]
    fn observation_file_round_trip_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth = random_transform(&mut rng, Frame::CAMERA, Frame::BASE);
        let mount = RigidTransform::identity(Frame::TAG).relabeled(Frame::TAG, Frame::WRIST);
        let obs = simulate_observations(&truth, &mount, 3, workspace(), ObservationNoise::NONE, &mut rng).unwrap();
        let back = parse_observations(&format_observations(&obs)).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in obs.iter().zip(&back) {
            assert!((a.cam_to_tag.translation() - b.cam_to_tag.translation()).norm() < 1e-15);
        }
        let bad = "# header\n0 0 0 1 0 0 0 0 0 0 1 0 0 0\n0 0 0 1 0 0 0 0 0 0 1 0 0\n";
        assert!(matches!(parse_observations(bad), Err(Error::Parse { line: 3, .. })));
        let zero_quat = "0 0 0 0 0 0 0 0 0 0 1 0 0 0\n";
        assert!(matches!(parse_observations(zero_quat), Err(Error::Parse { line: 1, .. })));
        assert!(parse_observations("").unwrap().is_empty());
        let t = parse_transform("# truth\n0.1 0.2 0.3 1 0 0 0\n", Frame::CAMERA, Frame::BASE).unwrap();
        assert_eq!(t.translation(), &Vec3::new(0.1, 0.2, 0.3));
    }
}
