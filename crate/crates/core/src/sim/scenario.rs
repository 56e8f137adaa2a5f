//! Scenario files.
//!
//! ```toml
//! [world]
//! table = { center = [0.45, 0.0], size = [0.4, 0.4] }
//! [[world.objects]]
//! label = "spoon"
//! geometry = { shape = "spoon" }
//! position = [0.45, -0.05]
//! yaw = 0.3
//!
//! [rig]
//! camera = { eye = [0.45, -0.35, 0.45], target = [0.45, 0.0, 0.0] }
//!
//! [policy]
//! target = "spoon"
//!
//! [noise]
//! pose_perturbation = 0.03
//!
//! [run]
//! seed = 7
//! success_region = { center = [0.4, 0.12], half_size = [0.04, 0.04] }
//! ```
//!
//! Optional `[perception]`, `[tactile]` and `[recognition]` sections tune
//! the pipeline. Lengths are meters, angles radians unless the key says
//! otherwise, rates hertz.

use std::path::Path;

use nalgebra::{Quaternion, UnitQuaternion};
use serde::Deserialize;

use super::proximity::ProximityModel;
use super::world::{ShapeSpec, Table, WorldModel, WorldObject};
use crate::error::{Error, Result};
use crate::geometry::{Frame, RigidTransform, Rgb, Vec3};
use crate::grasp::{GraspPolicy, HandGeometry};
use crate::perception::PerceptionConfig;
use crate::recognition::RecognitionConfig;
use crate::tactile::DetectorConfig;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub world: WorldSpec,
    #[serde(default)]
    pub rig: RigSpec,
    pub policy: GraspPolicy,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub run: RunSpec,
    #[serde(default)]
    pub perception: PerceptionConfig,
    #[serde(default)]
    pub tactile: DetectorConfig,
    #[serde(default)]
    pub recognition: RecognitionConfig,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    #[serde(default = "default_table")]
    pub table: Option<Table>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
}

fn default_table() -> Option<Table> {
    Some(Table::default())
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub label: String,
    pub geometry: ShapeSpec,
    pub position: [f64; 2],
    #[serde(default)]
    pub yaw: f64,
    #[serde(default = "default_color")]
    pub color: Rgb,
}

fn default_color() -> Rgb {
    [200, 200, 200]
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub eye: [f64; 3],
    pub target: [f64; 3],
}

/// A rigid offset as translation plus unit quaternion `[w, x, y, z]`.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffsetSpec {
    pub translation: [f64; 3],
    #[serde(default = "identity_quaternion")]
    pub rotation: [f64; 4],
}

fn identity_quaternion() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigSpec {
    pub camera: CameraSpec,
    /// Rendered points per square meter of visible surface.
    pub density: f64,
    pub depth_noise: f64,
    pub sensor_rate: f64,
    pub fsm_rate: f64,
    pub proximity: ProximityModel,
    pub hand: HandGeometry,
    /// Starting hand position; the hand starts at yaw 0, fingers open.
    pub home: [f64; 3],
    /// Pose of the calibration tag on the wrist.
    pub wrist_to_tag: OffsetSpec,
}

impl Default for RigSpec {
    fn default() -> Self {
        Self {
            camera: CameraSpec {
                eye: [0.45, -0.35, 0.45],
                target: [0.45, 0.0, 0.0],
            },
            density: 150_000.0,
            depth_noise: 0.001,
            sensor_rate: 500.0,
            fsm_rate: 100.0,
            proximity: ProximityModel::default(),
            hand: HandGeometry::default(),
            home: [0.45, 0.0, 0.3],
            wrist_to_tag: OffsetSpec {
                translation: [0.0, 0.0, 0.05],
                rotation: identity_quaternion(),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationNoise {
    /// Estimate the camera pose from noisy tag sightings instead of using
    /// the true pose.
    pub enabled: bool,
    pub observations: usize,
    pub translation_sigma: f64,
    pub rotation_sigma_deg: f64,
}

impl Default for CalibrationNoise {
    fn default() -> Self {
        Self {
            enabled: false,
            observations: 10,
            translation_sigma: 0.005,
            rotation_sigma_deg: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Horizontal error added to every object pose estimate: this length,
    /// in a direction drawn uniformly once per run.
    pub pose_perturbation: f64,
    pub calibration: CalibrationNoise,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub center: [f64; 2],
    pub half_size: [f64; 2],
}

impl Region {
    pub fn contains(&self, p: &Vec3) -> bool {
        (p.x - self.center[0]).abs() <= self.half_size[0] && (p.y - self.center[1]).abs() <= self.half_size[1]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub seed: u64,
    /// The run succeeds when the target object ends up over this region,
    /// resting on the table.
    pub success_region: Region,
}

impl Scenario {
    /// Parses a scenario, reporting schema errors with their line.
    pub fn parse(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        s.validate()?;
        Ok(s)
    }

    /// Parses a scenario after applying `key.path=value` overrides. Values
    /// are read as TOML, falling back to a bare string.
    pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Self::parse(text);
        }
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let s: Scenario = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("after overrides: {}", e.message())))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_with_overrides(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        self.perception.validate()?;
        self.tactile.validate()?;
        self.recognition.validate()?;
        self.rig.hand.validate()?;
        self.rig.proximity.validate()?;
        let r = &self.rig;
        if !(r.density > 0.0 && r.density.is_finite()) || !(r.depth_noise >= 0.0) {
            return Err(Error::Config("rig: density must be positive and depth_noise non-negative".into()));
        }
        if !(r.sensor_rate > 0.0 && r.fsm_rate > 0.0) {
            return Err(Error::Config("rig: rates must be positive".into()));
        }
        let ratio = r.sensor_rate / r.fsm_rate;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return Err(Error::Config("rig.sensor_rate must be a whole multiple of rig.fsm_rate".into()));
        }
        self.wrist_to_tag()?;
        let n = &self.noise;
        if !(n.pose_perturbation >= 0.0 && n.pose_perturbation.is_finite()) {
            return Err(Error::Config("noise.pose_perturbation must be >= 0".into()));
        }
        let c = &n.calibration;
        if c.enabled && (c.observations == 0 || !(c.translation_sigma >= 0.0) || !(c.rotation_sigma_deg >= 0.0)) {
            return Err(Error::Config("noise.calibration needs observations >= 1 and sigmas >= 0".into()));
        }
        if self.run.success_region.half_size.iter().any(|h| !(*h >= 0.0)) {
            return Err(Error::Config("run.success_region.half_size must be >= 0".into()));
        }
        for o in &self.world.objects {
            o.geometry.validate()?;
        }
        if !self.world.objects.iter().any(|o| o.label == self.policy.target) {
            return Err(Error::Config(format!("no object labeled `{}` in world.objects", self.policy.target)));
        }
        Ok(())
    }

    pub fn world_model(&self) -> WorldModel {
        WorldModel {
            table: self.world.table,
            objects: self
                .world
                .objects
                .iter()
                .map(|o| WorldObject::on_table(o.label.clone(), o.geometry.clone(), o.position, o.yaw, o.color))
                .collect(),
        }
    }

    pub fn wrist_to_tag(&self) -> Result<RigidTransform> {
        let o = &self.rig.wrist_to_tag;
        let [w, x, y, z] = o.rotation;
        let q = Quaternion::new(w, x, y, z);
        if !(q.norm() > 1e-9) || o.translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("rig.wrist_to_tag: rotation must be a nonzero quaternion".into()));
        }
        Ok(RigidTransform::new(
            UnitQuaternion::from_quaternion(q),
            Vec3::from(o.translation),
            Frame::TAG,
            Frame::WRIST,
        ))
    }
}

fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let line = e.span().map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
    Error::parse(line, e.message().trim().to_string())
}

/// Sets `path = value` in a TOML document, creating tables as needed.
pub fn apply_override(doc: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override `{spec}` has an empty key")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = keys.split_last().expect("split yields a key");
    let mut table = doc;
    for k in parents {
        let slot = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = slot
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{spec}`: `{k}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}
