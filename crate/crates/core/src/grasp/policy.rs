use serde::Deserialize;

use crate::error::{Error, Result};

/// Axis-aligned box the hand may be commanded into.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Workspace {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Default for Workspace {
    fn default() -> Self {
        Self {
            min: [0.15, -0.4, -0.05],
            max: [0.8, 0.4, 0.6],
        }
    }
}

impl Workspace {
    pub fn contains(&self, p: &crate::Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Speed limits shared by the planner and the arm.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    /// Cartesian goal speed, m/s.
    pub max_cartesian_speed: f64,
    /// Velocity command magnitude, m/s.
    pub max_velocity: f64,
    /// Per-finger aperture rate, m/s.
    pub max_finger_rate: f64,
    /// Heading rate, rad/s.
    pub max_yaw_rate: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_cartesian_speed: 0.25,
            max_velocity: 0.05,
            max_finger_rate: 0.02,
            max_yaw_rate: 2.0,
        }
    }
}

/// Tactile sweep around the estimated grasp point.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchParams {
    pub enabled: bool,
    /// Fingertip center height above the table while sweeping.
    pub height: f64,
    /// Extent across (hand x) and along (hand y) the sweep, meters.
    pub region: [f64; 2],
    /// Spacing of sweep lines along hand y.
    pub pitch: f64,
    pub speed: f64,
    /// Expected distance from a detecting fingertip to the feature ahead of it.
    pub detect_lead: f64,
    /// Goal tolerance when centering over a detected feature; tighter than
    /// the general one because the grasp depends on it.
    pub center_tolerance: f64,
    pub timeout: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            enabled: true,
            height: 0.024,
            region: [0.08, 0.08],
            pitch: 0.02,
            speed: 0.02,
            detect_lead: 0.006,
            center_tolerance: 0.001,
            timeout: 40.0,
        }
    }
}

/// How to grasp one target object, relative to its estimated pose.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraspPolicy {
    /// Label of the object to pick.
    pub target: String,
    /// Grasp point relative to the estimated centroid, in the object frame.
    pub grasp_offset: [f64; 3],
    /// Hand heading relative to the object heading, radians.
    pub approach_yaw: f64,
    /// Whether offsets and heading turn with the estimated object yaw.
    pub follow_rotation: bool,
    /// Minimum fingertip-center clearance above the estimated object top
    /// at the approach goal.
    pub standoff: f64,
    pub min_confidence: f64,
    pub approach_speed: f64,
    pub descend_speed: f64,
    pub search: SearchParams,
    /// Fingertip center height above the table at which to close.
    pub grasp_height: f64,
    /// Below this fingertip clearance over the table, a detection is
    /// attributed to the table and stops descent.
    pub table_margin: f64,
    pub settle_time: f64,
    pub close_speed: f64,
    pub open_aperture: f64,
    pub required_contacts: usize,
    pub max_attempts: u32,
    pub state_timeout: f64,
    pub attempt_timeout: f64,
    /// Hand held still this long without descending counts as blocked.
    pub stall_time: f64,
    pub goal_tolerance: f64,
    pub goal_angle_tolerance_deg: f64,
    pub lift_height: f64,
    pub transport_speed: f64,
    /// Where the object is carried to, base-frame xy.
    pub place_position: [f64; 2],
    /// Extra height above the grasp height when setting the object down.
    pub place_clearance: f64,
    /// Height the hand retreats to between attempts, above the table.
    pub retreat_height: f64,
    pub workspace: Workspace,
    pub limits: Limits,
}

impl Default for GraspPolicy {
    fn default() -> Self {
        Self {
            target: String::new(),
            grasp_offset: [0.0; 3],
            approach_yaw: 0.0,
            follow_rotation: true,
            standoff: 0.035,
            min_confidence: 0.5,
            approach_speed: 0.25,
            descend_speed: 0.02,
            search: SearchParams::default(),
            grasp_height: 0.009,
            table_margin: 0.012,
            settle_time: 0.1,
            close_speed: 0.005,
            open_aperture: 0.025,
            required_contacts: 3,
            max_attempts: 3,
            state_timeout: 10.0,
            attempt_timeout: 90.0,
            stall_time: 0.5,
            goal_tolerance: 0.005,
            goal_angle_tolerance_deg: 1.0,
            lift_height: 0.1,
            transport_speed: 0.1,
            place_position: [0.45, 0.0],
            place_clearance: 0.005,
            retreat_height: 0.12,
            workspace: Workspace::default(),
            limits: Limits::default(),
        }
    }
}

impl GraspPolicy {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("policy.{m}")));
        let finite = self.grasp_offset.iter().chain(&self.place_position).all(|v| v.is_finite())
            && self.approach_yaw.is_finite();
        if !finite {
            return bad("offsets must be finite");
        }
        if !(1..=3).contains(&self.required_contacts) {
            return bad("required_contacts must be 1, 2 or 3");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1");
        }
        let positive = [
            ("standoff", self.standoff),
            ("approach_speed", self.approach_speed),
            ("descend_speed", self.descend_speed),
            ("search.speed", self.search.speed),
            ("search.pitch", self.search.pitch),
            ("search.timeout", self.search.timeout),
            ("search.center_tolerance", self.search.center_tolerance),
            ("table_margin", self.table_margin),
            ("settle_time", self.settle_time),
            ("close_speed", self.close_speed),
            ("open_aperture", self.open_aperture),
            ("state_timeout", self.state_timeout),
            ("attempt_timeout", self.attempt_timeout),
            ("stall_time", self.stall_time),
            ("goal_tolerance", self.goal_tolerance),
            ("goal_angle_tolerance_deg", self.goal_angle_tolerance_deg),
            ("transport_speed", self.transport_speed),
            ("limits.max_cartesian_speed", self.limits.max_cartesian_speed),
            ("limits.max_velocity", self.limits.max_velocity),
            ("limits.max_finger_rate", self.limits.max_finger_rate),
            ("limits.max_yaw_rate", self.limits.max_yaw_rate),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        let non_negative = [
            ("search.region", self.search.region[0].min(self.search.region[1])),
            ("search.detect_lead", self.search.detect_lead),
            ("min_confidence", self.min_confidence),
            ("lift_height", self.lift_height),
            ("place_clearance", self.place_clearance),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must not be negative"));
            }
        }
        if self.approach_speed > self.limits.max_cartesian_speed
            || self.transport_speed > self.limits.max_cartesian_speed
            || self.descend_speed > self.limits.max_velocity
            || self.search.speed > self.limits.max_velocity
            || self.close_speed > self.limits.max_finger_rate
        {
            return bad("speeds must respect limits");
        }
        if self.target.is_empty() {
            return bad("target must name an object");
        }
        Ok(())
    }
}
