//! Reactive grasping: a coarse Cartesian approach to a pose estimate,
//! a tactile sweep for the grasp feature, guarded descent, contact-driven
//! finger closing and restart on failure.

mod fsm;
mod hand;
mod policy;

pub use fsm::{Fsm, GraspState, PerceptionSnapshot, TickInputs, TickOutput, Transition};
pub use hand::{angle_diff, Hand, HandGeometry};
pub use policy::{GraspPolicy, Limits, SearchParams, Workspace};

use crate::error::{Error, Result};
use crate::geometry::{yaw_rotation, Frame, RigidTransform, Vec3};
use crate::recognition::PoseEstimate;
use crate::tactile::FINGERS;

/// Move the hand along a straight line to `target` (hand frame → base).
#[derive(Clone, Debug, PartialEq)]
pub struct CartesianGoal {
    pub target: RigidTransform,
    pub max_speed: f64,
}

impl CartesianGoal {
    pub fn new(position: Vec3, yaw: f64, max_speed: f64) -> Self {
        Self {
            target: RigidTransform::new(yaw_rotation(yaw), position, Frame::HAND, Frame::BASE),
            max_speed,
        }
    }

    pub fn position(&self) -> &Vec3 {
        self.target.translation()
    }

    pub fn yaw(&self) -> f64 {
        self.target.yaw()
    }
}

/// Hold a linear hand velocity for one tick.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityCommand {
    pub linear: Vec3,
    pub duration: f64,
}

/// Per-finger aperture rates in m/s; negative closes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FingerCommand {
    pub rates: [f64; FINGERS],
}

#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    Cartesian(CartesianGoal),
    Velocity(VelocityCommand),
    Fingers(FingerCommand),
    Stop,
}

impl Command {
    /// Whether every speed in the command respects `limits`.
    pub fn within(&self, limits: &Limits) -> bool {
        const SLACK: f64 = 1e-9;
        match self {
            Command::Cartesian(g) => g.max_speed <= limits.max_cartesian_speed + SLACK,
            Command::Velocity(v) => v.linear.norm() <= limits.max_velocity + SLACK,
            Command::Fingers(f) => f.rates.iter().all(|r| r.abs() <= limits.max_finger_rate + SLACK),
            Command::Stop => true,
        }
    }

    /// Whether executing the command from `hand` would lower it.
    pub fn descends(&self, hand: &Hand) -> bool {
        match self {
            Command::Cartesian(g) => g.position().z < hand.position.z - 1e-12,
            Command::Velocity(v) => v.linear.z < 0.0,
            Command::Fingers(_) | Command::Stop => false,
        }
    }
}

/// Approach goal for a pose estimate: the object pose composed with the
/// policy offset and heading, raised if needed so the fingertips keep
/// `standoff` above the estimated object top.
pub fn plan_approach(pose: &PoseEstimate, policy: &GraspPolicy) -> Result<CartesianGoal> {
    if pose.confidence < policy.min_confidence {
        return Err(Error::InvalidArgument(format!(
            "pose confidence {:.3} is below {:.3}",
            pose.confidence, policy.min_confidence
        )));
    }
    let object_yaw = if policy.follow_rotation { pose.pose.yaw() } else { 0.0 };
    let center = pose.pose.translation();
    let mut p = center + yaw_rotation(object_yaw) * Vec3::from(policy.grasp_offset);
    let top = center.z + pose.half_extents.z;
    p.z = p.z.max(top + policy.standoff);
    if !policy.workspace.contains(&p) {
        return Err(Error::Unreachable(format!(
            "approach goal ({:.3}, {:.3}, {:.3}) is outside the workspace",
            p.x, p.y, p.z
        )));
    }
    Ok(CartesianGoal::new(p, object_yaw + policy.approach_yaw, policy.approach_speed))
}

/// True when some finger senses something while the fingertips are within
/// `table_margin` of the table: the detection is blamed on the table.
pub fn guard_active(detected: [bool; FINGERS], hand: &Hand, g: &HandGeometry, table_z: f64, policy: &GraspPolicy) -> bool {
    detected.iter().any(|&d| d) && hand.tip_bottom(g) - table_z < policy.table_margin
}

/// Where a sweep stands after a step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SearchStatus {
    Searching,
    Found(Detection),
    NotFound,
}

/// The first finger to sense the feature, where it was, and which way the
/// hand was moving (zero if it was still).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub finger: usize,
    pub tip: Vec3,
    pub heading: Vec3,
}

/// Boustrophedon sweep around a start point. Lines run across the hand
/// (hand x), are stepped along hand y from the center outwards on
/// alternating sides, and reverse direction each time.
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    waypoints: Vec<Vec3>,
    next: usize,
    heading: Vec3,
}

impl Sweep {
    pub fn new(origin: Vec3, yaw: f64, params: &SearchParams) -> Self {
        let [width, length] = params.region;
        let mut waypoints = Vec::new();
        if width > 0.0 && length >= 0.0 && params.pitch > 0.0 {
            let (s, c) = yaw.sin_cos();
            let (hx, hy) = (Vec3::new(c, s, 0.0), Vec3::new(-s, c, 0.0));
            let half_w = width / 2.0;
            let mut offsets = vec![0.0];
            let mut k = 1.0;
            while k * params.pitch <= length / 2.0 + 1e-9 {
                offsets.push(k * params.pitch);
                offsets.push(-k * params.pitch);
                k += 1.0;
            }
            let mut side = -1.0;
            for y in offsets {
                waypoints.push(origin + hx * (side * half_w) + hy * y);
                waypoints.push(origin + hx * (-side * half_w) + hy * y);
                side = -side;
            }
        }
        Self {
            waypoints,
            next: 0,
            heading: Vec3::zeros(),
        }
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.waypoints
    }

    pub fn is_exhausted(&self) -> bool {
        self.next >= self.waypoints.len()
    }
}

/// One tick of the sweep: stop as soon as any finger detects something,
/// otherwise head for the next waypoint at the sweep speed.
pub fn search_step(
    sweep: &mut Sweep,
    detected: [bool; FINGERS],
    hand: &Hand,
    g: &HandGeometry,
    dt: f64,
    params: &SearchParams,
) -> (Command, SearchStatus) {
    if let Some(finger) = detected.iter().position(|&d| d) {
        let tip = hand.fingertips(g)[finger];
        let found = Detection {
            finger,
            tip,
            heading: sweep.heading,
        };
        return (Command::Stop, SearchStatus::Found(found));
    }
    while let Some(w) = sweep.waypoints.get(sweep.next) {
        let to = w - hand.position;
        let dist = to.norm();
        if dist < 1e-5 {
            sweep.next += 1;
            continue;
        }
        let speed = params.speed.min(dist / dt);
        sweep.heading = to / dist;
        let cmd = VelocityCommand {
            linear: sweep.heading * speed,
            duration: dt,
        };
        return (Command::Velocity(cmd), SearchStatus::Searching);
    }
    (Command::Stop, SearchStatus::NotFound)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloseStatus {
    Closing,
    Complete,
    /// Every finger has stopped without enough contacts.
    Empty,
}

/// Closes every finger at `close_speed` until it touches something or
/// reaches its stop; complete once `required_contacts` fingers touch.
pub fn close_fingers_step(
    touch: [bool; FINGERS],
    hand: &Hand,
    g: &HandGeometry,
    policy: &GraspPolicy,
) -> (Command, CloseStatus) {
    let contacts = touch.iter().filter(|&&t| t).count();
    if contacts >= policy.required_contacts {
        return (Command::Stop, CloseStatus::Complete);
    }
    let mut rates = [0.0; FINGERS];
    for i in 0..FINGERS {
        if !touch[i] && hand.aperture[i] > g.min_aperture + 1e-9 {
            rates[i] = -policy.close_speed;
        }
    }
    if rates.iter().all(|&r| r == 0.0) {
        return (Command::Stop, CloseStatus::Empty);
    }
    (Command::Fingers(FingerCommand { rates }), CloseStatus::Closing)
}
