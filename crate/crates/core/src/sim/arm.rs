//! Kinematic end effector: straight-line Cartesian moves, velocity
//! integration, finger apertures and rigid attachment of grasped objects.

use nalgebra::Isometry3;

use super::world::WorldModel;
use crate::error::{Error, Result};
use crate::grasp::{angle_diff, Command, Hand, HandGeometry, Limits};
use crate::tactile::FINGERS;

/// A grasped object and its fixed pose in the hand frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Attachment {
    pub object: usize,
    pub in_hand: Isometry3<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmState {
    pub hand: Hand,
    pub attached: Option<Attachment>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmParams {
    pub geometry: HandGeometry,
    pub limits: Limits,
    /// Fingers that must touch an object while closing for it to attach.
    pub required_contacts: usize,
    pub contact_tolerance: f64,
}

/// Height objects fall to when released off the table.
pub const FLOOR_Z: f64 = -0.75;

const PENETRATION_SLACK: f64 = 1e-6;
const BISECTIONS: usize = 30;

/// Advances the arm by `dt` under `cmd`. Fingertips cannot enter loose
/// objects: motion that would push one in stops at the surface. The table
/// does not block anything. Attached objects follow the hand, and opening
/// any finger lets them go.
pub fn step_arm(arm: &ArmState, cmd: &Command, dt: f64, world: &mut WorldModel, p: &ArmParams) -> Result<ArmState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let mut next = *arm;
    let start = arm.hand;
    match cmd {
        Command::Stop => return Ok(next),
        Command::Cartesian(goal) => {
            let speed = goal.max_speed.min(p.limits.max_cartesian_speed).max(0.0);
            let to = goal.position() - start.position;
            let dist = to.norm();
            let step = (speed * dt).min(dist);
            let mut target = start;
            if dist > 0.0 {
                target.position += to * (step / dist);
            }
            let turn = angle_diff(goal.yaw(), start.yaw);
            let max_turn = p.limits.max_yaw_rate * dt;
            target.yaw = start.yaw + turn.clamp(-max_turn, max_turn);
            next.hand = blocked_motion(&start, &target, world, arm.attached, p);
        }
        Command::Velocity(v) => {
            let speed = v.linear.norm();
            let scale = if speed > p.limits.max_velocity { p.limits.max_velocity / speed } else { 1.0 };
            let mut target = start;
            target.position += v.linear * scale * dt;
            next.hand = blocked_motion(&start, &target, world, arm.attached, p);
        }
        Command::Fingers(f) => {
            for i in 0..FINGERS {
                let rate = f.rates[i].clamp(-p.limits.max_finger_rate, p.limits.max_finger_rate);
                let wanted = (start.aperture[i] + rate * dt).clamp(p.geometry.min_aperture, p.geometry.max_aperture);
                next.hand.aperture[i] = blocked_finger(&next.hand, i, wanted, world, p);
            }
            let opening = f.rates.iter().any(|&r| r > 0.0);
            let closing = f.rates.iter().any(|&r| r < 0.0);
            if opening {
                if let Some(a) = next.attached.take() {
                    drop_object(world, a.object);
                }
            } else if closing && next.attached.is_none() {
                next.attached = try_attach(&next.hand, world, p);
            }
        }
    }
    if let Some(a) = next.attached {
        world.objects[a.object].pose = next.hand.isometry() * a.in_hand;
    }
    Ok(next)
}

/// Deepest fingertip penetration into any object other than `skip`.
fn penetration(hand: &Hand, world: &WorldModel, skip: Option<usize>, p: &ArmParams) -> f64 {
    let tips = hand.fingertips(&p.geometry);
    let mut worst: f64 = 0.0;
    for (k, o) in world.objects.iter().enumerate() {
        if Some(k) == skip {
            continue;
        }
        for tip in &tips {
            worst = worst.max(p.geometry.finger_radius - o.sdf(tip));
        }
    }
    worst
}

fn blocked_motion(start: &Hand, target: &Hand, world: &WorldModel, attached: Option<Attachment>, p: &ArmParams) -> Hand {
    let skip = attached.map(|a| a.object);
    let allowed = penetration(start, world, skip, p).max(PENETRATION_SLACK);
    let at = |s: f64| Hand {
        position: start.position + (target.position - start.position) * s,
        yaw: start.yaw + angle_diff(target.yaw, start.yaw) * s,
        aperture: start.aperture,
    };
    if penetration(target, world, skip, p) <= allowed {
        return *target;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if penetration(&at(mid), world, skip, p) <= allowed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(lo)
}

/// Fingers are blocked by every object, including a held one.
fn blocked_finger(hand: &Hand, i: usize, wanted: f64, world: &WorldModel, p: &ArmParams) -> f64 {
    let skip = None;
    let with = |a: f64| {
        let mut h = *hand;
        h.aperture[i] = a;
        h
    };
    let allowed = penetration(hand, world, skip, p).max(PENETRATION_SLACK);
    if penetration(&with(wanted), world, skip, p) <= allowed {
        return wanted;
    }
    let from = hand.aperture[i];
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if penetration(&with(from + (wanted - from) * mid), world, skip, p) <= allowed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    from + (wanted - from) * lo
}

fn try_attach(hand: &Hand, world: &WorldModel, p: &ArmParams) -> Option<Attachment> {
    let tips = hand.fingertips(&p.geometry);
    let mut best: Option<(usize, usize)> = None;
    for (k, o) in world.objects.iter().enumerate() {
        let touching = tips
            .iter()
            .filter(|t| o.sdf(t) - p.geometry.finger_radius <= p.contact_tolerance)
            .count();
        if touching >= p.required_contacts && best.is_none_or(|(_, n)| touching > n) {
            best = Some((k, touching));
        }
    }
    best.map(|(object, _)| Attachment {
        object,
        in_hand: hand.isometry().inverse() * world.objects[object].pose,
    })
}

/// Lets a released object fall straight down onto the table, or to the
/// floor when it is not over the table.
pub fn drop_object(world: &mut WorldModel, k: usize) {
    let pos = world.objects[k].position();
    let support = match &world.table {
        Some(t) if t.contains_xy(pos.x, pos.y) => 0.0,
        _ => FLOOR_Z,
    };
    let fall = world.objects[k].lowest_z() - support;
    world.objects[k].pose.translation.vector.z -= fall;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::grasp::{CartesianGoal, FingerCommand, VelocityCommand};
    use crate::sim::world::{ShapeSpec, Table, WorldObject};

    fn params() -> ArmParams {
        ArmParams {
            geometry: HandGeometry::default(),
            limits: Limits::default(),
            required_contacts: 2,
            contact_tolerance: 0.0005,
        }
    }

    fn free_arm() -> ArmState {
        ArmState {
            hand: Hand::new(Vec3::new(0.3, 0.0, 0.2), 0.0, 0.03),
            attached: None,
        }
    }

    #[test]
    fn stop_leaves_the_arm_alone() {
        let mut w = WorldModel::default();
        let a = free_arm();
        assert_eq!(step_arm(&a, &Command::Stop, 0.01, &mut w, &params()).unwrap(), a);
    }

    #[test]
    fn velocity_integrates_exactly() {
        let mut w = WorldModel::default();
        let mut a = free_arm();
        let v = Command::Velocity(VelocityCommand {
            linear: Vec3::new(0.01, 0.0, 0.0),
            duration: 0.01,
        });
        for _ in 0..100 {
            a = step_arm(&a, &v, 0.01, &mut w, &params()).unwrap();
        }
        assert!((a.hand.position.x - 0.31).abs() < 1e-9);
    }

    #[test]
    fn cartesian_moves_in_a_straight_line_at_bounded_speed() {
        let mut w = WorldModel::default();
        let mut a = free_arm();
        let goal = Command::Cartesian(CartesianGoal::new(Vec3::new(0.4, 0.1, 0.2), 0.0, 0.1));
        let start = a.hand.position;
        for _ in 0..150 {
            let next = step_arm(&a, &goal, 0.01, &mut w, &params()).unwrap();
            assert!((next.hand.position - a.hand.position).norm() <= 0.1 * 0.01 + 1e-12);
            let off_line = (next.hand.position - start).cross(&Vec3::new(1.0, 1.0, 0.0).normalize()).norm();
            assert!(off_line < 1e-12);
            a = next;
        }
        assert!((a.hand.position - Vec3::new(0.4, 0.1, 0.2)).norm() < 1e-12);
    }

    #[test]
    fn fingers_stop_at_objects_and_grasp_them() {
        let mut w = WorldModel {
            table: Some(Table::default()),
            objects: vec![WorldObject::on_table("bar", ShapeSpec::Box { size: [0.02, 0.06, 0.04] }, [0.45, 0.0], 0.0, [0; 3])],
        };
        let mut a = ArmState {
            hand: Hand::new(Vec3::new(0.45, 0.0, 0.02), 0.0, 0.03),
            attached: None,
        };
        let close = Command::Fingers(FingerCommand { rates: [-0.01; 3] });
        for _ in 0..300 {
            a = step_arm(&a, &close, 0.01, &mut w, &params()).unwrap();
        }
        let g = HandGeometry::default();
        for tip in a.hand.fingertips(&g) {
            let gap = w.objects[0].sdf(&tip) - g.finger_radius;
            assert!(gap >= -1e-6 && gap < 1e-4, "{gap}");
        }
        let held = a.attached.expect("attached");
        let lift = Command::Cartesian(CartesianGoal::new(Vec3::new(0.45, 0.05, 0.15), 0.3, 0.2));
        for _ in 0..200 {
            a = step_arm(&a, &lift, 0.01, &mut w, &params()).unwrap();
            let rel = a.hand.isometry().inverse() * w.objects[0].pose;
            assert!((rel.translation.vector - held.in_hand.translation.vector).norm() < 1e-9);
            assert!(rel.rotation.angle_to(&held.in_hand.rotation) < 1e-9);
        }
        let open = Command::Fingers(FingerCommand { rates: [0.01; 3] });
        a = step_arm(&a, &open, 0.01, &mut w, &params()).unwrap();
        assert!(a.attached.is_none());
        assert!(w.objects[0].lowest_z().abs() < 1e-12);
    }
}
