use std::f64::consts::FRAC_PI_2;

use vtgrasp::geometry::yaw_rotation;
use vtgrasp::grasp::{
    close_fingers_step, guard_active, plan_approach, search_step, CloseStatus, Command, Fsm, GraspPolicy, GraspState,
    Hand, HandGeometry, PerceptionSnapshot, SearchStatus, Sweep, TickInputs, Transition,
};
use vtgrasp::recognition::PoseEstimate;
use vtgrasp::{Error, Frame, RigidTransform, Vec3};

const DT: f64 = 0.01;

fn estimate(position: Vec3, yaw: f64) -> PoseEstimate {
    PoseEstimate {
        label: "spoon".into(),
        pose: RigidTransform::new(yaw_rotation(yaw), position, Frame::OBJECT, Frame::BASE),
        confidence: 1.0,
        rotation_valid: true,
        half_extents: Vec3::new(0.05, 0.02, 0.008),
    }
}

fn policy() -> GraspPolicy {
    GraspPolicy {
        target: "spoon".into(),
        ..GraspPolicy::default()
    }
}

#[test]
fn approach_goal_applies_offset_and_standoff() {
    let mut p = policy();
    p.grasp_offset = [0.0, 0.0, 0.1];
    let pose = estimate(Vec3::new(0.45, 0.0, 0.01), 0.0);
    let goal = plan_approach(&pose, &p).unwrap();
    assert!((goal.position() - Vec3::new(0.45, 0.0, 0.11)).norm() < 1e-12);
    assert!(goal.yaw().abs() < 1e-12);

    // A small vertical offset is raised to the standoff over the estimated top.
    p.grasp_offset = [0.0; 3];
    let goal = plan_approach(&pose, &p).unwrap();
    assert!((goal.position().z - (0.018 + p.standoff)).abs() < 1e-12);
}

#[test]
fn approach_goal_turns_with_object() {
    let mut p = policy();
    p.grasp_offset = [0.05, 0.0, 0.1];
    p.approach_yaw = 0.3;
    let center = Vec3::new(0.45, 0.0, 0.01);
    let goal = plan_approach(&estimate(center, FRAC_PI_2), &p).unwrap();
    assert!((goal.position() - Vec3::new(0.45, 0.05, 0.11)).norm() < 1e-12);
    assert!((goal.yaw() - (FRAC_PI_2 + 0.3)).abs() < 1e-12);

    p.follow_rotation = false;
    let goal = plan_approach(&estimate(center, FRAC_PI_2), &p).unwrap();
    assert!((goal.position() - Vec3::new(0.5, 0.0, 0.11)).norm() < 1e-12);
}

#[test]
fn approach_rejects_unreachable_and_unsure_poses() {
    let p = policy();
    let far = estimate(Vec3::new(1.5, 0.0, 0.01), 0.0);
    assert!(matches!(plan_approach(&far, &p), Err(Error::Unreachable(_))));
    let mut unsure = estimate(Vec3::new(0.45, 0.0, 0.01), 0.0);
    unsure.confidence = 0.1;
    assert!(matches!(plan_approach(&unsure, &p), Err(Error::InvalidArgument(_))));
}

#[test]
fn sweep_stays_inside_region() {
    let p = policy();
    let origin = Vec3::new(0.4, 0.1, 0.02);
    let sweep = Sweep::new(origin, 0.7, &p.search);
    assert_eq!(sweep.waypoints().len(), 10);
    let (s, c) = 0.7f64.sin_cos();
    for w in sweep.waypoints() {
        let d = w - origin;
        let (x, y) = (d.x * c + d.y * s, -d.x * s + d.y * c);
        assert!(x.abs() <= 0.04 + 1e-12 && y.abs() <= 0.04 + 1e-12);
        assert_eq!(d.z, 0.0);
    }
}

#[test]
fn search_stops_on_detection() {
    let p = policy();
    let g = HandGeometry::default();
    let hand = Hand::new(Vec3::new(0.45, 0.0, 0.02), 0.0, 0.025);
    let mut sweep = Sweep::new(hand.position, hand.yaw, &p.search);
    let (cmd, status) = search_step(&mut sweep, [false, true, false], &hand, &g, DT, &p.search);
    assert_eq!(cmd, Command::Stop);
    match status {
        SearchStatus::Found(d) => {
            assert_eq!(d.finger, 1);
            assert_eq!(d.tip, hand.fingertips(&g)[1]);
        }
        other => panic!("expected Found, got {other:?}"),
    }
}

#[test]
fn empty_region_is_not_found() {
    let mut p = policy();
    p.search.region = [0.0, 0.0];
    let g = HandGeometry::default();
    let hand = Hand::new(Vec3::new(0.45, 0.0, 0.02), 0.0, 0.025);
    let mut sweep = Sweep::new(hand.position, hand.yaw, &p.search);
    assert!(sweep.is_exhausted());
    let (cmd, status) = search_step(&mut sweep, [false; 3], &hand, &g, DT, &p.search);
    assert_eq!(cmd, Command::Stop);
    assert_eq!(status, SearchStatus::NotFound);
}

#[test]
fn sweep_moves_within_speed_and_finishes() {
    let p = policy();
    let g = HandGeometry::default();
    let mut hand = Hand::new(Vec3::new(0.45, 0.0, 0.02), 0.0, 0.025);
    let mut sweep = Sweep::new(hand.position, hand.yaw, &p.search);
    let mut ticks = 0;
    loop {
        let (cmd, status) = search_step(&mut sweep, [false; 3], &hand, &g, DT, &p.search);
        match (cmd, status) {
            (Command::Velocity(v), SearchStatus::Searching) => {
                assert!(v.linear.norm() <= p.search.speed + 1e-12);
                hand.position += v.linear * DT;
            }
            (Command::Stop, SearchStatus::NotFound) => break,
            other => panic!("unexpected {other:?}"),
        }
        ticks += 1;
        assert!(ticks < 10_000);
    }
    // Five 8 cm lines plus 24 cm of moves between them, alternating sides
    // of the start, at 2 cm/s.
    let t = ticks as f64 * DT;
    assert!((t - 32.0).abs() < 0.2, "sweep took {t}");
}

#[test]
fn close_follows_contact_timeline() {
    let mut p = policy();
    p.required_contacts = 2;
    let g = HandGeometry::default();
    let mut hand = Hand::new(Vec3::new(0.45, 0.0, 0.01), 0.0, 0.03);
    let mut frozen = None;
    let mut completed = None;
    for k in 0..100 {
        let touch = [k >= 30, k >= 50, false];
        let (cmd, status) = close_fingers_step(touch, &hand, &g, &p);
        match status {
            CloseStatus::Complete => {
                assert_eq!(cmd, Command::Stop);
                completed = Some(k);
                break;
            }
            CloseStatus::Closing => {
                let Command::Fingers(f) = cmd else { panic!("expected finger rates") };
                assert_eq!(f.rates[2], -p.close_speed);
                if k >= 30 {
                    assert_eq!(f.rates[0], 0.0);
                    frozen.get_or_insert(hand.aperture[0]);
                } else {
                    assert_eq!(f.rates[0], -p.close_speed);
                }
                for i in 0..3 {
                    hand.aperture[i] += f.rates[i] * DT;
                }
            }
            CloseStatus::Empty => panic!("closed empty"),
        }
    }
    assert_eq!(completed, Some(50));
    assert_eq!(Some(hand.aperture[0]), frozen);
    assert!((hand.aperture[0] - (0.03 - 30.0 * DT * p.close_speed)).abs() < 1e-12);
}

#[test]
fn close_without_contact_runs_empty() {
    let p = policy();
    let g = HandGeometry::default();
    let hand = Hand::new(Vec3::zeros(), 0.0, g.min_aperture);
    let (cmd, status) = close_fingers_step([false; 3], &hand, &g, &p);
    assert_eq!(cmd, Command::Stop);
    assert_eq!(status, CloseStatus::Empty);
}

#[test]
fn command_checks() {
    let p = policy();
    let hand = Hand::new(Vec3::new(0.0, 0.0, 0.1), 0.0, 0.02);
    let up = Command::Velocity(vtgrasp::grasp::VelocityCommand {
        linear: Vec3::new(0.0, 0.0, 0.01),
        duration: DT,
    });
    let fast_down = Command::Velocity(vtgrasp::grasp::VelocityCommand {
        linear: Vec3::new(0.0, 0.0, -1.0),
        duration: DT,
    });
    assert!(up.within(&p.limits) && !up.descends(&hand));
    assert!(!fast_down.within(&p.limits) && fast_down.descends(&hand));
    assert!(Command::Stop.within(&p.limits) && !Command::Stop.descends(&hand));
}

/// Scripted sensing for one tick: touch flags, detection flags, and
/// whether perception answers a pending request.
struct Sensed {
    touch: [bool; 3],
    detected: [bool; 3],
    pose: bool,
}

struct Run {
    transitions: Vec<Transition>,
    hand: Hand,
    fsm: Fsm,
    guarded_descents: usize,
}

/// Drives the machine against an ideal hand that follows every command
/// exactly, up to `t_max` seconds or until `stop` says so.
fn drive(
    policy: &GraspPolicy,
    snapshot: &PerceptionSnapshot,
    t_max: f64,
    mut sense: impl FnMut(GraspState, &Hand) -> Sensed,
    stop: impl Fn(&[Transition]) -> bool,
) -> Run {
    let g = HandGeometry::default();
    let mut fsm = Fsm::new();
    let mut hand = Hand::new(Vec3::new(0.45, 0.0, 0.3), 0.0, policy.open_aperture);
    let mut transitions = Vec::new();
    let mut pending = false;
    let mut guarded_descents = 0;
    let mut k = 0u64;
    loop {
        let t = k as f64 * DT;
        if t > t_max || fsm.is_done() || stop(&transitions) {
            break;
        }
        let s = sense(fsm.state(), &hand);
        let answer = pending && s.pose;
        let inputs = TickInputs {
            t,
            dt: DT,
            perception: answer.then_some(snapshot),
            touch: s.touch,
            detected: s.detected,
            hand,
            geometry: &g,
        };
        let (next, out) = fsm.tick(&inputs, policy);
        if answer {
            pending = false;
        }
        pending |= out.request_perception;
        if matches!(next.state(), GraspState::Approach | GraspState::Search)
            && guard_active(s.detected, &hand, &g, next.table_z().unwrap_or(0.0), policy)
        {
            assert!(!out.command.descends(&hand), "descent while guarded at t={t}");
            guarded_descents += 1;
        }
        assert!(out.command.within(&policy.limits));
        apply(&mut hand, &out.command, &g, policy);
        transitions.extend(out.transition);
        fsm = next;
        k += 1;
    }
    Run {
        transitions,
        hand,
        fsm,
        guarded_descents,
    }
}

fn apply(hand: &mut Hand, cmd: &Command, g: &HandGeometry, policy: &GraspPolicy) {
    match cmd {
        Command::Cartesian(goal) => {
            let step = goal.max_speed.min(policy.limits.max_cartesian_speed) * DT;
            let to = goal.position() - hand.position;
            hand.position += if to.norm() <= step { to } else { to * (step / to.norm()) };
            hand.yaw = goal.yaw();
        }
        Command::Velocity(v) => hand.position += v.linear * v.duration,
        Command::Fingers(f) => {
            for (a, r) in hand.aperture.iter_mut().zip(f.rates) {
                *a = (*a + r * DT).clamp(g.min_aperture, g.max_aperture);
            }
        }
        Command::Stop => {}
    }
}

fn snapshot() -> PerceptionSnapshot {
    PerceptionSnapshot {
        estimate: estimate(Vec3::new(0.45, 0.0, 0.008), 0.0),
        table_z: 0.0,
    }
}

fn quiet(pose: bool) -> Sensed {
    Sensed {
        touch: [false; 3],
        detected: [false; 3],
        pose,
    }
}

fn path(transitions: &[Transition]) -> Vec<(GraspState, &str)> {
    transitions.iter().map(|t| (t.to, t.reason.as_str())).collect()
}

#[test]
fn perceive_times_out_without_pose() {
    let p = policy();
    let run = drive(&p, &snapshot(), 60.0, |_, _| quiet(false), |_| false);
    assert_eq!(
        path(&run.transitions),
        [(GraspState::Perceive, "task start"), (GraspState::Done, "no pose estimate")]
    );
    assert!(run.transitions[1].t > p.state_timeout);
    assert_eq!(run.fsm.success(), Some(false));
}

#[test]
fn exhausted_search_restarts_with_new_attempt() {
    let p = policy();
    let run = drive(
        &p,
        &snapshot(),
        200.0,
        |_, _| quiet(true),
        |tr| tr.iter().filter(|t| t.to == GraspState::Perceive).count() == 2,
    );
    assert_eq!(
        path(&run.transitions),
        [
            (GraspState::Perceive, "task start"),
            (GraspState::Approach, "pose estimate"),
            (GraspState::Search, "height reached"),
            (GraspState::Restart, "search region exhausted"),
            (GraspState::Perceive, "retreated, attempt 2"),
        ]
    );
    assert_eq!(run.fsm.attempt(), 2);
    // Retreat keeps the hand above the retreat height.
    assert!(run.hand.position.z >= p.retreat_height - p.goal_tolerance);
}

#[test]
fn close_watchdog_restarts() {
    let mut p = policy();
    p.search.enabled = false;
    p.close_speed = 1e-4;
    let run = drive(
        &p,
        &snapshot(),
        200.0,
        |_, _| quiet(true),
        |tr| tr.iter().any(|t| t.to == GraspState::Restart),
    );
    let last = run.transitions.last().unwrap();
    assert_eq!((last.from, last.to, last.reason.as_str()), (GraspState::Close, GraspState::Restart, "close timeout"));
    let entered = run.transitions.iter().find(|t| t.to == GraspState::Close).unwrap();
    assert!(last.t - entered.t > p.state_timeout);
}

#[test]
fn repeated_failure_ends_after_max_attempts() {
    let mut p = policy();
    p.search.enabled = false;
    let run = drive(&p, &snapshot(), 500.0, |_, _| quiet(true), |_| false);
    let restarts: Vec<_> = run.transitions.iter().filter(|t| t.to == GraspState::Restart).collect();
    assert_eq!(restarts.len(), p.max_attempts as usize);
    assert!(restarts.iter().all(|t| t.reason == "empty grasp"));
    let last = run.transitions.last().unwrap();
    assert_eq!((last.to, last.reason.as_str()), (GraspState::Done, "attempts exhausted"));
    assert_eq!(run.fsm.attempt(), p.max_attempts);
    assert_eq!(run.fsm.success(), Some(false));
}

fn scripted_grasp(p: &GraspPolicy) -> Run {
    drive(
        p,
        &snapshot(),
        200.0,
        |state, hand| Sensed {
            // Fingers meet the object once they have closed 5 mm.
            touch: [state == GraspState::Close && hand.aperture[0] < p.open_aperture - 0.005; 3],
            detected: [false; 3],
            pose: true,
        },
        |_| false,
    )
}

#[test]
fn scripted_grasp_completes() {
    let mut p = policy();
    p.search.enabled = false;
    p.place_position = [0.4, 0.1];
    let run = scripted_grasp(&p);
    let states: Vec<_> = run.transitions.iter().map(|t| t.to).collect();
    use GraspState::*;
    assert_eq!(states, [Perceive, Approach, Search, Close, Lift, Transport, Place, Done]);
    assert_eq!(run.fsm.success(), Some(true));
    assert_eq!(run.fsm.attempt(), 1);
    assert!((run.hand.position.xy() - Vec3::new(0.4, 0.1, 0.0).xy()).norm() <= p.goal_tolerance);
    assert!(run.hand.aperture.iter().all(|&a| (a - p.open_aperture).abs() < 1e-6));
}

#[test]
fn identical_inputs_give_identical_traces() {
    let mut p = policy();
    p.search.enabled = false;
    let a = scripted_grasp(&p);
    let b = scripted_grasp(&p);
    assert_eq!(a.transitions, b.transitions);
    assert_eq!(a.hand, b.hand);
    assert_eq!(a.fsm, b.fsm);
}

#[test]
fn table_guard_blocks_descent() {
    let mut p = policy();
    p.search.enabled = false;
    // Everything reads as detected below 2 cm, so the guard trips on the way down.
    let run = drive(
        &p,
        &snapshot(),
        120.0,
        |_, hand| Sensed {
            touch: [false; 3],
            detected: [hand.position.z < 0.02; 3],
            pose: true,
        },
        |tr| tr.iter().any(|t| t.to == GraspState::Search),
    );
    let last = run.transitions.last().unwrap();
    assert_eq!((last.to, last.reason.as_str()), (GraspState::Search, "table guard"));
    assert!(run.hand.position.z - HandGeometry::default().finger_radius >= p.table_margin - p.descend_speed * DT);
    assert!(run.guarded_descents > 0);
}
