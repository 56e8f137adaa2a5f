use std::fmt;

use super::{
    angle_diff, close_fingers_step, guard_active, plan_approach, search_step, CartesianGoal, CloseStatus, Command,
    FingerCommand, GraspPolicy, Hand, HandGeometry, SearchStatus, Sweep, VelocityCommand,
};
use crate::geometry::Vec3;
use crate::recognition::PoseEstimate;
use crate::tactile::FINGERS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GraspState {
    Idle,
    Perceive,
    Approach,
    Search,
    Close,
    Lift,
    Transport,
    Place,
    Done,
    Restart,
}

impl GraspState {
    pub fn as_str(self) -> &'static str {
        match self {
            GraspState::Idle => "Idle",
            GraspState::Perceive => "Perceive",
            GraspState::Approach => "Approach",
            GraspState::Search => "Search",
            GraspState::Close => "Close",
            GraspState::Lift => "Lift",
            GraspState::Transport => "Transport",
            GraspState::Place => "Place",
            GraspState::Done => "Done",
            GraspState::Restart => "Restart",
        }
    }
}

impl fmt::Display for GraspState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A pose estimate for the target together with the table height under it,
/// both in the (estimated) base frame.
#[derive(Clone, Debug, PartialEq)]
pub struct PerceptionSnapshot {
    pub estimate: PoseEstimate,
    pub table_z: f64,
}

/// Everything the state machine sees at one tick.
#[derive(Clone, Debug)]
pub struct TickInputs<'a> {
    pub t: f64,
    /// Tick period.
    pub dt: f64,
    /// Latest perception result since the last request, if any.
    pub perception: Option<&'a PerceptionSnapshot>,
    pub touch: [bool; FINGERS],
    pub detected: [bool; FINGERS],
    pub hand: Hand,
    pub geometry: &'a HandGeometry,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub t: f64,
    pub from: GraspState,
    pub to: GraspState,
    pub reason: String,
}

impl fmt::Display for Transition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3} {} {} {}", self.t, self.from, self.to, self.reason)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TickOutput {
    pub command: Command,
    /// Run the perception pipeline and report through `TickInputs::perception`.
    pub request_perception: bool,
    /// Re-baseline the tactile channels from the frames just received.
    pub calibrate_tactile: bool,
    pub transition: Option<Transition>,
}

#[derive(Clone, Debug, PartialEq)]
struct Target {
    table_z: f64,
    goal: CartesianGoal,
}

#[derive(Clone, Debug, PartialEq)]
enum Phase {
    Idle,
    Waiting,
    Moving(CartesianGoal),
    Settle { since: f64, target_z: f64 },
    Descend { target_z: f64, lowest: f64, since: f64 },
    Sweep(Sweep),
    Center(CartesianGoal),
    Closing,
    Release,
    Opening,
    Retreat(CartesianGoal),
    Finished,
}

/// Grasp state machine. [`Fsm::tick`] is a pure function of the current
/// machine, the inputs and the policy.
#[derive(Clone, Debug, PartialEq)]
pub struct Fsm {
    state: GraspState,
    phase: Phase,
    attempt: u32,
    state_entered: f64,
    attempt_started: f64,
    target: Option<Target>,
    grasp_z: f64,
    success: Option<bool>,
}

impl Default for Fsm {
    fn default() -> Self {
        Self::new()
    }
}

impl Fsm {
    pub fn new() -> Self {
        Self {
            state: GraspState::Idle,
            phase: Phase::Idle,
            attempt: 0,
            state_entered: 0.0,
            attempt_started: 0.0,
            target: None,
            grasp_z: 0.0,
            success: None,
        }
    }

    pub fn state(&self) -> GraspState {
        self.state
    }

    /// Attempts started so far.
    pub fn attempt(&self) -> u32 {
        self.attempt
    }

    pub fn is_done(&self) -> bool {
        self.state == GraspState::Done
    }

    /// `Some(true)` after a completed place, `Some(false)` after giving up.
    pub fn success(&self) -> Option<bool> {
        self.success
    }

    /// Table height under the current target, if one is set.
    pub fn table_z(&self) -> Option<f64> {
        self.target.as_ref().map(|t| t.table_z)
    }

    pub fn tick(&self, inputs: &TickInputs, policy: &GraspPolicy) -> (Fsm, TickOutput) {
        let mut next = self.clone();
        let mut out = TickOutput {
            command: Command::Stop,
            request_perception: false,
            calibrate_tactile: false,
            transition: None,
        };
        next.step(inputs, policy, &mut out);
        if matches!(next.state, GraspState::Approach | GraspState::Search) {
            let table_z = next.table_z().unwrap_or(0.0);
            if guard_active(inputs.detected, &inputs.hand, inputs.geometry, table_z, policy) {
                clamp_descent(&mut out.command, &inputs.hand);
            }
        }
        (next, out)
    }

    fn enter(&mut self, to: GraspState, phase: Phase, t: f64, reason: impl Into<String>, out: &mut TickOutput) {
        out.transition = Some(Transition {
            t,
            from: self.state,
            to,
            reason: reason.into(),
        });
        self.state = to;
        self.phase = phase;
        self.state_entered = t;
        if to == GraspState::Perceive {
            self.target = None;
            out.request_perception = true;
        }
    }

    fn finish(&mut self, success: bool, t: f64, reason: &str, out: &mut TickOutput) {
        self.success = Some(success);
        self.enter(GraspState::Done, Phase::Finished, t, reason, out);
    }

    fn step(&mut self, inp: &TickInputs, policy: &GraspPolicy, out: &mut TickOutput) {
        let t = inp.t;
        let in_state = t - self.state_entered;
        let in_attempt = t - self.attempt_started;
        use GraspState::*;
        match self.state {
            Idle => {
                self.attempt = 1;
                self.attempt_started = t;
                self.enter(Perceive, Phase::Waiting, t, "task start", out);
                return;
            }
            Done => return,
            Restart => {
                if in_attempt > policy.attempt_timeout || in_state > policy.state_timeout {
                    self.decide_retry(t, "restart cut short", policy, out);
                    return;
                }
            }
            Perceive => {
                if in_state > policy.state_timeout {
                    self.finish(false, t, "no pose estimate", out);
                    return;
                }
            }
            _ => {
                let limit = if self.state == Search { policy.search.timeout } else { policy.state_timeout };
                if in_attempt > policy.attempt_timeout {
                    self.enter(Restart, Phase::Opening, t, "attempt timeout", out);
                    return;
                }
                if in_state > limit {
                    let reason = format!("{} timeout", self.state.as_str().to_lowercase());
                    self.enter(Restart, Phase::Opening, t, reason, out);
                    return;
                }
            }
        }

        match (self.state, self.phase.clone()) {
            (Perceive, _) => self.perceive(inp, policy, out),
            (Approach, Phase::Moving(goal)) => {
                if reached(&inp.hand, &goal, policy) {
                    let table_z = self.table_z().unwrap_or(0.0);
                    let work = if policy.search.enabled { policy.search.height } else { policy.grasp_height };
                    self.phase = Phase::Settle { since: t, target_z: table_z + work };
                } else {
                    out.command = Command::Cartesian(goal);
                }
            }
            (Approach | Search, Phase::Settle { since, target_z }) => {
                if t - since >= policy.settle_time {
                    out.calibrate_tactile = true;
                    self.phase = Phase::Descend {
                        target_z,
                        lowest: inp.hand.position.z,
                        since: t,
                    };
                }
            }
            (Approach | Search, Phase::Descend { target_z, lowest, since }) => {
                let table_z = self.table_z().unwrap_or(0.0);
                let z = inp.hand.position.z;
                let done = if guard_active(inp.detected, &inp.hand, inp.geometry, table_z, policy) {
                    Some("table guard")
                } else if z - target_z <= 1e-4 {
                    Some("height reached")
                } else if z >= lowest - 1e-4 && t - since > policy.stall_time {
                    Some("blocked")
                } else {
                    None
                };
                match done {
                    Some(why) if self.state == Approach => {
                        if policy.search.enabled {
                            let sweep = Sweep::new(inp.hand.position, inp.hand.yaw, &policy.search);
                            self.enter(Search, Phase::Sweep(sweep), t, why, out);
                        } else {
                            self.enter(Search, Phase::Waiting, t, why, out);
                        }
                    }
                    Some(why) => {
                        self.grasp_z = z;
                        self.enter(Close, Phase::Closing, t, format!("found, {why}"), out);
                    }
                    None => {
                        if z < lowest - 1e-4 {
                            self.phase = Phase::Descend { target_z, lowest: z, since: t };
                        }
                        let speed = policy.descend_speed.min((z - target_z) / inp.dt);
                        out.command = Command::Velocity(VelocityCommand {
                            linear: Vec3::new(0.0, 0.0, -speed),
                            duration: inp.dt,
                        });
                    }
                }
            }
            (Search, Phase::Waiting) => {
                self.grasp_z = inp.hand.position.z;
                self.enter(Close, Phase::Closing, t, "found, search disabled", out);
            }
            (Search, Phase::Sweep(mut sweep)) => {
                let (cmd, status) = search_step(&mut sweep, inp.detected, &inp.hand, inp.geometry, inp.dt, &policy.search);
                match status {
                    SearchStatus::Found(d) => {
                        let (hx, _) = inp.hand.axes();
                        let heading = Vec3::new(d.heading.x, d.heading.y, 0.0);
                        let heading = heading.try_normalize(1e-9).unwrap_or_else(Vec3::zeros);
                        let feature = d.tip + heading * policy.search.detect_lead;
                        let shift = (feature - inp.hand.position).dot(&hx);
                        let goal = CartesianGoal::new(inp.hand.position + hx * shift, inp.hand.yaw, policy.search.speed);
                        self.phase = Phase::Center(goal);
                    }
                    SearchStatus::NotFound => {
                        self.enter(Restart, Phase::Opening, t, "search region exhausted", out);
                    }
                    SearchStatus::Searching => {
                        out.command = cmd;
                        self.phase = Phase::Sweep(sweep);
                    }
                }
            }
            (Search, Phase::Center(goal)) => {
                if (inp.hand.position - goal.position()).norm() <= policy.search.center_tolerance {
                    let table_z = self.table_z().unwrap_or(0.0);
                    self.phase = Phase::Settle {
                        since: t,
                        target_z: table_z + policy.grasp_height,
                    };
                } else {
                    out.command = Command::Cartesian(goal);
                }
            }
            (Close, _) => {
                let (cmd, status) = close_fingers_step(inp.touch, &inp.hand, inp.geometry, policy);
                match status {
                    CloseStatus::Complete => {
                        let goal = CartesianGoal::new(
                            inp.hand.position + Vec3::new(0.0, 0.0, policy.lift_height),
                            inp.hand.yaw,
                            policy.transport_speed,
                        );
                        self.enter(Lift, Phase::Moving(goal), t, "grasp complete", out);
                    }
                    CloseStatus::Empty => self.enter(Restart, Phase::Opening, t, "empty grasp", out),
                    CloseStatus::Closing => out.command = cmd,
                }
            }
            (Lift | Transport | Place, Phase::Moving(goal)) => {
                if !reached(&inp.hand, &goal, policy) {
                    out.command = Command::Cartesian(goal);
                    return;
                }
                let p = inp.hand.position;
                match self.state {
                    Lift => {
                        let [x, y] = policy.place_position;
                        let goal = CartesianGoal::new(Vec3::new(x, y, p.z), inp.hand.yaw, policy.transport_speed);
                        self.enter(Transport, Phase::Moving(goal), t, "lifted", out);
                    }
                    Transport => {
                        let z = self.grasp_z + policy.place_clearance;
                        let goal = CartesianGoal::new(Vec3::new(p.x, p.y, z), inp.hand.yaw, policy.transport_speed);
                        self.enter(Place, Phase::Moving(goal), t, "over place position", out);
                    }
                    _ => self.phase = Phase::Release,
                }
            }
            (Place, Phase::Release) => match open_fingers(&inp.hand, policy, inp.dt) {
                Some(cmd) => out.command = cmd,
                None => self.finish(true, t, "placed", out),
            },
            (Restart, Phase::Opening) => match open_fingers(&inp.hand, policy, inp.dt) {
                Some(cmd) => out.command = cmd,
                None => {
                    let table_z = self.table_z().unwrap_or(0.0);
                    let mut p = inp.hand.position;
                    p.z = p.z.max(table_z + policy.retreat_height);
                    self.phase = Phase::Retreat(CartesianGoal::new(p, inp.hand.yaw, policy.approach_speed));
                }
            },
            (Restart, Phase::Retreat(goal)) => {
                if reached(&inp.hand, &goal, policy) {
                    self.decide_retry(t, "retreated", policy, out);
                } else {
                    out.command = Command::Cartesian(goal);
                }
            }
            (state, phase) => unreachable!("phase {phase:?} in state {state}"),
        }
    }

    fn perceive(&mut self, inp: &TickInputs, policy: &GraspPolicy, out: &mut TickOutput) {
        let Some(snap) = inp.perception else { return };
        if snap.estimate.label != policy.target || snap.estimate.confidence < policy.min_confidence {
            return;
        }
        match plan_approach(&snap.estimate, policy) {
            Ok(goal) => {
                self.target = Some(Target {
                    table_z: snap.table_z,
                    goal: goal.clone(),
                });
                self.enter(GraspState::Approach, Phase::Moving(goal), inp.t, "pose estimate", out);
            }
            Err(e) => {
                let reason = match e {
                    crate::Error::Unreachable(_) => "unreachable goal",
                    _ => "no feasible approach",
                };
                self.enter(GraspState::Restart, Phase::Opening, inp.t, reason, out);
            }
        }
    }

    fn decide_retry(&mut self, t: f64, why: &str, policy: &GraspPolicy, out: &mut TickOutput) {
        if self.attempt < policy.max_attempts {
            self.attempt += 1;
            self.attempt_started = t;
            self.enter(GraspState::Perceive, Phase::Waiting, t, format!("{why}, attempt {}", self.attempt), out);
        } else {
            self.finish(false, t, "attempts exhausted", out);
        }
    }
}

fn reached(hand: &Hand, goal: &CartesianGoal, policy: &GraspPolicy) -> bool {
    (hand.position - goal.position()).norm() <= policy.goal_tolerance
        && angle_diff(goal.yaw(), hand.yaw).abs() <= policy.goal_angle_tolerance_deg.to_radians()
}

fn open_fingers(hand: &Hand, policy: &GraspPolicy, dt: f64) -> Option<Command> {
    let mut rates = [0.0; FINGERS];
    for (r, a) in rates.iter_mut().zip(hand.aperture) {
        let gap = policy.open_aperture - a;
        if gap > 1e-6 {
            *r = policy.limits.max_finger_rate.min(gap / dt);
        }
    }
    if rates.iter().all(|&r| r == 0.0) {
        None
    } else {
        Some(Command::Fingers(FingerCommand { rates }))
    }
}

fn clamp_descent(cmd: &mut Command, hand: &Hand) {
    match cmd {
        Command::Velocity(v) => v.linear.z = v.linear.z.max(0.0),
        Command::Cartesian(g) if g.position().z < hand.position.z => {
            let mut p = *g.position();
            p.z = hand.position.z;
            *g = CartesianGoal::new(p, g.yaw(), g.max_speed);
        }
        _ => {}
    }
}
