//! Closed-loop scenario execution: rendering, perception and recognition
//! feed the grasp state machine, whose commands drive the simulated arm
//! while the fingertip sensors stream through the tactile detectors.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::arm::{step_arm, ArmParams, ArmState};
use super::proximity::{fingertip_gap, ProximitySensor};
use super::render::{look_at, render_cloud, RenderParams};
use super::scenario::Scenario;
use super::world::WorldModel;
use crate::calibration::{calibration_error, simulate_observations, solve_batch, ObservationNoise};
use crate::error::{Error, Result};
use crate::geometry::{Frame, RigidTransform, Vec3};
use crate::grasp::{guard_active, Fsm, GraspState, Hand, PerceptionSnapshot, TickInputs, Transition};
use crate::perception::segment_scene;
use crate::recognition::{recognize_cluster, ObjectTemplate};
use crate::tactile::{ChannelState, TactileEvent, TactileFrame, FINGERS, MIN_CALIBRATION_FRAMES};

/// Seed for template captures, shared by every run of a scenario.
pub const TEMPLATE_SEED: u64 = 0x7e3a_11;

/// Simulated time allowed past the attempt bound before a run is cut off.
const LIVENESS_SLACK: f64 = 1.0;

/// A released object counts as resting when its lowest point is this close
/// to the table top.
const REST_TOLERANCE: f64 = 0.001;

// Independent random streams per purpose, so changing one consumer leaves
// the others untouched.
const STREAM_CALIBRATION: u64 = 1;
const STREAM_PERTURBATION: u64 = 2;
const STREAM_RENDER: u64 = 3;
const STREAM_PROXIMITY: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinalPose {
    pub label: String,
    pub position: Vec3,
    pub yaw: f64,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub seed: u64,
    /// The success region criterion held at the end of the run.
    pub success: bool,
    pub attempts: u32,
    pub final_state: GraspState,
    /// Simulated seconds.
    pub sim_time: f64,
    /// The run hit the liveness bound before reaching Done.
    pub timed_out: bool,
    pub transitions: Vec<Transition>,
    pub events: Vec<TactileEvent>,
    pub final_poses: Vec<FinalPose>,
    /// Ticks whose command broke a speed limit or descended under an
    /// active table guard.
    pub safety_violations: usize,
    /// Smallest gap between a fingertip and the table over the run.
    pub min_table_clearance: f64,
    /// Translation (m) and rotation (deg) error of the camera estimate.
    pub calibration_error: (f64, f64),
    pub overrides: Vec<String>,
    pub wall_time: Duration,
}

impl RunReport {
    /// `t from to reason`, one line per transition.
    pub fn trace_log(&self) -> String {
        self.transitions.iter().map(|t| format!("{t}\n")).collect()
    }

    pub fn events_csv(&self) -> String {
        let mut out = String::from("t,finger,kind\n");
        for e in &self.events {
            let _ = writeln!(out, "{:.3},{},{}", e.t, e.finger, e.kind);
        }
        out
    }

    /// `key=value` summary. Excludes wall time so that reruns are
    /// byte-identical.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "success={}", self.success);
        let _ = writeln!(out, "attempts={}", self.attempts);
        let _ = writeln!(out, "final_state={}", self.final_state);
        let _ = writeln!(out, "sim_time={:.3}", self.sim_time);
        let _ = writeln!(out, "timed_out={}", self.timed_out);
        let _ = writeln!(out, "transitions={}", self.transitions.len());
        let _ = writeln!(out, "events={}", self.events.len());
        let _ = writeln!(out, "safety_violations={}", self.safety_violations);
        let _ = writeln!(out, "min_table_clearance={:.6}", self.min_table_clearance);
        let _ = writeln!(out, "calibration_translation_error={:.6}", self.calibration_error.0);
        let _ = writeln!(out, "calibration_rotation_error_deg={:.4}", self.calibration_error.1);
        for p in &self.final_poses {
            let v = p.position;
            let _ = writeln!(out, "final_pose.{}={:.6} {:.6} {:.6} {:.6}", p.label, v.x, v.y, v.z, p.yaw);
        }
        for o in &self.overrides {
            let _ = writeln!(out, "override={o}");
        }
        out
    }

    /// Writes `trace.log`, `events.csv`, `report.txt` and `timing.txt`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = [
            ("trace.log", self.trace_log()),
            ("events.csv", self.events_csv()),
            ("report.txt", self.summary()),
            ("timing.txt", format!("wall_time_s={:.6}\n", self.wall_time.as_secs_f64())),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// One row per run plus a header.
pub fn batch_csv(reports: &[RunReport]) -> String {
    let mut out = String::from("seed,success,attempts,sim_time,final_state,safety_violations,min_table_clearance\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{:.3},{},{},{:.6}",
            r.seed, r.success, r.attempts, r.sim_time, r.final_state, r.safety_violations, r.min_table_clearance
        );
    }
    out
}

pub fn success_rate(reports: &[RunReport]) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().filter(|r| r.success).count() as f64 / reports.len() as f64
}

/// Captures one template per distinct label: each object rendered alone at
/// its scenario position with yaw 0, seen by the true camera.
pub fn build_templates(s: &Scenario) -> Result<Vec<ObjectTemplate>> {
    s.validate()?;
    let camera = true_camera(s)?;
    let params = render_params(s);
    let mut out: Vec<ObjectTemplate> = Vec::new();
    for spec in &s.world.objects {
        if out.iter().any(|t| t.label == spec.label) {
            continue;
        }
        let mut alone = spec.clone();
        alone.yaw = 0.0;
        let world = WorldModel {
            table: s.world.table,
            objects: vec![super::world::WorldObject::on_table(
                alone.label.clone(),
                alone.geometry.clone(),
                alone.position,
                0.0,
                alone.color,
            )],
        };
        let cloud = render_cloud(&world, &camera, &params, TEMPLATE_SEED)?.transformed(&camera)?;
        let seg = segment_scene(&cloud, &s.perception, TEMPLATE_SEED)?;
        let largest = seg
            .cluster_clouds()
            .into_iter()
            .max_by_key(|c| c.len())
            .ok_or_else(|| Error::Config(format!("template capture of `{}` found no cluster", spec.label)))?;
        out.push(ObjectTemplate::build(spec.label.clone(), largest.relabeled(Frame::OBJECT), &s.recognition)?);
    }
    Ok(out)
}

fn true_camera(s: &Scenario) -> Result<RigidTransform> {
    look_at(Vec3::from(s.rig.camera.eye), Vec3::from(s.rig.camera.target), Vec3::z())
}

fn render_params(s: &Scenario) -> RenderParams {
    RenderParams {
        density: s.rig.density,
        depth_noise: s.rig.depth_noise,
    }
}

/// Builds templates and runs the scenario once.
pub fn run_scenario(s: &Scenario) -> Result<RunReport> {
    let templates = build_templates(s)?;
    run_with_templates(s, &templates, &[])
}

/// Runs seeds `s.run.seed .. s.run.seed + n` in parallel, sharing one set
/// of templates. Reports come back in seed order.
pub fn run_batch(s: &Scenario, n: usize, overrides: &[String]) -> Result<Vec<RunReport>> {
    let templates = build_templates(s)?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut one = s.clone();
            one.run.seed = s.run.seed.wrapping_add(i);
            run_with_templates(&one, &templates, overrides)
        })
        .collect()
}

fn criterion_met(s: &Scenario, world: &WorldModel, held: bool) -> bool {
    let Some(o) = world.object(&s.policy.target) else {
        return false;
    };
    !held && o.lowest_z().abs() <= REST_TOLERANCE && s.run.success_region.contains(&o.position())
}

struct Perceiver<'a> {
    s: &'a Scenario,
    templates: &'a [ObjectTemplate],
    camera: RigidTransform,
    estimate: RigidTransform,
    bias: Vec3,
    rng: ChaCha8Rng,
}

impl Perceiver<'_> {
    /// Best recognized instance of the policy target, in the base frame as
    /// the robot believes it.
    fn perceive(&mut self, world: &WorldModel) -> Result<Option<PerceptionSnapshot>> {
        let seed: u64 = self.rng.random();
        let cloud = render_cloud(world, &self.camera, &render_params(self.s), seed)?;
        let cloud = cloud.transformed(&self.estimate)?;
        let seg = segment_scene(&cloud, &self.s.perception, seed)?;
        let mut best: Option<(f64, crate::recognition::PoseEstimate)> = None;
        for c in seg.cluster_clouds() {
            let r = recognize_cluster(&c, self.templates, &self.s.recognition)?;
            if let Some(e) = r.estimate {
                if e.label == self.s.policy.target && best.as_ref().is_none_or(|(score, _)| r.score > *score) {
                    best = Some((r.score, e));
                }
            }
        }
        let Some((_, mut estimate)) = best else {
            return Ok(None);
        };
        let t = estimate.pose.translation() + self.bias;
        estimate.pose = RigidTransform::new(
            *estimate.pose.rotation(),
            t,
            estimate.pose.from_frame().clone(),
            estimate.pose.to_frame().clone(),
        );
        let table_z = match seg.plane {
            Some(p) if p.normal.z.abs() > 1e-6 => (p.offset - p.normal.x * t.x - p.normal.y * t.y) / p.normal.z,
            _ => 0.0,
        };
        Ok(Some(PerceptionSnapshot { estimate, table_z }))
    }
}

/// Runs one scenario against prebuilt templates. `overrides` are only
/// echoed into the report.
pub fn run_with_templates(s: &Scenario, templates: &[ObjectTemplate], overrides: &[String]) -> Result<RunReport> {
    s.validate()?;
    let started = Instant::now();
    let seed = s.run.seed;
    let mut world = s.world_model();
    let camera = true_camera(s)?;
    let g = s.rig.hand;
    let policy = &s.policy;

    let estimate = if s.noise.calibration.enabled {
        let c = &s.noise.calibration;
        let noise = ObservationNoise {
            translation_sigma: c.translation_sigma,
            rotation_sigma_deg: c.rotation_sigma_deg,
        };
        let wrist_to_tag = s.wrist_to_tag()?;
        let mut rng = stream(seed, STREAM_CALIBRATION);
        let bounds = (Vec3::new(0.3, -0.15, 0.15), Vec3::new(0.6, 0.15, 0.4));
        let obs = simulate_observations(&camera, &wrist_to_tag, c.observations, bounds, noise, &mut rng)?;
        solve_batch(&obs, &wrist_to_tag)?.base_to_camera
    } else {
        camera.clone()
    };
    let calibration_error = calibration_error(&estimate, &camera)?;
    let bias = {
        let angle = stream(seed, STREAM_PERTURBATION).random_range(-std::f64::consts::PI..std::f64::consts::PI);
        Vec3::new(angle.cos(), angle.sin(), 0.0) * s.noise.pose_perturbation
    };

    let mut report = RunReport {
        seed,
        success: false,
        attempts: 0,
        final_state: GraspState::Idle,
        sim_time: 0.0,
        timed_out: false,
        transitions: Vec::new(),
        events: Vec::new(),
        final_poses: Vec::new(),
        safety_violations: 0,
        min_table_clearance: f64::INFINITY,
        calibration_error,
        overrides: overrides.to_vec(),
        wall_time: Duration::ZERO,
    };

    if criterion_met(s, &world, false) {
        report.success = true;
        report.final_state = GraspState::Done;
        report.transitions.push(Transition {
            t: 0.0,
            from: GraspState::Idle,
            to: GraspState::Done,
            reason: "already in place".into(),
        });
        report.final_poses = final_poses(&world);
        report.min_table_clearance = table_clearance(&world, &hand_at_home(s), &s.rig.hand);
        report.wall_time = started.elapsed();
        return Ok(report);
    }

    let mut perceiver = Perceiver {
        s,
        templates,
        camera,
        estimate,
        bias,
        rng: stream(seed, STREAM_RENDER),
    };
    let mut sensor = ProximitySensor::new(s.rig.proximity, stream(seed, STREAM_PROXIMITY).random())?;
    let mut channels = ChannelState::new(s.tactile.clone())?;
    let arm_params = ArmParams {
        geometry: g,
        limits: policy.limits,
        required_contacts: policy.required_contacts,
        contact_tolerance: s.rig.proximity.contact_tolerance,
    };
    let mut arm = ArmState {
        hand: hand_at_home(s),
        attached: None,
    };
    let substeps = (s.rig.sensor_rate / s.rig.fsm_rate).round() as u64;
    let dt = 1.0 / s.rig.fsm_rate;
    let window = ((policy.settle_time * s.rig.sensor_rate).round() as usize).max(MIN_CALIBRATION_FRAMES);
    let mut recent: VecDeque<TactileFrame> = VecDeque::with_capacity(window);
    let bound = policy.max_attempts as f64 * policy.attempt_timeout + LIVENESS_SLACK;

    let mut fsm = Fsm::new();
    let mut snapshot: Option<PerceptionSnapshot> = None;
    let mut tick: u64 = 0;
    let mut sample: u64 = 0;
    report.min_table_clearance = table_clearance(&world, &arm.hand, &g);
    loop {
        let t = tick as f64 * dt;
        if fsm.is_done() {
            break;
        }
        if t > bound {
            report.timed_out = true;
            break;
        }
        let (touch, detected) = if channels.is_calibrated() {
            (channels.touch(), channels.detected())
        } else {
            ([false; FINGERS], [false; FINGERS])
        };
        let inputs = TickInputs {
            t,
            dt,
            perception: snapshot.as_ref(),
            touch,
            detected,
            hand: arm.hand,
            geometry: &g,
        };
        let (next, out) = fsm.tick(&inputs, policy);

        let guarded = matches!(next.state(), GraspState::Approach | GraspState::Search)
            && guard_active(detected, &arm.hand, &g, next.table_z().unwrap_or(0.0), policy);
        if !out.command.within(&policy.limits) || (guarded && out.command.descends(&arm.hand)) {
            report.safety_violations += 1;
        }
        if let Some(tr) = out.transition {
            report.transitions.push(tr);
        }
        if out.request_perception {
            snapshot = perceiver.perceive(&world)?;
        }
        if out.calibrate_tactile {
            let frames: Vec<TactileFrame> = recent.iter().copied().collect();
            channels.calibrate(&frames)?;
        }

        for _ in 0..substeps {
            arm = step_arm(&arm, &out.command, dt / substeps as f64, &mut world, &arm_params)?;
            sample += 1;
            let ts = sample as f64 / s.rig.sensor_rate;
            let tips = arm.hand.fingertips(&g);
            let gaps: [f64; FINGERS] = std::array::from_fn(|i| fingertip_gap(&world, &tips[i], g.finger_radius));
            let frame = TactileFrame {
                t: ts,
                raw: sensor.sample(gaps),
            };
            if recent.len() == window {
                recent.pop_front();
            }
            recent.push_back(frame);
            if channels.is_calibrated() {
                report.events.extend(channels.process_frame(&frame)?);
            }
            report.min_table_clearance = report.min_table_clearance.min(table_clearance(&world, &arm.hand, &g));
        }
        fsm = next;
        tick += 1;
    }

    report.sim_time = tick as f64 * dt;
    report.attempts = fsm.attempt();
    report.final_state = fsm.state();
    report.success = criterion_met(s, &world, arm.attached.is_some());
    report.final_poses = final_poses(&world);
    report.wall_time = started.elapsed();
    Ok(report)
}

fn hand_at_home(s: &Scenario) -> Hand {
    Hand::new(Vec3::from(s.rig.home), 0.0, s.policy.open_aperture)
}

fn table_clearance(world: &WorldModel, hand: &Hand, g: &crate::grasp::HandGeometry) -> f64 {
    match &world.table {
        Some(table) => hand
            .fingertips(g)
            .iter()
            .map(|tip| table.sdf(tip) - g.finger_radius)
            .fold(f64::INFINITY, f64::min),
        None => f64::INFINITY,
    }
}

fn final_poses(world: &WorldModel) -> Vec<FinalPose> {
    world
        .objects
        .iter()
        .map(|o| FinalPose {
            label: o.label.clone(),
            position: o.position(),
            yaw: o.yaw(),
        })
        .collect()
}
