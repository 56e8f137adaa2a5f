//! The `vtgrasp` command line. [`run`] parses arguments, executes one
//! subcommand and returns the process exit code: 0 on success, 1 when a
//! simulated task fails, 2 for bad input or usage.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;

use vtgrasp::calibration::{
    calibration_error, format_observations, format_transform, parse_transform, read_observations,
    simulate_observations, solve_batch, ObservationNoise,
};
use vtgrasp::geometry::io::{read_cloud, write_cloud};
use vtgrasp::perception::{segment_scene, PerceptionConfig};
use vtgrasp::recognition::{load_database, recognize_scene, ObjectTemplate, RecognitionConfig};
use vtgrasp::sim::render::{look_at, render_cloud, RenderParams};
use vtgrasp::sim::scenario::{apply_override, RigSpec};
use vtgrasp::sim::{batch_csv, build_templates, run_batch, run_with_templates, success_rate, Scenario};
use vtgrasp::tactile::log::{format_log, read_log};
use vtgrasp::tactile::{replay, DetectorConfig, GraspTrace};
use vtgrasp::{Error, Frame, Vec3};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Wrist → tag offset of the default rig.
const DEFAULT_TAG_OFFSET: &str = "0 0 0.05 1 0 0 0";

#[derive(Debug, Parser)]
#[command(name = "vtgrasp", version, about = "Visuo-tactile grasping pipeline and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment a base-frame cloud and label each cluster against a template database.
    Recognize(RecognizeArgs),
    /// Capture the largest cluster of a cloud as a named template.
    MakeTemplate(MakeTemplateArgs),
    /// Run the tactile detectors over a CSV log and print events.
    ReplayTactile(ReplayArgs),
    /// Estimate the camera pose from tag observations.
    Calibrate(CalibrateArgs),
    /// Run a simulated grasp scenario.
    Run(RunArgs),
    /// Generate synthetic inputs.
    #[command(subcommand)]
    Synth(Synth),
}

#[derive(Debug, Args)]
struct Overrides {
    /// Override a parameter, `section.key=value` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct RecognizeArgs {
    cloud: PathBuf,
    /// Directory with one subdirectory per template.
    #[arg(long)]
    templates: PathBuf,
    /// Seed for plane fitting.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct MakeTemplateArgs {
    cloud: PathBuf,
    #[arg(long)]
    label: String,
    /// Template database directory; the template goes in `<out>/<label>`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    log: PathBuf,
    /// Leading frames used to establish the baseline.
    #[arg(long, default_value_t = 50)]
    calibration_frames: usize,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    observations: PathBuf,
    /// Wrist → tag offset as `tx ty tz qw qx qy qz`.
    #[arg(long, default_value = DEFAULT_TAG_OFFSET, allow_hyphen_values = true)]
    tag_offset: String,
    /// File holding the true camera pose, for reporting the error.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    scenario: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Run this many consecutive seeds and write `batch.csv`.
    #[arg(long)]
    batch: Option<usize>,
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Synth {
    /// A tactile log of one grasp cycle on finger 1.
    Trace {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Noisy tag observations of the default camera, with the truth.
    Calibration {
        /// Directory receiving `observations.txt` and `truth.txt`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        observations: usize,
        #[arg(long, default_value_t = 0.005)]
        translation_sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        rotation_sigma_deg: f64,
    },
    /// The scenario's world as seen by its camera, in the base frame.
    Scene {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

type CmdResult = Result<i32, Error>;

fn execute(cmd: Command, out: &mut dyn Write) -> CmdResult {
    match cmd {
        Command::Recognize(a) => recognize(a, out),
        Command::MakeTemplate(a) => make_template(a, out),
        Command::ReplayTactile(a) => replay_tactile(a, out),
        Command::Calibrate(a) => calibrate(a, out),
        Command::Run(a) => run_cmd(a, out),
        Command::Synth(s) => synth(s, out),
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), Error> {
    out.write_all(text.as_bytes()).map_err(io(Path::new("<stdout>")))
}

/// Builds the config stored under `section` from `section.key=value`
/// overrides; other sections are an error.
fn section_config<T: DeserializeOwned>(section: &str, overrides: &[String], allowed: &[&str]) -> Result<T, Error> {
    let mut doc = toml::Table::new();
    for o in overrides {
        let key = o.split('=').next().unwrap_or("");
        let head = key.split('.').next().unwrap_or("");
        if !allowed.contains(&head) {
            return Err(Error::Config(format!("`{key}` is not a {} parameter", allowed.join(" or "))));
        }
        apply_override(&mut doc, o)?;
    }
    let table = match doc.remove(section) {
        Some(toml::Value::Table(t)) => t,
        Some(_) => return Err(Error::Config(format!("`{section}` must be a table"))),
        None => toml::Table::new(),
    };
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("{section}: {}", e.message())))
}

fn vision_configs(overrides: &[String]) -> Result<(PerceptionConfig, RecognitionConfig), Error> {
    let allowed = ["perception", "recognition"];
    let p: PerceptionConfig = section_config("perception", overrides, &allowed)?;
    let r: RecognitionConfig = section_config("recognition", overrides, &allowed)?;
    p.validate()?;
    r.validate()?;
    Ok((p, r))
}

fn recognize(a: RecognizeArgs, out: &mut dyn Write) -> CmdResult {
    let (perception, recognition) = vision_configs(&a.overrides.set)?;
    let cloud = read_cloud(&a.cloud, Frame::BASE)?;
    let db = load_database(&a.templates, &recognition)?;
    if db.is_empty() {
        return Err(Error::Empty("template database has no templates"));
    }
    let mut text = String::new();
    for r in recognize_scene(&cloud, &db, &perception, &recognition, a.seed)? {
        let line = match &r.estimate {
            Some(e) => {
                let p = e.pose.translation();
                format!("{} {:.4} {:.4} {:.4} {:.4} {:.4}\n", e.label, r.score, p.x, p.y, p.z, e.pose.yaw())
            }
            None => {
                let p = r.cluster.centroid().unwrap_or_else(Vec3::zeros);
                format!("unknown {:.4} {:.4} {:.4} {:.4}\n", r.score, p.x, p.y, p.z)
            }
        };
        text.push_str(&line);
    }
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn make_template(a: MakeTemplateArgs, out: &mut dyn Write) -> CmdResult {
    let (perception, recognition) = vision_configs(&a.overrides.set)?;
    let cloud = read_cloud(&a.cloud, Frame::BASE)?;
    let seg = segment_scene(&cloud, &perception, a.seed)?;
    let largest = seg
        .cluster_clouds()
        .into_iter()
        .max_by_key(|c| c.len())
        .ok_or(Error::Empty("no object cluster in cloud"))?;
    let n = largest.len();
    let template = ObjectTemplate::build(a.label, largest.relabeled(Frame::OBJECT), &recognition)?;
    template.save(&a.out)?;
    emit(out, &format!("{} {} points\n", a.out.join(&template.label).display(), n))?;
    Ok(EXIT_OK)
}

fn replay_tactile(a: ReplayArgs, out: &mut dyn Write) -> CmdResult {
    let cfg: DetectorConfig = section_config("tactile", &a.overrides.set, &["tactile"])?;
    cfg.validate()?;
    let frames = read_log(&a.log)?;
    let events = replay(&frames, &cfg, a.calibration_frames)?;
    let text: String = events.iter().map(|e| format!("{:.4} {} {}\n", e.t, e.finger, e.kind)).collect();
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn calibrate(a: CalibrateArgs, out: &mut dyn Write) -> CmdResult {
    let wrist_to_tag = parse_transform(&a.tag_offset, Frame::TAG, Frame::WRIST)?;
    let obs = read_observations(&a.observations)?;
    let result = solve_batch(&obs, &wrist_to_tag)?;
    let mut text = format!(
        "base_to_camera {}\nresidual {:.6}\nobservations {}\n",
        format_transform(&result.base_to_camera),
        result.residual,
        result.n_observations
    );
    if let Some(path) = &a.truth {
        let truth = parse_transform(&std::fs::read_to_string(path).map_err(io(path))?, Frame::CAMERA, Frame::BASE)?;
        let (dt, dr) = calibration_error(&result.base_to_camera, &truth)?;
        text.push_str(&format!("translation_error {dt:.6}\nrotation_error_deg {dr:.4}\n"));
    }
    emit(out, &text)?;
    Ok(EXIT_OK)
}

fn run_cmd(a: RunArgs, out: &mut dyn Write) -> CmdResult {
    let mut overrides = a.overrides.set.clone();
    if let Some(seed) = a.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    let s = Scenario::load(&a.scenario, &overrides)?;
    if let Some(n) = a.batch {
        if n == 0 {
            return Err(Error::InvalidArgument("--batch needs at least one run".into()));
        }
        let reports = run_batch(&s, n, &overrides)?;
        let csv = batch_csv(&reports);
        if let Some(dir) = &a.out {
            std::fs::create_dir_all(dir).map_err(io(dir))?;
            let path = dir.join("batch.csv");
            std::fs::write(&path, &csv).map_err(io(&path))?;
            for r in &reports {
                r.write(dir.join(format!("seed-{}", r.seed)))?;
            }
        }
        if !a.quiet {
            emit(out, &csv)?;
        }
        emit(out, &format!("success_rate={:.4}\n", success_rate(&reports)))?;
        return Ok(EXIT_OK);
    }
    let templates = build_templates(&s)?;
    let report = run_with_templates(&s, &templates, &overrides)?;
    if let Some(dir) = &a.out {
        report.write(dir)?;
    }
    if !a.quiet {
        emit(out, &report.trace_log())?;
    }
    emit(out, &report.summary())?;
    Ok(if report.success { EXIT_OK } else { EXIT_FAILURE })
}

fn synth(s: Synth, out: &mut dyn Write) -> CmdResult {
    match s {
        Synth::Trace { out: path, seed } => {
            let frames = GraspTrace::default().frames(seed);
            std::fs::write(&path, format_log(&frames)).map_err(io(&path))?;
            emit(out, &format!("{} frames\n", frames.len()))?;
        }
        Synth::Calibration {
            out: dir,
            seed,
            observations,
            translation_sigma,
            rotation_sigma_deg,
        } => {
            if !(translation_sigma >= 0.0 && rotation_sigma_deg >= 0.0) {
                return Err(Error::InvalidArgument("noise sigmas must be non-negative".into()));
            }
            let rig = RigSpec::default();
            let truth = look_at(Vec3::from(rig.camera.eye), Vec3::from(rig.camera.target), Vec3::z())?;
            let wrist_to_tag = parse_transform(DEFAULT_TAG_OFFSET, Frame::TAG, Frame::WRIST)?;
            let noise = ObservationNoise {
                translation_sigma,
                rotation_sigma_deg,
            };
            let bounds = (Vec3::new(0.3, -0.15, 0.15), Vec3::new(0.6, 0.15, 0.4));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let obs = simulate_observations(&truth, &wrist_to_tag, observations, bounds, noise, &mut rng)?;
            std::fs::create_dir_all(&dir).map_err(io(&dir))?;
            let files = [
                ("observations.txt", format_observations(&obs)),
                ("truth.txt", format!("# base_to_camera\n{}\n", format_transform(&truth))),
            ];
            for (name, body) in files {
                let path = dir.join(name);
                std::fs::write(&path, body).map_err(io(&path))?;
            }
            emit(out, &format!("{} observations\n", obs.len()))?;
        }
        Synth::Scene {
            scenario,
            out: path,
            seed,
            overrides,
        } => {
            let s = Scenario::load(&scenario, &overrides.set)?;
            let camera = look_at(Vec3::from(s.rig.camera.eye), Vec3::from(s.rig.camera.target), Vec3::z())?;
            let params = RenderParams {
                density: s.rig.density,
                depth_noise: s.rig.depth_noise,
            };
            let world = s.world_model();
            let cloud = render_cloud(&world, &camera, &params, seed)?.transformed(&camera)?;
            write_cloud(&path, &cloud)?;
            let mut text = String::new();
            for o in &world.objects {
                let p = o.position();
                text.push_str(&format!("{} {:.4} {:.4} {:.4} {:.4}\n", o.label, p.x, p.y, p.z, o.yaw()));
            }
            emit(out, &text)?;
        }
    }
    Ok(EXIT_OK)
}
