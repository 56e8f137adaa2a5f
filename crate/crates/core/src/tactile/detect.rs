use std::fmt;

use serde::Deserialize;

use super::filter::{HighPass, LowPass};
use super::FINGERS;
use crate::error::{Error, Result};

/// Minimum number of frames for a baseline calibration.
pub const MIN_CALIBRATION_FRAMES: usize = 10;

/// One sample from all fingers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TactileFrame {
    /// Seconds.
    pub t: f64,
    /// Raw analog counts, one per finger.
    pub raw: [f64; FINGERS],
}

/// Which side of the dead zone sets a flag.
///
/// `Negative` sets the flag when the signal drops below `-threshold` and
/// clears it above `+threshold`; `Positive` is the mirror image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Negative,
    Positive,
}

impl std::str::FromStr for Polarity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negative" => Ok(Polarity::Negative),
            "positive" => Ok(Polarity::Positive),
            _ => Err(Error::Config(format!("unknown polarity `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub cutoff_hz: f64,
    /// FA-I dead-zone half width, analog counts.
    pub touch_threshold: f64,
    /// SA-I dead-zone half width, analog counts.
    pub object_threshold: f64,
    pub touch_polarity: Polarity,
    pub object_polarity: Polarity,
    /// Optional low-pass on the SA-I channel; off when `None`.
    pub sai_lowpass_hz: Option<f64>,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            cutoff_hz: 20.0,
            touch_threshold: 5.0,
            object_threshold: 20.0,
            touch_polarity: Polarity::Positive,
            object_polarity: Polarity::Positive,
            sai_lowpass_hz: None,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("cutoff_hz", self.cutoff_hz),
            ("touch_threshold", self.touch_threshold),
            ("object_threshold", self.object_threshold),
            ("sai_lowpass_hz", self.sai_lowpass_hz.unwrap_or(1.0)),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("tactile.{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Hysteresis update of one flag against a symmetric dead zone.
pub fn update_flag(flag: bool, value: f64, threshold: f64, polarity: Polarity) -> bool {
    let (set, clear) = match polarity {
        Polarity::Negative => (value < -threshold, value > threshold),
        Polarity::Positive => (value > threshold, value < -threshold),
    };
    if !flag && set {
        true
    } else if flag && clear {
        false
    } else {
        flag
    }
}

/// Contact flags from the FA-I channel.
pub fn detect_touch(touch: [bool; FINGERS], fai: [f64; FINGERS], cfg: &DetectorConfig) -> [bool; FINGERS] {
    std::array::from_fn(|i| update_flag(touch[i], fai[i], cfg.touch_threshold, cfg.touch_polarity))
}

/// Proximity flags from the SA-I channel.
pub fn detect_object(
    detected: [bool; FINGERS],
    sai: [f64; FINGERS],
    cfg: &DetectorConfig,
) -> [bool; FINGERS] {
    std::array::from_fn(|i| {
        update_flag(detected[i], sai[i], cfg.object_threshold, cfg.object_polarity)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    ObjectDetected,
    Contact,
    ObjectSeparated,
    Release,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::ObjectDetected => "ObjectDetected",
            EventKind::Contact => "Contact",
            EventKind::ObjectSeparated => "ObjectSeparated",
            EventKind::Release => "Release",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TactileEvent {
    pub t: f64,
    /// 1-based finger number.
    pub finger: usize,
    pub kind: EventKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Finger {
    baseline: f64,
    sai: f64,
    fai: f64,
    highpass: HighPass,
    lowpass: Option<LowPass>,
    touch: bool,
    detected: bool,
}

/// Streaming SA-I/FA-I channels and latched flags for all fingers.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelState {
    cfg: DetectorConfig,
    fingers: [Finger; FINGERS],
    last_t: Option<f64>,
    calibrated: bool,
}

impl ChannelState {
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        let finger = Finger {
            baseline: 0.0,
            sai: 0.0,
            fai: 0.0,
            highpass: HighPass::new(cfg.cutoff_hz)?,
            lowpass: cfg.sai_lowpass_hz.map(|hz| LowPass::new(hz, 0.0)),
            touch: false,
            detected: false,
        };
        Ok(Self {
            cfg,
            fingers: [finger; FINGERS],
            last_t: None,
            calibrated: false,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibrated
    }

    /// Fixes baselines from a quiet window and resets flags and filters.
    pub fn calibrate(&mut self, samples: &[TactileFrame]) -> Result<()> {
        let baselines = calibrate_baseline(samples)?;
        for (f, b) in self.fingers.iter_mut().zip(baselines) {
            f.baseline = b;
            f.sai = 0.0;
            f.fai = 0.0;
            f.highpass = HighPass::settled(self.cfg.cutoff_hz, b)?;
            f.lowpass = self.cfg.sai_lowpass_hz.map(|hz| LowPass::new(hz, 0.0));
            f.touch = false;
            f.detected = false;
        }
        let last = samples.last().expect("calibration window is nonempty").t;
        self.last_t = Some(self.last_t.map_or(last, |t| t.max(last)));
        self.calibrated = true;
        Ok(())
    }

    /// Filters one frame, updates both detectors and returns the flag
    /// transitions as events, finger by finger.
    pub fn process_frame(&mut self, frame: &TactileFrame) -> Result<Vec<TactileEvent>> {
        if !self.calibrated {
            return Err(Error::InvalidArgument("tactile channels are not calibrated".into()));
        }
        let prev = self.last_t.expect("calibrated state has a timestamp");
        if !(frame.t > prev) {
            return Err(Error::NonMonotonicTime { prev, t: frame.t });
        }
        if frame.raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite sample at t={}", frame.t)));
        }
        let dt = frame.t - prev;
        self.last_t = Some(frame.t);

        for (f, &raw) in self.fingers.iter_mut().zip(&frame.raw) {
            f.fai = f.highpass.step(raw, dt)?;
            let delta = raw - f.baseline;
            f.sai = match &mut f.lowpass {
                Some(lp) => lp.step(delta, dt),
                None => delta,
            };
        }
        let touch = detect_touch(self.touch(), self.fai(), &self.cfg);
        let detected = detect_object(self.detected(), self.sai(), &self.cfg);

        let mut events = Vec::new();
        for (i, f) in self.fingers.iter_mut().enumerate() {
            let mut emit = |kind| events.push(TactileEvent { t: frame.t, finger: i + 1, kind });
            if detected[i] != f.detected {
                emit(if detected[i] { EventKind::ObjectDetected } else { EventKind::ObjectSeparated });
            }
            if touch[i] != f.touch {
                emit(if touch[i] { EventKind::Contact } else { EventKind::Release });
            }
            f.detected = detected[i];
            f.touch = touch[i];
        }
        Ok(events)
    }

    pub fn touch(&self) -> [bool; FINGERS] {
        self.fingers.map(|f| f.touch)
    }

    pub fn detected(&self) -> [bool; FINGERS] {
        self.fingers.map(|f| f.detected)
    }

    pub fn sai(&self) -> [f64; FINGERS] {
        self.fingers.map(|f| f.sai)
    }

    pub fn fai(&self) -> [f64; FINGERS] {
        self.fingers.map(|f| f.fai)
    }

    pub fn baselines(&self) -> [f64; FINGERS] {
        self.fingers.map(|f| f.baseline)
    }
}

/// Per-finger mean of a quiet window.
pub fn calibrate_baseline(samples: &[TactileFrame]) -> Result<[f64; FINGERS]> {
    if samples.len() < MIN_CALIBRATION_FRAMES {
        return Err(Error::TooFewSamples {
            need: MIN_CALIBRATION_FRAMES,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    Ok(std::array::from_fn(|i| samples.iter().map(|s| s.raw[i]).sum::<f64>() / n))
}

/// Calibrates on the first `calibration_frames` frames and processes the
/// rest, returning all events in time order.
pub fn replay(
    frames: &[TactileFrame],
    cfg: &DetectorConfig,
    calibration_frames: usize,
) -> Result<Vec<TactileEvent>> {
    let mut state = ChannelState::new(cfg.clone())?;
    let split = calibration_frames.min(frames.len());
    let window = &frames[..split];
    if let Some(w) = window.windows(2).find(|w| !(w[1].t > w[0].t)) {
        return Err(Error::NonMonotonicTime { prev: w[0].t, t: w[1].t });
    }
    state.calibrate(window)?;
    let mut events = Vec::new();
    for frame in &frames[split..] {
        events.extend(state.process_frame(frame)?);
    }
    Ok(events)
}
