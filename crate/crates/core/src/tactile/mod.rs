//! Streaming SA-I/FA-I channels and grasp event detection for three
//! proximity fingers.
//!
//! SA-I is the baseline-subtracted raw signal; FA-I is its first-order
//! high-pass. Each channel drives a latched flag with a symmetric dead zone
//! (`touch` from FA-I, `detected` from SA-I), and flag transitions become
//! [`TactileEvent`]s.

mod detect;
mod filter;
pub mod log;
mod trace;

pub use detect::{
    calibrate_baseline, detect_object, detect_touch, replay, update_flag, ChannelState,
    DetectorConfig, EventKind, Polarity, TactileEvent, TactileFrame, MIN_CALIBRATION_FRAMES,
};
pub use filter::{continuous_gain, highpass_step, HighPass};
pub use trace::GraspTrace;

pub const FINGERS: usize = 3;

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(events: &[TactileEvent], finger: usize) -> Vec<EventKind> {
        events.iter().filter(|e| e.finger == finger).map(|e| e.kind).collect()
    }

    #[test]
    fn grasp_trace_event_order() {
        let frames = GraspTrace::default().frames(1);
        let events = replay(&frames, &DetectorConfig::default(), 100).unwrap();
        assert_eq!(
            kinds(&events, 1),
            vec![
                EventKind::ObjectDetected,
                EventKind::Contact,
                EventKind::ObjectSeparated,
                EventKind::Release
            ]
        );
        assert!(kinds(&events, 2).is_empty());
    }

    #[test]
    fn staggered_fingers_are_independent() {
        let cfg = DetectorConfig::default();
        let single = GraspTrace {
            noise_sigma: 0.0,
            ..GraspTrace::default()
        };
        let solo = replay(&single.frames(0), &cfg, 100).unwrap();
        let both = GraspTrace {
            delays: [Some(0.0), Some(0.1), None],
            ..single.clone()
        };
        let events = replay(&both.frames(0), &cfg, 100).unwrap();
        let f1: Vec<_> = events.iter().filter(|e| e.finger == 1).copied().collect();
        assert_eq!(f1, solo);
        let f2: Vec<_> = events.iter().filter(|e| e.finger == 2).collect();
        assert_eq!(f2.len(), solo.len());
        for (a, b) in solo.iter().zip(f2) {
            assert_eq!(a.kind, b.kind);
            assert!((b.t - a.t - 0.1).abs() < 1e-9);
        }
        assert!(events.windows(2).all(|w| w[0].t <= w[1].t));
    }
}
