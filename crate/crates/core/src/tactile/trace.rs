use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{TactileFrame, FINGERS};

/// Synthetic raw trace of one grasp cycle on a proximity finger: a quiet
/// window, a slow approach rise, a one-sample contact impulse, a hold, a
/// slow fall past the baseline as the object leaves, and a one-sample
/// negative release impulse.
///
/// With the default detector settings this yields ObjectDetected, Contact,
/// ObjectSeparated, Release in that order on every active finger.
#[derive(Clone, Debug, PartialEq)]
pub struct GraspTrace {
    pub rate_hz: f64,
    pub duration: f64,
    pub baseline: f64,
    pub rise: (f64, f64),
    pub hold_level: f64,
    pub contact_at: f64,
    pub fall: (f64, f64),
    pub floor_level: f64,
    pub release_at: f64,
    pub impulse: f64,
    pub noise_sigma: f64,
    /// Time shift of the profile per finger; `None` leaves that finger flat.
    pub delays: [Option<f64>; FINGERS],
}

impl Default for GraspTrace {
    fn default() -> Self {
        Self {
            rate_hz: 500.0,
            duration: 3.6,
            baseline: 500.0,
            rise: (0.5, 1.0),
            hold_level: 60.0,
            contact_at: 1.3,
            fall: (2.0, 2.6),
            floor_level: -40.0,
            release_at: 2.9,
            impulse: 20.0,
            noise_sigma: 0.3,
            delays: [Some(0.0), None, None],
        }
    }
}

impl GraspTrace {
    /// Slow deviation from baseline at time `t` (no impulses, no noise).
    pub fn level(&self, t: f64) -> f64 {
        let ramp = |t: f64, (a, b): (f64, f64)| ((t - a) / (b - a)).clamp(0.0, 1.0);
        if t < self.fall.0 {
            self.hold_level * ramp(t, self.rise)
        } else {
            self.hold_level + (self.floor_level - self.hold_level) * ramp(t, self.fall)
        }
    }

    pub fn frames(&self, seed: u64) -> Vec<TactileFrame> {
        let n = (self.duration * self.rate_hz).round() as usize;
        let dt = 1.0 / self.rate_hz;
        let noise = Normal::new(0.0, self.noise_sigma.max(0.0)).expect("finite sigma");
        let mut rngs: [ChaCha8Rng; FINGERS] =
            std::array::from_fn(|i| ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31).wrapping_add(i as u64)));
        let at = |i: usize, when: f64| i == (when * self.rate_hz).round() as usize;
        (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                let raw = std::array::from_fn(|f| {
                    let mut v = self.baseline;
                    if let Some(delay) = self.delays[f] {
                        v += self.level(t - delay);
                        if at(i, self.contact_at + delay) {
                            v += self.impulse;
                        }
                        if at(i, self.release_at + delay) {
                            v -= self.impulse;
                        }
                    }
                    v + noise.sample(&mut rngs[f])
                });
                TactileFrame { t, raw }
            })
            .collect()
    }
}
