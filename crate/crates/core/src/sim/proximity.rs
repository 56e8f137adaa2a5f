//! Fingertip proximity sensors: an exponential response to the distance
//! of the nearest surface, plus a one-sample spike whenever contact is
//! made or broken.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use super::world::WorldModel;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::tactile::FINGERS;

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProximityModel {
    /// Response at zero distance above the baseline, analog counts.
    pub amplitude: f64,
    /// Distance over which the response falls by a factor e, meters.
    pub decay_length: f64,
    /// Standard deviation of additive noise, counts.
    pub noise: f64,
    pub baseline: f64,
    /// Spike added on the sample where contact is made (+) or broken (−).
    pub contact_impulse: f64,
    /// Surface gaps up to this count as contact, meters.
    pub contact_tolerance: f64,
}

impl Default for ProximityModel {
    fn default() -> Self {
        Self {
            amplitude: 200.0,
            decay_length: 0.003,
            noise: 0.4,
            baseline: 500.0,
            contact_impulse: 20.0,
            contact_tolerance: 0.0005,
        }
    }
}

impl ProximityModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.amplitude, self.decay_length, self.baseline];
        let non_negative = [self.noise, self.contact_impulse, self.contact_tolerance];
        if positive.iter().all(|v| *v > 0.0 && v.is_finite()) && non_negative.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config("rig.proximity: parameters must be positive".into()))
        }
    }

    /// Noiseless reading at surface gap `d`; gaps below zero read as contact.
    pub fn level(&self, d: f64) -> f64 {
        self.baseline + self.amplitude * (-d.max(0.0) / self.decay_length).exp()
    }
}

/// Gap between a fingertip sphere and the nearest surface in `world`.
pub fn fingertip_gap(world: &WorldModel, tip: &Vec3, radius: f64) -> f64 {
    world.sdf(tip) - radius
}

/// Stateful three-finger sensor with its own noise stream.
#[derive(Clone, Debug)]
pub struct ProximitySensor {
    model: ProximityModel,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    contact: [bool; FINGERS],
}

impl ProximitySensor {
    pub fn new(model: ProximityModel, seed: u64) -> Result<Self> {
        model.validate()?;
        let noise = (model.noise > 0.0).then(|| Normal::new(0.0, model.noise).expect("validated sigma"));
        Ok(Self {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise,
            contact: [false; FINGERS],
        })
    }

    pub fn model(&self) -> &ProximityModel {
        &self.model
    }

    /// Which fingers were in contact at the last sample.
    pub fn contact(&self) -> [bool; FINGERS] {
        self.contact
    }

    /// One reading per finger from the surface gaps.
    pub fn sample(&mut self, gaps: [f64; FINGERS]) -> [f64; FINGERS] {
        let mut raw = [0.0; FINGERS];
        for i in 0..FINGERS {
            let touching = gaps[i] <= self.model.contact_tolerance;
            let mut v = self.model.level(gaps[i]);
            if touching != self.contact[i] {
                v += if touching { self.model.contact_impulse } else { -self.model.contact_impulse };
                self.contact[i] = touching;
            }
            if let Some(n) = &self.noise {
                v += n.sample(&mut self.rng);
            }
            raw[i] = v;
        }
        raw
    }
}
