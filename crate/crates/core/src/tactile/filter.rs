use crate::error::{Error, Result};

/// First-order discrete high-pass, `y[n] = α (y[n-1] + x[n] - x[n-1])` with
/// `α = 1 / (1 + 2π f_c dt)`.
///
/// A fresh filter treats the sample before the first as zero, so a unit
/// step produces `y[0] = α` followed by geometric decay.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HighPass {
    cutoff_hz: f64,
    prev_x: f64,
    prev_y: f64,
}

impl HighPass {
    pub fn new(cutoff_hz: f64) -> Result<Self> {
        Self::settled(cutoff_hz, 0.0)
    }

    /// A filter at rest on a constant input `x0`.
    pub fn settled(cutoff_hz: f64, x0: f64) -> Result<Self> {
        if !(cutoff_hz > 0.0 && cutoff_hz.is_finite()) {
            return Err(Error::InvalidArgument(format!("cutoff must be positive, got {cutoff_hz}")));
        }
        Ok(Self {
            cutoff_hz,
            prev_x: x0,
            prev_y: 0.0,
        })
    }

    pub fn alpha(&self, dt: f64) -> f64 {
        1.0 / (1.0 + 2.0 * std::f64::consts::PI * self.cutoff_hz * dt)
    }

    pub fn step(&mut self, x: f64, dt: f64) -> Result<f64> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        let y = self.alpha(dt) * (self.prev_y + x - self.prev_x);
        self.prev_x = x;
        self.prev_y = y;
        Ok(y)
    }

    pub fn output(&self) -> f64 {
        self.prev_y
    }
}

/// Functional form of [`HighPass::step`].
pub fn highpass_step(state: &mut HighPass, x: f64, dt: f64) -> Result<f64> {
    state.step(x, dt)
}

/// First-order low-pass `y += β (x - y)`, `β = dt / (τ + dt)`, `τ = 1 / (2π f_c)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct LowPass {
    tau: f64,
    y: f64,
}

impl LowPass {
    pub(crate) fn new(cutoff_hz: f64, y0: f64) -> Self {
        Self {
            tau: 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz),
            y: y0,
        }
    }

    pub(crate) fn step(&mut self, x: f64, dt: f64) -> f64 {
        self.y += dt / (self.tau + dt) * (x - self.y);
        self.y
    }
}

/// Magnitude of the continuous-time first-order high-pass response at `f`.
pub fn continuous_gain(cutoff_hz: f64, f: f64) -> f64 {
    let wt = f / cutoff_hz;
    wt / (1.0 + wt * wt).sqrt()
}
