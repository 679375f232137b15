//! Per-atom detuning law and the collision jump process.
//!
//! An atom's time-averaged detuning is `beta_kt * E / kT` where the energy `E`
//! of a particle in a 3D harmonic trap follows Gamma(shape 3, scale kT). The
//! ensemble Ramsey coherence is then `|(1 - i beta_kt t)^-3|`, which is
//! `(1 + (beta_kt t)^2)^(-3/2)`. Velocity-changing collisions arrive as a
//! Poisson process and redraw the energy from the same distribution.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma};

use crate::error::{Error, Result};

/// Shape of the thermal energy distribution of a 3D harmonic trap.
const ENERGY_SHAPE: f64 = 3.0;

/// Constant of the fitted Ramsey envelope form.
pub const ENVELOPE_CONSTANT: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalDetuningModel {
    /// Detuning scale (rad/s).
    pub beta_kt: f64,
    pub wings_fraction: f64,
    /// Extra detuning of the wings sub-ensemble (rad/s).
    pub wings_offset: f64,
}

/// Which sub-ensemble an atom belongs to. Membership is kept across collisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    Bulk,
    Wings,
}

impl ThermalDetuningModel {
    pub fn new(beta_kt: f64, wings_fraction: f64, wings_offset: f64) -> Result<Self> {
        let m = ThermalDetuningModel { beta_kt, wings_fraction, wings_offset };
        m.validate()?;
        Ok(m)
    }

    /// Pure thermal broadening whose Ramsey envelope has 1/e time `tau0`.
    pub fn from_tau0(tau0: f64) -> Result<Self> {
        Self::new(calibrate_beta_kt(tau0)?, 0.0, 0.0)
    }

    pub fn fixed() -> Self {
        ThermalDetuningModel { beta_kt: 0.0, wings_fraction: 0.0, wings_offset: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta_kt >= 0.0) || !self.beta_kt.is_finite() {
            return Err(Error::invalid(format!("beta_kt must be finite and >= 0, got {}", self.beta_kt)));
        }
        if !(0.0..1.0).contains(&self.wings_fraction) {
            return Err(Error::invalid(format!("wings_fraction must lie in [0, 1), got {}", self.wings_fraction)));
        }
        if !self.wings_offset.is_finite() {
            return Err(Error::invalid("wings_offset must be finite"));
        }
        Ok(())
    }

    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> Component {
        if self.wings_fraction > 0.0 && rng.random::<f64>() < self.wings_fraction {
            Component::Wings
        } else {
            Component::Bulk
        }
    }

    /// Fresh thermal detuning for an atom of the given component.
    pub fn sample_for<R: Rng + ?Sized>(&self, component: Component, rng: &mut R) -> f64 {
        let thermal = if self.beta_kt > 0.0 {
            Gamma::new(ENERGY_SHAPE, self.beta_kt).expect("validated gamma parameters").sample(rng)
        } else {
            0.0
        };
        match component {
            Component::Bulk => thermal,
            Component::Wings => thermal + self.wings_offset,
        }
    }

    /// Ensemble standard deviation of the bulk detuning.
    pub fn bulk_std(&self) -> f64 {
        ENERGY_SHAPE.sqrt() * self.beta_kt
    }
}

/// One draw from the full two-component detuning distribution.
pub fn sample_thermal_detuning<R: Rng + ?Sized>(model: &ThermalDetuningModel, rng: &mut R) -> f64 {
    let c = model.sample_component(rng);
    model.sample_for(c, rng)
}

/// `beta_kt` whose thermal Ramsey envelope falls to 1/e at `tau0`.
/// An infinite `tau0` means no broadening.
pub fn calibrate_beta_kt(tau0: f64) -> Result<f64> {
    if !(tau0 > 0.0) {
        return Err(Error::invalid(format!("tau0 must be > 0, got {tau0}")));
    }
    if tau0.is_infinite() {
        return Ok(0.0);
    }
    Ok(((2.0f64 / 3.0).exp() - 1.0).sqrt() / tau0)
}

/// Exact collisionless ensemble coherence for the Gamma(3) detuning law.
pub fn thermal_coherence(t: f64, beta_kt: f64) -> f64 {
    let x = beta_kt * t;
    (1.0 + x * x).powf(-1.5)
}

/// `(1 + 0.95 (t/tau)^2)^(-3/2)`, the normalized Ramsey envelope.
pub fn analytic_ramsey_envelope(t: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau must be > 0, got {tau}")));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("t must be >= 0, got {t}")));
    }
    let x = t / tau;
    Ok((1.0 + ENVELOPE_CONSTANT * x * x).powf(-1.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleRule {
    /// Draw a fresh, independent thermal energy.
    #[default]
    FullRethermalize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionProcess {
    /// Per-atom collision rate (1/s).
    pub rate: f64,
    pub resample_rule: ResampleRule,
}

impl CollisionProcess {
    pub fn new(rate: f64) -> Result<Self> {
        if !(rate >= 0.0) || !rate.is_finite() {
            return Err(Error::invalid(format!("collision rate must be finite and >= 0, got {rate}")));
        }
        Ok(CollisionProcess { rate, resample_rule: ResampleRule::FullRethermalize })
    }

    pub fn none() -> Self {
        CollisionProcess { rate: 0.0, resample_rule: ResampleRule::FullRethermalize }
    }
}

/// Waiting time to the next collision; `f64::INFINITY` when the rate is zero.
pub fn next_collision_interval<R: Rng + ?Sized>(process: &CollisionProcess, rng: &mut R) -> f64 {
    if process.rate > 0.0 {
        Exp::new(process.rate).expect("validated rate").sample(rng)
    } else {
        f64::INFINITY
    }
}

/// Phenomenological population relaxation, applied as `exp(-t/t1)` on
/// coherence and fringe contrast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationModel {
    pub t1: f64,
}

impl RelaxationModel {
    pub fn new(t1: f64) -> Result<Self> {
        if !(t1 > 0.0) {
            return Err(Error::invalid(format!("t1 must be > 0, got {t1}")));
        }
        Ok(RelaxationModel { t1 })
    }

    pub fn none() -> Self {
        RelaxationModel { t1: f64::INFINITY }
    }

    pub fn envelope(&self, t: f64) -> f64 {
        if self.t1.is_infinite() {
            1.0
        } else {
            (-t / self.t1).exp()
        }
    }
}

impl Default for RelaxationModel {
    fn default() -> Self {
        Self::none()
    }
}
