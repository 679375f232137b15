//! Exact single-spin dynamics on the Bloch sphere.
//!
//! A two-level system is represented by its Bloch vector `(u, v, w)` with
//! `w = P2 - P1`, so the lower state `|1>` sits at `w = -1`. A drive of Rabi
//! frequency `rabi` and phase `phase`, combined with a detuning `delta`,
//! rotates the vector about `(rabi cos phase, rabi sin phase, delta)` with the
//! right-hand rule. All frequencies are angular (rad/s).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinState {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl SpinState {
    /// `|1>`, the state every atom starts in.
    pub const GROUND: SpinState = SpinState { u: 0.0, v: 0.0, w: -1.0 };
    pub const EXCITED: SpinState = SpinState { u: 0.0, v: 0.0, w: 1.0 };

    pub fn new(u: f64, v: f64, w: f64) -> Self {
        SpinState { u, v, w }
    }

    pub fn norm(&self) -> f64 {
        (self.u * self.u + self.v * self.v + self.w * self.w).sqrt()
    }

    /// Population of the upper state, clamped against rounding.
    pub fn p2(&self) -> f64 {
        (0.5 * (1.0 + self.w)).clamp(0.0, 1.0)
    }

    pub fn distance(&self, other: &SpinState) -> f64 {
        let (du, dv, dw) = (self.u - other.u, self.v - other.v, self.w - other.w);
        (du * du + dv * dv + dw * dw).sqrt()
    }

    /// Rodrigues rotation about the unit vector `axis` by `angle`.
    fn rotated(&self, axis: [f64; 3], angle: f64) -> SpinState {
        let (s, c) = angle.sin_cos();
        let [ax, ay, az] = axis;
        let dot = ax * self.u + ay * self.v + az * self.w;
        let cross = [ay * self.w - az * self.v, az * self.u - ax * self.w, ax * self.v - ay * self.u];
        let k = dot * (1.0 - c);
        SpinState {
            u: self.u * c + cross[0] * s + ax * k,
            v: self.v * c + cross[1] * s + ay * k,
            w: self.w * c + cross[2] * s + az * k,
        }
    }
}

/// A stretch of constant Hamiltonian. `rabi = 0` is free evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSegment {
    pub duration: f64,
    pub rabi: f64,
    pub phase: f64,
    /// Offset added to the atom's own detuning (synthesizer detuning).
    pub extra_detuning: f64,
}

impl DriveSegment {
    pub fn free(duration: f64, extra_detuning: f64) -> Self {
        DriveSegment { duration, rabi: 0.0, phase: 0.0, extra_detuning }
    }

    pub fn driven(duration: f64, rabi: f64, phase: f64, extra_detuning: f64) -> Self {
        DriveSegment { duration, rabi, phase, extra_detuning }
    }

    pub fn with_duration(&self, duration: f64) -> Self {
        DriveSegment { duration, ..*self }
    }

    pub fn is_driven(&self) -> bool {
        self.rabi > 0.0
    }
}

/// Ideal instantaneous rotation about an equatorial axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstantPulse {
    pub angle: f64,
    pub phase: f64,
}

impl InstantPulse {
    pub fn half_pi(phase: f64) -> Self {
        InstantPulse { angle: std::f64::consts::FRAC_PI_2, phase }
    }

    pub fn pi(phase: f64) -> Self {
        InstantPulse { angle: std::f64::consts::PI, phase }
    }

    pub fn is_valid(&self) -> bool {
        self.angle > 0.0 && self.angle <= 2.0 * std::f64::consts::PI && self.phase.is_finite()
    }
}

/// Exact evolution through one constant segment for an atom with detuning
/// `atom_detuning`.
pub fn evolve_segment(state: SpinState, atom_detuning: f64, seg: &DriveSegment) -> Result<SpinState> {
    if !(seg.duration >= 0.0) {
        return Err(Error::invalid(format!("segment duration must be >= 0, got {}", seg.duration)));
    }
    if !(seg.rabi >= 0.0) {
        return Err(Error::invalid(format!("rabi frequency must be >= 0, got {}", seg.rabi)));
    }
    Ok(evolve_unchecked(state, atom_detuning, seg, seg.duration))
}

/// Same as [`evolve_segment`] with an explicit duration; the caller guarantees
/// the segment is valid and `duration >= 0`.
#[inline]
pub(crate) fn evolve_unchecked(state: SpinState, atom_detuning: f64, seg: &DriveSegment, duration: f64) -> SpinState {
    let delta = atom_detuning + seg.extra_detuning;
    let (sp, cp) = seg.phase.sin_cos();
    let ox = seg.rabi * cp;
    let oy = seg.rabi * sp;
    let omega_eff = (seg.rabi * seg.rabi + delta * delta).sqrt();
    if omega_eff == 0.0 || duration == 0.0 {
        return state;
    }
    let axis = [ox / omega_eff, oy / omega_eff, delta / omega_eff];
    state.rotated(axis, omega_eff * duration)
}

pub fn instant_pulse(state: SpinState, pulse: &InstantPulse) -> SpinState {
    let (s, c) = pulse.phase.sin_cos();
    state.rotated([c, s, 0.0], pulse.angle)
}

/// Closed-form upper-state population of a Rabi oscillation started in `|1>`.
pub fn rabi_population_analytic(delta: f64, rabi: f64, t: f64) -> f64 {
    let omega_eff_sq = rabi * rabi + delta * delta;
    if omega_eff_sq == 0.0 {
        return 0.0;
    }
    let s = (omega_eff_sq.sqrt() * t / 2.0).sin();
    (rabi * rabi / omega_eff_sq * s * s).clamp(0.0, 1.0)
}
