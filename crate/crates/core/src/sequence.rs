//! Pulse-sequence builders and validation.
//!
//! Every sequence starts with a pi/2 pulse at phase 0 on the ground state. Echo
//! type sequences (Hahn, CPMG, Uhrig) use instantaneous pi pulses at phase pi/2,
//! and all sequences except the Rabi experiment end with a pi/2 analysis pulse
//! at `readout_phase`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use crate::bloch::{DriveSegment, InstantPulse};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Drive(DriveSegment),
    Pulse(InstantPulse),
}

impl Element {
    pub fn duration(&self) -> f64 {
        match self {
            Element::Drive(s) => s.duration,
            Element::Pulse(_) => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    pub elements: Vec<Element>,
    pub readout_phase: f64,
}

impl PulseSequence {
    pub fn total_duration(&self) -> f64 {
        self.elements.iter().map(Element::duration).sum()
    }

    /// The trailing analysis pulse, if the sequence ends with one.
    pub fn readout_pulse(&self) -> Option<InstantPulse> {
        match self.elements.last() {
            Some(Element::Pulse(p)) if self.elements.len() > 1 => Some(*p),
            _ => None,
        }
    }

    /// Elements before the analysis pulse.
    pub fn body(&self) -> &[Element] {
        if self.readout_pulse().is_some() {
            &self.elements[..self.elements.len() - 1]
        } else {
            &self.elements
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    Ramsey,
    Hahn,
    Cpmg(usize),
    Uhrig(usize),
    ContinuousDrive,
    RabiExperiment,
}

impl SequenceKind {
    /// Sequences whose observable is taken at the end rather than along the
    /// trajectory.
    pub fn is_refocusing(&self) -> bool {
        matches!(
            self,
            SequenceKind::Hahn | SequenceKind::Cpmg(_) | SequenceKind::Uhrig(_) | SequenceKind::ContinuousDrive
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceSpec {
    pub kind: SequenceKind,
    /// Total sequence duration (s).
    pub total_time: f64,
    /// Rabi frequency of driven segments (rad/s).
    pub rabi: f64,
    /// Synthesizer detuning applied to every segment (rad/s).
    pub detuning_offset: f64,
    /// Phase switch period `Ts` (s), continuous drive only. `None` means `T/2`.
    pub phase_switch_period: Option<f64>,
    pub readout_phase: f64,
}

impl SequenceSpec {
    pub fn new(kind: SequenceKind, total_time: f64) -> Self {
        SequenceSpec {
            kind,
            total_time,
            rabi: 0.0,
            detuning_offset: 0.0,
            phase_switch_period: None,
            readout_phase: 0.0,
        }
    }

    pub fn with_rabi(mut self, rabi: f64) -> Self {
        self.rabi = rabi;
        self
    }

    pub fn with_detuning_offset(mut self, offset: f64) -> Self {
        self.detuning_offset = offset;
        self
    }

    pub fn with_phase_switch_period(mut self, ts: f64) -> Self {
        self.phase_switch_period = Some(ts);
        self
    }

    pub fn with_readout_phase(mut self, phase: f64) -> Self {
        self.readout_phase = phase;
        self
    }

    pub fn with_total_time(mut self, total_time: f64) -> Self {
        self.total_time = total_time;
        self
    }

    /// Number of phase-switch segments of a continuous drive.
    pub fn switch_segments(&self) -> Result<usize> {
        let ts = self.phase_switch_period.unwrap_or(self.total_time / 2.0);
        if !(ts > 0.0) || !ts.is_finite() {
            return Err(Error::invalid(format!("phase switch period must be > 0, got {ts}")));
        }
        let ratio = self.total_time / ts;
        let k = ratio.round();
        if (ratio - k).abs() > 1e-9 * ratio.max(1.0) || k < 2.0 || !(k as u64).is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "total pulse duration T must be an even multiple of the phase switch period Ts \
                 (T = {} s, Ts = {} s, T/Ts = {ratio})",
                self.total_time, ts
            )));
        }
        Ok(k as usize)
    }
}

/// Equally spaced pi pulses at odd multiples of `T / 2n`.
pub fn cpmg_times(n: usize, total_time: f64) -> Result<Vec<f64>> {
    check_train(n, total_time)?;
    Ok((1..=n)
        .map(|j| if 2 * j - 1 == n { total_time / 2.0 } else { total_time * (2 * j - 1) as f64 / (2 * n) as f64 })
        .collect())
}

/// Uhrig pulse times `T sin^2(pi j / (2n + 2))`, made exactly mirror
/// symmetric about `T/2`.
pub fn uhrig_times(n: usize, total_time: f64) -> Result<Vec<f64>> {
    check_train(n, total_time)?;
    let mut times = vec![0.0; n];
    for j in 1..=n {
        let mirror = n + 1 - j;
        if j < mirror {
            let s = (PI * j as f64 / (2 * n + 2) as f64).sin();
            times[j - 1] = total_time * s * s;
            times[mirror - 1] = total_time - times[j - 1];
        } else if j == mirror {
            times[j - 1] = total_time / 2.0;
        }
    }
    Ok(times)
}

fn check_train(n: usize, total_time: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("pulse count must be >= 1"));
    }
    if !(total_time > 0.0) || !total_time.is_finite() {
        return Err(Error::invalid(format!("total time must be > 0, got {total_time}")));
    }
    Ok(())
}

fn pi_train(times: &[f64], spec: &SequenceSpec) -> Vec<Element> {
    let free = |d: f64| Element::Drive(DriveSegment::free(d, spec.detuning_offset));
    let mut elements = vec![Element::Pulse(InstantPulse::half_pi(0.0))];
    let mut last = 0.0;
    for &t in times {
        elements.push(free(t - last));
        elements.push(Element::Pulse(InstantPulse::pi(FRAC_PI_2)));
        last = t;
    }
    elements.push(free(spec.total_time - last));
    elements.push(Element::Pulse(InstantPulse::half_pi(spec.readout_phase)));
    elements
}

pub fn build_sequence(spec: &SequenceSpec) -> Result<PulseSequence> {
    if !(spec.total_time > 0.0) || !spec.total_time.is_finite() {
        return Err(Error::invalid(format!("total time must be > 0, got {}", spec.total_time)));
    }
    if !spec.detuning_offset.is_finite() || !spec.readout_phase.is_finite() {
        return Err(Error::invalid("detuning offset and readout phase must be finite"));
    }
    let needs_drive = matches!(spec.kind, SequenceKind::ContinuousDrive | SequenceKind::RabiExperiment);
    if needs_drive && !(spec.rabi > 0.0 && spec.rabi.is_finite()) {
        return Err(Error::invalid(format!("rabi frequency must be > 0, got {}", spec.rabi)));
    }
    let t = spec.total_time;
    let elements = match spec.kind {
        SequenceKind::Ramsey => vec![
            Element::Pulse(InstantPulse::half_pi(0.0)),
            Element::Drive(DriveSegment::free(t, spec.detuning_offset)),
            Element::Pulse(InstantPulse::half_pi(spec.readout_phase)),
        ],
        SequenceKind::Hahn => pi_train(&[t / 2.0], spec),
        SequenceKind::Cpmg(n) => pi_train(&cpmg_times(n, t)?, spec),
        SequenceKind::Uhrig(n) => pi_train(&uhrig_times(n, t)?, spec),
        SequenceKind::ContinuousDrive => {
            let k = spec.switch_segments()?;
            let ts = t / k as f64;
            let mut elements = vec![Element::Pulse(InstantPulse::half_pi(0.0))];
            for i in 0..k {
                let phase = if i % 2 == 0 { 0.0 } else { PI };
                elements.push(Element::Drive(DriveSegment::driven(ts, spec.rabi, phase, spec.detuning_offset)));
            }
            elements.push(Element::Pulse(InstantPulse::half_pi(spec.readout_phase)));
            elements
        }
        SequenceKind::RabiExperiment => {
            vec![Element::Drive(DriveSegment::driven(t, spec.rabi, 0.0, spec.detuning_offset))]
        }
    };
    Ok(PulseSequence { elements, readout_phase: spec.readout_phase })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptySequence,
    NegativeDuration {
        index: usize,
        duration: f64,
    },
    NegativeRabi {
        index: usize,
        rabi: f64,
    },
    NonFinite {
        index: usize,
    },
    InvalidPulseAngle {
        index: usize,
        angle: f64,
    },
    /// A run of phase-alternating drive segments with an odd count.
    AlternationParity {
        start: usize,
        segments: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptySequence => write!(f, "sequence has no elements"),
            Violation::NegativeDuration { index, duration } => {
                write!(f, "element {index}: negative duration {duration} s")
            }
            Violation::NegativeRabi { index, rabi } => write!(f, "element {index}: negative rabi frequency {rabi}"),
            Violation::NonFinite { index } => write!(f, "element {index}: non-finite parameter"),
            Violation::InvalidPulseAngle { index, angle } => {
                write!(f, "element {index}: pulse angle {angle} outside (0, 2pi]")
            }
            Violation::AlternationParity { start, segments } => write!(
                f,
                "elements {start}..{}: {segments} phase-alternated drive segments; \
                 total pulse duration T must be an even multiple of Ts",
                start + segments
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            let msgs: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
            Err(Error::invalid(msgs.join("; ")))
        }
    }
}

fn phases_alternate(a: f64, b: f64) -> bool {
    let d = (a - b).rem_euclid(2.0 * PI);
    (d - PI).abs() < 1e-9
}

pub fn validate_sequence(seq: &PulseSequence) -> ValidationReport {
    let mut violations = Vec::new();
    if seq.elements.is_empty() {
        violations.push(Violation::EmptySequence);
    }
    for (index, el) in seq.elements.iter().enumerate() {
        match el {
            Element::Drive(s) => {
                if ![s.duration, s.rabi, s.phase, s.extra_detuning].iter().all(|x| x.is_finite()) {
                    violations.push(Violation::NonFinite { index });
                    continue;
                }
                if s.duration < 0.0 {
                    violations.push(Violation::NegativeDuration { index, duration: s.duration });
                }
                if s.rabi < 0.0 {
                    violations.push(Violation::NegativeRabi { index, rabi: s.rabi });
                }
            }
            Element::Pulse(p) => {
                if !p.is_valid() {
                    violations.push(Violation::InvalidPulseAngle { index, angle: p.angle });
                }
            }
        }
    }

    // Maximal runs of adjacent driven segments whose phase flips by pi each time.
    let mut i = 0;
    while i < seq.elements.len() {
        let Element::Drive(first) = seq.elements[i] else {
            i += 1;
            continue;
        };
        if !first.is_driven() {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        let mut prev = first;
        while let Some(Element::Drive(next)) = seq.elements.get(j) {
            if next.is_driven() && phases_alternate(prev.phase, next.phase) {
                prev = *next;
                j += 1;
            } else {
                break;
            }
        }
        let run = j - i;
        if run > 1 && run % 2 == 1 {
            violations.push(Violation::AlternationParity { start: i, segments: run });
        }
        i = j;
    }
    ValidationReport { violations }
}
