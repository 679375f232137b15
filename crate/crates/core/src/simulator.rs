//! Event-driven Monte Carlo engine.
//!
//! Each atom is propagated exactly through the sequence. Collisions arrive as
//! a Poisson process and split drive segments at the collision instant; the
//! atom's detuning is redrawn there. Instantaneous pulses are never split.
//!
//! Sampling: an observation at time `s` sees every element ending at or before
//! `s`, including instant pulses located exactly at `s`, but never the trailing
//! analysis pulse. The reported `p2` is the population after a virtual analysis
//! pulse applied at `s`, which is what a sequence cut short at `s` would read
//! out. Sequences without an analysis pulse report the raw population.
//!
//! Atom `i` draws detunings from ChaCha stream `2i` and collision times from
//! stream `2i + 1` of the master seed, and atoms are reduced in fixed chunks,
//! so results do not depend on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{fit_curve, FitModel, FitResult, ModelKind};
use crate::bloch::{evolve_unchecked, instant_pulse, InstantPulse, SpinState};
use crate::error::{Error, Result};
use crate::noise::{next_collision_interval, CollisionProcess, Component, RelaxationModel, ThermalDetuningModel};
use crate::sequence::{build_sequence, validate_sequence, Element, PulseSequence, SequenceSpec};

/// Supplies an atom's detuning at the start and after every collision.
pub trait DetuningSource {
    fn initial(&mut self) -> f64;
    fn after_collision(&mut self) -> f64;
}

/// A detuning that never changes, even across collisions.
#[derive(Debug, Clone, Copy)]
pub struct FixedDetuning(pub f64);

impl DetuningSource for FixedDetuning {
    fn initial(&mut self) -> f64 {
        self.0
    }
    fn after_collision(&mut self) -> f64 {
        self.0
    }
}

/// Thermal detuning with persistent sub-ensemble membership.
pub struct ThermalSource<R> {
    model: ThermalDetuningModel,
    component: Component,
    rng: R,
}

impl<R: Rng> ThermalSource<R> {
    pub fn new(model: ThermalDetuningModel, mut rng: R) -> Self {
        let component = model.sample_component(&mut rng);
        ThermalSource { model, component, rng }
    }

    pub fn component(&self) -> Component {
        self.component
    }
}

impl<R: Rng> DetuningSource for ThermalSource<R> {
    fn initial(&mut self) -> f64 {
        self.model.sample_for(self.component, &mut self.rng)
    }
    fn after_collision(&mut self) -> f64 {
        self.model.sample_for(self.component, &mut self.rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomTrajectory {
    /// State at each sample time, before any analysis pulse.
    pub states: Vec<SpinState>,
    /// Upper-state population at each sample time after the (virtual) readout.
    pub p2: Vec<f64>,
    /// State at the end of the sequence, before the analysis pulse.
    pub final_state: SpinState,
    pub collisions: usize,
}

fn check_sample_times(times: &[f64], total: f64) -> Result<()> {
    let limit = total * (1.0 + 1e-12) + 1e-15;
    for (i, &t) in times.iter().enumerate() {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::invalid(format!("sample time {t} must be finite and >= 0")));
        }
        if t > limit {
            return Err(Error::invalid(format!("sample time {t} s lies beyond the sequence end at {total} s")));
        }
        if i > 0 && t < times[i - 1] {
            return Err(Error::invalid("sample times must be sorted"));
        }
    }
    Ok(())
}

fn readout_p2(state: SpinState, readout: Option<&InstantPulse>) -> f64 {
    match readout {
        Some(p) => instant_pulse(state, p).p2(),
        None => state.p2(),
    }
}

/// Core propagation; inputs are assumed validated.
fn propagate<D, R, F>(
    body: &[Element],
    detuning: &mut D,
    collisions: &CollisionProcess,
    rng: &mut R,
    sample_times: &[f64],
    mut observe: F,
) -> (SpinState, usize)
where
    D: DetuningSource + ?Sized,
    R: Rng + ?Sized,
    F: FnMut(usize, SpinState),
{
    let mut state = SpinState::GROUND;
    let mut t = 0.0;
    let mut delta = detuning.initial();
    let mut next_collision = next_collision_interval(collisions, rng);
    let mut count = 0;
    let mut k = 0;

    for element in body {
        match element {
            Element::Pulse(p) => state = instant_pulse(state, p),
            Element::Drive(seg) => {
                while k < sample_times.len() && sample_times[k] <= t {
                    observe(k, state);
                    k += 1;
                }
                let end = t + seg.duration;
                loop {
                    let sampling = k < sample_times.len() && sample_times[k] < end;
                    let target = if sampling { sample_times[k] } else { end };
                    while next_collision < target {
                        state = evolve_unchecked(state, delta, seg, next_collision - t);
                        t = next_collision;
                        delta = detuning.after_collision();
                        count += 1;
                        next_collision = t + next_collision_interval(collisions, rng);
                    }
                    state = evolve_unchecked(state, delta, seg, target - t);
                    t = target;
                    if !sampling {
                        break;
                    }
                    observe(k, state);
                    k += 1;
                }
            }
        }
    }
    while k < sample_times.len() {
        observe(k, state);
        k += 1;
    }
    (state, count)
}

/// Propagates a single atom through `seq`, observing it at `sample_times`.
pub fn run_atom<D, R>(
    seq: &PulseSequence,
    detuning: &mut D,
    collisions: &CollisionProcess,
    rng: &mut R,
    sample_times: &[f64],
) -> Result<AtomTrajectory>
where
    D: DetuningSource + ?Sized,
    R: Rng + ?Sized,
{
    validate_sequence(seq).into_result()?;
    check_sample_times(sample_times, seq.total_duration())?;
    let readout = seq.readout_pulse();
    let mut states = vec![SpinState::GROUND; sample_times.len()];
    let (final_state, collisions) = propagate(seq.body(), detuning, collisions, rng, sample_times, |k, s| {
        states[k] = s;
    });
    let p2 = states.iter().map(|s| readout_p2(*s, readout.as_ref())).collect();
    Ok(AtomTrajectory { states, p2, final_state, collisions })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_atoms: usize,
    pub detuning_model: ThermalDetuningModel,
    pub collisions: CollisionProcess,
    pub relaxation: RelaxationModel,
    pub master_seed: u64,
    /// Observation grid (s).
    pub sample_times: Vec<f64>,
}

impl EnsembleConfig {
    pub fn new(
        n_atoms: usize,
        detuning_model: ThermalDetuningModel,
        collisions: CollisionProcess,
        master_seed: u64,
    ) -> Self {
        EnsembleConfig {
            n_atoms,
            detuning_model,
            collisions,
            relaxation: RelaxationModel::none(),
            master_seed,
            sample_times: Vec::new(),
        }
    }

    pub fn with_sample_times(mut self, times: Vec<f64>) -> Self {
        self.sample_times = times;
        self
    }

    pub fn with_relaxation(mut self, relaxation: RelaxationModel) -> Self {
        self.relaxation = relaxation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_atoms == 0 {
            return Err(Error::invalid("n_atoms must be >= 1"));
        }
        self.detuning_model.validate()?;
        CollisionProcess::new(self.collisions.rate)?;
        RelaxationModel::new(self.relaxation.t1)?;
        Ok(())
    }

    /// Random streams `(detuning, collisions)` of atom `index`.
    pub fn atom_streams(&self, index: usize) -> (ChaCha8Rng, ChaCha8Rng) {
        let mut det = ChaCha8Rng::seed_from_u64(self.master_seed);
        det.set_stream(2 * index as u64);
        let mut col = ChaCha8Rng::seed_from_u64(self.master_seed);
        col.set_stream(2 * index as u64 + 1);
        (det, col)
    }
}

/// Ensemble observables on the sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub p2: Vec<f64>,
    pub coherence_mag: Vec<f64>,
    pub std_error: Vec<f64>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Raw ensemble means before relaxation is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleAverages {
    pub times: Vec<f64>,
    /// Mean Bloch vector before the analysis pulse.
    pub mean_state: Vec<SpinState>,
    pub p2: Vec<f64>,
    /// Sample standard deviation of single-atom `p2`.
    pub p2_std: Vec<f64>,
    pub n_atoms: usize,
}

#[derive(Clone, Copy, Default)]
struct Sums {
    u: f64,
    v: f64,
    w: f64,
    p2: f64,
    p2_sq: f64,
}

fn chunk_size(n_atoms: usize) -> usize {
    n_atoms.div_ceil(256).max(16)
}

fn simulate_chunk(config: &EnsembleConfig, seq: &PulseSequence, range: std::ops::Range<usize>) -> Vec<Sums> {
    let body = seq.body();
    let readout = seq.readout_pulse();
    let mut sums = vec![Sums::default(); config.sample_times.len()];
    for atom in range {
        let (det_rng, mut col_rng) = config.atom_streams(atom);
        let mut source = ThermalSource::new(config.detuning_model, det_rng);
        propagate(body, &mut source, &config.collisions, &mut col_rng, &config.sample_times, |k, s| {
            let p = readout_p2(s, readout.as_ref());
            let acc = &mut sums[k];
            acc.u += s.u;
            acc.v += s.v;
            acc.w += s.w;
            acc.p2 += p;
            acc.p2_sq += p * p;
        });
    }
    sums
}

fn averages_in_current_pool(config: &EnsembleConfig, seq: &PulseSequence) -> EnsembleAverages {
    let n = config.n_atoms;
    let chunk = chunk_size(n);
    let n_chunks = n.div_ceil(chunk);
    let partials: Vec<Vec<Sums>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| simulate_chunk(config, seq, c * chunk..((c + 1) * chunk).min(n)))
        .collect();

    let m = config.sample_times.len();
    let mut total = vec![Sums::default(); m];
    for part in &partials {
        for (acc, s) in total.iter_mut().zip(part) {
            acc.u += s.u;
            acc.v += s.v;
            acc.w += s.w;
            acc.p2 += s.p2;
            acc.p2_sq += s.p2_sq;
        }
    }
    let nf = n as f64;
    let mut mean_state = Vec::with_capacity(m);
    let mut p2 = Vec::with_capacity(m);
    let mut p2_std = Vec::with_capacity(m);
    for s in &total {
        mean_state.push(SpinState::new(s.u / nf, s.v / nf, s.w / nf));
        let mean = s.p2 / nf;
        p2.push(mean.clamp(0.0, 1.0));
        let var = if n > 1 { ((s.p2_sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
        p2_std.push(var.sqrt());
    }
    EnsembleAverages { times: config.sample_times.clone(), mean_state, p2, p2_std, n_atoms: n }
}

fn prepare(config: &EnsembleConfig, seq: &PulseSequence) -> Result<()> {
    config.validate()?;
    validate_sequence(seq).into_result()?;
    check_sample_times(&config.sample_times, seq.total_duration())
}

/// Ensemble means, parallelised on the global thread pool.
pub fn run_ensemble_averages(config: &EnsembleConfig, seq: &PulseSequence) -> Result<EnsembleAverages> {
    prepare(config, seq)?;
    Ok(averages_in_current_pool(config, seq))
}

/// Like [`run_ensemble_averages`] on a dedicated pool of `threads` workers.
pub fn run_ensemble_averages_with_threads(
    config: &EnsembleConfig,
    seq: &PulseSequence,
    threads: usize,
) -> Result<EnsembleAverages> {
    prepare(config, seq)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(|| averages_in_current_pool(config, seq)))
}

impl EnsembleAverages {
    /// Applies the relaxation envelope and converts to the reported series.
    pub fn to_time_series(&self, relaxation: &RelaxationModel) -> TimeSeries {
        let sqrt_n = (self.n_atoms as f64).sqrt();
        let mut out = TimeSeries {
            times: self.times.clone(),
            p2: Vec::with_capacity(self.times.len()),
            coherence_mag: Vec::with_capacity(self.times.len()),
            std_error: Vec::with_capacity(self.times.len()),
        };
        for (i, &t) in self.times.iter().enumerate() {
            let env = relaxation.envelope(t);
            let s = self.mean_state[i];
            out.p2.push((0.5 + (self.p2[i] - 0.5) * env).clamp(0.0, 1.0));
            out.coherence_mag.push(((s.u * s.u + s.v * s.v).sqrt() * env).clamp(0.0, 1.0));
            out.std_error.push(self.p2_std[i] * env / sqrt_n);
        }
        out
    }
}

pub fn run_ensemble(config: &EnsembleConfig, seq: &PulseSequence) -> Result<TimeSeries> {
    Ok(run_ensemble_averages(config, seq)?.to_time_series(&config.relaxation))
}

pub fn run_ensemble_with_threads(config: &EnsembleConfig, seq: &PulseSequence, threads: usize) -> Result<TimeSeries> {
    Ok(run_ensemble_averages_with_threads(config, seq, threads)?.to_time_series(&config.relaxation))
}

/// Runs one sequence per total time and records its end-of-sequence
/// observables. This is how echo-type curves are measured.
pub fn run_total_time_sweep(config: &EnsembleConfig, spec: &SequenceSpec, totals: &[f64]) -> Result<TimeSeries> {
    let mut out = TimeSeries { times: Vec::new(), p2: Vec::new(), coherence_mag: Vec::new(), std_error: Vec::new() };
    for &t in totals {
        let seq = build_sequence(&spec.with_total_time(t))?;
        let cfg = EnsembleConfig { sample_times: vec![seq.total_duration()], ..config.clone() };
        let mut ts = run_ensemble(&cfg, &seq)?;
        out.times.push(t);
        out.p2.push(ts.p2.remove(0));
        out.coherence_mag.push(ts.coherence_mag.remove(0));
        out.std_error.push(ts.std_error.remove(0));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseScan {
    /// Fringe coordinate `x`; the analysis pulse phase is `x + pi/2`.
    pub phases: Vec<f64>,
    pub p2: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Contrast `A` of `A cos(x + pi/2) + B` on the fringe signal `2 p2 - 1`.
    pub contrast: f64,
    pub offset: f64,
    pub fit: FitResult,
}

fn check_phase_grid(phases: &[f64]) -> Result<()> {
    let mut sorted: Vec<f64> = phases.to_vec();
    if sorted.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("phases must be finite"));
    }
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let n = sorted.len();
    if n < 8 {
        return Err(Error::invalid(format!("phase scan needs at least 8 distinct phases, got {n}")));
    }
    let span = sorted[n - 1] - sorted[0];
    let required = std::f64::consts::TAU * (n as f64 - 1.0) / n as f64;
    if span < required - 1e-9 {
        return Err(Error::invalid(format!("phase scan must cover a full period, spans only {span} rad")));
    }
    Ok(())
}

/// Runs `spec` once per fringe coordinate and fits the resulting fringe.
pub fn phase_scan_contrast(config: &EnsembleConfig, spec: &SequenceSpec, phases: &[f64]) -> Result<PhaseScan> {
    check_phase_grid(phases)?;
    let mut p2 = Vec::with_capacity(phases.len());
    let mut std_error = Vec::with_capacity(phases.len());
    for &x in phases {
        let seq = build_sequence(&spec.with_readout_phase(x + std::f64::consts::FRAC_PI_2))?;
        let cfg = EnsembleConfig { sample_times: vec![seq.total_duration()], ..config.clone() };
        let ts = run_ensemble(&cfg, &seq)?;
        p2.push(ts.p2[0]);
        std_error.push(ts.std_error[0]);
    }
    let fringe: Vec<f64> = p2.iter().map(|p| 2.0 * p - 1.0).collect();
    let model = FitModel::new(ModelKind::CosineFringe { k: Some(1.0) }).with_bounds(vec![(0.0, 1.0), (-1.0, 1.0)]);
    let fit = fit_curve(&model, phases, &fringe, None)?;
    Ok(PhaseScan {
        phases: phases.to_vec(),
        p2,
        std_error,
        contrast: fit.parameters[0],
        offset: fit.parameters[1],
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{evolve_segment, DriveSegment};
    use crate::sequence::SequenceKind;
    use std::f64::consts::{PI, TAU};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn static_echo_is_perfect() {
        let seq = build_sequence(&SequenceSpec::new(SequenceKind::Hahn, 40e-3)).unwrap();
        for delta in [0.0, 123.0, -4567.0, TAU * 2000.0] {
            let traj =
                run_atom(&seq, &mut FixedDetuning(delta), &CollisionProcess::none(), &mut rng(1), &[40e-3]).unwrap();
            let s = traj.states[0];
            assert!(((s.u * s.u + s.v * s.v).sqrt() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn ramsey_phase_wraps_to_fringe_maximum() {
        let spec = SequenceSpec::new(SequenceKind::Ramsey, 1e-3);
        let seq = build_sequence(&spec).unwrap();
        let traj =
            run_atom(&seq, &mut FixedDetuning(TAU * 2000.0), &CollisionProcess::none(), &mut rng(1), &[1e-3]).unwrap();
        assert!((traj.p2[0] - 1.0).abs() < 1e-9);
        let shifted = build_sequence(&spec.with_readout_phase(PI)).unwrap();
        let traj =
            run_atom(&shifted, &mut FixedDetuning(TAU * 2000.0), &CollisionProcess::none(), &mut rng(1), &[1e-3])
                .unwrap();
        assert!(traj.p2[0] < 1e-9);
    }

    #[test]
    fn splitting_matches_direct_evolution() {
        let seg = DriveSegment::driven(7e-3, TAU * 900.0, 0.4, 35.0);
        let seq = PulseSequence { elements: vec![Element::Drive(seg)], readout_phase: 0.0 };
        let samples: Vec<f64> = (0..=70).map(|i| i as f64 * 1e-4).collect();
        let traj = run_atom(&seq, &mut FixedDetuning(210.0), &CollisionProcess::none(), &mut rng(1), &samples).unwrap();
        let direct = evolve_segment(SpinState::GROUND, 210.0, &seg).unwrap();
        assert!(traj.final_state.distance(&direct) < 1e-12);
        assert!(traj.states.last().unwrap().distance(&direct) < 1e-12);
    }

    #[test]
    fn fixed_detuning_collisions_change_nothing() {
        let seg = DriveSegment::driven(20e-3, TAU * 500.0, 0.0, 0.0);
        let seq = PulseSequence { elements: vec![Element::Drive(seg)], readout_phase: 0.0 };
        let traj =
            run_atom(&seq, &mut FixedDetuning(80.0), &CollisionProcess::new(2000.0).unwrap(), &mut rng(5), &[20e-3])
                .unwrap();
        assert!(traj.collisions > 10);
        let direct = evolve_segment(SpinState::GROUND, 80.0, &seg).unwrap();
        assert!(traj.final_state.distance(&direct) < 1e-9);
    }

    #[test]
    fn sample_beyond_end_rejected() {
        let seq = build_sequence(&SequenceSpec::new(SequenceKind::Ramsey, 1e-3)).unwrap();
        let cfg = EnsembleConfig::new(4, ThermalDetuningModel::fixed(), CollisionProcess::none(), 1)
            .with_sample_times(vec![0.0, 2e-3]);
        assert!(run_ensemble(&cfg, &seq).is_err());
        let unsorted = cfg.clone().with_sample_times(vec![1e-3, 0.0]);
        assert!(run_ensemble(&unsorted, &seq).is_err());
    }

    #[test]
    fn zero_atoms_rejected() {
        let seq = build_sequence(&SequenceSpec::new(SequenceKind::Ramsey, 1e-3)).unwrap();
        let cfg = EnsembleConfig::new(0, ThermalDetuningModel::fixed(), CollisionProcess::none(), 1);
        assert!(run_ensemble(&cfg, &seq).is_err());
    }

    #[test]
    fn samples_see_pulses_at_their_instant() {
        // Hahn pi pulse at T/2: a sample there already includes it.
        let seq = build_sequence(&SequenceSpec::new(SequenceKind::Hahn, 2e-3)).unwrap();
        let traj =
            run_atom(&seq, &mut FixedDetuning(500.0), &CollisionProcess::none(), &mut rng(1), &[0.0, 1e-3]).unwrap();
        assert!(traj.states[0].distance(&SpinState::new(0.0, 1.0, 0.0)) < 1e-12);
        // precession gives u = -sin(0.5); the pi pulse about y flips its sign
        let expect = SpinState::new(0.5f64.sin(), 0.5f64.cos(), 0.0);
        assert!(traj.states[1].distance(&expect) < 1e-12);
    }

    #[test]
    fn noiseless_continuous_drive_has_full_contrast() {
        let spec = SequenceSpec::new(SequenceKind::ContinuousDrive, 10e-3).with_rabi(TAU * 4333.0);
        let cfg = EnsembleConfig::new(16, ThermalDetuningModel::fixed(), CollisionProcess::none(), 3);
        let phases: Vec<f64> = (0..16).map(|i| TAU * i as f64 / 16.0).collect();
        let scan = phase_scan_contrast(&cfg, &spec, &phases).unwrap();
        assert!((scan.contrast - 1.0).abs() < 2.0 / 4.0, "{}", scan.contrast);
        assert!((scan.contrast - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_phase_grid_rejected() {
        let spec = SequenceSpec::new(SequenceKind::ContinuousDrive, 10e-3).with_rabi(1000.0);
        let cfg = EnsembleConfig::new(4, ThermalDetuningModel::fixed(), CollisionProcess::none(), 3);
        assert!(phase_scan_contrast(&cfg, &spec, &[0.0, 1.0, 2.0]).is_err());
        let narrow: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
        assert!(phase_scan_contrast(&cfg, &spec, &narrow).is_err());
    }
}
