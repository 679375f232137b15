//! Figure presets for `reproduce`.
//!
//! Each preset fixes the published experimental parameters. Comparison
//! constants are labelled with the figure they come from and land in the
//! `<prefix>_meta.txt` sidecar next to the simulated values.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use super::commands::{
    describe_fit, execute_scan, fit_signal, run_metadata, scan_summary, scan_tables, simulate_and_analyze, suffixed,
    write_run, RunData, ScanOutcome, VERSION,
};
use super::config::{resolve_prefix, RunConfig, SampleGrid, ScanConfig, ScanParameter, Signal, XAxis};
use super::output::{self, num, Table};
use super::CliError;
use crate::analysis::{coherence_time_from_two_contrasts, FitResult, ModelKind};
use crate::error::{Error, Result};
use crate::noise::{calibrate_beta_kt, ThermalDetuningModel};
use crate::sequence::{SequenceKind, SequenceSpec};
use crate::simulator::{phase_scan_contrast, PhaseScan};

pub const FIGURES: [&str; 7] = ["fig2a", "fig2b", "fig2c", "fig2d", "fig3", "fig4", "fig5"];

pub const GAMMA_HIGH: f64 = 175.0;
pub const GAMMA_LOW: f64 = 43.0;
/// Calculated thermal dephasing time of the Ramsey/echo trap (s).
pub const TAU0_CALCULATED: f64 = 9e-3;
/// Inhomogeneous dephasing time inferred from the drive scan (s).
pub const TAU0_FITTED: f64 = 7.7e-3;
pub const T1: f64 = 317e-3;
pub const RAMSEY_DETUNING_HZ: f64 = 2000.0;
pub const WINGS_FRACTION: f64 = 0.1;
pub const WINGS_OFFSET_HZ: f64 = 65.0;
pub const FIG3_RABI_HZ: f64 = 4333.0;
pub const FIG3_TIMES: [f64; 2] = [5e-3, 50e-3];
pub const FIG3_PHASES: usize = 16;
pub const FIG4_RABI_HZ: [f64; 2] = [4800.0, 540.0];
pub const FIG4_POINTS: usize = 4000;
pub const FIG5_RABI_HZ: [f64; 6] = [540.0, 1000.0, 2000.0, 3000.0, 4333.0, 4800.0];
/// Record length of each scan point (s).
pub const FIG5_RECORD: f64 = 1.0;
pub const POINTS_PER_PERIOD: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub figure: &'static str,
    pub key: &'static str,
    pub value: f64,
    pub note: &'static str,
}

const fn r(figure: &'static str, key: &'static str, value: f64, note: &'static str) -> Reference {
    Reference { figure, key, value, note }
}

pub fn references(figure: &str) -> Vec<Reference> {
    match figure {
        "fig2a" => vec![
            r("fig2a", "tau_ms", 18.6, "Ramsey envelope decay time at 175 s^-1"),
            r("fig2a", "tau_calculated_ms", 9.0, "thermal-broadening prediction"),
        ],
        "fig2b" => vec![r("fig2b", "tau_ms", 26.0, "echo decay time at 175 s^-1")],
        "fig2c" => vec![
            r("fig2c", "tau_ms", 5.1, "Ramsey decay time at 43 s^-1"),
            r("fig2c", "revival_ms", 10.0, "small revival from atoms in the trap wings"),
        ],
        "fig2d" => vec![r("fig2d", "tau_ms", 84.0, "echo decay time at 43 s^-1")],
        "fig3" => vec![
            r("fig3", "contrast_T5ms", 0.24, "with continuous pulse, y-axis normalized to 0.2"),
            r("fig3", "contrast_T50ms", 0.11, "with continuous pulse"),
            r("fig3", "contrast_T50ms_no_pulse", 0.01, "without pulse"),
            r("fig3", "tau_c_ms", 58.0, "from the two contrasts with the pulse"),
        ],
        "fig4" => vec![r("fig4", "envelope_decay_ordering", 1.0, "4800 Hz envelope decays slower than 540 Hz")],
        "fig5" => vec![
            r("fig5", "slope_ms_per_hz", 0.022, "linear fit of tau_c against Rabi frequency"),
            r("fig5", "intercept_ms", -4.86, "linear fit of tau_c against Rabi frequency"),
            r("fig5", "gamma0_inverse_ms", 7.7, "inhomogeneous dephasing time inferred from the slope"),
            r("fig5", "tau_c_at_max_rabi_ms", 100.0, "lower bound at the highest Rabi frequency"),
        ],
        _ => Vec::new(),
    }
}

fn detuning_model(tau0: f64, wings: bool) -> ThermalDetuningModel {
    let beta = calibrate_beta_kt(tau0).expect("preset tau0 is positive");
    let (f, o) = if wings { (WINGS_FRACTION, WINGS_OFFSET_HZ * TAU) } else { (0.0, 0.0) };
    ThermalDetuningModel::new(beta, f, o).expect("preset detuning model is valid")
}

fn base(kind: SequenceKind, atoms: usize, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::defaults(kind);
    cfg.ensemble.atoms = atoms;
    cfg.ensemble.seed = seed;
    cfg.ensemble.t1 = T1;
    cfg
}

/// Ramsey (`a`, `c`) or echo (`b`, `d`) panel; `a`/`b` at the high collision
/// rate, `c`/`d` at the low one with the trap-wings component.
pub fn fig2_config(panel: char, atoms: usize, seed: u64) -> Result<RunConfig> {
    let (ramsey, gamma) = match panel {
        'a' => (true, GAMMA_HIGH),
        'b' => (false, GAMMA_HIGH),
        'c' => (true, GAMMA_LOW),
        'd' => (false, GAMMA_LOW),
        _ => return Err(Error::invalid(format!("unknown fig2 panel `{panel}`"))),
    };
    let wings = gamma == GAMMA_LOW;
    let mut cfg;
    if ramsey {
        cfg = base(SequenceKind::Ramsey, atoms, seed);
        cfg.sequence = SequenceSpec::new(SequenceKind::Ramsey, 60e-3).with_detuning_offset(TAU * RAMSEY_DETUNING_HZ);
        cfg.ensemble.grid = SampleGrid::Explicit((0..=1200).map(|i| i as f64 * 50e-6).collect());
    } else {
        cfg = base(SequenceKind::Hahn, atoms, seed);
        // Readout at phase pi so that a perfect echo returns the population to |1>.
        cfg.sequence = SequenceSpec::new(SequenceKind::Hahn, 120e-3).with_readout_phase(PI);
        cfg.analysis.x_axis = XAxis::PiTime;
        cfg.ensemble.grid = SampleGrid::Explicit((1..=120).map(|i| i as f64 * 1e-3).collect());
    }
    cfg.ensemble.detuning = detuning_model(TAU0_CALCULATED, wings);
    cfg.ensemble.collision_rate = gamma;
    cfg.analysis.signal = Signal::Coherence;
    cfg.prefix = format!("fig2{panel}");
    Ok(cfg)
}

/// Continuous drive at 4333 Hz for total time `t`, or the same hold time with
/// no drive when `pulse` is false.
pub fn fig3_spec(t: f64, pulse: bool) -> SequenceSpec {
    if pulse {
        SequenceSpec::new(SequenceKind::ContinuousDrive, t).with_rabi(TAU * FIG3_RABI_HZ)
    } else {
        SequenceSpec::new(SequenceKind::Ramsey, t)
    }
}

pub fn fig3_config(atoms: usize, seed: u64) -> RunConfig {
    let mut cfg = base(SequenceKind::ContinuousDrive, atoms, seed);
    cfg.ensemble.detuning = detuning_model(TAU0_FITTED, false);
    cfg.ensemble.collision_rate = GAMMA_HIGH;
    cfg.analysis.model = Some(ModelKind::CosineFringe { k: Some(1.0) });
    cfg.prefix = "fig3".into();
    cfg
}

pub fn fig3_phases() -> Vec<f64> {
    (0..FIG3_PHASES).map(|i| TAU * i as f64 / FIG3_PHASES as f64).collect()
}

/// Rabi oscillation record at `rabi_hz` with `points` samples, 8 per period.
pub fn rabi_config(rabi_hz: f64, points: usize, atoms: usize, seed: u64) -> RunConfig {
    let mut cfg = base(SequenceKind::RabiExperiment, atoms, seed);
    cfg.ensemble.detuning = detuning_model(TAU0_FITTED, false);
    cfg.ensemble.collision_rate = GAMMA_HIGH;
    cfg.ensemble.grid = SampleGrid::PerPeriod { points_per_period: POINTS_PER_PERIOD, points: Some(points) };
    cfg.sequence = SequenceSpec::new(SequenceKind::RabiExperiment, 0.0).with_rabi(TAU * rabi_hz);
    cfg.sequence.total_time = *cfg.sample_times().expect("rabi grid").last().unwrap();
    cfg.analysis.signal = Signal::Envelope;
    cfg.analysis.model = Some(ModelKind::Exponential);
    cfg
}

pub fn fig4_config(rabi_hz: f64, atoms: usize, seed: u64) -> RunConfig {
    let mut cfg = rabi_config(rabi_hz, FIG4_POINTS, atoms, seed);
    cfg.prefix = format!("fig4_{rabi_hz}hz");
    cfg
}

/// Rabi-frequency scan. Every point records `FIG5_RECORD` seconds so that the
/// slowest envelopes still decay inside the window.
pub fn fig5_scan(atoms: usize, seed: u64) -> ScanConfig {
    let points = (FIG5_RECORD * FIG5_RABI_HZ[0] * POINTS_PER_PERIOD).round() as usize;
    let mut base = rabi_config(FIG5_RABI_HZ[0], points, atoms, seed);
    base.ensemble.grid = SampleGrid::PerPeriod { points_per_period: POINTS_PER_PERIOD, points: None };
    base.sequence.total_time = FIG5_RECORD;
    base.prefix = "fig5".into();
    ScanConfig { base, parameter: ScanParameter::RabiHz, values: FIG5_RABI_HZ.to_vec(), repeats: 1 }
}

#[derive(Debug, Clone)]
pub struct ReproduceOptions {
    pub seed: u64,
    pub atoms: usize,
    pub prefix: Option<String>,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        ReproduceOptions { seed: 1, atoms: 10_000, prefix: None }
    }
}

/// Simulated results of a preset, for callers that want numbers rather than
/// files.
#[derive(Debug, Clone)]
pub enum FigureResult {
    Run { data: RunData, extra: Vec<FitResult> },
    Phase { scans: Vec<(String, f64, PhaseScan)>, tau_c: Option<f64> },
    Rabi { runs: Vec<(f64, RunData)> },
    Scan(ScanOutcome),
}

pub struct Reproduction {
    pub figure: String,
    pub result: FigureResult,
    pub files: Vec<PathBuf>,
    pub report: Vec<String>,
}

fn meta_line(lines: &mut Vec<String>, key: &str, value: impl std::fmt::Display) {
    lines.push(format!("{key} = {value}"));
}

fn write_sidecar(path: &Path, figure: &str, opts: &ReproduceOptions, simulated: &[(String, f64)]) -> Result<()> {
    let mut lines = vec![format!("# ddsim {VERSION} reproduction of {figure}")];
    meta_line(&mut lines, "figure", figure);
    meta_line(&mut lines, "seed", opts.seed);
    meta_line(&mut lines, "atoms", opts.atoms);
    for (k, v) in simulated {
        meta_line(&mut lines, &format!("simulated.{k}"), num(*v));
    }
    for r in references(figure) {
        lines.push(format!("reference.{}.{} = {}    # {}", r.figure, r.key, r.value, r.note));
    }
    lines.push(String::new());
    std::fs::write(path, lines.join("\n")).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

fn tau_of(fit: &FitResult) -> f64 {
    fit.tau().map_or(f64::NAN, |(t, _)| t)
}

pub fn reproduce(figure: &str, opts: &ReproduceOptions) -> std::result::Result<Reproduction, CliError> {
    if !FIGURES.contains(&figure) {
        return Err(CliError::usage(format!("unknown figure id `{figure}`; valid ids: {}", FIGURES.join(", "))));
    }
    let prefix = resolve_prefix(opts.prefix.as_deref().unwrap_or(figure));
    let mut files = Vec::new();
    let mut report = Vec::new();
    let mut simulated: Vec<(String, f64)> = Vec::new();

    let result = match figure {
        "fig2a" | "fig2b" | "fig2c" | "fig2d" => {
            let panel = figure.chars().last().unwrap();
            let cfg = fig2_config(panel, opts.atoms, opts.seed)?;
            let data = simulate_and_analyze(&cfg)?;
            let (xs, ys) = data.signal(cfg.analysis.signal);
            let other = if matches!(panel, 'a' | 'c') { ModelKind::Gaussian } else { ModelKind::KuhrEnvelope };
            let extra: Vec<FitResult> = fit_signal(other, xs, ys).into_iter().collect();
            for f in data.fit.iter().flatten().chain(&extra) {
                simulated.push((format!("tau_{}_s", f.kind.name()), tau_of(f)));
                report.push(describe_fit(f));
            }
            if let Some(t) = crate::analysis::one_over_e_time(xs, ys) {
                simulated.push(("one_over_e_s".into(), t));
            }
            files.extend(write_run(&cfg, &data, &prefix, &extra.iter().collect::<Vec<_>>())?);
            FigureResult::Run { data, extra }
        }
        "fig3" => {
            let cfg = fig3_config(opts.atoms, opts.seed);
            let ens = cfg.ensemble_config(Vec::new())?;
            let phases = fig3_phases();
            let mut scans = Vec::new();
            for (label, t, pulse) in [
                ("T5ms_pulse", FIG3_TIMES[0], true),
                ("T50ms_pulse", FIG3_TIMES[1], true),
                ("T50ms_no_pulse", FIG3_TIMES[1], false),
            ] {
                let scan = phase_scan_contrast(&ens, &fig3_spec(t, pulse), &phases)?;
                simulated.push((format!("contrast_{label}"), scan.contrast));
                report.push(format!(
                    "{label}: A = {:.5} ± {:.1e}, B = {:.5}",
                    scan.contrast, scan.fit.std_errors[0], scan.offset
                ));
                scans.push((label.to_string(), t, scan));
            }
            let tau_c =
                coherence_time_from_two_contrasts(scans[0].2.contrast, scans[0].1, scans[1].2.contrast, scans[1].1)
                    .ok();
            if let Some(t) = tau_c {
                simulated.push(("tau_c_s".into(), t));
                report.push(format!("coherence time from the two driven contrasts: {:.2} ms", t * 1e3));
            }
            let meta = run_metadata(&cfg);
            let mut phase_rows = Vec::new();
            let mut contrast_rows = Vec::new();
            for (label, t, s) in &scans {
                for i in 0..s.phases.len() {
                    phase_rows.push(vec![label.clone(), num(s.phases[i]), num(s.p2[i]), num(s.std_error[i])]);
                }
                contrast_rows.push(vec![
                    label.clone(),
                    num(*t),
                    num(s.contrast),
                    num(s.fit.std_errors[0]),
                    num(s.offset),
                ]);
            }
            let mut m = meta.clone();
            m.push(("readout_phase".into(), "x + pi/2".into()));
            let header = |c: &[&str]| c.iter().map(|s| s.to_string()).collect::<Vec<_>>();
            let path = suffixed(&prefix, "_phase.csv");
            output::write_table(
                &path,
                &Table { metadata: m, header: header(&output::PHASE_COLUMNS), rows: phase_rows },
            )?;
            files.push(path);
            let mut m = meta;
            m.push(("fringe".into(), "A cos(x + pi/2) + B on 2 p2 - 1".into()));
            let path = suffixed(&prefix, "_contrast.csv");
            output::write_table(
                &path,
                &Table { metadata: m, header: header(&output::CONTRAST_COLUMNS), rows: contrast_rows },
            )?;
            files.push(path);
            FigureResult::Phase { scans, tau_c }
        }
        "fig4" => {
            let mut runs = Vec::new();
            for hz in FIG4_RABI_HZ {
                let cfg = fig4_config(hz, opts.atoms, opts.seed);
                let data = simulate_and_analyze(&cfg)?;
                match &data.fit {
                    Some(Ok(f)) => {
                        simulated.push((format!("tau_c_{hz}hz_s"), tau_of(f)));
                        report.push(format!("{hz} Hz: {}", describe_fit(f)));
                    }
                    Some(Err(e)) => report.push(format!("{hz} Hz: envelope fit failed: {e}")),
                    None => {}
                }
                files.extend(write_run(&cfg, &data, &suffixed(&prefix, &format!("_{hz}hz")), &[])?);
                runs.push((hz, data));
            }
            FigureResult::Rabi { runs }
        }
        "fig5" => {
            let scan = fig5_scan(opts.atoms, opts.seed);
            let outcome = execute_scan(&scan);
            let (points, fit) = scan_tables(&scan, &outcome);
            let path = suffixed(&prefix, "_scan.csv");
            output::write_table(&path, &points)?;
            files.push(path);
            if let Some(t) = fit {
                let path = suffixed(&prefix, "_scan_fit.csv");
                output::write_table(&path, &t)?;
                files.push(path);
            }
            for p in &outcome.points {
                simulated.push((format!("tau_c_{}hz_s", p.value), p.tau_c));
            }
            if let (Some(f), Some(r2)) = (&outcome.linear, outcome.r_squared) {
                simulated.push(("slope_ms_per_hz".into(), f.parameters[0]));
                simulated.push(("intercept_ms".into(), f.parameters[1]));
                simulated.push(("r_squared".into(), r2));
            }
            report.extend(scan_summary(&outcome));
            FigureResult::Scan(outcome)
        }
        _ => unreachable!(),
    };

    let path = suffixed(&prefix, "_meta.txt");
    write_sidecar(&path, figure, opts, &simulated)?;
    files.push(path);
    report.extend(files.iter().map(|p| format!("wrote {}", p.display())));
    Ok(Reproduction { figure: figure.to_string(), result, files, report })
}
