//! `run` and `scan`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use super::config::{RunConfig, ScanConfig, ScanParameter, Signal, XAxis};
use super::output::{self, num, Metadata, Table};
use super::CliError;
use crate::analysis::DEFAULT_REGIME_FACTOR;
use crate::analysis::{fit_curve, r_squared, rolling_std_envelope, Envelope, FitModel, FitResult, ModelKind};
use crate::bloch::InstantPulse;
use crate::error::Result;
use crate::sequence::{build_sequence, Element, SequenceKind, SequenceSpec};
use crate::simulator::{run_ensemble, run_total_time_sweep, TimeSeries};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Simulated data of one run plus what the analysis step consumed.
#[derive(Debug, Clone)]
pub struct RunData {
    /// Times are on the configured x-axis.
    pub series: TimeSeries,
    pub envelope: Option<Envelope>,
    pub fit: Option<Result<FitResult>>,
}

impl RunData {
    /// Abscissa and ordinate that the configured fit uses.
    pub fn signal(&self, signal: Signal) -> (&[f64], &[f64]) {
        match (signal, &self.envelope) {
            (Signal::Envelope, Some(env)) => (&env.times, &env.values),
            (Signal::P2, _) => (&self.series.times, &self.series.p2),
            _ => (&self.series.times, &self.series.coherence_mag),
        }
    }

    pub fn converged_fit(&self) -> Option<&FitResult> {
        match &self.fit {
            Some(Ok(f)) if f.converged => Some(f),
            _ => None,
        }
    }
}

/// Fraction of the total time at which the first pi pulse fires, if any.
pub fn pi_time_fraction(kind: SequenceKind) -> Option<f64> {
    let seq = build_sequence(&SequenceSpec::new(kind, 1.0)).ok()?;
    let mut t = 0.0;
    for e in &seq.elements {
        match e {
            Element::Pulse(InstantPulse { angle, .. }) if (*angle - PI).abs() < 1e-12 => return Some(t),
            _ => t += e.duration(),
        }
    }
    None
}

pub fn simulate(cfg: &RunConfig) -> Result<TimeSeries> {
    let times = cfg.sample_times()?;
    if cfg.sequence.kind.is_refocusing() {
        let ens = cfg.ensemble_config(Vec::new())?;
        let mut series = run_total_time_sweep(&ens, &cfg.sequence, &times)?;
        if cfg.analysis.x_axis == XAxis::PiTime {
            if let Some(f) = pi_time_fraction(cfg.sequence.kind) {
                series.times.iter_mut().for_each(|t| *t *= f);
            }
        }
        Ok(series)
    } else {
        let seq = build_sequence(&cfg.sequence)?;
        run_ensemble(&cfg.ensemble_config(times)?, &seq)
    }
}

pub fn fit_signal(kind: ModelKind, xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    fit_curve(&FitModel::new(kind), xs, ys, None)
}

pub fn analyze(cfg: &RunConfig, series: TimeSeries) -> Result<RunData> {
    let envelope = match cfg.analysis.signal {
        Signal::Envelope => Some(rolling_std_envelope(&series, cfg.analysis.window)?),
        _ => None,
    };
    let mut data = RunData { series, envelope, fit: None };
    if let Some(kind) = cfg.analysis.model {
        let (xs, ys) = data.signal(cfg.analysis.signal);
        data.fit = Some(fit_signal(kind, xs, ys));
    }
    Ok(data)
}

pub fn simulate_and_analyze(cfg: &RunConfig) -> Result<RunData> {
    analyze(cfg, simulate(cfg)?)
}

fn kind_name(kind: SequenceKind) -> String {
    match kind {
        SequenceKind::Ramsey => "ramsey".into(),
        SequenceKind::Hahn => "hahn".into(),
        SequenceKind::Cpmg(n) => format!("cpmg{n}"),
        SequenceKind::Uhrig(n) => format!("uhrig{n}"),
        SequenceKind::ContinuousDrive => "continuous".into(),
        SequenceKind::RabiExperiment => "rabi".into(),
    }
}

fn signal_name(s: Signal) -> &'static str {
    match s {
        Signal::Coherence => "coherence_mag",
        Signal::P2 => "p2",
        Signal::Envelope => "envelope",
    }
}

/// Metadata shared by every file of a run.
pub fn run_metadata(cfg: &RunConfig) -> Metadata {
    let x = match (cfg.sequence.kind.is_refocusing(), cfg.analysis.x_axis) {
        (false, _) => "time",
        (true, XAxis::Total) => "total_time",
        (true, XAxis::PiTime) => "time_to_first_pi_pulse",
    };
    vec![
        ("ddsim".into(), VERSION.into()),
        ("seed".into(), cfg.ensemble.seed.to_string()),
        ("atoms".into(), cfg.ensemble.atoms.to_string()),
        ("sequence".into(), kind_name(cfg.sequence.kind)),
        ("x".into(), x.into()),
        ("units".into(), "SI (s, rad/s), probabilities dimensionless".into()),
    ]
}

fn with(mut meta: Metadata, extra: &[(&str, String)]) -> Metadata {
    meta.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
    meta
}

pub fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes the timeseries, envelope and fit files of one run.
pub fn write_run(cfg: &RunConfig, data: &RunData, prefix: &Path, extra_fits: &[&FitResult]) -> Result<Vec<PathBuf>> {
    let meta = run_metadata(cfg);
    let mut written = Vec::new();
    let path = suffixed(prefix, "_timeseries.csv");
    output::write_table(&path, &output::timeseries_table(meta.clone(), &data.series))?;
    written.push(path);
    if let Some(env) = &data.envelope {
        let path = suffixed(prefix, "_envelope.csv");
        let m = with(meta.clone(), &[("window", env.window.to_string()), ("timestamps", "window_center".into())]);
        output::write_table(&path, &output::envelope_table(m, env))?;
        written.push(path);
    }
    let mut fits: Vec<&FitResult> = Vec::new();
    if let Some(Ok(f)) = &data.fit {
        fits.push(f);
    }
    fits.extend_from_slice(extra_fits);
    if !fits.is_empty() {
        let path = suffixed(prefix, "_fit.csv");
        let m = with(meta, &[("signal", signal_name(cfg.analysis.signal).into())]);
        output::write_table(&path, &output::fit_table(m, &fits))?;
        written.push(path);
    }
    Ok(written)
}

pub fn describe_fit(fit: &FitResult) -> String {
    let params: Vec<String> = fit
        .kind
        .parameter_names()
        .iter()
        .zip(fit.parameters.iter().zip(&fit.std_errors))
        .map(|(n, (v, e))| format!("{n}={v:.6e}±{e:.2e}"))
        .collect();
    format!(
        "{} fit: {} (converged={}, iterations={})",
        fit.kind.name(),
        params.join(" "),
        fit.converged,
        fit.iterations
    )
}

pub fn cmd_run(cfg: &RunConfig) -> std::result::Result<Vec<String>, CliError> {
    let data = simulate_and_analyze(cfg)?;
    let prefix = cfg.output_prefix();
    let files = write_run(cfg, &data, &prefix, &[])?;
    let mut report: Vec<String> = files.iter().map(|p| format!("wrote {}", p.display())).collect();
    match &data.fit {
        None => {}
        Some(Ok(fit)) => {
            report.push(describe_fit(fit));
            if !fit.converged && cfg.analysis.mandatory {
                return Err(CliError::analysis(format!(
                    "mandatory {} fit did not converge after {} iterations",
                    fit.kind.name(),
                    fit.iterations
                )));
            }
        }
        Some(Err(e)) => {
            if cfg.analysis.mandatory {
                return Err(CliError::analysis(format!("mandatory fit failed: {e}")));
            }
            report.push(format!("warning: fit failed: {e}"));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub value: f64,
    /// NaN when the point failed.
    pub tau_c: f64,
    pub tau_c_err: f64,
    pub converged: bool,
    pub in_regime: bool,
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub parameter: ScanParameter,
    pub points: Vec<ScanPoint>,
    /// `tau_c` in ms against the scanned value.
    pub linear: Option<FitResult>,
    pub r_squared: Option<f64>,
}

impl ScanOutcome {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| !p.converged).count()
    }
}

fn in_regime(cfg: &RunConfig) -> bool {
    cfg.sequence.rabi > 0.0 && cfg.sequence.rabi / PI >= DEFAULT_REGIME_FACTOR * cfg.ensemble.collision_rate
}

fn scan_point(scan: &ScanConfig, value: f64) -> ScanPoint {
    let cfg = scan.point(value);
    let mut taus = Vec::with_capacity(scan.repeats);
    let mut fit_err = f64::NAN;
    for r in 0..scan.repeats {
        let mut c = cfg.clone();
        c.ensemble.seed = cfg.ensemble.seed.wrapping_add(r as u64);
        let tau = simulate_and_analyze(&c)
            .ok()
            .and_then(|d| d.converged_fit().and_then(|f| f.tau()))
            .filter(|(t, _)| t.is_finite() && *t > 0.0);
        match tau {
            Some((t, e)) => {
                taus.push(t);
                fit_err = e;
            }
            None => {
                return ScanPoint {
                    value,
                    tau_c: f64::NAN,
                    tau_c_err: f64::NAN,
                    converged: false,
                    in_regime: in_regime(&cfg),
                }
            }
        }
    }
    let n = taus.len() as f64;
    let mean = taus.iter().sum::<f64>() / n;
    let err = if taus.len() > 1 {
        (taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        fit_err
    };
    ScanPoint { value, tau_c: mean, tau_c_err: err, converged: true, in_regime: in_regime(&cfg) }
}

pub fn execute_scan(scan: &ScanConfig) -> ScanOutcome {
    let points: Vec<ScanPoint> = scan.values.iter().map(|&v| scan_point(scan, v)).collect();
    let ok: Vec<&ScanPoint> = points.iter().filter(|p| p.converged).collect();
    let (linear, r2) = if ok.len() >= 3 {
        let xs: Vec<f64> = ok.iter().map(|p| p.value).collect();
        let ys: Vec<f64> = ok.iter().map(|p| p.tau_c * 1e3).collect();
        match fit_curve(&FitModel::new(ModelKind::Linear), &xs, &ys, None) {
            Ok(fit) => {
                let r2 = r_squared(&fit, &xs, &ys);
                (Some(fit), Some(r2))
            }
            Err(_) => (None, None),
        }
    } else {
        (None, None)
    };
    ScanOutcome { parameter: scan.parameter, points, linear, r_squared: r2 }
}

pub fn scan_tables(scan: &ScanConfig, outcome: &ScanOutcome) -> (Table, Option<Table>) {
    let meta = with(
        run_metadata(&scan.base),
        &[("scan", scan.parameter.name().into()), ("repeats", scan.repeats.to_string())],
    );
    let rows = outcome
        .points
        .iter()
        .map(|p| vec![num(p.value), num(p.tau_c), num(p.tau_c_err), p.converged.to_string(), p.in_regime.to_string()])
        .collect();
    let points =
        Table { metadata: meta.clone(), header: output::SCAN_COLUMNS.iter().map(|c| c.to_string()).collect(), rows };
    let fit = outcome.linear.as_ref().map(|f| {
        let m = with(
            meta,
            &[
                ("x", scan.parameter.name().into()),
                ("y", "tau_c_ms".into()),
                ("r_squared", num(outcome.r_squared.unwrap_or(f64::NAN))),
            ],
        );
        output::fit_table(m, &[f])
    });
    (points, fit)
}

pub fn cmd_scan(scan: &ScanConfig) -> std::result::Result<Vec<String>, CliError> {
    let outcome = execute_scan(scan);
    let prefix = scan.base.output_prefix();
    let (points, fit) = scan_tables(scan, &outcome);
    let mut report = Vec::new();
    let path = suffixed(&prefix, "_scan.csv");
    output::write_table(&path, &points)?;
    report.push(format!("wrote {}", path.display()));
    if let Some(t) = fit {
        let path = suffixed(&prefix, "_scan_fit.csv");
        output::write_table(&path, &t)?;
        report.push(format!("wrote {}", path.display()));
    }
    report.extend(scan_summary(&outcome));
    let failed = outcome.failures();
    if 2 * failed > outcome.points.len() {
        return Err(CliError::analysis(format!("{failed} of {} scan points failed to converge", outcome.points.len())));
    }
    Ok(report)
}

pub fn scan_summary(outcome: &ScanOutcome) -> Vec<String> {
    let mut lines = Vec::new();
    for p in &outcome.points {
        let regime = if p.in_regime { "" } else { " (outside the fast-drive regime)" };
        if p.converged {
            lines.push(format!(
                "{} = {}: tau_c = {:.3} ms ± {:.3} ms{regime}",
                outcome.parameter.name(),
                p.value,
                p.tau_c * 1e3,
                p.tau_c_err * 1e3
            ));
        } else {
            lines.push(format!("{} = {}: fit failed{regime}", outcome.parameter.name(), p.value));
        }
    }
    match (&outcome.linear, outcome.r_squared) {
        (Some(f), Some(r2)) => lines.push(format!(
            "linear fit: tau_c[ms] = {:.5} * {} + {:.4}  (R^2 = {r2:.4})",
            f.parameters[0],
            outcome.parameter.name(),
            f.parameters[1]
        )),
        _ => lines.push("linear fit: not enough converged points".into()),
    }
    lines
}
