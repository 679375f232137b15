//! Plain-text run configuration.
//!
//! ```text
//! [ensemble]
//! atoms = 10000
//! seed = 1
//! tau0_ms = 9
//! collision_rate = 175
//! sample_times_ms = 0:0.5:40
//!
//! [sequence]
//! kind = ramsey
//! total_time_ms = 40
//!
//! [analysis]
//! model = kuhr
//!
//! [output]
//! prefix = ramsey
//! ```
//!
//! Frequencies are entered in Hz and times in ms; everything is converted to
//! rad/s and s here, once.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use crate::analysis::{ModelKind, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::noise::{calibrate_beta_kt, CollisionProcess, RelaxationModel, ThermalDetuningModel};
use crate::sequence::{build_sequence, SequenceKind, SequenceSpec};
use crate::simulator::EnsembleConfig;

/// Environment variable naming the directory relative output prefixes live in.
pub const OUT_DIR_ENV: &str = "DDSIM_OUT_DIR";

#[derive(Debug, Clone, PartialEq)]
pub enum SampleGrid {
    /// Explicit times (s).
    Explicit(Vec<f64>),
    /// Uniform grid tied to the Rabi period.
    PerPeriod { points_per_period: f64, points: Option<usize> },
    /// Chosen from the sequence.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Signal {
    Coherence,
    P2,
    /// Rolling standard deviation of `p2`.
    Envelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    /// Total sequence time.
    Total,
    /// Time from the first pi/2 pulse to the first pi pulse.
    PiTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSettings {
    pub atoms: usize,
    pub seed: u64,
    pub detuning: ThermalDetuningModel,
    pub collision_rate: f64,
    pub t1: f64,
    pub grid: SampleGrid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSettings {
    /// `None` skips fitting.
    pub model: Option<ModelKind>,
    pub signal: Signal,
    pub window: usize,
    pub mandatory: bool,
    pub x_axis: XAxis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ensemble: EnsembleSettings,
    pub sequence: SequenceSpec,
    pub analysis: AnalysisSettings,
    pub prefix: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanParameter {
    RabiHz,
    CollisionRate,
    TotalTimeMs,
}

impl ScanParameter {
    pub fn name(&self) -> &'static str {
        match self {
            ScanParameter::RabiHz => "rabi_hz",
            ScanParameter::CollisionRate => "collision_rate",
            ScanParameter::TotalTimeMs => "total_time_ms",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub base: RunConfig,
    pub parameter: ScanParameter,
    /// In the parameter's input unit.
    pub values: Vec<f64>,
    pub repeats: usize,
}

impl RunConfig {
    /// Defaults for a sequence kind, before any file overrides.
    pub fn defaults(kind: SequenceKind) -> Self {
        let (model, signal, x_axis) = match kind {
            SequenceKind::Ramsey => (ModelKind::KuhrEnvelope, Signal::Coherence, XAxis::Total),
            SequenceKind::Hahn | SequenceKind::Cpmg(_) | SequenceKind::Uhrig(_) => {
                (ModelKind::Gaussian, Signal::Coherence, XAxis::PiTime)
            }
            SequenceKind::ContinuousDrive => (ModelKind::Exponential, Signal::Coherence, XAxis::Total),
            SequenceKind::RabiExperiment => (ModelKind::Exponential, Signal::Envelope, XAxis::Total),
        };
        RunConfig {
            ensemble: EnsembleSettings {
                atoms: 10_000,
                seed: 1,
                detuning: ThermalDetuningModel::fixed(),
                collision_rate: 0.0,
                t1: f64::INFINITY,
                grid: SampleGrid::Auto,
            },
            sequence: SequenceSpec::new(kind, 0.0),
            analysis: AnalysisSettings { model: Some(model), signal, window: DEFAULT_WINDOW, mandatory: false, x_axis },
            prefix: "ddsim".to_string(),
        }
    }

    pub fn ensemble_config(&self, sample_times: Vec<f64>) -> Result<EnsembleConfig> {
        let e = &self.ensemble;
        Ok(EnsembleConfig::new(e.atoms, e.detuning, CollisionProcess::new(e.collision_rate)?, e.seed)
            .with_relaxation(RelaxationModel::new(e.t1)?)
            .with_sample_times(sample_times))
    }

    /// Sample grid in seconds. For echo-type sequences these are the total
    /// times of the sweep.
    pub fn sample_times(&self) -> Result<Vec<f64>> {
        let seq = &self.sequence;
        match &self.ensemble.grid {
            SampleGrid::Explicit(t) => Ok(t.clone()),
            SampleGrid::PerPeriod { points_per_period, points } => {
                if !(seq.rabi > 0.0) {
                    return Err(Error::invalid("points_per_period needs rabi_hz > 0"));
                }
                let dt = TAU / seq.rabi / points_per_period;
                let n = match points {
                    Some(n) => *n,
                    None => (seq.total_time / dt * (1.0 + 1e-12)).floor() as usize + 1,
                };
                Ok((0..n).map(|i| i as f64 * dt).collect())
            }
            SampleGrid::Auto => {
                let t = seq.total_time;
                if seq.kind.is_refocusing() {
                    Ok((1..=50).map(|i| t * i as f64 / 50.0).collect())
                } else {
                    Ok((0..=100).map(|i| t * i as f64 / 100.0).collect())
                }
            }
        }
    }

    pub fn output_prefix(&self) -> PathBuf {
        resolve_prefix(&self.prefix)
    }
}

/// Applies [`OUT_DIR_ENV`] to a relative prefix.
pub fn resolve_prefix(prefix: &str) -> PathBuf {
    let p = Path::new(prefix);
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if p.is_relative() && !dir.is_empty() => Path::new(&dir).join(p),
        _ => p.to_path_buf(),
    }
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

/// Parsed `key = value` lines keyed by `section.key`.
struct RawConfig {
    entries: HashMap<String, Entry>,
    /// Section names with the line of their header.
    sections: Vec<(String, usize)>,
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

const SECTIONS: [&str; 5] = ["ensemble", "sequence", "analysis", "output", "scan"];

fn parse_raw(text: &str) -> Result<RawConfig> {
    let mut entries = HashMap::new();
    let mut sections = Vec::new();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| config_err(line, format!("malformed section header `{content}`")))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(config_err(line, format!("unknown section [{name}], expected one of {SECTIONS:?}")));
            }
            if sections.iter().any(|(s, _)| s == name) {
                return Err(config_err(line, format!("section [{name}] appears twice")));
            }
            sections.push((name.to_string(), line));
            section = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(config_err(line, format!("expected `key = value`, got `{content}`")));
        };
        let Some(sec) = &section else {
            return Err(config_err(line, "key outside of any section"));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(config_err(line, "empty key or value"));
        }
        let full = format!("{sec}.{key}");
        if let Some(prev) = entries.get(&full) {
            let prev: &Entry = prev;
            return Err(config_err(line, format!("duplicate key `{key}` (first set on line {})", prev.line)));
        }
        entries.insert(full, Entry { value: value.to_string(), line, used: false });
    }
    Ok(RawConfig { entries, sections })
}

impl RawConfig {
    fn section_line(&self, name: &str) -> Option<usize> {
        self.sections.iter().find(|(s, _)| s == name).map(|(_, l)| *l)
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => parse_float(&v).map(Some).map_err(|m| config_err(line, format!("{key}: {m}"))),
        }
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<usize>()
                .map(Some)
                .map_err(|_| config_err(line, format!("{key}: expected a nonnegative integer, got `{v}`"))),
        }
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => match v.as_str() {
                "true" | "yes" | "1" => Ok(Some(true)),
                "false" | "no" | "0" => Ok(Some(false)),
                _ => Err(config_err(line, format!("{key}: expected true or false, got `{v}`"))),
            },
        }
    }

    fn finish(&self) -> Result<()> {
        let mut unused: Vec<(&String, &Entry)> = self.entries.iter().filter(|(_, e)| !e.used).collect();
        unused.sort_by_key(|(_, e)| e.line);
        match unused.first() {
            Some((k, e)) => Err(config_err(e.line, format!("unknown key `{k}`"))),
            None => Ok(()),
        }
    }
}

fn parse_float(s: &str) -> std::result::Result<f64, String> {
    match s {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|_| format!("expected a number, got `{s}`")),
    }
}

/// `start:step:stop` (inclusive) or a comma separated list.
fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(format!("range must be start:step:stop, got `{s}`"));
        }
        let (a, h, b) = (parse_float(parts[0])?, parse_float(parts[1])?, parse_float(parts[2])?);
        if !(h > 0.0) || !a.is_finite() || !b.is_finite() || b < a {
            return Err(format!("range `{s}` needs step > 0 and stop >= start"));
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        if n > 10_000_000 {
            return Err(format!("range `{s}` has too many points"));
        }
        return Ok((0..=n).map(|i| a + i as f64 * h).collect());
    }
    s.split(',').map(|p| parse_float(p.trim())).collect()
}

fn parse_kind(v: &str, n_pulses: Option<usize>, line: usize) -> Result<SequenceKind> {
    let need = |n: Option<usize>| n.ok_or_else(|| config_err(line, format!("kind `{v}` requires n_pulses")));
    Ok(match v {
        "ramsey" => SequenceKind::Ramsey,
        "hahn" | "echo" => SequenceKind::Hahn,
        "cpmg" => SequenceKind::Cpmg(need(n_pulses)?),
        "uhrig" => SequenceKind::Uhrig(need(n_pulses)?),
        "continuous" | "continuous_drive" => SequenceKind::ContinuousDrive,
        "rabi" => SequenceKind::RabiExperiment,
        _ => {
            return Err(config_err(
                line,
                format!("unknown sequence kind `{v}`, expected ramsey, hahn, cpmg, uhrig, continuous or rabi"),
            ))
        }
    })
}

fn parse_model(v: &str, line: usize) -> Result<Option<ModelKind>> {
    Ok(Some(match v {
        "none" => return Ok(None),
        "exponential" => ModelKind::Exponential,
        "gaussian" => ModelKind::Gaussian,
        "kuhr" => ModelKind::KuhrEnvelope,
        "cosine" => ModelKind::CosineFringe { k: Some(1.0) },
        "cosine_free" => ModelKind::CosineFringe { k: None },
        "linear" => ModelKind::Linear,
        _ => {
            return Err(config_err(
                line,
                format!(
                    "unknown model `{v}`, expected exponential, gaussian, kuhr, cosine, cosine_free, linear or none"
                ),
            ))
        }
    }))
}

fn ms(x: f64) -> f64 {
    x * 1e-3
}

fn parse_run(raw: &mut RawConfig) -> Result<RunConfig> {
    for required in ["ensemble", "sequence"] {
        if raw.section_line(required).is_none() {
            return Err(config_err(0, format!("missing section [{required}]")));
        }
    }
    let n_pulses = raw.count("sequence.n_pulses")?;
    let (kind_str, kind_line) =
        raw.take("sequence.kind").ok_or_else(|| config_err(0, "missing key `kind` in [sequence]"))?;
    let kind = parse_kind(&kind_str, n_pulses, kind_line)?;
    let mut cfg = RunConfig::defaults(kind);

    // ensemble
    let e = &mut cfg.ensemble;
    if let Some(n) = raw.count("ensemble.atoms")? {
        if n == 0 {
            return Err(config_err(raw.line_of("ensemble.atoms"), "atoms must be >= 1"));
        }
        e.atoms = n;
    }
    if let Some((v, line)) = raw.take("ensemble.seed") {
        e.seed =
            v.parse().map_err(|_| config_err(line, format!("seed: expected a 64-bit unsigned integer, got `{v}`")))?;
    }
    let tau0 = raw.float("ensemble.tau0_ms")?;
    let beta = raw.float("ensemble.beta_kt")?;
    let beta_kt = match (tau0, beta) {
        (Some(_), Some(_)) => {
            return Err(config_err(raw.line_of("ensemble.beta_kt"), "set either tau0_ms or beta_kt, not both"))
        }
        (Some(t), None) => calibrate_beta_kt(ms(t))
            .map_err(|err| config_err(raw.line_of("ensemble.tau0_ms"), format!("tau0_ms: {err}")))?,
        (None, Some(b)) => b,
        (None, None) => 0.0,
    };
    let wf = raw.float("ensemble.wings_fraction")?.unwrap_or(0.0);
    let wo = raw.float("ensemble.wings_offset_hz")?.unwrap_or(0.0) * TAU;
    e.detuning = ThermalDetuningModel::new(beta_kt, wf, wo).map_err(|err| {
        let line = [raw.line_of("ensemble.wings_fraction"), raw.line_of("ensemble.beta_kt")]
            .into_iter()
            .find(|&l| l > 0)
            .unwrap_or(0);
        config_err(line, err.to_string())
    })?;
    if let Some(g) = raw.float("ensemble.collision_rate")? {
        CollisionProcess::new(g).map_err(|err| config_err(raw.line_of("ensemble.collision_rate"), err.to_string()))?;
        e.collision_rate = g;
    }
    if let Some(t1) = raw.float("ensemble.t1_ms")? {
        RelaxationModel::new(ms(t1)).map_err(|err| config_err(raw.line_of("ensemble.t1_ms"), err.to_string()))?;
        e.t1 = ms(t1);
    }
    let times = raw.take("ensemble.sample_times_ms");
    let ppp = raw.float("ensemble.points_per_period")?;
    let points = raw.count("ensemble.points")?;
    e.grid = match (times, ppp) {
        (Some(_), Some(_)) => {
            return Err(config_err(
                raw.line_of("ensemble.points_per_period"),
                "set either sample_times_ms or points_per_period, not both",
            ))
        }
        (Some((v, line)), None) => {
            let t = parse_list(&v).map_err(|m| config_err(line, format!("sample_times_ms: {m}")))?;
            if t.is_empty() || t.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || t.windows(2).any(|w| w[1] < w[0]) {
                return Err(config_err(line, "sample_times_ms must be nonnegative and sorted"));
            }
            SampleGrid::Explicit(t.into_iter().map(ms).collect())
        }
        (None, Some(p)) => {
            if !(p > 0.0) {
                return Err(config_err(raw.line_of("ensemble.points_per_period"), "points_per_period must be > 0"));
            }
            SampleGrid::PerPeriod { points_per_period: p, points }
        }
        (None, None) => {
            if points.is_some() {
                return Err(config_err(raw.line_of("ensemble.points"), "points needs points_per_period"));
            }
            SampleGrid::Auto
        }
    };

    // sequence
    let s = &mut cfg.sequence;
    if let Some(r) = raw.float("sequence.rabi_hz")? {
        s.rabi = r * TAU;
    }
    if let Some(d) = raw.float("sequence.detuning_offset_hz")? {
        s.detuning_offset = d * TAU;
    }
    if let Some(p) = raw.float("sequence.readout_phase")? {
        s.readout_phase = p;
    }
    if let Some(ts) = raw.float("sequence.phase_switch_period_ms")? {
        s.phase_switch_period = Some(ms(ts));
    }
    let total = raw.float("sequence.total_time_ms")?.map(ms);
    let total_line = raw.line_of("sequence.total_time_ms");
    s.total_time = match (total, &cfg.ensemble.grid) {
        (Some(t), _) => t,
        (None, SampleGrid::Explicit(t)) => *t.last().unwrap(),
        (None, SampleGrid::PerPeriod { points: Some(_), .. }) => 0.0,
        (None, _) => return Err(config_err(kind_line, "total_time_ms is required for this sampling mode")),
    };
    if let SampleGrid::PerPeriod { points: Some(_), .. } = cfg.ensemble.grid {
        let t = cfg.sample_times().map_err(|err| config_err(kind_line, err.to_string()))?;
        cfg.sequence.total_time = *t.last().unwrap();
    }

    // analysis
    let a = &mut cfg.analysis;
    if let Some((v, line)) = raw.take("analysis.model") {
        a.model = parse_model(&v, line)?;
    }
    if let Some((v, line)) = raw.take("analysis.signal") {
        a.signal = match v.as_str() {
            "coherence" => Signal::Coherence,
            "p2" => Signal::P2,
            "envelope" => Signal::Envelope,
            _ => return Err(config_err(line, format!("unknown signal `{v}`, expected coherence, p2 or envelope"))),
        };
    }
    if let Some(w) = raw.count("analysis.window")? {
        if w < 2 {
            return Err(config_err(raw.line_of("analysis.window"), "window must be >= 2"));
        }
        a.window = w;
    }
    if let Some(m) = raw.boolean("analysis.mandatory")? {
        a.mandatory = m;
    }
    if let Some((v, line)) = raw.take("analysis.x_axis") {
        a.x_axis = match v.as_str() {
            "total" => XAxis::Total,
            "pi_time" => XAxis::PiTime,
            _ => return Err(config_err(line, format!("unknown x_axis `{v}`, expected total or pi_time"))),
        };
    }

    if let Some((v, _)) = raw.take("output.prefix") {
        cfg.prefix = v;
    }

    validate_run(&cfg, raw, total_line, kind_line)?;
    Ok(cfg)
}

/// Builds every sequence the run would need so that errors surface with a
/// line number before any simulation starts.
fn validate_run(cfg: &RunConfig, raw: &RawConfig, total_line: usize, kind_line: usize) -> Result<()> {
    let anchor = |err: Error| {
        let msg = err.to_string();
        let line = if msg.contains("phase switch") {
            match raw.line_of("sequence.phase_switch_period_ms") {
                0 => total_line.max(kind_line),
                l => l,
            }
        } else if msg.contains("rabi") {
            match raw.line_of("sequence.rabi_hz") {
                0 => kind_line,
                l => l,
            }
        } else if msg.contains("sample") {
            match raw.line_of("ensemble.sample_times_ms") {
                0 => kind_line,
                l => l,
            }
        } else {
            total_line.max(kind_line)
        };
        config_err(line, msg)
    };
    let times = cfg.sample_times().map_err(anchor)?;
    if cfg.sequence.kind.is_refocusing() {
        if times.iter().any(|&t| t <= 0.0) {
            return Err(config_err(
                raw.line_of("ensemble.sample_times_ms").max(kind_line),
                "sweep totals for echo-type and continuous sequences must be > 0",
            ));
        }
        for &t in &times {
            build_sequence(&cfg.sequence.with_total_time(t)).map_err(anchor)?;
        }
    } else {
        let seq = build_sequence(&cfg.sequence).map_err(anchor)?;
        let end = seq.total_duration();
        if let Some(&last) = times.last() {
            if last > end * (1.0 + 1e-12) + 1e-15 {
                return Err(anchor(Error::invalid(format!(
                    "sample time {last} s lies beyond the sequence end {end} s"
                ))));
            }
        }
    }
    if cfg.analysis.signal == Signal::Envelope && times.len() < cfg.analysis.window {
        return Err(config_err(
            raw.line_of("analysis.window").max(kind_line),
            format!("envelope window {} exceeds the {} sample points", cfg.analysis.window, times.len()),
        ));
    }
    Ok(())
}

pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let mut raw = parse_raw(text)?;
    if let Some(line) = raw.section_line("scan") {
        return Err(config_err(line, "[scan] section is only accepted by the scan command"));
    }
    let cfg = parse_run(&mut raw)?;
    raw.finish()?;
    Ok(cfg)
}

pub fn parse_scan_config(text: &str) -> Result<ScanConfig> {
    let mut raw = parse_raw(text)?;
    if raw.section_line("scan").is_none() {
        return Err(config_err(0, "missing section [scan]"));
    }
    let (p, p_line) = raw.take("scan.parameter").ok_or_else(|| config_err(0, "missing key `parameter` in [scan]"))?;
    let parameter = match p.as_str() {
        "rabi_hz" => ScanParameter::RabiHz,
        "collision_rate" => ScanParameter::CollisionRate,
        "total_time_ms" => ScanParameter::TotalTimeMs,
        _ => {
            return Err(config_err(
                p_line,
                format!("unknown scan parameter `{p}`, expected rabi_hz, collision_rate or total_time_ms"),
            ))
        }
    };
    let (v, v_line) = raw.take("scan.values").ok_or_else(|| config_err(0, "missing key `values` in [scan]"))?;
    let values = parse_list(&v).map_err(|m| config_err(v_line, format!("values: {m}")))?;
    if values.len() < 3 {
        return Err(config_err(
            v_line,
            format!("a scan needs at least 3 values for the linear fit, got {}", values.len()),
        ));
    }
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(config_err(v_line, "scan values must be strictly monotonic"));
    }
    if values.iter().any(|x| !(x.is_finite() && *x > 0.0) && !(parameter == ScanParameter::CollisionRate && *x == 0.0))
    {
        return Err(config_err(v_line, "scan values must be finite and positive"));
    }
    let repeats = raw.count("scan.repeats")?.unwrap_or(1);
    if repeats == 0 {
        return Err(config_err(raw.line_of("scan.repeats"), "repeats must be >= 1"));
    }

    let base_probe = raw.line_of("sequence.total_time_ms");
    // The base run may omit the scanned quantity; give it a placeholder so the
    // base validation passes and check every scanned point instead.
    let placeholder = match parameter {
        ScanParameter::RabiHz if raw.line_of("sequence.rabi_hz") == 0 => Some(("sequence.rabi_hz", values[0])),
        ScanParameter::TotalTimeMs if base_probe == 0 => Some(("sequence.total_time_ms", values[0])),
        _ => None,
    };
    if let Some((key, value)) = placeholder {
        raw.entries.insert(key.to_string(), Entry { value: value.to_string(), line: v_line, used: false });
    }
    let base = parse_run(&mut raw)?;
    raw.finish()?;
    let scan = ScanConfig { base, parameter, values, repeats };
    for &x in &scan.values {
        let point = scan.point(x);
        validate_run(&point, &raw, v_line, v_line)?;
    }
    Ok(scan)
}

impl ScanConfig {
    /// Base configuration with the scanned parameter set to `value`.
    pub fn point(&self, value: f64) -> RunConfig {
        let mut cfg = self.base.clone();
        match self.parameter {
            ScanParameter::RabiHz => cfg.sequence.rabi = value * TAU,
            ScanParameter::CollisionRate => cfg.ensemble.collision_rate = value,
            ScanParameter::TotalTimeMs => cfg.sequence.total_time = ms(value),
        }
        if let SampleGrid::PerPeriod { points: Some(_), .. } = cfg.ensemble.grid {
            if let Some(&last) = cfg.sample_times().ok().as_ref().and_then(|t| t.last()) {
                cfg.sequence.total_time = last;
            }
        }
        cfg
    }
}

pub fn load_run_config(path: &Path) -> Result<RunConfig> {
    parse_run_config(&read(path)?)
}

pub fn load_scan_config(path: &Path) -> Result<ScanConfig> {
    parse_scan_config(&read(path)?)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))
}
