//! CSV files written by the command-line front end.
//!
//! Every file starts with one metadata line, `# key=value; key=value; ...`,
//! followed by a header row and the data. Floats are written with Rust's
//! shortest round-trip formatting, so reading a file and writing it again
//! reproduces it byte for byte.
//!
//! | file | columns |
//! |------|---------|
//! | `<prefix>_timeseries.csv` | `t_s,p2,coherence_mag,std_error` |
//! | `<prefix>_envelope.csv` | `t_s,envelope` |
//! | `<prefix>_fit.csv` | `model,parameter,value,std_error,converged,iterations,residual_norm` |
//! | `<prefix>_phase.csv` | `series,x_rad,p2,std_error` |
//! | `<prefix>_contrast.csv` | `series,total_time_s,contrast,contrast_err,offset` |
//! | `<prefix>_scan.csv` | `value,tau_c_s,tau_c_err_s,converged,in_regime` |

use std::path::Path;

use crate::analysis::{Envelope, FitResult};
use crate::error::{Error, Result};
use crate::simulator::TimeSeries;

pub const TIMESERIES_COLUMNS: [&str; 4] = ["t_s", "p2", "coherence_mag", "std_error"];
pub const ENVELOPE_COLUMNS: [&str; 2] = ["t_s", "envelope"];
pub const FIT_COLUMNS: [&str; 7] =
    ["model", "parameter", "value", "std_error", "converged", "iterations", "residual_norm"];
pub const PHASE_COLUMNS: [&str; 4] = ["series", "x_rad", "p2", "std_error"];
pub const CONTRAST_COLUMNS: [&str; 5] = ["series", "total_time_s", "contrast", "contrast_err", "offset"];
pub const SCAN_COLUMNS: [&str; 5] = ["value", "tau_c_s", "tau_c_err_s", "converged", "in_regime"];

pub type Metadata = Vec<(String, String)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub metadata: Metadata,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(format!("csv: {e}"))
}

fn metadata_line(meta: &Metadata) -> Result<String> {
    let mut parts = Vec::with_capacity(meta.len());
    for (k, v) in meta {
        if k.contains(['=', ';', '\n']) || v.contains([';', '\n']) {
            return Err(Error::invalid(format!("metadata entry `{k}={v}` contains a reserved character")));
        }
        parts.push(format!("{k}={v}"));
    }
    Ok(format!("# {}\n", parts.join("; ")))
}

fn parse_metadata(line: &str) -> Result<Metadata> {
    let body = line.strip_prefix("# ").unwrap_or_else(|| line.trim_start_matches('#'));
    if body.is_empty() {
        return Ok(Vec::new());
    }
    body.split("; ")
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Io(format!("malformed metadata entry `{kv}`")))
        })
        .collect()
}

pub fn table_to_string(table: &Table) -> Result<String> {
    let mut out = metadata_line(&table.metadata)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(&table.header).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(format!("csv: {e}")))?;
    out.push_str(std::str::from_utf8(&bytes).map_err(|e| Error::Io(e.to_string()))?);
    Ok(out)
}

pub fn table_from_str(text: &str) -> Result<Table> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    if !first.starts_with('#') {
        return Err(Error::Io("missing `#` metadata line".to_string()));
    }
    let metadata = parse_metadata(first)?;
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(rest.as_bytes());
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(csv_err)?.iter().map(String::from).collect());
    }
    Ok(Table { metadata, header, rows })
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, table_to_string(table)?)
        .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn read_table(path: &Path) -> Result<Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    table_from_str(&text)
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

fn check_header(table: &Table, cols: &[&str]) -> Result<()> {
    if table.header != header(cols) {
        return Err(Error::Io(format!("expected columns {cols:?}, found {:?}", table.header)));
    }
    Ok(())
}

fn parse_cell<T: std::str::FromStr>(cell: &str, row: usize) -> Result<T> {
    cell.parse().map_err(|_| Error::Io(format!("row {row}: cannot parse `{cell}`")))
}

pub fn timeseries_table(metadata: Metadata, ts: &TimeSeries) -> Table {
    let rows = (0..ts.len())
        .map(|i| vec![num(ts.times[i]), num(ts.p2[i]), num(ts.coherence_mag[i]), num(ts.std_error[i])])
        .collect();
    Table { metadata, header: header(&TIMESERIES_COLUMNS), rows }
}

pub fn timeseries_from_table(table: &Table) -> Result<TimeSeries> {
    check_header(table, &TIMESERIES_COLUMNS)?;
    let mut ts = TimeSeries { times: Vec::new(), p2: Vec::new(), coherence_mag: Vec::new(), std_error: Vec::new() };
    for (i, row) in table.rows.iter().enumerate() {
        ts.times.push(parse_cell(&row[0], i)?);
        ts.p2.push(parse_cell(&row[1], i)?);
        ts.coherence_mag.push(parse_cell(&row[2], i)?);
        ts.std_error.push(parse_cell(&row[3], i)?);
    }
    Ok(ts)
}

pub fn envelope_table(metadata: Metadata, env: &Envelope) -> Table {
    let rows = env.times.iter().zip(&env.values).map(|(t, v)| vec![num(*t), num(*v)]).collect();
    Table { metadata, header: header(&ENVELOPE_COLUMNS), rows }
}

pub fn envelope_from_table(table: &Table, window: usize) -> Result<Envelope> {
    check_header(table, &ENVELOPE_COLUMNS)?;
    let mut env = Envelope { times: Vec::new(), values: Vec::new(), window };
    for (i, row) in table.rows.iter().enumerate() {
        env.times.push(parse_cell(&row[0], i)?);
        env.values.push(parse_cell(&row[1], i)?);
    }
    Ok(env)
}

/// One row per fitted parameter; several fits may share a file.
pub fn fit_table(metadata: Metadata, fits: &[&FitResult]) -> Table {
    let mut rows = Vec::new();
    for fit in fits {
        for (j, name) in fit.kind.parameter_names().iter().enumerate() {
            rows.push(vec![
                fit.kind.name().to_string(),
                name.to_string(),
                num(fit.parameters[j]),
                num(fit.std_errors[j]),
                fit.converged.to_string(),
                fit.iterations.to_string(),
                num(fit.residual_norm),
            ]);
        }
    }
    Table { metadata, header: header(&FIT_COLUMNS), rows }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub model: String,
    pub parameter: String,
    pub value: f64,
    pub std_error: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: f64,
}

pub fn fit_rows_from_table(table: &Table) -> Result<Vec<FitRow>> {
    check_header(table, &FIT_COLUMNS)?;
    table
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(FitRow {
                model: r[0].clone(),
                parameter: r[1].clone(),
                value: parse_cell(&r[2], i)?,
                std_error: parse_cell(&r[3], i)?,
                converged: parse_cell(&r[4], i)?,
                iterations: parse_cell(&r[5], i)?,
                residual_norm: parse_cell(&r[6], i)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{fit_curve, FitModel, ModelKind};

    fn meta() -> Metadata {
        vec![("ddsim".into(), "0.1.0".into()), ("seed".into(), "3".into()), ("units".into(), "t_s=s p2=1".into())]
    }

    #[test]
    fn timeseries_round_trip_is_byte_exact() {
        let ts = TimeSeries {
            times: vec![0.0, 1e-3, 0.1 + 0.2, 1.0 / 3.0],
            p2: vec![0.5, 0.25, 1.0, 0.123456789012345],
            coherence_mag: vec![1.0, 0.9, 2f64.sqrt() / 2.0, 0.0],
            std_error: vec![0.0, 1e-17, 3.5e-3, 0.01],
        };
        let text = table_to_string(&timeseries_table(meta(), &ts)).unwrap();
        assert!(text.starts_with("# ddsim=0.1.0; seed=3; units=t_s=s p2=1\nt_s,p2,coherence_mag,std_error\n"));
        let table = table_from_str(&text).unwrap();
        assert_eq!(table.metadata, meta());
        let back = timeseries_from_table(&table).unwrap();
        assert_eq!(back, ts);
        assert_eq!(table_to_string(&timeseries_table(table.metadata, &back)).unwrap(), text);
    }

    #[test]
    fn fit_rows_round_trip() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 1e-3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * (-x / 0.02).exp() + 0.1).collect();
        let fit = fit_curve(&FitModel::new(ModelKind::Exponential), &xs, &ys, None).unwrap();
        let text = table_to_string(&fit_table(meta(), &[&fit])).unwrap();
        let rows = fit_rows_from_table(&table_from_str(&text).unwrap()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].parameter, "tau");
        assert_eq!(rows[1].value, fit.parameters[1]);
        assert!(rows[1].converged);
    }

    #[test]
    fn reserved_characters_in_metadata_rejected() {
        let table = Table { metadata: vec![("a".into(), "x;y".into())], header: vec!["c".into()], rows: vec![] };
        assert!(table_to_string(&table).is_err());
    }
}
