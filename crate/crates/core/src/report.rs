//! Report files: JSON for structured results, CSV for series. Floats are
//! written with 10 significant digits so repeated runs diff cleanly.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::capacity_credit::CcResult;
use crate::error::{Error, Result};
use crate::reliability::ReliabilityReport;
use crate::simulate::{CurtailmentRecord, OperationRow};

/// Rounds to 10 significant digits.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.9e}").parse().unwrap_or(v)
}

/// CSV text of a float.
pub fn fmt_float(v: f64) -> String {
    let r = round_sig(v);
    if r == 0.0 {
        "0".to_string()
    } else if r.abs() < 1e-5 || r.abs() >= 1e15 {
        format!("{r:e}")
    } else {
        r.to_string()
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                *v = serde_json::Number::from_f64(round_sig(x)).map_or(Value::Null, Value::Number);
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Pretty JSON with every float rounded to 10 significant digits.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut v = serde_json::to_value(value).expect("report serializes");
    round_value(&mut v);
    let mut text = serde_json::to_string_pretty(&v).expect("value serializes");
    text.push('\n');
    text
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    }
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// A CSV table held as text cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_csv())
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &to_json(value))
}

/// Running EENS estimate and its coefficient of variation per sample.
pub fn convergence_table(report: &ReliabilityReport) -> Table {
    let mut t = Table::new(&["sample", "eens_running_mwh_per_yr", "cov"]);
    let mut sum = 0.0;
    for (k, (s, cov)) in report.samples.iter().zip(&report.convergence).enumerate() {
        sum += s.eens_practical_mwh;
        t.push(vec![
            (k + 1).to_string(),
            fmt_float(sum / (k + 1) as f64),
            cov.map_or(String::new(), fmt_float),
        ]);
    }
    t
}

pub fn operations_table(rows: &[OperationRow]) -> Table {
    let mut t = Table::new(&["hour", "unit", "soc", "charge_mw", "discharge_mw", "state"]);
    for r in rows {
        t.push(vec![
            r.hour.to_string(),
            r.unit.to_string(),
            fmt_float(r.soc),
            fmt_float(r.charge),
            fmt_float(r.discharge),
            r.state.label().to_string(),
        ]);
    }
    t
}

/// One row per bus with nonzero curtailment.
pub fn curtailment_table(records: &[CurtailmentRecord], years: usize) -> Table {
    let mut t = Table::new(&["scenario", "year", "hour", "bus", "mw", "cause"]);
    for r in records {
        for (bus, &mw) in r.bus_mw.iter().enumerate() {
            if mw > 0.0 {
                t.push(vec![
                    (r.sample / years.max(1)).to_string(),
                    (r.sample % years.max(1)).to_string(),
                    r.hour.to_string(),
                    bus.to_string(),
                    fmt_float(mw),
                    r.cause.label().to_string(),
                ]);
            }
        }
    }
    t
}

/// Paths written by [`write_evaluation`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Written {
    pub files: Vec<PathBuf>,
}

/// Writes `reliability.json`, `cc.json` when present, and the optional
/// plot and debug tables.
pub fn write_evaluation(
    out: &Path,
    report: &ReliabilityReport,
    cc: Option<&CcResult>,
    operations: Option<&[OperationRow]>,
    records: Option<&[CurtailmentRecord]>,
) -> Result<Written> {
    let mut w = Written::default();
    let mut put = |name: &str, text: String| -> Result<()> {
        let p = out.join(name);
        write_file(&p, &text)?;
        w.files.push(p);
        Ok(())
    };
    put("reliability.json", to_json(report))?;
    if let Some(cc) = cc {
        put("cc.json", to_json(cc))?;
    }
    if let Some(ops) = operations {
        put("convergence.csv", convergence_table(report).to_csv())?;
        put("operations.csv", operations_table(ops).to_csv())?;
    }
    if let Some(rec) = records {
        put("curtailment.csv", curtailment_table(rec, report.years).to_csv())?;
    }
    Ok(w)
}
