//! JSON configuration documents and CSV series sidecars.
//!
//! A document has the same shape as a serialized [`SystemModel`], except that
//! any entry of `series` may point at a column of a CSV file instead of
//! listing values inline. Series shorter than the horizon are tiled; longer
//! ones are truncated.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ges::GesUnit;
use crate::model::{Bus, CgUnit, Line, RgUnit, Study, SystemModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeriesSource {
    Values(Vec<f64>),
    File { file: PathBuf, column: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDocument {
    buses: Vec<Bus>,
    #[serde(default)]
    lines: Vec<Line>,
    #[serde(default)]
    cg_units: Vec<CgUnit>,
    #[serde(default)]
    rg_units: Vec<RgUnit>,
    #[serde(default)]
    ges_units: Vec<GesUnit>,
    #[serde(default)]
    series: BTreeMap<String, SeriesSource>,
    study: Study,
}

/// Parses and validates a configuration document. Relative CSV paths are
/// resolved against `base_dir`.
pub fn load_system_config(text: &str, base_dir: &Path) -> Result<SystemModel> {
    let doc: ConfigDocument = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let horizon = doc.study.horizon_hours;
    let mut csv_cache: BTreeMap<PathBuf, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    let mut series = BTreeMap::new();
    for (name, source) in doc.series {
        let values = match source {
            SeriesSource::Values(v) => v,
            SeriesSource::File { file, column } => {
                let path = base_dir.join(&file);
                if !csv_cache.contains_key(&path) {
                    let table = read_csv_columns(&path)?;
                    csv_cache.insert(path.clone(), table);
                }
                csv_cache[&path].get(&column).cloned().ok_or_else(|| Error::DanglingSeries {
                    owner: format!("series `{name}` ({})", file.display()),
                    name: column.clone(),
                })?
            }
        };
        if values.is_empty() {
            return Err(Error::invariant("series nonempty", format!("series `{name}`")));
        }
        series.insert(name, fit_to_horizon(&values, horizon));
    }
    let model = SystemModel {
        buses: doc.buses,
        lines: doc.lines,
        cg_units: doc.cg_units,
        rg_units: doc.rg_units,
        ges_units: doc.ges_units,
        series,
        study: doc.study,
    };
    model.validate()?;
    Ok(model)
}

pub fn load_system_file(path: &Path) -> Result<SystemModel> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    load_system_config(&text, base)
}

/// Tiles or truncates `values` to exactly `horizon` entries.
pub fn fit_to_horizon(values: &[f64], horizon: usize) -> Vec<f64> {
    values.iter().copied().cycle().take(horizon).collect()
}

/// Reads every column of a headed CSV file as floats.
pub fn read_csv_columns(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: path.to_path_buf(), source },
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Parse(format!(
                    "{}: row {}, column `{}`: `{field}` is not a number",
                    path.display(),
                    line + 2,
                    headers.get(col).map_or("?", String::as_str)
                ))
            })?;
            if col < columns.len() {
                columns[col].push(v);
            }
        }
    }
    Ok(headers.into_iter().zip(columns).collect())
}

/// Serializes a model as a self-contained document (inline series).
pub fn to_config_json(model: &SystemModel) -> String {
    serde_json::to_string_pretty(model).expect("model serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "buses": [{"id": 0, "kind": "PQ", "load": {"series": "load", "scale": 50.0}}],
        "cg_units": [{"bus": 0, "capacity": 100.0, "mttf": 1000.0, "mttr": 10.0}],
        "series": {"load": [0.5, 1.0]},
        "study": {"horizon_hours": 24}
    }"#;

    #[test]
    fn minimal_document() {
        let m = load_system_config(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(m.horizon(), 24);
        assert_eq!(m.series["load"].len(), 24);
        assert_eq!(m.series["load"][3], 1.0);
    }

    #[test]
    fn dangling_bus_is_reported() {
        let text = MINIMAL.replace(r#""cg_units": [{"bus": 0"#, r#""cg_units": [{"bus": 99"#);
        let err = load_system_config(&text, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::DanglingBus { bus: 99, .. }), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn dangling_series_is_reported() {
        let text = MINIMAL.replace(r#""series": "load""#, r#""series": "nope""#);
        let err = load_system_config(&text, Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::DanglingSeries { .. }), "{err}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = load_system_config("{\"buses\": [", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn round_trip() {
        let m = load_system_config(MINIMAL, Path::new(".")).unwrap();
        let again = load_system_config(&to_config_json(&m), Path::new(".")).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn csv_sidecar_columns() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("s.csv"), "a,b\n1,0.1\n2,0.2\n").unwrap();
        let text = MINIMAL.replace(
            r#""series": {"load": [0.5, 1.0]}"#,
            r#""series": {"load": {"file": "s.csv", "column": "b"}}"#,
        );
        let m = load_system_config(&text, dir.path()).unwrap();
        assert_eq!(&m.series["load"][..3], &[0.1, 0.2, 0.1]);
    }
}
