//! Result tables and their CSV form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{ExperimentConfig, ExperimentKind};
use super::fmt_float;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    UInt,
    Float,
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    UInt(u64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::UInt(v) => Some(v as f64),
            Cell::Float(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_u64(&self) -> Option<u64> {
        match *self {
            Cell::UInt(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::UInt(v) => v.to_string(),
            Cell::Float(v) => fmt_float(*v),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn parse(text: &str, ty: ColumnType) -> Result<Cell> {
        if text.is_empty() {
            return Ok(Cell::Empty);
        }
        let bad = || Error::invalid(format!("cannot parse `{text}` as {ty:?}"));
        Ok(match ty {
            ColumnType::UInt => Cell::UInt(text.parse().map_err(|_| bad())?),
            ColumnType::Float => Cell::Float(text.parse().map_err(|_| bad())?),
            ColumnType::Text => Cell::Text(text.to_string()),
        })
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::UInt(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::UInt(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Float)
    }
}

pub fn schema(kind: ExperimentKind) -> &'static [(&'static str, ColumnType)] {
    use ColumnType::*;
    match kind {
        ExperimentKind::CsRecovery => &[
            ("n", UInt),
            ("m", UInt),
            ("delta", Float),
            ("snr_db", Float),
            ("seed", UInt),
            ("algorithm", Text),
            ("noise_variance", Float),
            ("lambda", Float),
            ("mse", Float),
            ("nmse", Float),
        ],
        ExperimentKind::LossyCompression => &[
            ("curve", Text),
            ("param", Float),
            ("seed", UInt),
            ("n", UInt),
            ("rate", Float),
            ("distortion", Float),
        ],
        ExperimentKind::DenoiseScalar => &[
            ("n", UInt),
            ("noise_variance", Float),
            ("seed", UInt),
            ("mse_map", Float),
            ("mse_mmse", Float),
            ("ratio", Float),
        ],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    kind: ExperimentKind,
    rows: Vec<Vec<Cell>>,
}

impl ResultsTable {
    pub fn new(kind: ExperimentKind) -> Self {
        ResultsTable {
            kind,
            rows: Vec::new(),
        }
    }

    pub fn kind(&self) -> ExperimentKind {
        self.kind
    }

    pub fn columns(&self) -> Vec<&'static str> {
        schema(self.kind).iter().map(|c| c.0).collect()
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        let cols = schema(self.kind);
        if row.len() != cols.len() {
            return Err(Error::invalid(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                cols.len()
            )));
        }
        for (cell, (name, ty)) in row.iter().zip(cols) {
            let ok = matches!(
                (cell, ty),
                (Cell::Empty, _)
                    | (Cell::UInt(_), ColumnType::UInt)
                    | (Cell::Float(_), ColumnType::Float)
                    | (Cell::Text(_), ColumnType::Text)
            );
            if !ok {
                return Err(Error::invalid(format!(
                    "cell {cell:?} does not fit column `{name}`"
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn extend(&mut self, other: ResultsTable) -> Result<()> {
        if other.kind != self.kind {
            return Err(Error::invalid(
                "cannot merge tables of different experiments",
            ));
        }
        self.rows.extend(other.rows);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        schema(self.kind).iter().position(|c| c.0 == name)
    }

    /// Cell `name` of every row.
    pub fn column(&self, name: &str) -> Result<Vec<&Cell>> {
        let k = self
            .column_index(name)
            .ok_or_else(|| Error::invalid(format!("no column `{name}`")))?;
        Ok(self.rows.iter().map(|r| &r[k]).collect())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns())?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv_str(kind: ExperimentKind, text: &str) -> Result<Self> {
        let cols = schema(kind);
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let expect: Vec<&str> = cols.iter().map(|c| c.0).collect();
        if header != expect {
            return Err(Error::invalid(format!(
                "header {header:?} does not match {expect:?}"
            )));
        }
        let mut table = ResultsTable::new(kind);
        for rec in r.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .zip(cols)
                .map(|(t, (_, ty))| Cell::parse(t, *ty))
                .collect::<Result<Vec<_>>>()?;
            table.push(row)?;
        }
        Ok(table)
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    version: &'a str,
    experiment: &'a str,
    rows: usize,
    seeds: &'a [u64],
    config: &'a ExperimentConfig,
}

/// Path of the metadata file written next to a table.
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.toml");
    csv_path.with_file_name(name)
}

/// Writes `table` to `path` and a metadata sidecar with the config, seeds and
/// library version. An empty table is refused and nothing is written.
pub fn emit_csv(table: &ResultsTable, config: &ExperimentConfig, path: &Path) -> Result<()> {
    if table.is_empty() {
        return Err(Error::InvalidOperation(
            "refusing to write an empty results table".into(),
        ));
    }
    let body = table.to_csv_string()?;
    let meta = Metadata {
        version: env!("CARGO_PKG_VERSION"),
        experiment: config.experiment.name(),
        rows: table.len(),
        seeds: &config.seeds,
        config,
    };
    let meta =
        toml::to_string(&meta).map_err(|e| Error::InvalidOperation(format!("metadata: {e}")))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, body)?;
    fs::write(metadata_path(path), meta)?;
    Ok(())
}

pub fn read_csv(kind: ExperimentKind, path: &Path) -> Result<ResultsTable> {
    ResultsTable::from_csv_str(kind, &fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn denoise_row(seed: u64, a: f64, b: f64) -> Vec<Cell> {
        vec![
            256usize.into(),
            0.25.into(),
            seed.into(),
            a.into(),
            b.into(),
            (a / b).into(),
        ]
    }

    #[test]
    fn rejects_malformed_rows() {
        let mut t = ResultsTable::new(ExperimentKind::DenoiseScalar);
        assert!(t.push(vec![Cell::Empty]).is_err());
        let mut row = denoise_row(1, 0.1, 0.2);
        row[0] = Cell::Float(1.0);
        assert!(t.push(row).is_err());
    }

    #[test]
    fn empty_table_not_written() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let cfg = ExperimentConfig::default_for(ExperimentKind::DenoiseScalar);
        let t = ResultsTable::new(ExperimentKind::DenoiseScalar);
        assert!(emit_csv(&t, &cfg, &path).is_err());
        assert!(!path.exists());
        assert!(!metadata_path(&path).exists());
    }

    #[test]
    fn sidecar_records_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/denoise.csv");
        let cfg = ExperimentConfig::default_for(ExperimentKind::DenoiseScalar);
        let mut t = ResultsTable::new(ExperimentKind::DenoiseScalar);
        t.push(denoise_row(3, 0.01, 0.02)).unwrap();
        emit_csv(&t, &cfg, &path).unwrap();
        let meta = fs::read_to_string(metadata_path(&path)).unwrap();
        assert!(meta.contains("version = "));
        assert!(meta.contains("experiment = \"denoise-scalar\""));
        assert_eq!(read_csv(ExperimentKind::DenoiseScalar, &path).unwrap(), t);
    }

    proptest! {
        #[test]
        fn csv_roundtrip(rows in prop::collection::vec((any::<u64>(), -1e300f64..1e300, 1e-300f64..1e300), 1..20)) {
            let mut t = ResultsTable::new(ExperimentKind::DenoiseScalar);
            for (s, a, b) in rows {
                t.push(denoise_row(s, a, b)).unwrap();
            }
            let text = t.to_csv_string().unwrap();
            let back = ResultsTable::from_csv_str(ExperimentKind::DenoiseScalar, &text).unwrap();
            prop_assert_eq!(back.len(), t.len());
            for (r, o) in back.rows().iter().zip(t.rows()) {
                prop_assert_eq!(&r[2], &o[2]);
                for k in [3, 4, 5] {
                    let (x, y) = (r[k].as_f64().unwrap(), o[k].as_f64().unwrap());
                    prop_assert!((x - y).abs() <= 1e-8 * y.abs(), "{} vs {}", x, y);
                }
            }
            // Rendering is a fixed point after one round trip.
            prop_assert_eq!(back.to_csv_string().unwrap(), text);
        }
    }
}
