//! Rectangular result tables with byte-stable CSV and JSON encodings.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
    /// Where the quantity comes from, e.g. "lattice SVD" or "plumbing".
    pub source: String,
    /// Printed without a fractional part.
    #[serde(default)]
    pub integer: bool,
}

impl Column {
    pub fn real(name: &str, unit: &str, source: &str) -> Self {
        Self { name: name.into(), unit: unit.into(), source: source.into(), integer: false }
    }

    pub fn integer(name: &str, unit: &str, source: &str) -> Self {
        Self { name: name.into(), unit: unit.into(), source: source.into(), integer: true }
    }

    fn header(&self) -> String {
        format!("{} [{}]", self.name, self.unit)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
    /// Sorted key-value metadata (scenario, tolerances, seed, ...).
    pub metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct JsonTable {
    columns: Vec<String>,
    units: Vec<String>,
    rows: Vec<Vec<Option<f64>>>,
    metadata: JsonMetadata,
}

#[derive(Serialize, Deserialize)]
struct JsonMetadata {
    sources: Vec<String>,
    integer_columns: Vec<String>,
    #[serde(flatten)]
    extra: BTreeMap<String, String>,
}

fn format_value(v: f64, integer: bool) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if integer && v.fract() == 0.0 && v.abs() < 9.0e15 {
        format!("{}", v as i64)
    } else {
        ryu::Buffer::new().format_finite(v).to_string()
    }
}

fn parse_value(s: &str) -> Result<f64> {
    match s {
        "NaN" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s.parse::<f64>().map_err(|_| Error::Invalid(format!("not a number: {s:?}"))),
    }
}

impl ResultTable {
    pub fn new(columns: Vec<Column>) -> Self {
        Self { columns, rows: Vec::new(), metadata: BTreeMap::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Shape(format!("row has {} values, table has {} columns", row.len(), self.columns.len())));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.insert(key.into(), value.to_string());
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.columns {
            if c.unit.is_empty() {
                return Err(Error::Invalid(format!("column {} has no unit", c.name)));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.len() != self.columns.len() {
                return Err(Error::Shape(format!("row {i} is ragged")));
            }
        }
        Ok(())
    }

    /// Header `name [unit]`, RFC-4180 quoting, shortest round-trip floats.
    pub fn to_csv(&self) -> Result<String> {
        self.validate()?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        w.write_record(self.columns.iter().map(Column::header)).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().zip(&self.columns).map(|(v, c)| format_value(*v, c.integer))).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(format!("csv: {e}")))?;
        String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
    }

    /// `{columns, units, rows, metadata}`; non-finite values become `null`.
    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let t = JsonTable {
            columns: self.columns.iter().map(|c| c.name.clone()).collect(),
            units: self.columns.iter().map(|c| c.unit.clone()).collect(),
            rows: self.rows.iter().map(|r| r.iter().map(|v| v.is_finite().then_some(*v)).collect()).collect(),
            metadata: JsonMetadata {
                sources: self.columns.iter().map(|c| c.source.clone()).collect(),
                integer_columns: self.columns.iter().filter(|c| c.integer).map(|c| c.name.clone()).collect(),
                extra: self.metadata.clone(),
            },
        };
        let mut s = serde_json::to_string_pretty(&t).map_err(|e| Error::Invalid(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: JsonTable = serde_json::from_str(text).map_err(|e| Error::Invalid(format!("json: {e}")))?;
        if t.columns.len() != t.units.len() || t.columns.len() != t.metadata.sources.len() {
            return Err(Error::Shape("column, unit and source lists differ in length".into()));
        }
        let columns = t
            .columns
            .iter()
            .zip(&t.units)
            .zip(&t.metadata.sources)
            .map(|((n, u), s)| Column {
                name: n.clone(),
                unit: u.clone(),
                source: s.clone(),
                integer: t.metadata.integer_columns.contains(n),
            })
            .collect();
        let rows = t.rows.into_iter().map(|r| r.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect()).collect();
        let table = Self { columns, rows, metadata: t.metadata.extra };
        table.validate()?;
        Ok(table)
    }

    /// Parses the output of [`ResultTable::to_csv`]. Sources and metadata are
    /// not part of the CSV encoding.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let io = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
        let mut columns = Vec::new();
        for h in r.headers().map_err(io)?.iter() {
            let (name, unit) = h
                .strip_suffix(']')
                .and_then(|s| s.rsplit_once(" ["))
                .ok_or_else(|| Error::Invalid(format!("header {h:?} lacks a unit")))?;
            columns.push(Column::real(name, unit, ""));
        }
        let mut table = Self::new(columns);
        for rec in r.records() {
            let rec = rec.map_err(io)?;
            let row = rec.iter().map(parse_value).collect::<Result<Vec<_>>>()?;
            table.push(row)?;
        }
        Ok(table)
    }
}
