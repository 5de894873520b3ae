//! Result tables and their on-disk form.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{HarnessError, Result};
use crate::spec::ExperimentSpec;

/// A CSV payload: header plus rows of already formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let err = |e: csv::Error| HarnessError::Config(format!("csv encoding failed: {e}"));
        w.write_record(&self.header).map_err(err)?;
        for row in &self.rows {
            w.write_record(row).map_err(err)?;
        }
        w.into_inner().map_err(|e| HarnessError::Config(format!("csv encoding failed: {e}")))
    }
}

/// Formats a float with Rust's shortest round-trip representation, which is
/// stable across platforms and never localized.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub summary: BTreeMap<String, Value>,
    pub tables: Vec<Table>,
    /// Spec echo (without the output directory) and artifact version.
    pub provenance: BTreeMap<String, Value>,
}

impl ExperimentResult {
    pub fn new(spec: &ExperimentSpec) -> Self {
        let mut provenance = BTreeMap::new();
        provenance.insert("experiment".into(), json!(spec.experiment.name()));
        provenance.insert("seed".into(), json!(spec.seed));
        provenance.insert("params".into(), Value::Object(spec.params.clone()));
        provenance.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        Self {
            summary: BTreeMap::new(),
            tables: Vec::new(),
            provenance,
        }
    }

    pub fn metric(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn summary_json(&self) -> Result<String> {
        let doc = json!({
            "summary": self.summary,
            "provenance": self.provenance,
        });
        let mut text = serde_json::to_string_pretty(&doc)
            .map_err(|e| HarnessError::Config(format!("summary encoding failed: {e}")))?;
        text.push('\n');
        Ok(text)
    }

    /// Writes `summary.json` and one CSV per table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let summary = dir.join("summary.json");
        fs::write(&summary, self.summary_json()?).map_err(|e| HarnessError::io(&summary, e))?;
        for t in &self.tables {
            let path = dir.join(t.file_name());
            fs::write(&path, t.to_csv()?).map_err(|e| HarnessError::io(&path, e))?;
        }
        Ok(())
    }
}
