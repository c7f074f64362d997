//! Tabular results and their CSV / JSON serialization.
//!
//! Floats are written with 17 significant digits in both formats, so CSV and
//! JSON outputs of a run carry identical values.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};

use crate::config::Format;
use crate::CliError;

#[derive(Debug, Clone)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(x) => fmt_float(*x),
            Cell::I(i) => i.to_string(),
            Cell::S(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::S(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // non-finite values have no JSON number form
            Cell::F(x) if !x.is_finite() => Value::Null,
            Cell::F(x) => Value::Number(fmt_float(*x).parse::<Number>().expect("float literal")),
            Cell::I(i) => Value::from(*i),
            Cell::S(s) => Value::from(s.as_str()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Self {
        Self { name: name.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }

    fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        self.columns.iter().zip(row).map(|(c, v)| (c.to_string(), v.json())).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

/// A named pass/fail comparison of `value` against `tolerance`.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value <= tolerance` (NaN fails).
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, passed: value <= tolerance }
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self { command: command.into(), tables: Vec::new(), checks: Vec::new(), notes: Vec::new() }
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn checks_table(&self) -> Table {
        let mut t = Table::new("checks", &["check", "value", "tolerance", "passed"]);
        for c in &self.checks {
            t.push(vec![
                Cell::S(c.name.clone()),
                Cell::F(c.value),
                Cell::F(c.tolerance),
                Cell::S(c.passed.to_string()),
            ]);
        }
        t
    }

    /// Writes the result files and returns their paths.
    ///
    /// CSV gives one `<command>_<table>.csv` per table plus
    /// `<command>_checks.csv`; JSON gives a single `<command>.json`.
    pub fn write(&self, dir: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let mut written = Vec::new();
        let mut put = |name: String, body: String| -> Result<(), CliError> {
            let path = dir.join(name);
            fs::write(&path, body).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            written.push(path);
            Ok(())
        };
        match format {
            Format::Csv => {
                for t in self.tables.iter().chain(std::iter::once(&self.checks_table())) {
                    put(format!("{}_{}.csv", self.command, t.name), t.to_csv())?;
                }
            }
            Format::Json => {
                let tables: Map<String, Value> =
                    self.tables.iter().map(|t| (t.name.clone(), t.to_json())).collect();
                let doc = serde_json::json!({
                    "command": self.command,
                    "passed": self.all_passed(),
                    "checks": self.checks_table().to_json(),
                    "notes": self.notes,
                    "tables": tables,
                });
                put(format!("{}.json", self.command), format!("{:#}\n", doc))?;
            }
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let x = 0.1 + 0.2;
        assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        let v = Cell::F(x).json();
        assert_eq!(v.to_string().parse::<f64>().unwrap(), x);
        assert_eq!(Cell::F(f64::NAN).json(), Value::Null);
    }

    #[test]
    fn csv_quotes_separators() {
        assert_eq!(Cell::S("a,b".into()).csv(), "\"a,b\"");
    }
}
