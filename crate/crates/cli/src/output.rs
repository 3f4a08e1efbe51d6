//! Buffered artifacts and all-or-nothing writes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nesstur_core::dynamics::format_float;
use serde_json::{Map, Value};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    B(bool),
    I(u64),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(x) => format_float(*x),
            Cell::B(b) => b.to_string(),
            Cell::I(i) => i.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::B(b) => Value::Bool(*b),
            Cell::I(i) => Value::from(*i),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::B(b)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::F)
    }
}

/// Column-named rows; every row has one cell per column.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(out, "{}", cells.join(",")).expect("writing to a String");
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| ((*c).to_string(), v.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub enum Content {
    Table(Table),
    Json(Value),
    Text(String),
}

/// A named output whose extension follows the chosen format.
#[derive(Debug, Clone)]
pub struct Artifact {
    pub stem: String,
    pub content: Content,
}

impl Artifact {
    pub fn table(stem: impl Into<String>, t: Table) -> Self {
        Self { stem: stem.into(), content: Content::Table(t) }
    }

    pub fn json(stem: impl Into<String>, v: Value) -> Self {
        Self { stem: stem.into(), content: Content::Json(v) }
    }

    pub fn text(stem: impl Into<String>, s: String) -> Self {
        Self { stem: stem.into(), content: Content::Text(s) }
    }

    pub fn render(&self, format: Format) -> (String, String) {
        match (&self.content, format) {
            (Content::Table(t), Format::Csv) => (format!("{}.csv", self.stem), t.to_csv()),
            (Content::Table(t), Format::Json) => (format!("{}.json", self.stem), pretty(&t.to_json())),
            (Content::Json(v), _) => (format!("{}.json", self.stem), pretty(v)),
            (Content::Text(s), _) => (format!("{}.txt", self.stem), s.clone()),
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializing a JSON value");
    s.push('\n');
    s
}

/// Writes every artifact to a temporary sibling, then renames them into
/// place. On failure no temporary or final file from this call remains.
pub fn write_all(dir: &Path, artifacts: &[Artifact], format: Format) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let rendered: Vec<(PathBuf, PathBuf, String)> = artifacts
        .iter()
        .map(|a| {
            let (name, body) = a.render(format);
            (dir.join(format!(".{name}.tmp")), dir.join(name), body)
        })
        .collect();

    let mut staged = Vec::new();
    let result = (|| -> Result<()> {
        for (tmp, _, body) in &rendered {
            staged.push(tmp.clone());
            fs::write(tmp, body).with_context(|| format!("writing {}", tmp.display()))?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        for tmp in &staged {
            let _ = fs::remove_file(tmp);
        }
        return Err(e);
    }

    let mut done = Vec::new();
    for (tmp, dst, _) in &rendered {
        if let Err(e) = fs::rename(tmp, dst) {
            for (t, _, _) in &rendered {
                let _ = fs::remove_file(t);
            }
            for d in &done {
                let _ = fs::remove_file(d);
            }
            return Err(e).with_context(|| format!("renaming into {}", dst.display()));
        }
        done.push(dst.clone());
    }
    Ok(done)
}
