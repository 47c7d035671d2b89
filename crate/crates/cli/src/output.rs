use std::io::Write;

use serde_json::{json, Map, Value};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            // 17 significant digits round-trip every f64
            Cell::Float(x) => format!("{x:.16e}"),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => json!(i),
            Cell::Float(x) => json!(x),
            Cell::Text(s) => json!(s),
        }
    }
}

/// Tabular result of one command, with the metadata written alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub params: Value,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Written as the CSV footer row `tail,<value>`.
    pub tail_mass: Option<f64>,
    pub tail: Value,
    pub diagnostics: Value,
}

impl Report {
    pub fn write(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, &self.to_json())?;
                writeln!(out)
            }
        }
    }

    fn write_csv(&self, out: &mut dyn Write) -> std::io::Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        if let Some(t) = self.tail_mass {
            writeln!(out, "tail,{}", Cell::Float(t).csv())?;
        }
        Ok(())
    }

    /// `values` maps each column name to its column.
    pub fn to_json(&self) -> Value {
        let mut values = Map::new();
        for (j, name) in self.columns.iter().enumerate() {
            let col: Vec<Value> = self.rows.iter().map(|r| r[j].json()).collect();
            values.insert(name.to_string(), Value::Array(col));
        }
        json!({
            "params": self.params,
            "values": values,
            "tail": self.tail,
            "diagnostics": self.diagnostics,
        })
    }
}
