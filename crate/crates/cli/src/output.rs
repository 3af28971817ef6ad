use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

use crate::args::Format;

/// Reproducibility header carried by every output.
pub struct Header {
    command: &'static str,
    seed: Option<u64>,
    params: Value,
    extra: Map<String, Value>,
}

impl Header {
    pub fn new(command: &'static str, seed: Option<u64>, params: Value) -> Self {
        Self {
            command,
            seed,
            params,
            extra: Map::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.extra.insert(key.to_owned(), value.into());
        self
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        m.insert("command".into(), self.command.into());
        m.insert("seed".into(), self.seed.map_or(Value::Null, Value::from));
        m.insert("params".into(), self.params.clone());
        m.extend(self.extra.clone());
        Value::Object(m)
    }

    pub fn write_comment(&self, w: &mut dyn Write) -> io::Result<()> {
        writeln!(w, "# phasenoise {}", env!("CARGO_PKG_VERSION"))?;
        writeln!(w, "# command: {}", self.command)?;
        match self.seed {
            Some(s) => writeln!(w, "# seed: {s}")?,
            None => writeln!(w, "# seed: none")?,
        }
        writeln!(w, "# params: {}", self.params)?;
        for (k, v) in &self.extra {
            writeln!(w, "# {k}: {v}")?;
        }
        Ok(())
    }
}

/// Rows of a CSV table, kept as preformatted cells.
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn records(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect()))
                .collect(),
        )
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => "nan".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn open(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes a table as commented CSV, or as `{header, result}` JSON.
pub fn emit_table(header: &Header, table: &Table, format: Format, path: Option<&Path>) -> Result<()> {
    let mut w = open(path)?;
    match format {
        Format::Csv => {
            header.write_comment(&mut w)?;
            writeln!(w, "{}", table.columns.join(","))?;
            for row in &table.rows {
                let cells: Vec<String> = row.iter().map(cell).collect();
                writeln!(w, "{}", cells.join(","))?;
            }
        }
        Format::Json => {
            let doc = json!({ "header": header.to_json(), "result": table.records() });
            serde_json::to_writer_pretty(&mut w, &doc)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes a JSON document `{header, result}` regardless of the table format.
pub fn emit_json(header: &Header, result: Value, path: Option<&Path>) -> Result<()> {
    let mut w = open(path)?;
    serde_json::to_writer_pretty(&mut w, &json!({ "header": header.to_json(), "result": result }))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// JSON number, or null for non-finite values.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}
