use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

/// A CSV table written as `<name>.csv` under `--out`.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        Self { name, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Result of one command: report.json body, tables, terminal text and the
/// outcome that decides the exit code.
#[derive(Debug)]
pub struct Output {
    pub report: Value,
    pub tables: Vec<Table>,
    pub text: String,
    pub success: bool,
    pub warnings: Vec<String>,
}

pub fn to_value<S: Serialize>(v: &S) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Shortest round-trip representation, so files are reproducible bit for bit.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn sci(x: f64) -> String {
    format!("{x:.6e}")
}

pub fn report_json(command: &str, body: Value, warnings: &[String]) -> Value {
    let mut root = serde_json::Map::new();
    root.insert(
        "metadata".into(),
        serde_json::json!({ "tool": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION"), "command": command }),
    );
    if !warnings.is_empty() {
        root.insert("warnings".into(), to_value(&warnings));
    }
    if let Value::Object(map) = body {
        root.extend(map);
    } else {
        root.insert("result".into(), body);
    }
    Value::Object(root)
}

pub fn write_dir(dir: &Path, out: &Output) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(&out.report).expect("report serializes");
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    for t in &out.tables {
        let file = fs::File::create(dir.join(format!("{}.csv", t.name)))?;
        t.write(std::io::BufWriter::new(file)).map_err(std::io::Error::other)?;
    }
    Ok(())
}
