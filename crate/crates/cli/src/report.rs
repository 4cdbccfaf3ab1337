//! Report envelopes: JSON with sorted keys, or CSV with a commented header.

use std::io::Write;

use serde_json::{json, Map, Value};

use crate::error::CliError;
use crate::schema::RunConfig;

pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub struct Report {
    pub result: Value,
    pub grids: Value,
    pub table: Option<Table>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(result: Value) -> Self {
        Self {
            result,
            grids: Value::Null,
            table: None,
            warnings: Vec::new(),
        }
    }
}

/// Rebuild every object with its keys in sorted order.
pub fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut entries: Vec<(String, Value)> = m.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, sort_keys(v));
            }
            Value::Object(out)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

fn envelope(config: &RunConfig) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert(
        "tool".into(),
        json!({"name": "symspace", "version": env!("CARGO_PKG_VERSION")}),
    );
    m.insert("command".into(), Value::from(config.command_name.clone()));
    m.insert("config".into(), config.echo());
    m.insert("seed".into(), Value::from(config.seed()));
    m
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        Value::Array(a) if a.iter().any(|x| x.is_object() || x.is_array()) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        other => out.push((prefix.to_string(), cell(other))),
    }
}

fn write_csv(
    sink: &mut dyn Write,
    config: &RunConfig,
    grids: &Value,
    warnings: &[String],
    status: &str,
    body: &Value,
    table: Option<&Table>,
) -> Result<(), CliError> {
    writeln!(sink, "# symspace {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(sink, "# command: {}", config.command_name)?;
    writeln!(sink, "# status: {status}")?;
    for (k, v) in config.echo().as_object().into_iter().flatten() {
        writeln!(sink, "# config: {k}={}", cell(v))?;
    }
    if !grids.is_null() {
        writeln!(sink, "# grids: {}", sort_keys(grids.clone()))?;
    }
    for w in warnings {
        writeln!(sink, "# warning: {w}")?;
    }
    if table.is_some() {
        let mut rows = Vec::new();
        flatten("", body, &mut rows);
        for (k, v) in rows {
            writeln!(sink, "# result: {k}={v}")?;
        }
    }
    let mut out = csv::Writer::from_writer(sink);
    match table {
        Some(t) => {
            out.write_record(&t.columns)?;
            for row in &t.rows {
                out.write_record(row.iter().map(cell))?;
            }
        }
        None => {
            let mut rows = Vec::new();
            flatten("", body, &mut rows);
            out.write_record(["key", "value"])?;
            for (k, v) in rows {
                out.write_record([k, v])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn sink(config: &RunConfig) -> Result<Box<dyn Write>, CliError> {
    Ok(match config.text("out") {
        Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

pub fn emit(config: &RunConfig, report: Report) -> Result<(), CliError> {
    let mut w = sink(config)?;
    if config.text("format") == Some("csv") {
        let body = sort_keys(report.result.clone());
        write_csv(
            &mut w,
            config,
            &report.grids,
            &report.warnings,
            "ok",
            &body,
            report.table.as_ref(),
        )?;
    } else {
        let mut m = envelope(config);
        m.insert("status".into(), Value::from("ok"));
        m.insert("grids".into(), report.grids);
        m.insert("result".into(), report.result);
        m.insert("warnings".into(), json!(report.warnings));
        if let Some(t) = report.table {
            m.insert("table".into(), json!({"columns": t.columns, "rows": t.rows}));
        }
        serde_json::to_writer_pretty(&mut w, &sort_keys(Value::Object(m))).map_err(std::io::Error::from)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// Serialize a failure in the requested format.
pub fn emit_failure(config: &RunConfig, err: &CliError) -> Result<(), CliError> {
    let mut w = sink(config)?;
    if config.text("format") == Some("csv") {
        write_csv(&mut w, config, &Value::Null, &[], "error", &json!({ "error": err.to_json() }), None)?;
    } else {
        let mut m = envelope(config);
        m.insert("status".into(), Value::from("error"));
        m.insert("error".into(), err.to_json());
        serde_json::to_writer_pretty(&mut w, &sort_keys(Value::Object(m))).map_err(std::io::Error::from)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}
