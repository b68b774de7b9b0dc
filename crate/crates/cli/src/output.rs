use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::usage;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Result of one command, not yet written anywhere.
pub struct Outcome {
    pub json: Value,
    pub csv: Option<String>,
    pub summary: String,
    pub violated: bool,
    /// Extra named files, for commands that write a bundle.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn new(json: Value, summary: String) -> Self {
        Self {
            json,
            csv: None,
            summary,
            violated: false,
            files: Vec::new(),
        }
    }

    pub fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }
}

/// Report object: tool, version, command and config, then the fields of
/// `body` (an object) or `body` under `result`.
pub fn envelope<C: Serialize>(command: &str, config: &C, body: Value) -> Result<Value> {
    let mut m = Map::new();
    m.insert("tool".into(), "tsrisk".into());
    m.insert("version".into(), VERSION.into());
    m.insert("command".into(), command.into());
    m.insert("config".into(), serde_json::to_value(config)?);
    match body {
        Value::Object(fields) => m.extend(fields),
        other => {
            m.insert("result".into(), other);
        }
    }
    Ok(Value::Object(m))
}

pub fn to_json_text(v: &Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn csv_table<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner().context("flushing CSV")?)?)
}

/// Writes the outcome to `output` (CSV if it ends in `.csv`) and prints the
/// summary, or prints the JSON to stdout and the summary to stderr.
pub fn emit(outcome: &Outcome, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => {
            let text = if p.extension().is_some_and(|e| e == "csv") {
                outcome
                    .csv
                    .clone()
                    .ok_or_else(|| usage("this command has no CSV output; use a .json file"))?
            } else {
                to_json_text(&outcome.json)?
            };
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
            println!("{}", outcome.summary);
        }
        None => {
            print!("{}", to_json_text(&outcome.json)?);
            eprintln!("{}", outcome.summary);
        }
    }
    Ok(())
}

/// Writes a bundle into directory `dir`, the main JSON as `summary.json`.
pub fn emit_bundle(outcome: &Outcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, text) in &outcome.files {
        fs::write(dir.join(name), text).with_context(|| format!("writing {name}"))?;
    }
    fs::write(dir.join("summary.json"), to_json_text(&outcome.json)?).context("writing summary.json")?;
    println!("{}", outcome.summary);
    Ok(())
}
