//! Config files, flag overrides and input resolution.

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};
use tsrisk_core::hypothesis::{HypothesisClass, LossSpec};
use tsrisk_core::{ProcessSpec, SamplePath};

pub const SEED_ENV: &str = "TSRISK_SEED";

/// Bad user input; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Merges flags over the config file, fills the seed from the environment
/// when neither gives one, and deserializes the result.
pub fn load<A: Serialize, C: DeserializeOwned>(config: Option<&Path>, args: &A) -> Result<C> {
    let mut merged = match config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
            match serde_json::from_str::<Value>(&text).map_err(|e| usage(format!("config {}: {e}", p.display())))? {
                Value::Object(m) => m,
                _ => return Err(usage(format!("config {} must hold a JSON object", p.display()))),
            }
        }
        None => Map::new(),
    };
    if let Value::Object(flags) = serde_json::to_value(args)? {
        for (k, v) in flags {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    if !merged.contains_key("seed") {
        if let Ok(s) = std::env::var(SEED_ENV) {
            let seed: u64 = s
                .trim()
                .parse()
                .map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer, got {s:?}")))?;
            merged.insert("seed".into(), seed.into());
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("invalid configuration: {e}")))
}

fn read_input(what: &str, text: &str) -> Result<String> {
    if text.trim_start().starts_with('{') {
        return Ok(text.to_string());
    }
    fs::read_to_string(text).map_err(|e| usage(format!("cannot read {what} {text}: {e}")))
}

/// A process spec given inline or as a file path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SpecInput {
    Spec(ProcessSpec),
    Text(String),
}

impl SpecInput {
    /// Resolves to a validated spec and replaces itself with it, so the
    /// embedded config is self-contained.
    pub fn resolve(&mut self) -> Result<ProcessSpec> {
        let spec = match self {
            SpecInput::Spec(s) => *s,
            SpecInput::Text(t) => {
                let body = read_input("spec", t)?;
                serde_json::from_str(&body).map_err(|e| usage(format!("invalid spec {t}: {e}")))?
            }
        };
        spec.validate().map_err(|e| usage(e.to_string()))?;
        *self = SpecInput::Spec(spec);
        Ok(spec)
    }
}

pub const AR1_GRID_PRESET: &str = "ar1-grid";

/// Nine AR(1) predictors `theta Y_i + c`, `theta` in 0.1..0.9, with `c` the
/// innovation mean of the spec, under absolute loss.
pub fn ar1_grid_preset(spec: &ProcessSpec) -> HypothesisClass {
    let thetas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    HypothesisClass::ar1_grid(&thetas, spec.innovation_mean(), LossSpec::Absolute).expect("preset is valid")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClassInput {
    Class(HypothesisClass),
    Text(String),
}

impl Default for ClassInput {
    fn default() -> Self {
        ClassInput::Text(AR1_GRID_PRESET.into())
    }
}

impl ClassInput {
    pub fn resolve(&mut self, spec: &ProcessSpec) -> Result<HypothesisClass> {
        let class = match self {
            ClassInput::Class(c) => c.clone(),
            ClassInput::Text(t) if t == AR1_GRID_PRESET => ar1_grid_preset(spec),
            ClassInput::Text(t) => {
                let body = read_input("class", t)?;
                serde_json::from_str(&body).map_err(|e| usage(format!("invalid class {t}: {e}")))?
            }
        };
        class.validate().map_err(|e| usage(e.to_string()))?;
        *self = ClassInput::Class(class.clone());
        Ok(class)
    }
}

/// Reads a path written by `simulate` (JSON report or bare path) or a CSV
/// with a `y` column.
pub fn read_path(file: &str, spec: &ProcessSpec) -> Result<SamplePath> {
    let text = fs::read_to_string(file).map_err(|e| usage(format!("cannot read path {file}: {e}")))?;
    let path = if file.ends_with(".csv") {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let col = reader
            .headers()?
            .iter()
            .position(|h| h == "y")
            .ok_or_else(|| usage(format!("{file} has no `y` column")))?;
        let mut values = Vec::new();
        for rec in reader.records() {
            let rec = rec.with_context(|| format!("reading {file}"))?;
            values.push(rec[col].parse::<f64>().map_err(|e| usage(format!("{file}: {e}")))?);
        }
        SamplePath::from_values(values, *spec).map_err(|e| usage(e.to_string()))?
    } else {
        let v: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{file}: {e}")))?;
        let inner = v.get("path").cloned().unwrap_or(v);
        serde_json::from_value(inner).map_err(|e| usage(format!("{file}: {e}")))?
    };
    path.check_consistent(spec).map_err(|e| usage(e.to_string()))?;
    Ok(path)
}

/// Accepts a scalar or a list.
pub fn one_or_many<'de, D, T>(d: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}
