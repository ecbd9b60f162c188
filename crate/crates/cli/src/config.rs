//! Run configuration: a TOML file of flat dotted keys, `--set key=value`
//! overrides, then explicit flags, applied in that order.

use std::path::Path;

use serde::Serialize;
use toml::Value;
use uqtrace_core::estimators::registry::parse_selection;
use uqtrace_core::synth::SynthParams;
use uqtrace_core::{EstimatorId, EstimatorParams};
use uqtrace_eval::{BootstrapConfig, EvalConfig};

use crate::error::CliError;

pub const DEFAULT_SEED: u64 = 42;

/// Keys understood besides the estimator hyperparameters and `synth.*`.
pub const RUN_KEYS: &[&str] = &["seed", "estimators", "exclude", "eval.bins", "eval.replicates", "eval.group_by_query"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: EstimatorParams,
    /// Comma-separated selection (ids, display names, families or `all`).
    pub estimators: String,
    pub exclude: String,
    /// Master seed for bootstrap resampling and synthetic generation.
    pub seed: u64,
    pub bins: usize,
    pub replicates: usize,
    pub group_by_query: bool,
    pub synth: SynthParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        let eval = EvalConfig::default();
        Self {
            params: EstimatorParams::default(),
            estimators: "all".into(),
            exclude: String::new(),
            seed: DEFAULT_SEED,
            bins: eval.bins,
            replicates: eval.bootstrap.replicates,
            group_by_query: eval.group_by_query,
            synth: SynthParams::default(),
        }
    }
}

/// Flattens nested TOML tables into `(dotted.key, value)` pairs in file order.
fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn as_text(key: &str, v: &Value) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(f.to_string()),
        Value::Boolean(b) => Ok(b.to_string()),
        Value::Array(items) => {
            items.iter().map(|i| as_text(key, i)).collect::<Result<Vec<_>, _>>().map(|parts| parts.join(","))
        }
        _ => Err(CliError::Config(format!("`{key}`: unsupported value {v}"))),
    }
}

/// Reads a textual override as the most specific TOML scalar it parses as.
fn parse_scalar(text: &str) -> Value {
    if let Ok(i) = text.parse::<i64>() {
        Value::Integer(i)
    } else if let Ok(f) = text.parse::<f64>() {
        Value::Float(f)
    } else if let Ok(b) = text.parse::<bool>() {
        Value::Boolean(b)
    } else {
        Value::String(text.to_string())
    }
}

fn count(key: &str, v: &Value) -> Result<usize, CliError> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(CliError::Config(format!("`{key}` must be a non-negative integer, got {v}"))),
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        cfg.apply_toml(text)?;
        Ok(cfg)
    }

    pub fn apply_toml(&mut self, text: &str) -> Result<(), CliError> {
        let table: toml::Table = text.parse().map_err(|e| CliError::Config(format!("config file: {e}")))?;
        let mut pairs = Vec::new();
        flatten("", &table, &mut pairs);
        for (k, v) in pairs {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_toml(&text)
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<(), CliError> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override {assignment:?} is not of the form key=value")))?;
        self.set(k.trim(), &parse_scalar(v.trim()))
    }

    pub fn set(&mut self, key: &str, value: &Value) -> Result<(), CliError> {
        match key {
            "seed" => {
                self.seed = match value {
                    Value::Integer(i) if *i >= 0 => *i as u64,
                    _ => return Err(CliError::Config(format!("`seed` must be a non-negative integer, got {value}"))),
                }
            }
            "estimators" => self.estimators = as_text(key, value)?,
            "exclude" => self.exclude = as_text(key, value)?,
            "eval.bins" => self.bins = count(key, value)?,
            "eval.replicates" => self.replicates = count(key, value)?,
            "eval.group_by_query" => {
                self.group_by_query = value
                    .as_bool()
                    .ok_or_else(|| CliError::Config(format!("`{key}` must be true or false, got {value}")))?
            }
            _ => {
                if let Some(field) = key.strip_prefix("synth.") {
                    return self.set_synth(field, value);
                }
                self.params.set(key, &as_text(key, value)?).map_err(CliError::config)?;
            }
        }
        Ok(())
    }

    fn set_synth(&mut self, field: &str, value: &Value) -> Result<(), CliError> {
        let bad = |e: &dyn std::fmt::Display| CliError::Config(format!("`synth.{field}`: {e}"));
        let mut table = toml::Table::try_from(&self.synth).map_err(|e| bad(&e))?;
        if !table.contains_key(field) {
            return Err(CliError::Config(format!("unknown parameter `synth.{field}`")));
        }
        // Integers are accepted where a float is expected.
        let value = match (table.get(field), value) {
            (Some(Value::Float(_)), Value::Integer(i)) => Value::Float(*i as f64),
            _ => value.clone(),
        };
        table.insert(field.to_string(), value);
        self.synth = Value::Table(table).try_into().map_err(|e| bad(&e))?;
        Ok(())
    }

    /// Enabled estimators in registry order; an empty selection is an error.
    pub fn selection(&self) -> Result<Vec<EstimatorId>, CliError> {
        let include = parse_selection(&self.estimators).map_err(CliError::config)?;
        let exclude = parse_selection(&self.exclude).map_err(CliError::config)?;
        let chosen: Vec<EstimatorId> = include.into_iter().filter(|e| !exclude.contains(e)).collect();
        if chosen.is_empty() {
            return Err(CliError::Config("no estimator enabled".into()));
        }
        Ok(chosen)
    }

    pub fn eval_config(&self) -> Result<EvalConfig, CliError> {
        if self.bins < 2 {
            return Err(CliError::Config(format!("eval.bins must be at least 2, got {}", self.bins)));
        }
        if self.replicates < 2 {
            return Err(CliError::Config(format!("eval.replicates must be at least 2, got {}", self.replicates)));
        }
        Ok(EvalConfig {
            bins: self.bins,
            bootstrap: BootstrapConfig { replicates: self.replicates, seed: self.seed },
            group_by_query: self.group_by_query,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_keys_and_tables_agree() {
        let a = RunConfig::from_toml_str("renyi.alpha = 0.7\nkle.t = 1\n[eval]\nbins = 10\n").unwrap();
        let b = RunConfig::from_toml_str("[renyi]\nalpha = 0.7\n[kle]\nt = 1.0\n[eval]\nbins = 10\n").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.params.renyi_alpha, 0.7);
        assert_eq!(a.params.kle_t, 1.0);
        assert_eq!(a.bins, 10);
    }

    #[test]
    fn unknown_and_bad_keys_are_config_errors() {
        for text in ["renyi.alpah = 0.5", "renyi.alpha = 1.0", "seed = -1", "synth.bogus = 3", "synth.n = 0.5"] {
            let err = RunConfig::from_toml_str(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}: {err}");
        }
    }

    #[test]
    fn selection_with_exclusions() {
        let mut cfg = RunConfig::from_toml_str("estimators = [\"information\", \"kle\"]\nexclude = \"renyi\"").unwrap();
        let sel = cfg.selection().unwrap();
        assert_eq!(sel.len(), 10);
        assert!(!sel.contains(&EstimatorId::Renyi));
        cfg.exclude = "all".into();
        assert!(matches!(cfg.selection(), Err(CliError::Config(_))));
        cfg.estimators = "msq".into();
        assert!(cfg.selection().unwrap_err().to_string().contains("msp"));
    }

    #[test]
    fn assignments_parse_scalars() {
        let mut cfg = RunConfig::default();
        cfg.apply_assignment("synth.signal=0").unwrap();
        cfg.apply_assignment("eval.group_by_query = true").unwrap();
        cfg.apply_assignment("rde.kernel=linear").unwrap();
        assert_eq!(cfg.synth.signal, 0.0);
        assert!(cfg.group_by_query);
        assert!(cfg.apply_assignment("novalue").is_err());
    }
}
