//! Flat key = value configuration files.
//!
//! One assignment per line, `#` starts a comment, keys are dotted lowercase
//! names. Unknown keys are rejected after a command has read everything it
//! understands, and every run echoes its fully-resolved configuration (with
//! defaults materialized) so the run can be reproduced from the echo alone.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;

use crate::CliError;

#[derive(Debug)]
pub struct Config {
    values: BTreeMap<String, (String, usize)>,
    consumed: BTreeSet<String>,
    resolved: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|err| {
            CliError::Usage(format!("cannot read config {}: {err}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {line}: expected key = value, got {raw:?}"))
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Usage(format!("config line {line}: empty key")));
            }
            if values.insert(key.clone(), (value.trim().to_string(), line)).is_some() {
                return Err(CliError::Usage(format!("config line {line}: duplicate key {key}")));
            }
        }
        Ok(Self { values, consumed: BTreeSet::new(), resolved: BTreeMap::new() })
    }

    fn record<T: Display>(&mut self, key: &str, value: &T) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.consumed.insert(key.to_string());
        self.values.get(key).map(|(v, _)| v.clone())
    }

    pub fn get<T>(&mut self, key: &str, default: T) -> Result<T, CliError>
    where
        T: std::str::FromStr + Display,
        T::Err: Display,
    {
        let value = match self.raw(key) {
            Some(raw) => raw.parse::<T>().map_err(|err| {
                let line = self.values[key].1;
                CliError::Usage(format!("config line {line}: {key} = {raw:?}: {err}"))
            })?,
            None => default,
        };
        self.record(key, &value);
        Ok(value)
    }

    pub fn require<T>(&mut self, key: &str) -> Result<T, CliError>
    where
        T: std::str::FromStr + Display,
        T::Err: Display,
    {
        match self.raw(key) {
            Some(raw) => {
                let value = raw.parse::<T>().map_err(|err| {
                    let line = self.values[key].1;
                    CliError::Usage(format!("config line {line}: {key} = {raw:?}: {err}"))
                })?;
                self.record(key, &value);
                Ok(value)
            }
            None => Err(CliError::Usage(format!("config is missing the required key {key}"))),
        }
    }

    pub fn get_string(&mut self, key: &str, default: &str) -> String {
        let value = self.raw(key).unwrap_or_else(|| default.to_string());
        self.record(key, &value);
        value
    }

    pub fn optional_f64(&mut self, key: &str) -> Result<Option<f64>, CliError> {
        match self.raw(key) {
            Some(raw) => {
                let value: f64 = raw.parse().map_err(|_| {
                    let line = self.values[key].1;
                    CliError::Usage(format!("config line {line}: {key} = {raw:?}: not a number"))
                })?;
                self.record(key, &value);
                Ok(Some(value))
            }
            None => Ok(None),
        }
    }

    pub fn optional_usize(&mut self, key: &str) -> Result<Option<usize>, CliError> {
        match self.raw(key) {
            Some(raw) => {
                let value: usize = raw.parse().map_err(|_| {
                    let line = self.values[key].1;
                    CliError::Usage(format!("config line {line}: {key} = {raw:?}: not an integer"))
                })?;
                self.record(key, &value);
                Ok(Some(value))
            }
            None => Ok(None),
        }
    }

    /// Comma-separated list of numbers.
    pub fn optional_f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        match self.raw(key) {
            Some(raw) => {
                let list = raw
                    .split(',')
                    .map(|f| f.trim().parse::<f64>())
                    .collect::<Result<Vec<f64>, _>>()
                    .map_err(|_| {
                        let line = self.values[key].1;
                        CliError::Usage(format!(
                            "config line {line}: {key} = {raw:?}: expected a comma-separated number list"
                        ))
                    })?;
                self.record(key, &raw);
                Ok(Some(list))
            }
            None => Ok(None),
        }
    }

    /// Sizes like "2-4-2".
    pub fn get_layer_list(&mut self, key: &str, default: &str) -> Result<Vec<usize>, CliError> {
        let raw = self.raw(key).unwrap_or_else(|| default.to_string());
        let list = raw
            .split('-')
            .map(|f| f.trim().parse::<usize>())
            .collect::<Result<Vec<usize>, _>>()
            .map_err(|_| {
                CliError::Usage(format!("{key} = {raw:?}: expected sizes like 2-4-2"))
            })?;
        self.record(key, &raw);
        Ok(list)
    }

    /// Weight matrix rows separated by ';', entries by ','.
    pub fn optional_matrix(&mut self, key: &str) -> Result<Option<Vec<Vec<f64>>>, CliError> {
        match self.raw(key) {
            Some(raw) => {
                let rows = raw
                    .split(';')
                    .map(|row| {
                        row.split(',')
                            .map(|f| f.trim().parse::<f64>())
                            .collect::<Result<Vec<f64>, _>>()
                    })
                    .collect::<Result<Vec<Vec<f64>>, _>>()
                    .map_err(|_| {
                        let line = self.values[key].1;
                        CliError::Usage(format!(
                            "config line {line}: {key}: expected rows like 0,1;0,0"
                        ))
                    })?;
                self.record(key, &raw);
                Ok(Some(rows))
            }
            None => Ok(None),
        }
    }

    /// Fails when the file contains keys no command consumed.
    pub fn reject_unknown(&self) -> Result<(), CliError> {
        let unknown: Vec<String> = self
            .values
            .iter()
            .filter(|(key, _)| !self.consumed.contains(*key))
            .map(|(key, (_, line))| format!("{key} (line {line})"))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!("unknown config keys: {}", unknown.join(", "))))
        }
    }

    /// The fully-resolved configuration, one sorted key = value per line.
    pub fn resolved_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.resolved {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(value);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_and_rejects_unknown_keys() {
        let mut cfg = Config::parse("a = 1\n# comment\nb.c = 2.5\n").unwrap();
        assert_eq!(cfg.get::<u64>("a", 0).unwrap(), 1);
        assert!(cfg.reject_unknown().is_err());
        assert_eq!(cfg.get::<f64>("b.c", 0.0).unwrap(), 2.5);
        assert!(cfg.reject_unknown().is_ok());
    }

    #[test]
    fn reports_line_numbers() {
        let err = Config::parse("a = 1\nbroken line\n").unwrap_err();
        let CliError::Usage(message) = err else { panic!("wrong class") };
        assert!(message.contains("line 2"), "{message}");

        let mut cfg = Config::parse("\n\nx = zzz\n").unwrap();
        let err = cfg.get::<f64>("x", 0.0).unwrap_err();
        let CliError::Usage(message) = err else { panic!("wrong class") };
        assert!(message.contains("line 3"), "{message}");
    }

    #[test]
    fn resolved_echo_materializes_defaults() {
        let mut cfg = Config::parse("a = 7\n").unwrap();
        let _ = cfg.get::<u64>("a", 0).unwrap();
        let _ = cfg.get::<f64>("missing", 1.25).unwrap();
        let echo = cfg.resolved_text();
        assert_eq!(echo, "a = 7\nmissing = 1.25\n");
        // the echo itself parses back to the same effective values
        let mut again = Config::parse(&echo).unwrap();
        assert_eq!(again.get::<f64>("missing", 0.0).unwrap(), 1.25);
    }
}
