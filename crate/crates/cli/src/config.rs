//! Key-value configuration: a file of `key = value` lines merged with
//! command-line flags, flags winning.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Values per key; only `method` under `evaluate` takes more than one.
#[derive(Debug, Default, Clone)]
pub struct Settings {
    values: BTreeMap<String, Vec<String>>,
}

pub trait Lookup {
    fn raw(&self, key: &str) -> Option<&str>;

    /// `key` parsed as `T`; `None` when absent.
    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Validation(format!("{}: cannot parse {v:?}: {e}", self.path(key))))
            })
            .transpose()
    }

    fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    fn required<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.opt(key)?
            .ok_or_else(|| CliError::Validation(format!("{}: required", self.path(key))))
    }

    /// Name used in error messages.
    fn path(&self, key: &str) -> String {
        key.to_string()
    }
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment, blank lines are
    /// skipped. A repeated key accumulates values.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut s = Settings::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Validation(format!("{origin}:{}: expected key = value", no + 1)))?;
            s.values.entry(k.trim().to_string()).or_default().push(v.trim().to_string());
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Replaces every key present in `flags`.
    pub fn override_with(&mut self, flags: Settings) {
        for (k, v) in flags.values {
            self.values.insert(k, v);
        }
    }

    pub fn set(&mut self, key: &str, values: Vec<String>) {
        self.values.insert(key.to_string(), values);
    }

    pub fn all(&self, key: &str) -> &[String] {
        self.values.get(key).map_or(&[], Vec::as_slice)
    }

    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        match self.values.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(CliError::Validation(format!("unknown config key {k:?}"))),
            None => Ok(()),
        }
    }
}

impl Lookup for Settings {
    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).and_then(|v| v.last()).map(String::as_str)
    }
}

/// Parameters of one `name:key=value,...` method spec.
pub struct MethodArgs {
    pub name: String,
    pub position: usize,
    values: BTreeMap<String, String>,
}

impl MethodArgs {
    pub fn parse(text: &str, position: usize) -> Result<Self, CliError> {
        let (name, rest) = text.split_once(':').unwrap_or((text, ""));
        let mut values = BTreeMap::new();
        for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = pair.split_once('=').ok_or_else(|| {
                CliError::Validation(format!("method[{position}]: expected key=value, got {pair:?}"))
            })?;
            if values.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::Validation(format!("method[{position}].{}: given twice", k.trim())));
            }
        }
        Ok(MethodArgs {
            name: name.trim().to_ascii_lowercase(),
            position,
            values,
        })
    }

    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        match self.values.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(CliError::Validation(format!(
                "method[{}].{k}: not a parameter of {}",
                self.position, self.name
            ))),
            None => Ok(()),
        }
    }
}

impl Lookup for MethodArgs {
    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn path(&self, key: &str) -> String {
        format!("method[{}].{key}", self.position)
    }
}

/// `a:b:k`: `k` evenly spaced values from `a` to `b` inclusive.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Validation(format!("lambda-grid: expected a:b:k, got {text:?}"));
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, k] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let k: usize = k.trim().parse().map_err(|_| bad())?;
    if k == 0 || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    if k == 1 {
        return Ok(vec![a]);
    }
    Ok((0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect())
}
