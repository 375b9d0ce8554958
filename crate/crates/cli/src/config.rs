//! `key = value` settings merged from a config file and command-line flags.
//!
//! Every value is kept as text until a subcommand asks for it, so file and
//! flag errors are reported the same way, by field name.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use pascal_adic::gasket::{rat, Rational};
use pascal_adic::residue_engine::Prime;

/// Keys accepted in config files; flags use the same names.
pub const KEYS: &[&str] = &[
    "alpha",
    "b",
    "bound",
    "delta-mode",
    "digits",
    "eps",
    "format",
    "gamma",
    "horizon",
    "m",
    "mode",
    "n",
    "out",
    "paths",
    "policy",
    "precision",
    "primes",
    "q",
    "r",
    "rmax",
    "row-rule",
    "samples",
    "seed",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("cannot read config file {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config file line {line}: {reason}")]
    Syntax { line: usize, reason: String },
}

fn invalid(field: &str, reason: impl Display) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

/// Raw settings plus the resolved value of every key a subcommand read.
#[derive(Clone, Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_file_text(text: &str) -> Result<Self, ConfigError> {
        let mut settings = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                reason: format!("expected key = value, got '{line}'"),
            })?;
            let key = key.trim().replace('_', "-");
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    reason: format!("unknown key '{key}'"),
                });
            }
            settings.values.insert(key, value.trim().to_string());
        }
        Ok(settings)
    }

    pub fn load_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_file_text(&text)
    }

    /// Flag values win over file values.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        debug_assert!(KEYS.contains(&key), "unknown key {key}");
        self.values.insert(key.to_string(), value.into());
    }

    /// Resolved `key -> value` pairs, defaults included.
    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }

    pub fn echo_line(&self) -> String {
        self.resolved
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn record(&mut self, key: &str, value: &str) {
        self.resolved.insert(key.to_string(), value.to_string());
    }

    pub fn optional_str(&mut self, key: &str) -> Option<String> {
        let v = self.values.get(key).cloned();
        if let Some(v) = &v {
            self.record(key, v);
        }
        v
    }

    pub fn string(&mut self, key: &str, default: &str) -> String {
        let v = self
            .values
            .get(key)
            .cloned()
            .unwrap_or_else(|| default.to_string());
        self.record(key, &v);
        v
    }

    pub fn parsed<T>(&mut self, key: &str, default: &str) -> Result<T, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let v = self.string(key, default);
        v.parse().map_err(|e| invalid(key, format!("'{v}': {e}")))
    }

    pub fn optional<T>(&mut self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.optional_str(key)
            .map(|v| v.parse().map_err(|e| invalid(key, format!("'{v}': {e}"))))
            .transpose()
    }

    /// Integer in `lo..=hi`.
    pub fn bounded<T>(&mut self, key: &str, default: &str, lo: T, hi: T) -> Result<T, ConfigError>
    where
        T: FromStr + PartialOrd + Display + Copy,
        T::Err: Display,
    {
        let v: T = self.parsed(key, default)?;
        check_range(key, v, lo, hi)
    }

    pub fn alpha(&mut self) -> Result<f64, ConfigError> {
        let a: f64 = self.parsed("alpha", "0.5")?;
        if !(a > 0.0 && a < 1.0) {
            return Err(invalid("alpha", format!("{a} must lie in (0, 1)")));
        }
        Ok(a)
    }

    pub fn seed(&mut self) -> Result<u64, ConfigError> {
        self.parsed("seed", "1")
    }

    pub fn prime(&mut self, key: &str, default: &str) -> Result<Prime, ConfigError> {
        let q: u64 = self.parsed(key, default)?;
        Prime::new(q).map_err(|e| invalid(key, e))
    }

    /// Comma-separated list.
    pub fn list<T>(&mut self, key: &str, default: &str) -> Result<Vec<T>, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let v = self.string(key, default);
        parse_list(key, &v)
    }

    pub fn optional_list<T>(&mut self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T: FromStr,
        T::Err: Display,
    {
        self.optional_str(key)
            .map(|v| parse_list(key, &v))
            .transpose()
    }

    /// `num/den` or an integer.
    pub fn rational(&mut self, key: &str, default: &str) -> Result<Rational, ConfigError> {
        let v = self.string(key, default);
        parse_rational(&v).map_err(|reason| invalid(key, format!("'{v}': {reason}")))
    }
}

pub fn check_range<T: PartialOrd + Display + Copy>(
    key: &str,
    v: T,
    lo: T,
    hi: T,
) -> Result<T, ConfigError> {
    if v < lo || v > hi {
        return Err(invalid(key, format!("{v} outside {lo}..={hi}")));
    }
    Ok(v)
}

pub fn range_error(key: &str, reason: impl Display) -> ConfigError {
    invalid(key, reason)
}

fn parse_list<T>(key: &str, v: &str) -> Result<Vec<T>, ConfigError>
where
    T: FromStr,
    T::Err: Display,
{
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| invalid(key, format!("'{s}': {e}"))))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(invalid(key, "empty list"));
    }
    Ok(items)
}

fn parse_rational(v: &str) -> Result<Rational, String> {
    let (num, den) = match v.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (v.trim(), "1"),
    };
    let num: i64 = num.parse().map_err(|e| format!("numerator: {e}"))?;
    let den: i64 = den.parse().map_err(|e| format!("denominator: {e}"))?;
    if den == 0 {
        return Err("zero denominator".into());
    }
    Ok(rat(num, den))
}
