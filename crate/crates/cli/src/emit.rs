//! Tables rendered as CSV or JSON, each carrying the version and config.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use pascal_adic::gasket::Rational;
use serde_json::{json, Map, Value};

/// Significant digits printed for rational values.
pub const SIGNIFICANT_DIGITS: usize = 18;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i128),
    Float(f64),
    /// Decimal text of an exact value; numeric in JSON.
    Decimal(String),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => v.to_string(),
            Cell::Decimal(s) => s.clone(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                format!("\"{}\"", s.replace('"', "\"\""))
            }
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Float(v) => json!(v),
            Cell::Decimal(s) => s.parse::<f64>().map(|f| json!(f)).unwrap_or(Value::Null),
            Cell::Text(s) => json!(s),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v.into())
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v.into())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub const STATS_COLUMNS: &[&str] = &[
    "experiment",
    "seed",
    "alpha",
    "q",
    "n_or_horizon",
    "statistic",
    "value",
    "stderr",
];

pub const GASKET_COLUMNS: &[&str] = &[
    "q",
    "gamma_num",
    "gamma_den",
    "b_num",
    "b_den",
    "n",
    "ratio_num",
    "ratio_den",
    "ratio_float",
];

/// Everything a subcommand produces.
#[derive(Clone, Debug)]
pub struct Artifact {
    pub command: &'static str,
    pub table: Table,
    /// Extra structured payload placed under `"result"` in JSON.
    pub result: Option<Value>,
    /// One-line human summary.
    pub summary: String,
    /// Set when an internal check failed.
    pub failure: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}' (expected csv or json)")),
        }
    }
}

pub fn version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

pub fn render(
    artifact: &Artifact,
    config: &std::collections::BTreeMap<String, String>,
    format: Format,
) -> String {
    match format {
        Format::Csv => render_csv(artifact, config),
        Format::Json => {
            let mut s =
                serde_json::to_string_pretty(&to_json(artifact, config)).expect("json values");
            s.push('\n');
            s
        }
    }
}

fn render_csv(artifact: &Artifact, config: &std::collections::BTreeMap<String, String>) -> String {
    let mut out = String::new();
    let echo: Vec<String> = config.iter().map(|(k, v)| format!("{k}={v}")).collect();
    writeln!(out, "# version: {}", version()).unwrap();
    writeln!(out, "# command: {}", artifact.command).unwrap();
    writeln!(out, "# config: {}", echo.join(" ")).unwrap();
    writeln!(out, "{}", artifact.table.columns.join(",")).unwrap();
    for row in &artifact.table.rows {
        let cells: Vec<String> = row.iter().map(Cell::csv).collect();
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    out
}

fn to_json(artifact: &Artifact, config: &std::collections::BTreeMap<String, String>) -> Value {
    let rows: Vec<Value> = artifact
        .table
        .rows
        .iter()
        .map(|row| {
            let obj: Map<String, Value> = artifact
                .table
                .columns
                .iter()
                .zip(row)
                .map(|(c, v)| (c.to_string(), v.json()))
                .collect();
            Value::Object(obj)
        })
        .collect();
    let mut top = Map::new();
    top.insert("version".into(), json!(version()));
    top.insert("command".into(), json!(artifact.command));
    top.insert("config".into(), json!(config));
    top.insert("rows".into(), Value::Array(rows));
    if let Some(result) = &artifact.result {
        top.insert("result".into(), result.clone());
    }
    Value::Object(top)
}

/// Rounded decimal expansion with at most `sig` significant digits;
/// terminating values shorter than that are printed exactly.
pub fn decimal(r: &Rational, sig: usize) -> String {
    let sig = sig.max(1);
    if r.is_zero() {
        return "0".into();
    }
    let sign = if r.is_negative() { "-" } else { "" };
    let n = r.numer().abs();
    let d = r.denom().abs();
    let ten = BigInt::from(10);
    let pow10 = |e: u32| ten.pow(e);
    // floor(log10 r)
    let e0 = n.to_string().len() as i64 - d.to_string().len() as i64;
    let at_least = if e0 >= 0 {
        n >= &d * pow10(e0 as u32)
    } else {
        &n * pow10((-e0) as u32) >= d
    };
    let e = if at_least { e0 } else { e0 - 1 };
    let mut s = sig as i64 - 1 - e;
    let (num, den) = if s >= 0 {
        (&n * pow10(s as u32), d.clone())
    } else {
        (n.clone(), &d * pow10((-s) as u32))
    };
    let mut scaled: BigInt = (num * 2 + &den) / (den * 2);
    if scaled == pow10(sig as u32) {
        scaled /= &ten;
        s -= 1;
    }
    let digits = scaled.to_string();
    if s <= 0 {
        return format!("{sign}{digits}{}", "0".repeat((-s) as usize));
    }
    let s = s as usize;
    let padded = format!(
        "{}{digits}",
        "0".repeat((s + 1).saturating_sub(digits.len()))
    );
    let (int, frac) = padded.split_at(padded.len() - s);
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{int}")
    } else {
        format!("{sign}{int}.{frac}")
    }
}
