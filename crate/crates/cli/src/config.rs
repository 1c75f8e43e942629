//! Flat key/value run configuration.
//!
//! A config file holds one `key = value` pair per line (`#` starts a
//! comment). Command-line flags `--key value` use the same keys, with `-`
//! and `_` interchangeable, and override the file. Values are typed by the
//! key registry below; grids use `a:b:step` and lists are comma-separated.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot parse `{value}` as {kind}")]
    BadValue {
        key: String,
        value: String,
        kind: &'static str,
    },
    #[error(
        "unknown command `{0}` (expected classify, simulate, lifetime, verify or criteria-map)"
    )]
    UnknownCommand(String),
    #[error("{0}")]
    Syntax(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Num,
    Int,
    Str,
    Grid,
    List,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Num => "a number",
            Kind::Int => "a non-negative integer",
            Kind::Str => "a string",
            Kind::Grid => "a grid a:b:step",
            Kind::List => "a comma-separated list of numbers",
        }
    }
}

/// Every accepted key with its type and a one-line description.
pub const KEYS: &[(&str, Kind, &str)] = &[
    ("family", Kind::Str, "compound-poisson | stable | stable-subordinator | gamma-subordinator | brownian-cp"),
    ("alpha", Kind::Num, "stable index"),
    ("rhobar", Kind::Num, "negativity parameter P(X_1 < 0)"),
    ("scale", Kind::Num, "stable scale c (default 1)"),
    ("shape", Kind::Num, "Gamma shape a"),
    ("rate", Kind::Num, "Gamma rate b"),
    ("drift", Kind::Num, "linear drift (default 0)"),
    ("sigma", Kind::Num, "Brownian volatility (default 0)"),
    ("rate_up", Kind::Num, "rate of upward exponential jumps"),
    ("mu_up", Kind::Num, "parameter of upward exponential jumps (mean 1/mu)"),
    ("rate_down", Kind::Num, "rate of downward exponential jumps"),
    ("mu_down", Kind::Num, "parameter of downward exponential jumps (mean 1/mu)"),
    ("alpha_grid", Kind::Grid, "alpha grid for criteria-map"),
    ("rho_grid", Kind::Grid, "rho_bar grid for criteria-map"),
    ("start", Kind::Num, "start level (default 1)"),
    ("starts", Kind::List, "start levels"),
    ("horizon", Kind::Num, "time horizon of resurrected paths"),
    ("grid_dt", Kind::Num, "time grid step"),
    ("truncation_delta", Kind::Num, "absolute small-jump cutoff"),
    ("truncation_rel", Kind::Num, "level-relative small-jump cutoff"),
    ("budget", Kind::Num, "time budget of one first passage"),
    ("n_paths", Kind::Int, "number of replicas"),
    ("eps_abs", Kind::Num, "absorption level threshold relative to the start"),
    ("eps_time", Kind::Num, "absorption gap threshold relative to elapsed time"),
    ("k_gaps", Kind::Int, "number of gaps in the absorption test"),
    ("n_max", Kind::Int, "maximum number of resurrections"),
    ("max_nodes", Kind::Int, "node budget of a recorded trace (simulate)"),
    ("kernel_mode", Kind::Str, "pathwise | closed-form (lifetime)"),
    ("check", Kind::Str, "all | exp-law | feynman-kac | domination | lifetime | kernel | scaling | invariance | probe"),
    ("t", Kind::Num, "time of the Feynman-Kac check"),
    ("f", Kind::Str, "test function: zero | f1 | f2 | f3:<m>"),
    ("n_res", Kind::Int, "resurrections for the domination check"),
    ("lambda", Kind::Num, "discount rate of the invariance check"),
    ("seed", Kind::Int, "master seed"),
    ("out", Kind::Str, "output directory"),
];

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter()
        .find(|(k, _, _)| *k == key)
        .map(|(_, kind, _)| *kind)
}

/// Canonical key name: lower case with `_` separators.
pub fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(u64),
    Str(String),
    Grid { from: f64, to: f64, step: f64 },
    List(Vec<f64>),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => write!(f, "{v}"),
            Value::Int(v) => write!(f, "{v}"),
            Value::Str(s) => write!(f, "{s}"),
            Value::Grid { from, to, step } => write!(f, "{from}:{to}:{step}"),
            Value::List(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "{}", parts.join(","))
            }
        }
    }
}

fn parse_num(key: &str, raw: &str) -> Result<f64, ConfigError> {
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ConfigError::BadValue {
            key: key.into(),
            value: raw.into(),
            kind: Kind::Num.name(),
        })
}

fn parse_value(key: &str, raw: &str) -> Result<Value, ConfigError> {
    let kind = kind_of(key).ok_or_else(|| ConfigError::UnknownKey(key.into()))?;
    let bad = || ConfigError::BadValue {
        key: key.into(),
        value: raw.into(),
        kind: kind.name(),
    };
    let raw_t = raw.trim();
    match kind {
        Kind::Num => parse_num(key, raw_t).map(Value::Num),
        Kind::Int => raw_t.parse::<u64>().map(Value::Int).map_err(|_| bad()),
        Kind::Str => {
            if raw_t.is_empty() {
                Err(bad())
            } else {
                Ok(Value::Str(raw_t.to_string()))
            }
        }
        Kind::Grid => {
            let parts: Vec<&str> = raw_t.split(':').collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            let (from, to, step) = (
                parse_num(key, parts[0]).map_err(|_| bad())?,
                parse_num(key, parts[1]).map_err(|_| bad())?,
                parse_num(key, parts[2]).map_err(|_| bad())?,
            );
            if step <= 0.0 || to < from {
                return Err(bad());
            }
            Ok(Value::Grid { from, to, step })
        }
        Kind::List => raw_t
            .split(',')
            .map(|p| parse_num(key, p).map_err(|_| bad()))
            .collect::<Result<Vec<f64>, _>>()
            .map(Value::List),
    }
}

/// Expand `a:b:step` into its points, robust to rounding of the end point.
pub fn grid_points(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step + 1e-9).floor() as usize;
    // rounded to 12 decimals so 0.05 + 2 * 0.05 prints as 0.15
    (0..=n)
        .map(|k| ((from + k as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Classify,
    Simulate,
    Lifetime,
    Verify,
    CriteriaMap,
}

impl Command {
    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        Ok(match s {
            "classify" => Command::Classify,
            "simulate" => Command::Simulate,
            "lifetime" => Command::Lifetime,
            "verify" => Command::Verify,
            "criteria-map" => Command::CriteriaMap,
            other => return Err(ConfigError::UnknownCommand(other.into())),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Simulate => "simulate",
            Command::Lifetime => "lifetime",
            Command::Verify => "verify",
            Command::CriteriaMap => "criteria-map",
        }
    }
}

/// Typed key/value configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub entries: BTreeMap<String, Value>,
}

impl Config {
    /// Parse config-file text.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Config::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                ConfigError::Syntax(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        let key = normalize_key(key);
        let value = parse_value(&key, raw)?;
        self.entries.insert(key, value);
        Ok(())
    }

    /// Canonical text form: sorted `key = value` lines.
    pub fn serialize(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn num(&self, key: &str) -> Option<f64> {
        match self.entries.get(key)? {
            Value::Num(v) => Some(*v),
            Value::Int(v) => Some(*v as f64),
            _ => None,
        }
    }

    pub fn num_or(&self, key: &str, default: f64) -> f64 {
        self.num(key).unwrap_or(default)
    }

    pub fn require_num(&self, key: &str) -> Result<f64, ConfigError> {
        self.num(key)
            .ok_or_else(|| ConfigError::Missing(key.into()))
    }

    pub fn int(&self, key: &str) -> Option<u64> {
        match self.entries.get(key)? {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn int_or(&self, key: &str, default: u64) -> u64 {
        self.int(key).unwrap_or(default)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        match self.entries.get(key)? {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn require_str(&self, key: &str) -> Result<&str, ConfigError> {
        self.str(key)
            .ok_or_else(|| ConfigError::Missing(key.into()))
    }

    pub fn grid(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        match self.entries.get(key) {
            Some(Value::Grid { from, to, step }) => Ok(grid_points(*from, *to, *step)),
            _ => Err(ConfigError::Missing(key.into())),
        }
    }

    pub fn list(&self, key: &str) -> Option<Vec<f64>> {
        match self.entries.get(key)? {
            Value::List(v) => Some(v.clone()),
            Value::Num(v) => Some(vec![*v]),
            _ => None,
        }
    }
}

/// Parsed command line: command plus merged configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub config: Config,
}

/// Parse `COMMAND [--config FILE] [--key value]...`. The config file is
/// read through `read_file` so tests can inject contents.
pub fn parse_args<F>(args: &[String], read_file: F) -> Result<RunConfig, ConfigError>
where
    F: Fn(&str) -> Result<String, String>,
{
    let mut it = args.iter();
    let command = Command::parse(
        it.next()
            .ok_or_else(|| ConfigError::Syntax("no command given".into()))?,
    )?;
    let mut flags = Vec::new();
    let mut file = None;
    while let Some(a) = it.next() {
        let key = a
            .strip_prefix("--")
            .ok_or_else(|| ConfigError::Syntax(format!("expected `--key value`, found `{a}`")))?;
        let value = it
            .next()
            .ok_or_else(|| ConfigError::Syntax(format!("flag `--{key}` needs a value")))?;
        if normalize_key(key) == "config" {
            file = Some(value.clone());
        } else {
            flags.push((key.to_string(), value.clone()));
        }
    }
    let mut config = match file {
        Some(path) => Config::parse(
            &read_file(&path).map_err(|e| ConfigError::Syntax(format!("config {path}: {e}")))?,
        )?,
        None => Config::default(),
    };
    for (k, v) in flags {
        config.set(&k, &v)?;
    }
    Ok(RunConfig { command, config })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    fn no_file(_: &str) -> Result<String, String> {
        Err("no file".into())
    }

    #[test]
    fn flags_and_grids() {
        let rc = parse_args(
            &args(
                "criteria-map --family stable --alpha-grid 0.1:2.0:0.1 --rho-grid 0.05:0.95:0.05",
            ),
            no_file,
        )
        .unwrap();
        assert_eq!(rc.command, Command::CriteriaMap);
        let a = rc.config.grid("alpha_grid").unwrap();
        assert_eq!(a.len(), 20);
        assert!((a[19] - 2.0).abs() < 1e-12);
        assert_eq!(rc.config.grid("rho_grid").unwrap().len(), 19);
    }

    #[test]
    fn unknown_and_bad_keys_are_rejected() {
        assert_eq!(
            parse_args(&args("classify --colour red"), no_file),
            Err(ConfigError::UnknownKey("colour".into()))
        );
        assert!(matches!(
            parse_args(&args("classify --alpha abc"), no_file),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            parse_args(&args("classify --alpha"), no_file),
            Err(ConfigError::Syntax(_))
        ));
        assert!(matches!(
            parse_args(&args("fly --alpha 1"), no_file),
            Err(ConfigError::UnknownCommand(_))
        ));
    }

    #[test]
    fn file_then_flags() {
        let text = "# model\nfamily = stable\nalpha = 1.5\nrhobar = 0.5 # comment\n";
        let rc = parse_args(&args("classify --config c.txt --alpha 0.5"), |_| {
            Ok(text.to_string())
        })
        .unwrap();
        assert_eq!(rc.config.num("alpha"), Some(0.5));
        assert_eq!(rc.config.num("rhobar"), Some(0.5));
    }

    #[test]
    fn round_trip_is_idempotent() {
        let text =
            "starts = 0.5, 1, 2\nalpha_grid = 0.1:2:0.1\nseed = 7\nfamily = stable\nalpha = 1.50\n";
        let once = Config::parse(text).unwrap().serialize();
        let twice = Config::parse(&once).unwrap().serialize();
        assert_eq!(once, twice);
        assert_eq!(Config::parse(&once).unwrap(), Config::parse(text).unwrap());
        assert!(once.starts_with("alpha = 1.5\n"));
    }
}
