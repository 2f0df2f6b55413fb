use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use odeim_bd::bethe::standard_shifts;
use odeim_bd::{FieldConfig, C64};
use serde::Deserialize;

/// Settings read from `--config`. Every key is optional; flags take precedence.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: Option<String>,
    pub alpha: Option<f64>,
    pub g: Option<f64>,
    pub s: Option<f64>,
    pub field: Option<FieldConfig>,
    pub field_file: Option<PathBuf>,
    pub conformal: Option<bool>,
    pub theta: Option<String>,
    pub shifts: Option<String>,
    pub window: Option<String>,
    pub im_max: Option<f64>,
    pub which: Option<String>,
    pub tol: Option<f64>,
    pub s_sequence: Option<Vec<f64>>,
    pub suite: Option<String>,
    pub q_file: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub q_out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub strict: Option<bool>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| anyhow!("invalid config {}: {e}", path.display()))?;
        Ok(cfg)
    }
}

/// Error kind that maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(UsageError(msg.into()))
}

pub fn pick<T>(flag: Option<T>, cfg: Option<T>) -> Option<T> {
    flag.or(cfg)
}

pub fn require<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| usage(format!("missing required option --{name}")))
}

/// `start:stop:count`.
pub fn parse_grid(s: &str) -> Result<Vec<C64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(usage(format!("theta grid must be start:stop:count, got {s:?}")));
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| usage(format!("bad grid start {:?}", parts[0])))?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| usage(format!("bad grid stop {:?}", parts[1])))?;
    let n: usize = parts[2].trim().parse().map_err(|_| usage(format!("bad grid count {:?}", parts[2])))?;
    if n == 0 || (n > 1 && stop <= start) {
        return Err(usage("theta grid needs count >= 1 and stop > start"));
    }
    Ok(odeim_bd::bethe::linear_grid(start, stop, n))
}

/// `lo:hi`.
pub fn parse_range(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once(':').ok_or_else(|| usage(format!("range must be lo:hi, got {s:?}")))?;
    let lo: f64 = a.trim().parse().map_err(|_| usage(format!("bad number {a:?}")))?;
    let hi: f64 = b.trim().parse().map_err(|_| usage(format!("bad number {b:?}")))?;
    if hi <= lo {
        bail!(usage("range needs hi > lo"));
    }
    Ok((lo, hi))
}

/// A real number, optionally written as a multiple of pi such as `-2pi/3`.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim();
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n, d.trim().parse::<f64>().map_err(|_| usage(format!("bad shift {s:?}")))?),
        None => (t, 1.0),
    };
    let coef = num.trim().strip_suffix("pi").ok_or_else(|| usage(format!("bad shift {s:?}")))?;
    let c = match coef.trim() {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| usage(format!("bad shift {s:?}")))?,
    };
    Ok(c * PI / den)
}

/// Named presets `none`, `qq`, `bae` (all five shifts) or a comma-separated list.
pub fn parse_shifts(s: &str) -> Result<Vec<f64>> {
    match s.trim() {
        "none" => Ok(vec![0.0]),
        "qq" => Ok(vec![0.0, PI / 3.0, -PI / 3.0]),
        "bae" | "all" => Ok(standard_shifts()),
        list => list.split(',').map(parse_angle).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert_eq!(parse_angle("0.5").unwrap(), 0.5);
        assert!((parse_angle("-2pi/3").unwrap() + 2.0 * PI / 3.0).abs() < 1e-15);
        assert!((parse_angle("pi/3").unwrap() - PI / 3.0).abs() < 1e-15);
        assert!(parse_angle("x").is_err());
        assert_eq!(parse_shifts("qq").unwrap().len(), 3);
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:5").unwrap().len(), 5);
        assert_eq!(parse_grid("0.3:0.3:1").unwrap().len(), 1);
        assert!(parse_grid("1:0:3").is_err());
        assert!(parse_grid("0:1").is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"alpha": 1, "bogus": 2}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"alpha": 1, "field": {"n_modes": 8}}"#).unwrap();
        assert_eq!(c.field.unwrap().n_modes, 8);
    }
}
