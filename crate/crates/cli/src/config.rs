//! Plain `key = value` experiment configs with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hdi_core::Params;

use crate::CliError;

/// Parsed experiment configuration. Keys are checked against the set a
/// subcommand accepts before any work starts.
#[derive(Debug, Clone, Default)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
}

fn split_pair(line: &str, origin: &str) -> Result<(String, String), CliError> {
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| CliError::Validation(format!("{origin}: expected 'key = value', got '{line}'")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(CliError::Validation(format!("{origin}: empty key in '{line}'")));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = split_pair(line, &format!("line {}", i + 1))?;
            if values.insert(k.clone(), v).is_some() {
                return Err(CliError::Validation(format!("line {}: duplicate key '{k}'", i + 1)));
            }
        }
        Ok(ExperimentConfig { values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = split_pair(pair, "--set")?;
        self.values.insert(k, v);
        Ok(())
    }

    /// Rejects keys outside `allowed`. Keys `<prefix>.<name>` pass when
    /// `<prefix>` is one of `param_prefixes`.
    pub fn check_keys(&self, allowed: &[&str], param_prefixes: &[&str]) -> Result<(), CliError> {
        for k in self.values.keys() {
            let prefixed = k
                .split_once('.')
                .map(|(p, _)| param_prefixes.contains(&p))
                .unwrap_or(false);
            if !prefixed && k != "experiment" && !allowed.contains(&k.as_str()) {
                return Err(CliError::Validation(format!(
                    "unknown config key '{k}'; accepted keys: {}{}",
                    allowed.join(", "),
                    param_prefixes.iter().map(|p| format!(", {p}.<param>")).collect::<String>()
                )));
            }
        }
        Ok(())
    }

    pub fn check_experiment(&self, name: &str) -> Result<(), CliError> {
        match self.values.get("experiment") {
            Some(e) if e != name => Err(CliError::Validation(format!(
                "config is for experiment '{e}' but subcommand '{name}' was invoked"
            ))),
            _ => Ok(()),
        }
    }

    pub fn str_or(&self, key: &str, default: &str) -> String {
        self.values.get(key).cloned().unwrap_or_else(|| default.to_string())
    }

    pub fn opt_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.opt_str(key).map(PathBuf::from)
    }

    pub fn opt_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.values.get(key).map(|v| parse_f64(key, v)).transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, CliError> {
        self.values.get(key).map(|v| parse_usize(key, v)).transpose().map(|o| o.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| CliError::Validation(format!("{key} = '{v}' is not a non-negative integer"))),
        }
    }

    /// Comma-separated integers.
    pub fn usize_list_or(&self, key: &str, default: &[usize]) -> Result<Vec<usize>, CliError> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v.split(',').map(|s| parse_usize(key, s.trim())).collect(),
        }
    }

    /// Points separated by `;`, coordinates by `,`.
    pub fn points_or<const D: usize>(&self, key: &str, default: &[[f64; D]]) -> Result<Vec<[f64; D]>, CliError> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v.split(';').map(|p| parse_point::<D>(key, p)).collect(),
        }
    }

    pub fn point_or<const D: usize>(&self, key: &str, default: [f64; D]) -> Result<[f64; D], CliError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => parse_point::<D>(key, v),
        }
    }

    /// Geometry parameters given as `<prefix>.<name> = value`.
    pub fn params(&self, prefix: &str) -> Params {
        self.values
            .iter()
            .filter_map(|(k, v)| {
                k.strip_prefix(prefix)
                    .and_then(|r| r.strip_prefix('.'))
                    .map(|name| (name.to_string(), v.clone()))
            })
            .collect()
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, CliError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| CliError::Validation(format!("{key} = '{v}' is not a finite number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, CliError> {
    v.parse()
        .map_err(|_| CliError::Validation(format!("{key}: '{v}' is not a non-negative integer")))
}

fn parse_point<const D: usize>(key: &str, text: &str) -> Result<[f64; D], CliError> {
    let parts: Vec<&str> = text.split(',').map(|s| s.trim()).collect();
    if parts.len() != D {
        return Err(CliError::Validation(format!(
            "{key}: point '{}' needs {D} coordinates",
            text.trim()
        )));
    }
    let mut out = [0.0; D];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_f64(key, p)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut c = ExperimentConfig::parse("# study\ncurve = circle  # unit\nladder = 20, 40\n\n").unwrap();
        assert_eq!(c.str_or("curve", "kite"), "circle");
        assert_eq!(c.usize_list_or("ladder", &[]).unwrap(), vec![20, 40]);
        c.set("curve=kite").unwrap();
        assert_eq!(c.str_or("curve", ""), "kite");
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(ExperimentConfig::parse("curve circle").is_err());
        assert!(ExperimentConfig::parse("a = 1\na = 2").is_err());
        let c = ExperimentConfig::parse("order = two\nsrc = 1,2,3").unwrap();
        assert!(c.usize_or("order", 0).is_err());
        assert!(c.points_or::<2>("src", &[]).is_err());
        assert!(c.check_keys(&["order"], &[]).is_err());
    }

    #[test]
    fn geometry_params_and_points() {
        let c = ExperimentConfig::parse("surface.radius = 2\nsurface.gap = 0.05\nsources = 0,0,0.5; 1,2,3").unwrap();
        let p = c.params("surface");
        assert_eq!(p.get("radius").map(|s| s.as_str()), Some("2"));
        assert_eq!(p.len(), 2);
        assert_eq!(c.points_or::<3>("sources", &[]).unwrap(), vec![[0.0, 0.0, 0.5], [1.0, 2.0, 3.0]]);
        assert!(c.check_keys(&["sources"], &["surface"]).is_ok());
    }
}
