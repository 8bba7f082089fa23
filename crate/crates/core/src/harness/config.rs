use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::swarm::SwarmConfig;
use crate::tracer::{TraceConfig, DEFAULT_CLOSING_RADIUS, DEFAULT_DETECT_RADIUS};

pub const DEFAULT_MAX_STEPS: u64 = 50_000;

/// Everything a single run needs besides the dataset and the seed. Loaded
/// from a flat TOML file whose keys are the field names below plus those of
/// [`SwarmConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub swarm: SwarmConfig,
    pub width: usize,
    pub height: usize,
    pub max_steps: u64,
    /// Chebyshev radius within which a boundary cell encounters a city.
    pub detect_radius: i32,
    /// Closing radius applied to the occupancy mask before tracing.
    pub closing_radius: i32,
    /// Frame dump period in steps; 0 disables frames.
    pub frames_every: u64,
    /// 2-opt restarts for the baseline beyond the exact solver's range.
    pub two_opt_restarts: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            swarm: SwarmConfig::default(),
            width: 200,
            height: 200,
            max_steps: DEFAULT_MAX_STEPS,
            detect_radius: DEFAULT_DETECT_RADIUS,
            closing_radius: DEFAULT_CLOSING_RADIUS,
            frames_every: 0,
            two_opt_restarts: 50,
        }
    }
}

impl RunConfig {
    pub fn trace(&self) -> TraceConfig {
        TraceConfig {
            detect_radius: self.detect_radius,
            closing_radius: self.closing_radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.swarm.validate()?;
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("lattice dimensions must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be positive".into()));
        }
        if self.detect_radius < 0 || self.closing_radius < 0 {
            return Err(Error::Config("detect_radius and closing_radius must be ≥0".into()));
        }
        if self.two_opt_restarts == 0 {
            return Err(Error::NoRestarts);
        }
        Ok(())
    }

    /// Every key the file format accepts.
    pub fn keys() -> BTreeSet<String> {
        match toml::Table::try_from(RunConfig::default()) {
            Ok(table) => table.keys().cloned().collect(),
            Err(e) => unreachable!("default config serializes: {e}"),
        }
    }

    /// Parses TOML text, then applies `key=value` overrides (values in TOML
    /// syntax). Unknown keys are rejected.
    pub fn from_toml(text: &str, overrides: &[String], origin: &Path) -> Result<Self> {
        let parse_err = |msg: String| Error::Parse {
            path: origin.to_path_buf(),
            msg,
        };
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
            let key = key.trim();
            let doc = format!("v = {}", value.trim());
            let value = doc
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                // bare words are taken as strings
                .unwrap_or_else(|| toml::Value::String(value.trim().to_string()));
            table.insert(key.to_string(), value);
        }
        let known = Self::keys();
        let unknown: Vec<&String> = table.keys().filter(|k| !known.contains(*k)).collect();
        if !unknown.is_empty() {
            let list: Vec<&str> = unknown.iter().map(|s| s.as_str()).collect();
            return Err(Error::Config(format!("unknown config key(s): {}", list.join(", "))));
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| parse_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, overrides, path)
    }

    pub fn to_toml(&self) -> String {
        match toml::to_string(self) {
            Ok(s) => s,
            Err(e) => unreachable!("config serializes: {e}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, overrides: &[&str]) -> Result<RunConfig> {
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        RunConfig::from_toml(text, &o, Path::new("test.toml"))
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(parse("", &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.swarm.sensor_offset = 9.0;
        cfg.max_steps = 123;
        assert_eq!(parse(&cfg.to_toml(), &[]).unwrap(), cfg);
    }

    #[test]
    fn flat_keys_and_overrides() {
        let cfg = parse("sensor_angle = 45.0\nwidth = 150\n", &["seed=7", "width = 120"]).unwrap();
        assert_eq!(cfg.swarm.sensor_angle, 45.0);
        assert_eq!(cfg.swarm.seed, 7);
        assert_eq!(cfg.width, 120);
        assert!(RunConfig::keys().contains("init_density"));
        assert!(RunConfig::keys().contains("closing_radius"));
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let err = parse("sensor_angel = 45.0\n", &[]).unwrap_err();
        assert!(err.to_string().contains("sensor_angel"), "{err}");
        assert!(parse("", &["bogus=1"]).is_err());
        assert!(parse("", &["nokey"]).is_err());
        assert!(parse("init_density = 0.0\n", &[]).is_err());
        assert!(parse("sensor_offset = 2.0\n", &[]).is_err());
        assert!(parse("width = \"wide\"\n", &[]).is_err());
    }
}
