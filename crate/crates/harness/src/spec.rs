//! Experiment specifications and typed access to their parameters.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::Deserialize;
use serde_json::{Map, Value};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExperimentKind {
    InterferenceGrid,
    VarianceScaling,
    Spread,
    Uncertainty,
    Malus,
    Chain,
    Chsh,
    Twoslit,
    SchwarzschildDemo,
    MeasurementDemo,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 10] = [
        ExperimentKind::InterferenceGrid,
        ExperimentKind::VarianceScaling,
        ExperimentKind::Spread,
        ExperimentKind::Uncertainty,
        ExperimentKind::Malus,
        ExperimentKind::Chain,
        ExperimentKind::Chsh,
        ExperimentKind::Twoslit,
        ExperimentKind::SchwarzschildDemo,
        ExperimentKind::MeasurementDemo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::InterferenceGrid => "interference-grid",
            ExperimentKind::VarianceScaling => "variance-scaling",
            ExperimentKind::Spread => "spread",
            ExperimentKind::Uncertainty => "uncertainty",
            ExperimentKind::Malus => "malus",
            ExperimentKind::Chain => "chain",
            ExperimentKind::Chsh => "chsh",
            ExperimentKind::Twoslit => "twoslit",
            ExperimentKind::SchwarzschildDemo => "schwarzschild-demo",
            ExperimentKind::MeasurementDemo => "measurement-demo",
        }
    }

    /// Experiments that draw random numbers and so need a seed.
    pub fn is_stochastic(self) -> bool {
        !matches!(
            self,
            ExperimentKind::InterferenceGrid | ExperimentKind::SchwarzschildDemo | ExperimentKind::MeasurementDemo
        )
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::Config(format!("unknown experiment '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    pub seed: Option<u64>,
    pub params: Map<String, Value>,
    pub output_dir: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    experiment: String,
    seed: Option<u64>,
    #[serde(default)]
    params: Map<String, Value>,
    output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(experiment: ExperimentKind, seed: Option<u64>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            experiment,
            seed,
            params: Map::new(),
            output_dir: output_dir.into(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    /// Parses the JSON config format. A missing `output_dir` defaults to
    /// `runs/<experiment>`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawSpec = serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("invalid config: {e}")))?;
        let experiment: ExperimentKind = raw.experiment.parse()?;
        Ok(Self {
            experiment,
            seed: raw.seed,
            params: raw.params,
            output_dir: raw
                .output_dir
                .unwrap_or_else(|| PathBuf::from("runs").join(experiment.name())),
        })
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| HarnessError::Config(format!("experiment '{}' needs a seed", self.experiment)))
    }
}

/// Read-only view of a parameter map that rejects unknown keys up front.
pub struct Params<'a> {
    map: &'a Map<String, Value>,
}

impl<'a> Params<'a> {
    pub fn new(map: &'a Map<String, Value>, allowed: &[&str]) -> Result<Self> {
        let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
        if let Some(unknown) = map.keys().find(|k| !allowed.contains(k.as_str())) {
            return Err(HarnessError::Config(format!(
                "unknown parameter '{unknown}' (expected one of: {})",
                allowed.into_iter().collect::<Vec<_>>().join(", ")
            )));
        }
        Ok(Self { map })
    }

    fn bad(key: &str, what: &str, v: &Value) -> HarnessError {
        HarnessError::Config(format!("parameter '{key}' must be {what}, got {v}"))
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Self::bad(key, "a finite number", v)),
        }
    }

    pub fn u64(&self, key: &str, default: u64) -> Result<u64> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.as_u64().ok_or_else(|| Self::bad(key, "a non-negative integer", v)),
        }
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        let v = self.u64(key, default as u64)?;
        usize::try_from(v).map_err(|_| HarnessError::Config(format!("parameter '{key}' is too large")))
    }

    pub fn bool(&self, key: &str, default: bool) -> Result<bool> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.as_bool().ok_or_else(|| Self::bad(key, "a boolean", v)),
        }
    }

    pub fn str(&self, key: &str, default: &'a str) -> Result<&'a str> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.as_str().ok_or_else(|| Self::bad(key, "a string", v)),
        }
    }

    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.map.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .as_array()
                .and_then(|a| a.iter().map(|x| x.as_f64().filter(|x| x.is_finite())).collect())
                .ok_or_else(|| Self::bad(key, "an array of finite numbers", v)),
        }
    }

    pub fn usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.map.get(key) {
            None => Ok(default.to_vec()),
            Some(v) => v
                .as_array()
                .and_then(|a| a.iter().map(|x| x.as_u64().and_then(|n| usize::try_from(n).ok())).collect())
                .ok_or_else(|| Self::bad(key, "an array of non-negative integers", v)),
        }
    }

    pub fn vec4(&self, key: &str, default: [f64; 4]) -> Result<[f64; 4]> {
        let v = self.f64_list(key, &default)?;
        v.try_into()
            .map_err(|_| HarnessError::Config(format!("parameter '{key}' must have 4 entries")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.name().parse::<ExperimentKind>().unwrap(), k);
        }
        assert!("telepathy".parse::<ExperimentKind>().is_err());
    }

    #[test]
    fn parses_config() {
        let s = ExperimentSpec::from_json(r#"{"experiment":"malus","seed":7,"params":{"n":10000},"output_dir":"out"}"#)
            .unwrap();
        assert_eq!(s.experiment, ExperimentKind::Malus);
        assert_eq!(s.seed, Some(7));
        assert_eq!(s.output_dir, PathBuf::from("out"));
        let s = ExperimentSpec::from_json(r#"{"experiment":"chsh"}"#).unwrap();
        assert_eq!(s.output_dir, PathBuf::from("runs/chsh"));
        assert!(s.require_seed().is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{"experiment":"nope","seed":1}"#,
            r#"{"seed":1}"#,
            r#"{"experiment":"malus","seed":-1}"#,
            r#"{"experiment":"malus","seed":1,"colour":"red"}"#,
            "not json",
        ] {
            let e = ExperimentSpec::from_json(text).unwrap_err();
            assert_eq!(e.exit_code(), 1, "{text}");
        }
    }

    #[test]
    fn params_are_typed() {
        let map: Map<String, Value> = serde_json::from_str(r#"{"n":5,"x":0.5,"list":[1,2],"flag":true}"#).unwrap();
        let p = Params::new(&map, &["n", "x", "list", "flag", "unused"]).unwrap();
        assert_eq!(p.usize("n", 0).unwrap(), 5);
        assert_eq!(p.f64("x", 0.0).unwrap(), 0.5);
        assert_eq!(p.f64("unused", 2.0).unwrap(), 2.0);
        assert_eq!(p.usize_list("list", &[]).unwrap(), vec![1, 2]);
        assert!(p.bool("flag", false).unwrap());
        assert!(p.str("x", "").is_err());
        assert!(p.usize("x", 0).is_err());
        assert!(Params::new(&map, &["n"]).is_err());
    }
}
