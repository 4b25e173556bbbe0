//! Scenario configuration: defaults per scenario, overlaid by a key = value
//! config file (with one section per scenario), overlaid by CLI flags.

use std::collections::BTreeMap;

use serde::Serialize;

use super::scenarios::HarnessError;

/// Resolved parameters of one scenario run.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub lambda: f64,
    pub kappa: f64,
    pub eta: f64,
    pub x0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub bridge_correction: bool,
    /// Named tolerance overrides; scenarios document which keys they read.
    pub tol: BTreeMap<String, f64>,
}

/// Optional command-line overrides (highest precedence).
#[derive(Debug, Clone, Default)]
pub struct CliOverrides {
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
}

impl ScenarioConfig {
    /// Applies a config file: top-level keys first, then the section named
    /// after this scenario. Precedence over these is taken by CLI flags.
    pub fn apply_file(&mut self, text: &str) -> Result<(), HarnessError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| HarnessError::Config(format!("config parse error: {e}")))?;
        for (key, value) in &table {
            if let toml::Value::Table(section) = value {
                if key == &self.scenario {
                    for (k, v) in section {
                        self.apply_kv(k, v)?;
                    }
                }
            } else {
                self.apply_kv(key, value)?;
            }
        }
        Ok(())
    }

    pub fn apply_cli(&mut self, cli: &CliOverrides) {
        if let Some(seed) = cli.seed {
            self.seed = seed;
        }
        if let Some(n) = cli.n_paths {
            self.n_paths = n;
        }
        if let Some(dt) = cli.dt {
            self.dt = dt;
        }
        if let Some(h) = cli.horizon {
            self.horizon = h;
        }
    }

    fn apply_kv(&mut self, key: &str, value: &toml::Value) -> Result<(), HarnessError> {
        let bad = |k: &str| HarnessError::Config(format!("bad value for key `{k}`"));
        let as_f64 = |v: &toml::Value, k: &str| -> Result<f64, HarnessError> {
            match v {
                toml::Value::Float(x) => Ok(*x),
                toml::Value::Integer(i) => Ok(*i as f64),
                _ => Err(bad(k)),
            }
        };
        match key {
            "lambda" => self.lambda = as_f64(value, key)?,
            "kappa" => self.kappa = as_f64(value, key)?,
            "eta" => self.eta = as_f64(value, key)?,
            "x0" | "zeta" => self.x0 = as_f64(value, key)?,
            "horizon" => self.horizon = as_f64(value, key)?,
            "dt" => self.dt = as_f64(value, key)?,
            "n_paths" | "paths" => match value {
                toml::Value::Integer(i) if *i > 0 => self.n_paths = *i as usize,
                _ => return Err(bad(key)),
            },
            "seed" => match value {
                toml::Value::Integer(i) if *i >= 0 => self.seed = *i as u64,
                _ => return Err(bad(key)),
            },
            "bridge_correction" => match value {
                toml::Value::Boolean(b) => self.bridge_correction = *b,
                _ => return Err(bad(key)),
            },
            "tol" => match value {
                toml::Value::Table(t) => {
                    for (name, v) in t {
                        self.tol.insert(name.clone(), as_f64(v, name)?);
                    }
                }
                _ => return Err(bad(key)),
            },
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown config key `{other}`"
                )))
            }
        }
        Ok(())
    }

    /// Tolerance override lookup with a scenario-defined default.
    pub fn tol_or(&self, name: &str, default: f64) -> f64 {
        self.tol.get(name).copied().unwrap_or(default)
    }
}
