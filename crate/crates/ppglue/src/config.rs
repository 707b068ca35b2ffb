//! Sweep configuration: a TOML key-value file whose every key can also be
//! overridden from a string (the CLI passes `--grid.n 4096` through `set`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::MIN_NODES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n: usize,
    /// inner radius in units of epsilon (the AE radius rho)
    pub rmin: f64,
    pub rmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TolConfig {
    pub linear: f64,
    pub picard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Mu0Config {
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    #[serde(rename = "C")]
    pub c: f64,
    pub epsilons: Vec<f64>,
    pub nu: f64,
    pub grid: GridConfig,
    pub tol: TolConfig,
    #[serde(rename = "M")]
    pub mass: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub tau: f64,
    pub mu0: Mu0Config,
    pub out_dir: String,
    pub parallel: bool,
    pub seed: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: 2048, rmin: 5.0, rmax: 0.5 }
    }
}

impl Default for TolConfig {
    fn default() -> Self {
        TolConfig { linear: 1e-8, picard: 1e-10 }
    }
}

impl Default for Mu0Config {
    fn default() -> Self {
        Mu0Config { c: 1.0 }
    }
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            c: 10.0,
            epsilons: (10..=15).map(|k| 2f64.powi(-k)).collect(),
            nu: 1.75,
            grid: GridConfig::default(),
            tol: TolConfig::default(),
            mass: 1.0,
            lambda: 3.0,
            tau: 0.0,
            mu0: Mu0Config::default(),
            out_dir: "out".into(),
            parallel: true,
            seed: 0,
        }
    }
}

/// Every recognised key, in file order.
pub const KEYS: [&str; 15] = [
    "C", "epsilons", "nu", "grid.n", "grid.rmin", "grid.rmax", "tol.linear", "tol.picard", "M", "Lambda", "tau",
    "mu0.c", "out_dir", "parallel", "seed",
];

/// Reals also accept `a^b`, so `2^-10` is a valid epsilon.
pub fn parse_real(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Config(format!("not a number: {s:?}"));
    if let Some((a, b)) = s.split_once('^') {
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        return Ok(a.powf(b));
    }
    s.parse().map_err(|_| bad())
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    let s = s.trim().trim_start_matches('[').trim_end_matches(']');
    s.split(',').filter(|t| !t.trim().is_empty()).map(parse_real).collect()
}

impl SweepConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse { path: origin.into(), msg: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Fails only for values TOML cannot hold (integers above i64::MAX).
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("config does not serialize: {e}")))
    }

    /// Override one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let int = |v: &str| v.trim().parse::<u64>().map_err(|_| Error::Config(format!("{key}: not an integer: {v:?}")));
        match key {
            "C" => self.c = parse_real(value)?,
            "epsilons" => self.epsilons = parse_list(value)?,
            "nu" => self.nu = parse_real(value)?,
            "grid.n" => self.grid.n = int(value)? as usize,
            "grid.rmin" => self.grid.rmin = parse_real(value)?,
            "grid.rmax" => self.grid.rmax = parse_real(value)?,
            "tol.linear" => self.tol.linear = parse_real(value)?,
            "tol.picard" => self.tol.picard = parse_real(value)?,
            "M" => self.mass = parse_real(value)?,
            "Lambda" => self.lambda = parse_real(value)?,
            "tau" => self.tau = parse_real(value)?,
            "mu0.c" => self.mu0.c = parse_real(value)?,
            "out_dir" => self.out_dir = value.to_string(),
            "parallel" => {
                self.parallel = match value.trim() {
                    "true" | "1" | "yes" | "on" => true,
                    "false" | "0" | "no" | "off" => false,
                    v => return Err(Error::Config(format!("parallel: not a boolean: {v:?}"))),
                }
            }
            "seed" => self.seed = int(value)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !(self.c > 1.0) {
            return cfg(format!("C = {} must exceed 1", self.c));
        }
        if !(self.nu > 1.5 && self.nu < 2.0) {
            return cfg(format!("nu = {} outside (3/2, 2)", self.nu));
        }
        if self.epsilons.is_empty() {
            return cfg("no epsilons given".into());
        }
        let cap = 1.0 / (4.0 * self.c * self.c);
        for &e in &self.epsilons {
            if !(e > 0.0 && e <= cap) {
                return cfg(format!("epsilon {e} outside (0, (2C)^-2 = {cap}]"));
            }
        }
        if self.epsilons.windows(2).any(|w| !(w[1] < w[0])) {
            return cfg("epsilons must be strictly decreasing".into());
        }
        // TOML integers are signed
        if self.seed > i64::MAX as u64 {
            return cfg(format!("seed {} exceeds {}", self.seed, i64::MAX));
        }
        if self.grid.n < MIN_NODES {
            return Err(Error::InsufficientNodes { need: MIN_NODES, got: self.grid.n });
        }
        if !(self.grid.rmin > 0.0 && self.grid.rmax > 0.0) {
            return cfg("grid.rmin and grid.rmax must be positive".into());
        }
        if !(self.grid.rmin * self.epsilons[0] < self.grid.rmax) {
            return cfg("grid.rmin * epsilon must lie below grid.rmax".into());
        }
        if !(self.tol.linear > 0.0 && self.tol.picard > 0.0) {
            return cfg("tolerances must be positive".into());
        }
        if !(self.mass >= 0.0 && self.mu0.c >= 0.0) {
            return cfg("M and mu0.c must be non-negative".into());
        }
        let lam_eff = self.lambda - self.tau * self.tau / 3.0;
        if lam_eff > 0.0 && !(lam_eff * self.grid.rmax * self.grid.rmax < 3.0) {
            return cfg("grid.rmax reaches the de Sitter horizon".into());
        }
        Ok(())
    }
}
