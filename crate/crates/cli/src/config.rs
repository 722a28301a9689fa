//! Flat `key = value` scenario files.
//!
//! Blank lines and `#` comments are ignored. Unset fields take the default
//! scenario values; command-line flags override the file.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use hdqkd_core::entropy::{Backend, SolverOptions};
use hdqkd_core::keyrate::SweepAxis;
use hdqkd_core::model::{check_even_dimension, Loss, Protocol, ProtocolConfig, DEFAULT_FRAME_LENGTH_S};

/// Configuration problem, with the offending line when there is one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line number in the file.
    pub line: Option<usize>,
    /// What went wrong.
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError { line: Some(line), message: message.into() }
    }

    fn general(message: impl Into<String>) -> Self {
        ConfigError { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Grid specification of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub log_scale: bool,
}

impl SweepSpec {
    /// Grid values, ascending.
    pub fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                let f = i as f64 / last;
                if self.log_scale {
                    (self.start.ln() + f * (self.stop.ln() - self.start.ln())).exp()
                } else {
                    self.start + f * (self.stop - self.start)
                }
            })
            .collect()
    }
}

/// Validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub protocol: Protocol,
    pub d: usize,
    pub frame_length_s: f64,
    pub pair_rate_hz: f64,
    pub dark_rate_hz: f64,
    pub solar_rate_hz: f64,
    pub loss: Loss,
    pub eta_d: f64,
    pub quadrature_m: usize,
    pub sweep: Option<SweepSpec>,
    pub seed: u64,
    pub backend: Backend,
    pub gap_tolerance: f64,
    /// Frames per Monte Carlo check in `validate`.
    pub mc_frames: u64,
}

impl ScenarioConfig {
    /// Core configuration of the scenario.
    pub fn protocol_config(&self) -> ProtocolConfig {
        ProtocolConfig {
            protocol: self.protocol,
            d: self.d,
            frame_length_s: self.frame_length_s,
            pair_rate_hz: self.pair_rate_hz,
            dark_rate_hz: self.dark_rate_hz,
            solar_rate_hz: self.solar_rate_hz,
            loss: self.loss,
            eta_d: self.eta_d,
            quadrature_m: self.quadrature_m,
        }
    }

    /// Solver settings of the scenario.
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions { backend: self.backend, gap_tolerance: self.gap_tolerance, ..SolverOptions::default() }
    }
}

/// Raw `key = value` entries with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: HashMap<String, (usize, String)>,
}

const KEYS: &[&str] = &[
    "protocol",
    "d",
    "frame_length_s",
    "pair_rate_hz",
    "dark_rate_hz",
    "solar_rate_hz",
    "loss_db",
    "loss_prob",
    "eta_d",
    "quadrature_m",
    "sweep_axis",
    "sweep_start",
    "sweep_stop",
    "sweep_points",
    "sweep_log_scale",
    "seed",
    "solver",
    "solver_tolerance",
    "mc_frames",
];

impl RawConfig {
    /// Parses the text of a scenario file.
    pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
        let mut entries = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected 'key = value', got '{content}'")))?;
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            if !KEYS.contains(&key.as_str()) {
                return Err(ConfigError::at(line, format!("unknown key '{key}'")));
            }
            if value.is_empty() {
                return Err(ConfigError::at(line, format!("empty value for '{key}'")));
            }
            if let Some((first, _)) = entries.get(&key) {
                return Err(ConfigError::at(line, format!("'{key}' already set on line {first}")));
            }
            entries.insert(key, (line, value));
        }
        Ok(RawConfig { entries })
    }

    /// Reads and parses a scenario file.
    pub fn from_path(path: &Path) -> Result<RawConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::general(format!("cannot read {}: {e}", path.display())))?;
        RawConfig::parse(&text)
    }

    /// Sets `key` as if given on the command line, replacing the file value.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        // A loss given on the command line replaces either loss form.
        if key == "loss_db" || key == "loss_prob" {
            self.entries.remove("loss_db");
            self.entries.remove("loss_prob");
        }
        self.entries.insert(key.to_string(), (0, value.into()));
    }

    fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.entries.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn error(line: usize, message: String) -> ConfigError {
        if line == 0 {
            ConfigError::general(message)
        } else {
            ConfigError::at(line, message)
        }
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<Option<(usize, T)>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(|x| Some((line, x)))
                .map_err(|_| Self::error(line, format!("invalid value '{v}' for '{key}'"))),
        }
    }

    fn real(&self, key: &str, default: f64, check: impl Fn(f64) -> bool, rule: &str) -> Result<f64, ConfigError> {
        match self.number::<f64>(key)? {
            None => Ok(default),
            Some((_, x)) if x.is_finite() && check(x) => Ok(x),
            Some((line, x)) => Err(Self::error(line, format!("'{key}' = {x}: {rule}"))),
        }
    }

    /// Validates the entries into a scenario. Protocol and dimension are
    /// only required when `need_scenario` is set.
    pub fn resolve(&self, need_scenario: bool) -> Result<ScenarioConfig, ConfigError> {
        let protocol = match self.get("protocol") {
            Some((line, v)) => Protocol::from_tag(v).map_err(|e| Self::error(line, e.to_string()))?,
            None if need_scenario => return Err(ConfigError::general("missing 'protocol' (file key or --protocol)")),
            None => Protocol::P1,
        };
        let d = match self.number::<usize>("d")? {
            Some((line, d)) => {
                check_even_dimension(d).map_err(|e| Self::error(line, e.to_string()))?;
                d
            }
            None if need_scenario => return Err(ConfigError::general("missing 'd' (file key or --d)")),
            None => 2,
        };
        let frame_length_s = self.real("frame_length_s", DEFAULT_FRAME_LENGTH_S, |x| x > 0.0, "must be positive")?;
        let non_negative = "must be non-negative";
        let pair_rate_hz = self.real("pair_rate_hz", 0.1 / frame_length_s, |x| x >= 0.0, non_negative)?;
        let dark_rate_hz = self.real("dark_rate_hz", 100.0, |x| x >= 0.0, non_negative)?;
        let solar_rate_hz = self.real("solar_rate_hz", 0.0, |x| x >= 0.0, non_negative)?;
        let loss = match (self.get("loss_db"), self.get("loss_prob")) {
            (Some((l1, _)), Some((l2, _))) => {
                let line = l1.max(l2);
                return Err(Self::error(line, "'loss_db' and 'loss_prob' are mutually exclusive".into()));
            }
            (Some(_), None) => Loss::Db(self.real("loss_db", 0.0, |x| x >= 0.0, non_negative)?),
            (None, Some(_)) => {
                Loss::Probability(self.real("loss_prob", 0.0, |x| (0.0..1.0).contains(&x), "must lie in [0, 1)")?)
            }
            (None, None) => Loss::Db(25.2),
        };
        let eta_d = self.real("eta_d", 0.9, |x| (0.0..=1.0).contains(&x), "must lie in [0, 1]")?;
        let quadrature_m = match self.number::<usize>("quadrature_m")? {
            Some((line, 0)) => return Err(Self::error(line, "'quadrature_m' must be at least 1".into())),
            Some((_, m)) => m,
            None => 10,
        };
        let seed = self.number::<u64>("seed")?.map_or(0, |(_, s)| s);
        let backend = match self.get("solver") {
            Some((line, v)) => {
                Backend::from_tag(v).ok_or_else(|| Self::error(line, format!("unknown solver '{v}'")))?
            }
            None => Backend::Structured,
        };
        let gap_tolerance = self.real("solver_tolerance", SolverOptions::default().gap_tolerance, |x| x > 0.0, "must be positive")?;
        let mc_frames = match self.number::<u64>("mc_frames")? {
            Some((line, 0)) => return Err(Self::error(line, "'mc_frames' must be positive".into())),
            Some((_, n)) => n,
            None => 1_000_000,
        };
        let sweep = self.sweep()?;
        Ok(ScenarioConfig {
            protocol,
            d,
            frame_length_s,
            pair_rate_hz,
            dark_rate_hz,
            solar_rate_hz,
            loss,
            eta_d,
            quadrature_m,
            sweep,
            seed,
            backend,
            gap_tolerance,
            mc_frames,
        })
    }

    fn sweep(&self) -> Result<Option<SweepSpec>, ConfigError> {
        let (line, tag) = match self.get("sweep_axis") {
            Some(x) => x,
            None => {
                for key in ["sweep_start", "sweep_stop", "sweep_points", "sweep_log_scale"] {
                    if let Some((line, _)) = self.get(key) {
                        return Err(Self::error(line, format!("'{key}' given without 'sweep_axis'")));
                    }
                }
                return Ok(None);
            }
        };
        let axis = SweepAxis::from_tag(tag).map_err(|e| Self::error(line, e.to_string()))?;
        let require = |key: &str| -> Result<f64, ConfigError> {
            self.number::<f64>(key)?
                .map(|(_, x)| x)
                .ok_or_else(|| Self::error(line, format!("sweep needs '{key}'")))
        };
        let start = require("sweep_start")?;
        let stop = require("sweep_stop")?;
        let points = self.number::<usize>("sweep_points")?.map_or(5, |(_, p)| p);
        let log_scale = match self.get("sweep_log_scale") {
            Some((l, v)) => match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => true,
                "false" | "no" | "0" => false,
                _ => return Err(Self::error(l, format!("invalid boolean '{v}' for 'sweep_log_scale'"))),
            },
            None => axis == SweepAxis::SolarRate,
        };
        if points == 0 {
            return Err(Self::error(line, "sweep needs at least one point".into()));
        }
        if !(start.is_finite() && stop.is_finite() && start >= 0.0 && (points == 1 || stop > start)) {
            return Err(Self::error(line, format!("sweep range [{start}, {stop}] must be ascending and non-negative")));
        }
        if log_scale && start <= 0.0 {
            return Err(Self::error(line, "a logarithmic sweep needs a positive start".into()));
        }
        Ok(Some(SweepSpec { axis, start, stop, points, log_scale }))
    }
}
