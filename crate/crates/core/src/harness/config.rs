//! Experiment configuration: CLI flags override `key=value` files, which
//! override built-in defaults.

use crate::sampling::parse_seed;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Raw option values keyed by long flag name with `_` for `-`.
pub type KeyValues = BTreeMap<String, String>;

pub const KNOWN_KEYS: &[&str] = &[
    "n",
    "trials",
    "seed",
    "kappa",
    "threads",
    "res",
    "bound",
    "eps",
    "grid",
    "r",
    "a",
    "b",
    "out",
    "area_samples",
    "boundary_points",
    "ns",
    "mode",
    "q1",
    "c_n",
    "no_timing",
    "dump_crit",
    "sequential",
    "roots",
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("key `{key}` given twice")]
    Duplicate { key: String },
    #[error("invalid {key} `{value}`: {reason}")]
    Invalid {
        key: String,
        value: String,
        reason: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Raster,
    Constants,
    Area,
    AreaPredict,
    Heavytail,
    Kacrice,
    Scaling,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Simulate => "simulate",
            Command::Raster => "raster",
            Command::Constants => "constants",
            Command::Area => "area",
            Command::AreaPredict => "area-predict",
            Command::Heavytail => "heavytail",
            Command::Kacrice => "kacrice",
            Command::Scaling => "scaling",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KacMode {
    EpsInt,
    OnEvent,
    T0,
}

impl std::str::FromStr for KacMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epsint" => Ok(KacMode::EpsInt),
            "on-event" => Ok(KacMode::OnEvent),
            "t0" => Ok(KacMode::T0),
            _ => Err("expected one of epsint, on-event, t0".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub n: usize,
    pub trials: u64,
    pub master_seed: u64,
    pub kappa: f64,
    /// Worker threads, 0 for the runtime default.
    pub threads: usize,
    pub resolution: usize,
    pub bound: f64,
    pub eps: f64,
    pub grid: usize,
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub out_path: Option<PathBuf>,
    pub area_samples: usize,
    /// Inradius circle resolution; `None` picks four points per root.
    pub boundary_points: Option<usize>,
    pub ns: Vec<usize>,
    pub mode: KacMode,
    pub q1: bool,
    pub c_n: f64,
    pub no_timing: bool,
    pub dump_crit: bool,
    pub sequential: bool,
    pub roots_path: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn defaults(command: Command) -> Self {
        let (n, trials, kappa) = match command {
            Command::Heavytail => (200, 100_000, 2.0),
            Command::Kacrice => (6, 1_000_000, 1.0),
            Command::Raster => (100, 1, 2.0),
            _ => (100, 1000, 2.0),
        };
        Self {
            command,
            n,
            trials,
            master_seed: 0,
            kappa,
            threads: 0,
            resolution: crate::raster::DEFAULT_RESOLUTION,
            bound: crate::raster::DEFAULT_BOUND,
            eps: 1e-3,
            grid: crate::kacrice::MIN_GRID,
            r: 0.9,
            a: 100.0,
            b: 110.0,
            out_path: None,
            area_samples: 1000,
            boundary_points: None,
            ns: vec![100, 200, 400, 800],
            mode: KacMode::OnEvent,
            q1: false,
            c_n: 0.0,
            no_timing: false,
            dump_crit: false,
            sequential: false,
            roots_path: None,
        }
    }

    pub fn execution(&self) -> crate::par::Execution {
        if self.sequential {
            crate::par::Execution::Sequential
        } else {
            crate::par::Execution::Parallel
        }
    }
}

fn normalize(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_")
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_config_text(text: &str) -> Result<KeyValues, ConfigError> {
    let mut out = KeyValues::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ConfigError::Malformed {
                line: idx + 1,
                text: raw.to_string(),
            });
        };
        let key = normalize(k);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { key });
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(ConfigError::Duplicate { key });
        }
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<KeyValues, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_text(&text)
}

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| invalid(key, value, e.to_string()))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(invalid(key, value, "expected true or false")),
    }
}

fn positive(key: &str, value: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(key, value, "must be positive and finite"))
    }
}

/// Merges the layers and validates every value.
pub fn resolve(command: Command, cli: &KeyValues, file: Option<&KeyValues>) -> Result<ExperimentConfig, ConfigError> {
    let mut merged = file.cloned().unwrap_or_default();
    for (k, v) in cli {
        let key = normalize(k);
        if !KNOWN_KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey { key });
        }
        merged.insert(key, v.clone());
    }
    let mut cfg = ExperimentConfig::defaults(command);
    for (key, value) in &merged {
        let k = key.as_str();
        let v = value.as_str();
        match k {
            "n" => {
                cfg.n = parse_num(k, v)?;
                if cfg.n == 0 {
                    return Err(invalid(k, v, "must be at least 1"));
                }
            }
            "trials" => {
                cfg.trials = parse_num(k, v)?;
                if cfg.trials == 0 {
                    return Err(invalid(k, v, "must be at least 1"));
                }
            }
            "seed" => cfg.master_seed = parse_seed(v).map_err(|e| invalid(k, v, e))?,
            "kappa" => cfg.kappa = positive(k, v, parse_num(k, v)?)?,
            "threads" => cfg.threads = parse_num(k, v)?,
            "res" => {
                cfg.resolution = parse_num(k, v)?;
                if cfg.resolution < crate::raster::MIN_RESOLUTION {
                    return Err(invalid(k, v, format!("must be at least {}", crate::raster::MIN_RESOLUTION)));
                }
            }
            "bound" => {
                cfg.bound = parse_num(k, v)?;
                if !(cfg.bound > 1.0 && cfg.bound.is_finite()) {
                    return Err(invalid(k, v, "must exceed 1"));
                }
            }
            "eps" => cfg.eps = positive(k, v, parse_num(k, v)?)?,
            "grid" => {
                cfg.grid = parse_num(k, v)?;
                if cfg.grid < crate::kacrice::MIN_GRID {
                    return Err(invalid(k, v, format!("must be at least {}", crate::kacrice::MIN_GRID)));
                }
            }
            "r" => {
                cfg.r = parse_num(k, v)?;
                if !(cfg.r > 0.0 && cfg.r < 1.0) {
                    return Err(invalid(k, v, "must lie in (0, 1)"));
                }
            }
            "a" => cfg.a = parse_num(k, v)?,
            "b" => cfg.b = parse_num(k, v)?,
            "out" => cfg.out_path = Some(PathBuf::from(v)),
            "area_samples" => {
                cfg.area_samples = parse_num(k, v)?;
                if cfg.area_samples == 0 {
                    return Err(invalid(k, v, "must be at least 1"));
                }
            }
            "boundary_points" => {
                let p: usize = parse_num(k, v)?;
                if p < crate::components::MIN_BOUNDARY_POINTS {
                    return Err(invalid(
                        k,
                        v,
                        format!("must be at least {}", crate::components::MIN_BOUNDARY_POINTS),
                    ));
                }
                cfg.boundary_points = Some(p);
            }
            "ns" => {
                cfg.ns = v
                    .split(',')
                    .map(|s| parse_num::<usize>(k, s))
                    .collect::<Result<_, _>>()?;
                if cfg.ns.contains(&0) {
                    return Err(invalid(k, v, "degrees must be at least 1"));
                }
            }
            "mode" => cfg.mode = v.parse().map_err(|e: String| invalid(k, v, e))?,
            "q1" => cfg.q1 = parse_bool(k, v)?,
            "c_n" => {
                cfg.c_n = parse_num(k, v)?;
                if !(cfg.c_n >= 0.0 && cfg.c_n.is_finite()) {
                    return Err(invalid(k, v, "must be non-negative"));
                }
            }
            "no_timing" => cfg.no_timing = parse_bool(k, v)?,
            "dump_crit" => cfg.dump_crit = parse_bool(k, v)?,
            "sequential" => cfg.sequential = parse_bool(k, v)?,
            "roots" => cfg.roots_path = Some(PathBuf::from(v)),
            _ => return Err(ConfigError::UnknownKey { key: key.clone() }),
        }
    }
    check_command(&cfg)?;
    Ok(cfg)
}

fn check_command(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    let pair = |reason: &str| invalid("a,b", &format!("{},{}", cfg.a, cfg.b), reason);
    match cfg.command {
        Command::Heavytail => {
            if cfg.a > cfg.b {
                return Err(pair("need a <= b"));
            }
            let right = cfg.r + 1.0 / (1.0 - cfg.r);
            if cfg.a < right {
                return Err(pair(&format!("a must be at least the right cut {right}")));
            }
        }
        Command::Kacrice if cfg.mode != KacMode::EpsInt && cfg.n < 3 => {
            return Err(invalid("n", &cfg.n.to_string(), "kacrice estimators need n >= 3"));
        }
        Command::Kacrice if cfg.roots_path.is_none() && cfg.n < 2 => {
            return Err(invalid("n", &cfg.n.to_string(), "need n >= 2"));
        }
        Command::AreaPredict | Command::Area if cfg.n < 2 => {
            return Err(invalid("n", &cfg.n.to_string(), "need n >= 2"));
        }
        Command::Scaling if cfg.ns.len() < 2 => {
            return Err(invalid("ns", &format!("{:?}", cfg.ns), "need at least two degrees"));
        }
        _ => {}
    }
    Ok(())
}
