//! Run configuration: a flat `key = value` file with `[section]` headers,
//! overridable key by key from the command line.
//!
//! A subcommand reads the `[common]` section and then its own section
//! (`[keyrate]`, `[sweep]`, `[optimize]`, `[verify]`); section entries win
//! over common ones, and command-line flags win over both. Keys before any
//! header belong to `[common]`.
//!
//! ```text
//! [common]
//! preset = table1
//! L = 16
//!
//! [sweep]
//! L = 8,12,16,20
//! delta = 0,0.05
//! z-range = 0:120:5
//! out = rates.csv
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::channel::ChannelTemplate;
use crate::keyrate::RateScope;
use crate::optimizer::{distance_range, IntensityMode, SearchConfig};
use crate::oracle::Mutation;

pub const SECTIONS: [&str; 5] = ["common", "keyrate", "sweep", "optimize", "verify"];

pub const KEYS: [&str; 21] = [
    "preset",
    "base-dark",
    "misalignment",
    "background-error",
    "detector-eff",
    "loss-coeff",
    "corr-eff",
    "L",
    "delta",
    "z",
    "z-range",
    "fixed-intensities",
    "select-probs",
    "resolution",
    "rounds",
    "multistart",
    "seed",
    "rate-scope",
    "out",
    "patterns",
    "mutate",
];

/// Where a setting came from, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    File { path: String, line: usize },
    Flag,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{path}:{line}"),
            Origin::Flag => f.write_str("command line"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{origin}: {message}")]
    Syntax { origin: Origin, message: String },
    #[error("{origin}: key '{key}': {message}")]
    Field { origin: Origin, key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

type Entries = BTreeMap<String, (String, Origin)>;

/// Raw settings keyed by name, each with its origin.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: Entries,
}

impl Settings {
    /// Parses a config file for the given subcommand section.
    pub fn parse_file(text: &str, path: &str, section: &str) -> Result<Self, ConfigError> {
        let mut common = Entries::new();
        let mut own = Entries::new();
        let mut current = "common".to_string();
        for (idx, raw) in text.lines().enumerate() {
            let origin = Origin::File { path: path.to_string(), line: idx + 1 };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(ConfigError::Syntax { origin, message: format!("malformed section header '{line}'") });
                };
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(ConfigError::Syntax { origin, message: format!("unknown section [{name}]") });
                }
                current = name.to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { origin, message: format!("expected 'key = value', got '{line}'") });
            };
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(ConfigError::Field { origin, key: key.to_string(), message: "unknown key".into() });
            }
            let entry = (value.trim().to_string(), origin);
            if current == "common" {
                common.insert(key.to_string(), entry);
            } else if current == section {
                own.insert(key.to_string(), entry);
            }
        }
        common.extend(own);
        Ok(Settings { values: common })
    }

    pub fn set_flag(&mut self, key: &str, value: &str) {
        self.values.insert(key.to_string(), (value.to_string(), Origin::Flag));
    }

    pub fn remove(&mut self, key: &str) {
        self.values.remove(key);
    }

    pub fn get(&self, key: &str) -> Option<(&str, &Origin)> {
        self.values.get(key).map(|(v, o)| (v.as_str(), o))
    }

    fn field_err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let origin = self.values.get(key).map(|(_, o)| o.clone()).unwrap_or(Origin::Flag);
        ConfigError::Field { origin, key: key.to_string(), message: message.into() }
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, _)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| self.field_err(key, format!("invalid value '{v}'"))),
        }
    }

    fn parse_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some((v, _)) => {
                let items: Vec<&str> = v.split(',').map(str::trim).collect();
                if items.iter().any(|s| s.is_empty()) {
                    return Err(self.field_err(key, format!("empty list entry in '{v}'")));
                }
                items
                    .iter()
                    .map(|s| s.parse::<T>().map_err(|_| self.field_err(key, format!("invalid list entry '{s}'"))))
                    .collect::<Result<Vec<T>, _>>()
                    .map(Some)
            }
        }
    }

    fn parse_quad(&self, key: &str) -> Result<Option<[f64; 4]>, ConfigError> {
        match self.parse_list::<f64>(key)? {
            None => Ok(None),
            Some(v) => v
                .try_into()
                .map(Some)
                .map_err(|v: Vec<f64>| self.field_err(key, format!("expected 4 values, got {}", v.len()))),
        }
    }
}

/// Fully resolved settings for one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub channel: ChannelTemplate,
    pub train_lens: Vec<u32>,
    pub deltas: Vec<f64>,
    /// Distances in km; `None` when neither `z` nor `z-range` was given.
    pub distances: Option<Vec<f64>>,
    pub mode: IntensityMode,
    pub search: SearchConfig,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub scope: RateScope,
    pub select_probs: [f64; 4],
    pub patterns: usize,
    pub mutation: Mutation,
}

pub const DEFAULT_SEED: u64 = 20190101;

impl RunConfig {
    pub fn resolve(settings: &Settings) -> Result<Self, ConfigError> {
        let s = settings;
        let mut channel = match s.get("preset") {
            None => ChannelTemplate::STANDARD,
            Some((name, _)) => ChannelTemplate::preset(name).map_err(|e| s.field_err("preset", e.to_string()))?,
        };
        let prob_field = |key: &str, target: &mut f64| -> Result<(), ConfigError> {
            if let Some(v) = s.parse::<f64>(key)? {
                if !(0.0..=1.0).contains(&v) {
                    return Err(s.field_err(key, format!("{v} outside [0, 1]")));
                }
                *target = v;
            }
            Ok(())
        };
        prob_field("base-dark", &mut channel.base_dark)?;
        prob_field("misalignment", &mut channel.misalignment)?;
        prob_field("background-error", &mut channel.background_error)?;
        prob_field("detector-eff", &mut channel.detector_eff)?;
        if let Some(v) = s.parse::<f64>("loss-coeff")? {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(s.field_err("loss-coeff", format!("{v} must be >= 0")));
            }
            channel.loss_coeff = v;
        }
        if let Some(v) = s.parse::<f64>("corr-eff")? {
            if !(v >= 1.0 && v.is_finite()) {
                return Err(s.field_err("corr-eff", format!("{v} must be >= 1")));
            }
            channel.corr_eff = v;
        }

        let train_lens = s.parse_list::<u32>("L")?.unwrap_or_else(|| vec![16]);
        if let Some(&l) = train_lens.iter().find(|&&l| l < 2) {
            return Err(s.field_err("L", format!("train length {l} must be >= 2")));
        }
        let deltas = s.parse_list::<f64>("delta")?.unwrap_or_else(|| vec![0.05]);
        if let Some(&d) = deltas.iter().find(|d| !(**d >= 0.0 && **d < 1.0)) {
            return Err(s.field_err("delta", format!("delta {d} outside [0, 1)")));
        }

        let distances = match (s.parse_list::<f64>("z")?, s.get("z-range")) {
            (Some(_), Some(_)) => return Err(ConfigError::Invalid("give either 'z' or 'z-range', not both".into())),
            (Some(zs), None) => {
                if let Some(&z) = zs.iter().find(|z| !(**z >= 0.0 && z.is_finite())) {
                    return Err(s.field_err("z", format!("distance {z} must be >= 0")));
                }
                Some(zs)
            }
            (None, Some((range, _))) => {
                let parts: Vec<&str> = range.split(':').map(str::trim).collect();
                let nums: Vec<f64> = parts
                    .iter()
                    .map(|p| p.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| s.field_err("z-range", format!("expected start:stop:step, got '{range}'")))?;
                let [start, stop, step] = nums[..] else {
                    return Err(s.field_err("z-range", format!("expected start:stop:step, got '{range}'")));
                };
                if start < 0.0 {
                    return Err(s.field_err("z-range", "start must be >= 0"));
                }
                Some(distance_range(start, stop, step).map_err(|e| s.field_err("z-range", e.to_string()))?)
            }
            (None, None) => None,
        };

        let select_probs = s.parse_quad("select-probs")?.unwrap_or([0.25; 4]);
        if select_probs.iter().any(|p| !(*p > 0.0 && *p < 1.0)) || (select_probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(s.field_err("select-probs", "probabilities must lie in (0, 1) and sum to 1"));
        }
        let mode = match s.parse_quad("fixed-intensities")? {
            Some(x) => {
                if x.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(s.field_err("fixed-intensities", "intensities must be >= 0"));
                }
                IntensityMode::Fixed(x)
            }
            None => IntensityMode::Optimize,
        };

        let scope = match s.get("rate-scope") {
            None => RateScope::WholeBracket,
            Some((v, _)) => v.parse().map_err(|_| s.field_err("rate-scope", format!("expected eq1 or eq2, got '{v}'")))?,
        };
        let seed = s.parse::<u64>("seed")?.unwrap_or(DEFAULT_SEED);
        let mut search = SearchConfig { seed, scope, select_probs, ..SearchConfig::default() };
        if let Some(v) = s.parse::<usize>("resolution")? {
            search.resolution = v;
        }
        if let Some(v) = s.parse::<usize>("rounds")? {
            search.rounds = v;
        }
        if let Some(v) = s.parse::<usize>("multistart")? {
            search.multistart = v;
        }
        search.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let patterns = s.parse::<usize>("patterns")?.unwrap_or(100);
        let mutation = match s.get("mutate") {
            None | Some(("none", _)) => Mutation::None,
            Some(("negate-q1", _)) => Mutation::NegateQ1,
            Some((v, _)) => return Err(s.field_err("mutate", format!("expected none or negate-q1, got '{v}'"))),
        };
        let out = s.get("out").map(|(v, _)| PathBuf::from(v));

        Ok(RunConfig {
            channel,
            train_lens,
            deltas,
            distances,
            mode,
            search,
            out,
            seed,
            scope,
            select_probs,
            patterns,
            mutation,
        })
    }

    /// The single `(L, delta, z)` point of a one-point subcommand.
    pub fn single_point(&self) -> Result<(u32, f64, f64), ConfigError> {
        let one = |name: &str, n: usize| {
            if n == 1 {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("expected exactly one value for '{name}', got {n}")))
            }
        };
        one("L", self.train_lens.len())?;
        one("delta", self.deltas.len())?;
        let zs = self.distances.clone().unwrap_or_else(|| vec![30.0]);
        one("z", zs.len())?;
        Ok((self.train_lens[0], self.deltas[0], zs[0]))
    }
}
