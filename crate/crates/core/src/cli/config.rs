//! Flat `section.key = value` configuration.
//!
//! ```text
//! # comment
//! scenario.n_devices = 20
//! game.alpha = 0.02
//! run.rule = priced
//! sweep.values = 0, 0.02
//! ```
//!
//! Lists are comma separated. Every omitted key keeps its default. Unknown
//! keys, malformed values and violated invariants are errors naming the key
//! and the line it was set on.

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use crate::experiments::{GainModel, ScenarioSpec, SweepAxis, SweepSpec, DEFAULT_REPETITIONS};
use crate::game::{GameParams, PricingSign};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Text,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSettings {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            format: OutputFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareSettings {
    pub rules: Vec<String>,
    pub repetitions: usize,
}

impl Default for CompareSettings {
    fn default() -> Self {
        Self {
            rules: vec!["priced".into(), "cdpc".into()],
            repetitions: DEFAULT_REPETITIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSettings {
    pub samples: usize,
    pub seed: u64,
    pub h_step: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 1,
            h_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub scenario: ScenarioSpec,
    pub game: GameParams,
    pub rule: String,
    pub sweep: Option<SweepSettings>,
    pub compare: CompareSettings,
    pub check: CheckSettings,
    pub output: OutputSettings,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            scenario: ScenarioSpec::default(),
            game: GameParams::default(),
            rule: "priced".into(),
            sweep: None,
            compare: CompareSettings::default(),
            check: CheckSettings::default(),
            output: OutputSettings::default(),
        }
    }
}

impl Config {
    pub fn sweep_spec(&self) -> Option<SweepSpec> {
        self.sweep.as_ref().map(|s| SweepSpec {
            axis: s.axis,
            values: s.values.clone(),
            rule: self.rule.clone(),
            repetitions: s.repetitions,
            params: self.game.clone(),
        })
    }

    /// Overrides every seed in the configuration.
    pub fn set_seed(&mut self, seed: u64) {
        self.scenario.seed = seed;
        self.check.seed = seed;
    }
}

struct Value<'a> {
    key: &'a str,
    raw: &'a str,
    line: usize,
}

impl Value<'_> {
    fn err(&self, message: impl Into<String>) -> ConfigError {
        ConfigError {
            line: Some(self.line),
            key: self.key.to_string(),
            message: message.into(),
        }
    }

    fn f64(&self) -> Result<f64, ConfigError> {
        self.raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(format!("expected a finite number, got `{}`", self.raw)))
    }

    fn positive(&self) -> Result<f64, ConfigError> {
        let v = self.f64()?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.err(format!("must be > 0, got {v}")))
        }
    }

    fn non_negative(&self) -> Result<f64, ConfigError> {
        let v = self.f64()?;
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(self.err(format!("must be >= 0, got {v}")))
        }
    }

    fn usize(&self) -> Result<usize, ConfigError> {
        self.raw.parse::<usize>().map_err(|_| {
            self.err(format!(
                "expected a non-negative integer, got `{}`",
                self.raw
            ))
        })
    }

    fn at_least_one(&self) -> Result<usize, ConfigError> {
        match self.usize()? {
            0 => Err(self.err("must be at least 1")),
            v => Ok(v),
        }
    }

    fn u64(&self) -> Result<u64, ConfigError> {
        self.raw.parse::<u64>().map_err(|_| {
            self.err(format!(
                "expected a non-negative integer, got `{}`",
                self.raw
            ))
        })
    }

    fn list(&self) -> Vec<&str> {
        self.raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect()
    }

    fn f64_list(&self) -> Result<Vec<f64>, ConfigError> {
        let items = self.list();
        if items.is_empty() {
            return Err(self.err("expected a non-empty comma-separated list"));
        }
        items
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(format!("expected a finite number, got `{s}`")))
            })
            .collect()
    }

    fn name(&self) -> Result<String, ConfigError> {
        let v = self.raw.trim_matches('"');
        if v.is_empty() {
            return Err(self.err("expected a non-empty name"));
        }
        Ok(v.to_string())
    }
}

#[derive(Default)]
struct PendingSweep {
    axis: Option<SweepAxis>,
    values: Option<Vec<f64>>,
    repetitions: Option<usize>,
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut cfg = Config::default();
    let mut lines_of: HashMap<String, usize> = HashMap::new();
    let mut sweep = PendingSweep::default();
    let mut gains: Option<Vec<f64>> = None;
    let mut gain_model_explicit = false;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, raw)) = content.split_once('=') else {
            return Err(ConfigError {
                line: Some(line),
                key: content.to_string(),
                message: "expected `section.key = value`".into(),
            });
        };
        let key = key.trim();
        let v = Value {
            key,
            raw: raw.trim(),
            line,
        };
        if lines_of.insert(key.to_string(), line).is_some() {
            return Err(v.err("key set more than once"));
        }

        match key {
            "scenario.n_devices" => cfg.scenario.n_devices = v.at_least_one()?,
            "scenario.n_cellular" => cfg.scenario.n_cellular = v.usize()?,
            "scenario.cell_radius_m" => cfg.scenario.cell_radius_m = v.positive()?,
            "scenario.path_loss_exponent" => {
                let e = v.f64()?;
                if !(2.0..=6.0).contains(&e) {
                    return Err(v.err(format!("must be in [2, 6], got {e}")));
                }
                cfg.scenario.path_loss_exponent = e;
            }
            "scenario.gain_model" => {
                gain_model_explicit = match v.raw {
                    "distance_power" => false,
                    "explicit" => true,
                    other => {
                        return Err(v.err(format!(
                            "expected `distance_power` or `explicit`, got `{other}`"
                        )))
                    }
                }
            }
            "scenario.gains" => {
                let g = v.f64_list()?;
                if let Some(bad) = g.iter().find(|&&h| h <= 0.0) {
                    return Err(v.err(format!("gains must be > 0, got {bad}")));
                }
                gains = Some(g);
            }
            "scenario.noise_power" => cfg.scenario.noise_power = v.positive()?,
            "scenario.p_max" => cfg.scenario.p_max = v.positive()?,
            "scenario.processing_gain" => cfg.scenario.processing_gain = v.positive()?,
            "scenario.seed" => cfg.scenario.seed = v.u64()?,

            "game.target" => cfg.game.target = v.positive()?,
            "game.alpha" => {
                let a = v.f64()?;
                if !(0.0..1.0).contains(&a) {
                    return Err(v.err(format!("alpha must satisfy 0 <= alpha < 1, got {a}")));
                }
                cfg.game.alpha = a;
            }
            "game.price" => cfg.game.price = v.non_negative()?,
            "game.pricing_sign" => {
                cfg.game.pricing_sign = PricingSign::parse(v.raw).ok_or_else(|| {
                    v.err(format!("expected `reducing` or `literal`, got `{}`", v.raw))
                })?
            }
            "game.tol" => cfg.game.tol = v.positive()?,
            "game.max_iters" => cfg.game.max_iters = v.at_least_one()?,
            "game.initial_power" => cfg.game.initial_power = v.positive()?,

            "run.rule" => cfg.rule = v.name()?,

            "sweep.axis" => {
                sweep.axis = Some(SweepAxis::parse(v.raw).ok_or_else(|| {
                    v.err(format!(
                        "expected `alpha`, `price` or `device_count`, got `{}`",
                        v.raw
                    ))
                })?)
            }
            "sweep.values" => {
                let vals = v.f64_list()?;
                if vals.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(v.err("values must be strictly increasing"));
                }
                sweep.values = Some(vals);
            }
            "sweep.repetitions" => sweep.repetitions = Some(v.at_least_one()?),

            "compare.rules" => {
                let names: Vec<String> = v.list().into_iter().map(str::to_string).collect();
                if names.is_empty() {
                    return Err(v.err("expected at least one rule name"));
                }
                cfg.compare.rules = names;
            }
            "compare.repetitions" => cfg.compare.repetitions = v.at_least_one()?,

            "check.samples" => cfg.check.samples = v.at_least_one()?,
            "check.seed" => cfg.check.seed = v.u64()?,
            "check.h_step" => {
                let h = v.positive()?;
                if h > 1e-2 {
                    return Err(v.err(format!("must be in (0, 1e-2], got {h}")));
                }
                cfg.check.h_step = h;
            }

            "output.dir" => cfg.output.dir = PathBuf::from(v.name()?),
            "output.format" => {
                cfg.output.format = match v.raw {
                    "csv" => OutputFormat::Csv,
                    "text" => OutputFormat::Text,
                    other => return Err(v.err(format!("expected `csv` or `text`, got `{other}`"))),
                }
            }

            _ => return Err(v.err("unknown key")),
        }
    }

    let err_at = |key: &str, message: String| ConfigError {
        line: lines_of.get(key).copied(),
        key: key.to_string(),
        message,
    };

    match (gain_model_explicit, gains) {
        (true, Some(g)) => {
            if g.len() != cfg.scenario.n_devices {
                return Err(err_at(
                    "scenario.gains",
                    format!(
                        "{} gains given for {} devices",
                        g.len(),
                        cfg.scenario.n_devices
                    ),
                ));
            }
            cfg.scenario.gain_model = GainModel::Explicit(g);
        }
        (true, None) => {
            return Err(err_at(
                "scenario.gain_model",
                "explicit gain model requires scenario.gains".into(),
            ))
        }
        (false, Some(_)) => {
            return Err(err_at(
                "scenario.gains",
                "gains are only used with scenario.gain_model = explicit".into(),
            ))
        }
        (false, None) => {}
    }
    if cfg.scenario.n_cellular > cfg.scenario.n_devices {
        return Err(err_at(
            "scenario.n_cellular",
            format!(
                "n_cellular ({}) exceeds n_devices ({})",
                cfg.scenario.n_cellular, cfg.scenario.n_devices
            ),
        ));
    }
    if cfg.game.initial_power > cfg.scenario.p_max {
        return Err(err_at(
            "game.initial_power",
            format!(
                "initial power {} exceeds p_max {}",
                cfg.game.initial_power, cfg.scenario.p_max
            ),
        ));
    }

    cfg.sweep = match sweep {
        PendingSweep {
            axis: None,
            values: None,
            repetitions: None,
        } => None,
        PendingSweep {
            axis: Some(axis),
            values: Some(values),
            repetitions,
        } => {
            let settings = SweepSettings {
                axis,
                values,
                repetitions: repetitions.unwrap_or(DEFAULT_REPETITIONS),
            };
            if axis == SweepAxis::Alpha {
                if let Some(bad) = settings.values.iter().find(|a| !(0.0..1.0).contains(*a)) {
                    return Err(err_at(
                        "sweep.values",
                        format!("alpha values must be in [0, 1), got {bad}"),
                    ));
                }
            }
            if axis == SweepAxis::Price {
                if let Some(bad) = settings.values.iter().find(|&&c| c < 0.0) {
                    return Err(err_at(
                        "sweep.values",
                        format!("price values must be >= 0, got {bad}"),
                    ));
                }
            }
            if axis == SweepAxis::DeviceCount {
                if let Some(bad) = settings
                    .values
                    .iter()
                    .find(|v| !(v.fract() == 0.0 && **v >= 1.0))
                {
                    return Err(err_at(
                        "sweep.values",
                        format!("device counts must be positive integers, got {bad}"),
                    ));
                }
                if matches!(cfg.scenario.gain_model, GainModel::Explicit(_)) {
                    return Err(err_at(
                        "sweep.axis",
                        "device_count sweeps need scenario.gain_model = distance_power".into(),
                    ));
                }
            }
            Some(settings)
        }
        PendingSweep { axis: None, .. } => {
            return Err(err_at(
                "sweep.axis",
                "sweep.axis is required when any sweep key is set".into(),
            ))
        }
        PendingSweep { values: None, .. } => {
            return Err(err_at(
                "sweep.values",
                "sweep.values is required when any sweep key is set".into(),
            ))
        }
    };

    Ok(cfg)
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders a configuration that [`parse_config`] reads back to an equal value.
pub fn serialize_config(cfg: &Config) -> String {
    let s = &cfg.scenario;
    let g = &cfg.game;
    let mut out = String::new();
    let mut put = |key: &str, value: String| {
        out.push_str(key);
        out.push_str(" = ");
        out.push_str(&value);
        out.push('\n');
    };
    put("scenario.n_devices", s.n_devices.to_string());
    put("scenario.n_cellular", s.n_cellular.to_string());
    put("scenario.cell_radius_m", format!("{:?}", s.cell_radius_m));
    put(
        "scenario.path_loss_exponent",
        format!("{:?}", s.path_loss_exponent),
    );
    match &s.gain_model {
        GainModel::DistancePower => put("scenario.gain_model", "distance_power".into()),
        GainModel::Explicit(gains) => {
            put("scenario.gain_model", "explicit".into());
            put("scenario.gains", join(gains));
        }
    }
    put("scenario.noise_power", format!("{:?}", s.noise_power));
    put("scenario.p_max", format!("{:?}", s.p_max));
    put(
        "scenario.processing_gain",
        format!("{:?}", s.processing_gain),
    );
    put("scenario.seed", s.seed.to_string());

    put("game.target", format!("{:?}", g.target));
    put("game.alpha", format!("{:?}", g.alpha));
    put("game.price", format!("{:?}", g.price));
    put("game.pricing_sign", g.pricing_sign.as_str().into());
    put("game.tol", format!("{:?}", g.tol));
    put("game.max_iters", g.max_iters.to_string());
    put("game.initial_power", format!("{:?}", g.initial_power));

    put("run.rule", cfg.rule.clone());

    if let Some(sw) = &cfg.sweep {
        put("sweep.axis", sw.axis.as_str().into());
        put("sweep.values", join(&sw.values));
        put("sweep.repetitions", sw.repetitions.to_string());
    }

    put("compare.rules", cfg.compare.rules.join(", "));
    put("compare.repetitions", cfg.compare.repetitions.to_string());

    put("check.samples", cfg.check.samples.to_string());
    put("check.seed", cfg.check.seed.to_string());
    put("check.h_step", format!("{:?}", cfg.check.h_step));

    put("output.dir", cfg.output.dir.display().to_string());
    put(
        "output.format",
        match cfg.output.format {
            OutputFormat::Csv => "csv".into(),
            OutputFormat::Text => "text".into(),
        },
    );
    out
}
