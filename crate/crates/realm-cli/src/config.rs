//! Run configuration: a flat `key = value` text file with `--key value`
//! command-line overrides taking precedence. Every key has a documented
//! default; unknown keys are hard errors so experiment provenance stays
//! trustworthy.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use realm_core::adapt::{GateInput, Strategy, StrategyKind};
use realm_core::data::Corruption;

use crate::{CliError, CliResult};

/// A value that defaults to a derived quantity unless set explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AutoOr {
    Auto,
    Value(f64),
}

impl fmt::Display for AutoOr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AutoOr::Auto => f.write_str("auto"),
            AutoOr::Value(v) => write!(f, "{v}"),
        }
    }
}

impl FromStr for AutoOr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(AutoOr::Auto);
        }
        s.parse::<f64>().map(AutoOr::Value).map_err(|_| format!("expected a number or 'auto', got '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Synthetic,
    Csv,
}

/// The full experiment configuration. Defaults are listed per field; `auto`
/// keys resolve against other fields (`lambda0 = 0.4 * ln k`,
/// `lr_alpha_lambda = 2 * lr_theta`).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Master seed; all sub-streams derive from it. Default 7.
    pub seed: u64,
    /// `synthetic` or `csv`. Default synthetic.
    pub data: DataSource,
    /// Source/target CSV paths, required when `data = csv`.
    pub csv_source: String,
    pub csv_target: String,
    /// Class count. Default 3.
    pub k: usize,
    /// Input dimension; class means live in the first two dims, the rest
    /// carry only noise. Default 16.
    pub d_in: usize,
    /// Sample counts. Defaults 60 / 2000. The small source set is deliberate:
    /// it leaves the pretrained model leaning on the noise dims, which is the
    /// deficit adaptation can repair.
    pub n_source: usize,
    pub n_target: usize,
    /// Radius of the circle holding the class means. Default 4.
    pub blob_separation: f64,
    /// Corruption operator for the target stream. Default gaussian_noise.
    pub corruption: Corruption,
    /// Corruption severity 1..=5. Default 5.
    pub severity: u8,
    /// Feature width of the toy model. Default 32.
    pub d_feat: usize,
    /// Pretraining epochs / learning rate. Defaults 50 / 0.1.
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    /// Accuracy below this is reported as non-convergence. Default 0.9.
    pub accuracy_floor: f64,
    /// Freeze the shift half of the modulation at adaptation time.
    /// Default false.
    pub freeze_beta: bool,
    /// noadapt | tent | eata | realm. Default realm.
    pub strategy: StrategyKind,
    /// Model-parameter learning rate. Default 0.1.
    pub lr_theta: f64,
    /// SGD momentum on model parameters. Default 0.9.
    pub momentum: f64,
    /// Learning rate for the loss shape/scale. Default auto = 2 * lr_theta.
    pub lr_alpha_lambda: AutoOr,
    /// Initial loss shape. Default 0.15.
    pub alpha0: f64,
    /// Initial loss scale. Default auto = 0.4 * ln k.
    pub lambda0: AutoOr,
    /// Robust-loss options (realm only; the gate is mandatory for eata).
    pub use_squared: bool,
    pub use_scale_factor: bool,
    pub use_div_gate: bool,
    /// Diversity-gate EMA decay and cosine threshold. Defaults 0.9 / 0.4.
    pub ema_decay: f64,
    pub div_threshold: f64,
    /// probs | logits. Default probs.
    pub gate_input: GateInput,
    /// Output directory. Default "out".
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 7,
            data: DataSource::Synthetic,
            csv_source: String::new(),
            csv_target: String::new(),
            k: 3,
            d_in: 16,
            n_source: 60,
            n_target: 2000,
            blob_separation: 4.0,
            corruption: Corruption::GaussianNoise,
            severity: 5,
            d_feat: 128,
            pretrain_epochs: 50,
            pretrain_lr: 0.1,
            accuracy_floor: 0.9,
            freeze_beta: false,
            strategy: StrategyKind::Realm,
            lr_theta: 0.1,
            momentum: 0.9,
            lr_alpha_lambda: AutoOr::Auto,
            alpha0: 0.15,
            lambda0: AutoOr::Auto,
            use_squared: false,
            use_scale_factor: true,
            use_div_gate: true,
            ema_decay: 0.9,
            div_threshold: 0.4,
            gate_input: GateInput::Probs,
            out_dir: "out".to_string(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse::<T>()
        .map_err(|_| CliError::Config(format!("bad value '{value}' for key '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(CliError::Config(format!("bad boolean '{value}' for key '{key}'"))),
    }
}

impl RunConfig {
    /// Applies one `key = value` assignment. Unknown keys are errors.
    pub fn apply(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "data" => {
                self.data = match value {
                    "synthetic" => DataSource::Synthetic,
                    "csv" => DataSource::Csv,
                    _ => return Err(CliError::Config(format!("bad data source '{value}'"))),
                }
            }
            "csv_source" => self.csv_source = value.to_string(),
            "csv_target" => self.csv_target = value.to_string(),
            "k" => self.k = parse(key, value)?,
            "d_in" => self.d_in = parse(key, value)?,
            "n_source" => self.n_source = parse(key, value)?,
            "n_target" => self.n_target = parse(key, value)?,
            "blob_separation" => self.blob_separation = parse(key, value)?,
            "corruption" => {
                self.corruption = value
                    .parse()
                    .map_err(|e: realm_core::Error| CliError::Config(e.to_string()))?
            }
            "severity" => self.severity = parse(key, value)?,
            "d_feat" => self.d_feat = parse(key, value)?,
            "pretrain_epochs" => self.pretrain_epochs = parse(key, value)?,
            "pretrain_lr" => self.pretrain_lr = parse(key, value)?,
            "accuracy_floor" => self.accuracy_floor = parse(key, value)?,
            "freeze_beta" => self.freeze_beta = parse_bool(key, value)?,
            "strategy" => {
                self.strategy = match value.to_ascii_lowercase().as_str() {
                    "noadapt" | "no_adapt" => StrategyKind::NoAdapt,
                    "tent" => StrategyKind::Tent,
                    "eata" => StrategyKind::Eata,
                    "realm" => StrategyKind::Realm,
                    _ => return Err(CliError::Config(format!("unknown strategy '{value}'"))),
                }
            }
            "lr_theta" => self.lr_theta = parse(key, value)?,
            "momentum" => self.momentum = parse(key, value)?,
            "lr_alpha_lambda" => {
                self.lr_alpha_lambda = value.parse().map_err(CliError::Config)?
            }
            "alpha0" => self.alpha0 = parse(key, value)?,
            "lambda0" => self.lambda0 = value.parse().map_err(CliError::Config)?,
            "use_squared" => self.use_squared = parse_bool(key, value)?,
            "use_scale_factor" => self.use_scale_factor = parse_bool(key, value)?,
            "use_div_gate" => self.use_div_gate = parse_bool(key, value)?,
            "ema_decay" => self.ema_decay = parse(key, value)?,
            "div_threshold" => self.div_threshold = parse(key, value)?,
            "gate_input" => {
                self.gate_input = match value {
                    "probs" => GateInput::Probs,
                    "logits" => GateInput::Logits,
                    _ => return Err(CliError::Config(format!("bad gate input '{value}'"))),
                }
            }
            "out_dir" => self.out_dir = value.to_string(),
            _ => return Err(CliError::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Parses a config file: `key = value` lines, `#` comments, blank lines.
    pub fn from_file_text(text: &str) -> CliResult<Self> {
        let mut config = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected 'key = value'", i + 1))
            })?;
            config.apply(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    /// Serializes every key in a fixed order; parsing the output reproduces
    /// this config exactly.
    pub fn to_file_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.raw_entries() {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    fn data_name(&self) -> &'static str {
        match self.data {
            DataSource::Synthetic => "synthetic",
            DataSource::Csv => "csv",
        }
    }

    fn gate_input_name(&self) -> &'static str {
        match self.gate_input {
            GateInput::Probs => "probs",
            GateInput::Logits => "logits",
        }
    }

    /// Raw (unresolved) key/value pairs in canonical order.
    pub fn raw_entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("seed", self.seed.to_string()),
            ("data", self.data_name().to_string()),
            ("csv_source", self.csv_source.clone()),
            ("csv_target", self.csv_target.clone()),
            ("k", self.k.to_string()),
            ("d_in", self.d_in.to_string()),
            ("n_source", self.n_source.to_string()),
            ("n_target", self.n_target.to_string()),
            ("blob_separation", self.blob_separation.to_string()),
            ("corruption", self.corruption.to_string()),
            ("severity", self.severity.to_string()),
            ("d_feat", self.d_feat.to_string()),
            ("pretrain_epochs", self.pretrain_epochs.to_string()),
            ("pretrain_lr", self.pretrain_lr.to_string()),
            ("accuracy_floor", self.accuracy_floor.to_string()),
            ("freeze_beta", self.freeze_beta.to_string()),
            ("strategy", self.strategy.name().to_string()),
            ("lr_theta", self.lr_theta.to_string()),
            ("momentum", self.momentum.to_string()),
            ("lr_alpha_lambda", self.lr_alpha_lambda.to_string()),
            ("alpha0", self.alpha0.to_string()),
            ("lambda0", self.lambda0.to_string()),
            ("use_squared", self.use_squared.to_string()),
            ("use_scale_factor", self.use_scale_factor.to_string()),
            ("use_div_gate", self.use_div_gate.to_string()),
            ("ema_decay", self.ema_decay.to_string()),
            ("div_threshold", self.div_threshold.to_string()),
            ("gate_input", self.gate_input_name().to_string()),
            ("out_dir", self.out_dir.clone()),
        ]
    }

    /// Resolved config for the run manifest (auto keys replaced by their
    /// derived numeric values).
    pub fn resolved_map(&self) -> BTreeMap<String, String> {
        let mut map: BTreeMap<String, String> =
            self.raw_entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        map.insert("lambda0".to_string(), self.resolved_lambda0().to_string());
        map.insert(
            "lr_alpha_lambda".to_string(),
            self.resolved_lr_alpha_lambda().to_string(),
        );
        map
    }

    /// `lambda0`, defaulting to `0.4 * ln k`.
    pub fn resolved_lambda0(&self) -> f64 {
        match self.lambda0 {
            AutoOr::Value(v) => v,
            AutoOr::Auto => 0.4 * (self.k as f64).ln(),
        }
    }

    /// `lr_alpha_lambda`, defaulting to twice the model learning rate.
    pub fn resolved_lr_alpha_lambda(&self) -> f64 {
        match self.lr_alpha_lambda {
            AutoOr::Value(v) => v,
            AutoOr::Auto => 2.0 * self.lr_theta,
        }
    }

    /// Builds the strategy, rejecting option/strategy conflicts.
    pub fn build_strategy(&self) -> CliResult<Strategy> {
        if self.use_squared && self.strategy != StrategyKind::Realm {
            return Err(CliError::Config(
                "use_squared is only meaningful for strategy = realm".to_string(),
            ));
        }
        if !self.use_div_gate && self.strategy == StrategyKind::Eata {
            return Err(CliError::Config(
                "the diversity gate is mandatory for strategy = eata".to_string(),
            ));
        }
        let strategy = match self.strategy {
            StrategyKind::NoAdapt => Strategy::no_adapt(),
            StrategyKind::Tent => Strategy::tent(),
            StrategyKind::Eata => Strategy::eata(),
            StrategyKind::Realm => Strategy::realm()
                .with_squared(self.use_squared)
                .with_scale_factor(self.use_scale_factor)
                .with_div_gate(self.use_div_gate),
        };
        strategy.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(strategy)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.data == DataSource::Csv && (self.csv_source.is_empty() || self.csv_target.is_empty())
        {
            return Err(CliError::Config(
                "data = csv requires csv_source and csv_target".to_string(),
            ));
        }
        if !(1..=5).contains(&self.severity) {
            return Err(CliError::Config("severity must lie in 1..=5".to_string()));
        }
        self.build_strategy()?;
        Ok(())
    }
}

/// Sweepable axes: each maps one CLI axis name onto a config key.
pub const SWEEP_AXES: [(&str, &str); 7] = [
    ("lr_alpha_lambda", "lr_alpha_lambda"),
    ("severity", "severity"),
    ("n_target", "n_target"),
    ("d", "div_threshold"),
    ("alpha0", "alpha0"),
    ("lambda0", "lambda0"),
    ("strategy", "strategy"),
];

/// Resolves an axis name to the config key it sets.
pub fn sweep_key(axis: &str) -> CliResult<&'static str> {
    SWEEP_AXES
        .iter()
        .find(|(name, _)| *name == axis)
        .map(|(_, key)| *key)
        .ok_or_else(|| {
            let names: Vec<&str> = SWEEP_AXES.iter().map(|(n, _)| *n).collect();
            CliError::Config(format!(
                "unknown sweep axis '{axis}' (expected one of {})",
                names.join(", ")
            ))
        })
}
