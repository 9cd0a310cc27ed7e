use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffusion::{GuidanceConfig, NoiseSchedule, BETA_END, BETA_START, DEFAULT_P_NULL, DEFAULT_STEPS};
use crate::error::{Error, Result};
use crate::numerics::{DEFAULT_HIDDEN, DEFAULT_LEARNING_RATE};
use crate::spectral::{WaveletFilterPair, WaveletKind, DEFAULT_BAND_WIDTH};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    Full,
    LowFreqOnly,
    HighFreqOnly,
    NoneFreq,
    BaselineTimeDomain,
}

impl AblationMode {
    pub const ALL: [AblationMode; 5] = [
        AblationMode::Full,
        AblationMode::LowFreqOnly,
        AblationMode::HighFreqOnly,
        AblationMode::NoneFreq,
        AblationMode::BaselineTimeDomain,
    ];

    /// Whether the LFD sees its pooled condition.
    pub fn uses_low_condition(self) -> bool {
        matches!(self, AblationMode::Full | AblationMode::LowFreqOnly)
    }

    /// Whether the HFD sees its pooled condition.
    pub fn uses_high_condition(self) -> bool {
        matches!(self, AblationMode::Full | AblationMode::HighFreqOnly)
    }

    pub fn is_baseline(self) -> bool {
        self == AblationMode::BaselineTimeDomain
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AblationMode::Full => "full",
            AblationMode::LowFreqOnly => "low_freq_only",
            AblationMode::HighFreqOnly => "high_freq_only",
            AblationMode::NoneFreq => "none_freq",
            AblationMode::BaselineTimeDomain => "baseline_time_domain",
        })
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationMode::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation mode `{s}`")))
    }
}

/// What the conditioner sees while training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionSource {
    /// The clean pair of the window being diffused.
    #[default]
    Clean,
    /// The `history` states ending at the window's first state, padded
    /// with the episode's first state, as the planner sees at inference.
    History,
}

impl fmt::Display for ConditionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionSource::Clean => "clean",
            ConditionSource::History => "history",
        })
    }
}

impl FromStr for ConditionSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clean" => Ok(ConditionSource::Clean),
            "history" => Ok(ConditionSource::History),
            other => Err(Error::Config(format!("unknown condition source `{other}`"))),
        }
    }
}

/// Every knob of a training run. Keys in config files use the field names.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub horizon: usize,
    pub history: usize,
    pub diffusion_steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Minibatches drawn per epoch.
    pub batches_per_epoch: usize,
    pub p_null: f64,
    pub omega: f64,
    pub temp: f64,
    pub literal_update: bool,
    pub clamp: bool,
    pub mode: AblationMode,
    pub wavelet: WaveletKind,
    pub seed: u64,
    pub d_model: usize,
    pub cffc_hidden: usize,
    pub channels: usize,
    pub blocks: usize,
    pub time_dim: usize,
    pub band_width: usize,
    pub condition_source: ConditionSource,
    pub inverse_hidden: usize,
    pub inverse_epochs: usize,
    pub inverse_batch_size: usize,
    pub inverse_learning_rate: f64,
    /// Train a time-domain baseline alongside to log its loss spectrum.
    pub log_baseline: bool,
    pub eval_episodes: usize,
    pub eval_max_steps: usize,
    pub eval_seeds: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let g = GuidanceConfig::default();
        Self {
            horizon: 96,
            history: 96,
            diffusion_steps: DEFAULT_STEPS,
            beta_start: BETA_START,
            beta_end: BETA_END,
            learning_rate: DEFAULT_LEARNING_RATE,
            epochs: 200,
            batch_size: 32,
            batches_per_epoch: 2,
            p_null: DEFAULT_P_NULL,
            omega: g.omega,
            temp: g.temp,
            literal_update: g.literal_update,
            clamp: true,
            mode: AblationMode::Full,
            wavelet: WaveletKind::Haar,
            seed: 0,
            d_model: 64,
            cffc_hidden: DEFAULT_HIDDEN,
            channels: 64,
            blocks: 4,
            time_dim: 32,
            band_width: DEFAULT_BAND_WIDTH,
            condition_source: ConditionSource::Clean,
            inverse_hidden: DEFAULT_HIDDEN,
            inverse_epochs: 200,
            inverse_batch_size: 256,
            inverse_learning_rate: 1e-3,
            log_baseline: true,
            eval_episodes: 20,
            eval_max_steps: 64,
            eval_seeds: 5,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

impl TrainConfig {
    pub fn guidance(&self) -> GuidanceConfig {
        GuidanceConfig {
            omega: self.omega,
            temp: self.temp,
            literal_update: self.literal_update,
        }
    }

    pub fn schedule(&self) -> Result<NoiseSchedule> {
        NoiseSchedule::linear(self.diffusion_steps, self.beta_start, self.beta_end)
    }

    pub fn filter(&self) -> WaveletFilterPair {
        WaveletFilterPair::new(self.wavelet)
    }

    /// Length of one loss-spectrum sequence for the configured mode.
    fn residual_len(&self) -> usize {
        self.horizon
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.horizon < 4 || self.horizon % 2 != 0 {
            return bad(format!("horizon must be even and >= 4, got {}", self.horizon));
        }
        if self.history < 2 || self.history % 2 != 0 {
            return bad(format!("history must be even and >= 2, got {}", self.history));
        }
        let min_len = self.filter().min_len();
        if !self.mode.is_baseline() && (self.horizon < min_len || self.history < min_len) {
            return bad(format!("{} needs sequences of at least {min_len}", self.wavelet));
        }
        if self.diffusion_steps == 0 {
            return bad("diffusion_steps must be positive".into());
        }
        if !(self.beta_start <= self.beta_end) {
            return bad(format!(
                "beta_start {} exceeds beta_end {}",
                self.beta_start, self.beta_end
            ));
        }
        self.schedule()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 || self.batches_per_epoch == 0 {
            return bad("batch_size and batches_per_epoch must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.p_null) {
            return bad(format!("p_null must lie in [0, 1], got {}", self.p_null));
        }
        self.guidance().validate()?;
        for (name, v) in [
            ("d_model", self.d_model),
            ("cffc_hidden", self.cffc_hidden),
            ("channels", self.channels),
            ("blocks", self.blocks),
            ("inverse_hidden", self.inverse_hidden),
            ("inverse_batch_size", self.inverse_batch_size),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.time_dim < 2 || self.time_dim % 2 != 0 {
            return bad(format!("time_dim must be even and >= 2, got {}", self.time_dim));
        }
        let bins = self.residual_len() / 2 + 1;
        if self.band_width == 0 || 2 * self.band_width > bins {
            return bad(format!(
                "band_width {} does not fit the {bins} one-sided bins of horizon {}",
                self.band_width, self.horizon
            ));
        }
        if !(self.inverse_learning_rate > 0.0) {
            return bad("inverse_learning_rate must be positive".into());
        }
        if self.eval_seeds < 2 {
            return bad(format!("eval_seeds must be >= 2, got {}", self.eval_seeds));
        }
        Ok(())
    }

    /// Assigns one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "horizon" => self.horizon = parse_value(key, value)?,
            "history" => self.history = parse_value(key, value)?,
            "diffusion_steps" => self.diffusion_steps = parse_value(key, value)?,
            "beta_start" => self.beta_start = parse_value(key, value)?,
            "beta_end" => self.beta_end = parse_value(key, value)?,
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "batches_per_epoch" => self.batches_per_epoch = parse_value(key, value)?,
            "p_null" => self.p_null = parse_value(key, value)?,
            "omega" => self.omega = parse_value(key, value)?,
            "temp" => self.temp = parse_value(key, value)?,
            "literal_update" => self.literal_update = parse_value(key, value)?,
            "clamp" => self.clamp = parse_value(key, value)?,
            "mode" => self.mode = value.parse()?,
            "wavelet" => self.wavelet = value.parse()?,
            "seed" => self.seed = parse_value(key, value)?,
            "d_model" => self.d_model = parse_value(key, value)?,
            "cffc_hidden" => self.cffc_hidden = parse_value(key, value)?,
            "channels" => self.channels = parse_value(key, value)?,
            "blocks" => self.blocks = parse_value(key, value)?,
            "time_dim" => self.time_dim = parse_value(key, value)?,
            "band_width" => self.band_width = parse_value(key, value)?,
            "condition_source" => self.condition_source = value.parse()?,
            "inverse_hidden" => self.inverse_hidden = parse_value(key, value)?,
            "inverse_epochs" => self.inverse_epochs = parse_value(key, value)?,
            "inverse_batch_size" => self.inverse_batch_size = parse_value(key, value)?,
            "inverse_learning_rate" => self.inverse_learning_rate = parse_value(key, value)?,
            "log_baseline" => self.log_baseline = parse_value(key, value)?,
            "eval_episodes" => self.eval_episodes = parse_value(key, value)?,
            "eval_max_steps" => self.eval_max_steps = parse_value(key, value)?,
            "eval_seeds" => self.eval_seeds = parse_value(key, value)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`. Blank lines and `#`
    /// comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| err(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Text form accepted by [`TrainConfig::from_text`].
    pub fn to_text(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let mut out = String::new();
        for (k, v) in value.as_object().expect("struct serializes to an object") {
            let v = match v {
                serde_json::Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = TrainConfig::default();
        cfg.mode = AblationMode::HighFreqOnly;
        cfg.wavelet = WaveletKind::Daubechies2;
        cfg.learning_rate = 3.5e-4;
        cfg.seed = 17;
        cfg.beta_end = 0.3;
        cfg.condition_source = ConditionSource::History;
        assert_eq!(TrainConfig::from_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn schedule_endpoints_are_checked() {
        let mut cfg = TrainConfig::default();
        cfg.beta_start = 0.5;
        cfg.beta_end = 0.1;
        assert!(cfg.validate().is_err());
        cfg.beta_start = 1e-4;
        cfg.beta_end = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = "# comment\nhorizon = 32\n\nbogus = 1\n";
        match TrainConfig::from_text(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("bogus"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation_catches_inconsistencies() {
        let with = |f: fn(&mut TrainConfig)| {
            let mut c = TrainConfig::default();
            f(&mut c);
            c.validate()
        };
        assert!(with(|c| c.horizon = 95).is_err());
        assert!(with(|c| c.horizon = 2).is_err());
        assert!(with(|c| c.history = 7).is_err());
        assert!(with(|c| c.temp = 2.0).is_err());
        assert!(with(|c| c.p_null = -0.5).is_err());
        assert!(with(|c| {
            c.horizon = 16;
            c.band_width = 10;
        })
        .is_err());
        assert!(with(|c| {
            c.horizon = 16;
            c.history = 16;
            c.band_width = 4;
        })
        .is_ok());
    }

    #[test]
    fn mode_names() {
        for m in AblationMode::ALL {
            assert_eq!(m.to_string().parse::<AblationMode>().unwrap(), m);
        }
    }
}
