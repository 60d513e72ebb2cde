//! Runtime configuration: a flat `key = value` text format with one
//! documented key per tunable default. Unknown keys are rejected so typos
//! fail loudly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crowd::TieRule;
use crate::error::{RahiError, Result};
use crate::fusion::FusedForm;
use crate::pipeline::MetricMode;

/// How users below the activity threshold are handled at ingest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActivityMode {
    /// Drop their comments entirely (default).
    Exclude,
    /// Keep them out of reliability estimation and aggregation but count
    /// them toward the per-news commenter total that sets the Beta
    /// strength.
    CountInDenominator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    // machine arm
    pub feature_dim: usize,
    pub hidden: usize,
    pub dropout_rate: f64,
    pub mc_passes: usize,
    pub machine_lr: f64,
    pub batch_size: usize,

    // crowd arm
    pub crowd_lr: f64,
    pub c_min: f64,
    pub alpha_min: f64,
    pub crowd_epsilon: f64,
    pub activity_threshold: usize,
    pub activity_mode: ActivityMode,

    // fusion
    pub fusion_hidden: usize,
    pub fusion_samples: usize,
    pub fusion_lr: f64,
    pub fusion_inner_epochs: usize,
    pub clamp_delta: f64,
    pub fused_form: FusedForm,

    // training schedule
    pub epochs: usize,
    pub patience: usize,

    // evaluation
    pub tie_rule: TieRule,
    pub metric_mode: MetricMode,

    // dataset split
    pub split_train: f64,
    pub split_valid: f64,
    pub split_test: f64,

    // synthetic corpus generator
    pub synth_users: usize,
    pub synth_news: usize,
    pub synth_comments_min: usize,
    pub synth_comments_max: usize,
    pub synth_ability_log_mean: f64,
    pub synth_ability_log_sigma: f64,
    pub synth_difficulty_mean: f64,
    pub synth_difficulty_sigma: f64,
    pub synth_q_m: f64,
    pub synth_q_c: f64,
    pub synth_complementary: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            feature_dim: 4096,
            hidden: 64,
            dropout_rate: 0.5,
            mc_passes: 50,
            machine_lr: 0.05,
            batch_size: 32,

            crowd_lr: 0.5,
            c_min: 0.01,
            alpha_min: 0.05,
            crowd_epsilon: 1e-6,
            activity_threshold: 5,
            activity_mode: ActivityMode::Exclude,

            fusion_hidden: 16,
            fusion_samples: 64,
            fusion_lr: 0.05,
            fusion_inner_epochs: 20,
            clamp_delta: 1e-4,
            fused_form: FusedForm::Gaussian,

            epochs: 30,
            patience: 8,

            tie_rule: TieRule::Fake,
            metric_mode: MetricMode::Macro,

            split_train: 0.7,
            split_valid: 0.2,
            split_test: 0.1,

            synth_users: 200,
            synth_news: 500,
            synth_comments_min: 8,
            synth_comments_max: 20,
            synth_ability_log_mean: 1.0,
            synth_ability_log_sigma: 1.0,
            synth_difficulty_mean: 0.0,
            synth_difficulty_sigma: 1.0,
            synth_q_m: 0.8,
            synth_q_c: 0.8,
            synth_complementary: false,
        }
    }
}

impl Config {
    /// Parses the flat `key = value` format. `#` starts a comment, blank
    /// lines are skipped, keys may appear at most once per file (later
    /// assignments win), unknown keys are errors.
    pub fn parse(text: &str) -> Result<Config> {
        let mut cfg = Config::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                RahiError::BadInput(format!("config line {}: expected 'key = value'", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| RahiError::BadInput(format!("config line {}: {e}", lineno + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RahiError::BadInput(format!("cannot read config {}: {e}", path.display())))?;
        Config::parse(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value.parse::<T>().map_err(|_| format!("invalid value '{value}' for key '{key}'"))
        }
        match key {
            "feature_dim" => self.feature_dim = num(key, value)?,
            "hidden" => self.hidden = num(key, value)?,
            "dropout_rate" => self.dropout_rate = num(key, value)?,
            "mc_passes" => self.mc_passes = num(key, value)?,
            "machine_lr" => self.machine_lr = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "crowd_lr" => self.crowd_lr = num(key, value)?,
            "c_min" => self.c_min = num(key, value)?,
            "alpha_min" => self.alpha_min = num(key, value)?,
            "crowd_epsilon" => self.crowd_epsilon = num(key, value)?,
            "activity_threshold" => self.activity_threshold = num(key, value)?,
            "activity_mode" => {
                self.activity_mode = match value {
                    "exclude" => ActivityMode::Exclude,
                    "count-in-denominator" => ActivityMode::CountInDenominator,
                    _ => return Err(format!("unknown activity_mode '{value}'")),
                }
            }
            "fusion_hidden" => self.fusion_hidden = num(key, value)?,
            "fusion_samples" => self.fusion_samples = num(key, value)?,
            "fusion_lr" => self.fusion_lr = num(key, value)?,
            "fusion_inner_epochs" => self.fusion_inner_epochs = num(key, value)?,
            "clamp_delta" => self.clamp_delta = num(key, value)?,
            "fused_form" => {
                self.fused_form = match value {
                    "gaussian" => FusedForm::Gaussian,
                    "uniform" => FusedForm::Uniform,
                    _ => return Err(format!("unknown fused_form '{value}'")),
                }
            }
            "epochs" => self.epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "tie_rule" => {
                self.tie_rule = match value {
                    "fake" => TieRule::Fake,
                    "true" => TieRule::True,
                    _ => return Err(format!("unknown tie_rule '{value}'")),
                }
            }
            "metric_mode" => {
                self.metric_mode = match value {
                    "macro" => MetricMode::Macro,
                    "binary" => MetricMode::BinaryFakePositive,
                    _ => return Err(format!("unknown metric_mode '{value}'")),
                }
            }
            "split_train" => self.split_train = num(key, value)?,
            "split_valid" => self.split_valid = num(key, value)?,
            "split_test" => self.split_test = num(key, value)?,
            "synth_users" => self.synth_users = num(key, value)?,
            "synth_news" => self.synth_news = num(key, value)?,
            "synth_comments_min" => self.synth_comments_min = num(key, value)?,
            "synth_comments_max" => self.synth_comments_max = num(key, value)?,
            "synth_ability_log_mean" => self.synth_ability_log_mean = num(key, value)?,
            "synth_ability_log_sigma" => self.synth_ability_log_sigma = num(key, value)?,
            "synth_difficulty_mean" => self.synth_difficulty_mean = num(key, value)?,
            "synth_difficulty_sigma" => self.synth_difficulty_sigma = num(key, value)?,
            "synth_q_m" => self.synth_q_m = num(key, value)?,
            "synth_q_c" => self.synth_q_c = num(key, value)?,
            "synth_complementary" => self.synth_complementary = num(key, value)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(RahiError::BadInput(msg));
        if !self.feature_dim.is_power_of_two() {
            return fail(format!("feature_dim must be a power of two, got {}", self.feature_dim));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return fail(format!("dropout_rate must be in [0, 1), got {}", self.dropout_rate));
        }
        if self.mc_passes == 0 || self.fusion_samples == 0 || self.batch_size == 0 {
            return fail("mc_passes, fusion_samples and batch_size must be positive".into());
        }
        if self.hidden == 0 || self.fusion_hidden == 0 {
            return fail("hidden layer sizes must be positive".into());
        }
        if !(self.crowd_epsilon > 0.0 && self.crowd_epsilon < 0.5) {
            return fail(format!("crowd_epsilon must be in (0, 0.5), got {}", self.crowd_epsilon));
        }
        if !(self.clamp_delta > 0.0 && self.clamp_delta < 0.5) {
            return fail(format!("clamp_delta must be in (0, 0.5), got {}", self.clamp_delta));
        }
        if self.c_min <= 0.0 || self.alpha_min <= 0.0 {
            return fail("c_min and alpha_min must be positive".into());
        }
        let split_sum = self.split_train + self.split_valid + self.split_test;
        if (split_sum - 1.0).abs() > 1e-9 {
            return fail(format!("split ratios must sum to 1, got {split_sum}"));
        }
        if self.split_train <= 0.0 {
            return fail("split_train must be positive".into());
        }
        if self.synth_comments_min == 0 || self.synth_comments_min > self.synth_comments_max {
            return fail("synthetic comment range must be nonempty and positive".into());
        }
        if self.synth_users == 0 || self.synth_news == 0 {
            return fail("synthetic corpus must have users and news".into());
        }
        for (name, q) in [("synth_q_m", self.synth_q_m), ("synth_q_c", self.synth_q_c)] {
            if !(0.0..=1.0).contains(&q) {
                return fail(format!("{name} must be in [0, 1], got {q}"));
            }
        }
        Ok(())
    }
}
