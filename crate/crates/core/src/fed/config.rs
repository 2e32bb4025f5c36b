use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sgns::DEFAULT_NEGATIVE_POWER;

/// Every knob of a training run. Defaults reproduce the reference setup:
/// 10 nodes, batches of 2048 pairs, 200-dimensional embeddings, 64 noise
/// words per pair, a 200k-word cap with threshold 10, and 2M iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub nodes: usize,
    pub batch_size: usize,
    pub dim: usize,
    pub negatives: usize,
    pub vocab_cap: usize,
    pub vocab_threshold: u64,
    pub learning_rate: f64,
    pub window: usize,
    pub dynamic_window: bool,
    pub total_iterations: u64,
    pub validation_interval: u64,
    pub seed: u64,
    pub heldout_fraction: f64,
    pub negative_power: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            nodes: 10,
            batch_size: 2048,
            dim: 200,
            negatives: 64,
            vocab_cap: 200_000,
            vocab_threshold: 10,
            learning_rate: 0.025,
            window: 5,
            dynamic_window: true,
            total_iterations: 2_000_000,
            validation_interval: 1000,
            seed: 1,
            heldout_fraction: 0.01,
            negative_power: DEFAULT_NEGATIVE_POWER,
        }
    }
}

/// Config keys, in the order they are written.
pub const CONFIG_KEYS: &[&str] = &[
    "nodes",
    "batch",
    "dim",
    "neg",
    "vocab-cap",
    "vocab-threshold",
    "lr",
    "window",
    "dynamic-window",
    "iters",
    "val-interval",
    "seed",
    "heldout-fraction",
    "neg-power",
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("`{key}` has invalid value `{value}`")))
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("nodes", self.nodes as u64),
            ("batch", self.batch_size as u64),
            ("dim", self.dim as u64),
            ("neg", self.negatives as u64),
            ("vocab-cap", self.vocab_cap as u64),
            ("vocab-threshold", self.vocab_threshold),
            ("window", self.window as u64),
            ("iters", self.total_iterations),
            ("val-interval", self.validation_interval),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("`{key}` must be positive")));
            }
        }
        // lr = 0 is allowed: it freezes parameters, useful as a control run.
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config("`lr` must be a finite non-negative number".into()));
        }
        if !(self.heldout_fraction > 0.0 && self.heldout_fraction < 1.0) {
            return Err(Error::Config("`heldout-fraction` must lie strictly between 0 and 1".into()));
        }
        if !self.negative_power.is_finite() || self.negative_power <= 0.0 {
            return Err(Error::Config("`neg-power` must be positive".into()));
        }
        Ok(())
    }

    /// Sets one field by its config key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "nodes" => self.nodes = parse_num(key, value)?,
            "batch" => self.batch_size = parse_num(key, value)?,
            "dim" => self.dim = parse_num(key, value)?,
            "neg" => self.negatives = parse_num(key, value)?,
            "vocab-cap" => self.vocab_cap = parse_num(key, value)?,
            "vocab-threshold" => self.vocab_threshold = parse_num(key, value)?,
            "lr" => self.learning_rate = parse_num(key, value)?,
            "window" => self.window = parse_num(key, value)?,
            "dynamic-window" => self.dynamic_window = parse_num(key, value)?,
            "iters" => self.total_iterations = parse_num(key, value)?,
            "val-interval" => self.validation_interval = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "heldout-fraction" => self.heldout_fraction = parse_num(key, value)?,
            "neg-power" => self.negative_power = parse_num(key, value)?,
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "nodes" => self.nodes.to_string(),
            "batch" => self.batch_size.to_string(),
            "dim" => self.dim.to_string(),
            "neg" => self.negatives.to_string(),
            "vocab-cap" => self.vocab_cap.to_string(),
            "vocab-threshold" => self.vocab_threshold.to_string(),
            "lr" => self.learning_rate.to_string(),
            "window" => self.window.to_string(),
            "dynamic-window" => self.dynamic_window.to_string(),
            "iters" => self.total_iterations.to_string(),
            "val-interval" => self.validation_interval.to_string(),
            "seed" => self.seed.to_string(),
            "heldout-fraction" => self.heldout_fraction.to_string(),
            "neg-power" => self.negative_power.to_string(),
            _ => return None,
        })
    }

    /// `key=value` lines for every field.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(out, "{key}={}", self.get(key).unwrap_or_default());
        }
        out
    }
}
