//! Reproducible training runs driven by a `key=value` manifest.
//!
//! A manifest is also a valid config file: feeding a run's `manifest.txt`
//! back to `train --config` repeats the run and rewrites identical artifacts.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::corpus::{encode, TokenStream};
use crate::error::{Error, Result};
use crate::eval::{Embeddings, Which};
use crate::fed::{self, loss_csv, LossRecord, TrainingConfig, TrainingRun, CONFIG_KEYS};
use crate::vocab::GlobalVocabulary;

pub const LOSS_FILE: &str = "loss.csv";
pub const INPUT_EMBEDDINGS_FILE: &str = "input.vec";
pub const OUTPUT_EMBEDDINGS_FILE: &str = "output.vec";
pub const MANIFEST_FILE: &str = "manifest.txt";

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainMode {
    #[default]
    Federated,
    Centralized,
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainMode::Federated => "federated",
            TrainMode::Centralized => "centralized",
        })
    }
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "federated" => Ok(TrainMode::Federated),
            "centralized" => Ok(TrainMode::Centralized),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Splits `key=value` lines, skipping blanks and `#` comments.
pub fn parse_key_values(origin: &str, text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::parse(origin, n + 1, "expected `key=value`"))?;
        out.push((k.trim().to_owned(), v.trim().to_owned()));
    }
    Ok(out)
}

/// Everything needed to repeat a training run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunManifest {
    pub mode: TrainMode,
    pub config: TrainingConfig,
    pub vocab: PathBuf,
    pub datasets: Vec<PathBuf>,
    pub out_dir: PathBuf,
}

impl RunManifest {
    /// Applies one key. `dataset` appends; every other key overwrites.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mode" => self.mode = value.parse()?,
            "vocab" => self.vocab = PathBuf::from(value),
            "dataset" => self.datasets.push(PathBuf::from(value)),
            "out" => self.out_dir = PathBuf::from(value),
            // Informational; the running binary's version is what gets recorded.
            "tool-version" => {}
            _ => self.config.set(key, value)?,
        }
        Ok(())
    }

    pub fn apply_text(&mut self, origin: &str, text: &str) -> Result<()> {
        for (k, v) in parse_key_values(origin, text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = RunManifest::default();
        m.apply_text(&path.display().to_string(), &text)?;
        Ok(m)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# fedvec run manifest\n");
        out.push_str(&format!("tool-version={TOOL_VERSION}\n"));
        out.push_str(&format!("mode={}\n", self.mode));
        out.push_str(&format!("vocab={}\n", self.vocab.display()));
        for d in &self.datasets {
            out.push_str(&format!("dataset={}\n", d.display()));
        }
        out.push_str(&format!("out={}\n", self.out_dir.display()));
        for key in CONFIG_KEYS {
            out.push_str(&format!("{key}={}\n", self.config.get(key).unwrap_or_default()));
        }
        out
    }

    /// Cheap checks that need no file contents.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.vocab.as_os_str().is_empty() {
            return Err(Error::Config("no vocabulary file given".into()));
        }
        if self.out_dir.as_os_str().is_empty() {
            return Err(Error::Config("no output directory given".into()));
        }
        if self.datasets.is_empty() {
            return Err(Error::Config("no datasets given".into()));
        }
        if self.mode == TrainMode::Federated && self.datasets.len() != self.config.nodes {
            return Err(Error::Config(format!(
                "federated mode needs one dataset per node: {} datasets, nodes={}",
                self.datasets.len(),
                self.config.nodes
            )));
        }
        for p in std::iter::once(&self.vocab).chain(&self.datasets) {
            if !p.is_file() {
                return Err(Error::Config(format!("not a readable file: {}", p.display())));
            }
        }
        Ok(())
    }

    /// Validates, loads the vocabulary and encodes every dataset. No
    /// training work happens here.
    pub fn prepare(&self) -> Result<PreparedRun> {
        self.validate()?;
        let vocab = GlobalVocabulary::load(&self.vocab)?;
        if vocab.is_empty() {
            return Err(Error::Config(format!("{}: vocabulary is empty", self.vocab.display())));
        }
        let mut manifest = self.clone();
        // The vocabulary file is authoritative for the agreement parameters.
        manifest.config.vocab_cap = vocab.cap;
        manifest.config.vocab_threshold = vocab.threshold;

        let mut datasets = Vec::with_capacity(self.datasets.len());
        for (node, path) in self.datasets.iter().enumerate() {
            let stream = TokenStream::read(path, node.to_string())?;
            let encoded = encode(&stream, &vocab);
            if encoded.len() < 2 {
                return Err(Error::Config(format!("{}: fewer than two in-vocabulary tokens", path.display())));
            }
            datasets.push(encoded);
        }
        Ok(PreparedRun { manifest, vocab, datasets })
    }
}

/// A validated run with its inputs in memory.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub manifest: RunManifest,
    pub vocab: GlobalVocabulary,
    pub datasets: Vec<Vec<usize>>,
}

impl PreparedRun {
    pub fn train(&self, on_record: impl FnMut(&LossRecord)) -> Result<TrainingRun> {
        let config = &self.manifest.config;
        match self.manifest.mode {
            TrainMode::Federated => fed::run_federated_with(&self.datasets, &self.vocab, config, on_record),
            TrainMode::Centralized => {
                let pooled: Vec<usize> = self.datasets.concat();
                fed::run_centralized_with(&pooled, &self.vocab, config, on_record)
            }
        }
    }

    /// Writes loss log, both embedding matrices and the manifest into the
    /// output directory.
    pub fn write_artifacts(&self, run: &TrainingRun) -> Result<()> {
        let out = &self.manifest.out_dir;
        std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        crate::io::write_atomic(&out.join(LOSS_FILE), loss_csv(&run.losses).as_bytes())?;
        Embeddings::from_params(&run.params, &self.vocab, Which::Input)?.save(&out.join(INPUT_EMBEDDINGS_FILE))?;
        Embeddings::from_params(&run.params, &self.vocab, Which::Output)?.save(&out.join(OUTPUT_EMBEDDINGS_FILE))?;
        crate::io::write_atomic(&out.join(MANIFEST_FILE), self.manifest.to_text().as_bytes())
    }

    pub fn execute(&self, on_record: impl FnMut(&LossRecord)) -> Result<TrainingRun> {
        let run = self.train(on_record)?;
        self.write_artifacts(&run)?;
        Ok(run)
    }
}
