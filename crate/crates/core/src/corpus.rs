//! Plain-text ingestion: tokenization, word counting, index encoding and
//! skip-gram pair extraction.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::vocab::GlobalVocabulary;

/// Lowercase word tokens from one organization's corpus, in document order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStream {
    pub source_id: String,
    pub tokens: Vec<String>,
}

impl TokenStream {
    pub fn new(source_id: impl Into<String>, tokens: Vec<String>) -> Self {
        TokenStream { source_id: source_id.into(), tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Reads a UTF-8 corpus file, one document per line.
    pub fn read(path: &Path, source_id: impl Into<String>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut stream = TokenStream::new(source_id, Vec::new());
        for line in text.lines() {
            stream.tokens.extend(tokenize(line).tokens);
        }
        Ok(stream)
    }
}

/// Splits `text` into maximal runs of alphanumeric characters after
/// lowercasing.
pub fn tokenize(text: &str) -> TokenStream {
    let lower = text.to_lowercase();
    let tokens = lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_owned).collect();
    TokenStream::new("", tokens)
}

/// Occurrence counts for one token stream. Zero counts are never stored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordCounts {
    entries: BTreeMap<String, u64>,
    total: u64,
}

impl WordCounts {
    pub fn get(&self, word: &str) -> u64 {
        self.entries.get(word).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.entries.iter().map(|(w, &c)| (w.as_str(), c))
    }

    /// Adds `count` occurrences of `word`; a zero count is a no-op.
    pub fn add(&mut self, word: &str, count: u64) {
        if count == 0 {
            return;
        }
        *self.entries.entry(word.to_owned()).or_insert(0) += count;
        self.total += count;
    }

    /// Entries ordered by descending count, then ascending word.
    pub fn ranked(&self) -> Vec<(&str, u64)> {
        let mut ranked: Vec<_> = self.iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked
    }

    /// `word<TAB>count` lines in [`ranked`](Self::ranked) order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (word, count) in self.ranked() {
            let _ = writeln!(out, "{word}\t{count}");
        }
        out
    }
}

impl<S: AsRef<str>> FromIterator<S> for WordCounts {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut counts = WordCounts::default();
        for w in iter {
            counts.add(w.as_ref(), 1);
        }
        counts
    }
}

pub fn count_words(stream: &TokenStream) -> WordCounts {
    stream.tokens.iter().collect()
}

/// Maps tokens to vocabulary indices, dropping out-of-vocabulary tokens.
pub fn encode(stream: &TokenStream, vocab: &GlobalVocabulary) -> Vec<usize> {
    stream.tokens.iter().filter_map(|t| vocab.index_of(t)).collect()
}

/// Occurrence count of every index `< vocab_size` in an encoded sequence.
pub fn index_counts(indices: &[usize], vocab_size: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; vocab_size];
    for &i in indices {
        *counts.get_mut(i).ok_or(Error::IndexOutOfRange { index: i, size: vocab_size })? += 1;
    }
    Ok(counts)
}

/// One skip-gram observation: `context` occurred within the window of `center`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TrainingPair {
    pub center: usize,
    pub context: usize,
}

impl TrainingPair {
    pub fn new(center: usize, context: usize) -> Self {
        TrainingPair { center, context }
    }
}

/// Endless skip-gram pair source over one encoded sequence.
///
/// Centers are visited in order; each center pairs with every other position
/// within its effective window. With a dynamic window the effective width is
/// drawn uniformly from `1..=window` once per center visit. After the last
/// center the stream wraps to the start and the epoch counter advances.
#[derive(Debug, Clone)]
pub struct PairStream {
    indices: Vec<usize>,
    window: usize,
    dynamic: bool,
    excluded: Vec<bool>,
    rng: ChaCha8Rng,
    center: usize,
    expanded: bool,
    ctx: usize,
    ctx_end: usize,
    epoch: u64,
    pushed_back: Option<(TrainingPair, bool)>,
    empty: bool,
}

impl PairStream {
    /// `excluded[i] == true` keeps position `i` from ever acting as a center
    /// (it may still appear as a context). An empty mask excludes nothing.
    pub fn new(
        indices: Vec<usize>,
        window: usize,
        dynamic: bool,
        excluded: Vec<bool>,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        if window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if !excluded.is_empty() && excluded.len() != indices.len() {
            return Err(Error::DimensionMismatch { expected: indices.len(), found: excluded.len() });
        }
        let has_center = excluded.is_empty() || excluded.iter().any(|&e| !e);
        let empty = indices.len() < 2 || !has_center;
        Ok(PairStream {
            indices,
            window,
            dynamic,
            excluded,
            rng,
            center: 0,
            expanded: false,
            ctx: 0,
            ctx_end: 0,
            epoch: 0,
            pushed_back: None,
            empty,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.empty
    }

    /// Completed passes over the sequence.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    fn is_center(&self, pos: usize) -> bool {
        self.excluded.get(pos).is_none_or(|&e| !e)
    }

    fn advance_center(&mut self, wrapped: &mut bool) {
        self.center += 1;
        if self.center == self.indices.len() {
            self.center = 0;
            self.epoch += 1;
            *wrapped = true;
        }
    }

    /// Next pair, and whether producing it wrapped the stream into a new epoch.
    /// Returns `None` only for an empty stream.
    pub fn next_pair(&mut self) -> Option<(TrainingPair, bool)> {
        if self.empty {
            return None;
        }
        if let Some((pair, wrapped)) = self.pushed_back.take() {
            self.epoch += wrapped as u64;
            return Some((pair, wrapped));
        }
        let mut wrapped = false;
        loop {
            if !self.expanded {
                while !self.is_center(self.center) {
                    self.advance_center(&mut wrapped);
                }
                let w = if self.dynamic { self.rng.random_range(1..=self.window) } else { self.window };
                self.ctx = self.center.saturating_sub(w);
                self.ctx_end = (self.center + w).min(self.indices.len() - 1);
                self.expanded = true;
            }
            if self.ctx > self.ctx_end {
                self.expanded = false;
                self.advance_center(&mut wrapped);
                continue;
            }
            let j = self.ctx;
            self.ctx += 1;
            if j != self.center {
                let pair = TrainingPair::new(self.indices[self.center], self.indices[j]);
                return Some((pair, wrapped));
            }
        }
    }

    /// Remaining pairs of the current pass, stopping at the epoch boundary.
    pub fn one_pass(&mut self) -> Vec<TrainingPair> {
        let mut out = Vec::new();
        while let Some((pair, wrapped)) = self.next_pair() {
            if wrapped && !out.is_empty() {
                // Not handed out yet, so its wrap does not count.
                self.epoch -= 1;
                self.pushed_back = Some((pair, wrapped));
                break;
            }
            out.push(pair);
        }
        out
    }
}

/// Skip-gram pairs over `indices` with a dynamic window of at most `window`.
pub fn generate_pairs(indices: Vec<usize>, window: usize, rng: ChaCha8Rng) -> Result<PairStream> {
    PairStream::new(indices, window, true, Vec::new(), rng)
}
