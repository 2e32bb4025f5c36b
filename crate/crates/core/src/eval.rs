//! Validation loss, cosine nearest neighbours and the embedding text format.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::corpus::TrainingPair;
use crate::error::{Error, Result};
use crate::sgns::{self, ModelParams, NegativeTable, SgnsBatch};
use crate::vocab::GlobalVocabulary;

/// Held-out pairs with noise words drawn once, so losses computed at
/// different iterations are comparable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeldoutSet {
    batch: SgnsBatch,
}

impl HeldoutSet {
    pub fn new(pairs: Vec<TrainingPair>, frozen_negatives: Vec<usize>, k: usize) -> Result<Self> {
        Ok(HeldoutSet { batch: SgnsBatch::new(pairs, frozen_negatives, k)? })
    }

    /// Pairs centered on every masked position, using the full `window`
    /// (no dynamic shrink), with `k` negatives each drawn from `table`.
    pub fn from_mask<R: Rng + ?Sized>(
        indices: &[usize],
        mask: &[bool],
        window: usize,
        k: usize,
        table: &NegativeTable,
        rng: &mut R,
    ) -> Result<Self> {
        if mask.len() != indices.len() {
            return Err(Error::DimensionMismatch { expected: indices.len(), found: mask.len() });
        }
        let mut pairs = Vec::new();
        for (c, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
            let lo = c.saturating_sub(window);
            let hi = (c + window).min(indices.len() - 1);
            for j in (lo..=hi).filter(|&j| j != c) {
                pairs.push(TrainingPair::new(indices[c], indices[j]));
            }
        }
        Ok(HeldoutSet { batch: SgnsBatch::sample(pairs, k, table, rng) })
    }

    pub fn len(&self) -> usize {
        self.batch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batch.is_empty()
    }

    pub fn batch(&self) -> &SgnsBatch {
        &self.batch
    }
}

/// Picks `round(fraction · len)` center positions to hold out, at least one
/// and leaving at least one position for training.
pub fn heldout_mask<R: Rng + ?Sized>(len: usize, fraction: f64, rng: &mut R) -> Vec<bool> {
    let mut mask = vec![false; len];
    if len < 2 {
        return mask;
    }
    let m = ((fraction * len as f64).round() as usize).clamp(1, len - 1);
    for i in rand::seq::index::sample(rng, len, m) {
        mask[i] = true;
    }
    mask
}

/// Summed loss over the held-out pairs. Computes no gradient.
pub fn validation_loss(params: &ModelParams, heldout: &HeldoutSet) -> Result<f64> {
    if heldout.is_empty() {
        return Err(Error::Config("held-out set is empty".into()));
    }
    sgns::batch_loss(params, &heldout.batch)
}

/// `1 − cos(u, v)`, clamped to `[0, 2]`.
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), found: v.len() });
    }
    let uu = sgns::dot(u, u);
    let vv = sgns::dot(v, v);
    if uu == 0.0 || vv == 0.0 {
        return Err(Error::ZeroVector);
    }
    // sqrt of the product keeps d(u, u) exactly zero.
    Ok((1.0 - sgns::dot(u, v) / (uu * vv).sqrt()).clamp(0.0, 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Which {
    #[default]
    Input,
    Output,
}

impl fmt::Display for Which {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Which::Input => "input",
            Which::Output => "output",
        })
    }
}

impl FromStr for Which {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "input" => Ok(Which::Input),
            "output" => Ok(Which::Output),
            other => Err(Error::Config(format!("expected `input` or `output`, got `{other}`"))),
        }
    }
}

/// A word list with one dense row per word.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    words: Vec<String>,
    dim: usize,
    data: Vec<f64>,
}

impl Embeddings {
    pub fn new(words: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != words.len() * dim {
            return Err(Error::DimensionMismatch { expected: words.len() * dim, found: data.len() });
        }
        Ok(Embeddings { words, dim, data })
    }

    pub fn from_params(params: &ModelParams, vocab: &GlobalVocabulary, which: Which) -> Result<Self> {
        if vocab.len() != params.vocab_size() {
            return Err(Error::DimensionMismatch { expected: vocab.len(), found: params.vocab_size() });
        }
        let data = match which {
            Which::Input => params.input(),
            Which::Output => params.output(),
        };
        Embeddings::new(vocab.words().to_vec(), params.dim(), data.to_vec())
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position(&self, word: &str) -> Option<usize> {
        self.words.iter().position(|w| w == word)
    }

    /// Header `V d`, then `word v1 … vd` per row. Values are written in a
    /// shortest form that parses back to the same bits.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.words.len(), self.dim);
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(w);
            for &x in self.row(i) {
                out.push(' ');
                push_f64(&mut out, x);
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(origin: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::parse(origin, 1, "empty embedding file"))?;
        let mut fields = header.split_whitespace();
        let mut header_num = |name: &str| -> Result<usize> {
            fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::parse(origin, 1, format!("header needs `V d`, bad {name}")))
        };
        let rows = header_num("V")?;
        let dim = header_num("d")?;
        if fields.next().is_some() {
            return Err(Error::parse(origin, 1, "header has extra fields"));
        }

        // Header values are untrusted; cap the up-front allocation.
        let mut words = Vec::with_capacity(rows.min(1 << 16));
        let mut seen = HashSet::with_capacity(rows.min(1 << 16));
        let mut data = Vec::with_capacity(rows.saturating_mul(dim).min(1 << 22));
        for (n, line) in lines {
            let lineno = n + 1;
            if words.len() == rows {
                return Err(Error::parse(origin, lineno, format!("more than the {rows} rows in the header")));
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap_or_default();
            if !seen.insert(word.to_owned()) {
                return Err(Error::parse(origin, lineno, format!("duplicate word `{word}`")));
            }
            let before = data.len();
            for f in fields {
                let x: f64 = f
                    .parse()
                    .ok()
                    .filter(|x: &f64| x.is_finite())
                    .ok_or_else(|| Error::parse(origin, lineno, format!("bad number `{f}`")))?;
                data.push(x);
            }
            if data.len() - before != dim {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("expected {dim} values, found {}", data.len() - before),
                ));
            }
            words.push(word.to_owned());
        }
        if words.len() != rows {
            return Err(Error::parse(
                origin,
                text.lines().count(),
                format!("header promises {rows} rows, file has {}", words.len()),
            ));
        }
        Embeddings::new(words, dim, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Embeddings::parse(&path.display().to_string(), &text)
    }
}

fn push_f64(out: &mut String, x: f64) {
    let a = x.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        let _ = write!(out, "{x:e}");
    } else {
        let _ = write!(out, "{x}");
    }
}

/// Closest words to a query, ascending by cosine distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborResult {
    pub query: String,
    pub neighbors: Vec<(String, f64)>,
}

impl NeighborResult {
    /// `rank<TAB>word<TAB>distance` rows, rank starting at 1.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (rank, (word, dist)) in self.neighbors.iter().enumerate() {
            let _ = writeln!(out, "{}\t{word}\t{dist:.6}", rank + 1);
        }
        out
    }
}

/// The `k` words nearest to `query` by cosine distance, ties broken by
/// ascending word; the query and all-zero rows are skipped.
pub fn nearest_neighbors(emb: &Embeddings, query: &str, k: usize) -> Result<NeighborResult> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let qi = emb.position(query).ok_or_else(|| Error::OutOfVocabulary(query.to_owned()))?;
    let q = emb.row(qi);
    let mut scored = Vec::with_capacity(emb.len());
    for (i, w) in emb.words.iter().enumerate() {
        if i == qi {
            continue;
        }
        match cosine_distance(q, emb.row(i)) {
            Ok(d) => scored.push((w.as_str(), d)),
            Err(Error::ZeroVector) if emb.row(i).iter().all(|&x| x == 0.0) => continue,
            Err(e) => return Err(e),
        }
    }
    scored.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    scored.truncate(k);
    Ok(NeighborResult {
        query: query.to_owned(),
        neighbors: scored.into_iter().map(|(w, d)| (w.to_owned(), d)).collect(),
    })
}
