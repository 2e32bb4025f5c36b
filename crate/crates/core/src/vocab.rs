//! Vocabulary agreement between organizations.
//!
//! Each participant proposes its top-`cap` words occurring at least
//! `threshold` times, as a bare set of words. The coordinator merges the
//! proposals by union (default) or intersection and assigns indices by
//! ascending lexicographic order, so every participant can derive the same
//! index from the same word set without trusting an assigner.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::WordCounts;
use crate::error::{Error, Result};

const VOCAB_MAGIC: &str = "fedvec-vocab v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergeMode {
    #[default]
    Union,
    Intersection,
}

impl MergeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            MergeMode::Union => "union",
            MergeMode::Intersection => "intersection",
        }
    }
}

impl fmt::Display for MergeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MergeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "union" => Ok(MergeMode::Union),
            "intersection" => Ok(MergeMode::Intersection),
            other => Err(Error::Config(format!("unknown merge mode `{other}`"))),
        }
    }
}

/// One organization's contribution to the vocabulary agreement.
///
/// Holds only an unordered word set; no counts or ranks survive
/// construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabProposal {
    pub origin: String,
    pub cap: usize,
    pub threshold: u64,
    words: BTreeSet<String>,
}

impl VocabProposal {
    pub fn from_words<I, S>(origin: impl Into<String>, cap: usize, threshold: u64, words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let words: BTreeSet<String> = words.into_iter().map(Into::into).collect();
        if words.len() > cap {
            return Err(Error::Config(format!("proposal has {} words but the cap is {cap}", words.len())));
        }
        Ok(VocabProposal { origin: origin.into(), cap, threshold, words })
    }

    pub fn words(&self) -> &BTreeSet<String> {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Proposal file body: one word per line. Lines are sorted so the file
    /// carries no frequency order.
    pub fn to_text(&self) -> String {
        self.words.iter().flat_map(|w| [w.as_str(), "\n"]).collect()
    }

    pub fn parse(origin: &str, cap: usize, threshold: u64, text: &str) -> Result<Self> {
        let mut words = BTreeSet::new();
        for (n, line) in text.lines().enumerate() {
            let word = line.trim();
            if word.is_empty() {
                continue;
            }
            if word.contains(char::is_whitespace) {
                return Err(Error::parse(origin, n + 1, "proposal lines hold a single word"));
            }
            if !words.insert(word.to_owned()) {
                return Err(Error::parse(origin, n + 1, format!("duplicate word `{word}`")));
            }
        }
        VocabProposal::from_words(origin, cap, threshold, words)
    }

    pub fn load(path: &Path, cap: usize, threshold: u64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        VocabProposal::parse(&path.display().to_string(), cap, threshold, &text)
    }
}

/// Top-`cap` words with at least `threshold` occurrences; ties at the cap
/// boundary go to the lexicographically smaller word.
pub fn build_proposal(
    origin: impl Into<String>,
    counts: &WordCounts,
    cap: usize,
    threshold: u64,
) -> Result<VocabProposal> {
    if cap == 0 {
        return Err(Error::Config("vocabulary cap must be at least 1".into()));
    }
    if threshold == 0 {
        return Err(Error::Config("vocabulary threshold must be at least 1".into()));
    }
    let words: Vec<&str> =
        counts.ranked().into_iter().take_while(|&(_, c)| c >= threshold).take(cap).map(|(w, _)| w).collect();
    VocabProposal::from_words(origin, cap, threshold, words)
}

/// The agreed word/index mapping shared by all nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalVocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
    pub mode: MergeMode,
    pub cap: usize,
    pub threshold: u64,
}

impl GlobalVocabulary {
    /// Builds from a word set; indices follow ascending lexicographic order.
    pub fn from_words(words: BTreeSet<String>, mode: MergeMode, cap: usize, threshold: u64) -> Self {
        let words: Vec<String> = words.into_iter().collect();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        GlobalVocabulary { words, index, mode, cap, threshold }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, index: usize) -> Option<&str> {
        self.words.get(index).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{VOCAB_MAGIC} mode={} cap={} threshold={}\n", self.mode, self.cap, self.threshold);
        for (i, w) in self.words.iter().enumerate() {
            out.push_str(&format!("{i}\t{w}\n"));
        }
        out
    }

    pub fn parse(origin: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::parse(origin, 1, "empty vocabulary file"))?;
        let rest = header
            .strip_prefix(VOCAB_MAGIC)
            .ok_or_else(|| Error::parse(origin, 1, format!("expected `{VOCAB_MAGIC}` header")))?;

        let (mut mode, mut cap, mut threshold) = (None, None, None);
        for field in rest.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, 1, format!("malformed header field `{field}`")))?;
            let bad = || Error::parse(origin, 1, format!("bad value for `{key}`"));
            match key {
                "mode" => mode = Some(value.parse::<MergeMode>().map_err(|_| bad())?),
                "cap" => cap = Some(value.parse::<usize>().map_err(|_| bad())?),
                "threshold" => threshold = Some(value.parse::<u64>().map_err(|_| bad())?),
                _ => return Err(Error::parse(origin, 1, format!("unknown header field `{key}`"))),
            }
        }
        let missing = |k: &str| Error::parse(origin, 1, format!("header lacks `{k}`"));
        let mode = mode.ok_or_else(|| missing("mode"))?;
        let cap = cap.ok_or_else(|| missing("cap"))?;
        let threshold = threshold.ok_or_else(|| missing("threshold"))?;

        let mut words: Vec<String> = Vec::new();
        let mut index = HashMap::new();
        for (n, line) in lines {
            let lineno = n + 1;
            if line.is_empty() {
                continue;
            }
            let (idx, word) =
                line.split_once('\t').ok_or_else(|| Error::parse(origin, lineno, "expected `index<TAB>word`"))?;
            let idx: usize = idx.parse().map_err(|_| Error::parse(origin, lineno, format!("bad index `{idx}`")))?;
            if idx != words.len() {
                return Err(Error::parse(
                    origin,
                    lineno,
                    format!("index {idx} breaks the dense sequence (expected {})", words.len()),
                ));
            }
            if word.is_empty() || word.contains(char::is_whitespace) {
                return Err(Error::parse(origin, lineno, "invalid word"));
            }
            if index.insert(word.to_owned(), idx).is_some() {
                return Err(Error::parse(origin, lineno, format!("duplicate word `{word}`")));
            }
            if words.last().is_some_and(|prev| prev.as_str() > word) {
                return Err(Error::parse(origin, lineno, "words are not in lexicographic order"));
            }
            words.push(word.to_owned());
        }
        Ok(GlobalVocabulary { words, index, mode, cap, threshold })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        GlobalVocabulary::parse(&path.display().to_string(), &text)
    }
}

pub fn merge_proposals(proposals: &[VocabProposal], mode: MergeMode) -> Result<GlobalVocabulary> {
    let (first, rest) = proposals.split_first().ok_or(Error::NoProposals)?;
    for p in rest {
        if p.cap != first.cap {
            return Err(Error::ProposalMismatch { what: "cap", a: first.cap, b: p.cap });
        }
        if p.threshold != first.threshold {
            return Err(Error::ProposalMismatch {
                what: "threshold",
                a: first.threshold as usize,
                b: p.threshold as usize,
            });
        }
    }
    let words: BTreeSet<String> = match mode {
        MergeMode::Union => proposals.iter().flat_map(|p| p.words.iter().cloned()).collect(),
        MergeMode::Intersection => {
            first.words.iter().filter(|w| rest.iter().all(|p| p.words.contains(*w))).cloned().collect()
        }
    };
    if words.is_empty() && mode == MergeMode::Intersection {
        return Err(Error::EmptyVocabulary(mode.as_str()));
    }
    Ok(GlobalVocabulary::from_words(words, mode, first.cap, first.threshold))
}
