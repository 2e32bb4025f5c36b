//! Planted-community corpora for tests and demos.
//!
//! Each community is a ring of words. A document picks one community and
//! random-walks along its ring with steps of at most `max_step`, so a word's
//! contexts are its ring neighbours and never words of another community.
//! Node `i` draws its documents from community `i % communities` with
//! probability `home_bias`, otherwise from a uniformly chosen other one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub communities: usize,
    pub words_per_community: usize,
    pub nodes: usize,
    pub tokens_per_node: usize,
    pub doc_len: usize,
    pub max_step: usize,
    pub home_bias: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            communities: 2,
            words_per_community: 25,
            nodes: 10,
            tokens_per_node: 10_000,
            doc_len: 40,
            max_step: 2,
            home_bias: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    /// Words of each community, in ring order.
    pub communities: Vec<Vec<String>>,
    /// One text per node, one document per line.
    pub shards: Vec<String>,
}

impl SyntheticCorpus {
    pub fn community_of(&self, word: &str) -> Option<usize> {
        self.communities.iter().position(|c| c.iter().any(|w| w == word))
    }
}

pub fn word_name(community: usize, index: usize) -> String {
    format!("t{community}w{index}")
}

pub fn generate(spec: &SyntheticSpec) -> SyntheticCorpus {
    assert!(spec.communities >= 1 && spec.words_per_community >= 2 && spec.doc_len >= 1);
    let communities: Vec<Vec<String>> =
        (0..spec.communities).map(|c| (0..spec.words_per_community).map(|i| word_name(c, i)).collect()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ring = spec.words_per_community as i64;
    let step = spec.max_step.max(1) as i64;

    let shards = (0..spec.nodes)
        .map(|node| {
            let home = node % spec.communities;
            let mut text = String::new();
            let mut produced = 0;
            while produced < spec.tokens_per_node {
                let community = if spec.communities == 1 || rng.random_bool(spec.home_bias) {
                    home
                } else {
                    let other = rng.random_range(0..spec.communities - 1);
                    if other >= home {
                        other + 1
                    } else {
                        other
                    }
                };
                let len = spec.doc_len.min(spec.tokens_per_node - produced);
                let mut pos = rng.random_range(0..ring);
                for t in 0..len {
                    if t > 0 {
                        text.push(' ');
                        let mut delta = rng.random_range(1..=step);
                        if rng.random_bool(0.5) {
                            delta = -delta;
                        }
                        pos = (pos + delta).rem_euclid(ring);
                    }
                    text.push_str(&communities[community][pos as usize]);
                }
                text.push('\n');
                produced += len;
            }
            text
        })
        .collect();
    SyntheticCorpus { communities, shards }
}
