use std::collections::BTreeSet;

use fedvec::corpus::{
    count_words, encode, generate_pairs, tokenize, PairStream, TokenStream, TrainingPair, WordCounts,
};
use fedvec::vocab::{GlobalVocabulary, MergeMode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn toks(ws: &[&str]) -> TokenStream {
    TokenStream::new("t", ws.iter().map(|w| w.to_string()).collect())
}

fn vocab(ws: &[&str]) -> GlobalVocabulary {
    GlobalVocabulary::from_words(ws.iter().map(|w| w.to_string()).collect(), MergeMode::Union, 10, 1)
}

/// Every `(i, j)` with `0 < |i − j| ≤ window`, centers in order.
fn brute_force_pairs(indices: &[usize], window: usize) -> Vec<TrainingPair> {
    let mut out = Vec::new();
    for i in 0..indices.len() {
        for j in 0..indices.len() {
            if i != j && i.abs_diff(j) <= window {
                out.push(TrainingPair::new(indices[i], indices[j]));
            }
        }
    }
    out
}

fn fixed_stream(indices: Vec<usize>, window: usize) -> PairStream {
    PairStream::new(indices, window, false, Vec::new(), rng(0)).unwrap()
}

#[test]
fn tokenizer_examples() {
    assert_eq!(tokenize("The cat, the hat.").tokens, ["the", "cat", "the", "hat"]);
    assert!(tokenize("").is_empty());
    assert_eq!(tokenize("A1 b2-c3").tokens, ["a1", "b2", "c3"]);
    assert_eq!(tokenize("  Grüße\tÀ-la\n").tokens, ["grüße", "à", "la"]);
}

#[test]
fn count_examples() {
    let c = count_words(&toks(&["the", "cat", "the"]));
    assert_eq!((c.get("the"), c.get("cat"), c.total(), c.len()), (2, 1, 3, 2));
    let c = count_words(&toks(&[]));
    assert!(c.is_empty());
    assert_eq!(c.total(), 0);
    let many = TokenStream::new("t", vec!["x".to_string(); 1000]);
    assert_eq!(count_words(&many).get("x"), 1000);
}

#[test]
fn counts_tsv_order() {
    let mut c = WordCounts::default();
    c.add("b", 3);
    c.add("a", 3);
    c.add("z", 9);
    c.add("q", 0);
    assert_eq!(c.to_tsv(), "z\t9\na\t3\nb\t3\n");
}

#[test]
fn encode_examples() {
    let v = vocab(&["a", "b"]);
    assert_eq!(encode(&toks(&["a", "zz", "b"]), &v), [0, 1]);
    assert!(encode(&toks(&[]), &v).is_empty());
    assert_eq!(encode(&toks(&["b", "a", "b"]), &v), [1, 0, 1]);
}

#[test]
fn pairs_window_one() {
    let mut s = fixed_stream(vec![0, 1, 2], 1);
    let pass = s.one_pass();
    let expected: Vec<_> = [(0, 1), (1, 0), (1, 2), (2, 1)].iter().map(|&(c, o)| TrainingPair::new(c, o)).collect();
    assert_eq!(pass, expected);
    // A dynamic window of width 1 can only draw 1.
    let mut d = generate_pairs(vec![0, 1, 2], 1, rng(4)).unwrap();
    assert_eq!(d.one_pass(), expected);
}

#[test]
fn pairs_from_short_sequences_are_empty() {
    for window in [1, 3, 10] {
        let mut s = generate_pairs(vec![0], window, rng(1)).unwrap();
        assert!(s.is_empty());
        assert!(s.next_pair().is_none());
        assert!(generate_pairs(vec![], window, rng(1)).unwrap().is_empty());
    }
    assert!(generate_pairs(vec![0, 1], 0, rng(1)).is_err());
}

#[test]
fn pairs_window_two_matches_enumeration() {
    let indices = vec![0, 1, 2, 3];
    let pass = fixed_stream(indices.clone(), 2).one_pass();
    assert_eq!(pass.len(), 10);
    assert_eq!(pass, brute_force_pairs(&indices, 2));
}

#[test]
fn stream_wraps_and_counts_epochs() {
    let mut s = fixed_stream(vec![5, 6, 7], 1);
    let first = s.one_pass();
    assert_eq!(s.epoch(), 0);
    let (pair, wrapped) = s.next_pair().unwrap();
    assert!(wrapped);
    assert_eq!(s.epoch(), 1);
    assert_eq!(pair, first[0]);
    let rest: Vec<_> = (0..first.len() - 1).map(|_| s.next_pair().unwrap()).collect();
    assert!(rest.iter().all(|(_, w)| !w));
    assert_eq!(rest.iter().map(|(p, _)| *p).collect::<Vec<_>>(), first[1..]);
}

#[test]
fn excluded_centers_never_emit() {
    let indices: Vec<usize> = (0..8).collect();
    let mut mask = vec![false; 8];
    mask[0] = true;
    mask[5] = true;
    let mut s = PairStream::new(indices.clone(), 2, false, mask, rng(0)).unwrap();
    let pass = s.one_pass();
    assert!(pass.iter().all(|p| p.center != 0 && p.center != 5));
    let expected: Vec<_> =
        brute_force_pairs(&indices, 2).into_iter().filter(|p| p.center != 0 && p.center != 5).collect();
    assert_eq!(pass, expected);
    assert!(PairStream::new(vec![1, 2], 1, false, vec![true, true], rng(0)).unwrap().is_empty());
    assert!(PairStream::new(vec![1, 2], 1, false, vec![true], rng(0)).is_err());
}

proptest! {
    #[test]
    fn tokenize_is_idempotent(text in "\\PC{0,60}") {
        let once = tokenize(&text).tokens;
        let twice = tokenize(&once.join(" ")).tokens;
        prop_assert!(once.iter().all(|t| !t.is_empty() && !t.contains(char::is_whitespace)));
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn count_total_is_stream_length(words in prop::collection::vec("[a-d]{1,2}", 0..50)) {
        let stream = TokenStream::new("t", words.clone());
        let counts = count_words(&stream);
        prop_assert_eq!(counts.total(), words.len() as u64);
        prop_assert_eq!(counts.iter().map(|(_, c)| c).sum::<u64>(), counts.total());
        prop_assert!(counts.iter().all(|(_, c)| c > 0));
    }

    #[test]
    fn encode_stays_in_range(
        words in prop::collection::vec("[a-f]", 0..60),
        vocab_words in prop::collection::btree_set("[a-f]", 1..6),
    ) {
        let v = GlobalVocabulary::from_words(vocab_words.clone(), MergeMode::Union, 10, 1);
        let encoded = encode(&TokenStream::new("t", words.clone()), &v);
        prop_assert!(encoded.iter().all(|&i| i < v.len()));
        let kept = words.iter().filter(|w| vocab_words.contains(*w)).count();
        prop_assert_eq!(encoded.len(), kept);
    }

    #[test]
    fn window_one_yields_twice_len_minus_one(len in 2usize..80) {
        let indices: Vec<usize> = (0..len).collect();
        prop_assert_eq!(fixed_stream(indices, 1).one_pass().len(), 2 * (len - 1));
    }

    #[test]
    fn dynamic_pairs_are_within_window(len in 2usize..40, window in 1usize..6, seed in any::<u64>()) {
        // Distinct indices so each pair identifies its positions.
        let indices: Vec<usize> = (0..len).collect();
        let full: BTreeSet<_> = brute_force_pairs(&indices, window).into_iter().collect();
        let mut s = generate_pairs(indices, window, rng(seed)).unwrap();
        let pass = s.one_pass();
        prop_assert!(pass.iter().all(|p| full.contains(p)));
        // Every center pairs with at least its immediate neighbours.
        let centers: BTreeSet<_> = pass.iter().map(|p| p.center).collect();
        prop_assert_eq!(centers.len(), len);
    }
}
