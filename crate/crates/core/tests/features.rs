use std::collections::{BTreeSet, HashMap};
use std::path::PathBuf;

use compsense_core::corpus::{read_corpus, NliExample, Token};
use compsense_core::lexfeat::{build_vocab, build_vocab_two_pass, extract_keys, is_content_word, FeatureOptions, Vocabulary};
use compsense_core::Label;
use proptest::prelude::*;
use proptest::strategy::ValueTree;

const PTB_TAGS: [&str; 36] = [
    "CC", "CD", "DT", "EX", "FW", "IN", "JJ", "JJR", "JJS", "LS", "MD", "NN", "NNS", "NNP", "NNPS", "PDT", "POS", "PRP",
    "PRP$", "RB", "RBR", "RBS", "RP", "SYM", "TO", "UH", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "WDT", "WP", "WP$", "WRB",
];

const TAGS: [&str; 8] = ["NN", "NNS", "VBZ", "JJ", "RB", "DT", "IN", "PRP"];
const WORDS: [&str; 12] = ["dog", "Dog", "cat", "runs", "red", "the", "a", "quickly", "man", "sleeps", "park", "in"];

fn example(p: &[(&str, &str)], h: &[(&str, &str)], gold: Option<Label>) -> NliExample {
    let toks = |s: &[(&str, &str)]| s.iter().map(|(w, t)| Token::new(*w, *t)).collect::<Vec<_>>();
    NliExample {
        pair_id: "x".into(),
        premise_text: String::new(),
        hypothesis_text: String::new(),
        premise_tokens: toks(p),
        hypothesis_tokens: toks(h),
        gold,
        annotator_labels: vec![],
        genre: None,
        parse_missing: false,
    }
}

/// Key strings by brute force: every content token against every content
/// token, as a set.
fn oracle_keys(ex: &NliExample) -> BTreeSet<String> {
    let content = |t: &Token| t.pos.starts_with("NN") || t.pos.starts_with("VB") || t.pos.starts_with("JJ") || t.pos.starts_with("RB");
    let mut out = BTreeSet::new();
    for a in &ex.premise_tokens {
        if content(a) {
            out.insert(format!("P\t{}", a.surface.to_lowercase()));
            for b in &ex.hypothesis_tokens {
                if content(b) {
                    out.insert(format!("X\t{}\t{}", a.surface.to_lowercase(), b.surface.to_lowercase()));
                }
            }
        }
    }
    for b in &ex.hypothesis_tokens {
        if content(b) {
            out.insert(format!("H\t{}", b.surface.to_lowercase()));
        }
    }
    out
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn oracle_indices(vocab: &Vocabulary, ex: &NliExample) -> Vec<u32> {
    let by_key: HashMap<String, u32> = vocab.keys().iter().enumerate().map(|(i, k)| (k.to_string(), i as u32)).collect();
    let mut v: Vec<u32> = oracle_keys(ex).iter().filter_map(|k| by_key.get(k).copied()).collect();
    v.sort_unstable();
    v
}

fn sentence() -> impl Strategy<Value = Vec<(&'static str, &'static str)>> {
    prop::collection::vec((prop::sample::select(&WORDS[..]), prop::sample::select(&TAGS[..])), 0..7)
}

fn pair() -> impl Strategy<Value = NliExample> {
    (sentence(), sentence(), prop::option::weighted(0.9, 0..3usize))
        .prop_map(|(p, h, g)| example(&p, &h, g.map(|i| Label::ALL[i])))
}

fn fixture_dev() -> Vec<NliExample> {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/fixtures/dev.jsonl");
    read_corpus(p).unwrap()
}

#[test]
fn content_tags_are_exactly_sixteen() {
    let accepted: BTreeSet<&str> = PTB_TAGS.iter().copied().filter(|t| is_content_word(t)).collect();
    let expected: BTreeSet<&str> = [
        "NN", "NNS", "NNP", "NNPS", "VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "JJ", "JJR", "JJS", "RB", "RBR", "RBS",
    ]
    .into_iter()
    .collect();
    assert_eq!(accepted, expected);
}

#[test]
fn dogs_run_cats_sleep_has_eight_keys() {
    let ex = example(&[("dogs", "NNS"), ("run", "VBP")], &[("cats", "NNS"), ("sleep", "VBP")], None);
    assert_eq!(extract_keys(&ex, FeatureOptions::default()).len(), 8);
    let none = example(&[("the", "DT"), ("a", "DT")], &[("an", "DT"), ("of", "IN")], None);
    assert!(extract_keys(&none, FeatureOptions::default()).is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn distinct_words_give_m_plus_n_plus_mn(m in 0usize..6, n in 0usize..6) {
        let p: Vec<(String, &str)> = (0..m).map(|i| (format!("p{i}"), "NN")).collect();
        let h: Vec<(String, &str)> = (0..n).map(|i| (format!("h{i}"), "VBZ")).collect();
        let p: Vec<(&str, &str)> = p.iter().map(|(w, t)| (w.as_str(), *t)).collect();
        let h: Vec<(&str, &str)> = h.iter().map(|(w, t)| (w.as_str(), *t)).collect();
        let ex = example(&p, &h, None);
        let keys = extract_keys(&ex, FeatureOptions::default());
        prop_assert_eq!(keys.len(), m + n + m * n);
        let got: BTreeSet<String> = keys.iter().map(|k| k.to_string()).collect();
        prop_assert_eq!(got, oracle_keys(&ex));
    }

    #[test]
    fn keys_ignore_word_order(ex in pair(), seed in any::<u64>()) {
        let mut shuffled = ex.clone();
        let mut r = seed;
        for toks in [&mut shuffled.premise_tokens, &mut shuffled.hypothesis_tokens] {
            for i in (1..toks.len()).rev() {
                r = r.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                toks.swap(i, (r >> 33) as usize % (i + 1));
            }
        }
        prop_assert_eq!(extract_keys(&ex, FeatureOptions::default()), extract_keys(&shuffled, FeatureOptions::default()));
    }

    #[test]
    fn swapping_sides_mirrors_keys(ex in pair()) {
        let mut sw = ex.clone();
        std::mem::swap(&mut sw.premise_tokens, &mut sw.hypothesis_tokens);
        let mirrored: BTreeSet<String> = oracle_keys(&ex)
            .iter()
            .map(|k| {
                let parts: Vec<&str> = k.split('\t').collect();
                match parts.as_slice() {
                    ["P", w] => format!("H\t{w}"),
                    ["H", w] => format!("P\t{w}"),
                    ["X", a, b] => format!("X\t{b}\t{a}"),
                    _ => unreachable!(),
                }
            })
            .collect();
        let got: BTreeSet<String> = extract_keys(&sw, FeatureOptions::default()).iter().map(|k| k.to_string()).collect();
        prop_assert_eq!(&got, &mirrored);
        let same_words = oracle_keys(&ex).iter().filter(|k| k.starts_with('P')).map(|k| &k[2..]).collect::<BTreeSet<_>>()
            == oracle_keys(&ex).iter().filter(|k| k.starts_with('H')).map(|k| &k[2..]).collect::<BTreeSet<_>>();
        if !same_words {
            prop_assert_ne!(got, oracle_keys(&ex));
        }
    }

    #[test]
    fn two_pass_equals_single_pass(corpus in prop::collection::vec(pair(), 1..30), min_count in 1u32..4) {
        prop_assume!(corpus.iter().any(|e| e.gold.is_some()));
        let opts = FeatureOptions::default();
        let a = build_vocab(corpus.iter().cloned().map(Ok), min_count, opts).unwrap();
        let b = build_vocab_two_pass(|| Ok(corpus.iter().cloned().map(Ok)), min_count, opts).unwrap();
        prop_assert_eq!(a.keys(), b.keys());
        prop_assert_eq!(a.fingerprint(), b.fingerprint());
    }

    #[test]
    fn stored_keys_pass_min_count(corpus in prop::collection::vec(pair(), 1..30), min_count in 1u32..4) {
        prop_assume!(corpus.iter().any(|e| e.gold.is_some()));
        let vocab = build_vocab(corpus.iter().cloned().map(Ok), min_count, FeatureOptions::default()).unwrap();
        let mut counts: HashMap<String, u32> = HashMap::new();
        for ex in corpus.iter().filter(|e| e.gold.is_some()) {
            for k in oracle_keys(ex) {
                *counts.entry(k).or_default() += 1;
            }
        }
        let stored: BTreeSet<String> = vocab.keys().iter().map(|k| k.to_string()).collect();
        let expected: BTreeSet<String> = counts.into_iter().filter(|(_, c)| *c >= min_count).map(|(k, _)| k).collect();
        prop_assert_eq!(stored, expected);
        let round = Vocabulary::from_bytes(&vocab.to_bytes()).unwrap();
        prop_assert_eq!(round.keys(), vocab.keys());
    }
}

#[test]
fn featurize_matches_oracle_on_random_pairs() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let corpus: Vec<NliExample> = (0..300)
        .map(|_| pair().new_tree(&mut runner).unwrap().current())
        .collect();
    let vocab = build_vocab(corpus.iter().cloned().map(Ok), 2, FeatureOptions::default()).unwrap();
    assert!(vocab.dim() > 0);
    for _ in 0..500 {
        let ex = pair().new_tree(&mut runner).unwrap().current();
        assert_eq!(vocab.featurize(&ex).indices(), oracle_indices(&vocab, &ex).as_slice());
    }
}

#[test]
fn hashed_featurize_matches_fnv_oracle() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let vocab = Vocabulary::hashed(10, FeatureOptions::default()).unwrap();
    for _ in 0..500 {
        let ex = pair().new_tree(&mut runner).unwrap().current();
        let mut expected: Vec<u32> = oracle_keys(&ex).iter().map(|k| (fnv1a(k.as_bytes()) & 1023) as u32).collect();
        expected.sort_unstable();
        expected.dedup();
        assert_eq!(vocab.featurize(&ex).indices(), expected.as_slice());
    }
}

#[test]
fn featurize_matches_oracle_on_fixture_corpus() {
    let dev = fixture_dev();
    assert_eq!(dev.len(), 200);
    for min_count in [1, 2] {
        let vocab = build_vocab(dev.iter().cloned().map(Ok), min_count, FeatureOptions::default()).unwrap();
        for ex in &dev {
            assert_eq!(vocab.featurize(ex).indices(), oracle_indices(&vocab, ex).as_slice(), "{}", ex.pair_id);
        }
    }
}

#[test]
fn identical_words_on_both_sides_are_a_cross_key() {
    let ex = example(&[("dog", "NN")], &[("Dog", "NN")], Some(Label::Entailment));
    let keys: Vec<String> = extract_keys(&ex, FeatureOptions::default()).iter().map(|k| k.to_string()).collect();
    assert_eq!(keys, vec!["P\tdog", "H\tdog", "X\tdog\tdog"]);
}
