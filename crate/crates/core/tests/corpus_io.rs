use std::collections::BTreeSet;
use std::path::PathBuf;

use compsense_core::conllu::read_conllu;
use compsense_core::corpus::{read_corpus, shuffle_words, Token};

fn cli_fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../cli/tests/fixtures").join(name)
}

fn sorted(toks: &[Token]) -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = toks.iter().map(|t| (t.surface.clone(), t.pos.clone())).collect();
    v.sort();
    v
}

#[test]
fn hundred_sentence_conllu_keeps_ninety_seven() {
    let (trees, rejected) = read_conllu(cli_fixture("sample100.conllu")).unwrap();
    assert_eq!(trees.len(), 97);
    assert_eq!(rejected.len(), 3);
    let ordinals: BTreeSet<usize> = rejected.iter().map(|r| r.ordinal).collect();
    assert_eq!(ordinals.len(), 3);
    assert!(ordinals.iter().all(|o| (1..=100).contains(o)));
    for t in &trees {
        assert_eq!(t.tokens.iter().filter(|x| x.head == 0).count(), 1);
        let reparsed = compsense_core::conllu::ConlluReader::new(t.to_conllu().as_bytes()).next().unwrap().unwrap();
        assert_eq!(&reparsed, t);
    }
}

#[test]
fn shuffle_keeps_tokens_and_is_deterministic() {
    let corpus = [read_corpus(cli_fixture("train.jsonl")).unwrap(), read_corpus(cli_fixture("dev.jsonl")).unwrap()].concat();
    assert_eq!(corpus.len(), 400);
    let mut moved = 0;
    for ex in &corpus {
        let s = shuffle_words(ex, 7);
        assert_eq!(s, shuffle_words(ex, 7));
        assert_eq!(sorted(&s.premise_tokens), sorted(&ex.premise_tokens));
        assert_eq!(sorted(&s.hypothesis_tokens), sorted(&ex.hypothesis_tokens));
        assert_eq!((&s.pair_id, s.gold, &s.annotator_labels), (&ex.pair_id, ex.gold, &ex.annotator_labels));
        moved += (s.premise_tokens != ex.premise_tokens) as usize;
    }
    assert!(moved > 350, "only {moved} premises changed order");
    let a: Vec<_> = corpus.iter().map(|e| shuffle_words(e, 1).premise_tokens).collect();
    let b: Vec<_> = corpus.iter().map(|e| shuffle_words(e, 2).premise_tokens).collect();
    assert_ne!(a, b);
}
