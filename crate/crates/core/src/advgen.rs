//! Rule-based adversaries built by rewriting dependency-parsed premises.
//!
//! * **SOswap**: exchange the subject and object phrases of a premise with a
//!   subject-verb-object frame; the resulting pair is a contradiction.
//! * **AddAmod**: insert the same adjective before one noun (new premise) and
//!   before another noun (hypothesis); the resulting pair is neutral.
//!
//! Both rules leave the bag of words (nearly) unchanged, so a model that
//! ignores structure cannot tell the two sentences apart.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::conllu::{DepToken, DepTree};
use crate::corpus::{join_surface, NliExample, Token};
use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rule {
    SoSwap,
    AddAmod,
}

impl Rule {
    pub fn expected(self) -> Label {
        match self {
            Rule::SoSwap => Label::Contradiction,
            Rule::AddAmod => Label::Neutral,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::SoSwap => "soswap",
            Rule::AddAmod => "addamod",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "soswap" => Ok(Rule::SoSwap),
            "addamod" => Ok(Rule::AddAmod),
            o => Err(Error::Invalid(format!("unknown rule {o:?}"))),
        }
    }
}

/// Why a sentence produced no adversary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Reject {
    NoSvoFrame,
    PronounArgument,
    NotCommonNoun,
    SameLemma,
    NonContiguousSpan,
    FewerThanTwoNouns,
    EmptyIntersection,
    AdjectivePresent,
    MissingParse,
    Unaligned,
    TokenMismatch,
    DuplicatePremise,
    Undetermined,
}

impl Reject {
    pub fn as_str(self) -> &'static str {
        match self {
            Reject::NoSvoFrame => "no_svo_frame",
            Reject::PronounArgument => "pronoun_argument",
            Reject::NotCommonNoun => "not_common_noun",
            Reject::SameLemma => "same_lemma",
            Reject::NonContiguousSpan => "non_contiguous_span",
            Reject::FewerThanTwoNouns => "fewer_than_two_nouns",
            Reject::EmptyIntersection => "empty_intersection",
            Reject::AdjectivePresent => "adjective_already_present",
            Reject::MissingParse => "missing_parse",
            Reject::Unaligned => "no_aligned_dependency_parse",
            Reject::TokenMismatch => "token_mismatch",
            Reject::DuplicatePremise => "duplicate_premise",
            Reject::Undetermined => "undetermined_gold",
        }
    }
}

fn lemma_key(t: &DepToken) -> String {
    if t.lemma.is_empty() || t.lemma == "_" {
        t.form.to_lowercase()
    } else {
        t.lemma.to_lowercase()
    }
}

fn is_common_noun(t: &DepToken) -> bool {
    matches!(t.tag(), "NN" | "NNS" | "NOUN")
}

fn is_pronoun(t: &DepToken) -> bool {
    t.tag().starts_with("PRP") || t.tag().starts_with("WP") || t.upos == "PRON"
}

fn is_proper(t: &DepToken) -> bool {
    t.tag().starts_with("NNP") || t.upos == "PROPN"
}

/// Subject and object of one verb. Spans are inclusive 1-based ranges
/// covering the full dependency subtree of each argument head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SvoFrame {
    pub verb_index: usize,
    pub subj_index: usize,
    pub obj_index: usize,
    pub subj_span: (usize, usize),
    pub obj_span: (usize, usize),
}

fn contiguous_span(tree: &DepTree, head: usize) -> Option<(usize, usize)> {
    let sub = tree.subtree(head);
    let (lo, hi) = (sub[0], sub[sub.len() - 1]);
    (hi - lo + 1 == sub.len()).then_some((lo, hi))
}

fn check_frame(tree: &DepTree, verb: usize, subj: usize, obj: usize) -> std::result::Result<SvoFrame, Reject> {
    let (s, o) = (tree.token(subj), tree.token(obj));
    if is_pronoun(s) || is_pronoun(o) {
        return Err(Reject::PronounArgument);
    }
    if !is_common_noun(s) || !is_common_noun(o) {
        return Err(Reject::NotCommonNoun);
    }
    if lemma_key(s) == lemma_key(o) {
        return Err(Reject::SameLemma);
    }
    let subj_span = contiguous_span(tree, subj).ok_or(Reject::NonContiguousSpan)?;
    let obj_span = contiguous_span(tree, obj).ok_or(Reject::NonContiguousSpan)?;
    Ok(SvoFrame {
        verb_index: verb,
        subj_index: subj,
        obj_index: obj,
        subj_span,
        obj_span,
    })
}

/// The first verb with a usable subject/object pair, or the reason the
/// first candidate verb was rejected.
pub fn classify_svo(tree: &DepTree) -> std::result::Result<SvoFrame, Reject> {
    let mut first_reason = None;
    for v in tree.tokens.iter().filter(|t| t.tag().starts_with("VB") || t.upos == "VERB") {
        let subj = tree.children(v.index).find(|c| c.deprel == "nsubj");
        let obj = tree.children(v.index).find(|c| c.deprel == "obj");
        let (Some(s), Some(o)) = (subj, obj) else {
            continue;
        };
        match check_frame(tree, v.index, s.index, o.index) {
            Ok(f) => return Ok(f),
            Err(r) => {
                first_reason.get_or_insert(r);
            }
        }
    }
    Err(first_reason.unwrap_or(Reject::NoSvoFrame))
}

pub fn find_svo(tree: &DepTree) -> Option<SvoFrame> {
    classify_svo(tree).ok()
}

/// Structured description of a rewrite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Edit {
    /// Two inclusive 1-based premise spans exchanged.
    Swap { first: (usize, usize), second: (usize, usize) },
    /// `adjective` inserted at 1-based position `premise_at` of the new
    /// premise and `hypothesis_at` of the hypothesis.
    Insert {
        adjective: String,
        premise_at: usize,
        hypothesis_at: usize,
        premise_noun: String,
        hypothesis_noun: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialPair {
    pub source_pair_id: String,
    pub premise_tokens: Vec<Token>,
    pub hypothesis_tokens: Vec<Token>,
    pub expected: Label,
    pub rule: Rule,
    pub edits: Edit,
}

impl AdversarialPair {
    pub fn pair_id(&self) -> String {
        format!("{}-{}", self.source_pair_id, self.rule)
    }

    pub fn premise_text(&self) -> String {
        join_surface(&self.premise_tokens)
    }

    pub fn hypothesis_text(&self) -> String {
        join_surface(&self.hypothesis_tokens)
    }

    pub fn to_example(&self) -> NliExample {
        NliExample {
            pair_id: self.pair_id(),
            premise_text: self.premise_text(),
            hypothesis_text: self.hypothesis_text(),
            premise_tokens: self.premise_tokens.clone(),
            hypothesis_tokens: self.hypothesis_tokens.clone(),
            gold: Some(self.expected),
            annotator_labels: Vec::new(),
            genre: None,
            parse_missing: false,
        }
    }

    /// NLI JSONL object plus `rule`, `source_pairID` and `edits`.
    pub fn to_json(&self) -> Value {
        let mut m = self.to_example().to_json();
        m.insert("rule".into(), json!(self.rule.as_str()));
        m.insert("source_pairID".into(), json!(self.source_pair_id));
        m.insert("edits".into(), serde_json::to_value(&self.edits).expect("edits serialize"));
        Value::Object(m)
    }
}

fn tokens_of(tree: &DepTree) -> Vec<Token> {
    tree.tokens
        .iter()
        .map(|t| Token::new(t.form.clone(), t.tag().to_string()))
        .collect()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn decapitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().chain(c).collect(),
        None => String::new(),
    }
}

/// After a reordering moved `old_first` away from the sentence start,
/// capitalize the new first token and lowercase the old one unless it is a
/// proper noun or "I".
fn repair_initial_case(tree: &mut DepTree, old_first_new_pos: usize) {
    if old_first_new_pos == 1 {
        return;
    }
    let first = &mut tree.tokens[0];
    first.form = capitalize(&first.form);
    let moved = &mut tree.tokens[old_first_new_pos - 1];
    if !is_proper(moved) && moved.form != "I" {
        moved.form = decapitalize(&moved.form);
    }
}

/// Applies the subject/object exchange, returning the rewritten tree.
pub fn swap_frame(tree: &DepTree, frame: &SvoFrame) -> (DepTree, Edit) {
    let (a, b) = if frame.subj_span.0 < frame.obj_span.0 {
        (frame.subj_span, frame.obj_span)
    } else {
        (frame.obj_span, frame.subj_span)
    };
    let n = tree.len();
    let order: Vec<usize> = (1..a.0)
        .chain(b.0..=b.1)
        .chain(a.1 + 1..b.0)
        .chain(a.0..=a.1)
        .chain(b.1 + 1..=n)
        .collect();
    let mut out = tree.permuted(&order);
    let old_first_pos = order.iter().position(|&o| o == 1).unwrap() + 1;
    repair_initial_case(&mut out, old_first_pos);
    (out, Edit::Swap { first: a, second: b })
}

/// SOswap on one premise. Returns the pair and the hypothesis tree.
pub fn gen_soswap(source_pair_id: &str, tree: &DepTree) -> std::result::Result<(AdversarialPair, DepTree), Reject> {
    let frame = classify_svo(tree)?;
    let (hyp, edits) = swap_frame(tree, &frame);
    let pair = AdversarialPair {
        source_pair_id: source_pair_id.to_string(),
        premise_tokens: tokens_of(tree),
        hypothesis_tokens: tokens_of(&hyp),
        expected: Rule::SoSwap.expected(),
        rule: Rule::SoSwap,
        edits,
    };
    Ok((pair, hyp))
}

/// Noun lemma → adjective lemma → number of `amod` edges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AmodMap {
    map: BTreeMap<String, BTreeMap<String, u64>>,
}

impl AmodMap {
    pub fn add(&mut self, noun: &str, adj: &str, count: u64) {
        *self
            .map
            .entry(noun.to_string())
            .or_default()
            .entry(adj.to_string())
            .or_insert(0) += count;
    }

    pub fn count(&self, noun: &str, adj: &str) -> u64 {
        self.map.get(noun).and_then(|m| m.get(adj)).copied().unwrap_or(0)
    }

    pub fn adjectives(&self, noun: &str) -> Option<&BTreeMap<String, u64>> {
        self.map.get(noun)
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn nouns(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    fn merge(mut self, other: AmodMap) -> AmodMap {
        for (n, adjs) in other.map {
            for (a, c) in adjs {
                self.add(&n, &a, c);
            }
        }
        self
    }

    /// TSV lines `noun\tadj\tcount`, sorted.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for (n, adjs) in &self.map {
            for (a, c) in adjs {
                writeln!(w, "{n}\t{a}\t{c}")?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<AmodMap> {
        let mut m = AmodMap::default();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Malformed {
                line: i + 1,
                message: "expected noun<TAB>adjective<TAB>count".into(),
            };
            let cols: Vec<&str> = line.split('\t').collect();
            let [n, a, c] = cols.as_slice() else {
                return Err(bad());
            };
            let c: u64 = c.parse().map_err(|_| bad())?;
            if c == 0 {
                return Err(bad());
            }
            m.add(n, a, c);
        }
        Ok(m)
    }
}

fn mine_one(tree: &DepTree) -> AmodMap {
    let mut m = AmodMap::default();
    for t in &tree.tokens {
        if t.deprel != "amod" || t.head == 0 || !t.tag().starts_with("JJ") {
            continue;
        }
        let head = tree.token(t.head);
        if head.tag().starts_with("NN") || head.upos == "NOUN" {
            m.add(&lemma_key(head), &lemma_key(t), 1);
        }
    }
    m
}

/// Collects every adjective→noun `amod` edge with lowercased lemmas.
pub fn mine_amod_map(trees: &[DepTree]) -> AmodMap {
    trees
        .par_iter()
        .map(mine_one)
        .reduce(AmodMap::default, AmodMap::merge)
}

fn starts_with_vowel(w: &str) -> bool {
    matches!(w.chars().next().map(|c| c.to_ascii_lowercase()), Some('a' | 'e' | 'i' | 'o' | 'u'))
}

/// Position (1-based) before which an adjective for noun `k` goes: directly
/// before the noun, or before its contiguous compound modifiers.
fn insertion_point(tree: &DepTree, k: usize) -> usize {
    let mut pos = k;
    while pos > 1 {
        let prev = tree.token(pos - 1);
        if prev.head == k && prev.deprel == "compound" {
            pos -= 1;
        } else {
            break;
        }
    }
    pos
}

/// Inserts `adj` before 1-based position `at`, fixing a preceding a/an and
/// sentence-initial capitalization.
fn insert_adjective(tree: &DepTree, at: usize, adj: &str) -> Vec<Token> {
    let mut toks = tokens_of(tree);
    let mut word = adj.to_string();
    if at == 1 {
        word = capitalize(&word);
        let next = &tree.tokens[0];
        if !is_proper(next) && next.form != "I" {
            toks[0].surface = decapitalize(&toks[0].surface);
        }
    } else {
        let det = &mut toks[at - 2];
        let lower = det.surface.to_lowercase();
        if lower == "a" || lower == "an" {
            let fixed = if starts_with_vowel(adj) { "an" } else { "a" };
            let upper = det.surface.starts_with(char::is_uppercase);
            det.surface = if upper { capitalize(fixed) } else { fixed.to_string() };
        }
    }
    toks.insert(at - 1, Token::new(word, "JJ"));
    toks
}

fn bears(tree: &DepTree, noun: usize, adj: &str) -> bool {
    tree.children(noun).any(|c| c.deprel == "amod" && lemma_key(c) == adj)
}

/// AddAmod on one premise.
///
/// Candidate nouns are common nouns that are not themselves compound
/// modifiers. Over every pair of nouns with distinct lemmas (in sentence
/// order), the adjective shared by both nouns in `map` with the highest
/// combined count wins; ties go to the alphabetically first adjective, then
/// the earliest pair.
pub fn gen_addamod(source_pair_id: &str, tree: &DepTree, map: &AmodMap) -> std::result::Result<AdversarialPair, Reject> {
    let nouns: Vec<(usize, String)> = tree
        .tokens
        .iter()
        .filter(|t| is_common_noun(t) && t.deprel != "compound")
        .map(|t| (t.index, lemma_key(t)))
        .collect();
    let mut any_pair = false;
    let mut any_shared = false;
    // (score, adjective, i, j); best = max score, then min adjective, then min pair
    let mut best: Option<(u64, String, usize, usize)> = None;
    for (x, (i, li)) in nouns.iter().enumerate() {
        for (j, lj) in &nouns[x + 1..] {
            if li == lj {
                continue;
            }
            any_pair = true;
            let (Some(ai), Some(aj)) = (map.adjectives(li), map.adjectives(lj)) else {
                continue;
            };
            for (adj, ci) in ai {
                let Some(cj) = aj.get(adj) else { continue };
                any_shared = true;
                if bears(tree, *i, adj) || bears(tree, *j, adj) {
                    continue;
                }
                let score = ci + cj;
                let better = match &best {
                    None => true,
                    Some((s, a, _, _)) => score > *s || (score == *s && adj < a),
                };
                if better {
                    best = Some((score, adj.clone(), *i, *j));
                }
            }
        }
    }
    let Some((_, adj, i, j)) = best else {
        return Err(if !any_pair {
            Reject::FewerThanTwoNouns
        } else if !any_shared {
            Reject::EmptyIntersection
        } else {
            Reject::AdjectivePresent
        });
    };
    let (pi, pj) = (insertion_point(tree, i), insertion_point(tree, j));
    Ok(AdversarialPair {
        source_pair_id: source_pair_id.to_string(),
        premise_tokens: insert_adjective(tree, pi, &adj),
        hypothesis_tokens: insert_adjective(tree, pj, &adj),
        expected: Rule::AddAmod.expected(),
        rule: Rule::AddAmod,
        edits: Edit::Insert {
            adjective: adj,
            premise_at: pi,
            hypothesis_at: pj,
            premise_noun: tree.token(i).form.clone(),
            hypothesis_noun: tree.token(j).form.clone(),
        },
    })
}

/// Yield and per-reason rejection counts of one generation run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct GenerationReport {
    pub rule: String,
    pub examined: usize,
    pub emitted: usize,
    pub rejections: BTreeMap<String, usize>,
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| !c.is_whitespace()).flat_map(char::to_lowercase).collect()
}

fn ptb_unescape(s: &str) -> &str {
    match s {
        "-LRB-" => "(",
        "-RRB-" => ")",
        "-LSB-" => "[",
        "-RSB-" => "]",
        "-LCB-" => "{",
        "-RCB-" => "}",
        "``" | "''" => "\"",
        o => o,
    }
}

/// Pairs each example with its premise tree: by `# pair_id` comments when
/// the trees carry them, otherwise by position.
pub fn align<'a>(examples: &'a [NliExample], trees: &'a [DepTree]) -> Vec<(&'a NliExample, Option<&'a DepTree>)> {
    if trees.iter().any(|t| t.pair_id.is_some()) {
        let mut by_id: HashMap<&str, &DepTree> = HashMap::new();
        for t in trees {
            if let Some(id) = &t.pair_id {
                by_id.entry(id.as_str()).or_insert(t);
            }
        }
        examples
            .iter()
            .map(|e| (e, by_id.get(e.pair_id.as_str()).copied()))
            .collect()
    } else {
        examples
            .iter()
            .enumerate()
            .map(|(i, e)| (e, trees.get(i)))
            .collect()
    }
}

fn generate_one(
    rule: Rule,
    ex: &NliExample,
    tree: Option<&DepTree>,
    map: Option<&AmodMap>,
) -> std::result::Result<AdversarialPair, Reject> {
    if ex.gold.is_none() {
        return Err(Reject::Undetermined);
    }
    if ex.parse_missing {
        return Err(Reject::MissingParse);
    }
    let tree = tree.ok_or(Reject::Unaligned)?;
    let from_parse: String = ex.premise_tokens.iter().map(|t| squash(ptb_unescape(&t.surface))).collect();
    let from_tree: String = tree.tokens.iter().map(|t| squash(ptb_unescape(&t.form))).collect();
    if from_parse != from_tree {
        return Err(Reject::TokenMismatch);
    }
    match rule {
        Rule::SoSwap => gen_soswap(&ex.pair_id, tree).map(|(p, _)| p),
        Rule::AddAmod => gen_addamod(&ex.pair_id, tree, map.expect("AddAmod needs an amod map")),
    }
}

/// Generates adversaries for every aligned premise, in corpus order. Each
/// distinct premise text is used once. Stops after `limit` pairs.
pub fn generate_set(
    rule: Rule,
    examples: &[NliExample],
    trees: &[DepTree],
    map: Option<&AmodMap>,
    limit: Option<usize>,
) -> Result<(Vec<AdversarialPair>, GenerationReport)> {
    if rule == Rule::AddAmod && map.is_none() {
        return Err(Error::Invalid("addamod requires an amod map".into()));
    }
    let aligned = align(examples, trees);
    let results: Vec<_> = aligned
        .par_iter()
        .map(|(ex, tree)| generate_one(rule, ex, *tree, map))
        .collect();
    let mut report = GenerationReport {
        rule: rule.to_string(),
        ..Default::default()
    };
    let mut pairs = Vec::new();
    let mut seen_premises = HashSet::new();
    for ((ex, _), res) in aligned.iter().zip(results) {
        if limit.is_some_and(|l| pairs.len() >= l) {
            break;
        }
        report.examined += 1;
        let res = match res {
            Ok(_) if !seen_premises.insert(ex.premise_text.as_str()) => Err(Reject::DuplicatePremise),
            other => other,
        };
        match res {
            Ok(p) => pairs.push(p),
            Err(r) => *report.rejections.entry(r.as_str().to_string()).or_insert(0) += 1,
        }
    }
    report.emitted = pairs.len();
    Ok((pairs, report))
}

/// Writes pairs as JSONL.
pub fn write_pairs<W: Write>(mut w: W, pairs: &[AdversarialPair]) -> Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut w, &p.to_json())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::ConlluReader;

    fn tree(rows: &[(&str, &str, &str, usize, &str)]) -> DepTree {
        let toks = rows
            .iter()
            .enumerate()
            .map(|(i, (form, lemma, xpos, head, rel))| DepToken {
                index: i + 1,
                form: form.to_string(),
                lemma: lemma.to_string(),
                upos: "_".into(),
                xpos: xpos.to_string(),
                head: *head,
                deprel: rel.to_string(),
            })
            .collect();
        DepTree::new(Some("s1".into()), toks).unwrap()
    }

    fn dog_chased_cat() -> DepTree {
        tree(&[
            ("The", "the", "DT", 2, "det"),
            ("dog", "dog", "NN", 3, "nsubj"),
            ("chased", "chase", "VBD", 0, "root"),
            ("the", "the", "DT", 5, "det"),
            ("cat", "cat", "NN", 3, "obj"),
            (".", ".", ".", 3, "punct"),
        ])
    }

    fn text(toks: &[Token]) -> String {
        join_surface(toks)
    }

    #[test]
    fn finds_frame() {
        let f = find_svo(&dog_chased_cat()).unwrap();
        assert_eq!(f.verb_index, 3);
        assert_eq!(f.subj_span, (1, 2));
        assert_eq!(f.obj_span, (4, 5));
    }

    #[test]
    fn pronoun_and_same_lemma_rejected() {
        let t = tree(&[
            ("it", "it", "PRP", 2, "nsubj"),
            ("chased", "chase", "VBD", 0, "root"),
            ("the", "the", "DT", 4, "det"),
            ("cat", "cat", "NN", 2, "obj"),
        ]);
        assert_eq!(classify_svo(&t), Err(Reject::PronounArgument));
        let t = tree(&[
            ("the", "the", "DT", 2, "det"),
            ("dog", "dog", "NN", 3, "nsubj"),
            ("chased", "chase", "VBD", 0, "root"),
            ("the", "the", "DT", 5, "det"),
            ("dog", "dog", "NN", 3, "obj"),
        ]);
        assert_eq!(classify_svo(&t), Err(Reject::SameLemma));
    }

    #[test]
    fn swap_with_case_repair() {
        let (p, hyp) = gen_soswap("s1", &dog_chased_cat()).unwrap();
        assert_eq!(text(&p.premise_tokens), "The dog chased the cat .");
        assert_eq!(text(&p.hypothesis_tokens), "The cat chased the dog .");
        assert_eq!(p.expected, Label::Contradiction);
        // swapping back recovers the premise
        let (back, _) = gen_soswap("s1", &hyp).unwrap();
        assert_eq!(text(&back.hypothesis_tokens), "The dog chased the cat .");
    }

    #[test]
    fn moved_initial_common_noun_is_lowercased() {
        let t = tree(&[
            ("Dogs", "dog", "NNS", 2, "nsubj"),
            ("chase", "chase", "VBP", 0, "root"),
            ("cats", "cat", "NNS", 2, "obj"),
        ]);
        let (p, _) = gen_soswap("x", &t).unwrap();
        assert_eq!(text(&p.hypothesis_tokens), "Cats chase dogs");
    }

    fn man_walks_dog() -> DepTree {
        tree(&[
            ("a", "a", "DT", 2, "det"),
            ("man", "man", "NN", 3, "nsubj"),
            ("walks", "walk", "VBZ", 0, "root"),
            ("a", "a", "DT", 5, "det"),
            ("dog", "dog", "NN", 3, "obj"),
        ])
    }

    #[test]
    fn addamod_inserts_before_each_noun() {
        let mut m = AmodMap::default();
        m.add("man", "small", 2);
        m.add("dog", "small", 1);
        m.add("dog", "brown", 5);
        let p = gen_addamod("s1", &man_walks_dog(), &m).unwrap();
        assert_eq!(text(&p.premise_tokens), "a small man walks a dog");
        assert_eq!(text(&p.hypothesis_tokens), "a man walks a small dog");
        assert_eq!(p.expected, Label::Neutral);
    }

    #[test]
    fn article_follows_adjective() {
        let t = tree(&[
            ("an", "a", "DT", 2, "det"),
            ("elephant", "elephant", "NN", 3, "nsubj"),
            ("sees", "see", "VBZ", 0, "root"),
            ("a", "a", "DT", 5, "det"),
            ("tree", "tree", "NN", 3, "obj"),
        ]);
        let mut m = AmodMap::default();
        m.add("elephant", "enormous", 1);
        m.add("tree", "enormous", 1);
        let p = gen_addamod("s", &t, &m).unwrap();
        assert_eq!(text(&p.premise_tokens), "an enormous elephant sees a tree");
        assert_eq!(text(&p.hypothesis_tokens), "an elephant sees an enormous tree");
        let mut m = AmodMap::default();
        m.add("elephant", "small", 1);
        m.add("tree", "small", 1);
        let p = gen_addamod("s", &t, &m).unwrap();
        assert_eq!(text(&p.premise_tokens), "a small elephant sees a tree");
    }

    #[test]
    fn addamod_rejections() {
        let t = tree(&[("dogs", "dog", "NNS", 2, "nsubj"), ("run", "run", "VBP", 0, "root")]);
        assert_eq!(gen_addamod("s", &t, &AmodMap::default()), Err(Reject::FewerThanTwoNouns));
        assert_eq!(gen_addamod("s", &man_walks_dog(), &AmodMap::default()), Err(Reject::EmptyIntersection));
        let t = tree(&[
            ("a", "a", "DT", 3, "det"),
            ("small", "small", "JJ", 3, "amod"),
            ("man", "man", "NN", 4, "nsubj"),
            ("walks", "walk", "VBZ", 0, "root"),
            ("a", "a", "DT", 6, "det"),
            ("dog", "dog", "NN", 4, "obj"),
        ]);
        let mut m = AmodMap::default();
        m.add("man", "small", 1);
        m.add("dog", "small", 1);
        assert_eq!(gen_addamod("s", &t, &m), Err(Reject::AdjectivePresent));
    }

    #[test]
    fn compound_nouns_take_adjective_before_compound() {
        let t = tree(&[
            ("a", "a", "DT", 2, "det"),
            ("man", "man", "NN", 3, "nsubj"),
            ("kicks", "kick", "VBZ", 0, "root"),
            ("a", "a", "DT", 6, "det"),
            ("soccer", "soccer", "NN", 6, "compound"),
            ("ball", "ball", "NN", 3, "obj"),
        ]);
        let mut m = AmodMap::default();
        m.add("man", "old", 1);
        m.add("ball", "old", 1);
        m.add("soccer", "old", 9);
        let p = gen_addamod("s", &t, &m).unwrap();
        assert_eq!(text(&p.hypothesis_tokens), "a man kicks an old soccer ball");
    }

    #[test]
    fn mining_counts_edges() {
        let s = "1\tsmall\tsmall\tADJ\tJJ\t_\t2\tamod\t_\t_\n2\tdog\tdog\tNOUN\tNN\t_\t0\troot\t_\t_\n\n\
                 1\tsmall\tsmall\tADJ\tJJ\t_\t2\tamod\t_\t_\n2\tcat\tcat\tNOUN\tNN\t_\t0\troot\t_\t_\n\n\
                 1\tbrown\tbrown\tADJ\tJJ\t_\t2\tamod\t_\t_\n2\tdogs\tdog\tNOUN\tNNS\t_\t0\troot\t_\t_\n\n\
                 1\tSmall\tsmall\tADJ\tJJ\t_\t2\tamod\t_\t_\n2\tDog\tdog\tNOUN\tNN\t_\t0\troot\t_\t_\n";
        let trees: Vec<DepTree> = ConlluReader::new(s.as_bytes()).map(|t| t.unwrap()).collect();
        let m = mine_amod_map(&trees);
        assert_eq!(m.nouns().collect::<Vec<_>>(), vec!["cat", "dog"]);
        assert_eq!(m.count("dog", "small"), 2);
        assert_eq!(m.count("dog", "brown"), 1);
        assert_eq!(m.count("cat", "small"), 1);
        assert!(mine_amod_map(&[]).is_empty());
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        assert_eq!(AmodMap::read_from(buf.as_slice()).unwrap(), m);
    }
}
