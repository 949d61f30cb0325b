//! Lexical feature space: premise unigrams, hypothesis unigrams and ordered
//! premise×hypothesis cross-unigrams over content words, as 0/1 indicators.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::corpus::{NliExample, Token};
use crate::error::{Error, Result};

pub const VOCAB_MAGIC: &str = "#compsense-vocab";
pub const VOCAB_VERSION: u32 = 1;

/// Content words are nouns, verbs, adjectives and adverbs (PTB tags with
/// prefix NN, VB, JJ or RB).
pub fn is_content_word(pos: &str) -> bool {
    ["NN", "VB", "JJ", "RB"].iter().any(|p| pos.starts_with(p))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureKey {
    PremiseUnigram(String),
    HypothesisUnigram(String),
    /// (premise word, hypothesis word)
    CrossUnigram(String, String),
}

impl FeatureKey {
    fn kind_code(&self) -> &'static str {
        match self {
            FeatureKey::PremiseUnigram(_) => "P",
            FeatureKey::HypothesisUnigram(_) => "H",
            FeatureKey::CrossUnigram(..) => "X",
        }
    }
}

impl fmt::Display for FeatureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureKey::PremiseUnigram(w) | FeatureKey::HypothesisUnigram(w) => {
                write!(f, "{}\t{}", self.kind_code(), w)
            }
            FeatureKey::CrossUnigram(p, h) => write!(f, "X\t{p}\t{h}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureOptions {
    pub lowercase: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions { lowercase: true }
    }
}

fn normalize(surface: &str, opts: FeatureOptions) -> String {
    if opts.lowercase {
        surface.to_lowercase()
    } else {
        surface.to_string()
    }
}

/// Distinct normalized content words of one sentence, sorted.
pub fn content_words(tokens: &[Token], opts: FeatureOptions) -> BTreeSet<String> {
    tokens
        .iter()
        .filter(|t| is_content_word(&t.pos))
        .map(|t| normalize(&t.surface, opts))
        .filter(|w| !w.is_empty())
        .collect()
}

/// The feature keys present in an example, in sorted order.
pub fn extract_keys(example: &NliExample, opts: FeatureOptions) -> Vec<FeatureKey> {
    let p = content_words(&example.premise_tokens, opts);
    let h = content_words(&example.hypothesis_tokens, opts);
    let mut keys = Vec::with_capacity(p.len() + h.len() + p.len() * h.len());
    keys.extend(p.iter().cloned().map(FeatureKey::PremiseUnigram));
    keys.extend(h.iter().cloned().map(FeatureKey::HypothesisUnigram));
    for a in &p {
        for b in &h {
            keys.push(FeatureKey::CrossUnigram(a.clone(), b.clone()));
        }
    }
    keys
}

/// Sorted, duplicate-free indices of the active features.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct FeatureVector(Vec<u32>);

impl FeatureVector {
    /// Sorts and dedups.
    pub fn from_indices(mut v: Vec<u32>) -> Self {
        v.sort_unstable();
        v.dedup();
        FeatureVector(v)
    }

    pub fn indices(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexMode {
    /// Exact key → index table.
    Dictionary,
    /// Feature hashing into `2^bits` buckets; no key table.
    Hashed { bits: u32 },
}

// Packed key layout: 2-bit kind | 31-bit word id | 31-bit word id.
const KIND_P: u64 = 0;
const KIND_H: u64 = 1;
const KIND_X: u64 = 2;
const WORD_MASK: u64 = (1 << 31) - 1;

fn pack(kind: u64, a: u32, b: u32) -> u64 {
    (kind << 62) | ((a as u64 & WORD_MASK) << 31) | (b as u64 & WORD_MASK)
}

#[derive(Debug, Default, Clone)]
struct Interner {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.ids.get(w) {
            return id;
        }
        let id = self.words.len() as u32;
        assert!((id as u64) < WORD_MASK, "word table overflow");
        self.words.push(w.to_string());
        self.ids.insert(w.to_string(), id);
        id
    }

    fn get(&self, w: &str) -> Option<u32> {
        self.ids.get(w).copied()
    }

    fn unpack(&self, k: u64) -> FeatureKey {
        let a = &self.words[((k >> 31) & WORD_MASK) as usize];
        let b = &self.words[(k & WORD_MASK) as usize];
        match k >> 62 {
            KIND_P => FeatureKey::PremiseUnigram(a.clone()),
            KIND_H => FeatureKey::HypothesisUnigram(a.clone()),
            _ => FeatureKey::CrossUnigram(a.clone(), b.clone()),
        }
    }
}

/// Packed keys of one example in canonical (sorted-key) order.
fn packed_keys(example: &NliExample, opts: FeatureOptions, interner: &mut Interner) -> Vec<u64> {
    let p: Vec<u32> = content_words(&example.premise_tokens, opts)
        .iter()
        .map(|w| interner.intern(w))
        .collect();
    let h: Vec<u32> = content_words(&example.hypothesis_tokens, opts)
        .iter()
        .map(|w| interner.intern(w))
        .collect();
    let mut out = Vec::with_capacity(p.len() + h.len() + p.len() * h.len());
    out.extend(p.iter().map(|&a| pack(KIND_P, a, 0)));
    out.extend(h.iter().map(|&b| pack(KIND_H, b, 0)));
    for &a in &p {
        for &b in &h {
            out.push(pack(KIND_X, a, b));
        }
    }
    out
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Frozen feature space.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    mode: IndexMode,
    options: FeatureOptions,
    min_count: u32,
    dim: usize,
    words: Interner,
    index: HashMap<u64, u32>,
    /// Keys in index order (dictionary mode only).
    keys: Vec<FeatureKey>,
    fingerprint: String,
}

impl Vocabulary {
    /// Dictionary vocabulary over `keys`, indexed in the given order.
    pub fn from_keys(keys: Vec<FeatureKey>, min_count: u32, options: FeatureOptions) -> Result<Self> {
        let mut words = Interner::default();
        let mut index = HashMap::with_capacity(keys.len());
        for (i, k) in keys.iter().enumerate() {
            let packed = match k {
                FeatureKey::PremiseUnigram(w) => pack(KIND_P, words.intern(w), 0),
                FeatureKey::HypothesisUnigram(w) => pack(KIND_H, words.intern(w), 0),
                FeatureKey::CrossUnigram(a, b) => {
                    let a = words.intern(a);
                    pack(KIND_X, a, words.intern(b))
                }
            };
            if index.insert(packed, i as u32).is_some() {
                return Err(Error::Invalid(format!("duplicate feature key {k}")));
            }
        }
        let mut v = Vocabulary {
            mode: IndexMode::Dictionary,
            options,
            min_count,
            dim: keys.len(),
            words,
            index,
            keys,
            fingerprint: String::new(),
        };
        v.fingerprint = fingerprint_bytes(&v.to_bytes());
        Ok(v)
    }

    /// Hashed feature space with `2^bits` dimensions.
    pub fn hashed(bits: u32, options: FeatureOptions) -> Result<Self> {
        if !(1..=31).contains(&bits) {
            return Err(Error::Invalid(format!("hash bits {bits} outside 1..=31")));
        }
        let mut v = Vocabulary {
            mode: IndexMode::Hashed { bits },
            options,
            min_count: 1,
            dim: 1 << bits,
            words: Interner::default(),
            index: HashMap::new(),
            keys: Vec::new(),
            fingerprint: String::new(),
        };
        v.fingerprint = fingerprint_bytes(&v.to_bytes());
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn min_count(&self) -> u32 {
        self.min_count
    }

    pub fn mode(&self) -> IndexMode {
        self.mode
    }

    pub fn options(&self) -> FeatureOptions {
        self.options
    }

    /// First 16 hex digits of the SHA-256 of the serialized vocabulary.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Keys in index order (empty for hashed vocabularies).
    pub fn keys(&self) -> &[FeatureKey] {
        &self.keys
    }

    pub fn index_of(&self, key: &FeatureKey) -> Option<u32> {
        match self.mode {
            IndexMode::Hashed { bits } => Some(self.hash_index(&key.to_string(), bits)),
            IndexMode::Dictionary => {
                let packed = match key {
                    FeatureKey::PremiseUnigram(w) => pack(KIND_P, self.words.get(w)?, 0),
                    FeatureKey::HypothesisUnigram(w) => pack(KIND_H, self.words.get(w)?, 0),
                    FeatureKey::CrossUnigram(a, b) => {
                        pack(KIND_X, self.words.get(a)?, self.words.get(b)?)
                    }
                };
                self.index.get(&packed).copied()
            }
        }
    }

    fn hash_index(&self, canonical: &str, bits: u32) -> u32 {
        (fnv1a(canonical.as_bytes()) & ((1u64 << bits) - 1)) as u32
    }

    /// Indicator vector of an example; keys outside the space are dropped.
    pub fn featurize(&self, example: &NliExample) -> FeatureVector {
        match self.mode {
            IndexMode::Hashed { bits } => FeatureVector::from_indices(
                extract_keys(example, self.options)
                    .iter()
                    .map(|k| self.hash_index(&k.to_string(), bits))
                    .collect(),
            ),
            IndexMode::Dictionary => {
                let ids = |toks: &[Token]| -> Vec<u32> {
                    content_words(toks, self.options)
                        .iter()
                        .filter_map(|w| self.words.get(w))
                        .collect()
                };
                let p = ids(&example.premise_tokens);
                let h = ids(&example.hypothesis_tokens);
                let mut out = Vec::new();
                let mut look = |k: u64| {
                    if let Some(&i) = self.index.get(&k) {
                        out.push(i);
                    }
                };
                for &a in &p {
                    look(pack(KIND_P, a, 0));
                }
                for &b in &h {
                    look(pack(KIND_H, b, 0));
                }
                for &a in &p {
                    for &b in &h {
                        look(pack(KIND_X, a, b));
                    }
                }
                FeatureVector::from_indices(out)
            }
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut s = String::new();
        s.push_str(&format!("{VOCAB_MAGIC}\t{VOCAB_VERSION}\n"));
        s.push_str(&format!("d\t{}\n", self.dim));
        s.push_str(&format!("min_count\t{}\n", self.min_count));
        s.push_str(&format!("lowercase\t{}\n", self.options.lowercase));
        match self.mode {
            IndexMode::Dictionary => s.push_str("index\tdictionary\n"),
            IndexMode::Hashed { bits } => s.push_str(&format!("index\thashed:{bits}\n")),
        }
        for (i, k) in self.keys.iter().enumerate() {
            s.push_str(&format!("{k}\t{i}\n"));
        }
        s.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| Error::Invalid(format!("vocabulary is not UTF-8: {e}")))?;
        let mut lines = text.split_terminator('\n').enumerate();
        let mut header = |name: &str| -> Result<String> {
            let (ln, line) = lines.next().ok_or_else(|| Error::Malformed {
                line: 0,
                message: format!("truncated vocabulary header (missing {name})"),
            })?;
            match line.split_once('\t') {
                Some((k, v)) if k == name => Ok(v.to_string()),
                _ => Err(Error::Malformed {
                    line: ln + 1,
                    message: format!("expected header field {name}"),
                }),
            }
        };
        let version: u32 = header(VOCAB_MAGIC)?
            .parse()
            .map_err(|_| Error::Invalid("bad vocabulary version".into()))?;
        if version != VOCAB_VERSION {
            return Err(Error::Version {
                expected: VOCAB_VERSION,
                found: version,
            });
        }
        let bad = |f: &str| Error::Invalid(format!("bad vocabulary header field {f}"));
        let dim: usize = header("d")?.parse().map_err(|_| bad("d"))?;
        let min_count: u32 = header("min_count")?.parse().map_err(|_| bad("min_count"))?;
        let lowercase: bool = header("lowercase")?.parse().map_err(|_| bad("lowercase"))?;
        let mode = header("index")?;
        let options = FeatureOptions { lowercase };
        if let Some(bits) = mode.strip_prefix("hashed:") {
            let bits: u32 = bits.parse().map_err(|_| bad("index"))?;
            let v = Vocabulary::hashed(bits, options)?;
            if v.dim != dim || lines.next().is_some() {
                return Err(bad("d"));
            }
            return Ok(v);
        }
        if mode != "dictionary" {
            return Err(bad("index"));
        }
        let mut keys = Vec::with_capacity(dim);
        for (ln, line) in lines {
            let cols: Vec<&str> = line.split('\t').collect();
            let malformed = |m: &str| Error::Malformed {
                line: ln + 1,
                message: m.to_string(),
            };
            let (key, idx) = match cols.as_slice() {
                ["P", w, i] => (FeatureKey::PremiseUnigram(w.to_string()), i),
                ["H", w, i] => (FeatureKey::HypothesisUnigram(w.to_string()), i),
                ["X", a, b, i] => (FeatureKey::CrossUnigram(a.to_string(), b.to_string()), i),
                _ => return Err(malformed("bad key line")),
            };
            if idx.parse::<usize>().ok() != Some(keys.len()) {
                return Err(malformed("indices must be dense and in order"));
            }
            keys.push(key);
        }
        if keys.len() != dim {
            return Err(Error::Invalid(format!(
                "vocabulary declares d={dim} but has {} keys",
                keys.len()
            )));
        }
        Vocabulary::from_keys(keys, min_count, options)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::from_bytes(&bytes)
    }
}

pub(crate) fn fingerprint_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..8])
}

/// Single-pass vocabulary build: keys seen in at least `min_count` examples
/// (undetermined-gold examples ignored), indexed by first occurrence.
pub fn build_vocab<I>(corpus: I, min_count: u32, options: FeatureOptions) -> Result<Vocabulary>
where
    I: IntoIterator<Item = Result<NliExample>>,
{
    let mut interner = Interner::default();
    // packed key -> (count, first-seen ordinal)
    let mut counts: HashMap<u64, (u32, u64)> = HashMap::new();
    let mut seq: u64 = 0;
    let mut n = 0usize;
    for ex in corpus {
        let ex = ex?;
        if ex.gold.is_none() {
            continue;
        }
        n += 1;
        for k in packed_keys(&ex, options, &mut interner) {
            let e = counts.entry(k).or_insert((0, seq));
            e.0 += 1;
            seq += 1;
        }
    }
    if n == 0 {
        return Err(Error::Invalid("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut kept: Vec<(u64, u64)> = counts
        .into_iter()
        .filter(|(_, (c, _))| *c >= min_count.max(1))
        .map(|(k, (_, first))| (first, k))
        .collect();
    kept.sort_unstable();
    let keys = kept.into_iter().map(|(_, k)| interner.unpack(k)).collect();
    Vocabulary::from_keys(keys, min_count, options)
}

/// Two-pass build: count, then re-read and index surviving keys on first
/// encounter. Produces the same vocabulary as [`build_vocab`] while holding
/// only counts during the first pass.
pub fn build_vocab_two_pass<F, I>(mut corpus: F, min_count: u32, options: FeatureOptions) -> Result<Vocabulary>
where
    F: FnMut() -> Result<I>,
    I: IntoIterator<Item = Result<NliExample>>,
{
    let mut interner = Interner::default();
    let mut counts: HashMap<u64, u32> = HashMap::new();
    let mut n = 0usize;
    for ex in corpus()? {
        let ex = ex?;
        if ex.gold.is_none() {
            continue;
        }
        n += 1;
        for k in packed_keys(&ex, options, &mut interner) {
            *counts.entry(k).or_insert(0) += 1;
        }
    }
    if n == 0 {
        return Err(Error::Invalid("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut keys = Vec::new();
    for ex in corpus()? {
        let ex = ex?;
        if ex.gold.is_none() {
            continue;
        }
        for k in packed_keys(&ex, options, &mut interner) {
            if let Some(c) = counts.get_mut(&k) {
                if *c >= min_count.max(1) {
                    keys.push(interner.unpack(k));
                    // mark as emitted
                    *c = 0;
                }
            }
        }
    }
    Vocabulary::from_keys(keys, min_count, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::Label;

    fn ex(p: &[(&str, &str)], h: &[(&str, &str)]) -> NliExample {
        let toks = |v: &[(&str, &str)]| v.iter().map(|(w, t)| Token::new(*w, *t)).collect::<Vec<_>>();
        NliExample {
            pair_id: "x".into(),
            premise_text: String::new(),
            hypothesis_text: String::new(),
            premise_tokens: toks(p),
            hypothesis_tokens: toks(h),
            gold: Some(Label::Entailment),
            annotator_labels: vec![],
            genre: None,
            parse_missing: false,
        }
    }

    #[test]
    fn content_word_prefixes() {
        assert!(is_content_word("NNS"));
        assert!(is_content_word("VBD"));
        assert!(!is_content_word("DT"));
        assert!(!is_content_word("IN"));
        assert!(!is_content_word("UNK"));
    }

    #[test]
    fn two_by_two_gives_eight_keys() {
        let e = ex(&[("dogs", "NNS"), ("run", "VBP")], &[("cats", "NNS"), ("sleep", "VBP")]);
        assert_eq!(extract_keys(&e, FeatureOptions::default()).len(), 8);
    }

    #[test]
    fn function_words_give_nothing() {
        let e = ex(&[("the", "DT"), ("a", "DT")], &[("an", "DT"), ("of", "IN")]);
        assert!(extract_keys(&e, FeatureOptions::default()).is_empty());
    }

    #[test]
    fn identical_cross_pairs_included_and_lowercased() {
        let e = ex(&[("Dog", "NN")], &[("dog", "NN")]);
        let keys = extract_keys(&e, FeatureOptions::default());
        assert!(keys.contains(&FeatureKey::CrossUnigram("dog".into(), "dog".into())));
        let raw = extract_keys(&e, FeatureOptions { lowercase: false });
        assert!(raw.contains(&FeatureKey::CrossUnigram("Dog".into(), "dog".into())));
    }

    #[test]
    fn min_count_filters() {
        let a = ex(&[("dogs", "NNS")], &[("run", "VB")]);
        let b = ex(&[("dogs", "NNS")], &[("sit", "VB")]);
        let v = build_vocab([Ok(a.clone())], 1, FeatureOptions::default()).unwrap();
        assert_eq!(v.dim(), 3);
        let v = build_vocab([Ok(a), Ok(b)], 2, FeatureOptions::default()).unwrap();
        assert_eq!(v.keys(), &[FeatureKey::PremiseUnigram("dogs".into())]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(build_vocab(std::iter::empty(), 1, FeatureOptions::default()).is_err());
    }

    #[test]
    fn featurize_drops_unseen() {
        let a = ex(&[("dogs", "NNS")], &[("run", "VB")]);
        let v = build_vocab([Ok(a.clone())], 1, FeatureOptions::default()).unwrap();
        assert_eq!(v.featurize(&a).indices(), &[0, 1, 2]);
        let b = ex(&[("cats", "NNS")], &[("sit", "VB")]);
        assert!(v.featurize(&b).is_empty());
        // seen words, unseen combination
        let c = ex(&[("run", "VB")], &[("dogs", "NNS")]);
        assert!(v.featurize(&c).is_empty());
    }

    #[test]
    fn file_round_trip_is_bit_exact() {
        let a = ex(&[("dogs", "NNS"), ("run", "VBP")], &[("cats", "NNS")]);
        let v = build_vocab([Ok(a)], 1, FeatureOptions::default()).unwrap();
        let bytes = v.to_bytes();
        let back = Vocabulary::from_bytes(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(back.fingerprint(), v.fingerprint());
        assert!(Vocabulary::from_bytes(&bytes[..bytes.len() - 5]).is_err());
    }

    #[test]
    fn hashed_mode() {
        let v = Vocabulary::hashed(4, FeatureOptions::default()).unwrap();
        let a = ex(&[("dogs", "NNS"), ("run", "VBP")], &[("cats", "NNS")]);
        let f = v.featurize(&a);
        assert!(f.indices().iter().all(|&i| i < 16));
        assert!(!f.is_empty());
        let back = Vocabulary::from_bytes(&v.to_bytes()).unwrap();
        assert_eq!(back.mode(), IndexMode::Hashed { bits: 4 });
        assert_eq!(back.featurize(&a), f);
    }
}
