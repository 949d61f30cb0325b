//! NLI corpus ingestion (SNLI / MultiNLI JSONL) and corpus transforms.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::label::{gold_str, parse_gold, Label};
use crate::ptb::{parse_ptb, PtbTree};
use crate::rng;

/// POS placeholder for tokens that did not come from a parse.
pub const UNKNOWN_POS: &str = "UNK";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub surface: String,
    pub pos: String,
}

impl Token {
    pub fn new(surface: impl Into<String>, pos: impl Into<String>) -> Self {
        Token {
            surface: surface.into(),
            pos: pos.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Premise,
    Hypothesis,
}

/// One premise/hypothesis pair. `gold == None` means the annotators reached
/// no consensus (`"-"` in the source file).
#[derive(Debug, Clone, PartialEq)]
pub struct NliExample {
    pub pair_id: String,
    pub premise_text: String,
    pub hypothesis_text: String,
    pub premise_tokens: Vec<Token>,
    pub hypothesis_tokens: Vec<Token>,
    pub gold: Option<Label>,
    pub annotator_labels: Vec<Option<Label>>,
    pub genre: Option<String>,
    /// Set when at least one side had no parse and was whitespace-tokenized.
    pub parse_missing: bool,
}

impl NliExample {
    /// True when the example can take part in scoring.
    pub fn is_scorable(&self) -> bool {
        self.gold.is_some() && !self.premise_tokens.is_empty() && !self.hypothesis_tokens.is_empty()
    }

    pub fn tokens(&self, side: Side) -> &[Token] {
        match side {
            Side::Premise => &self.premise_tokens,
            Side::Hypothesis => &self.hypothesis_tokens,
        }
    }

    /// Serializes in the input JSONL schema, with flat parse trees built from
    /// the current tokens.
    pub fn to_json(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert(
            "annotator_labels".into(),
            Value::Array(
                self.annotator_labels
                    .iter()
                    .map(|l| Value::from(gold_str(*l)))
                    .collect(),
            ),
        );
        if let Some(g) = &self.genre {
            m.insert("genre".into(), json!(g));
        }
        m.insert("gold_label".into(), json!(gold_str(self.gold)));
        m.insert("pairID".into(), json!(self.pair_id));
        m.insert("sentence1".into(), json!(self.premise_text));
        m.insert("sentence1_parse".into(), json!(flat_parse(&self.premise_tokens)));
        m.insert("sentence2".into(), json!(self.hypothesis_text));
        m.insert("sentence2_parse".into(), json!(flat_parse(&self.hypothesis_tokens)));
        m
    }
}

pub fn flat_parse(tokens: &[Token]) -> String {
    PtbTree::flat(tokens.iter().map(|t| (t.surface.as_str(), t.pos.as_str()))).to_string()
}

pub fn join_surface(tokens: &[Token]) -> String {
    let mut s = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&t.surface);
    }
    s
}

#[derive(Deserialize)]
struct RawExample {
    sentence1: String,
    sentence2: String,
    gold_label: String,
    #[serde(default)]
    annotator_labels: Vec<String>,
    sentence1_parse: Option<String>,
    sentence2_parse: Option<String>,
    #[serde(rename = "pairID")]
    pair_id: Option<Value>,
    genre: Option<String>,
}

fn tokens_from(parse: Option<&str>, text: &str, line: usize) -> Result<(Vec<Token>, bool)> {
    match parse {
        Some(p) if !p.trim().is_empty() => {
            let tree = parse_ptb(p).map_err(|e| Error::Malformed {
                line,
                message: format!("bad parse: {e}"),
            })?;
            let toks = tree
                .leaves_with_pos()
                .into_iter()
                .map(|(w, t)| Token::new(w, t))
                .collect();
            Ok((toks, false))
        }
        _ => Ok((
            text.split_whitespace()
                .map(|w| Token::new(w, UNKNOWN_POS))
                .collect(),
            true,
        )),
    }
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Pair id of a raw JSONL line, synthesized as `L<lineno>` when absent.
/// `line` is 1-based.
pub fn line_pair_id(raw: &str, line: usize) -> Result<String> {
    let v: Value = serde_json::from_str(raw).map_err(|e| Error::Malformed {
        line,
        message: e.to_string(),
    })?;
    Ok(v.get("pairID")
        .and_then(id_string)
        .unwrap_or_else(|| format!("L{line}")))
}

/// Parses one JSONL line (1-based `line` number).
pub fn parse_nli_line(raw: &str, line: usize) -> Result<NliExample> {
    let malformed = |message: String| Error::Malformed { line, message };
    let r: RawExample = serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
    let gold = parse_gold(&r.gold_label).map_err(|e| malformed(e.to_string()))?;
    if r.annotator_labels.len() > 5 {
        return Err(malformed(format!(
            "{} annotator labels (at most 5)",
            r.annotator_labels.len()
        )));
    }
    let annotator_labels = r
        .annotator_labels
        .iter()
        .map(|s| parse_gold(s))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| malformed(e.to_string()))?;
    let (premise_tokens, m1) = tokens_from(r.sentence1_parse.as_deref(), &r.sentence1, line)?;
    let (hypothesis_tokens, m2) = tokens_from(r.sentence2_parse.as_deref(), &r.sentence2, line)?;
    let pair_id = r
        .pair_id
        .as_ref()
        .and_then(id_string)
        .unwrap_or_else(|| format!("L{line}"));
    Ok(NliExample {
        pair_id,
        premise_text: r.sentence1,
        hypothesis_text: r.sentence2,
        premise_tokens,
        hypothesis_tokens,
        gold,
        annotator_labels,
        genre: r.genre,
        parse_missing: m1 || m2,
    })
}

/// Counters accumulated while streaming a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct IngestStats {
    pub lines: usize,
    pub examples: usize,
    pub determined: usize,
    pub undetermined: usize,
    pub missing_parse: usize,
    pub skipped: usize,
}

/// Streaming JSONL reader. In strict mode the first malformed line is
/// returned as an error and iteration ends; otherwise such lines are
/// skipped and counted in [`IngestStats::skipped`].
pub struct NliReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    strict: bool,
    failed: bool,
    stats: IngestStats,
}

impl<R: BufRead> NliReader<R> {
    pub fn new(reader: R, strict: bool) -> Self {
        NliReader {
            lines: reader.lines(),
            line_no: 0,
            strict,
            failed: false,
            stats: IngestStats::default(),
        }
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }
}

impl<R: BufRead> Iterator for NliReader<R> {
    type Item = Result<NliExample>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            let raw = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            };
            self.line_no += 1;
            if raw.trim().is_empty() {
                continue;
            }
            self.stats.lines += 1;
            match parse_nli_line(&raw, self.line_no) {
                Ok(ex) => {
                    self.stats.examples += 1;
                    if ex.gold.is_some() {
                        self.stats.determined += 1;
                    } else {
                        self.stats.undetermined += 1;
                    }
                    if ex.parse_missing {
                        self.stats.missing_parse += 1;
                    }
                    return Some(Ok(ex));
                }
                Err(e) if self.strict => {
                    self.failed = true;
                    return Some(Err(e));
                }
                Err(e) => {
                    log::warn!("skipping malformed input: {e}");
                    self.stats.skipped += 1;
                }
            }
        }
    }
}

pub fn load_nli_jsonl(path: impl AsRef<Path>, strict: bool) -> Result<NliReader<BufReader<File>>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(NliReader::new(BufReader::new(f), strict))
}

/// Loads a whole corpus into memory (lenient mode).
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<NliExample>> {
    load_nli_jsonl(path, false)?.collect()
}

/// Independently permutes the premise and hypothesis tokens. The permutation
/// for each side is drawn from a stream keyed by `(seed, pair_id, side)`, so
/// the output depends only on the example and the seed.
pub fn shuffle_words(example: &NliExample, seed: u64) -> NliExample {
    let mut out = example.clone();
    for (side, tag) in [(Side::Premise, b"premise".as_slice()), (Side::Hypothesis, b"hypothesis")] {
        let mut r = rng::stream(seed, &[b"word_shuffle", example.pair_id.as_bytes(), tag]);
        let toks = match side {
            Side::Premise => &mut out.premise_tokens,
            Side::Hypothesis => &mut out.hypothesis_tokens,
        };
        rng::shuffle(&mut r, toks);
    }
    out.premise_text = join_surface(&out.premise_tokens);
    out.hypothesis_text = join_surface(&out.hypothesis_tokens);
    out
}

/// Writes examples as JSONL, adding a `"transform"` provenance field when
/// given.
pub fn write_jsonl<'a, W: Write>(
    mut w: W,
    examples: impl IntoIterator<Item = &'a NliExample>,
    transform: Option<&str>,
) -> Result<()> {
    for ex in examples {
        let mut m = ex.to_json();
        if let Some(t) = transform {
            m.insert("transform".into(), json!(t));
        }
        serde_json::to_writer(&mut w, &Value::Object(m))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
