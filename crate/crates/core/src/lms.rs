//! Lexically-misleading scores and the compositionality-sensitivity subsets
//! built from them.
//!
//! The score of an example is the highest probability the lexical regression
//! assigns to any label other than the gold one. `CS_λ` keeps the examples
//! whose score is at least `λ`.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bowreg::Scorer;
use crate::corpus::{line_pair_id, NliExample};
use crate::error::{Error, Result};
use crate::label::{Label, Probs};

/// Default λ grid.
pub const DEFAULT_LAMBDAS: [f64; 3] = [0.5, 0.6, 0.7];

#[derive(Debug, Clone, PartialEq)]
pub struct LmsRecord {
    pub pair_id: String,
    pub gold: Label,
    pub probs: Probs,
    pub lms: f64,
    pub misleading_label: Label,
}

impl LmsRecord {
    pub fn new(pair_id: impl Into<String>, gold: Label, probs: Probs) -> Self {
        let (lms, misleading_label) = misleading(probs, gold);
        LmsRecord {
            pair_id: pair_id.into(),
            gold,
            probs,
            lms,
            misleading_label,
        }
    }
}

/// Highest non-gold probability and its label (ties by label order).
pub fn misleading(probs: Probs, gold: Label) -> (f64, Label) {
    let mut best: Option<(f64, Label)> = None;
    for l in Label::ALL {
        if l == gold {
            continue;
        }
        let p = probs.get(l);
        if best.is_none_or(|(b, _)| p > b) {
            best = Some((p, l));
        }
    }
    best.expect("two non-gold labels")
}

/// Scores a stream of examples. Undetermined-gold examples get no record
/// and are counted in [`LmsStream::skipped`].
pub struct LmsStream<'a, I> {
    scorer: Scorer<'a>,
    inner: I,
    skipped: usize,
}

impl<I> LmsStream<'_, I> {
    pub fn skipped(&self) -> usize {
        self.skipped
    }
}

impl<'a, I> Iterator for LmsStream<'a, I>
where
    I: Iterator<Item = Result<NliExample>>,
{
    type Item = Result<LmsRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let ex = match self.inner.next()? {
                Ok(ex) => ex,
                Err(e) => return Some(Err(e)),
            };
            match ex.gold {
                Some(gold) => {
                    let probs = self.scorer.predict_proba(&ex);
                    return Some(Ok(LmsRecord::new(ex.pair_id, gold, probs)));
                }
                None => self.skipped += 1,
            }
        }
    }
}

pub fn compute_lms<'a, I>(scorer: Scorer<'a>, corpus: I) -> LmsStream<'a, I::IntoIter>
where
    I: IntoIterator<Item = Result<NliExample>>,
{
    LmsStream {
        scorer,
        inner: corpus.into_iter(),
        skipped: 0,
    }
}

/// Provenance of a subset: the model and corpus it was computed from.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceFingerprint {
    pub model: String,
    pub corpus: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsSubset {
    pub lambda: f64,
    pub member_ids: Vec<String>,
    pub source: SourceFingerprint,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(Error::Invalid(format!("lambda {lambda} outside [0, 1]")))
    }
}

/// Ids of records with `lms >= lambda`, in input order.
pub fn subset_cs<'r>(
    records: impl IntoIterator<Item = &'r LmsRecord>,
    lambda: f64,
    source: SourceFingerprint,
) -> Result<CsSubset> {
    check_lambda(lambda)?;
    let member_ids = records
        .into_iter()
        .filter(|r| r.lms >= lambda)
        .map(|r| r.pair_id.clone())
        .collect();
    Ok(CsSubset {
        lambda,
        member_ids,
        source,
    })
}

#[derive(Serialize, Deserialize)]
struct LmsLine {
    #[serde(rename = "pairID")]
    pair_id: String,
    gold_label: Label,
    probs: [f64; 3],
    lms: f64,
}

pub fn write_lms<'r, W: Write>(mut w: W, records: impl IntoIterator<Item = &'r LmsRecord>) -> Result<()> {
    for r in records {
        let line = LmsLine {
            pair_id: r.pair_id.clone(),
            gold_label: r.gold,
            probs: r.probs.0,
            lms: r.lms,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_lms<R: BufRead>(r: R) -> Result<Vec<LmsRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: LmsLine = serde_json::from_str(&line).map_err(|e| Error::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        let rec = LmsRecord::new(l.pair_id, l.gold_label, Probs(l.probs));
        if (rec.lms - l.lms).abs() > 1e-12 {
            return Err(Error::Malformed {
                line: i + 1,
                message: format!("stored lms {} disagrees with probabilities ({})", l.lms, rec.lms),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_lms(path: impl AsRef<Path>) -> Result<Vec<LmsRecord>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_lms(BufReader::new(f))
}

/// Id-list format: `# lambda\t<λ>`, `# model\t<fp>\tcorpus\t<fp>`, then one
/// pair id per line.
pub fn write_subset_ids<W: Write>(mut w: W, subset: &CsSubset) -> Result<()> {
    writeln!(w, "# lambda\t{}", subset.lambda)?;
    writeln!(
        w,
        "# model\t{}\tcorpus\t{}",
        or_dash(&subset.source.model),
        or_dash(&subset.source.corpus)
    )?;
    for id in &subset.member_ids {
        writeln!(w, "{id}")?;
    }
    Ok(())
}

fn or_dash(s: &str) -> &str {
    if s.is_empty() {
        "-"
    } else {
        s
    }
}

pub fn read_subset_ids<R: BufRead>(r: R) -> Result<CsSubset> {
    let mut lines = r.lines();
    let mut next = |n: usize| -> Result<String> {
        lines.next().transpose()?.ok_or_else(|| Error::Malformed {
            line: n,
            message: "truncated subset header".into(),
        })
    };
    let l1 = next(1)?;
    let lambda: f64 = l1
        .strip_prefix("# lambda\t")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::Malformed {
            line: 1,
            message: "expected '# lambda\\t<value>'".into(),
        })?;
    check_lambda(lambda)?;
    let l2 = next(2)?;
    let cols: Vec<&str> = l2.split('\t').collect();
    let source = match cols.as_slice() {
        ["# model", m, "corpus", c] => SourceFingerprint {
            model: undash(m),
            corpus: undash(c),
        },
        _ => {
            return Err(Error::Malformed {
                line: 2,
                message: "expected '# model\\t<fp>\\tcorpus\\t<fp>'".into(),
            })
        }
    };
    let mut member_ids = Vec::new();
    for l in lines {
        let l = l?;
        if !l.is_empty() {
            member_ids.push(l);
        }
    }
    Ok(CsSubset {
        lambda,
        member_ids,
        source,
    })
}

fn undash(s: &str) -> String {
    if s == "-" {
        String::new()
    } else {
        s.to_string()
    }
}

pub fn load_subset_ids(path: impl AsRef<Path>) -> Result<CsSubset> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_subset_ids(BufReader::new(f))
}

/// Copies the lines of `source` (an NLI JSONL file) whose pair id is in the
/// subset, byte for byte. Returns the number of lines written.
pub fn export_subset_jsonl<R: BufRead, W: Write>(source: R, mut out: W, subset: &CsSubset) -> Result<usize> {
    let wanted: HashSet<&str> = subset.member_ids.iter().map(String::as_str).collect();
    let mut n = 0;
    let mut reader = source;
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let text = String::from_utf8_lossy(&buf);
        if text.trim().is_empty() {
            continue;
        }
        let id = match line_pair_id(&text, line_no) {
            Ok(id) => id,
            Err(_) => continue,
        };
        if wanted.contains(id.as_str()) {
            out.write_all(&buf)?;
            if !buf.ends_with(b"\n") {
                out.write_all(b"\n")?;
            }
            n += 1;
        }
    }
    Ok(n)
}

/// Counts per LMS decile; bucket `k` holds `floor(10·lms) = k`, with
/// `lms = 1` in the last bucket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmsHistogram {
    pub buckets: [usize; 10],
    pub total: usize,
}

pub fn histogram<'r>(records: impl IntoIterator<Item = &'r LmsRecord>) -> LmsHistogram {
    let mut h = LmsHistogram {
        buckets: [0; 10],
        total: 0,
    };
    for r in records {
        let k = ((r.lms * 10.0).floor() as usize).min(9);
        h.buckets[k] += 1;
        h.total += 1;
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, gold: Label, p: [f64; 3]) -> LmsRecord {
        LmsRecord::new(id, gold, Probs(p))
    }

    #[test]
    fn definition_cases() {
        let r = rec("a", Label::Entailment, [1.0, 0.0, 0.0]);
        assert_eq!(r.lms, 0.0);
        let r = rec("b", Label::Entailment, [0.1, 0.7, 0.2]);
        assert_eq!(r.lms, 0.7);
        assert_eq!(r.misleading_label, Label::Contradiction);
        let r = rec("c", Label::Contradiction, [1.0 / 3.0; 3]);
        assert_eq!(r.lms, 1.0 / 3.0);
        assert_eq!(r.misleading_label, Label::Entailment);
    }

    #[test]
    fn subset_boundaries() {
        let rs = vec![
            rec("a", Label::Entailment, [0.8, 0.2, 0.0]),
            rec("b", Label::Entailment, [0.4, 0.6, 0.0]),
            rec("c", Label::Entailment, [0.2, 0.0, 0.8]),
        ];
        let s = subset_cs(&rs, 0.5, SourceFingerprint::default()).unwrap();
        assert_eq!(s.member_ids, vec!["b", "c"]);
        assert_eq!(subset_cs(&rs, 0.0, SourceFingerprint::default()).unwrap().member_ids.len(), 3);
        assert!(subset_cs(&rs, 0.81, SourceFingerprint::default()).unwrap().member_ids.is_empty());
        assert!(subset_cs(&rs, 1.5, SourceFingerprint::default()).is_err());
        assert!(subset_cs(&rs, -0.1, SourceFingerprint::default()).is_err());
    }

    #[test]
    fn lms_jsonl_round_trip() {
        let rs = vec![
            rec("a", Label::Neutral, [0.123456789012345, 0.5, 0.376543210987655]),
            rec("b", Label::Entailment, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
        ];
        let mut buf = Vec::new();
        write_lms(&mut buf, &rs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(r#"{"pairID":"a","gold_label":"neutral","probs":["#));
        let back = read_lms(buf.as_slice()).unwrap();
        for (x, y) in rs.iter().zip(&back) {
            assert_eq!(x.pair_id, y.pair_id);
            for c in 0..3 {
                assert!((x.probs.0[c] - y.probs.0[c]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn id_list_round_trip() {
        let s = CsSubset {
            lambda: 0.7,
            member_ids: vec!["x".into(), "y".into()],
            source: SourceFingerprint {
                model: "m1".into(),
                corpus: String::new(),
            },
        };
        let mut buf = Vec::new();
        write_subset_ids(&mut buf, &s).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("# lambda\t0.7\n# model\tm1\tcorpus\t-\n"));
        assert_eq!(read_subset_ids(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn jsonl_export_copies_bytes() {
        let src = "{\"pairID\": \"a\",  \"x\": 1}\n{\"pairID\":\"b\"}\n{\"no\":\"id\"}\n";
        let s = CsSubset {
            lambda: 0.5,
            member_ids: vec!["a".into(), "L3".into()],
            source: SourceFingerprint::default(),
        };
        let mut out = Vec::new();
        assert_eq!(export_subset_jsonl(src.as_bytes(), &mut out, &s).unwrap(), 2);
        assert_eq!(String::from_utf8(out).unwrap(), "{\"pairID\": \"a\",  \"x\": 1}\n{\"no\":\"id\"}\n");
    }

    #[test]
    fn histogram_counts() {
        let rs = vec![
            rec("a", Label::Entailment, [1.0, 0.0, 0.0]),
            rec("b", Label::Entailment, [0.0, 1.0, 0.0]),
            rec("c", Label::Entailment, [0.3, 0.35, 0.35]),
        ];
        let h = histogram(&rs);
        assert_eq!(h.total, 3);
        assert_eq!(h.buckets[0], 1);
        assert_eq!(h.buckets[9], 1);
        assert_eq!(h.buckets[3], 1);
    }
}
