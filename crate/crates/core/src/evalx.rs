//! Scoring of external model predictions on whole-dev, `CS_λ` and
//! adversarial sets, plus the majority-vote and annotator baselines.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::NliExample;
use crate::error::{Error, Result};
use crate::label::{Label, Probs};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: Label,
    pub probs: Option<Probs>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub model_name: String,
    pub predictions: HashMap<String, Prediction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionFormat {
    Tsv,
    Jsonl,
}

impl PredictionFormat {
    /// `.jsonl`/`.json` → JSONL, anything else TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => PredictionFormat::Jsonl,
            _ => PredictionFormat::Tsv,
        }
    }
}

#[derive(Deserialize)]
struct PredLine {
    #[serde(rename = "pairID")]
    pair_id: String,
    label: String,
    probs: Option<[f64; 3]>,
}

fn check_probs(p: [f64; 3], line: usize) -> Result<Probs> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::Malformed {
            line,
            message: format!("probabilities {p:?} do not form a distribution (sum {sum})"),
        });
    }
    Ok(Probs(p))
}

/// Reads predictions: TSV rows `pairID<TAB>label[<TAB>pE<TAB>pC<TAB>pN]`
/// (an optional header row starting with `pairID` is skipped) or JSONL
/// objects `{"pairID", "label", "probs"?}`.
pub fn read_predictions<R: BufRead>(r: R, format: PredictionFormat, model_name: &str) -> Result<PredictionSet> {
    let mut predictions = HashMap::new();
    let mut dups = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let ln = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |m: String| Error::Malformed { line: ln, message: m };
        let (id, label, probs) = match format {
            PredictionFormat::Tsv => {
                let cols: Vec<&str> = line.split('\t').collect();
                if ln == 1 && cols[0] == "pairID" {
                    continue;
                }
                let probs = match cols.len() {
                    2 => None,
                    5 => {
                        let mut p = [0.0; 3];
                        for (k, c) in cols[2..].iter().enumerate() {
                            p[k] = c.trim().parse().map_err(|_| malformed(format!("bad probability {c:?}")))?;
                        }
                        Some(p)
                    }
                    n => return Err(malformed(format!("expected 2 or 5 columns, found {n}"))),
                };
                (cols[0].to_string(), cols[1].to_string(), probs)
            }
            PredictionFormat::Jsonl => {
                let p: PredLine = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
                (p.pair_id, p.label, p.probs)
            }
        };
        let label: Label = label.parse().map_err(|e: Error| malformed(e.to_string()))?;
        let probs = probs.map(|p| check_probs(p, ln)).transpose()?;
        if predictions.insert(id.clone(), Prediction { label, probs }).is_some() {
            dups.push(id);
        }
    }
    if !dups.is_empty() {
        return Err(Error::Invalid(format!("duplicate pairIDs: {}", dups.join(", "))));
    }
    Ok(PredictionSet {
        model_name: model_name.to_string(),
        predictions,
    })
}

pub fn load_predictions(path: impl AsRef<Path>, format: Option<PredictionFormat>) -> Result<PredictionSet> {
    let path = path.as_ref();
    let format = format.unwrap_or_else(|| PredictionFormat::from_path(path));
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_predictions(BufReader::new(f), format, &name)
}

/// Gold labels of an evaluation set, in set order.
pub type EvalSet = Vec<(String, Label)>;

/// Determined-gold examples of a corpus as an evaluation set.
pub fn eval_set_from<'a>(examples: impl IntoIterator<Item = &'a NliExample>) -> EvalSet {
    examples
        .into_iter()
        .filter_map(|e| e.gold.map(|g| (e.pair_id.clone(), g)))
        .collect()
}

/// Restricts `base` to `ids`, preserving the order of `ids`. Ids without a
/// gold label in `base` are dropped.
pub fn restrict(base: &EvalSet, ids: &[String]) -> EvalSet {
    let gold: HashMap<&str, Label> = base.iter().map(|(id, g)| (id.as_str(), *g)).collect();
    ids.iter()
        .filter_map(|id| gold.get(id.as_str()).map(|g| (id.clone(), *g)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    /// Size of the evaluation set.
    pub n: usize,
    /// Ids with a prediction.
    pub covered: usize,
    pub coverage: f64,
    pub correct: usize,
    /// Accuracy over covered ids.
    pub accuracy: f64,
    /// Counts of predicted labels over covered ids, (E, C, N).
    pub predicted: [usize; 3],
}

impl EvalResult {
    /// Predicted-label shares over covered ids.
    pub fn distribution(&self) -> [f64; 3] {
        let c = self.covered.max(1) as f64;
        self.predicted.map(|k| k as f64 / c)
    }
}

/// Scores predictions on an evaluation set. Missing ids reduce coverage; in
/// strict mode they are an error.
pub fn evaluate(preds: &PredictionSet, eval_set: &[(String, Label)], strict: bool) -> Result<EvalResult> {
    if eval_set.is_empty() {
        return Err(Error::Invalid("empty evaluation set".into()));
    }
    let mut covered = 0;
    let mut correct = 0;
    let mut predicted = [0usize; 3];
    let mut missing = Vec::new();
    for (id, gold) in eval_set {
        match preds.predictions.get(id) {
            Some(p) => {
                covered += 1;
                predicted[p.label.index()] += 1;
                if p.label == *gold {
                    correct += 1;
                }
            }
            None => missing.push(id.as_str()),
        }
    }
    if covered == 0 {
        return Err(Error::Invalid(format!(
            "predictions of {} cover none of the {} evaluation ids",
            preds.model_name,
            eval_set.len()
        )));
    }
    if !missing.is_empty() {
        if strict {
            let head: Vec<&str> = missing.iter().take(10).copied().collect();
            return Err(Error::Invalid(format!(
                "{} missing predictions for {}: {}{}",
                missing.len(),
                preds.model_name,
                head.join(", "),
                if missing.len() > 10 { ", ..." } else { "" }
            )));
        }
        log::warn!(
            "{}: {} of {} evaluation ids have no prediction",
            preds.model_name,
            missing.len(),
            eval_set.len()
        );
    }
    Ok(EvalResult {
        n: eval_set.len(),
        covered,
        coverage: covered as f64 / eval_set.len() as f64,
        correct,
        accuracy: correct as f64 / covered as f64,
        predicted,
    })
}

/// Constant classifier predicting the most frequent gold label of the set
/// (ties by label order). Returns its predictions so it can be scored like
/// any other model.
pub fn majority_vote_baseline(eval_set: &[(String, Label)]) -> Result<(f64, Label)> {
    if eval_set.is_empty() {
        return Err(Error::Invalid("empty evaluation set".into()));
    }
    let mut counts = [0usize; 3];
    for (_, g) in eval_set {
        counts[g.index()] += 1;
    }
    let mut best = 0;
    for i in 1..3 {
        if counts[i] > counts[best] {
            best = i;
        }
    }
    Ok((counts[best] as f64 / eval_set.len() as f64, Label::ALL[best]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HumanMode {
    /// Mean over annotator slots of each slot's accuracy.
    Average,
    /// One fixed slot (0-based); examples lacking it are skipped.
    Slot(usize),
    /// One slot drawn per example from a seeded stream.
    Seeded(u64),
}

impl std::str::FromStr for HumanMode {
    type Err = Error;

    /// `average`, `slot:K` or `seeded:SEED`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Invalid(format!("bad human mode {s:?}; expected average, slot:K or seeded:SEED"));
        match s.split_once(':') {
            None if s == "average" => Ok(HumanMode::Average),
            Some(("slot", k)) => k.parse().map(HumanMode::Slot).map_err(|_| bad()),
            Some(("seeded", k)) => k.parse().map(HumanMode::Seeded).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

/// Annotator agreement with gold. `votes` counts the determined annotator
/// labels that entered the estimate, (E, C, N); `counted` includes
/// undetermined votes.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanEstimate {
    pub accuracy: f64,
    pub votes: [usize; 3],
    pub counted: usize,
    pub examples: usize,
}

/// Accuracy of individual annotator labels against gold over `eval_set`.
/// Undetermined annotator votes count as wrong.
pub fn human_estimate(corpus: &[NliExample], eval_set: &[(String, Label)], mode: HumanMode) -> Result<HumanEstimate> {
    let by_id: HashMap<&str, &NliExample> = corpus.iter().map(|e| (e.pair_id.as_str(), e)).collect();
    let rows: Vec<(&[Option<Label>], Label, &str)> = eval_set
        .iter()
        .filter_map(|(id, g)| by_id.get(id.as_str()).map(|e| (e.annotator_labels.as_slice(), *g, id.as_str())))
        .filter(|(a, _, _)| !a.is_empty())
        .collect();
    if rows.is_empty() {
        return Err(Error::Invalid("no annotator labels in the evaluation set".into()));
    }
    let mut est = HumanEstimate {
        accuracy: 0.0,
        votes: [0; 3],
        counted: 0,
        examples: rows.len(),
    };
    let mut tally = |v: Option<Label>, g: Label| -> bool {
        est.counted += 1;
        if let Some(l) = v {
            est.votes[l.index()] += 1;
        }
        v == Some(g)
    };
    match mode {
        HumanMode::Average | HumanMode::Slot(_) => {
            let slots = match mode {
                HumanMode::Slot(k) => k..k + 1,
                _ => 0..rows.iter().map(|(a, _, _)| a.len()).max().unwrap_or(0),
            };
            let mut accs = Vec::new();
            for k in slots {
                let mut n = 0usize;
                let mut ok = 0usize;
                for (a, g, _) in &rows {
                    if let Some(v) = a.get(k) {
                        n += 1;
                        ok += tally(*v, *g) as usize;
                    }
                }
                if n > 0 {
                    accs.push(ok as f64 / n as f64);
                }
            }
            if accs.is_empty() {
                return Err(Error::Invalid(format!("no example has annotator slot {mode:?}")));
            }
            est.accuracy = accs.iter().sum::<f64>() / accs.len() as f64;
        }
        HumanMode::Seeded(seed) => {
            let mut ok = 0usize;
            for (a, g, id) in &rows {
                let mut r = rng::stream(seed, &[b"human", id.as_bytes()]);
                let k = rng::below(&mut r, a.len() as u64) as usize;
                ok += tally(a[k], *g) as usize;
            }
            est.accuracy = ok as f64 / rows.len() as f64;
        }
    }
    Ok(est)
}

/// One report row. Accuracy and coverage are fractions; `pct` holds the
/// predicted-label distribution in percent, (E, C, N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub model: String,
    pub set: String,
    pub n: usize,
    pub coverage: f64,
    pub accuracy: f64,
    pub pct: [f64; 3],
}

impl EvalRow {
    pub fn from_result(model: &str, set: &str, r: &EvalResult) -> Self {
        let c = r.covered as f64;
        EvalRow {
            model: model.to_string(),
            set: set.to_string(),
            n: r.n,
            coverage: r.coverage,
            accuracy: r.accuracy,
            pct: r.predicted.map(|k| 100.0 * k as f64 / c),
        }
    }
}

impl EvalRow {
    /// Row for the constant majority-label classifier.
    pub fn majority(set: &str, eval_set: &[(String, Label)]) -> Result<Self> {
        let (accuracy, label) = majority_vote_baseline(eval_set)?;
        let mut pct = [0.0; 3];
        pct[label.index()] = 100.0;
        Ok(EvalRow {
            model: "majority".into(),
            set: set.to_string(),
            n: eval_set.len(),
            coverage: 1.0,
            accuracy,
            pct,
        })
    }

    /// Row for an annotator estimate; `pct` is the share of counted votes.
    pub fn human(set: &str, n: usize, est: &HumanEstimate) -> Self {
        let c = est.counted.max(1) as f64;
        EvalRow {
            model: "human".into(),
            set: set.to_string(),
            n,
            coverage: est.examples as f64 / n.max(1) as f64,
            accuracy: est.accuracy,
            pct: est.votes.map(|k| 100.0 * k as f64 / c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ReportMeta {
    pub lambdas: Vec<f64>,
    pub fingerprints: BTreeMap<String, String>,
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub meta: ReportMeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "json" => Ok(ReportFormat::Json),
            o => Err(Error::Invalid(format!("unknown report format {o:?}"))),
        }
    }
}

pub const REPORT_COLUMNS: [&str; 8] = ["model", "set", "n", "coverage", "accuracy", "pct_E", "pct_C", "pct_N"];

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cells(r: &EvalRow) -> [String; 8] {
    [
        r.model.clone(),
        r.set.clone(),
        r.n.to_string(),
        r.coverage.to_string(),
        r.accuracy.to_string(),
        r.pct[0].to_string(),
        r.pct[1].to_string(),
        r.pct[2].to_string(),
    ]
}

/// Writes a report. Numbers use shortest round-trip formatting, so CSV and
/// markdown both parse back to identical values.
pub fn write_report<W: Write>(mut w: W, report: &EvalReport, format: ReportFormat) -> Result<()> {
    match format {
        ReportFormat::Csv => {
            writeln!(w, "{}", REPORT_COLUMNS.join(","))?;
            for r in &report.rows {
                let c = cells(r);
                let c: Vec<String> = c.iter().map(|x| csv_field(x)).collect();
                writeln!(w, "{}", c.join(","))?;
            }
        }
        ReportFormat::Markdown => {
            writeln!(w, "| {} |", REPORT_COLUMNS.join(" | "))?;
            writeln!(w, "|{}", "---|".repeat(REPORT_COLUMNS.len()))?;
            for r in &report.rows {
                let c = cells(r);
                let c: Vec<String> = c.iter().map(|x| x.replace('|', "\\|")).collect();
                writeln!(w, "| {} |", c.join(" | "))?;
            }
        }
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut w, report)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn split_csv(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match (c, quoted) {
            ('"', true) if chars.peek() == Some(&'"') => {
                cur.push('"');
                chars.next();
            }
            ('"', _) => quoted = !quoted,
            (',', false) => out.push(std::mem::take(&mut cur)),
            (c, _) => cur.push(c),
        }
    }
    out.push(cur);
    out
}

fn split_markdown(line: &str) -> Vec<String> {
    let inner = line.trim().trim_start_matches('|').trim_end_matches('|');
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = inner.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' if chars.peek() == Some(&'|') => {
                cur.push('|');
                chars.next();
            }
            '|' => out.push(std::mem::take(&mut cur).trim().to_string()),
            c => cur.push(c),
        }
    }
    out.push(cur.trim().to_string());
    out
}

fn row_from(cells: &[String], line: usize) -> Result<EvalRow> {
    let bad = |m: &str| Error::Malformed {
        line,
        message: m.to_string(),
    };
    if cells.len() != 8 {
        return Err(bad("expected 8 report columns"));
    }
    let f = |i: usize| cells[i].parse::<f64>().map_err(|_| bad("bad number"));
    Ok(EvalRow {
        model: cells[0].clone(),
        set: cells[1].clone(),
        n: cells[2].parse().map_err(|_| bad("bad n"))?,
        coverage: f(3)?,
        accuracy: f(4)?,
        pct: [f(5)?, f(6)?, f(7)?],
    })
}

/// Parses a CSV or markdown report back into rows.
pub fn read_report<R: BufRead>(r: R, format: ReportFormat) -> Result<EvalReport> {
    if format == ReportFormat::Json {
        return Ok(serde_json::from_reader(r)?);
    }
    let mut rows = Vec::new();
    let skip = if format == ReportFormat::Markdown { 2 } else { 1 };
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if i < skip || line.trim().is_empty() {
            continue;
        }
        let cells = match format {
            ReportFormat::Csv => split_csv(&line),
            _ => split_markdown(&line),
        };
        rows.push(row_from(&cells, i + 1)?);
    }
    Ok(EvalReport {
        rows,
        meta: ReportMeta::default(),
    })
}
