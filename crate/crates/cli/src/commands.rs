use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use compsense_core::advgen::{self, AmodMap};
use compsense_core::bowreg::{self, Scorer};
use compsense_core::conllu;
use compsense_core::corpus::{self, NliReader};
use compsense_core::evalx::{self, EvalReport, EvalRow, EvalSet, HumanMode, ReportFormat, ReportMeta};
use compsense_core::lexfeat::{self, FeatureOptions, Vocabulary};
use compsense_core::lms::{self, CsSubset, LmsRecord, SourceFingerprint};
use compsense_core::manifest::{self, RunManifest};
use compsense_core::{Config, ModelFormat, NliExample, Rule, SoftmaxModel, TrainConfig};

use crate::{Cli, Command, EvaluateArgs, TrainArgs};

/// Invalid flag combinations detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

struct Ctx {
    config: Config,
    has_config: bool,
    argv: Vec<String>,
}

impl Ctx {
    fn manifest(&self) -> RunManifest {
        let mut m = RunManifest::new(self.argv.clone());
        m.config = Some(serde_json::to_value(&self.config).expect("config serializes"));
        m
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => Config::default(),
    };
    let ctx = Ctx {
        config,
        has_config: cli.config.is_some(),
        argv: std::env::args().collect(),
    };
    match cli.command {
        Command::IngestCheck { input, strict } => ingest_check(&input, strict),
        Command::BuildVocab {
            train,
            out,
            min_count,
            hash_bits,
            no_lowercase,
        } => {
            let mut f = ctx.config.features.clone();
            if let Some(m) = min_count {
                f.min_count = m;
            }
            if hash_bits.is_some() {
                f.hash_bits = hash_bits;
            }
            if no_lowercase {
                f.lowercase = false;
            }
            build_vocab(&ctx, &train, &out, f.min_count, f.hash_bits, f.options()).map(drop)
        }
        Command::TrainBow(args) => train_bow(&ctx, args),
        Command::ScoreLms {
            model,
            vocab,
            input,
            out,
        } => score_lms(&ctx, &model, &vocab, &input, &out).map(drop),
        Command::Subset {
            lms,
            lambdas,
            out,
            out_dir,
            export_from,
        } => subset(&ctx, &lms, lambdas, out, out_dir, export_from.as_deref()),
        Command::GenAdv {
            rule,
            corpus,
            conllu,
            amod_map,
            limit,
            out,
        } => gen_adv(&ctx, rule, &corpus, &conllu, amod_map.as_deref(), limit, &out),
        Command::MineAmod { conllu, out } => mine_amod(&ctx, &conllu, &out),
        Command::Shuffle { input, out, seed } => shuffle(&ctx, &input, &out, seed),
        Command::Evaluate(args) => evaluate(&ctx, args),
        Command::Report { input, out, format } => report(&input, out.as_deref(), &format),
        Command::Pipeline { out_dir } => pipeline(&ctx, out_dir),
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{v}");
}

fn ingest_check(input: &Path, strict: bool) -> Result<()> {
    let mut reader = corpus::load_nli_jsonl(input, strict)?;
    for ex in reader.by_ref() {
        ex.with_context(|| format!("reading {}", input.display()))?;
    }
    print_json(&serde_json::to_value(reader.stats())?);
    Ok(())
}

fn open_all(paths: &[PathBuf]) -> compsense_core::Result<Vec<NliReader<BufReader<File>>>> {
    paths.iter().map(|p| corpus::load_nli_jsonl(p, false)).collect()
}

fn build_vocab(
    ctx: &Ctx,
    train: &[PathBuf],
    out: &Path,
    min_count: u32,
    hash_bits: Option<u32>,
    opts: FeatureOptions,
) -> Result<Vocabulary> {
    let vocab = match hash_bits {
        Some(bits) => Vocabulary::hashed(bits, opts)?,
        None => lexfeat::build_vocab(open_all(train)?.into_iter().flatten(), min_count, opts)?,
    };
    manifest::write_atomic_with(out, |w| vocab.write_to(w))?;
    let mut m = ctx.manifest();
    for p in train {
        m.add_input(p)?;
    }
    m.fingerprints.insert("vocab".into(), vocab.fingerprint().to_string());
    m.add_output(out)?;
    m.write_beside(out)?;
    log::info!("vocabulary: {} features", vocab.dim());
    Ok(vocab)
}

fn write_model(model: &SoftmaxModel, out: &Path, format: ModelFormat) -> Result<()> {
    let bytes = match format {
        ModelFormat::Binary => model.to_binary(),
        ModelFormat::Text => model.to_text().into_bytes(),
    };
    manifest::write_atomic(out, &bytes)?;
    Ok(())
}

fn train_model(
    ctx: &Ctx,
    train: &[PathBuf],
    vocab_path: &Path,
    vocab: &Vocabulary,
    cfg: &TrainConfig,
    out: &Path,
    format: ModelFormat,
) -> Result<SoftmaxModel> {
    let data = || -> compsense_core::Result<_> {
        Ok(open_all(train)?.into_iter().flatten().filter_map(|r| match r {
            Ok(ex) => ex.gold.map(|g| Ok((vocab.featurize(&ex), g))),
            Err(e) => Some(Err(e)),
        }))
    };
    let (mut model, report) = bowreg::train(data, vocab, cfg)?;
    model.set_provenance(serde_json::to_string(cfg)?);
    for (i, l) in report.epoch_losses.iter().enumerate() {
        log::info!("epoch {}: loss {l}", i + 1);
    }
    write_model(&model, out, format)?;
    let mut m = ctx.manifest();
    for p in train {
        m.add_input(p)?;
    }
    m.add_input(vocab_path)?;
    m.seeds.insert("train".into(), cfg.seed);
    m.fingerprints.insert("vocab".into(), vocab.fingerprint().to_string());
    m.fingerprints.insert("model".into(), model.fingerprint());
    m.add_output(out)?;
    m.write_beside(out)?;
    Ok(model)
}

fn train_bow(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let mut cfg = ctx.config.train.clone();
    if let Some(v) = a.l2 {
        cfg.l2 = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.lr_decay {
        cfg.lr_decay = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if a.no_bias {
        cfg.bias = false;
    }
    let format = a.format.unwrap_or(ctx.config.model.format);
    let vocab = Vocabulary::load(&a.vocab)?;
    train_model(ctx, &a.train, &a.vocab, &vocab, &cfg, &a.out, format).map(drop)
}

fn score_lms(ctx: &Ctx, model_path: &Path, vocab_path: &Path, input: &Path, out: &Path) -> Result<Vec<LmsRecord>> {
    let vocab = Vocabulary::load(vocab_path)?;
    let model = bowreg::load_model(model_path, Some(&vocab))?;
    let scorer = Scorer::new(&model, &vocab)?;
    let mut stream = lms::compute_lms(scorer, corpus::load_nli_jsonl(input, false)?);
    let records: Vec<LmsRecord> = stream.by_ref().collect::<compsense_core::Result<_>>()?;
    log::info!("scored {} examples, skipped {} undetermined", records.len(), stream.skipped());
    manifest::write_atomic_with(out, |w| lms::write_lms(w, &records))?;
    let mut m = ctx.manifest();
    m.add_input(model_path)?;
    m.add_input(vocab_path)?;
    m.add_input(input)?;
    m.fingerprints.insert("model".into(), model.fingerprint());
    m.fingerprints.insert("corpus".into(), manifest::file_fingerprint(input)?);
    m.add_output(out)?;
    m.write_beside(out)?;
    print_json(&serde_json::to_value(lms::histogram(&records))?);
    Ok(records)
}

/// `cs_0.7`, the set name of a λ subset.
fn subset_name(lambda: f64) -> String {
    format!("cs_{lambda}")
}

fn write_subset(ctx: &Ctx, lms_path: &Path, subset: &CsSubset, out: &Path, export_from: Option<&Path>) -> Result<()> {
    manifest::write_atomic_with(out, |w| lms::write_subset_ids(w, subset))?;
    let mut m = ctx.manifest();
    m.add_input(lms_path)?;
    m.fingerprints.insert("model".into(), subset.source.model.clone());
    m.fingerprints.insert("corpus".into(), subset.source.corpus.clone());
    m.add_output(out)?;
    if let Some(src) = export_from {
        let jsonl = out.with_extension("jsonl");
        let reader = BufReader::new(File::open(src).with_context(|| format!("opening {}", src.display()))?);
        manifest::write_atomic_with(&jsonl, |w| lms::export_subset_jsonl(reader, w, subset).map(drop))?;
        m.add_input(src)?;
        m.add_output(&jsonl)?;
    }
    m.write_beside(out)?;
    Ok(())
}

fn source_of(lms_path: &Path) -> SourceFingerprint {
    let mp = manifest::manifest_path(lms_path);
    match RunManifest::load(&mp) {
        Ok(m) => SourceFingerprint {
            model: m.fingerprints.get("model").cloned().unwrap_or_default(),
            corpus: m.fingerprints.get("corpus").cloned().unwrap_or_default(),
        },
        Err(_) => {
            log::warn!("no readable manifest beside {}; subset provenance left blank", lms_path.display());
            SourceFingerprint::default()
        }
    }
}

fn subset(
    ctx: &Ctx,
    lms_path: &Path,
    lambdas: Vec<f64>,
    out: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    export_from: Option<&Path>,
) -> Result<()> {
    let lambdas = if lambdas.is_empty() {
        ctx.config.lms.lambdas.clone()
    } else {
        lambdas
    };
    let targets: Vec<(f64, PathBuf)> = match (out, out_dir) {
        (Some(o), None) if lambdas.len() == 1 => vec![(lambdas[0], o)],
        (Some(_), None) => return Err(usage("--out takes exactly one --lambda; use --out-dir for several")),
        (None, Some(d)) => {
            std::fs::create_dir_all(&d)?;
            lambdas.iter().map(|l| (*l, d.join(format!("{}.ids", subset_name(*l))))).collect()
        }
        _ => return Err(usage("give --out or --out-dir")),
    };
    let records = lms::load_lms(lms_path)?;
    let source = source_of(lms_path);
    let mut sizes = serde_json::Map::new();
    for (lambda, path) in targets {
        let s = lms::subset_cs(&records, lambda, source.clone())?;
        sizes.insert(subset_name(lambda), s.member_ids.len().into());
        write_subset(ctx, lms_path, &s, &path, export_from)?;
    }
    print_json(&sizes.into());
    Ok(())
}

fn gen_adv(
    ctx: &Ctx,
    rule: Rule,
    corpus_path: &Path,
    conllu_path: &Path,
    amod_map: Option<&Path>,
    limit: Option<usize>,
    out: &Path,
) -> Result<()> {
    let examples = corpus::read_corpus(corpus_path)?;
    let (trees, rejected) = conllu::read_conllu(conllu_path)?;
    for r in &rejected {
        log::warn!("{}: sentence {} rejected: {}", conllu_path.display(), r.ordinal, r.reason);
    }
    let map = match (rule, amod_map) {
        (Rule::SoSwap, _) => None,
        (Rule::AddAmod, Some(p)) => {
            let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
            Some(AmodMap::read_from(BufReader::new(f))?)
        }
        (Rule::AddAmod, None) => Some(advgen::mine_amod_map(&trees)),
    };
    let (pairs, report) = advgen::generate_set(rule, &examples, &trees, map.as_ref(), limit)?;
    manifest::write_atomic_with(out, |w| advgen::write_pairs(w, &pairs))?;
    let mut report_path = out.as_os_str().to_owned();
    report_path.push(".report.json");
    let report_path = PathBuf::from(report_path);
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    manifest::write_atomic(&report_path, text.as_bytes())?;
    let mut m = ctx.manifest();
    m.add_input(corpus_path)?;
    m.add_input(conllu_path)?;
    if let Some(p) = amod_map {
        m.add_input(p)?;
    }
    m.add_output(out)?;
    m.add_output(&report_path)?;
    m.write_beside(out)?;
    print_json(&serde_json::to_value(&report)?);
    Ok(())
}

fn mine_amod(ctx: &Ctx, paths: &[PathBuf], out: &Path) -> Result<()> {
    let mut trees = Vec::new();
    for p in paths {
        let (t, rejected) = conllu::read_conllu(p)?;
        for r in &rejected {
            log::warn!("{}: sentence {} rejected: {}", p.display(), r.ordinal, r.reason);
        }
        trees.extend(t);
    }
    let map = advgen::mine_amod_map(&trees);
    manifest::write_atomic_with(out, |w| map.write_to(w))?;
    let mut m = ctx.manifest();
    for p in paths {
        m.add_input(p)?;
    }
    m.add_output(out)?;
    m.write_beside(out)?;
    Ok(())
}

fn shuffle(ctx: &Ctx, input: &Path, out: &Path, seed: u64) -> Result<()> {
    let reader = corpus::load_nli_jsonl(input, true)?;
    manifest::write_atomic_with(out, |w| {
        for ex in reader {
            let s = corpus::shuffle_words(&ex?, seed);
            corpus::write_jsonl(&mut *w, [&s], Some("word_shuffle"))?;
        }
        Ok(())
    })?;
    let mut m = ctx.manifest();
    m.add_input(input)?;
    m.seeds.insert("shuffle".into(), seed);
    m.add_output(out)?;
    m.write_beside(out)?;
    Ok(())
}

/// A named evaluation set and, when available, the corpus carrying its
/// annotator labels.
struct NamedSet {
    name: String,
    gold: EvalSet,
    annotated: bool,
}

struct EvalOptions {
    baselines: bool,
    strict: bool,
    human_mode: HumanMode,
}

fn adv_set(path: &Path) -> Result<NamedSet> {
    let examples = corpus::read_corpus(path)?;
    Ok(NamedSet {
        name: stem(path),
        gold: evalx::eval_set_from(&examples),
        annotated: false,
    })
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn collect_rows(
    models: &[evalx::PredictionSet],
    corpus: &[NliExample],
    sets: &[NamedSet],
    opts: &EvalOptions,
) -> Result<Vec<EvalRow>> {
    let mut rows = Vec::new();
    for set in sets {
        if set.gold.is_empty() {
            log::warn!("set {} is empty; skipped", set.name);
            continue;
        }
        for p in models {
            let r = evalx::evaluate(p, &set.gold, opts.strict).with_context(|| format!("scoring {} on {}", p.model_name, set.name))?;
            rows.push(EvalRow::from_result(&p.model_name, &set.name, &r));
        }
        if opts.baselines {
            rows.push(EvalRow::majority(&set.name, &set.gold)?);
            if set.annotated {
                match evalx::human_estimate(corpus, &set.gold, opts.human_mode) {
                    Ok(est) => rows.push(EvalRow::human(&set.name, set.gold.len(), &est)),
                    Err(e) => log::warn!("no human row for {}: {e}", set.name),
                }
            }
        }
    }
    Ok(rows)
}

fn write_report_file(report: &EvalReport, out: &Path, format: ReportFormat) -> Result<()> {
    manifest::write_atomic_with(out, |w| evalx::write_report(w, report, format))?;
    Ok(())
}

fn evaluate(ctx: &Ctx, a: EvaluateArgs) -> Result<()> {
    let format: ReportFormat = a.format.parse().map_err(|e: compsense_core::Error| usage(e.to_string()))?;
    let ec = &ctx.config.evaluate;
    let opts = EvalOptions {
        baselines: a.baselines || ctx.has_config && ec.baselines,
        strict: a.strict || ec.strict,
        human_mode: a.human_mode.unwrap_or(ec.human_mode),
    };
    if a.preds.is_empty() && !opts.baselines {
        return Err(usage("nothing to evaluate: give --preds or --baselines"));
    }
    let corpus = corpus::read_corpus(&a.corpus)?;
    let whole = evalx::eval_set_from(&corpus);
    let mut sets = vec![NamedSet {
        name: stem(&a.corpus),
        gold: whole.clone(),
        annotated: true,
    }];
    let mut lambdas = Vec::new();
    let mut fingerprints = BTreeMap::new();
    for p in &a.subsets {
        let s = lms::load_subset_ids(p)?;
        lambdas.push(s.lambda);
        if !s.source.corpus.is_empty() {
            fingerprints.insert(format!("{}.corpus", subset_name(s.lambda)), s.source.corpus.clone());
        }
        if !s.source.model.is_empty() {
            fingerprints.insert(format!("{}.model", subset_name(s.lambda)), s.source.model.clone());
        }
        sets.push(NamedSet {
            name: subset_name(s.lambda),
            gold: evalx::restrict(&whole, &s.member_ids),
            annotated: true,
        });
    }
    for p in &a.adv {
        sets.push(adv_set(p)?);
    }
    let models = a
        .preds
        .iter()
        .map(|p| evalx::load_predictions(p, None))
        .collect::<compsense_core::Result<Vec<_>>>()?;
    let rows = collect_rows(&models, &corpus, &sets, &opts)?;
    let report = EvalReport {
        rows,
        meta: ReportMeta {
            lambdas,
            fingerprints,
            timestamp: None,
        },
    };
    write_report_file(&report, &a.out, format)?;
    let mut m = ctx.manifest();
    m.add_input(&a.corpus)?;
    for p in a.preds.iter().chain(&a.subsets).chain(&a.adv) {
        m.add_input(p)?;
    }
    m.add_output(&a.out)?;
    m.write_beside(&a.out)?;
    Ok(())
}

fn format_of(path: &Path) -> ReportFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => ReportFormat::Json,
        Some("md") => ReportFormat::Markdown,
        _ => ReportFormat::Csv,
    }
}

fn report(inputs: &[PathBuf], out: Option<&Path>, format: &str) -> Result<()> {
    let format: ReportFormat = format.parse().map_err(|e: compsense_core::Error| usage(e.to_string()))?;
    let mut merged = EvalReport::default();
    for p in inputs {
        let f = File::open(p).with_context(|| format!("opening {}", p.display()))?;
        let r = evalx::read_report(BufReader::new(f), format_of(p)).with_context(|| format!("reading {}", p.display()))?;
        merged.rows.extend(r.rows);
        merged.meta.lambdas.extend(r.meta.lambdas);
        merged.meta.fingerprints.extend(r.meta.fingerprints);
    }
    match out {
        Some(o) => write_report_file(&merged, o, format),
        None => {
            let mut stdout = std::io::stdout().lock();
            evalx::write_report(&mut stdout, &merged, format)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn pipeline(ctx: &Ctx, out_dir: Option<PathBuf>) -> Result<()> {
    let cfg = &ctx.config;
    let out_dir = out_dir
        .or_else(|| cfg.data.out_dir.clone())
        .ok_or_else(|| usage("pipeline needs --out-dir or data.out_dir"))?;
    if cfg.data.train.is_empty() {
        return Err(usage("pipeline needs data.train"));
    }
    let dev = cfg.data.dev.clone().ok_or_else(|| usage("pipeline needs data.dev"))?;
    std::fs::create_dir_all(&out_dir)?;

    let vocab_path = out_dir.join("vocab.voc");
    let f = &cfg.features;
    let vocab = build_vocab(ctx, &cfg.data.train, &vocab_path, f.min_count, f.hash_bits, f.options())?;
    let model_path = out_dir.join("model.bow");
    let model = train_model(ctx, &cfg.data.train, &vocab_path, &vocab, &cfg.train, &model_path, cfg.model.format)?;

    let lms_path = out_dir.join("lms.jsonl");
    let records = score_lms(ctx, &model_path, &vocab_path, &dev, &lms_path)?;
    let source = source_of(&lms_path);

    let corpus = corpus::read_corpus(&dev)?;
    let whole = evalx::eval_set_from(&corpus);
    let mut sets = vec![NamedSet {
        name: "dev".into(),
        gold: whole.clone(),
        annotated: true,
    }];
    for &lambda in &cfg.lms.lambdas {
        let s = lms::subset_cs(&records, lambda, source.clone())?;
        write_subset(ctx, &lms_path, &s, &out_dir.join(format!("{}.ids", subset_name(lambda))), None)?;
        sets.push(NamedSet {
            name: subset_name(lambda),
            gold: evalx::restrict(&whole, &s.member_ids),
            annotated: true,
        });
    }
    for p in &cfg.data.adv {
        sets.push(adv_set(p)?);
    }

    let scorer = Scorer::new(&model, &vocab)?;
    let mut bow = evalx::PredictionSet {
        model_name: "bow".into(),
        predictions: Default::default(),
    };
    let mut adv_examples = Vec::new();
    for p in &cfg.data.adv {
        adv_examples.extend(corpus::read_corpus(p)?);
    }
    for ex in corpus.iter().chain(&adv_examples) {
        let probs = scorer.predict_proba(ex);
        bow.predictions.insert(
            ex.pair_id.clone(),
            evalx::Prediction {
                label: probs.argmax(),
                probs: Some(probs),
            },
        );
    }
    let mut models = vec![bow];
    for p in &cfg.data.predictions {
        models.push(evalx::load_predictions(p, None)?);
    }
    let opts = EvalOptions {
        baselines: cfg.evaluate.baselines,
        strict: cfg.evaluate.strict,
        human_mode: cfg.evaluate.human_mode,
    };
    let rows = collect_rows(&models, &corpus, &sets, &opts)?;
    let mut fingerprints = BTreeMap::new();
    fingerprints.insert("vocab".into(), vocab.fingerprint().to_string());
    fingerprints.insert("model".into(), source.model.clone());
    fingerprints.insert("corpus".into(), source.corpus.clone());
    let report = EvalReport {
        rows,
        meta: ReportMeta {
            lambdas: cfg.lms.lambdas.clone(),
            fingerprints,
            timestamp: None,
        },
    };
    let report_path = out_dir.join("report.csv");
    write_report_file(&report, &report_path, ReportFormat::Csv)?;
    write_report_file(&report, &out_dir.join("report.json"), ReportFormat::Json)?;
    let mut m = ctx.manifest();
    for p in cfg.data.train.iter().chain([&dev]).chain(&cfg.data.predictions).chain(&cfg.data.adv) {
        m.add_input(p)?;
    }
    m.seeds.insert("train".into(), cfg.train.seed);
    m.fingerprints = report.meta.fingerprints.clone();
    m.add_output(&report_path)?;
    m.add_output(&out_dir.join("report.json"))?;
    m.write_beside(&report_path)?;
    Ok(())
}
