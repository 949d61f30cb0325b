//! `compsense` command-line entry point.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use compsense_core::{Error, HumanMode, ModelFormat, Rule};

#[derive(Debug, Parser)]
#[command(name = "compsense", version, about = "Compositionality-sensitivity analysis for NLI corpora")]
struct Cli {
    /// TOML configuration; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate an NLI JSONL file and print ingest counts.
    IngestCheck {
        #[arg(long)]
        input: PathBuf,
        /// Fail on the first malformed line.
        #[arg(long)]
        strict: bool,
    },
    /// Build the feature vocabulary from training corpora.
    BuildVocab {
        #[arg(long = "train", required = true)]
        train: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        min_count: Option<u32>,
        /// Hash keys into 2^BITS slots instead of a dictionary.
        #[arg(long)]
        hash_bits: Option<u32>,
        /// Keep word case.
        #[arg(long)]
        no_lowercase: bool,
    },
    /// Train the bag-of-words softmax regression.
    TrainBow(TrainArgs),
    /// Write per-example lexically-misleading scores.
    ScoreLms {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select CS_λ subsets from an LMS file.
    Subset {
        #[arg(long)]
        lms: PathBuf,
        #[arg(long = "lambda")]
        lambdas: Vec<f64>,
        /// Output id list; only with a single λ.
        #[arg(long, conflicts_with = "out_dir")]
        out: Option<PathBuf>,
        /// Directory receiving `cs_<λ>.ids` per λ.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Also copy the member lines of this corpus beside each id list.
        #[arg(long)]
        export_from: Option<PathBuf>,
    },
    /// Generate rule-based adversarial pairs.
    GenAdv {
        #[arg(long)]
        rule: Rule,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        conllu: PathBuf,
        /// Noun/adjective counts; mined from `--conllu` when absent.
        #[arg(long)]
        amod_map: Option<PathBuf>,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count noun/adjective modifier pairs in dependency parses.
    MineAmod {
        #[arg(long = "conllu", required = true)]
        conllu: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Permute the words of each sentence with a seeded stream.
    Shuffle {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score prediction files on the corpus, subsets and adversarial sets.
    Evaluate(EvaluateArgs),
    /// Convert or merge reports.
    Report {
        #[arg(long = "input", required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value = "markdown")]
        format: String,
    },
    /// Run vocab, training, scoring, subsets and evaluation from the config.
    Pipeline {
        /// Overrides `data.out_dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long = "train", required = true)]
    train: Vec<PathBuf>,
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lr_decay: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_bias: bool,
    #[arg(long, value_parser = parse_format)]
    format: Option<ModelFormat>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long = "preds")]
    preds: Vec<PathBuf>,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long = "subset")]
    subsets: Vec<PathBuf>,
    #[arg(long = "adv")]
    adv: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// csv, markdown or json.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Add majority-vote and human rows.
    #[arg(long)]
    baselines: bool,
    /// Missing predictions are errors.
    #[arg(long)]
    strict: bool,
    /// average, slot:K or seeded:SEED.
    #[arg(long)]
    human_mode: Option<HumanMode>,
}

fn parse_format(s: &str) -> Result<ModelFormat, String> {
    match s {
        "binary" => Ok(ModelFormat::Binary),
        "text" => Ok(ModelFormat::Text),
        o => Err(format!("unknown model format {o:?}")),
    }
}

fn exit_code(err: &anyhow::Error) -> (u8, &'static str) {
    if err.downcast_ref::<commands::UsageError>().is_some() {
        return (2, "usage");
    }
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e @ Error::Fingerprint { .. }) => (4, e.kind()),
        Some(e @ Error::Config(_)) => (2, e.kind()),
        Some(
            e @ (Error::Ptb { .. } | Error::Malformed { .. } | Error::Invalid(_) | Error::Json(_) | Error::Version { .. }),
        ) => (3, e.kind()),
        Some(e) => (1, e.kind()),
        None => (1, "runtime"),
    }
}

fn report_error(kind: &str, message: &str) {
    let v = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{v}");
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report_error("usage", e.to_string().trim());
            return ExitCode::from(2);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = exit_code(&e);
            report_error(kind, &format!("{e:#}"));
            ExitCode::from(code)
        }
    }
}
