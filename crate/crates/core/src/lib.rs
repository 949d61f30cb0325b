//! Compositionality-sensitivity analysis for natural language inference:
//! corpus readers, a bag-of-words softmax regression, lexically-misleading
//! scores and `CS_λ` subsets, rule-based adversaries, and an evaluation
//! harness.

pub mod advgen;
pub mod bowreg;
pub mod config;
pub mod conllu;
pub mod corpus;
pub mod error;
pub mod evalx;
pub mod label;
pub mod lexfeat;
pub mod lms;
pub mod manifest;
pub mod ptb;
pub mod rng;

pub use advgen::{AdversarialPair, AmodMap, GenerationReport, Reject, Rule};
pub use bowreg::{ModelFormat, Scorer, SoftmaxModel, TrainConfig, TrainReport};
pub use config::Config;
pub use conllu::{DepToken, DepTree};
pub use corpus::{NliExample, Side, Token};
pub use error::{Error, Result};
pub use evalx::{EvalReport, EvalRow, HumanMode, PredictionSet};
pub use label::{Label, Probs};
pub use lexfeat::{FeatureKey, FeatureOptions, FeatureVector, Vocabulary};
pub use lms::{CsSubset, LmsRecord};
pub use manifest::RunManifest;
pub use ptb::PtbTree;
