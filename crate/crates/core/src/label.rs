use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The three NLI classes. Declaration order (E, C, N) is the canonical order
/// used for probability triples, serialization and tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Entailment,
    Contradiction,
    Neutral,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Entailment, Label::Contradiction, Label::Neutral];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailment => "entailment",
            Label::Contradiction => "contradiction",
            Label::Neutral => "neutral",
        }
    }

    /// Single-letter code used in report column names.
    pub fn short(self) -> char {
        match self {
            Label::Entailment => 'E',
            Label::Contradiction => 'C',
            Label::Neutral => 'N',
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "entailment" | "e" => Ok(Label::Entailment),
            "contradiction" | "c" => Ok(Label::Contradiction),
            "neutral" | "n" => Ok(Label::Neutral),
            other => Err(Error::Invalid(format!("unknown label {other:?}"))),
        }
    }
}

/// Parses a gold or annotator label field: `"-"` and `""` mean no consensus
/// (undetermined) and map to `None`.
pub fn parse_gold(s: &str) -> Result<Option<Label>, Error> {
    match s.trim() {
        "-" | "" => Ok(None),
        other => other.parse().map(Some),
    }
}

pub fn gold_str(gold: Option<Label>) -> &'static str {
    gold.map_or("-", Label::as_str)
}

/// Probability triple in (E, C, N) order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probs(pub [f64; 3]);

impl Probs {
    pub const UNIFORM: Probs = Probs([1.0 / 3.0; 3]);

    pub fn get(&self, label: Label) -> f64 {
        self.0[label.index()]
    }

    /// Highest-probability label; ties go to the earlier label in (E, C, N).
    pub fn argmax(&self) -> Label {
        let mut best = 0;
        for i in 1..3 {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        Label::ALL[best]
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }
}
