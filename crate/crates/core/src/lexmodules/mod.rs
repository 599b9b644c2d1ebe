//! Offline solver modules for synonym and analogy questions.
//!
//! Each module maps a question plus a local data table to raw choice scores
//! (or, for the relation filters, directly to a distribution). Words the
//! data has never seen produce all-zero scores, which normalize to the
//! uniform distribution.

mod cooccur;
mod graph;
mod paths;
mod patterns;
mod run;
mod vectors;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::formats::FormatError;
use crate::problem::{ProblemError, QuestionKind};

pub use cooccur::{cooccurrence_score, tokenize, CooccurrenceTable, DEFAULT_WINDOW};
pub use graph::{relation_filter, thesaurus_overlap, LexicalGraph};
pub use paths::{
    enumerate_paths, shared_features, thesaurus_path_score, Direction, PathFeatureSet, PathStep,
    MAX_PATH_LINKS,
};
pub use patterns::{
    default_templates, pair_signature, phrase_vector_score, PatternTable, DEFAULT_PATTERN_COUNT,
};
pub use run::{analogy_suite, run_module, synonym_suite, DataBundle, ModuleKind};
pub use vectors::{
    definition_similarity, embedding_similarity, DefinitionTable, EmbeddingTable,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LexError {
    #[error("module {module} needs {what}, which was not loaded")]
    DataFileMissing { module: String, what: String },
    #[error("module {module} handles {expected} questions, but {id} is a {found} question")]
    KindMismatch {
        module: String,
        id: String,
        expected: QuestionKind,
        found: QuestionKind,
    },
    #[error("unknown module {0:?}")]
    UnknownModule(String),
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("{what}: {source}")]
    Format {
        what: String,
        #[source]
        source: FormatError,
    },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

impl LexError {
    pub(crate) fn format(what: &str, line: usize, message: impl Into<String>) -> Self {
        LexError::Format {
            what: what.to_string(),
            source: FormatError { line, message: message.into() },
        }
    }
}

/// The relations checked by the relation-filter modules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Synonym,
    Antonym,
    Hypernym,
    Hyponym,
    MeronymSubstance,
    MeronymPart,
    MeronymMember,
    HolonymSubstance,
    HolonymMember,
}

impl Relation {
    pub const ALL: [Relation; 9] = [
        Relation::Synonym,
        Relation::Antonym,
        Relation::Hypernym,
        Relation::Hyponym,
        Relation::MeronymSubstance,
        Relation::MeronymPart,
        Relation::MeronymMember,
        Relation::HolonymSubstance,
        Relation::HolonymMember,
    ];

    /// Edge label used in graph files.
    pub fn label(self) -> &'static str {
        match self {
            Relation::Synonym => "synonym",
            Relation::Antonym => "antonym",
            Relation::Hypernym => "hypernym",
            Relation::Hyponym => "hyponym",
            Relation::MeronymSubstance => "meronym-substance",
            Relation::MeronymPart => "meronym-part",
            Relation::MeronymMember => "meronym-member",
            Relation::HolonymSubstance => "holonym-substance",
            Relation::HolonymMember => "holonym-member",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Relation {
    type Err = LexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Relation::ALL
            .into_iter()
            .find(|r| r.label() == s)
            .ok_or_else(|| LexError::UnknownRelation(s.to_string()))
    }
}

/// Cosine of two dense vectors; 0 when either has zero norm.
pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na.sqrt() * nb.sqrt())
}
