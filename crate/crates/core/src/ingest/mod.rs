//! Parsing raw review dumps into interaction records, keyword selection,
//! vocabulary construction, train/validation/test splitting and the
//! per-entity keyword documents that review graphs are built from.

mod corpus;
mod documents;
mod records;
mod split;
mod tokenize;
mod vocab;

use std::io;

use thiserror::Error;

pub use corpus::{Corpus, CorpusConfig, EntityIndex, FORMAT_TAG};
pub use documents::{build_documents, DocumentSet, Review, DEFAULT_KEYWORD_CAP};
pub use records::{dedup_latest, parse_records, InteractionRecord, ParseOutcome, RecordFormat};
pub use split::{split_dataset, SplitAssignment, SplitLabel};
pub use tokenize::{tokenize, StopWords, TokenPolicy, Token};
pub use vocab::{build_vocabulary, VocabConfig, Vocabulary};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read input: {0}")]
    Io(#[from] io::Error),
    #[error("{malformed} of {total} lines are malformed (>10%); wrong --format?")]
    TooManyMalformed { malformed: usize, total: usize },
    #[error("need at least 10 records to form train/validation/test splits, got {0}")]
    TooFewRecords(usize),
    #[error("vocabulary is empty after applying min_count={min_count}")]
    EmptyVocabulary { min_count: u64 },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("{file}: {reason}")]
    BadFile { file: String, reason: String },
}
