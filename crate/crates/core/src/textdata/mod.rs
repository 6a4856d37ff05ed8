//! Character vocabulary, corpus ingestion and batching.

mod batch;
mod corpus;
pub mod m2;
mod vocab;

use std::path::Path;

pub use batch::{make_batches, pad_for_pyramid, source_ids, target_ids, Batch};
pub use corpus::{read_lines, tokenize, ParallelCorpus, TsvSkips};
pub use m2::{apply_gold_edits, parse_m2, write_m2, AnnotatedSentence, AnnotatorId, GoldEdit};
pub use vocab::{encode_chars, CharVocab, SymbolId, EOS, SOS, SPACE, UNK, VOCAB_SIZE};

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl DataError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
