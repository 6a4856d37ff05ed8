//! Evaluation: MaxMatch precision, recall and F, per-type recall, corpus
//! BLEU and F by sentence length.

mod bleu;
mod fscore;
mod length;
mod m2;

pub use bleu::{bleu, BleuReport, BLEU_ORDER};
pub use fscore::{f_beta, EditCounts};
pub use length::{length_bins_tsv, length_breakdown, LengthBin, DEFAULT_BIN_WIDTH, MIN_BIN_SENTENCES};
pub use m2::{
    m2_evaluate, per_type_recall, score_sentence, select_edits, type_recall_tsv, GoldKey, ScoreReport, SentenceScore,
    DEFAULT_MAX_UNCHANGED,
};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("invalid argument: {0}")]
    Argument(String),
}
