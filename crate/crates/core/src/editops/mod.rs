//! Word-level edits between a source sentence and a correction.
//!
//! Decoder output is aligned to its input, contiguous mismatches become
//! [`Edit`]s, and a small classifier scores each edit so that only
//! confident ones are applied.

mod align;
mod classifier;
mod features;

pub use align::{alignment_cost, apply_edits, extract_edits, label_edits, levenshtein, word_align, AlignOp, Edit};
pub use classifier::{train_classifier, ClassifierConfig, EditClassifier};
pub use features::{featurize, WordVectors, DISTANCE_FEATURES, FEATURE_DIM, WORD_VECTOR_DIM};

use std::fmt::Write as _;

use crate::textdata::GoldEdit;

#[derive(Debug, thiserror::Error)]
pub enum EditError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bad format: {0}")]
    Format(String),
    #[error("{0}")]
    Io(String),
}

/// Anything that assigns a probability of being correct to an edit.
pub trait EditScorer {
    fn edit_probability(&self, edit: &Edit, sentence: &[String]) -> Result<f64, EditError>;
}

impl<F> EditScorer for F
where
    F: Fn(&Edit, &[String]) -> f64,
{
    fn edit_probability(&self, edit: &Edit, sentence: &[String]) -> Result<f64, EditError> {
        Ok(self(edit, sentence))
    }
}

/// A classifier paired with the word vectors its features need.
pub struct FeatureScorer<'a> {
    pub classifier: &'a EditClassifier,
    pub vectors: &'a WordVectors,
}

impl EditScorer for FeatureScorer<'_> {
    fn edit_probability(&self, edit: &Edit, sentence: &[String]) -> Result<f64, EditError> {
        self.classifier.predict(&featurize(edit, sentence, self.vectors)?)
    }
}

/// Applies the edits scored above `p_min`. Returns the corrected tokens
/// and the number of edits applied.
pub fn filter_and_apply(
    src: &[String],
    edits: &[Edit],
    scorer: &dyn EditScorer,
    p_min: f64,
) -> Result<(Vec<String>, usize), EditError> {
    // Validate the whole set first so overlap is reported regardless of p_min.
    apply_edits(src, edits)?;
    let mut kept = Vec::new();
    for e in edits {
        if scorer.edit_probability(e, src)? > p_min {
            kept.push(e.clone());
        }
    }
    Ok((apply_edits(src, &kept)?, kept.len()))
}

/// Converts an annotator's edits to [`Edit`]s over `tokens`. Annotations
/// that change nothing (such as `noop`) are dropped.
pub fn gold_to_edits(tokens: &[String], gold: &[GoldEdit]) -> Result<Vec<Edit>, EditError> {
    gold.iter()
        .filter(|g| g.end <= tokens.len() && tokens[g.start.min(g.end)..g.end] != g.replacement[..])
        .map(|g| Edit::new(tokens, g.start, g.end, g.replacement.clone()).map(|e| e.with_kind(&g.kind)))
        .collect()
}

/// One row of the labeled-edit file.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEdit {
    pub sentence: usize,
    pub edit: Edit,
    /// `None` until labeled against gold.
    pub good: Option<bool>,
}

/// `sentence_id <TAB> start:end <TAB> s <TAB> t <TAB> label`, tokens
/// space-separated, label `1` (good), `0` (bad) or `?` (unlabeled).
pub fn write_labeled_tsv(rows: &[LabeledEdit]) -> String {
    let mut out = String::new();
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}:{}\t{}\t{}\t{}",
            r.sentence,
            r.edit.start,
            r.edit.end,
            r.edit.source.join(" "),
            r.edit.target.join(" "),
            match r.good {
                Some(true) => "1",
                Some(false) => "0",
                None => "?",
            }
        );
    }
    out
}

pub fn parse_labeled_tsv(text: &str) -> Result<Vec<LabeledEdit>, EditError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: &str| EditError::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(err("expected 5 tab-separated columns"));
        }
        let sentence = cols[0].parse().map_err(|_| err("bad sentence id"))?;
        let (a, b) = cols[1].split_once(':').ok_or_else(|| err("span must be start:end"))?;
        let start: usize = a.parse().map_err(|_| err("bad span start"))?;
        let end: usize = b.parse().map_err(|_| err("bad span end"))?;
        let words = |s: &str| s.split_whitespace().map(str::to_string).collect::<Vec<_>>();
        let source = words(cols[2]);
        if start > end || source.len() != end - start {
            return Err(err("span length disagrees with source tokens"));
        }
        let good = match cols[4] {
            "1" => Some(true),
            "0" => Some(false),
            "?" => None,
            _ => return Err(err("label must be 1, 0 or ?")),
        };
        rows.push(LabeledEdit {
            sentence,
            edit: Edit {
                start,
                end,
                source,
                target: words(cols[3]),
                kind: None,
            },
            good,
        });
    }
    Ok(rows)
}
