//! Synthetic article/determiner and noun-number errors.
//!
//! Error rates are estimated from annotated learner text and then used to
//! corrupt clean sentences. Annotations describe corrections, so each
//! estimated event is the inverse of the annotated edit: a gold edit that
//! inserts "the" is evidence that learners delete it.

mod inflect;
mod tagger;

pub use inflect::{pluralize, singularize};
pub use tagger::{
    is_determiner, parse_tagged, tag_heuristic, write_tagged, Number, TaggedSentence, TokenTag, DETERMINERS,
};

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numcore::rng::{derive_seed, seeded};
use crate::numcore::Rng;
use crate::textdata::AnnotatedSentence;

pub const ART_OR_DET: &str = "ArtOrDet";
pub const NOUN_NUMBER: &str = "Nn";

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("bad distribution file: {0}")]
    Format(String),
    #[error("{0}")]
    Io(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorDistribution {
    /// Chance that a determiner is dropped.
    pub p_delete: f64,
    /// `replace[d][e]`: chance that determiner `d` is written as `e`.
    /// Whatever mass a row leaves after `p_delete` means keep.
    pub replace: BTreeMap<String, BTreeMap<String, f64>>,
    /// Chance that a determiner is inserted before a noun phrase that
    /// does not start with one.
    pub p_insert: f64,
    /// Which determiner gets inserted. Empty means uniform over a, an, the.
    pub insert_choice: BTreeMap<String, f64>,
    /// Chance that a plural noun becomes singular.
    pub p_to_singular: f64,
    /// Chance that a singular noun becomes plural.
    pub p_to_plural: f64,
}

impl ErrorDistribution {
    pub fn validate(&self) -> Result<(), SynthError> {
        let unit = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(SynthError::Argument(format!("{name} = {p} is not a probability")))
            }
        };
        unit("p_delete", self.p_delete)?;
        unit("p_insert", self.p_insert)?;
        unit("p_to_singular", self.p_to_singular)?;
        unit("p_to_plural", self.p_to_plural)?;
        for (d, row) in &self.replace {
            for (e, &p) in row {
                unit(&format!("replace[{d}][{e}]"), p)?;
            }
            let total: f64 = row.values().sum();
            if total > 1.0 + 1e-9 {
                return Err(SynthError::Argument(format!("replacement row {d} sums to {total}")));
            }
        }
        for (d, &p) in &self.insert_choice {
            unit(&format!("insert_choice[{d}]"), p)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("distribution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        let d: ErrorDistribution = serde_json::from_str(text).map_err(|e| SynthError::Format(e.to_string()))?;
        d.validate()?;
        Ok(d)
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path).map_err(|e| SynthError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn choose_insert(&self, rng: &mut Rng) -> String {
        let total: f64 = self.insert_choice.values().sum();
        if total <= 0.0 {
            let fallback = ["a", "an", "the"];
            return fallback[rng.gen_range(0..fallback.len())].to_string();
        }
        let mut u = rng.gen::<f64>() * total;
        for (d, &p) in &self.insert_choice {
            if u < p {
                return d.clone();
            }
            u -= p;
        }
        self.insert_choice.keys().next_back().cloned().unwrap_or_default()
    }
}

fn rate(events: usize, opportunities: usize, what: &str) -> f64 {
    if opportunities == 0 {
        log::warn!("no opportunities for {what} ({events} events); rate set to 0");
        return 0.0;
    }
    (events as f64 / opportunities as f64).min(1.0)
}

/// Estimates rates from the first annotator's edits.
///
/// Opportunities are counted on the corrected text: determiner tokens for
/// deletion and replacement, noun-phrase starts that are not determiners
/// for insertion, and singular or plural nouns for number flips.
pub fn estimate_error_stats(corpus: &[AnnotatedSentence]) -> ErrorDistribution {
    let (mut dets, mut np_starts, mut singular, mut plural) = (0usize, 0usize, 0usize, 0usize);
    let mut det_counts: BTreeMap<String, usize> = BTreeMap::new();
    let (mut deletions, mut insertions, mut to_singular, mut to_plural) = (0usize, 0usize, 0usize, 0usize);
    let mut replacements: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut inserted: BTreeMap<String, usize> = BTreeMap::new();

    for sent in corpus {
        let corrected = sent.corrected(0);
        let tagged = tag_heuristic(&corrected);
        for (tok, tag) in corrected.iter().zip(&tagged.tags) {
            if tag.determiner {
                dets += 1;
                *det_counts.entry(tok.to_lowercase()).or_default() += 1;
            } else if tag.np_start {
                np_starts += 1;
            }
            match tag.noun {
                Some(Number::Singular) => singular += 1,
                Some(Number::Plural) => plural += 1,
                None => {}
            }
        }
        for g in sent.primary_edits() {
            let src = &sent.tokens[g.start.min(g.end)..g.end.min(sent.tokens.len())];
            let (one_src, one_tgt) = (src.len() == 1, g.replacement.len() == 1);
            if g.kind == ART_OR_DET {
                if src.is_empty() && one_tgt && is_determiner(&g.replacement[0]) {
                    deletions += 1;
                } else if one_src && g.replacement.is_empty() && is_determiner(&src[0]) {
                    insertions += 1;
                    *inserted.entry(src[0].to_lowercase()).or_default() += 1;
                } else if one_src && one_tgt && is_determiner(&src[0]) && is_determiner(&g.replacement[0]) {
                    let written = src[0].to_lowercase();
                    let intended = g.replacement[0].to_lowercase();
                    if written != intended {
                        *replacements.entry(intended).or_default().entry(written).or_default() += 1;
                    }
                }
            } else if g.kind == NOUN_NUMBER && one_src && one_tgt {
                let (written, intended) = (src[0].to_lowercase(), g.replacement[0].to_lowercase());
                if pluralize(&written) == intended {
                    to_singular += 1;
                } else if singularize(&written) == intended {
                    to_plural += 1;
                }
            }
        }
    }

    let mut replace = BTreeMap::new();
    for (intended, row) in replacements {
        let n = det_counts.get(&intended).copied().unwrap_or(0);
        let total: usize = row.values().sum();
        // Heuristic tags can undercount, so rows are scaled to stay at most 1.
        let denom = n.max(total);
        let row: BTreeMap<String, f64> = row
            .into_iter()
            .map(|(w, c)| (w, rate(c, denom, "determiner replacement")))
            .collect();
        replace.insert(intended, row);
    }
    let total_inserted: usize = inserted.values().sum();
    ErrorDistribution {
        p_delete: rate(deletions, dets, "determiner deletion"),
        replace,
        p_insert: rate(insertions, np_starts, "determiner insertion"),
        insert_choice: inserted
            .into_iter()
            .map(|(d, c)| (d, c as f64 / total_inserted as f64))
            .collect(),
        p_to_singular: rate(to_singular, plural, "plural nouns"),
        p_to_plural: rate(to_plural, singular, "singular nouns"),
    }
}

/// A single corruption at a token index of the clean sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SynthOp {
    Delete(usize),
    Replace(usize, String),
    /// Insert a word before the token.
    Insert(usize, String),
    FlipNumber(usize),
}

impl SynthOp {
    fn index(&self) -> usize {
        match self {
            SynthOp::Delete(i) | SynthOp::Replace(i, _) | SynthOp::Insert(i, _) | SynthOp::FlipNumber(i) => *i,
        }
    }
}

/// Applies ops to the clean tokens. At most one insertion and one other op
/// per token.
pub fn apply_ops(sentence: &TaggedSentence, ops: &[SynthOp]) -> Result<Vec<String>, SynthError> {
    let n = sentence.tokens.len();
    let mut before: Vec<Option<&str>> = vec![None; n];
    let mut change: Vec<Option<&SynthOp>> = vec![None; n];
    for op in ops {
        let i = op.index();
        if i >= n {
            return Err(SynthError::Argument(format!("op {op:?} outside a {n}-token sentence")));
        }
        let slot_taken = match op {
            SynthOp::Insert(_, w) => before[i].replace(w).is_some(),
            _ => change[i].replace(op).is_some(),
        };
        if slot_taken {
            return Err(SynthError::Argument(format!("conflicting ops at token {i}")));
        }
    }
    let mut out = Vec::with_capacity(n + 2);
    for (i, tok) in sentence.tokens.iter().enumerate() {
        if let Some(w) = before[i] {
            out.push(w.to_string());
        }
        match change[i] {
            None => out.push(tok.clone()),
            Some(SynthOp::Delete(_)) => {}
            Some(SynthOp::Replace(_, w)) => out.push(w.clone()),
            Some(SynthOp::FlipNumber(_)) => out.push(match sentence.tags[i].noun {
                Some(Number::Plural) => singularize(tok),
                Some(Number::Singular) => pluralize(tok),
                None => return Err(SynthError::Argument(format!("token {i} ({tok}) is not a noun"))),
            }),
            Some(SynthOp::Insert(..)) => unreachable!("insertions are stored separately"),
        }
    }
    Ok(out)
}

/// One left-to-right pass of independent corruption decisions.
pub fn sample_ops(sentence: &TaggedSentence, dist: &ErrorDistribution, rng: &mut Rng) -> Vec<SynthOp> {
    let mut ops = Vec::new();
    for (i, (tok, tag)) in sentence.tokens.iter().zip(&sentence.tags).enumerate() {
        if tag.np_start && !tag.determiner && dist.p_insert > 0.0 && rng.gen::<f64>() < dist.p_insert {
            ops.push(SynthOp::Insert(i, dist.choose_insert(rng)));
        }
        if tag.determiner {
            let lower = tok.to_lowercase();
            let row = dist.replace.get(&lower);
            if dist.p_delete > 0.0 || row.is_some() {
                let u: f64 = rng.gen();
                if u < dist.p_delete {
                    ops.push(SynthOp::Delete(i));
                } else if let Some(row) = row {
                    let mut acc = dist.p_delete;
                    for (written, &p) in row {
                        acc += p;
                        if u < acc {
                            ops.push(SynthOp::Replace(i, written.clone()));
                            break;
                        }
                    }
                }
            }
        }
        let p_flip = match tag.noun {
            Some(Number::Singular) => dist.p_to_plural,
            Some(Number::Plural) => dist.p_to_singular,
            None => 0.0,
        };
        if p_flip > 0.0 && rng.gen::<f64>() < p_flip {
            ops.push(SynthOp::FlipNumber(i));
        }
    }
    ops
}

/// Two independent corruption passes; passes that change nothing are
/// dropped.
pub fn corrupt(sentence: &TaggedSentence, dist: &ErrorDistribution, rng: &mut Rng) -> Vec<Vec<String>> {
    (0..2)
        .filter_map(|_| {
            let ops = sample_ops(sentence, dist, rng);
            let out = apply_ops(sentence, &ops).expect("sampled ops are consistent");
            (out != sentence.tokens).then_some(out)
        })
        .collect()
}

/// `(corrupted, clean)` tokens.
pub type CorruptedPair = (Vec<String>, Vec<String>);

/// Corrupts every sentence with its own generator seeded from `seed` and
/// the sentence index. Returns `(corrupted, clean)` pairs in input order;
/// the result does not depend on `threads`.
pub fn corrupt_corpus(
    sentences: &[TaggedSentence],
    dist: &ErrorDistribution,
    seed: u64,
    threads: usize,
) -> Result<Vec<CorruptedPair>, SynthError> {
    dist.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| SynthError::Pool(e.to_string()))?;
    let per_sentence: Vec<Vec<Vec<String>>> = pool.install(|| {
        sentences
            .par_iter()
            .enumerate()
            .map(|(i, s)| corrupt(s, dist, &mut seeded(derive_seed(seed, &format!("synth/{i}")))))
            .collect()
    });
    Ok(per_sentence
        .into_iter()
        .zip(sentences)
        .flat_map(|(outs, s)| outs.into_iter().map(move |c| (c, s.tokens.clone())))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textdata::{parse_m2, GoldEdit};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn forced_insertion_example() {
        let t = tag_heuristic(&toks("They will generate and brainstorm innovative ideas ."));
        let out = apply_ops(&t, &[SynthOp::Insert(5, "the".into())]).unwrap();
        assert_eq!(
            out.join(" "),
            "They will generate and brainstorm the innovative ideas ."
        );
    }

    #[test]
    fn noun_flip_example() {
        let t = tag_heuristic(&toks("Identification is becoming more important in our society ."));
        let out = apply_ops(&t, &[SynthOp::FlipNumber(7)]).unwrap();
        assert_eq!(out[7], "societies");
        assert!(apply_ops(&t, &[SynthOp::FlipNumber(1)]).is_err());
    }

    #[test]
    fn zero_rates_give_nothing() {
        let t = tag_heuristic(&toks("the cat saw a dog"));
        assert!(corrupt(&t, &ErrorDistribution::default(), &mut seeded(1)).is_empty());
    }

    #[test]
    fn certain_deletion_removes_every_determiner() {
        let t = tag_heuristic(&toks("the cat saw a dog near this house"));
        let dist = ErrorDistribution {
            p_delete: 1.0,
            ..Default::default()
        };
        let outs = corrupt(&t, &dist, &mut seeded(2));
        assert_eq!(outs.len(), 2);
        for o in outs {
            assert_eq!(o, toks("cat saw dog near house"));
        }
    }

    #[test]
    fn estimates_deletion_rate() {
        // Corrected text holds four determiners; two were missing in the
        // learner text.
        let m2 = "S cat sat on the mat\nA 0 0|||ArtOrDet|||The|||REQUIRED|||-NONE-|||0\n\n\
                  S a dog saw bird\nA 3 3|||ArtOrDet|||the|||REQUIRED|||-NONE-|||0\n\n\
                  S no errors here\nA -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||0\n";
        let corpus = parse_m2(m2).unwrap();
        let d = estimate_error_stats(&corpus);
        assert_eq!(d.p_delete, 0.5);
        assert_eq!(d.p_insert, 0.0);
        assert_eq!(d.p_to_plural, 0.0);
        assert_eq!(d.p_to_singular, 0.0);
    }

    #[test]
    fn estimates_inverted_noun_and_replacement_events() {
        let mut s = AnnotatedSentence::new(toks("a cats saw the dogs"));
        s.annotators.insert(
            0,
            vec![
                GoldEdit::new(1, 2, NOUN_NUMBER, &["cat"]),
                GoldEdit::new(0, 1, ART_OR_DET, &["the"]),
            ],
        );
        let d = estimate_error_stats(&[s]);
        // The learner wrote the plural of a singular noun.
        assert_eq!(d.p_to_plural, 1.0);
        assert_eq!(d.p_to_singular, 0.0);
        assert_eq!(d.replace["the"]["a"], 0.5);
        d.validate().unwrap();
    }

    #[test]
    fn distribution_file_roundtrip() {
        let mut d = ErrorDistribution {
            p_delete: 0.3,
            p_to_plural: 0.3,
            ..Default::default()
        };
        d.insert_choice.insert("the".into(), 1.0);
        assert_eq!(ErrorDistribution::from_json(&d.to_json()).unwrap(), d);
        assert!(ErrorDistribution::from_json("{\"p_delete\": 1.5}").is_err());
        assert!(ErrorDistribution::from_json("{\"bogus\": 1}").is_err());
    }
}
