//! Character beam search with word-level language-model fusion.
//!
//! A hypothesis accumulates the network log-probability of its characters
//! and, each time a word is completed by a space or ⟨eos⟩, the LM
//! log-probability of that word given up to `order - 1` previous words.
//! ⟨eos⟩ also scores the LM's `</s>` event. Hypotheses are ranked by
//!
//! ```text
//! (log P_NN + λ · log P_LM) / max(|y|, 1)
//! ```
//!
//! where `|y|` counts completed words. Empty words (a leading space or two
//! spaces in a row) are neither scored nor counted.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ngramlm::{NGramModel, WordId};
use crate::seq2seq::{DecoderState, EncodedSource, ModelError, Phase, Seq2Seq};
use crate::textdata::{source_ids, CharVocab, SymbolId, EOS, SOS, SPACE, VOCAB_SIZE};

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("empty source sentence")]
    EmptySource,
    #[error("invalid decode configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("thread pool: {0}")]
    Pool(String),
}

/// Anything that can be decoded one symbol at a time.
pub trait StepModel: Sync {
    type Encoded: Sync;
    type State: Clone + Send;

    fn start(&self, source: &str) -> Result<(Self::Encoded, Self::State), DecodeError>;

    /// Distribution over the next symbol after `prev`, plus the new state.
    fn next(
        &self,
        encoded: &Self::Encoded,
        state: &Self::State,
        prev: SymbolId,
    ) -> Result<(Vec<f64>, Self::State), DecodeError>;
}

impl StepModel for Seq2Seq {
    type Encoded = EncodedSource;
    type State = DecoderState;

    fn start(&self, source: &str) -> Result<(EncodedSource, DecoderState), DecodeError> {
        if source.is_empty() {
            return Err(DecodeError::EmptySource);
        }
        let enc = self.encode(&source_ids(&CharVocab, source), &mut Phase::Eval)?;
        Ok((enc, self.initial_state()))
    }

    fn next(
        &self,
        encoded: &EncodedSource,
        state: &DecoderState,
        prev: SymbolId,
    ) -> Result<(Vec<f64>, DecoderState), DecodeError> {
        Ok(self.decode_step(prev, state, encoded, &mut Phase::Eval)?)
    }
}

/// A model given by explicit tables: the distribution after each emitted
/// prefix. Prefixes without an entry emit ⟨eos⟩ with probability 1.
#[derive(Debug, Clone, Default)]
pub struct TableModel {
    table: HashMap<String, Vec<f64>>,
}

impl TableModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the next-symbol distribution after `prefix`. Symbols not
    /// listed get probability 0.
    pub fn set(&mut self, prefix: &str, dist: &[(SymbolId, f64)]) -> &mut Self {
        let mut probs = vec![0.0; VOCAB_SIZE];
        for &(id, p) in dist {
            probs[id] = p;
        }
        self.table.insert(prefix.to_string(), probs);
        self
    }
}

impl StepModel for TableModel {
    type Encoded = ();
    type State = String;

    fn start(&self, source: &str) -> Result<((), String), DecodeError> {
        if source.is_empty() {
            return Err(DecodeError::EmptySource);
        }
        Ok(((), String::new()))
    }

    fn next(&self, _: &(), state: &String, prev: SymbolId) -> Result<(Vec<f64>, String), DecodeError> {
        let mut prefix = state.clone();
        if prev != SOS {
            prefix.push(CharVocab.char(prev).unwrap_or('\u{fffd}'));
        }
        let probs = self.table.get(&prefix).cloned().unwrap_or_else(|| {
            let mut p = vec![0.0; VOCAB_SIZE];
            p[EOS] = 1.0;
            p
        });
        Ok((probs, prefix))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Rank by the word-normalized score at every pruning step.
    #[default]
    EveryStep,
    /// Prune on the raw fused score; normalize only for the final ranking.
    EndOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeConfig {
    pub lambda: f64,
    pub beam: usize,
    /// Maximum emitted symbols; `None` means `1.5 × source length + 10`.
    pub max_len: Option<usize>,
    pub nbest: usize,
    pub normalization: Normalization,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            lambda: 0.3,
            beam: 64,
            max_len: None,
            nbest: 1,
            normalization: Normalization::EveryStep,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.beam == 0 || self.nbest == 0 {
            return Err(DecodeError::Config(
                "beam width and n-best size must be at least 1".into(),
            ));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(DecodeError::Config(format!(
                "lambda must be a finite non-negative number, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    pub fn max_len_for(&self, source: &str) -> usize {
        self.max_len
            .unwrap_or_else(|| (1.5 * source.chars().count() as f64) as usize + 10)
    }
}

/// `(log P_NN + λ · log P_LM) / max(|y|, 1)`.
pub fn hyp_score(nn: f64, lm: f64, words: usize, lambda: f64) -> f64 {
    fused(nn, lm, lambda) / words.max(1) as f64
}

fn fused(nn: f64, lm: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        nn
    } else {
        nn + lambda * lm
    }
}

/// A beam entry.
#[derive(Debug, Clone)]
pub struct Hypothesis<S> {
    /// Emitted symbols, ending in ⟨eos⟩ when finished.
    pub ids: Vec<SymbolId>,
    pub state: S,
    /// Natural-log network probability.
    pub nn: f64,
    /// Natural-log LM probability of the completed words.
    pub lm: f64,
    pub words: usize,
    partial: String,
    context: Vec<WordId>,
    pub finished: bool,
}

impl<S> Hypothesis<S> {
    pub fn score(&self, lambda: f64) -> f64 {
        hyp_score(self.nn, self.lm, self.words, lambda)
    }

    fn rank_key(&self, lambda: f64, norm: Normalization) -> f64 {
        match norm {
            Normalization::EveryStep => self.score(lambda),
            Normalization::EndOnly => fused(self.nn, self.lm, lambda),
        }
    }
}

/// A decoded output.
#[derive(Debug, Clone, PartialEq)]
pub struct Ranked {
    pub text: String,
    pub ids: Vec<SymbolId>,
    pub score: f64,
    pub nn: f64,
    pub lm: f64,
    pub words: usize,
    /// False when the hypothesis hit the length limit without ⟨eos⟩.
    pub finished: bool,
}

/// LM bookkeeping for extending a hypothesis by one symbol.
struct Extension {
    lm: f64,
    words: usize,
    completed: Option<WordId>,
}

struct Fusion<'a> {
    lm: Option<&'a NGramModel>,
    lambda: f64,
}

impl Fusion<'_> {
    fn active(&self) -> Option<&NGramModel> {
        if self.lambda > 0.0 {
            self.lm
        } else {
            None
        }
    }

    fn initial_context(&self) -> Vec<WordId> {
        match self.active() {
            Some(lm) => vec![lm.bos_id(); lm.order() - 1],
            None => Vec::new(),
        }
    }

    fn ln(lm: &NGramModel, word: WordId, ctx: &[WordId]) -> f64 {
        lm.logprob_ids(word, ctx) * std::f64::consts::LN_10
    }

    /// Effect of emitting `sym` after a hypothesis with the given LM
    /// context and partial word.
    fn extend(&self, sym: SymbolId, partial: &str, context: &[WordId], lm_score: f64, words: usize) -> Extension {
        let mut ext = Extension {
            lm: lm_score,
            words,
            completed: None,
        };
        if sym != SPACE && sym != EOS {
            return ext;
        }
        if !partial.is_empty() {
            ext.words += 1;
            if let Some(lm) = self.active() {
                let id = lm.word_id(partial);
                ext.lm += Self::ln(lm, id, context);
                ext.completed = Some(id);
            }
        }
        if sym == EOS {
            if let Some(lm) = self.active() {
                let eos = lm.eos_id();
                ext.lm += match ext.completed {
                    Some(id) => {
                        let mut ctx = context.to_vec();
                        ctx.push(id);
                        Self::ln(lm, eos, &ctx)
                    }
                    None => Self::ln(lm, eos, context),
                };
            }
        }
        ext
    }
}

struct Candidate {
    parent: usize,
    sym: SymbolId,
    nn: f64,
    lm: f64,
    words: usize,
    completed: Option<WordId>,
    key: f64,
}

fn compare_outputs(a: &[SymbolId], a_extra: Option<SymbolId>, b: &[SymbolId], b_extra: Option<SymbolId>) -> Ordering {
    a.iter().chain(a_extra.iter()).cmp(b.iter().chain(b_extra.iter()))
}

/// Beam search. Returns up to `cfg.nbest` hypotheses sorted by score,
/// best first; ties go to the lexicographically smaller output. With
/// `λ = 0` the language model is never consulted.
pub fn beam_decode<M: StepModel>(
    model: &M,
    lm: Option<&NGramModel>,
    source: &str,
    cfg: &DecodeConfig,
) -> Result<Vec<Ranked>, DecodeError> {
    cfg.validate()?;
    let (encoded, state) = model.start(source)?;
    let fusion = Fusion { lm, lambda: cfg.lambda };
    let max_len = cfg.max_len_for(source);
    let mut beam = vec![Hypothesis {
        ids: Vec::new(),
        state,
        nn: 0.0,
        lm: 0.0,
        words: 0,
        partial: String::new(),
        context: fusion.initial_context(),
        finished: false,
    }];

    for _ in 0..max_len {
        if beam.iter().all(|h| h.finished) {
            break;
        }
        let mut next_states: Vec<Option<M::State>> = Vec::with_capacity(beam.len());
        let mut candidates: Vec<Candidate> = Vec::new();
        for (pi, h) in beam.iter().enumerate() {
            if h.finished {
                next_states.push(None);
                candidates.push(Candidate {
                    parent: pi,
                    sym: EOS,
                    nn: h.nn,
                    lm: h.lm,
                    words: h.words,
                    completed: None,
                    key: h.rank_key(cfg.lambda, cfg.normalization),
                });
                continue;
            }
            let prev = h.ids.last().copied().unwrap_or(SOS);
            let (probs, st) = model.next(&encoded, &h.state, prev)?;
            next_states.push(Some(st));
            for (sym, &p) in probs.iter().enumerate() {
                if !(p > 0.0) {
                    continue;
                }
                let nn = h.nn + p.ln();
                let ext = fusion.extend(sym, &h.partial, &h.context, h.lm, h.words);
                let key = match cfg.normalization {
                    Normalization::EveryStep => hyp_score(nn, ext.lm, ext.words, cfg.lambda),
                    Normalization::EndOnly => fused(nn, ext.lm, cfg.lambda),
                };
                if !key.is_finite() {
                    continue;
                }
                candidates.push(Candidate {
                    parent: pi,
                    sym,
                    nn,
                    lm: ext.lm,
                    words: ext.words,
                    completed: ext.completed,
                    key,
                });
            }
        }
        let extra = |c: &Candidate| {
            if beam[c.parent].finished {
                None
            } else {
                Some(c.sym)
            }
        };
        candidates.sort_by(|a, b| {
            b.key
                .total_cmp(&a.key)
                .then_with(|| compare_outputs(&beam[a.parent].ids, extra(a), &beam[b.parent].ids, extra(b)))
        });
        candidates.truncate(cfg.beam);

        let mut next_beam = Vec::with_capacity(candidates.len());
        for c in candidates {
            let parent = &beam[c.parent];
            if parent.finished {
                next_beam.push(parent.clone());
                continue;
            }
            let mut ids = parent.ids.clone();
            ids.push(c.sym);
            let mut partial = parent.partial.clone();
            let mut context = parent.context.clone();
            if c.sym == SPACE || c.sym == EOS {
                partial.clear();
                if let Some(id) = c.completed {
                    context.push(id);
                }
            } else {
                partial.push(CharVocab.char(c.sym).unwrap_or('\u{fffd}'));
            }
            next_beam.push(Hypothesis {
                ids,
                state: next_states[c.parent].clone().expect("live parent has a state"),
                nn: c.nn,
                lm: c.lm,
                words: c.words,
                partial,
                context,
                finished: c.sym == EOS,
            });
        }
        if next_beam.is_empty() {
            // Every expansion had zero probability; keep what we had.
            break;
        }
        beam = next_beam;
    }

    let mut out: Vec<Ranked> = beam
        .into_iter()
        .map(|h| Ranked {
            text: CharVocab.decode(&h.ids),
            score: h.score(cfg.lambda),
            nn: h.nn,
            lm: h.lm,
            words: h.words,
            finished: h.finished,
            ids: h.ids,
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.ids.cmp(&b.ids)));
    out.truncate(cfg.nbest);
    Ok(out)
}

/// Greedy decoding: at each step emit the symbol with the best ranking
/// score (the same fused, word-normalized score the beam uses), lowest id
/// on ties, until ⟨eos⟩ or the length limit.
pub fn greedy_decode<M: StepModel>(
    model: &M,
    lm: Option<&NGramModel>,
    source: &str,
    cfg: &DecodeConfig,
) -> Result<Ranked, DecodeError> {
    cfg.validate()?;
    let (encoded, mut state) = model.start(source)?;
    let fusion = Fusion { lm, lambda: cfg.lambda };
    let mut ids: Vec<SymbolId> = Vec::new();
    let (mut nn, mut lm_score, mut words) = (0.0, 0.0, 0usize);
    let mut partial = String::new();
    let mut context = fusion.initial_context();
    let mut finished = false;
    for _ in 0..cfg.max_len_for(source) {
        let prev = ids.last().copied().unwrap_or(SOS);
        let (probs, st) = model.next(&encoded, &state, prev)?;
        let mut best: Option<(f64, SymbolId, f64, Extension)> = None;
        for (sym, &p) in probs.iter().enumerate() {
            if !(p > 0.0) {
                continue;
            }
            let cand_nn = nn + p.ln();
            let ext = fusion.extend(sym, &partial, &context, lm_score, words);
            let key = match cfg.normalization {
                Normalization::EveryStep => hyp_score(cand_nn, ext.lm, ext.words, cfg.lambda),
                Normalization::EndOnly => fused(cand_nn, ext.lm, cfg.lambda),
            };
            if key.is_finite() && best.as_ref().is_none_or(|b| key > b.0) {
                best = Some((key, sym, cand_nn, ext));
            }
        }
        let Some((_, sym, cand_nn, ext)) = best else {
            break;
        };
        state = st;
        ids.push(sym);
        nn = cand_nn;
        lm_score = ext.lm;
        words = ext.words;
        if let Some(id) = ext.completed {
            context.push(id);
        }
        if sym == SPACE || sym == EOS {
            partial.clear();
        } else {
            partial.push(CharVocab.char(sym).unwrap_or('\u{fffd}'));
        }
        if sym == EOS {
            finished = true;
            break;
        }
    }
    Ok(Ranked {
        text: CharVocab.decode(&ids),
        score: hyp_score(nn, lm_score, words, cfg.lambda),
        nn,
        lm: lm_score,
        words,
        finished,
        ids,
    })
}

/// Decodes every sentence with `threads` workers. Output order matches
/// input order and does not depend on the thread count. A failing
/// sentence yields an `Err` entry without stopping the rest.
pub fn correct_corpus<M: StepModel>(
    model: &M,
    lm: Option<&NGramModel>,
    sentences: &[String],
    cfg: &DecodeConfig,
    threads: usize,
) -> Result<Vec<Result<String, DecodeError>>, DecodeError> {
    cfg.validate()?;
    let decode_one = |s: &String| -> Result<String, DecodeError> {
        let best = beam_decode(model, lm, s, cfg)?;
        Ok(best.into_iter().next().map(|r| r.text).unwrap_or_default())
    };
    if threads <= 1 {
        return Ok(sentences.iter().map(decode_one).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| DecodeError::Pool(e.to_string()))?;
    Ok(pool.install(|| sentences.par_iter().map(decode_one).collect()))
}
