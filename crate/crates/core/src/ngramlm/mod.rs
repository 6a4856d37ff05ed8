//! Word-level interpolated Kneser-Ney language model with ARPA I/O.
//!
//! Probabilities are stored as base-10 logarithms, as in ARPA files.

mod arpa;
mod counts;
mod kn;

use std::collections::HashMap;

pub use arpa::{parse_arpa, read_arpa, to_arpa, write_arpa};
pub use counts::{count_ngrams, pad_sentence, CountTable};
pub use kn::{estimate_kn, DEFAULT_DISCOUNT};

pub const BOS: &str = "<s>";
pub const EOS_WORD: &str = "</s>";
pub const UNK_WORD: &str = "<unk>";

pub type WordId = u32;

#[derive(Debug, thiserror::Error)]
pub enum LmError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    logprob: f64,
    backoff: Option<f64>,
}

/// A backoff n-gram model. Immutable once built, so it can be shared
/// across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    words: Vec<String>,
    index: HashMap<String, WordId>,
    /// `tables[n - 1]` holds the n-grams.
    tables: Vec<HashMap<Vec<WordId>, Entry>>,
    unk: WordId,
    bos: WordId,
}

/// `(ngram, log10 prob, log10 backoff)` rows, one list per order.
pub(crate) type OrderedRows = Vec<Vec<(Vec<String>, f64, Option<f64>)>>;

impl NGramModel {
    /// Builds a model from `(ngram, log10 prob, log10 backoff)` rows grouped
    /// by order. The unigram table must contain `<unk>`.
    pub(crate) fn from_entries(order: usize, entries: OrderedRows) -> Result<Self, LmError> {
        let mut words = Vec::new();
        let mut index: HashMap<String, WordId> = HashMap::new();
        let mut intern = |w: &str| -> WordId {
            if let Some(&id) = index.get(w) {
                return id;
            }
            let id = words.len() as WordId;
            words.push(w.to_string());
            index.insert(w.to_string(), id);
            id
        };
        for special in [BOS, EOS_WORD, UNK_WORD] {
            intern(special);
        }
        let mut tables = vec![HashMap::new(); order];
        for (n, rows) in entries.into_iter().enumerate() {
            for (gram, logprob, backoff) in rows {
                if gram.len() != n + 1 {
                    return Err(LmError::Argument(format!(
                        "{}-gram {gram:?} listed under order {}",
                        gram.len(),
                        n + 1
                    )));
                }
                let ids: Vec<WordId> = gram.iter().map(|w| intern(w)).collect();
                tables[n].insert(ids, Entry { logprob, backoff });
            }
        }
        let unk = index[UNK_WORD];
        let bos = index[BOS];
        if !tables.first().is_some_and(|t| t.contains_key(&vec![unk])) {
            return Err(LmError::Argument("unigram table lacks <unk>".into()));
        }
        Ok(NGramModel {
            order,
            words,
            index,
            tables,
            unk,
            bos,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of n-grams stored for size `n`.
    pub fn count(&self, n: usize) -> usize {
        self.tables.get(n.wrapping_sub(1)).map_or(0, HashMap::len)
    }

    /// Words that can be predicted: every unigram except `<s>`.
    pub fn vocabulary(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.tables[0]
            .keys()
            .map(|k| self.words[k[0] as usize].as_str())
            .filter(|w| *w != BOS)
            .collect();
        v.sort_unstable();
        v
    }

    /// Id for `word`; out-of-vocabulary words map to `<unk>`.
    pub fn word_id(&self, word: &str) -> WordId {
        self.index.get(word).copied().unwrap_or(self.unk)
    }

    pub fn bos_id(&self) -> WordId {
        self.bos
    }

    pub fn eos_id(&self) -> WordId {
        self.index[EOS_WORD]
    }

    /// `log10 P(word | context)` by standard backoff. Only the last
    /// `order - 1` context words are used.
    pub fn logprob(&self, word: &str, context: &[&str]) -> f64 {
        let ctx: Vec<WordId> = context.iter().map(|w| self.word_id(w)).collect();
        self.logprob_ids(self.word_id(word), &ctx)
    }

    pub fn prob(&self, word: &str, context: &[&str]) -> f64 {
        10f64.powf(self.logprob(word, context))
    }

    pub fn logprob_ids(&self, word: WordId, context: &[WordId]) -> f64 {
        let keep = context.len().min(self.order - 1);
        let mut ctx = &context[context.len() - keep..];
        let mut key: Vec<WordId> = Vec::with_capacity(self.order);
        let mut acc = 0.0;
        loop {
            key.clear();
            key.extend_from_slice(ctx);
            key.push(word);
            if let Some(e) = self.tables[ctx.len()].get(&key) {
                return acc + e.logprob;
            }
            if ctx.is_empty() {
                // Unreachable for ids from word_id, which falls back to <unk>.
                return acc + self.tables[0][&vec![self.unk]].logprob;
            }
            if let Some(bo) = self.tables[ctx.len() - 1].get(ctx).and_then(|e| e.backoff) {
                acc += bo;
            }
            ctx = &ctx[1..];
        }
    }

    /// `log10` probability of a whole sentence including `</s>`, with
    /// `<s>` padding at the start.
    pub fn sentence_logprob<S: AsRef<str>>(&self, words: &[S]) -> f64 {
        self.word_logprobs(words).iter().map(|(_, lp)| lp).sum()
    }

    /// Per-token `log10` probabilities, ending with `</s>`.
    pub fn word_logprobs<S: AsRef<str>>(&self, words: &[S]) -> Vec<(String, f64)> {
        let mut ctx = vec![self.bos; self.order - 1];
        let mut out = Vec::with_capacity(words.len() + 1);
        for w in words.iter().map(AsRef::as_ref).chain(std::iter::once(EOS_WORD)) {
            let id = self.word_id(w);
            out.push((w.to_string(), self.logprob_ids(id, &ctx)));
            ctx.push(id);
        }
        out
    }

    /// Per-token perplexity `10^(−Σ log10 p / N)`, counting `</s>`.
    pub fn perplexity<S: AsRef<str>>(&self, sentences: &[Vec<S>]) -> f64 {
        let mut total = 0.0;
        let mut n = 0usize;
        for s in sentences {
            total += self.sentence_logprob(s);
            n += s.len() + 1;
        }
        10f64.powf(-total / n.max(1) as f64)
    }

    fn entries_sorted(&self, n: usize) -> Vec<(Vec<&str>, Entry)> {
        let mut rows: Vec<(Vec<&str>, Entry)> = self.tables[n - 1]
            .iter()
            .map(|(k, e)| (k.iter().map(|&i| self.words[i as usize].as_str()).collect(), *e))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    use crate::numcore::rng::seeded;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn corpus() -> Vec<Vec<String>> {
        [
            "the cat sat on the mat",
            "the dog sat on the log",
            "a cat saw a dog",
            "the dog saw the cat",
            "on the mat sat a cat",
        ]
        .iter()
        .map(|s| toks(s))
        .collect()
    }

    #[test]
    fn distributions_normalize() {
        let m = estimate_kn(&count_ngrams(&corpus(), 3), 0.75).unwrap();
        let vocab = m.vocabulary();
        let mut rng = seeded(4);
        let mut ctx_words = vocab.clone();
        ctx_words.push(BOS);
        ctx_words.push("zebra");
        for _ in 0..200 {
            let len = rng.gen_range(0..=3);
            let ctx: Vec<&str> = (0..len).map(|_| *ctx_words.choose(&mut rng).unwrap()).collect();
            let total: f64 = vocab.iter().map(|w| m.prob(w, &ctx)).sum();
            assert!((total - 1.0).abs() < 1e-9, "context {ctx:?} sums to {total}");
        }
    }

    #[test]
    fn oov_uses_unk() {
        let m = estimate_kn(&count_ngrams(&corpus(), 3), 0.75).unwrap();
        let lp = m.logprob("zebra", &["the"]);
        assert!(lp.is_finite());
        assert_eq!(lp, m.logprob(UNK_WORD, &["the"]));
    }

    #[test]
    fn unigram_with_empty_context_is_stored_value() {
        let m = estimate_kn(&count_ngrams(&corpus(), 3), 0.75).unwrap();
        let id = m.word_id("cat");
        assert_eq!(m.logprob("cat", &[]), m.tables[0][&vec![id]].logprob);
    }

    #[test]
    fn beats_uniform_on_training_data() {
        let c = corpus();
        let m = estimate_kn(&count_ngrams(&c, 3), 0.75).unwrap();
        assert!(m.perplexity(&c) < m.vocabulary().len() as f64);
    }
}
