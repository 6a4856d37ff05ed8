use std::collections::{BTreeMap, HashMap};

use super::{BOS, EOS_WORD};

/// Raw n-gram counts of sizes `1..=order` plus left-continuation counts.
///
/// Sentences are padded with `order - 1` copies of `<s>` and one `</s>`.
/// An n-gram whose last token is `<s>` is never an event and is not
/// counted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountTable {
    order: usize,
    /// `counts[n - 1]` maps n-grams to their frequency.
    counts: Vec<BTreeMap<Vec<String>, u64>>,
    /// `continuation[n - 1]` maps an n-gram `g` to `N1+(• g)`, the number
    /// of distinct words seen immediately before it. Defined for `n < order`.
    continuation: Vec<BTreeMap<Vec<String>, u64>>,
}

impl CountTable {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_empty(&self) -> bool {
        self.counts.iter().all(BTreeMap::is_empty)
    }

    /// Frequency of an n-gram; zero when unseen.
    pub fn count(&self, ngram: &[&str]) -> u64 {
        self.lookup(&self.counts, ngram)
    }

    /// `N1+(• g)` for `g` shorter than the model order.
    pub fn continuation(&self, ngram: &[&str]) -> u64 {
        self.lookup(&self.continuation, ngram)
    }

    fn lookup(&self, table: &[BTreeMap<Vec<String>, u64>], ngram: &[&str]) -> u64 {
        if ngram.is_empty() || ngram.len() > table.len() {
            return 0;
        }
        let key: Vec<String> = ngram.iter().map(|s| s.to_string()).collect();
        table[ngram.len() - 1].get(&key).copied().unwrap_or(0)
    }

    /// All counted n-grams of size `n`, in lexicographic order.
    pub fn ngrams(&self, n: usize) -> impl Iterator<Item = (&[String], u64)> {
        self.counts
            .get(n.wrapping_sub(1))
            .into_iter()
            .flat_map(|m| m.iter().map(|(k, &v)| (k.as_slice(), v)))
    }

    pub(crate) fn table(&self, n: usize) -> &BTreeMap<Vec<String>, u64> {
        &self.counts[n - 1]
    }

    pub(crate) fn continuation_table(&self, n: usize) -> &BTreeMap<Vec<String>, u64> {
        &self.continuation[n - 1]
    }
}

/// Pads `words` with `order - 1` leading `<s>` and a trailing `</s>`.
pub fn pad_sentence<S: AsRef<str>>(words: &[S], order: usize) -> Vec<String> {
    let mut out = vec![BOS.to_string(); order.saturating_sub(1)];
    out.extend(words.iter().map(|w| w.as_ref().to_string()));
    out.push(EOS_WORD.to_string());
    out
}

/// Counts every n-gram of sizes `1..=order` in the padded sentences and
/// derives the continuation counts. `order` is clamped to at least 1.
pub fn count_ngrams<S: AsRef<str>>(sentences: &[Vec<S>], order: usize) -> CountTable {
    let order = order.max(1);
    let mut counts = vec![BTreeMap::new(); order];
    for sentence in sentences {
        let padded = pad_sentence(sentence, order);
        for end in 0..padded.len() {
            if padded[end] == BOS {
                continue;
            }
            for n in 1..=order.min(end + 1) {
                let gram = padded[end + 1 - n..=end].to_vec();
                *counts[n - 1].entry(gram).or_insert(0u64) += 1;
            }
        }
    }
    if counts.iter().all(BTreeMap::is_empty) {
        return CountTable {
            order,
            counts,
            continuation: vec![BTreeMap::new(); order - 1],
        };
    }

    let mut continuation = vec![BTreeMap::new(); order - 1];
    for n in 2..=order {
        let mut lefts: HashMap<&[String], u64> = HashMap::new();
        for gram in counts[n - 1].keys() {
            *lefts.entry(&gram[1..]).or_insert(0) += 1;
        }
        for (suffix, k) in lefts {
            continuation[n - 2].insert(suffix.to_vec(), k);
        }
    }
    CountTable {
        order,
        counts,
        continuation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn bigram_enumeration() {
        let t = count_ngrams(&[toks("a a")], 2);
        let bigrams: Vec<(Vec<String>, u64)> = t.ngrams(2).map(|(g, c)| (g.to_vec(), c)).collect();
        assert_eq!(
            bigrams,
            vec![(toks("<s> a"), 1), (toks("a </s>"), 1), (toks("a a"), 1),]
        );
        assert_eq!(t.count(&["a"]), 2);
        assert_eq!(t.count(&["<s>"]), 0);
    }

    #[test]
    fn empty_corpus_gives_empty_table() {
        let t = count_ngrams::<String>(&[], 3);
        assert!(t.is_empty());
        assert_eq!(t.ngrams(1).count(), 0);
    }

    #[test]
    fn continuation_counts_distinct_left_words() {
        let t = count_ngrams(&[toks("a b"), toks("c b")], 2);
        assert_eq!(t.continuation(&["b"]), 2);
        assert_eq!(t.continuation(&["a"]), 1);
        assert_eq!(t.continuation(&["</s>"]), 1);
    }

    #[test]
    fn every_event_has_a_left_extension() {
        let t = count_ngrams(&[toks("x y z"), toks("y")], 4);
        for n in 1..4 {
            for (g, _) in t.ngrams(n) {
                let g: Vec<&str> = g.iter().map(String::as_str).collect();
                assert!(t.continuation(&g) >= 1, "{g:?}");
            }
        }
    }
}
