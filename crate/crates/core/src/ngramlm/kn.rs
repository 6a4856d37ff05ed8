use std::collections::HashMap;

use super::counts::CountTable;
use super::{LmError, NGramModel, OrderedRows, BOS, EOS_WORD, UNK_WORD};

pub const DEFAULT_DISCOUNT: f64 = 0.75;

/// Per-order sufficient statistics: the numerator for each n-gram (raw
/// counts at the top order, continuation counts below) and, for each
/// context, the denominator and the number of distinct followers.
struct OrderStats {
    numerator: HashMap<Vec<String>, f64>,
    context: HashMap<Vec<String>, (f64, f64)>,
}

struct Estimator {
    d: f64,
    vocab_size: f64,
    orders: Vec<OrderStats>,
}

impl Estimator {
    fn new(counts: &CountTable, d: f64, vocab_size: usize) -> Self {
        let top = counts.order();
        let orders = (1..=top)
            .map(|n| {
                let source = if n == top {
                    counts.table(n)
                } else {
                    counts.continuation_table(n)
                };
                let mut numerator = HashMap::new();
                let mut context: HashMap<Vec<String>, (f64, f64)> = HashMap::new();
                for gram in counts.table(n).keys() {
                    let c = source.get(gram).copied().unwrap_or(0) as f64;
                    numerator.insert(gram.clone(), c);
                    let e = context.entry(gram[..n - 1].to_vec()).or_insert((0.0, 0.0));
                    e.0 += c;
                    e.1 += 1.0;
                }
                OrderStats { numerator, context }
            })
            .collect();
        Estimator {
            d,
            vocab_size: vocab_size as f64,
            orders,
        }
    }

    /// Interpolated KN probability of the last token of `gram` given the rest.
    fn prob(&self, gram: &[String]) -> f64 {
        let n = gram.len();
        let stats = &self.orders[n - 1];
        let (h, lower) = (&gram[..n - 1], &gram[1..]);
        let lower_p = if n == 1 {
            1.0 / self.vocab_size
        } else {
            self.prob(lower)
        };
        match stats.context.get(h) {
            Some(&(denom, types)) if denom > 0.0 => {
                let c = stats.numerator.get(gram).copied().unwrap_or(0.0);
                ((c - self.d).max(0.0) + self.d * types * lower_p) / denom
            }
            _ => lower_p,
        }
    }

    /// Interpolation weight `D · N1+(g •) / denom(g)` when `g` is a context
    /// at the next order up.
    fn backoff(&self, g: &[String]) -> Option<f64> {
        let stats = self.orders.get(g.len())?;
        match stats.context.get(g) {
            Some(&(denom, types)) if denom > 0.0 => Some(self.d * types / denom),
            _ => None,
        }
    }
}

/// Interpolated Kneser-Ney with a single absolute discount `d`.
///
/// The highest order discounts raw counts; every lower order discounts
/// continuation counts, and unigrams interpolate with a uniform
/// distribution over the vocabulary (every word seen, `</s>` and `<unk>`).
/// Each stored n-gram carries its interpolated probability, and each
/// context its interpolation weight as the ARPA backoff, so backoff
/// queries reproduce the interpolated model exactly.
pub fn estimate_kn(counts: &CountTable, d: f64) -> Result<NGramModel, LmError> {
    if !(d > 0.0 && d < 1.0) {
        return Err(LmError::Argument(format!("discount must lie in (0, 1), got {d}")));
    }
    if counts.is_empty() {
        return Err(LmError::Argument(
            "cannot estimate a model from an empty count table".into(),
        ));
    }
    let order = counts.order();
    let mut vocab: Vec<String> = counts.table(1).keys().map(|g| g[0].clone()).collect();
    if !vocab.iter().any(|w| w == UNK_WORD) {
        vocab.push(UNK_WORD.to_string());
    }
    debug_assert!(vocab.iter().any(|w| w == EOS_WORD));
    let est = Estimator::new(counts, d, vocab.len());

    let mut entries: OrderedRows = vec![Vec::new(); order];
    let mut push = |gram: Vec<String>| {
        let p = est.prob(&gram);
        let bo = est.backoff(&gram);
        entries[gram.len() - 1].push((gram, p.log10(), bo.map(f64::log10)));
    };
    for n in 1..=order {
        for gram in counts.table(n).keys() {
            push(gram.clone());
        }
        if n < order {
            // All-<s> contexts are never events but need their backoff weights.
            push(vec![BOS.to_string(); n]);
        }
    }
    if counts.count(&[UNK_WORD]) == 0 {
        push(vec![UNK_WORD.to_string()]);
    }
    NGramModel::from_entries(order, entries)
}
