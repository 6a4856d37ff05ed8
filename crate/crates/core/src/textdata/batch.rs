use rand::seq::SliceRandom;

use super::vocab::{CharVocab, SymbolId, EOS, SOS};
use super::{DataError, ParallelCorpus};
use crate::numcore::Rng;

/// A padded minibatch. Rows are padded with ⟨eos⟩ up to the widest
/// sequence; `*_lengths` hold the true lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    /// Corpus positions of the rows.
    pub indices: Vec<usize>,
    pub source: Vec<Vec<SymbolId>>,
    pub target: Vec<Vec<SymbolId>>,
    pub source_lengths: Vec<usize>,
    pub target_lengths: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// The unpadded `(source, target)` of row `i`.
    pub fn row(&self, i: usize) -> (&[SymbolId], &[SymbolId]) {
        (
            &self.source[i][..self.source_lengths[i]],
            &self.target[i][..self.target_lengths[i]],
        )
    }
}

/// `chars + ⟨eos⟩`.
pub fn source_ids(vocab: &CharVocab, s: &str) -> Vec<SymbolId> {
    vocab.encode(s, true)
}

/// `⟨sos⟩ + chars + ⟨eos⟩`.
pub fn target_ids(vocab: &CharVocab, s: &str) -> Vec<SymbolId> {
    let mut ids = Vec::with_capacity(s.len() + 2);
    ids.push(SOS);
    ids.extend(vocab.encode(s, true));
    ids
}

/// Right-pads with ⟨eos⟩ to a multiple of `2^(layers-1)`, the length the
/// pyramidal encoder halves `layers - 1` times.
pub fn pad_for_pyramid(ids: &[SymbolId], layers: usize) -> Vec<SymbolId> {
    let unit = 1usize << layers.saturating_sub(1);
    let padded = ids.len().div_ceil(unit) * unit;
    let mut out = ids.to_vec();
    out.resize(padded.max(unit), EOS);
    out
}

/// Buckets pairs by source length, fills batches of `batch_size`, then
/// shuffles the batch order. Each pair appears in exactly one batch.
pub fn make_batches(
    corpus: &ParallelCorpus,
    vocab: &CharVocab,
    batch_size: usize,
    rng: &mut Rng,
) -> Result<Vec<Batch>, DataError> {
    if corpus.is_empty() {
        return Err(DataError::Argument("cannot batch an empty corpus".into()));
    }
    if batch_size == 0 {
        return Err(DataError::Argument("batch size must be at least 1".into()));
    }
    let encoded: Vec<(Vec<SymbolId>, Vec<SymbolId>)> = corpus
        .iter()
        .map(|(s, t)| (source_ids(vocab, s), target_ids(vocab, t)))
        .collect();

    // Shuffle first so equal-length pairs land in different batches per epoch.
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| encoded[i].0.len());

    let mut batches: Vec<Batch> = order
        .chunks(batch_size)
        .map(|chunk| {
            let src_w = chunk.iter().map(|&i| encoded[i].0.len()).max().unwrap_or(0);
            let tgt_w = chunk.iter().map(|&i| encoded[i].1.len()).max().unwrap_or(0);
            let pad = |v: &[SymbolId], w: usize| {
                let mut row = v.to_vec();
                row.resize(w, EOS);
                row
            };
            Batch {
                indices: chunk.to_vec(),
                source: chunk.iter().map(|&i| pad(&encoded[i].0, src_w)).collect(),
                target: chunk.iter().map(|&i| pad(&encoded[i].1, tgt_w)).collect(),
                source_lengths: chunk.iter().map(|&i| encoded[i].0.len()).collect(),
                target_lengths: chunk.iter().map(|&i| encoded[i].1.len()).collect(),
            }
        })
        .collect();
    batches.shuffle(rng);
    Ok(batches)
}
