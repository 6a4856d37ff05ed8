use serde::Serialize;

use super::fscore::EditCounts;
use super::MetricsError;

pub const DEFAULT_BIN_WIDTH: usize = 5;
pub const MIN_BIN_SENTENCES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthBin {
    /// Inclusive.
    pub low: usize,
    /// Exclusive.
    pub high: usize,
    pub sentences: usize,
    pub counts: EditCounts,
    pub f: f64,
}

/// Groups sentences by source word count into `[k·width, (k+1)·width)`
/// bins and computes F from each bin's pooled counts. Bins with fewer than
/// `min_sentences` sentences are left out.
pub fn length_breakdown(
    counts: &[EditCounts],
    source_lengths: &[usize],
    width: usize,
    min_sentences: usize,
    beta: f64,
) -> Result<Vec<LengthBin>, MetricsError> {
    if counts.len() != source_lengths.len() {
        return Err(MetricsError::Argument(format!(
            "{} score rows but {} lengths",
            counts.len(),
            source_lengths.len()
        )));
    }
    if width == 0 {
        return Err(MetricsError::Argument("bin width must be positive".into()));
    }
    let mut bins: std::collections::BTreeMap<usize, (usize, EditCounts)> = Default::default();
    for (c, &len) in counts.iter().zip(source_lengths) {
        let b = bins.entry(len / width).or_default();
        b.0 += 1;
        b.1 += *c;
    }
    Ok(bins
        .into_iter()
        .filter(|(_, (n, _))| *n >= min_sentences)
        .map(|(k, (n, c))| LengthBin {
            low: k * width,
            high: (k + 1) * width,
            sentences: n,
            counts: c,
            f: c.f(beta),
        })
        .collect())
}

/// `bin_low<TAB>bin_high<TAB>count<TAB>F`, F in percent.
pub fn length_bins_tsv(bins: &[LengthBin]) -> String {
    let mut out = String::from("bin_low\tbin_high\tcount\tF\n");
    for b in bins {
        out.push_str(&format!("{}\t{}\t{}\t{:.2}\n", b.low, b.high, b.sentences, b.f * 100.0));
    }
    out
}
