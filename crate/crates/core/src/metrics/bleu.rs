use std::collections::HashMap;

use super::MetricsError;

pub const BLEU_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct BleuReport {
    /// 0 to 100.
    pub bleu: f64,
    pub precisions: [f64; BLEU_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

fn ngram_counts(tokens: &[&str], n: usize) -> HashMap<Vec<String>, usize> {
    let mut m = HashMap::new();
    for w in tokens.windows(n) {
        *m.entry(w.iter().map(|s| s.to_string()).collect()).or_insert(0) += 1;
    }
    m
}

/// Corpus BLEU-4 against one reference per sentence: clipped n-gram
/// precisions pooled over the corpus, geometric mean, brevity penalty.
/// Case-sensitive, whitespace-tokenized, unsmoothed.
pub fn bleu(hypotheses: &[String], references: &[String]) -> Result<BleuReport, MetricsError> {
    if hypotheses.len() != references.len() {
        return Err(MetricsError::Argument(format!(
            "{} hypotheses but {} references",
            hypotheses.len(),
            references.len()
        )));
    }
    if hypotheses.is_empty() {
        return Err(MetricsError::Argument("empty corpus".into()));
    }
    let mut correct = [0usize; BLEU_ORDER];
    let mut total = [0usize; BLEU_ORDER];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (h, r) in hypotheses.iter().zip(references) {
        let h: Vec<&str> = h.split_whitespace().collect();
        let r: Vec<&str> = r.split_whitespace().collect();
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=BLEU_ORDER {
            let rc = ngram_counts(&r, n);
            for (g, c) in ngram_counts(&h, n) {
                correct[n - 1] += c.min(rc.get(&g).copied().unwrap_or(0));
            }
            total[n - 1] += h.len().saturating_sub(n - 1);
        }
    }
    let mut precisions = [0.0; BLEU_ORDER];
    for n in 0..BLEU_ORDER {
        precisions[n] = if total[n] == 0 {
            0.0
        } else {
            correct[n] as f64 / total[n] as f64
        };
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    let bleu = if precisions.contains(&0.0) {
        0.0
    } else {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / BLEU_ORDER as f64;
        100.0 * brevity_penalty * log_mean.exp()
    };
    Ok(BleuReport {
        bleu,
        precisions,
        brevity_penalty,
        hyp_len,
        ref_len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn identical_is_100() {
        let c = s(&["the cat sat on the mat", "a b c d e"]);
        assert!((bleu(&c, &c).unwrap().bleu - 100.0).abs() < 1e-9);
    }

    #[test]
    fn disjoint_is_0() {
        assert_eq!(bleu(&s(&["a b c d"]), &s(&["e f g h"])).unwrap().bleu, 0.0);
    }

    #[test]
    fn brevity_penalty() {
        let r = bleu(&s(&["a b c d"]), &s(&["a b c d e"])).unwrap();
        assert_eq!(r.precisions, [1.0; 4]);
        let bp = (1.0f64 - 5.0 / 4.0).exp();
        assert!((r.bleu - 100.0 * bp).abs() < 1e-9);
        assert!((r.bleu - 77.88).abs() < 0.005);
    }

    #[test]
    fn case_sensitive_and_clipped() {
        let r = bleu(&s(&["The the the the"]), &s(&["the cat"])).unwrap();
        assert_eq!(r.precisions[0], 0.25);
        assert!(bleu(&[], &[]).is_err());
    }
}
