//! Shallow fusion on a hand-built model: the network prefers one word, the
//! language model another, and the output switches at the weight where
//! the fused scores tie.
//!
//! cargo run --release --example beam_fusion

use charcorrect::beamsearch::{beam_decode, greedy_decode, DecodeConfig, TableModel};
use charcorrect::ngramlm::{count_ngrams, estimate_kn};
use charcorrect::textdata::CharVocab;

fn main() {
    let id = |c| CharVocab.id(c);
    // After the empty prefix: "cat" with 0.7, "cats" with 0.3.
    let mut model = TableModel::new();
    model
        .set("", &[(id('c'), 1.0)])
        .set("c", &[(id('a'), 1.0)])
        .set("ca", &[(id('t'), 1.0)])
        .set("cat", &[(charcorrect::textdata::EOS, 0.7), (id('s'), 0.3)]);

    let corpus: Vec<Vec<&str>> = vec![vec!["cats"], vec!["cats"], vec!["cats"], vec!["cat"]];
    let lm = estimate_kn(&count_ngrams(&corpus, 2), 0.75).unwrap();
    let fused_lm = |w: &str| (lm.logprob(w, &["<s>"]) + lm.logprob("</s>", &[w])) * std::f64::consts::LN_10;
    let threshold = (0.7f64.ln() - 0.3f64.ln()) / (fused_lm("cats") - fused_lm("cat"));
    println!("predicted switch at lambda {threshold:.4}");

    for lambda in [0.0, threshold - 0.01, threshold + 0.01, 1.0] {
        let cfg = DecodeConfig {
            beam: 4,
            lambda,
            nbest: 2,
            ..DecodeConfig::default()
        };
        let ranked = beam_decode(&model, Some(&lm), "x", &cfg).unwrap();
        let listing: Vec<String> = ranked.iter().map(|r| format!("{} ({:.4})", r.text, r.score)).collect();
        println!("lambda {lambda:.4}: {}", listing.join(", "));
    }

    let cfg = DecodeConfig {
        lambda: 0.0,
        ..DecodeConfig::default()
    };
    println!("greedy: {}", greedy_decode(&model, None, "x", &cfg).unwrap().text);
}
