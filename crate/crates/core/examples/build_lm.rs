//! Builds an interpolated Kneser-Ney 5-gram model on the toy corpus,
//! writes it as ARPA, reads it back and queries it.
//!
//! cargo run --release --example build_lm -- [output.arpa]

use charcorrect::fixture::toy_corpus;
use charcorrect::ngramlm::{count_ngrams, estimate_kn, read_arpa, write_arpa, DEFAULT_DISCOUNT};

fn main() {
    let path = std::env::args()
        .nth(1)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("toy.arpa"));
    let train = toy_corpus(1000, 1);
    let held_out = toy_corpus(100, 2);

    let lm = estimate_kn(&count_ngrams(&train, 5), DEFAULT_DISCOUNT).unwrap();
    write_arpa(&lm, &path).unwrap();
    let lm = read_arpa(&path).unwrap();
    println!("wrote {}", path.display());
    for n in 1..=lm.order() {
        println!("  {n}-grams: {}", lm.count(n));
    }

    let vocab = lm.vocabulary().len() as f64;
    println!("uniform perplexity   {vocab:.1}");
    println!("training perplexity  {:.3}", lm.perplexity(&train));
    println!("held-out perplexity  {:.3}", lm.perplexity(&held_out));

    for sentence in [
        "the cat sees a dog .",
        "the cat see a dog .",
        "the cats sees some dog .",
    ] {
        let words: Vec<&str> = sentence.split(' ').collect();
        println!("{:>9.4}  {sentence}", lm.sentence_logprob(&words));
        for (w, lp) in lm.word_logprobs(&words) {
            print!("  {w}:{lp:.2}");
        }
        println!();
    }
}
