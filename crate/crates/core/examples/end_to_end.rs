//! Full pipeline on the toy corpus: synthesize errors, train, decode with
//! beam search, tune the LM weight on a dev set and score the test set.
//!
//! cargo run --release --example end_to_end -- [epochs] [hidden] [train_sentences] [seed]

use charcorrect::experiment::{run_experiment, ExperimentConfig};
use charcorrect::seq2seq::ModelConfig;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize| args.get(i).and_then(|a| a.parse::<u64>().ok());
    let mut cfg = ExperimentConfig::default();
    if let Some(e) = arg(1) {
        cfg.train.max_epochs = e as usize;
    }
    if let Some(h) = arg(2) {
        cfg.model = ModelConfig {
            dropout: 0.0,
            ..ModelConfig::small(h as usize, 2, 2)
        };
    }
    if let Some(n) = arg(3) {
        cfg.train_sentences = n as usize;
    }
    if let Some(s) = arg(4) {
        cfg.seed = s;
    }

    let r = run_experiment(&cfg).expect("pipeline runs");
    println!("training pairs        {}", r.train_pairs);
    println!("epochs                {} ({:.0}s)", r.epochs, r.train_seconds);
    println!("best dev perplexity   {:.4}", r.best_dev_perplexity);
    println!("exact match, no LM    {:.3}", r.exact_match);
    println!("F0.5, no LM           {:.4}", r.f_without_lm);
    for (l, f) in &r.dev_scores {
        println!("  dev lambda {l:.1}       {f:.4}");
    }
    println!("tuned lambda          {:.1}", r.lambda);
    println!("exact match, LM       {:.3}", r.exact_match_with_lm);
    println!("F0.5, LM              {:.4}", r.f_with_lm);
    println!("total                 {:.0}s", r.total_seconds);
}
