//! Overfits the model on a copy task: 200 random printable strings that
//! must be reproduced verbatim. Reports teacher-forced accuracy and greedy
//! exact match on the training set.
//!
//! cargo run --release --example copy_task -- [epochs] [seed] [lr] [batch] [clip]

use std::time::Instant;

use charcorrect::beamsearch::{greedy_decode, DecodeConfig, Normalization};
use charcorrect::fixture::random_printable;
use charcorrect::numcore::rng::seeded;
use charcorrect::seq2seq::{ModelConfig, Seq2Seq};
use charcorrect::textdata::ParallelCorpus;
use charcorrect::trainer::{char_accuracy, train, TrainConfig};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let seed: u64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(7);
    let lr: f64 = args.get(3).and_then(|a| a.parse().ok()).unwrap_or(5e-3);
    let batch: usize = args.get(4).and_then(|a| a.parse().ok()).unwrap_or(16);
    let clip: Option<f64> = args.get(5).and_then(|a| a.parse().ok());

    let strings = random_printable(200, 20, seed);
    let corpus = ParallelCorpus::from_pairs(strings.iter().map(|s| (s.as_str(), s.as_str()))).unwrap();
    let model_cfg = ModelConfig {
        dropout: 0.0,
        ..ModelConfig::small(64, 2, 2)
    };
    let model = Seq2Seq::new(model_cfg, &mut seeded(seed)).unwrap();
    let cfg = TrainConfig {
        lr,
        batch_size: batch,
        clip_norm: clip,
        max_epochs: epochs,
        dropout: 0.0,
        seed,
        target_perplexity: Some(1.005),
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let out = train(model, &corpus, &corpus, &cfg).unwrap();
    println!(
        "trained {} epochs in {:.1}s, best perplexity {:.4}",
        out.history.len(),
        start.elapsed().as_secs_f64(),
        out.best_perplexity
    );
    println!(
        "teacher-forced accuracy {:.4}",
        char_accuracy(&out.best, &corpus).unwrap()
    );
    let decode = DecodeConfig {
        lambda: 0.0,
        normalization: Normalization::EndOnly,
        ..DecodeConfig::default()
    };
    let exact = strings
        .iter()
        .filter(|s| greedy_decode(&out.best, None, s, &decode).unwrap().text == **s)
        .count();
    println!("greedy exact match {:.4}", exact as f64 / strings.len() as f64);
}
