//! Compares backpropagated gradients with central differences for every
//! parameter of a small encoder-decoder.
//!
//! cargo run --release --example gradient_check -- [seed]

use charcorrect::numcore::rng::seeded;
use charcorrect::numcore::{grad_check, GradCheckConfig};
use charcorrect::seq2seq::{ModelConfig, Phase, Seq2Seq};
use charcorrect::textdata::{source_ids, target_ids, CharVocab};

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(11);
    let cfg = ModelConfig {
        init_scale: 1.0,
        dropout: 0.0,
        ..ModelConfig::small(8, 2, 2)
    };
    let model = Seq2Seq::new(cfg.clone(), &mut seeded(seed)).unwrap();
    let src = source_ids(&CharVocab, "cat s");
    let tgt = target_ids(&CharVocab, "cats!");

    let (loss, grads) = model.backward(&src, &tgt, &mut Phase::Eval).unwrap();
    let mut store = model.params().clone();
    // The shifted loss has the same gradients but a value near zero, which
    // keeps the differences well above rounding noise.
    let report = grad_check(
        |p| {
            Seq2Seq::from_params(cfg.clone(), p.clone())
                .unwrap()
                .excess_loss(&src, &tgt, &mut Phase::Eval)
                .unwrap()
        },
        &grads,
        &mut store,
        &GradCheckConfig::default(),
    )
    .unwrap();

    println!("loss {loss:.6}, {} coordinates checked", report.checked);
    for (name, err) in &report.per_tensor {
        println!("{name:<28} {err:.2e}");
    }
    println!("max relative error {:.2e}", report.max_rel_error);
    if let Some(w) = report.worst {
        println!(
            "worst: {}[{}] analytic {:.6e} numeric {:.6e}",
            w.name, w.index, w.analytic, w.numeric
        );
    }
}
