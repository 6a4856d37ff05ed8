//! End-to-end correction run on the toy corpus from [`crate::fixture`].
//!
//! Clean sentences are corrupted with [`crate::synth`], a small model is
//! trained on the pairs, and the result is decoded with and without a word
//! LM built from the clean side. The LM weight is tuned on a dev set and
//! then applied once to the test set.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::beamsearch::{correct_corpus, DecodeConfig};
use crate::fixture::toy_corpus;
use crate::metrics::{m2_evaluate, DEFAULT_MAX_UNCHANGED};
use crate::ngramlm::{count_ngrams, estimate_kn, NGramModel, DEFAULT_DISCOUNT};
use crate::numcore::rng::{derive_seed, seeded};
use crate::numcore::Rng;
use crate::seq2seq::{ModelConfig, Seq2Seq};
use crate::synth::{apply_ops, corrupt_corpus, tag_heuristic, ErrorDistribution, SynthOp, ART_OR_DET, NOUN_NUMBER};
use crate::textdata::{AnnotatedSentence, GoldEdit, ParallelCorpus};
use crate::trainer::{train, TrainConfig};

pub type BoxError = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub threads: usize,
    /// Clean sentences behind the training pairs.
    pub train_sentences: usize,
    /// Clean sentences also kept as identity pairs, as a fraction of the
    /// training sentences.
    pub identity_fraction: f64,
    pub dev_sentences: usize,
    pub test_sentences: usize,
    pub p_delete: f64,
    pub p_flip: f64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub beam: usize,
    pub lm_order: usize,
    pub lambdas: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 11,
            threads: 1,
            train_sentences: 2000,
            identity_fraction: 0.25,
            dev_sentences: 100,
            test_sentences: 200,
            p_delete: 0.3,
            p_flip: 0.3,
            model: ModelConfig {
                dropout: 0.0,
                ..ModelConfig::small(64, 2, 2)
            },
            train: TrainConfig {
                lr: 5e-3,
                batch_size: 32,
                max_epochs: 25,
                dropout: 0.0,
                ..TrainConfig::default()
            },
            beam: 8,
            lm_order: 5,
            lambdas: (0..=10).map(|k| k as f64 / 10.0).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub train_pairs: usize,
    pub epochs: usize,
    pub best_dev_perplexity: f64,
    pub train_seconds: f64,
    /// Beam search without the LM: fraction of test sentences restored exactly.
    pub exact_match: f64,
    pub f_without_lm: f64,
    /// Dev F0.5 for every λ tried.
    pub dev_scores: Vec<(f64, f64)>,
    pub lambda: f64,
    pub exact_match_with_lm: f64,
    pub f_with_lm: f64,
    pub total_seconds: f64,
}

/// One corruption of a clean toy sentence, with the gold edit that undoes
/// it expressed over the corrupted tokens.
pub fn single_error(clean: &[String], rng: &mut Rng) -> (Vec<String>, GoldEdit) {
    let tagged = tag_heuristic(clean);
    let mut ops = Vec::new();
    for (i, tag) in tagged.tags.iter().enumerate() {
        if tag.determiner {
            ops.push(SynthOp::Delete(i));
        }
        if tag.noun.is_some() {
            ops.push(SynthOp::FlipNumber(i));
        }
    }
    let op = ops.choose(rng).expect("toy sentences have nouns").clone();
    let corrupted = apply_ops(&tagged, std::slice::from_ref(&op)).expect("op comes from the tags");
    let gold = match op {
        SynthOp::Delete(i) => GoldEdit::new(i, i, ART_OR_DET, &[&clean[i]]),
        SynthOp::FlipNumber(i) => GoldEdit::new(i, i + 1, NOUN_NUMBER, &[&clean[i]]),
        _ => unreachable!("only deletions and flips are proposed"),
    };
    (corrupted, gold)
}

struct EvalSet {
    clean: Vec<Vec<String>>,
    corrupted: Vec<Vec<String>>,
    gold: Vec<AnnotatedSentence>,
}

fn eval_set(n: usize, seed: u64) -> EvalSet {
    let clean = toy_corpus(n, derive_seed(seed, "sentences"));
    let mut rng = seeded(derive_seed(seed, "errors"));
    let mut corrupted = Vec::with_capacity(n);
    let mut gold = Vec::with_capacity(n);
    for c in &clean {
        let (bad, edit) = single_error(c, &mut rng);
        let mut a = AnnotatedSentence::new(bad.clone());
        a.annotators.insert(0, vec![edit]);
        corrupted.push(bad);
        gold.push(a);
    }
    EvalSet { clean, corrupted, gold }
}

struct Scored {
    exact: f64,
    f: f64,
}

fn evaluate(
    model: &Seq2Seq,
    lm: Option<&NGramModel>,
    set: &EvalSet,
    cfg: &DecodeConfig,
    threads: usize,
) -> Result<Scored, BoxError> {
    let lines: Vec<String> = set.corrupted.iter().map(|s| s.join(" ")).collect();
    let mut hyps = Vec::with_capacity(lines.len());
    for r in correct_corpus(model, lm, &lines, cfg, threads)? {
        hyps.push(r?.split_whitespace().map(str::to_string).collect::<Vec<_>>());
    }
    let exact = hyps.iter().zip(&set.clean).filter(|(h, c)| h == c).count() as f64 / hyps.len() as f64;
    let report = m2_evaluate(&set.corrupted, &hyps, &set.gold, 0.5, DEFAULT_MAX_UNCHANGED)?;
    Ok(Scored { exact, f: report.f })
}

/// Runs the whole pipeline. Progress goes to the `log` facade.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, BoxError> {
    let start = Instant::now();
    let clean = toy_corpus(cfg.train_sentences, derive_seed(cfg.seed, "train"));
    let dist = ErrorDistribution {
        p_delete: cfg.p_delete,
        p_to_plural: cfg.p_flip,
        p_to_singular: cfg.p_flip,
        ..ErrorDistribution::default()
    };
    let tagged: Vec<_> = clean.iter().map(|s| tag_heuristic(s)).collect();
    let mut pairs: Vec<(String, String)> = corrupt_corpus(&tagged, &dist, derive_seed(cfg.seed, "synth"), cfg.threads)?
        .into_iter()
        .map(|(c, g)| (c.join(" "), g.join(" ")))
        .collect();
    let identities = (cfg.identity_fraction * clean.len() as f64).round() as usize;
    pairs.extend(clean.iter().take(identities).map(|s| (s.join(" "), s.join(" "))));
    let train_corpus = ParallelCorpus::from_pairs(pairs)?;

    let dev = eval_set(cfg.dev_sentences, derive_seed(cfg.seed, "dev"));
    let test = eval_set(cfg.test_sentences, derive_seed(cfg.seed, "test"));
    let dev_corpus = ParallelCorpus::from_pairs(
        dev.corrupted
            .iter()
            .zip(&dev.clean)
            .map(|(c, g)| (c.join(" "), g.join(" "))),
    )?;
    log::info!(
        "{} training pairs from {} clean sentences",
        train_corpus.len(),
        clean.len()
    );

    let model = Seq2Seq::new(cfg.model.clone(), &mut seeded(derive_seed(cfg.seed, "init")))?;
    let train_cfg = TrainConfig {
        seed: cfg.seed,
        ..cfg.train.clone()
    };
    let t0 = Instant::now();
    let outcome = train(model, &train_corpus, &dev_corpus, &train_cfg)?;
    let train_seconds = t0.elapsed().as_secs_f64();
    let model = outcome.best;

    let lm = estimate_kn(&count_ngrams(&clean, cfg.lm_order), DEFAULT_DISCOUNT)?;
    let plain = DecodeConfig {
        beam: cfg.beam,
        lambda: 0.0,
        ..DecodeConfig::default()
    };
    let without = evaluate(&model, None, &test, &plain, cfg.threads)?;
    log::info!("test without LM: exact {:.3} F0.5 {:.4}", without.exact, without.f);

    let mut dev_scores = Vec::with_capacity(cfg.lambdas.len());
    for &lambda in &cfg.lambdas {
        let dc = DecodeConfig {
            lambda,
            ..plain.clone()
        };
        let s = evaluate(&model, Some(&lm), &dev, &dc, cfg.threads)?;
        log::info!("dev lambda {lambda:.1}: F0.5 {:.4}", s.f);
        dev_scores.push((lambda, s.f));
    }
    // First maximum, so ties favour the smaller weight.
    let lambda = dev_scores
        .iter()
        .fold(None, |best: Option<(f64, f64)>, &(l, f)| match best {
            Some((_, bf)) if bf >= f => best,
            _ => Some((l, f)),
        })
        .map(|(l, _)| l)
        .unwrap_or(0.0);
    let with = evaluate(&model, Some(&lm), &test, &DecodeConfig { lambda, ..plain }, cfg.threads)?;
    log::info!(
        "test with LM (lambda {lambda:.1}): exact {:.3} F0.5 {:.4}",
        with.exact,
        with.f
    );

    Ok(ExperimentReport {
        train_pairs: train_corpus.len(),
        epochs: outcome.history.len(),
        best_dev_perplexity: outcome.best_perplexity,
        train_seconds,
        exact_match: without.exact,
        f_without_lm: without.f,
        dev_scores,
        lambda,
        exact_match_with_lm: with.exact,
        f_with_lm: with.f,
        total_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textdata::apply_gold_edits;

    #[test]
    fn single_errors_are_undone_by_their_gold_edit() {
        let mut rng = seeded(4);
        for clean in toy_corpus(300, 9) {
            let (bad, edit) = single_error(&clean, &mut rng);
            assert_ne!(bad, clean);
            assert_eq!(apply_gold_edits(&bad, &[edit]), clean);
        }
    }
}
