//! Trains the edit classifier on proposals for single-error toy sentences
//! and shows how the threshold trades applied edits for precision.
//!
//! A simulated system fixes the real error most of the time and sometimes
//! adds a spurious change elsewhere. Each proposed edit is labeled against
//! the gold edit, featurized with random word vectors, and fed to the
//! classifier.
//!
//! cargo run --release --example edit_classifier -- [seed]

use charcorrect::editops::{
    extract_edits, featurize, filter_and_apply, label_edits, train_classifier, write_labeled_tsv, ClassifierConfig,
    Edit, FeatureScorer, LabeledEdit, WordVectors, WORD_VECTOR_DIM,
};
use charcorrect::experiment::single_error;
use charcorrect::fixture::toy_corpus;
use charcorrect::numcore::rng::{derive_seed, seeded};
use charcorrect::numcore::Rng;
use charcorrect::synth::{apply_ops, tag_heuristic, SynthOp};
use rand::seq::SliceRandom;
use rand::Rng as _;

struct Case {
    source: Vec<String>,
    clean: Vec<String>,
    proposed: Vec<Edit>,
    labels: Vec<bool>,
}

/// The clean sentence, possibly fixed wrongly, possibly with one more change.
fn system_output(clean: &[String], rng: &mut Rng) -> Vec<String> {
    let mut out = clean.to_vec();
    if rng.gen_bool(0.5) {
        let tagged = tag_heuristic(&out);
        let ops: Vec<SynthOp> = tagged
            .tags
            .iter()
            .enumerate()
            .flat_map(|(i, t)| {
                let del = t.determiner.then_some(SynthOp::Delete(i));
                let flip = t.noun.is_some().then_some(SynthOp::FlipNumber(i));
                del.into_iter().chain(flip)
            })
            .collect();
        let op = ops.choose(rng).expect("toy sentences have nouns").clone();
        out = apply_ops(&tagged, &[op]).expect("op comes from the tags");
    }
    out
}

fn cases(n: usize, seed: u64) -> Vec<Case> {
    let mut rng = seeded(seed);
    toy_corpus(n, derive_seed(seed, "sentences"))
        .into_iter()
        .map(|clean| {
            let (source, gold) = single_error(&clean, &mut rng);
            let gold = Edit::new(&source, gold.start, gold.end, gold.replacement).unwrap();
            let hyp = if rng.gen_bool(0.8) {
                system_output(&clean, &mut rng)
            } else {
                source.clone()
            };
            let (proposed, labels) = label_edits(&extract_edits(&source, &hyp), &[gold]).into_iter().unzip();
            Case {
                source,
                clean,
                proposed,
                labels,
            }
        })
        .collect()
}

fn random_vectors<'a>(cases: impl Iterator<Item = &'a Case>, rng: &mut Rng) -> WordVectors {
    let mut v = WordVectors::new(WORD_VECTOR_DIM);
    for c in cases {
        for w in c.source.iter().chain(&c.clean) {
            if v.get(w).is_none() {
                v.insert(w, (0..WORD_VECTOR_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .unwrap();
            }
        }
    }
    v
}

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let train = cases(600, derive_seed(seed, "train"));
    let test = cases(200, derive_seed(seed, "test"));
    let mut rng = seeded(derive_seed(seed, "vectors"));
    let vectors = random_vectors(train.iter().chain(&test), &mut rng);

    let rows: Vec<LabeledEdit> = train
        .iter()
        .enumerate()
        .flat_map(|(i, c)| {
            c.proposed.iter().zip(&c.labels).map(move |(e, &good)| LabeledEdit {
                sentence: i,
                edit: e.clone(),
                good: Some(good),
            })
        })
        .collect();
    print!("labeled edits (first rows):\n{}", write_labeled_tsv(&rows[..4]));
    let examples: Vec<(Vec<f64>, bool)> = rows
        .iter()
        .map(|r| {
            (
                featurize(&r.edit, &train[r.sentence].source, &vectors).unwrap(),
                r.good.unwrap(),
            )
        })
        .collect();
    let good = examples.iter().filter(|(_, g)| *g).count();
    println!("{} training edits, {good} good", examples.len());

    let clf = train_classifier(
        &examples,
        &ClassifierConfig::default(),
        &mut seeded(derive_seed(seed, "clf")),
    )
    .unwrap();
    let scorer = FeatureScorer {
        classifier: &clf,
        vectors: &vectors,
    };
    println!("p_min  applied  good_applied  exact");
    for p_min in [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
        let (mut applied, mut good_applied, mut exact) = (0, 0, 0);
        for c in &test {
            let (out, n) = filter_and_apply(&c.source, &c.proposed, &scorer, p_min).unwrap();
            applied += n;
            good_applied += c
                .proposed
                .iter()
                .zip(&c.labels)
                .filter(|(e, &g)| g && clf.predict(&featurize(e, &c.source, &vectors).unwrap()).unwrap() > p_min)
                .count();
            exact += usize::from(out == c.clean);
        }
        println!("{p_min:<6.1} {applied:<8} {good_applied:<13} {exact}");
    }
}
