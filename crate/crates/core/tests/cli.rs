//! Drives the `charcorrect` binary end to end on small files.

use std::path::{Path, PathBuf};
use std::process::Command;

use charcorrect::experiment::single_error;
use charcorrect::fixture::toy_corpus;
use charcorrect::numcore::rng::seeded;
use charcorrect::textdata::{write_m2, AnnotatedSentence};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn cli(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_charcorrect"))
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn ok(args: &[&str]) -> String {
    let r = cli(args);
    assert_eq!(r.code, 0, "charcorrect {}\n{}", args.join(" "), r.stderr);
    r.stdout
}

fn bytes(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// A scratch directory holding a small toy corpus and everything derived
/// from it.
struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let ws = Workspace { _dir: dir, root };

        let clean = toy_corpus(40, 21);
        let lines: Vec<String> = clean.iter().map(|s| s.join(" ")).collect();
        ws.write("clean.txt", &(lines.join("\n") + "\n"));
        ws.write(
            "dist.json",
            r#"{"p_delete":0.3,"replace":{},"p_insert":0.1,"insert_choice":{},"p_to_singular":0.3,"p_to_plural":0.3}"#,
        );

        // Single-error sentences with gold annotations.
        let mut rng = seeded(5);
        let mut src = Vec::new();
        let mut gold = Vec::new();
        for c in &clean {
            let (bad, edit) = single_error(c, &mut rng);
            let mut a = AnnotatedSentence::new(bad.clone());
            a.annotators.insert(0, vec![edit]);
            src.push(bad.join(" "));
            gold.push(a);
        }
        ws.write("src.txt", &(src.join("\n") + "\n"));
        ws.write("gold.m2", &write_m2(&gold));
        ws.write("fixed.txt", &(lines.join("\n") + "\n"));
        // Half the hypotheses fix the sentence, the rest also break the last word.
        let noisy: Vec<String> = clean
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let mut c = c.clone();
                if i % 2 == 1 {
                    *c.last_mut().unwrap() = "zzz".into();
                }
                c.join(" ")
            })
            .collect();
        ws.write("noisy.txt", &(noisy.join("\n") + "\n"));

        let mut vocab: Vec<&str> = clean.iter().flatten().map(String::as_str).collect();
        vocab.push("zzz");
        vocab.sort_unstable();
        vocab.dedup();
        let mut vectors = String::new();
        for (k, w) in vocab.iter().enumerate() {
            let v: Vec<String> = (0..100)
                .map(|j| format!("{:.3}", ((k * 31 + j * 7) % 17) as f64 / 17.0 - 0.5))
                .collect();
            vectors.push_str(&format!("{w} {}\n", v.join(" ")));
        }
        ws.write("vectors.txt", &vectors);
        ws
    }

    fn write(&self, name: &str, text: &str) {
        std::fs::write(self.root.join(name), text).unwrap();
    }

    fn p(&self, name: &str) -> String {
        self.root.join(name).display().to_string()
    }

    fn read(&self, name: &str) -> Vec<u8> {
        bytes(&self.root.join(name))
    }

    fn train(&self, out: &str, extra: &[&str]) {
        std::fs::copy(self.root.join("synth.tsv"), self.root.join("train.tsv")).ok();
        let (data, out) = (self.p("train.tsv"), self.p(out));
        let mut args = vec![
            "--seed",
            "3",
            "train",
            "--train",
            &data,
            "--dev",
            &data,
            "--epochs",
            "1",
            "--hidden",
            "8",
            "--batch-size",
            "16",
            "--out",
            &out,
        ];
        args.extend(extra);
        ok(&args);
    }
}

#[test]
fn seeded_subcommands_are_bit_deterministic_and_replay_from_echoed_config() {
    let ws = Workspace::new();
    for name in ["synth.tsv", "synth_again.tsv"] {
        ok(&[
            "--seed",
            "4",
            "synth",
            "corrupt",
            "--input",
            &ws.p("clean.txt"),
            "--dist",
            &ws.p("dist.json"),
            "--output",
            &ws.p(name),
        ]);
    }
    assert_eq!(ws.read("synth.tsv"), ws.read("synth_again.tsv"));
    ok(&[
        "--seed",
        "5",
        "synth",
        "corrupt",
        "--input",
        &ws.p("clean.txt"),
        "--dist",
        &ws.p("dist.json"),
        "--output",
        &ws.p("other.tsv"),
    ]);
    assert_ne!(ws.read("synth.tsv"), ws.read("other.tsv"));

    ws.train("run_a", &["--dropout", "0.2"]);
    ws.train("run_b", &["--dropout", "0.2"]);
    assert_eq!(ws.read("run_a/best.ckpt"), ws.read("run_b/best.ckpt"));
    // Replaying the echoed config with only a new output directory.
    ok(&["--config", &ws.p("run_a/config.toml"), "train", "--out", &ws.p("run_c")]);
    assert_eq!(ws.read("run_a/best.ckpt"), ws.read("run_c/best.ckpt"));
    assert_eq!(ws.read("run_a/history.tsv"), ws.read("run_c/history.tsv"));

    ok(&[
        "lm",
        "build",
        "--input",
        &ws.p("clean.txt"),
        "--output",
        &ws.p("lm.arpa"),
        "--order",
        "3",
    ]);
    let ckpt = ws.p("run_a/best.ckpt");
    let correct = |out: &str| {
        ok(&[
            "--seed",
            "1",
            "correct",
            "--checkpoint",
            &ckpt,
            "--lm",
            &ws.p("lm.arpa"),
            "--lambda",
            "0.4",
            "--beam",
            "3",
            "--input",
            &ws.p("src.txt"),
            "--output",
            &ws.p(out),
        ])
    };
    correct("out1.txt");
    correct("out2.txt");
    assert_eq!(ws.read("out1.txt"), ws.read("out2.txt"));
    ok(&[
        "--config",
        &ws.p("out1.txt.config.toml"),
        "correct",
        "--input",
        &ws.p("src.txt"),
        "--output",
        &ws.p("out3.txt"),
    ]);
    assert_eq!(ws.read("out1.txt"), ws.read("out3.txt"));

    // Edit classifier: extract, label, train twice, filter twice.
    ok(&[
        "edits",
        "extract",
        "--source",
        &ws.p("src.txt"),
        "--hypothesis",
        &ws.p("noisy.txt"),
        "--output",
        &ws.p("edits.tsv"),
    ]);
    ok(&[
        "edits",
        "label",
        "--edits",
        &ws.p("edits.tsv"),
        "--gold",
        &ws.p("gold.m2"),
        "--output",
        &ws.p("labeled.tsv"),
    ]);
    for name in ["clf_a.json", "clf_b.json"] {
        ok(&[
            "--seed",
            "2",
            "edits",
            "train-clf",
            "--labeled",
            &ws.p("labeled.tsv"),
            "--source",
            &ws.p("src.txt"),
            "--vectors",
            &ws.p("vectors.txt"),
            "--epochs",
            "20",
            "--output",
            &ws.p(name),
        ]);
    }
    assert_eq!(ws.read("clf_a.json"), ws.read("clf_b.json"));
    for name in ["filtered_a.txt", "filtered_b.txt"] {
        ok(&[
            "edits",
            "filter",
            "--source",
            &ws.p("src.txt"),
            "--hypothesis",
            &ws.p("noisy.txt"),
            "--classifier",
            &ws.p("clf_a.json"),
            "--vectors",
            &ws.p("vectors.txt"),
            "--p-min",
            "0.5",
            "--output",
            &ws.p(name),
        ]);
    }
    assert_eq!(ws.read("filtered_a.txt"), ws.read("filtered_b.txt"));

    let tune = |out: &str| {
        ok(&[
            "--seed",
            "1",
            "tune",
            "--checkpoint",
            &ckpt,
            "--lm",
            &ws.p("lm.arpa"),
            "--beam",
            "2",
            "--gold",
            &ws.p("gold.m2"),
            "--output",
            &ws.p(out),
        ]);
    };
    tune("tune_a.tsv");
    tune("tune_b.tsv");
    assert_eq!(ws.read("tune_a.tsv"), ws.read("tune_b.tsv"));
    assert_eq!(ws.read("tune_a.tsv.config.toml"), ws.read("tune_b.tsv.config.toml"));
}

#[test]
fn beam_one_is_greedy() {
    let ws = Workspace::new();
    ok(&[
        "--seed",
        "4",
        "synth",
        "corrupt",
        "--input",
        &ws.p("clean.txt"),
        "--dist",
        &ws.p("dist.json"),
        "--output",
        &ws.p("synth.tsv"),
    ]);
    ws.train("run", &[]);
    let ckpt = ws.p("run/best.ckpt");
    let base = ["correct", "--checkpoint", ckpt.as_str(), "--input"];
    let src = ws.p("src.txt");
    let beam = ok(&[&base[..], &[src.as_str(), "--beam", "1"]].concat());
    let greedy = ok(&[&base[..], &[src.as_str(), "--greedy"]].concat());
    assert_eq!(beam, greedy);
    assert_eq!(beam.lines().count(), 40);
}

#[test]
fn scoring_the_gold_correction_is_perfect() {
    let ws = Workspace::new();
    let out = ok(&[
        "score",
        "m2",
        "--hypothesis",
        &ws.p("fixed.txt"),
        "--gold",
        &ws.p("gold.m2"),
    ]);
    assert!(out.contains("precision\t100.00"), "{out}");
    assert!(out.contains("recall\t100.00"), "{out}");
    assert!(out.contains("f0.5\t100.00"), "{out}");

    let out = ok(&[
        "score",
        "m2",
        "--hypothesis",
        &ws.p("src.txt"),
        "--gold",
        &ws.p("gold.m2"),
    ]);
    assert!(out.contains("recall\t0.00"), "{out}");

    let out = ok(&[
        "score",
        "bleu",
        "--hypothesis",
        &ws.p("fixed.txt"),
        "--reference",
        &ws.p("clean.txt"),
    ]);
    assert!(out.starts_with("bleu\t100.00"), "{out}");
    ok(&[
        "score",
        "types",
        "--hypothesis",
        &ws.p("fixed.txt"),
        "--gold",
        &ws.p("gold.m2"),
    ]);
    ok(&[
        "score",
        "length-bins",
        "--hypothesis",
        &ws.p("fixed.txt"),
        "--gold",
        &ws.p("gold.m2"),
    ]);
}

#[test]
fn lm_query_prints_one_row_per_word_and_end() {
    let ws = Workspace::new();
    ok(&[
        "lm",
        "build",
        "--input",
        &ws.p("clean.txt"),
        "--output",
        &ws.p("lm.arpa"),
        "--order",
        "3",
    ]);
    ws.write("q.txt", "the cat\n");
    let out = ok(&["lm", "query", "--lm", &ws.p("lm.arpa"), "--input", &ws.p("q.txt")]);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows.len(), 3, "{out}");
    assert!(rows[2].contains("</s>"));
}

#[test]
fn exit_codes() {
    let ws = Workspace::new();
    assert_eq!(cli(&["--help"]).code, 0);
    assert_eq!(cli(&["frobnicate"]).code, 1);
    assert_eq!(cli(&["correct", "--beam", "2", "--greedy", "--input", "x"]).code, 1);
    ws.write("bad.toml", "seed = 1\nnot_a_key = 2\n");
    assert_eq!(
        cli(&[
            "--config",
            &ws.p("bad.toml"),
            "score",
            "bleu",
            "--hypothesis",
            "a",
            "--reference",
            "b"
        ])
        .code,
        1
    );
    assert_eq!(
        cli(&[
            "score",
            "m2",
            "--hypothesis",
            &ws.p("missing.txt"),
            "--gold",
            &ws.p("gold.m2")
        ])
        .code,
        2
    );
    ws.write("broken.m2", "S a b\nA x y|||ArtOrDet|||z|||REQUIRED|||-NONE-|||0\n");
    assert_eq!(
        cli(&[
            "score",
            "m2",
            "--hypothesis",
            &ws.p("src.txt"),
            "--gold",
            &ws.p("broken.m2")
        ])
        .code,
        2
    );

    // A learning rate this large overflows the parameters on the first step.
    ok(&[
        "--seed",
        "4",
        "synth",
        "corrupt",
        "--input",
        &ws.p("clean.txt"),
        "--dist",
        &ws.p("dist.json"),
        "--output",
        &ws.p("synth.tsv"),
    ]);
    std::fs::copy(ws.root.join("synth.tsv"), ws.root.join("train.tsv")).unwrap();
    let r = cli(&[
        "train",
        "--train",
        &ws.p("train.tsv"),
        "--dev",
        &ws.p("train.tsv"),
        "--out",
        &ws.p("boom"),
        "--epochs",
        "2",
        "--hidden",
        "8",
        "--lr",
        "1e300",
    ]);
    assert_eq!(r.code, 3, "{}", r.stderr);
}
