//! The `charcorrect` command line.
//!
//! Settings come from an optional TOML file (`--config`) shaped like
//! [`RunConfig`]; flags override it. Commands that write files also write
//! the effective configuration next to them, so a run can be repeated with
//! `--config`.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 bad input data,
//! 3 numeric failure.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamsearch::{beam_decode, greedy_decode, DecodeConfig, DecodeError};
use crate::editops::{
    extract_edits, filter_and_apply, gold_to_edits, label_edits, parse_labeled_tsv, train_classifier,
    write_labeled_tsv, ClassifierConfig, EditClassifier, EditError, FeatureScorer, LabeledEdit, WordVectors,
};
use crate::metrics::{
    bleu, length_bins_tsv, length_breakdown, m2_evaluate, per_type_recall, type_recall_tsv, EditCounts, MetricsError,
    ScoreReport, DEFAULT_BIN_WIDTH, DEFAULT_MAX_UNCHANGED, MIN_BIN_SENTENCES,
};
use crate::ngramlm::{count_ngrams, estimate_kn, read_arpa, write_arpa, LmError, NGramModel, DEFAULT_DISCOUNT};
use crate::numcore::rng::{derive_seed, seeded};
use crate::numcore::NumError;
use crate::seq2seq::{ModelConfig, ModelError, Seq2Seq};
use crate::synth::{corrupt_corpus, estimate_error_stats, parse_tagged, tag_heuristic, ErrorDistribution, SynthError};
use crate::textdata::{parse_m2, read_lines, AnnotatedSentence, DataError, ParallelCorpus};
use crate::trainer::{load_checkpoint, train, TrainConfig, TrainError};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonFinite(_) => CliError::Numeric(e.to_string()),
            ModelError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Model(m) => m.into(),
            TrainError::NonFinite { .. } => CliError::Numeric(e.to_string()),
            TrainError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DecodeError> for CliError {
    fn from(e: DecodeError) -> Self {
        match e {
            DecodeError::Model(m) => m.into(),
            DecodeError::Config(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<NumError> for CliError {
    fn from(e: NumError) -> Self {
        match e {
            NumError::NonFinite(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}
data_error!(DataError, LmError, EditError, SynthError, MetricsError, std::io::Error);

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EditsConfig {
    pub p_min: f64,
    pub classifier: ClassifierConfig,
}

impl Default for EditsConfig {
    fn default() -> Self {
        EditsConfig {
            p_min: 0.5,
            classifier: ClassifierConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub lm: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub classifier: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

/// Everything a run can be configured with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Every random choice derives from this seed.
    pub seed: u64,
    /// Sentence-level worker threads. Results do not depend on it.
    pub threads: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub edits: EditsConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 1,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            decode: DecodeConfig::default(),
            edits: EditsConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

#[derive(Debug, Parser)]
#[command(name = "charcorrect", version, about = "Character-level neural text correction")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the encoder-decoder on a source<TAB>target corpus.
    Train(TrainArgs),
    /// Correct one sentence per line.
    Correct(CorrectArgs),
    /// Build or query a Kneser-Ney language model.
    #[command(subcommand)]
    Lm(LmCommand),
    /// Extract, label, classify and filter word edits.
    #[command(subcommand)]
    Edits(EditsCommand),
    /// Estimate error statistics and synthesize errors.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Evaluate corrections.
    #[command(subcommand)]
    Score(ScoreCommand),
    /// Grid-search the LM weight and edit threshold on a dev set.
    Tune(TuneArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Directory for checkpoints, history and the echoed config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub encoder_layers: Option<usize>,
    #[arg(long)]
    pub decoder_layers: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// ARPA language model for shallow fusion.
    #[arg(long)]
    pub lm: Option<PathBuf>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub beam: Option<usize>,
    /// Per-step argmax; same as --beam 1.
    #[arg(long, conflicts_with = "beam")]
    pub greedy: bool,
}

#[derive(Debug, Args)]
pub struct CorrectArgs {
    #[command(flatten)]
    pub decode: DecodeArgs,
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Edit classifier; with it, only edits scored above --p-min are kept.
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub p_min: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum LmCommand {
    /// Count a whitespace-tokenized corpus and write an ARPA file.
    Build {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 5)]
        order: usize,
        #[arg(long, default_value_t = DEFAULT_DISCOUNT)]
        discount: f64,
    },
    /// Print `sentence<TAB>word<TAB>log10 p` for every word and `</s>`.
    Query {
        #[arg(long)]
        lm: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum EditsCommand {
    /// Edits turning each source line into its hypothesis line.
    Extract {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        hypothesis: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Mark extracted edits good or bad against an M² file.
    Label {
        #[arg(long)]
        edits: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Fit the edit classifier on labeled edits.
    TrainClf {
        #[arg(long)]
        labeled: PathBuf,
        /// Source sentences the edit rows refer to.
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Apply only the hypothesis edits the classifier accepts.
    Filter {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        hypothesis: PathBuf,
        #[arg(long)]
        classifier: PathBuf,
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        p_min: Option<f64>,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Estimate error rates from an M² corpus.
    Stats {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write `corrupted<TAB>clean` pairs for clean sentences.
    Corrupt {
        /// One whitespace-tokenized sentence per line.
        #[arg(long, conflicts_with = "tagged")]
        input: Option<PathBuf>,
        /// Pre-tagged sentences instead of the built-in tagger.
        #[arg(long)]
        tagged: Option<PathBuf>,
        #[arg(long)]
        dist: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct GoldArgs {
    /// One corrected sentence per line, aligned with the gold file.
    #[arg(long)]
    pub hypothesis: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_UNCHANGED)]
    pub max_unchanged: usize,
}

#[derive(Debug, Subcommand)]
pub enum ScoreCommand {
    /// MaxMatch precision, recall and F.
    M2(GoldArgs),
    /// Corpus BLEU-4 against one reference per line.
    Bleu {
        #[arg(long)]
        hypothesis: PathBuf,
        #[arg(long)]
        reference: PathBuf,
    },
    /// Recall per error type.
    Types(GoldArgs),
    /// F by source sentence length.
    LengthBins {
        #[command(flatten)]
        gold: GoldArgs,
        #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
        width: usize,
        #[arg(long, default_value_t = MIN_BIN_SENTENCES)]
        min_count: usize,
    },
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub decode: DecodeArgs,
    /// Dev set in M² format.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub classifier: Option<PathBuf>,
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Grid results; the best settings are echoed beside it as TOML.
    #[arg(long)]
    pub output: PathBuf,
}

/// Parses arguments, runs the command and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn main() -> ExitCode {
    main_with_args(std::env::args_os())
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    if cfg.threads == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    cfg.train.seed = cfg.seed;
    match cli.command {
        Command::Train(a) => cmd_train(cfg, a),
        Command::Correct(a) => cmd_correct(cfg, a),
        Command::Lm(c) => cmd_lm(c),
        Command::Edits(c) => cmd_edits(cfg, c),
        Command::Synth(c) => cmd_synth(cfg, c),
        Command::Score(c) => cmd_score(c),
        Command::Tune(a) => cmd_tune(cfg, a),
    }
}

fn required(value: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    value.ok_or_else(|| CliError::Usage(format!("missing {what} (flag or config)")))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Writes the effective configuration as `<output>.config.toml`.
fn echo_config(cfg: &RunConfig, output: &Path) -> Result<()> {
    let mut name = output.as_os_str().to_owned();
    name.push(".config.toml");
    write_file(Path::new(&name), &cfg.to_toml())
}

fn tokenized_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    Ok(read_lines(path)?
        .iter()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect())
}

fn read_gold(path: &Path) -> Result<Vec<AnnotatedSentence>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(parse_m2(&text)?)
}

fn cmd_train(mut cfg: RunConfig, a: TrainArgs) -> Result<()> {
    cfg.paths.train = a.train.or(cfg.paths.train);
    cfg.paths.dev = a.dev.or(cfg.paths.dev);
    cfg.train.checkpoint_dir = a.out.or(cfg.train.checkpoint_dir);
    macro_rules! set {
        ($src:expr, $dst:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(a.epochs, cfg.train.max_epochs);
    set!(a.lr, cfg.train.lr);
    set!(a.batch_size, cfg.train.batch_size);
    set!(a.hidden, cfg.model.hidden);
    set!(a.hidden, cfg.model.embedding);
    set!(a.encoder_layers, cfg.model.encoder_layers);
    set!(a.decoder_layers, cfg.model.decoder_layers);
    set!(a.dropout, cfg.train.dropout);
    if a.clip_norm.is_some() {
        cfg.train.clip_norm = a.clip_norm;
    }
    cfg.model.dropout = cfg.train.dropout;
    cfg.model.validate()?;
    cfg.train.validate()?;

    let train_path = required(cfg.paths.train.clone(), "--train")?;
    let dev_path = required(cfg.paths.dev.clone(), "--dev")?;
    let out = required(cfg.train.checkpoint_dir.clone(), "--out")?;
    fs::create_dir_all(&out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    write_file(&out.join("config.toml"), &cfg.to_toml())?;

    let (train_set, skipped) = ParallelCorpus::read_tsv(&train_path)?;
    if skipped.missing_tab + skipped.empty_source > 0 {
        log::warn!("skipped training lines: {skipped:?}");
    }
    let (dev_set, _) = ParallelCorpus::read_tsv(&dev_path)?;
    let model = Seq2Seq::new(cfg.model.clone(), &mut seeded(derive_seed(cfg.seed, "init")))?;
    let outcome = train(model, &train_set, &dev_set, &cfg.train)?;
    let mut history = String::from("epoch\ttrain_loss\tdev_perplexity\n");
    for h in &outcome.history {
        history.push_str(&format!("{}\t{:.6}\t{:.6}\n", h.epoch, h.train_loss, h.dev_perplexity));
    }
    write_file(&out.join("history.tsv"), &history)?;
    print!("{history}");
    println!(
        "best epoch {} dev perplexity {:.4} -> {}",
        outcome.best_epoch,
        outcome.best_perplexity,
        out.join("best.ckpt").display()
    );
    Ok(())
}

struct Decoder {
    model: Seq2Seq,
    lm: Option<NGramModel>,
    greedy: bool,
}

impl Decoder {
    fn load(cfg: &mut RunConfig, a: &DecodeArgs) -> Result<Self> {
        cfg.paths.checkpoint = a.checkpoint.clone().or(cfg.paths.checkpoint.take());
        cfg.paths.lm = a.lm.clone().or(cfg.paths.lm.take());
        if let Some(l) = a.lambda {
            cfg.decode.lambda = l;
        }
        if let Some(b) = a.beam {
            cfg.decode.beam = b;
        }
        // Width 1 is greedy search; recording it as such keeps the echoed config complete.
        if a.greedy {
            cfg.decode.beam = 1;
        }
        cfg.decode.validate()?;
        let (model, _) = load_checkpoint(&required(cfg.paths.checkpoint.clone(), "--checkpoint")?)?;
        let lm = cfg.paths.lm.as_deref().map(read_arpa).transpose()?;
        Ok(Decoder {
            model,
            lm,
            greedy: cfg.decode.beam == 1,
        })
    }

    fn decode_one(&self, line: &str, dc: &DecodeConfig) -> Result<String> {
        if line.trim().is_empty() {
            return Ok(String::new());
        }
        let lm = self.lm.as_ref();
        Ok(if self.greedy {
            greedy_decode(&self.model, lm, line, dc)?.text
        } else {
            beam_decode(&self.model, lm, line, dc)?
                .into_iter()
                .next()
                .map(|r| r.text)
                .unwrap_or_default()
        })
    }

    /// Decodes in input order; the result does not depend on `threads`.
    /// A sentence that fails is passed through unchanged and logged; the
    /// first failure is returned after the whole batch is done.
    fn decode_all(&self, lines: &[String], dc: &DecodeConfig, threads: usize) -> (Vec<String>, Option<CliError>) {
        let results: Vec<Result<String>> = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(|| lines.par_iter().map(|l| self.decode_one(l, dc)).collect()),
            Err(e) => return (lines.to_vec(), Some(CliError::Data(e.to_string()))),
        };
        let mut first = None;
        let out = results
            .into_iter()
            .zip(lines)
            .enumerate()
            .map(|(i, (r, src))| match r {
                Ok(t) => t,
                Err(e) => {
                    log::error!("sentence {i}: {e}");
                    first.get_or_insert(e);
                    src.clone()
                }
            })
            .collect();
        (out, first)
    }
}

struct EditFilter {
    classifier: EditClassifier,
    vectors: WordVectors,
}

impl EditFilter {
    fn load(classifier: &Path, vectors: &Path) -> Result<Self> {
        Ok(EditFilter {
            classifier: EditClassifier::load(classifier)?,
            vectors: WordVectors::load(vectors)?,
        })
    }

    fn apply(&self, source: &[String], hypothesis: &[String], p_min: f64) -> Result<Vec<String>> {
        let scorer = FeatureScorer {
            classifier: &self.classifier,
            vectors: &self.vectors,
        };
        let edits = extract_edits(source, hypothesis);
        Ok(filter_and_apply(source, &edits, &scorer, p_min)?.0)
    }
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

fn cmd_correct(mut cfg: RunConfig, a: CorrectArgs) -> Result<()> {
    let decoder = Decoder::load(&mut cfg, &a.decode)?;
    cfg.paths.classifier = a.classifier.or(cfg.paths.classifier);
    cfg.paths.vectors = a.vectors.or(cfg.paths.vectors);
    if let Some(p) = a.p_min {
        cfg.edits.p_min = p;
    }
    let filter = match &cfg.paths.classifier {
        Some(c) => Some(EditFilter::load(c, &required(cfg.paths.vectors.clone(), "--vectors")?)?),
        None => None,
    };
    let lines = read_lines(&a.input)?;
    let (mut out, failure) = decoder.decode_all(&lines, &cfg.decode, cfg.threads);
    if let Some(f) = &filter {
        for (hyp, src) in out.iter_mut().zip(&lines) {
            *hyp = f.apply(&words(src), &words(hyp), cfg.edits.p_min)?.join(" ");
        }
    }
    let mut text = out.join("\n");
    text.push('\n');
    match &a.output {
        Some(p) => {
            write_file(p, &text)?;
            echo_config(&cfg, p)?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    failure.map_or(Ok(()), Err)
}

fn cmd_lm(c: LmCommand) -> Result<()> {
    match c {
        LmCommand::Build {
            input,
            output,
            order,
            discount,
        } => {
            if order == 0 {
                return Err(CliError::Usage("--order must be at least 1".into()));
            }
            let sentences = tokenized_lines(&input)?;
            let lm =
                estimate_kn(&count_ngrams(&sentences, order), discount).map_err(|e| CliError::Usage(e.to_string()))?;
            write_arpa(&lm, &output)?;
            println!("{}: {}-gram model, {} unigrams", output.display(), order, lm.count(1));
        }
        LmCommand::Query { lm, input } => {
            let lm = read_arpa(&lm)?;
            let sentences = tokenized_lines(&input)?;
            let mut out = String::new();
            for (i, s) in sentences.iter().enumerate() {
                for (w, lp) in lm.word_logprobs(s) {
                    out.push_str(&format!("{i}\t{w}\t{lp:.6}\n"));
                }
            }
            std::io::stdout().write_all(out.as_bytes())?;
            eprintln!("perplexity {:.4}", lm.perplexity(&sentences));
        }
    }
    Ok(())
}

fn cmd_edits(mut cfg: RunConfig, c: EditsCommand) -> Result<()> {
    match c {
        EditsCommand::Extract {
            source,
            hypothesis,
            output,
        } => {
            let src = tokenized_lines(&source)?;
            let hyp = tokenized_lines(&hypothesis)?;
            if src.len() != hyp.len() {
                return Err(CliError::Data(format!(
                    "{} sources but {} hypotheses",
                    src.len(),
                    hyp.len()
                )));
            }
            let rows: Vec<LabeledEdit> = src
                .iter()
                .zip(&hyp)
                .enumerate()
                .flat_map(|(i, (s, h))| {
                    extract_edits(s, h).into_iter().map(move |edit| LabeledEdit {
                        sentence: i,
                        edit,
                        good: None,
                    })
                })
                .collect();
            write_file(&output, &write_labeled_tsv(&rows))?;
        }
        EditsCommand::Label { edits, gold, output } => {
            let text = fs::read_to_string(&edits)?;
            let rows = parse_labeled_tsv(&text)?;
            let gold = read_gold(&gold)?;
            let mut labeled = Vec::with_capacity(rows.len());
            for row in rows {
                let g = gold
                    .get(row.sentence)
                    .ok_or_else(|| CliError::Data(format!("edit refers to missing sentence {}", row.sentence)))?;
                let gold_edits = gold_to_edits(&g.tokens, g.primary_edits())?;
                let (edit, good) = label_edits(std::slice::from_ref(&row.edit), &gold_edits)
                    .pop()
                    .expect("one edit in, one label out");
                labeled.push(LabeledEdit {
                    good: Some(good),
                    edit,
                    ..row
                });
            }
            write_file(&output, &write_labeled_tsv(&labeled))?;
        }
        EditsCommand::TrainClf {
            labeled,
            source,
            vectors,
            output,
            epochs,
        } => {
            if let Some(e) = epochs {
                cfg.edits.classifier.epochs = e;
            }
            let rows = parse_labeled_tsv(&fs::read_to_string(&labeled)?)?;
            let sentences = tokenized_lines(&source)?;
            let vectors = WordVectors::load(&vectors)?;
            let mut examples = Vec::with_capacity(rows.len());
            for r in rows {
                let Some(good) = r.good else { continue };
                let s = sentences
                    .get(r.sentence)
                    .ok_or_else(|| CliError::Data(format!("edit refers to missing sentence {}", r.sentence)))?;
                examples.push((crate::editops::featurize(&r.edit, s, &vectors)?, good));
            }
            let mut rng = seeded(derive_seed(cfg.seed, "classifier"));
            let clf = train_classifier(&examples, &cfg.edits.classifier, &mut rng)?;
            clf.save(&output)?;
            echo_config(&cfg, &output)?;
        }
        EditsCommand::Filter {
            source,
            hypothesis,
            classifier,
            vectors,
            p_min,
            output,
        } => {
            if let Some(p) = p_min {
                cfg.edits.p_min = p;
            }
            let f = EditFilter::load(&classifier, &vectors)?;
            let src = tokenized_lines(&source)?;
            let hyp = tokenized_lines(&hypothesis)?;
            if src.len() != hyp.len() {
                return Err(CliError::Data(format!(
                    "{} sources but {} hypotheses",
                    src.len(),
                    hyp.len()
                )));
            }
            let mut text = String::new();
            for (s, h) in src.iter().zip(&hyp) {
                text.push_str(&f.apply(s, h, cfg.edits.p_min)?.join(" "));
                text.push('\n');
            }
            write_file(&output, &text)?;
            echo_config(&cfg, &output)?;
        }
    }
    Ok(())
}

fn cmd_synth(cfg: RunConfig, c: SynthCommand) -> Result<()> {
    match c {
        SynthCommand::Stats { gold, output } => {
            let dist = estimate_error_stats(&read_gold(&gold)?);
            write_file(&output, &(dist.to_json() + "\n"))?;
        }
        SynthCommand::Corrupt {
            input,
            tagged,
            dist,
            output,
        } => {
            let dist = ErrorDistribution::load(&dist)?;
            let sentences = match (input, tagged) {
                (_, Some(t)) => parse_tagged(&fs::read_to_string(&t)?)?,
                (Some(i), None) => tokenized_lines(&i)?.iter().map(|s| tag_heuristic(s)).collect(),
                (None, None) => return Err(CliError::Usage("give --input or --tagged".into())),
            };
            let pairs = corrupt_corpus(&sentences, &dist, derive_seed(cfg.seed, "synth"), cfg.threads)?;
            let corpus = ParallelCorpus::from_pairs(pairs.iter().map(|(c, g)| (c.join(" "), g.join(" "))))?;
            write_file(&output, &corpus.to_tsv())?;
            echo_config(&cfg, &output)?;
        }
    }
    Ok(())
}

fn m2_report(g: &GoldArgs) -> Result<(ScoreReport, Vec<AnnotatedSentence>)> {
    let gold = read_gold(&g.gold)?;
    let hyp = tokenized_lines(&g.hypothesis)?;
    let src: Vec<Vec<String>> = gold.iter().map(|s| s.tokens.clone()).collect();
    Ok((m2_evaluate(&src, &hyp, &gold, g.beta, g.max_unchanged)?, gold))
}

fn cmd_score(c: ScoreCommand) -> Result<()> {
    let text = match c {
        ScoreCommand::M2(g) => m2_report(&g)?.0.to_tsv(),
        ScoreCommand::Bleu { hypothesis, reference } => {
            let r = bleu(&read_lines(&hypothesis)?, &read_lines(&reference)?)?;
            let p: Vec<String> = r.precisions.iter().map(|p| format!("{:.2}", p * 100.0)).collect();
            format!(
                "bleu\t{:.2}\nprecisions\t{}\nbrevity_penalty\t{:.4}\nhyp_len\t{}\nref_len\t{}\n",
                r.bleu,
                p.join("/"),
                r.brevity_penalty,
                r.hyp_len,
                r.ref_len
            )
        }
        ScoreCommand::Types(g) => type_recall_tsv(&per_type_recall(&m2_report(&g)?.0)),
        ScoreCommand::LengthBins { gold, width, min_count } => {
            let (report, sentences) = m2_report(&gold)?;
            let counts: Vec<EditCounts> = report.sentences.iter().map(|s| s.counts).collect();
            let lengths: Vec<usize> = sentences.iter().map(|s| s.tokens.len()).collect();
            length_bins_tsv(&length_breakdown(&counts, &lengths, width, min_count, gold.beta)?)
        }
    };
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

/// Values tried by `tune`.
pub fn lambda_grid() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

pub fn p_min_grid() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

fn cmd_tune(mut cfg: RunConfig, a: TuneArgs) -> Result<()> {
    let decoder = Decoder::load(&mut cfg, &a.decode)?;
    cfg.paths.classifier = a.classifier.or(cfg.paths.classifier);
    cfg.paths.vectors = a.vectors.or(cfg.paths.vectors);
    let filter = match &cfg.paths.classifier {
        Some(c) => Some(EditFilter::load(c, &required(cfg.paths.vectors.clone(), "--vectors")?)?),
        None => None,
    };
    let gold = read_gold(&a.gold)?;
    let src: Vec<Vec<String>> = gold.iter().map(|s| s.tokens.clone()).collect();
    let lines: Vec<String> = src.iter().map(|s| s.join(" ")).collect();
    let lambdas = if decoder.lm.is_some() { lambda_grid() } else { vec![0.0] };
    let p_mins: Vec<Option<f64>> = if filter.is_some() {
        p_min_grid().into_iter().map(Some).collect()
    } else {
        vec![None]
    };

    let mut table = String::from("lambda\tp_min\tprecision\trecall\tf0.5\n");
    let mut best: Option<(f64, f64, Option<f64>)> = None;
    for &lambda in &lambdas {
        let dc = DecodeConfig {
            lambda,
            ..cfg.decode.clone()
        };
        let (decoded, failure) = decoder.decode_all(&lines, &dc, cfg.threads);
        if let Some(e) = failure {
            return Err(e);
        }
        let hyps: Vec<Vec<String>> = decoded.iter().map(|h| words(h)).collect();
        for &p_min in &p_mins {
            let final_hyps = match (&filter, p_min) {
                (Some(f), Some(p)) => src
                    .iter()
                    .zip(&hyps)
                    .map(|(s, h)| f.apply(s, h, p))
                    .collect::<Result<Vec<_>>>()?,
                _ => hyps.clone(),
            };
            let r = m2_evaluate(&src, &final_hyps, &gold, 0.5, DEFAULT_MAX_UNCHANGED)?;
            let p_text = p_min.map_or("-".to_string(), |p| format!("{p:.1}"));
            table.push_str(&format!(
                "{lambda:.1}\t{p_text}\t{:.2}\t{:.2}\t{:.2}\n",
                r.precision * 100.0,
                r.recall * 100.0,
                r.f * 100.0
            ));
            if best.is_none_or(|(f, ..)| r.f > f) {
                best = Some((r.f, lambda, p_min));
            }
        }
    }
    let (f, lambda, p_min) = best.expect("grids are nonempty");
    cfg.decode.lambda = lambda;
    if let Some(p) = p_min {
        cfg.edits.p_min = p;
    }
    write_file(&a.output, &table)?;
    echo_config(&cfg, &a.output)?;
    print!("{table}");
    println!(
        "best lambda {lambda:.1} p_min {} f0.5 {:.2}",
        p_min.map_or("-".into(), |p| format!("{p:.1}")),
        f * 100.0
    );
    Ok(())
}
