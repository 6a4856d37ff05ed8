//! Scores system output against two-annotator M² gold with MaxMatch, then
//! reports per-type recall, length bins and BLEU.
//!
//! cargo run --release --example score_m2

use charcorrect::metrics::{
    bleu, length_bins_tsv, length_breakdown, m2_evaluate, per_type_recall, type_recall_tsv, EditCounts,
    DEFAULT_MAX_UNCHANGED,
};
use charcorrect::textdata::parse_m2;

const GOLD: &str = "\
S he go to school every days .
A 1 2|||Vform|||goes|||REQUIRED|||-NONE-|||0
A 5 6|||Nn|||day|||REQUIRED|||-NONE-|||0
A 1 2|||Vform|||went|||REQUIRED|||-NONE-|||1
A 5 6|||Nn|||day|||REQUIRED|||-NONE-|||1

S i bought apple in market .
A 2 2|||ArtOrDet|||an|||REQUIRED|||-NONE-|||0
A 4 4|||ArtOrDet|||the|||REQUIRED|||-NONE-|||0

S this is fine .
A -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||0
";

fn main() {
    let gold = parse_m2(GOLD).unwrap();
    let sources: Vec<Vec<String>> = gold.iter().map(|s| s.tokens.clone()).collect();
    let system = [
        "he went to school every day .",
        "i bought an apple in a market .",
        "this is fine .",
    ];
    let hyps: Vec<Vec<String>> = system
        .iter()
        .map(|s| s.split_whitespace().map(str::to_string).collect())
        .collect();

    let report = m2_evaluate(&sources, &hyps, &gold, 0.5, DEFAULT_MAX_UNCHANGED).unwrap();
    print!("{}", report.to_tsv());
    for s in &report.sentences {
        let edits: Vec<String> = s
            .edits
            .iter()
            .map(|e| format!("{}-{}:{}", e.start, e.end, e.target.join(" ")))
            .collect();
        println!("annotator {} edits [{}]", s.annotator, edits.join(", "));
    }

    print!("{}", type_recall_tsv(&per_type_recall(&report)));
    let counts: Vec<EditCounts> = report.sentences.iter().map(|s| s.counts).collect();
    let lengths: Vec<usize> = sources.iter().map(Vec::len).collect();
    print!(
        "{}",
        length_bins_tsv(&length_breakdown(&counts, &lengths, 5, 1, 0.5).unwrap())
    );

    let references: Vec<String> = gold.iter().map(|s| s.corrected(0).join(" ")).collect();
    let outputs: Vec<String> = system.iter().map(|s| s.to_string()).collect();
    println!("BLEU {:.2}", bleu(&outputs, &references).unwrap().bleu);
}
