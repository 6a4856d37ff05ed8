//! Estimates article and noun-number error rates from a small annotated
//! corpus, then uses them to corrupt clean toy sentences.
//!
//! cargo run --release --example synth_errors -- [seed]

use charcorrect::fixture::toy_corpus;
use charcorrect::synth::{corrupt_corpus, estimate_error_stats, tag_heuristic, write_tagged};
use charcorrect::textdata::parse_m2;

const ANNOTATED: &str = "\
S i saw cat in the garden .
A 2 2|||ArtOrDet|||a|||REQUIRED|||-NONE-|||0

S she bought three apple .
A 3 4|||Nn|||apples|||REQUIRED|||-NONE-|||0

S the dogs barks at a strangers .
A 1 2|||Nn|||dog|||REQUIRED|||-NONE-|||0
A 5 6|||Nn|||stranger|||REQUIRED|||-NONE-|||0

S he is a teacher at school .
A 5 5|||ArtOrDet|||the|||REQUIRED|||-NONE-|||0

S we like the music .
A 2 3|||ArtOrDet||||||REQUIRED|||-NONE-|||0
";

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    let gold = parse_m2(ANNOTATED).unwrap();
    let dist = estimate_error_stats(&gold);
    println!("{}", dist.to_json());

    let clean = toy_corpus(8, seed);
    let tagged: Vec<_> = clean.iter().map(|s| tag_heuristic(s)).collect();
    print!("{}", write_tagged(&tagged[..2]));
    for (corrupted, original) in corrupt_corpus(&tagged, &dist, seed, 1).unwrap() {
        println!("{}\n  <- {}", corrupted.join(" "), original.join(" "));
    }
}
