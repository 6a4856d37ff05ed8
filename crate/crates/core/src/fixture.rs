//! A small synthetic English corpus for end-to-end runs.
//!
//! Every sentence has the shape `the [adj] noun verb a [adj] noun .` or
//! with a plural object `some [adj] nouns .`. Subjects agree with the verb,
//! singular objects take "a" and plural objects take "some", so any single
//! dropped determiner or flipped noun number has exactly one repair.

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::numcore::rng::seeded;
use crate::synth::pluralize;

const NOUNS: [&str; 10] = [
    "cat", "dog", "bird", "fox", "child", "city", "teacher", "horse", "box", "farmer",
];
const ADJECTIVES: [&str; 6] = ["big", "small", "old", "new", "good", "little"];
/// Third-person singular and plain forms.
const VERBS: [(&str, &str); 6] = [
    ("sees", "see"),
    ("likes", "like"),
    ("wants", "want"),
    ("needs", "need"),
    ("knows", "know"),
    ("gets", "get"),
];

fn noun_phrase(rng: &mut crate::numcore::Rng, det: &str, plural: bool, out: &mut Vec<String>) {
    out.push(det.to_string());
    if rng.gen_bool(0.3) {
        out.push(ADJECTIVES.choose(rng).expect("nonempty").to_string());
    }
    let noun = NOUNS.choose(rng).expect("nonempty");
    out.push(if plural { pluralize(noun) } else { noun.to_string() });
}

/// One tokenized sentence.
pub fn toy_sentence(rng: &mut crate::numcore::Rng) -> Vec<String> {
    let mut out = Vec::with_capacity(9);
    let subject_plural = rng.gen_bool(0.5);
    noun_phrase(rng, "the", subject_plural, &mut out);
    let (sg, pl) = VERBS.choose(rng).expect("nonempty");
    out.push(if subject_plural { pl } else { sg }.to_string());
    let object_plural = rng.gen_bool(0.5);
    noun_phrase(rng, if object_plural { "some" } else { "a" }, object_plural, &mut out);
    out.push(".".to_string());
    out
}

/// `n` sentences, deterministic in `seed`.
pub fn toy_corpus(n: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = seeded(seed);
    (0..n).map(|_| toy_sentence(&mut rng)).collect()
}

/// `n` strings of 1 to `max_len` printable ASCII characters, for copy-task
/// runs.
pub fn random_printable(n: usize, max_len: usize, seed: u64) -> Vec<String> {
    let mut rng = seeded(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            (0..len).map(|_| char::from(rng.gen_range(0x20u8..=0x7e))).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{tag_heuristic, Number};

    #[test]
    fn deterministic_and_well_formed() {
        let a = toy_corpus(50, 3);
        assert_eq!(a, toy_corpus(50, 3));
        for s in &a {
            assert_eq!(s[0], "the");
            assert_eq!(s.last().map(String::as_str), Some("."));
        }
    }

    #[test]
    fn tagger_sees_the_intended_structure() {
        for s in toy_corpus(200, 1) {
            let t = tag_heuristic(&s);
            let nouns: Vec<_> = t.tags.iter().filter_map(|g| g.noun).collect();
            assert_eq!(nouns.len(), 2, "{s:?}");
            let dets = t.tags.iter().filter(|g| g.determiner).count();
            let plural_object = s.contains(&"some".to_string());
            assert_eq!(dets, if plural_object { 1 } else { 2 }, "{s:?}");
            assert_eq!(nouns[1] == Number::Plural, plural_object);
        }
    }
}
