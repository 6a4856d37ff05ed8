use super::inflect::{irregular_plural, irregular_singular};
use super::SynthError;

pub const DETERMINERS: [&str; 14] = [
    "a", "an", "the", "this", "that", "these", "those", "my", "your", "his", "her", "its", "our", "their",
];

/// Words never tagged as nouns.
const FUNCTION_WORDS: &[&str] = &[
    "i",
    "you",
    "he",
    "she",
    "it",
    "we",
    "they",
    "me",
    "him",
    "us",
    "them",
    "mine",
    "yours",
    "hers",
    "ours",
    "theirs",
    "myself",
    "yourself",
    "himself",
    "herself",
    "itself",
    "ourselves",
    "themselves",
    "who",
    "whom",
    "whose",
    "which",
    "what",
    "where",
    "when",
    "why",
    "how",
    "there",
    "here",
    "some",
    "any",
    "no",
    "every",
    "each",
    "all",
    "both",
    "either",
    "neither",
    "many",
    "much",
    "few",
    "more",
    "most",
    "less",
    "other",
    "another",
    "such",
    "one",
    "of",
    "in",
    "on",
    "at",
    "to",
    "for",
    "with",
    "by",
    "from",
    "about",
    "into",
    "over",
    "under",
    "after",
    "before",
    "between",
    "through",
    "during",
    "without",
    "within",
    "against",
    "among",
    "around",
    "as",
    "than",
    "and",
    "or",
    "but",
    "nor",
    "so",
    "yet",
    "if",
    "because",
    "although",
    "though",
    "while",
    "unless",
    "since",
    "until",
    "is",
    "are",
    "was",
    "were",
    "be",
    "been",
    "being",
    "am",
    "have",
    "has",
    "had",
    "do",
    "does",
    "did",
    "will",
    "would",
    "can",
    "could",
    "shall",
    "should",
    "may",
    "might",
    "must",
    "not",
    "very",
    "also",
    "too",
    "just",
    "only",
    "even",
    "still",
    "already",
    "always",
    "never",
    "often",
    "again",
    "then",
    "now",
    "well",
    "up",
    "down",
    "out",
    "off",
    "away",
    "back",
    "get",
    "gets",
    "got",
    "go",
    "goes",
    "went",
    "gone",
    "make",
    "makes",
    "made",
    "take",
    "takes",
    "took",
    "say",
    "says",
    "said",
    "see",
    "sees",
    "saw",
    "seen",
    "come",
    "comes",
    "came",
    "know",
    "knows",
    "knew",
    "think",
    "thinks",
    "thought",
    "give",
    "gives",
    "gave",
    "want",
    "wants",
    "like",
    "likes",
    "use",
    "uses",
    "need",
    "needs",
    "become",
    "becomes",
    "became",
    "good",
    "new",
    "old",
    "big",
    "small",
    "great",
    "high",
    "low",
    "important",
    "different",
    "large",
    "long",
    "little",
    "own",
    "same",
    "able",
    "last",
    "first",
    "next",
];

/// Words that fill the determiner slot without being in the lexicon; no
/// article can be inserted after them.
const QUANTIFIERS: &[&str] = &[
    "some", "any", "no", "every", "each", "all", "both", "either", "neither", "many", "much", "few", "several",
    "enough", "another", "such", "whose", "which", "what",
];

/// Adjectives among the function words; with suffix-marked adjectives and
/// numerals they form the run a noun phrase may open with.
const COMMON_ADJECTIVES: &[&str] = &[
    "good",
    "new",
    "old",
    "big",
    "small",
    "great",
    "high",
    "low",
    "important",
    "different",
    "large",
    "long",
    "little",
    "own",
    "same",
    "able",
    "last",
    "first",
    "next",
    "other",
];

const ADJECTIVE_SUFFIXES: &[&str] = &["ive", "ous", "ful", "able", "ible", "less", "ish", "ical"];
const VERB_SUFFIXES: &[&str] = &["ed", "ing", "ize", "ise", "ate", "ify"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Number {
    Singular,
    Plural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TokenTag {
    pub determiner: bool,
    pub noun: Option<Number>,
    pub np_start: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedSentence {
    pub tokens: Vec<String>,
    pub tags: Vec<TokenTag>,
}

pub fn is_determiner(word: &str) -> bool {
    DETERMINERS.contains(&word.to_lowercase().as_str())
}

fn noun_number(word: &str, index: usize) -> Option<Number> {
    if word.len() < 2 || !word.chars().all(|c| c.is_ascii_alphabetic()) {
        return None;
    }
    // Capitalized words inside a sentence are treated as names.
    if index > 0 && word.starts_with(|c: char| c.is_ascii_uppercase()) {
        return None;
    }
    let w = word.to_ascii_lowercase();
    if is_determiner(&w) || FUNCTION_WORDS.contains(&w.as_str()) || w.ends_with("ly") {
        return None;
    }
    if irregular_singular(&w).is_some() {
        return Some(Number::Plural);
    }
    if irregular_plural(&w).is_some() {
        return Some(Number::Singular);
    }
    let stem = w.strip_suffix('s').unwrap_or(&w);
    if ADJECTIVE_SUFFIXES
        .iter()
        .chain(VERB_SUFFIXES)
        .any(|s| stem.ends_with(s))
    {
        return None;
    }
    if w.ends_with('s') && !["ss", "us", "is", "ous"].iter().any(|s| w.ends_with(s)) {
        Some(Number::Plural)
    } else {
        Some(Number::Singular)
    }
}

fn is_premodifier(word: &str) -> bool {
    let w = word.to_ascii_lowercase();
    COMMON_ADJECTIVES.contains(&w.as_str())
        || (w.len() > 4 && ADJECTIVE_SUFFIXES.iter().any(|s| w.ends_with(s)))
        || (!w.is_empty() && w.chars().all(|c| c.is_ascii_digit()))
}

/// Closed-class lexicon plus suffix rules. Verbs that look like nouns
/// ("run", "brainstorm") are tagged as nouns.
///
/// A noun phrase starts at each determiner, and at the first word of a
/// bare noun's pre-modifier run ("big dogs" starts at "big"). A noun whose
/// run follows a determiner, a quantifier or another noun starts nothing.
pub fn tag_heuristic(tokens: &[String]) -> TaggedSentence {
    let mut tags = vec![TokenTag::default(); tokens.len()];
    for (i, tok) in tokens.iter().enumerate() {
        tags[i].determiner = is_determiner(tok);
        if !tags[i].determiner {
            tags[i].noun = noun_number(tok, i);
        }
    }
    for i in 0..tokens.len() {
        if tags[i].determiner {
            tags[i].np_start = true;
            continue;
        }
        if tags[i].noun.is_none() {
            continue;
        }
        let mut first = i;
        while first > 0 && tags[first - 1].noun.is_none() && is_premodifier(&tokens[first - 1]) {
            first -= 1;
        }
        let bare = first.checked_sub(1).is_none_or(|p| {
            !tags[p].determiner && tags[p].noun.is_none() && !QUANTIFIERS.contains(&tokens[p].to_lowercase().as_str())
        });
        if bare {
            tags[first].np_start = true;
        }
    }
    TaggedSentence {
        tokens: tokens.to_vec(),
        tags,
    }
}

/// Pre-tagged format: one `token<TAB>flags` line per token, where flags
/// is `-` or a comma-separated subset of `DET`, `NN`, `NNS`, `NP`. A blank
/// line ends a sentence.
pub fn parse_tagged(text: &str) -> Result<Vec<TaggedSentence>, SynthError> {
    let mut out = Vec::new();
    let mut cur = TaggedSentence {
        tokens: vec![],
        tags: vec![],
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !cur.tokens.is_empty() {
                out.push(std::mem::replace(
                    &mut cur,
                    TaggedSentence {
                        tokens: vec![],
                        tags: vec![],
                    },
                ));
            }
            continue;
        }
        let err = |msg: String| SynthError::Parse { line: i + 1, msg };
        let (tok, flags) = line
            .split_once('\t')
            .ok_or_else(|| err("expected token<TAB>flags".into()))?;
        let mut tag = TokenTag::default();
        for f in flags.split(',').map(str::trim).filter(|f| *f != "-") {
            match f {
                "DET" => tag.determiner = true,
                "NN" | "NNS" if tag.noun.is_some() => return Err(err("token has two noun numbers".into())),
                "NN" => tag.noun = Some(Number::Singular),
                "NNS" => tag.noun = Some(Number::Plural),
                "NP" => tag.np_start = true,
                other => return Err(err(format!("unknown flag {other:?}"))),
            }
        }
        if tag.determiner && tag.noun.is_some() {
            return Err(err("token is both determiner and noun".into()));
        }
        cur.tokens.push(tok.to_string());
        cur.tags.push(tag);
    }
    if !cur.tokens.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

pub fn write_tagged(sentences: &[TaggedSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        for (tok, tag) in s.tokens.iter().zip(&s.tags) {
            let mut flags = Vec::new();
            if tag.determiner {
                flags.push("DET");
            }
            match tag.noun {
                Some(Number::Singular) => flags.push("NN"),
                Some(Number::Plural) => flags.push("NNS"),
                None => {}
            }
            if tag.np_start {
                flags.push("NP");
            }
            let flags = if flags.is_empty() {
                "-".to_string()
            } else {
                flags.join(",")
            };
            out.push_str(&format!("{tok}\t{flags}\n"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tag(s: &str) -> TaggedSentence {
        tag_heuristic(&s.split_whitespace().map(str::to_string).collect::<Vec<_>>())
    }

    #[test]
    fn determiner_then_noun() {
        let t = tag("the cat");
        assert!(t.tags[0].determiner && t.tags[0].np_start);
        assert_eq!(t.tags[1].noun, Some(Number::Singular));
        assert!(!t.tags[1].np_start);
    }

    #[test]
    fn bare_plural_starts_a_phrase() {
        let t = tag("cats");
        assert_eq!(t.tags[0].noun, Some(Number::Plural));
        assert!(t.tags[0].np_start);
    }

    #[test]
    fn phrases_open_before_their_modifiers() {
        let starts = |s: &str| -> Vec<usize> {
            tag(s)
                .tags
                .iter()
                .enumerate()
                .filter(|(_, g)| g.np_start)
                .map(|(i, _)| i)
                .collect()
        };
        assert_eq!(starts("i like big old dogs"), [2]);
        assert_eq!(starts("a small cat sees some big foxes"), [0]);
        assert_eq!(starts("dangerous 3 cars"), [0]);
        assert_eq!(starts("the city council"), [0]);
    }

    #[test]
    fn example_sentence() {
        let t = tag("They will generate and brainstorm innovative ideas .");
        let nouns: Vec<&str> = t
            .tokens
            .iter()
            .zip(&t.tags)
            .filter(|(_, g)| g.noun.is_some())
            .map(|(w, _)| w.as_str())
            .collect();
        // "brainstorm" is a verb mis-tagged as a noun.
        assert_eq!(nouns, ["brainstorm", "ideas"]);
        let t = tag("Identification is becoming more important in our society .");
        assert_eq!(t.tags[7].noun, Some(Number::Singular));
        assert!(t.tags[6].determiner);
    }

    #[test]
    fn tagged_format_roundtrip() {
        let s = vec![tag("the children of this town"), tag("cats run")];
        let text = write_tagged(&s);
        assert!(text.starts_with("the\tDET,NP\nchildren\tNNS\n"));
        assert_eq!(parse_tagged(&text).unwrap(), s);
        assert!(parse_tagged("x\tNN,NNS\n").is_err());
        assert!(parse_tagged("x\tVB\n").is_err());
    }
}
