//! M² annotation files.
//!
//! Grammar handled here:
//!
//! ```text
//! S tok1 tok2 ...
//! A <start> <end>|||<type>|||<replacement>|||<extra>...|||<annotator>
//! ```
//!
//! Fields are split on `|||`. The first field holds the span, then the
//! error type, the space-separated replacement (empty for deletions), any
//! number of middle columns (kept verbatim), and the annotator id last.
//! An annotation of type `noop` registers the annotator with no edits.
//! Blank lines separate sentences.
//!
//! Canonical serialization writes each sentence as its `S` line, then the
//! annotators in increasing id order with their edits sorted by span,
//! then one blank line. A `noop` annotator is written as
//! `A -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||<id>`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::DataError;

pub type AnnotatorId = u32;

/// One gold correction: replace tokens `[start, end)` with `replacement`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GoldEdit {
    pub start: usize,
    pub end: usize,
    pub kind: String,
    pub replacement: Vec<String>,
    /// Columns between the replacement and the annotator id.
    pub extra: Vec<String>,
}

impl GoldEdit {
    pub fn new(start: usize, end: usize, kind: &str, replacement: &[&str]) -> Self {
        GoldEdit {
            start,
            end,
            kind: kind.to_string(),
            replacement: replacement.iter().map(|s| s.to_string()).collect(),
            extra: vec!["REQUIRED".into(), "-NONE-".into()],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotatedSentence {
    pub tokens: Vec<String>,
    /// Gold edit sets keyed by annotator; each set is sorted and
    /// non-overlapping.
    pub annotators: BTreeMap<AnnotatorId, Vec<GoldEdit>>,
}

impl AnnotatedSentence {
    pub fn new(tokens: Vec<String>) -> Self {
        AnnotatedSentence {
            tokens,
            annotators: BTreeMap::new(),
        }
    }

    /// Edit sets to score against. A sentence without annotations counts
    /// as a single annotator with no edits.
    pub fn edit_sets(&self) -> Vec<(AnnotatorId, &[GoldEdit])> {
        if self.annotators.is_empty() {
            vec![(0, &[][..])]
        } else {
            self.annotators.iter().map(|(a, e)| (*a, e.as_slice())).collect()
        }
    }

    /// The lowest-id annotator's edits (empty if none).
    pub fn primary_edits(&self) -> &[GoldEdit] {
        self.annotators.values().next().map_or(&[], Vec::as_slice)
    }

    /// Applies one annotator's edits to produce the corrected tokens.
    pub fn corrected(&self, annotator: AnnotatorId) -> Vec<String> {
        let edits = self.annotators.get(&annotator).map_or(&[][..], Vec::as_slice);
        apply_gold_edits(&self.tokens, edits)
    }
}

/// Applies sorted, non-overlapping edits right to left.
pub fn apply_gold_edits(tokens: &[String], edits: &[GoldEdit]) -> Vec<String> {
    let mut out = tokens.to_vec();
    for e in edits.iter().rev() {
        out.splice(e.start..e.end, e.replacement.iter().cloned());
    }
    out
}

fn perr(line: usize, msg: impl Into<String>) -> DataError {
    DataError::Parse { line, msg: msg.into() }
}

pub fn parse_m2(text: &str) -> Result<Vec<AnnotatedSentence>, DataError> {
    let mut out: Vec<AnnotatedSentence> = Vec::new();
    let mut current: Option<AnnotatedSentence> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if let Some(s) = current.take() {
                out.push(finish(s, lineno)?);
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix('S').filter(|r| r.is_empty() || r.starts_with(' ')) {
            if let Some(s) = current.take() {
                out.push(finish(s, lineno)?);
            }
            current = Some(AnnotatedSentence::new(
                rest.split_whitespace().map(str::to_string).collect(),
            ));
        } else if let Some(rest) = line.strip_prefix("A ") {
            let sentence = current
                .as_mut()
                .ok_or_else(|| perr(lineno, "annotation before any sentence line"))?;
            parse_annotation(rest, sentence, lineno)?;
        } else {
            return Err(perr(lineno, format!("unrecognized line {line:?}")));
        }
    }
    if let Some(s) = current.take() {
        out.push(finish(s, text.lines().count())?);
    }
    Ok(out)
}

fn parse_annotation(rest: &str, sentence: &mut AnnotatedSentence, lineno: usize) -> Result<(), DataError> {
    let fields: Vec<&str> = rest.split("|||").collect();
    if fields.len() < 4 {
        return Err(perr(
            lineno,
            format!("expected at least 4 |||-separated fields, got {}", fields.len()),
        ));
    }
    let mut span = fields[0].split_whitespace();
    let (start, end) = match (span.next(), span.next(), span.next()) {
        (Some(a), Some(b), None) => (
            a.parse::<i64>()
                .map_err(|_| perr(lineno, format!("bad start offset {a:?}")))?,
            b.parse::<i64>()
                .map_err(|_| perr(lineno, format!("bad end offset {b:?}")))?,
        ),
        _ => return Err(perr(lineno, format!("bad span {:?}", fields[0]))),
    };
    let kind = fields[1].to_string();
    let aid_field = fields[fields.len() - 1].trim();
    let aid: AnnotatorId = aid_field
        .parse()
        .map_err(|_| perr(lineno, format!("bad annotator id {aid_field:?}")))?;
    let set = sentence.annotators.entry(aid).or_default();
    if kind == "noop" {
        return Ok(());
    }
    if start < 0 || end < 0 {
        return Err(perr(lineno, "negative offsets outside a noop annotation"));
    }
    let (start, end) = (start as usize, end as usize);
    if start > end {
        return Err(perr(lineno, format!("start {start} > end {end}")));
    }
    if end > sentence.tokens.len() {
        return Err(perr(
            lineno,
            format!("end {end} beyond sentence of {} tokens", sentence.tokens.len()),
        ));
    }
    set.push(GoldEdit {
        start,
        end,
        kind,
        replacement: fields[2].split_whitespace().map(str::to_string).collect(),
        extra: fields[3..fields.len() - 1].iter().map(|s| s.to_string()).collect(),
    });
    Ok(())
}

fn finish(mut s: AnnotatedSentence, lineno: usize) -> Result<AnnotatedSentence, DataError> {
    for (aid, edits) in s.annotators.iter_mut() {
        edits.sort_by_key(|e| (e.start, e.end));
        for pair in edits.windows(2) {
            if pair[0].end > pair[1].start {
                return Err(perr(
                    lineno,
                    format!(
                        "annotator {aid}: edits {}-{} and {}-{} overlap",
                        pair[0].start, pair[0].end, pair[1].start, pair[1].end
                    ),
                ));
            }
        }
    }
    Ok(s)
}

/// Canonical M² text for `sentences` (see module docs).
pub fn write_m2(sentences: &[AnnotatedSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        out.push('S');
        for t in &s.tokens {
            out.push(' ');
            out.push_str(t);
        }
        out.push('\n');
        for (aid, edits) in &s.annotators {
            if edits.is_empty() {
                let _ = writeln!(out, "A -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||{aid}");
            }
            for e in edits {
                let _ = write!(
                    out,
                    "A {} {}|||{}|||{}",
                    e.start,
                    e.end,
                    e.kind,
                    e.replacement.join(" ")
                );
                for x in &e.extra {
                    out.push_str("|||");
                    out.push_str(x);
                }
                let _ = writeln!(out, "|||{aid}");
            }
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_annotation() {
        let s = parse_m2("S The cat sit .\nA 2 3|||Vform|||sits|||REQUIRED|||-NONE-|||0\n").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].tokens, ["The", "cat", "sit", "."]);
        let e = &s[0].annotators[&0][0];
        assert_eq!((e.start, e.end, e.kind.as_str()), (2, 3, "Vform"));
        assert_eq!(e.replacement, ["sits"]);
        assert_eq!(s[0].corrected(0), ["The", "cat", "sits", "."]);
    }

    #[test]
    fn sentence_without_annotations() {
        let s = parse_m2("S Fine as is .\n\nS Another one\n").unwrap();
        assert_eq!(s.len(), 2);
        assert!(s[0].annotators.is_empty());
        assert_eq!(s[0].edit_sets().len(), 1);
        assert!(s[0].edit_sets()[0].1.is_empty());
    }

    #[test]
    fn insertion_and_deletion() {
        let text = "S I saw cat on on Monday\nA 2 2|||ArtOrDet|||a|||REQUIRED|||-NONE-|||0\nA 3 4|||Rloc-||||||REQUIRED|||-NONE-|||0\n";
        let s = parse_m2(text).unwrap();
        let edits = &s[0].annotators[&0];
        assert_eq!((edits[0].start, edits[0].end), (2, 2));
        assert!(edits[1].replacement.is_empty());
        assert_eq!(s[0].corrected(0).join(" "), "I saw a cat on Monday");
    }

    #[test]
    fn noop_registers_empty_annotator() {
        let text = "S Good .\nA -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||1\n";
        let s = parse_m2(text).unwrap();
        assert_eq!(s[0].annotators.len(), 1);
        assert!(s[0].annotators[&1].is_empty());
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = parse_m2("S a b\nA 2 1|||X|||y|||REQUIRED|||-NONE-|||0\n").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }), "{err:?}");
        let err = parse_m2("S a b\nB nonsense\n").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }));
        let err = parse_m2("A 0 1|||X|||y|||0\n").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 1, .. }));
        let err = parse_m2("S a b\nA 0 9|||X|||y|||REQUIRED|||-NONE-|||0\n").unwrap_err();
        assert!(matches!(err, DataError::Parse { line: 2, .. }));
    }

    #[test]
    fn overlapping_edits_rejected() {
        let text = "S a b c\nA 0 2|||X|||y|||R|||-|||0\nA 1 3|||X|||z|||R|||-|||0\n";
        assert!(parse_m2(text).is_err());
    }

    #[test]
    fn canonical_form_is_a_fixed_point() {
        let text = "S The cat sit .\nA 2 3|||Vform|||sits|||REQUIRED|||-NONE-|||0\nA 0 0|||ArtOrDet|||Hey|||X|||0\nA -1 -1|||noop|||-NONE-|||REQUIRED|||-NONE-|||1\nS b\n";
        let once = write_m2(&parse_m2(text).unwrap());
        let twice = write_m2(&parse_m2(&once).unwrap());
        assert_eq!(once, twice);
        assert_eq!(parse_m2(&once).unwrap(), parse_m2(text).unwrap());
    }

    fn arb_sentence() -> impl Strategy<Value = AnnotatedSentence> {
        (1usize..6)
            .prop_flat_map(|n| {
                let tokens = proptest::collection::vec("[a-z]{1,4}", n);
                let edits =
                    proptest::collection::vec((0..=n, 0usize..2, proptest::collection::vec("[a-z]{1,3}", 0..3)), 0..3);
                (tokens, edits, 0u32..3)
            })
            .prop_map(|(tokens, raw, aid)| {
                let n = tokens.len();
                let mut edits: Vec<GoldEdit> = Vec::new();
                let mut cursor = 0;
                let mut raw = raw;
                raw.sort();
                for (start, len, repl) in raw {
                    let start = start.max(cursor);
                    let end = (start + len).min(n);
                    if start > n {
                        continue;
                    }
                    let refs: Vec<&str> = repl.iter().map(String::as_str).collect();
                    edits.push(GoldEdit::new(start, end, "T", &refs));
                    cursor = end;
                }
                let mut s = AnnotatedSentence::new(tokens);
                s.annotators.insert(aid, edits);
                s
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_is_identity(sents in proptest::collection::vec(arb_sentence(), 1..4)) {
            let mut sorted = sents.clone();
            for s in &mut sorted {
                for e in s.annotators.values_mut() {
                    e.sort_by_key(|x| (x.start, x.end));
                }
            }
            let text = write_m2(&sorted);
            let parsed = parse_m2(&text).unwrap();
            prop_assert_eq!(write_m2(&parsed), text);
        }
    }
}
