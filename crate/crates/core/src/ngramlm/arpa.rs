//! ARPA text format.
//!
//! ```text
//! \data\
//! ngram 1=<count>
//! ...
//!
//! \1-grams:
//! <log10 prob>\t<w1>[\t<log10 backoff>]
//! ...
//!
//! \end\
//! ```
//!
//! Values are written with six decimals. A missing backoff means 0. Rows
//! within an order are sorted by their words.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{LmError, NGramModel, OrderedRows};

pub fn to_arpa(model: &NGramModel) -> String {
    let mut out = String::from("\\data\\\n");
    for n in 1..=model.order() {
        writeln!(out, "ngram {n}={}", model.count(n)).unwrap();
    }
    for n in 1..=model.order() {
        write!(out, "\n\\{n}-grams:\n").unwrap();
        for (words, e) in model.entries_sorted(n) {
            write!(out, "{:.6}\t{}", e.logprob, words.join(" ")).unwrap();
            if let Some(bo) = e.backoff {
                write!(out, "\t{bo:.6}").unwrap();
            }
            out.push('\n');
        }
    }
    out.push_str("\n\\end\\\n");
    out
}

pub fn write_arpa(model: &NGramModel, path: &Path) -> Result<(), LmError> {
    fs::write(path, to_arpa(model)).map_err(|e| LmError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

pub fn read_arpa(path: &Path) -> Result<NGramModel, LmError> {
    let text = fs::read_to_string(path).map_err(|e| LmError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    parse_arpa(&text)
}

fn format_err(line: usize, msg: impl Into<String>) -> LmError {
    LmError::Format { line, msg: msg.into() }
}

fn parse_value(field: &str, line: usize) -> Result<f64, LmError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format_err(line, format!("bad number {field:?}")))?;
    if !v.is_finite() {
        return Err(format_err(line, format!("non-finite value {field:?}")));
    }
    Ok(v)
}

pub fn parse_arpa(text: &str) -> Result<NGramModel, LmError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut declared: Vec<usize> = Vec::new();

    let mut saw_data = false;
    for (no, line) in lines.by_ref() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if t == "\\data\\" {
            saw_data = true;
            break;
        }
        return Err(format_err(no, "expected \\data\\"));
    }
    if !saw_data {
        return Err(format_err(0, "missing \\data\\ section"));
    }

    let mut entries: OrderedRows = Vec::new();
    let mut current: Option<usize> = None;
    let mut ended = false;
    for (no, line) in lines {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if ended {
            return Err(format_err(no, "content after \\end\\"));
        }
        if let Some(rest) = t.strip_prefix("ngram ") {
            if current.is_some() {
                return Err(format_err(no, "ngram count after the first section"));
            }
            let (n, c) = rest
                .split_once('=')
                .ok_or_else(|| format_err(no, "expected ngram N=COUNT"))?;
            let n: usize = n.trim().parse().map_err(|_| format_err(no, "bad order"))?;
            let c: usize = c.trim().parse().map_err(|_| format_err(no, "bad count"))?;
            if n != declared.len() + 1 {
                return Err(format_err(no, format!("ngram {n} out of sequence")));
            }
            declared.push(c);
            continue;
        }
        if t == "\\end\\" {
            ended = true;
            continue;
        }
        if let Some(n) = t.strip_prefix('\\').and_then(|r| r.strip_suffix("-grams:")) {
            let n: usize = n.parse().map_err(|_| format_err(no, "bad section header"))?;
            let expected = current.map_or(1, |c| c + 1);
            if n != expected || n > declared.len() {
                return Err(format_err(no, format!("unexpected section \\{n}-grams:")));
            }
            if let Some(prev) = current {
                if entries[prev - 1].len() != declared[prev - 1] {
                    return Err(format_err(
                        no,
                        format!(
                            "{prev}-grams: header says {}, found {}",
                            declared[prev - 1],
                            entries[prev - 1].len()
                        ),
                    ));
                }
            }
            entries.push(Vec::new());
            current = Some(n);
            continue;
        }
        if t.starts_with('\\') {
            return Err(format_err(no, format!("unknown section {t:?}")));
        }
        let n = current.ok_or_else(|| format_err(no, "n-gram before any section header"))?;
        let (lp, words, bo): (&str, Vec<String>, Option<&str>) = if line.contains('\t') {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 2 || fields.len() > 3 {
                return Err(format_err(no, "expected logprob, words and optional backoff"));
            }
            let words = fields[1].split_whitespace().map(str::to_string).collect();
            (fields[0], words, fields.get(2).copied())
        } else {
            // Space-separated variant: prob, n words, optional backoff.
            let parts: Vec<&str> = t.split_whitespace().collect();
            if parts.len() < n + 1 || parts.len() > n + 2 {
                return Err(format_err(no, "expected logprob, words and optional backoff"));
            }
            let words = parts[1..=n].iter().map(|w| w.to_string()).collect();
            (parts[0], words, parts.get(n + 1).copied())
        };
        let lp = parse_value(lp, no)?;
        if words.len() != n {
            return Err(format_err(no, format!("expected {n} words, found {}", words.len())));
        }
        let bo = bo.map(|f| parse_value(f, no)).transpose()?;
        entries[n - 1].push((words, lp, bo));
    }
    if !ended {
        return Err(format_err(text.lines().count(), "missing \\end\\"));
    }
    if entries.len() != declared.len() {
        return Err(format_err(
            text.lines().count(),
            format!("{} sections declared, {} present", declared.len(), entries.len()),
        ));
    }
    for (i, (rows, &want)) in entries.iter().zip(&declared).enumerate() {
        if rows.len() != want {
            return Err(format_err(
                text.lines().count(),
                format!("{}-grams: header says {want}, found {}", i + 1, rows.len()),
            ));
        }
    }
    if declared.is_empty() {
        return Err(format_err(0, "no n-gram orders declared"));
    }
    NGramModel::from_entries(declared.len(), entries).map_err(|e| format_err(0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::super::{count_ngrams, estimate_kn};
    use super::*;

    fn model() -> NGramModel {
        let sents: Vec<Vec<String>> = ["a b c", "b c d", "a c", "d d a b"]
            .iter()
            .map(|s| s.split(' ').map(str::to_string).collect())
            .collect();
        estimate_kn(&count_ngrams(&sents, 3), 0.75).unwrap()
    }

    #[test]
    fn roundtrip_is_a_fixed_point() {
        let text = to_arpa(&model());
        let back = parse_arpa(&text).unwrap();
        assert_eq!(to_arpa(&back), text);
        assert!(!text.contains("-99"));
    }

    #[test]
    fn header_counts_match_sections() {
        let m = model();
        let text = to_arpa(&m);
        let declared: usize = text
            .lines()
            .find_map(|l| l.strip_prefix("ngram 1="))
            .unwrap()
            .parse()
            .unwrap();
        let section = text.split("\\1-grams:\n").nth(1).unwrap();
        let rows = section.lines().take_while(|l| !l.is_empty()).count();
        assert_eq!(declared, rows);
        assert_eq!(declared, m.count(1));
    }

    #[test]
    fn count_mismatch_reports_line() {
        let text = to_arpa(&model()).replacen("ngram 1=", "ngram 1=1", 1);
        match parse_arpa(&text) {
            Err(LmError::Format { line, .. }) => assert!(line > 0),
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_header_is_rejected() {
        assert!(parse_arpa("\\data\\\nngram 1=1\n\n\\2-grams:\n-1.0\ta\n\\end\\\n").is_err());
        assert!(parse_arpa("hello\n").is_err());
        assert!(parse_arpa("\\data\\\nngram 1=1\n\n\\1-grams:\n-1.0\t<unk>\n").is_err());
    }

    #[test]
    fn space_separated_rows_parse() {
        let m = parse_arpa("\\data\\\nngram 1=2\n\n\\1-grams:\n-0.5 <unk>\n-0.2 </s> -0.1\n\n\\end\\\n").unwrap();
        assert_eq!(m.count(1), 2);
    }
}
