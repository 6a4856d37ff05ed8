use std::path::Path;

use super::DataError;

/// Source/target sentence pairs. Sources are never empty after trimming.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParallelCorpus {
    pairs: Vec<(String, String)>,
}

/// What [`ParallelCorpus::parse_tsv`] skipped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TsvSkips {
    pub missing_tab: usize,
    pub empty_source: usize,
}

impl ParallelCorpus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a corpus from pairs; returns an error if a source is blank.
    pub fn from_pairs<I, S, T>(pairs: I) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: Into<String>,
    {
        let mut corpus = ParallelCorpus::new();
        for (s, t) in pairs {
            corpus.push(s.into(), t.into())?;
        }
        Ok(corpus)
    }

    pub fn push(&mut self, source: String, target: String) -> Result<(), DataError> {
        if source.trim().is_empty() {
            return Err(DataError::Argument("empty source sentence".into()));
        }
        self.pairs.push((source, target));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(s, t)| (s.as_str(), t.as_str()))
    }

    /// One pair per line, source and target separated by the first tab.
    /// Lines without a tab and lines with a blank source are skipped and
    /// counted.
    pub fn parse_tsv(text: &str) -> (Self, TsvSkips) {
        let mut corpus = ParallelCorpus::new();
        let mut skips = TsvSkips::default();
        for line in text.lines() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            match line.split_once('\t') {
                None => {
                    if !line.is_empty() {
                        skips.missing_tab += 1;
                    }
                }
                Some((s, _)) if s.trim().is_empty() => skips.empty_source += 1,
                Some((s, t)) => corpus.pairs.push((s.to_string(), t.to_string())),
            }
        }
        (corpus, skips)
    }

    pub fn read_tsv(path: &Path) -> Result<(Self, TsvSkips), DataError> {
        let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
        let (corpus, skips) = Self::parse_tsv(&text);
        if skips.missing_tab + skips.empty_source > 0 {
            log::warn!(
                "{}: skipped {} lines without a tab and {} with an empty source",
                path.display(),
                skips.missing_tab,
                skips.empty_source
            );
        }
        Ok((corpus, skips))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (s, t) in &self.pairs {
            out.push_str(s);
            out.push('\t');
            out.push_str(t);
            out.push('\n');
        }
        out
    }
}

/// Reads a file of one sentence per line (trailing newline optional).
pub fn read_lines(path: &Path) -> Result<Vec<String>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    Ok(text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect())
}

pub fn tokenize(sentence: &str) -> Vec<String> {
    sentence.split_whitespace().map(str::to_string).collect()
}
