use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::align::{word_align, AlignOp, Edit};
use super::EditError;

pub const WORD_VECTOR_DIM: usize = 100;
pub const DISTANCE_FEATURES: usize = 10;
pub const FEATURE_DIM: usize = DISTANCE_FEATURES + 4 * WORD_VECTOR_DIM;

/// Word-vector table. Unknown words map to the zero vector.
#[derive(Debug, Clone, Default)]
pub struct WordVectors {
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl WordVectors {
    pub fn new(dim: usize) -> Self {
        WordVectors {
            dim,
            table: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn insert(&mut self, word: &str, v: Vec<f64>) -> Result<(), EditError> {
        if v.len() != self.dim {
            return Err(EditError::Argument(format!(
                "vector for {word:?} has {} dims, table has {}",
                v.len(),
                self.dim
            )));
        }
        self.table.insert(word.to_string(), v);
        Ok(())
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.table.get(word).map(Vec::as_slice)
    }

    /// Reads `word v1 ... vD` lines. The dimension comes from the first
    /// line; blank lines are skipped.
    pub fn read<R: BufRead>(reader: R) -> Result<Self, EditError> {
        let mut out: Option<WordVectors> = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| EditError::Io(e.to_string()))?;
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let values = parts
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EditError::Parse {
                    line: i + 1,
                    msg: e.to_string(),
                })?;
            let table = out.get_or_insert_with(|| WordVectors::new(values.len()));
            table.insert(word, values).map_err(|e| EditError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(out.unwrap_or_else(|| WordVectors::new(WORD_VECTOR_DIM)))
    }

    pub fn load(path: &Path) -> Result<Self, EditError> {
        let f = std::fs::File::open(path).map_err(|e| EditError::Io(format!("{}: {e}", path.display())))?;
        Self::read(std::io::BufReader::new(f))
    }

    fn add_into(&self, word: &str, out: &mut [f64]) {
        if let Some(v) = self.get(word) {
            for (o, x) in out.iter_mut().zip(v) {
                *o += x;
            }
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn char_len(tokens: &[String]) -> usize {
    tokens.iter().map(|t| t.chars().count()).sum::<usize>() + tokens.len().saturating_sub(1)
}

/// (insertions, deletions, substitutions) normalized by the longer side.
fn op_rates<T: PartialEq>(a: &[T], b: &[T]) -> [f64; 3] {
    let (mut ins, mut del, mut sub) = (0, 0, 0);
    for op in word_align(a, b) {
        match op {
            AlignOp::Ins => ins += 1,
            AlignOp::Del => del += 1,
            AlignOp::Sub => sub += 1,
            AlignOp::Match => {}
        }
    }
    let den = a.len().max(b.len());
    [ratio(ins, den), ratio(del, den), ratio(sub, den)]
}

/// Feature layout:
///
/// | index | feature |
/// |---|---|
/// | 0, 1 | words in s, t over words in the sentence |
/// | 2, 3 | characters in s, t over characters in the sentence |
/// | 4..7 | word insertions, deletions, substitutions from s to t over max word length |
/// | 7..10 | the same over characters |
/// | 10.. | vector sums: s, t, left neighbour, right neighbour |
pub fn featurize(edit: &Edit, sentence: &[String], vectors: &WordVectors) -> Result<Vec<f64>, EditError> {
    if vectors.dim() != WORD_VECTOR_DIM {
        return Err(EditError::Argument(format!(
            "word vectors have {} dims, expected {WORD_VECTOR_DIM}",
            vectors.dim()
        )));
    }
    if edit.start > edit.end || edit.end > sentence.len() || sentence[edit.start..edit.end] != edit.source[..] {
        return Err(EditError::Argument(format!(
            "edit {}..{} does not match the sentence",
            edit.start, edit.end
        )));
    }
    let (s, t) = (&edit.source, &edit.target);
    let mut f = vec![0.0; FEATURE_DIM];
    let sent_chars = char_len(sentence);
    f[0] = ratio(s.len(), sentence.len());
    f[1] = ratio(t.len(), sentence.len());
    f[2] = ratio(char_len(s), sent_chars);
    f[3] = ratio(char_len(t), sent_chars);
    f[4..7].copy_from_slice(&op_rates(s, t));
    let sc: Vec<char> = s.join(" ").chars().collect();
    let tc: Vec<char> = t.join(" ").chars().collect();
    f[7..10].copy_from_slice(&op_rates(&sc, &tc));

    let d = WORD_VECTOR_DIM;
    let base = DISTANCE_FEATURES;
    for w in s {
        vectors.add_into(w, &mut f[base..base + d]);
    }
    for w in t {
        vectors.add_into(w, &mut f[base + d..base + 2 * d]);
    }
    if edit.start > 0 {
        vectors.add_into(&sentence[edit.start - 1], &mut f[base + 2 * d..base + 3 * d]);
    }
    if let Some(right) = sentence.get(edit.end) {
        vectors.add_into(right, &mut f[base + 3 * d..base + 4 * d]);
    }
    Ok(f)
}
