use serde::{Deserialize, Serialize};

use super::EditError;

/// One step of a Levenshtein alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignOp {
    Match,
    Sub,
    /// A source token with no counterpart.
    Del,
    /// A target token with no counterpart.
    Ins,
}

/// Unit-cost edit distance table, `(|a| + 1) × (|b| + 1)`, row-major.
fn distance_table<T: PartialEq>(a: &[T], b: &[T]) -> Vec<usize> {
    let w = b.len() + 1;
    let mut d = vec![0usize; (a.len() + 1) * w];
    for (j, v) in d.iter_mut().take(w).enumerate() {
        *v = j;
    }
    for i in 1..=a.len() {
        d[i * w] = i;
        for j in 1..=b.len() {
            let diag = d[(i - 1) * w + j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i * w + j] = diag.min(d[(i - 1) * w + j] + 1).min(d[i * w + j - 1] + 1);
        }
    }
    d
}

pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    *distance_table(a, b).last().expect("table is nonempty")
}

/// Minimum-cost alignment. Walking back from the end, ties prefer match,
/// then substitution, then deletion, then insertion.
pub fn word_align<T: PartialEq>(src: &[T], tgt: &[T]) -> Vec<AlignOp> {
    let d = distance_table(src, tgt);
    let w = tgt.len() + 1;
    let (mut i, mut j) = (src.len(), tgt.len());
    let mut ops = Vec::with_capacity(i.max(j));
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 && src[i - 1] == tgt[j - 1] && d[(i - 1) * w + j - 1] == here {
            ops.push(AlignOp::Match);
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && d[(i - 1) * w + j - 1] + 1 == here {
            ops.push(AlignOp::Sub);
            i -= 1;
            j -= 1;
        } else if i > 0 && d[(i - 1) * w + j] + 1 == here {
            ops.push(AlignOp::Del);
            i -= 1;
        } else {
            ops.push(AlignOp::Ins);
            j -= 1;
        }
    }
    ops.reverse();
    ops
}

/// Cost of an op sequence: every non-match counts 1.
pub fn alignment_cost(ops: &[AlignOp]) -> usize {
    ops.iter().filter(|&&o| o != AlignOp::Match).count()
}

/// A word-span replacement: source tokens `[start, end)` become `target`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub source: Vec<String>,
    pub target: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

impl Edit {
    /// Builds an edit over `sentence[start..end]`. Rejects spans outside
    /// the sentence and identity replacements.
    pub fn new(sentence: &[String], start: usize, end: usize, target: Vec<String>) -> Result<Self, EditError> {
        if start > end || end > sentence.len() {
            return Err(EditError::Argument(format!(
                "span {start}..{end} outside a {}-token sentence",
                sentence.len()
            )));
        }
        let source = sentence[start..end].to_vec();
        if source == target {
            return Err(EditError::Argument(format!("identity edit at {start}..{end}")));
        }
        Ok(Edit {
            start,
            end,
            source,
            target,
            kind: None,
        })
    }

    pub fn with_kind(mut self, kind: &str) -> Self {
        self.kind = Some(kind.to_string());
        self
    }

    /// Same span and replacement (type labels ignored).
    pub fn same_change(&self, other: &Edit) -> bool {
        self.start == other.start && self.end == other.end && self.target == other.target
    }
}

/// Groups maximal runs of non-matching alignment ops into edits.
/// Adjacent changes merge into one edit.
pub fn extract_edits(src: &[String], hyp: &[String]) -> Vec<Edit> {
    let ops = word_align(src, hyp);
    let mut edits = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut open: Option<(usize, usize)> = None;
    let close = |open: &mut Option<(usize, usize)>, i: usize, j: usize, edits: &mut Vec<Edit>| {
        if let Some((si, sj)) = open.take() {
            edits.push(Edit {
                start: si,
                end: i,
                source: src[si..i].to_vec(),
                target: hyp[sj..j].to_vec(),
                kind: None,
            });
        }
    };
    for op in ops {
        if op == AlignOp::Match {
            close(&mut open, i, j, &mut edits);
        } else if open.is_none() {
            open = Some((i, j));
        }
        match op {
            AlignOp::Match | AlignOp::Sub => {
                i += 1;
                j += 1;
            }
            AlignOp::Del => i += 1,
            AlignOp::Ins => j += 1,
        }
    }
    close(&mut open, i, j, &mut edits);
    edits
}

fn check_disjoint(edits: &[Edit], len: usize) -> Result<(), EditError> {
    let mut prev_end = 0;
    let mut prev_insert_at: Option<usize> = None;
    for (k, e) in edits.iter().enumerate() {
        if e.start > e.end || e.end > len {
            return Err(EditError::Argument(format!(
                "edit {k} span {}..{} out of range",
                e.start, e.end
            )));
        }
        if k > 0 && (e.start < prev_end || (e.start == e.end && prev_insert_at == Some(e.start))) {
            return Err(EditError::Argument(format!("edit {k} overlaps or is out of order")));
        }
        prev_end = e.end;
        prev_insert_at = (e.start == e.end).then_some(e.start);
    }
    Ok(())
}

/// Applies sorted, non-overlapping edits right to left.
pub fn apply_edits(src: &[String], edits: &[Edit]) -> Result<Vec<String>, EditError> {
    check_disjoint(edits, src.len())?;
    let mut out = src.to_vec();
    for e in edits.iter().rev() {
        out.splice(e.start..e.end, e.target.iter().cloned());
    }
    Ok(out)
}

/// Marks each proposed edit good when some gold edit has the same span
/// and replacement.
pub fn label_edits(proposed: &[Edit], gold: &[Edit]) -> Vec<(Edit, bool)> {
    proposed
        .iter()
        .map(|p| (p.clone(), gold.iter().any(|g| g.same_change(p))))
        .collect()
}
