//! MaxMatch scoring.
//!
//! The hypothesis is aligned to the source along every minimum-cost
//! word-level Levenshtein path. A proposed edit is any stretch of one such
//! path that changes something and contains at most `max_unchanged`
//! unchanged words. Among all ways to cover a path with edits, the scorer
//! picks, in order: most edits equal to a gold edit (same span and
//! replacement), fewest edits, fewest unchanged words inside edits, then
//! the lexicographically smallest edit list.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::fscore::EditCounts;
use super::MetricsError;
use crate::editops::Edit;
use crate::textdata::{AnnotatedSentence, AnnotatorId, GoldEdit};

pub const DEFAULT_MAX_UNCHANGED: usize = 2;

/// Gold edit with its replacement normalized (`-NONE-` means empty).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct GoldKey {
    pub start: usize,
    pub end: usize,
    pub target: Vec<String>,
}

fn gold_keys(gold: &[GoldEdit]) -> Vec<(GoldKey, String)> {
    let mut out: Vec<(GoldKey, String)> = Vec::new();
    for g in gold {
        let target = if g.replacement == ["-NONE-"] {
            Vec::new()
        } else {
            g.replacement.clone()
        };
        let key = GoldKey {
            start: g.start,
            end: g.end,
            target,
        };
        if !out.iter().any(|(k, _)| *k == key) {
            out.push((key, g.kind.clone()));
        }
    }
    out
}

fn key_of(e: &Edit) -> GoldKey {
    GoldKey {
        start: e.start,
        end: e.end,
        target: e.target.clone(),
    }
}

struct Table {
    w: usize,
    fwd: Vec<usize>,
    bwd: Vec<usize>,
}

impl Table {
    fn new(src: &[String], hyp: &[String]) -> Self {
        let (n, m) = (src.len(), hyp.len());
        let w = m + 1;
        let mut fwd = vec![0; (n + 1) * w];
        let mut bwd = vec![0; (n + 1) * w];
        for i in 0..=n {
            for j in 0..=m {
                fwd[i * w + j] = if i == 0 {
                    j
                } else if j == 0 {
                    i
                } else {
                    let diag = fwd[(i - 1) * w + j - 1] + usize::from(src[i - 1] != hyp[j - 1]);
                    diag.min(fwd[(i - 1) * w + j] + 1).min(fwd[i * w + j - 1] + 1)
                };
            }
        }
        for i in (0..=n).rev() {
            for j in (0..=m).rev() {
                bwd[i * w + j] = if i == n {
                    m - j
                } else if j == m {
                    n - i
                } else {
                    let diag = bwd[(i + 1) * w + j + 1] + usize::from(src[i] != hyp[j]);
                    diag.min(bwd[(i + 1) * w + j] + 1).min(bwd[i * w + j + 1] + 1)
                };
            }
        }
        Table { w, fwd, bwd }
    }

    fn total(&self) -> usize {
        self.bwd[0]
    }

    /// Single-op moves from `(i, j)` that stay on a minimum-cost path, as
    /// `(next_i, next_j, is_match)`.
    fn moves(&self, src: &[String], hyp: &[String], i: usize, j: usize) -> Vec<(usize, usize, bool)> {
        let on = |i: usize, j: usize, cost: usize| self.fwd[i * self.w + j] + cost;
        let mut out = Vec::with_capacity(3);
        let here = self.fwd[i * self.w + j];
        if here + self.bwd[i * self.w + j] != self.total() {
            return out;
        }
        let ok = |ni: usize, nj: usize, c: usize| on(i, j, c) + self.bwd[ni * self.w + nj] == self.total();
        if i < src.len() && j < hyp.len() {
            let same = src[i] == hyp[j];
            if ok(i + 1, j + 1, usize::from(!same)) {
                out.push((i + 1, j + 1, same));
            }
        }
        if i < src.len() && ok(i + 1, j, 1) {
            out.push((i + 1, j, false));
        }
        if j < hyp.len() && ok(i, j + 1, 1) {
            out.push((i, j + 1, false));
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Choice {
    matched: usize,
    edits: usize,
    absorbed: usize,
    list: Vec<Edit>,
}

impl Choice {
    fn better_than(&self, o: &Choice) -> bool {
        (std::cmp::Reverse(self.matched), self.edits, self.absorbed, &self.list)
            < (std::cmp::Reverse(o.matched), o.edits, o.absorbed, &o.list)
    }
}

enum Arc {
    Keep(usize, usize),
    Change { to: (usize, usize), absorbed: usize },
}

struct Selector<'a> {
    src: &'a [String],
    hyp: &'a [String],
    table: Table,
    max_unchanged: usize,
    gold: &'a [(GoldKey, String)],
    arcs: HashMap<(usize, usize), Vec<Arc>>,
    memo: HashMap<(usize, usize, Vec<usize>), Choice>,
}

impl Selector<'_> {
    fn arcs(&mut self, i: usize, j: usize) -> &[Arc] {
        if !self.arcs.contains_key(&(i, j)) {
            let mut list = Vec::new();
            // Fewest unchanged words over routes (i, j) -> w that change something.
            let mut reach: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            let mut stack = vec![(i, j, false, 0usize)];
            let mut seen = std::collections::HashSet::new();
            while let Some((a, b, changed, kept)) = stack.pop() {
                if !seen.insert((a, b, changed, kept)) {
                    continue;
                }
                if changed && (a, b) != (i, j) {
                    let e = reach.entry((a, b)).or_insert(kept);
                    *e = (*e).min(kept);
                }
                for (na, nb, is_match) in self.table.moves(self.src, self.hyp, a, b) {
                    let nk = kept + usize::from(is_match);
                    if nk <= self.max_unchanged {
                        stack.push((na, nb, changed || !is_match, nk));
                    }
                    if is_match && (a, b) == (i, j) {
                        list.push(Arc::Keep(na, nb));
                    }
                }
            }
            list.extend(reach.into_iter().map(|(to, absorbed)| Arc::Change { to, absorbed }));
            self.arcs.insert((i, j), list);
        }
        &self.arcs[&(i, j)]
    }

    fn best(&mut self, i: usize, j: usize, used: Vec<usize>) -> Choice {
        if i == self.src.len() && j == self.hyp.len() {
            return Choice {
                matched: 0,
                edits: 0,
                absorbed: 0,
                list: Vec::new(),
            };
        }
        let memo_key = (i, j, used);
        if let Some(c) = self.memo.get(&memo_key) {
            return c.clone();
        }
        let used = memo_key.2.clone();
        let arcs: Vec<(usize, usize, Option<usize>)> = self
            .arcs(i, j)
            .iter()
            .map(|a| match *a {
                Arc::Keep(a, b) => (a, b, None),
                Arc::Change { to, absorbed } => (to.0, to.1, Some(absorbed)),
            })
            .collect();
        let mut best: Option<Choice> = None;
        for (ni, nj, change) in arcs {
            let cand = match change {
                None => self.best(ni, nj, Vec::new()),
                Some(absorbed) => {
                    let edit = Edit {
                        start: i,
                        end: ni,
                        source: self.src[i..ni].to_vec(),
                        target: self.hyp[j..nj].to_vec(),
                        kind: None,
                    };
                    let k = key_of(&edit);
                    let hit = self
                        .gold
                        .iter()
                        .position(|(g, _)| *g == k)
                        .filter(|g| !used.contains(g));
                    let next_used = if ni == i {
                        let mut u = used.clone();
                        u.extend(hit);
                        u.sort_unstable();
                        u
                    } else {
                        Vec::new()
                    };
                    let rest = self.best(ni, nj, next_used);
                    let mut list = Vec::with_capacity(rest.list.len() + 1);
                    list.push(edit);
                    list.extend(rest.list);
                    Choice {
                        matched: rest.matched + usize::from(hit.is_some()),
                        edits: rest.edits + 1,
                        absorbed: rest.absorbed + absorbed,
                        list,
                    }
                }
            };
            if best.as_ref().is_none_or(|b| cand.better_than(b)) {
                best = Some(cand);
            }
        }
        let best = best.expect("every lattice node except the sink has an outgoing arc");
        self.memo.insert(memo_key, best.clone());
        best
    }
}

/// Chooses the hypothesis edits to score against one gold edit set.
/// Returns the edits and how many of them are gold.
pub fn select_edits(src: &[String], hyp: &[String], gold: &[GoldEdit], max_unchanged: usize) -> (Vec<Edit>, usize) {
    let keys = gold_keys(gold);
    let mut sel = Selector {
        src,
        hyp,
        table: Table::new(src, hyp),
        max_unchanged,
        gold: &keys,
        arcs: HashMap::new(),
        memo: HashMap::new(),
    };
    let c = sel.best(0, 0, Vec::new());
    (c.list, c.matched)
}

/// Scores for one sentence against the annotator that was chosen for it.
#[derive(Debug, Clone, Serialize)]
pub struct SentenceScore {
    pub annotator: AnnotatorId,
    pub counts: EditCounts,
    pub edits: Vec<Edit>,
    /// Gold edits of the chosen annotator with their type and whether the
    /// hypothesis matched them.
    pub gold: Vec<(GoldKey, String, bool)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    pub beta: f64,
    pub counts: EditCounts,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub sentences: Vec<SentenceScore>,
}

impl ScoreReport {
    pub fn from_sentences(sentences: Vec<SentenceScore>, beta: f64) -> Self {
        let counts: EditCounts = sentences.iter().map(|s| s.counts).sum();
        ScoreReport {
            beta,
            counts,
            precision: counts.precision(),
            recall: counts.recall(),
            f: counts.f(beta),
            sentences,
        }
    }

    /// Percentages with two decimals, one `name<TAB>value` per line.
    pub fn to_tsv(&self) -> String {
        format!(
            "precision\t{:.2}\nrecall\t{:.2}\nf{}\t{:.2}\nmatched\t{}\nproposed\t{}\ngold\t{}\n",
            self.precision * 100.0,
            self.recall * 100.0,
            self.beta,
            self.f * 100.0,
            self.counts.matched,
            self.counts.proposed,
            self.counts.gold
        )
    }
}

/// Scores one sentence against every annotator and keeps the one with the
/// best sentence-level F; ties go to more matches, then fewer proposed plus
/// gold edits, then the lowest annotator id.
pub fn score_sentence(
    src: &[String],
    hyp: &[String],
    gold: &AnnotatedSentence,
    beta: f64,
    max_unchanged: usize,
) -> SentenceScore {
    let mut best: Option<(f64, SentenceScore)> = None;
    for (annotator, edits) in gold.edit_sets() {
        let keys = gold_keys(edits);
        let (selected, matched) = select_edits(src, hyp, edits, max_unchanged);
        let counts = EditCounts {
            matched,
            proposed: selected.len(),
            gold: keys.len(),
        };
        let f = counts.f(beta);
        let better = best.as_ref().is_none_or(|(bf, b)| {
            f > *bf
                || (f == *bf
                    && (counts.matched > b.counts.matched
                        || (counts.matched == b.counts.matched
                            && counts.proposed + counts.gold < b.counts.proposed + b.counts.gold)))
        });
        if better {
            let gold = keys
                .into_iter()
                .map(|(k, kind)| {
                    let hit = selected.iter().any(|e| key_of(e) == k);
                    (k, kind, hit)
                })
                .collect();
            best = Some((
                f,
                SentenceScore {
                    annotator,
                    counts,
                    edits: selected,
                    gold,
                },
            ));
        }
    }
    best.expect("edit_sets is never empty").1
}

pub fn m2_evaluate(
    sources: &[Vec<String>],
    hypotheses: &[Vec<String>],
    gold: &[AnnotatedSentence],
    beta: f64,
    max_unchanged: usize,
) -> Result<ScoreReport, MetricsError> {
    if sources.len() != hypotheses.len() || sources.len() != gold.len() {
        return Err(MetricsError::Argument(format!(
            "{} sources, {} hypotheses, {} gold sentences",
            sources.len(),
            hypotheses.len(),
            gold.len()
        )));
    }
    for (k, (s, g)) in sources.iter().zip(gold).enumerate() {
        if *s != g.tokens {
            return Err(MetricsError::Argument(format!(
                "source sentence {k} differs from the gold file"
            )));
        }
    }
    let sentences = sources
        .iter()
        .zip(hypotheses)
        .zip(gold)
        .map(|((s, h), g)| score_sentence(s, h, g, beta, max_unchanged))
        .collect();
    Ok(ScoreReport::from_sentences(sentences, beta))
}

/// Recall per error type over the chosen annotators' gold edits, as
/// `type -> (matched, total)`.
pub fn per_type_recall(report: &ScoreReport) -> BTreeMap<String, (usize, usize)> {
    let mut out: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for s in &report.sentences {
        for (_, kind, hit) in &s.gold {
            let e = out.entry(kind.clone()).or_default();
            e.0 += usize::from(*hit);
            e.1 += 1;
        }
    }
    out
}

/// `type<TAB>count<TAB>recall`, recall in percent, most frequent first.
pub fn type_recall_tsv(table: &BTreeMap<String, (usize, usize)>) -> String {
    let mut rows: Vec<_> = table.iter().collect();
    rows.sort_by(|a, b| b.1 .1.cmp(&a.1 .1).then(a.0.cmp(b.0)));
    let mut out = String::from("type\tcount\trecall\n");
    for (kind, (hit, total)) in rows {
        out.push_str(&format!(
            "{kind}\t{total}\t{:.2}\n",
            100.0 * *hit as f64 / *total as f64
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn annotated(src: &str, edits: &[(usize, usize, &str, &str)]) -> AnnotatedSentence {
        let mut s = AnnotatedSentence::new(toks(src));
        s.annotators.insert(
            0,
            edits
                .iter()
                .map(|&(a, b, k, r)| GoldEdit::new(a, b, k, &r.split_whitespace().collect::<Vec<_>>()))
                .collect(),
        );
        s
    }

    #[test]
    fn identity_hypothesis() {
        let g = annotated("he go home", &[(1, 2, "Vt", "goes")]);
        let r = m2_evaluate(
            std::slice::from_ref(&g.tokens),
            std::slice::from_ref(&g.tokens),
            std::slice::from_ref(&g),
            0.5,
            2,
        )
        .unwrap();
        assert_eq!((r.precision, r.recall, r.f), (1.0, 0.0, 0.0));
    }

    #[test]
    fn perfect_correction() {
        let g = annotated("he go to school", &[(1, 2, "Vt", "goes"), (3, 3, "ArtOrDet", "the")]);
        let hyp = toks("he goes to the school");
        let r = m2_evaluate(
            std::slice::from_ref(&g.tokens),
            &[hyp],
            std::slice::from_ref(&g),
            0.5,
            2,
        )
        .unwrap();
        assert_eq!((r.precision, r.recall, r.f), (1.0, 1.0, 1.0));
    }

    #[test]
    fn merged_gold_edit_is_found() {
        // Gold treats two changed words with one unchanged word between
        // them as a single edit.
        let g = annotated("a b c d", &[(0, 3, "X", "x b y")]);
        let (edits, matched) = select_edits(&g.tokens, &toks("x b y d"), g.primary_edits(), 2);
        assert_eq!(matched, 1);
        assert_eq!(edits.len(), 1);
        let (edits, matched) = select_edits(&g.tokens, &toks("x b y d"), g.primary_edits(), 0);
        assert_eq!(matched, 0);
        assert_eq!(edits.len(), 2);
    }

    #[test]
    fn best_annotator_is_chosen() {
        let mut g = annotated("he go home", &[(1, 2, "Vt", "went")]);
        g.annotators.insert(1, vec![GoldEdit::new(1, 2, "Vt", &["goes"])]);
        let s = score_sentence(&g.tokens, &toks("he goes home"), &g, 0.5, 2);
        assert_eq!(s.annotator, 1);
        assert_eq!(s.counts.matched, 1);
    }

    #[test]
    fn per_type_counts() {
        let g = annotated("a cat eat fish", &[(0, 1, "ArtOrDet", "the"), (2, 3, "SVA", "eats")]);
        let g2 = annotated("dog bark", &[(0, 0, "ArtOrDet", "the")]);
        let r = m2_evaluate(
            &[g.tokens.clone(), g2.tokens.clone()],
            &[toks("the cat eat fish"), toks("dog bark")],
            &[g, g2],
            0.5,
            2,
        )
        .unwrap();
        let t = per_type_recall(&r);
        assert_eq!(t["ArtOrDet"], (1, 2));
        assert_eq!(t["SVA"], (0, 1));
        assert!(type_recall_tsv(&t).starts_with("type\tcount\trecall\nArtOrDet\t2\t50.00\n"));
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let g = annotated("a", &[]);
        assert!(m2_evaluate(std::slice::from_ref(&g.tokens), &[], std::slice::from_ref(&g), 0.5, 2).is_err());
    }
}
