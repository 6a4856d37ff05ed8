//! Brute-force oracles shared by the integration tests. Nothing here calls
//! the code it checks.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use charcorrect::editops::Edit;

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// One alignment step, as in a textbook Levenshtein derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Keep,
    Sub,
    Del,
    Ins,
}

fn step_cost(s: Step) -> usize {
    usize::from(s != Step::Keep)
}

/// Every alignment of `a` to `b`, by plain recursion. Keep is only
/// allowed on equal tokens.
pub fn all_alignments<T: PartialEq>(a: &[T], b: &[T]) -> Vec<Vec<Step>> {
    if a.is_empty() && b.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    let mut prefixed = |s: Step, rest: Vec<Vec<Step>>| {
        for mut r in rest {
            r.insert(0, s);
            out.push(r);
        }
    };
    if !a.is_empty() && !b.is_empty() {
        let s = if a[0] == b[0] { Step::Keep } else { Step::Sub };
        prefixed(s, all_alignments(&a[1..], &b[1..]));
    }
    if !a.is_empty() {
        prefixed(Step::Del, all_alignments(&a[1..], b));
    }
    if !b.is_empty() {
        prefixed(Step::Ins, all_alignments(a, &b[1..]));
    }
    out
}

pub fn alignment_steps_cost(steps: &[Step]) -> usize {
    steps.iter().map(|&s| step_cost(s)).sum()
}

/// Minimum over all alignments.
pub fn brute_levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    all_alignments(a, b)
        .iter()
        .map(|s| alignment_steps_cost(s))
        .min()
        .unwrap()
}

/// The minimum-cost alignments only.
pub fn min_cost_alignments<T: PartialEq>(a: &[T], b: &[T]) -> Vec<Vec<Step>> {
    let all = all_alignments(a, b);
    let best = all.iter().map(|s| alignment_steps_cost(s)).min().unwrap();
    all.into_iter().filter(|s| alignment_steps_cost(s) == best).collect()
}

/// Gold edit for the oracle: span plus replacement tokens.
pub type GoldSpan = (usize, usize, Vec<String>);

/// Result of the exhaustive MaxMatch search.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleChoice {
    pub edits: Vec<(usize, usize, Vec<String>)>,
    pub matched: usize,
}

/// Enumerates every minimum-cost alignment and every way to cut it into
/// kept matches and edit blocks (at least one change, at most
/// `max_unchanged` matches). Candidates are ranked by most gold matches
/// (each distinct gold edit counted once), fewest edits, fewest matches
/// absorbed into edits, then the smallest edit list.
pub fn m2_oracle(src: &[String], hyp: &[String], gold: &[GoldSpan], max_unchanged: usize) -> OracleChoice {
    let mut gold_set: Vec<GoldSpan> = Vec::new();
    for g in gold {
        if !gold_set.contains(g) {
            gold_set.push(g.clone());
        }
    }
    // Edit list -> fewest absorbed matches over every route producing it.
    let mut candidates: HashMap<Vec<(usize, usize, Vec<String>)>, usize> = HashMap::new();
    for steps in min_cost_alignments(src, hyp) {
        // Source/target positions before each step.
        let mut pos = vec![(0usize, 0usize)];
        for s in &steps {
            let (i, j) = *pos.last().unwrap();
            pos.push(match s {
                Step::Keep | Step::Sub => (i + 1, j + 1),
                Step::Del => (i + 1, j),
                Step::Ins => (i, j + 1),
            });
        }
        let n = steps.len();
        // Each of the n-1 gaps is a cut or not.
        for mask in 0u32..(1u32 << n.saturating_sub(1)) {
            let mut blocks = Vec::new();
            let mut start = 0;
            for k in 0..n {
                if k == n - 1 || mask & (1 << k) != 0 {
                    blocks.push((start, k + 1));
                    start = k + 1;
                }
            }
            if n == 0 {
                blocks.clear();
            }
            // Each block is kept (a single match) or an edit.
            let mut edit_choices: Vec<Vec<Option<usize>>> = vec![vec![]];
            let mut ok = true;
            for &(a, b) in &blocks {
                let block = &steps[a..b];
                let keeps = block.iter().filter(|&&s| s == Step::Keep).count();
                let changes = block.len() - keeps;
                let as_keep = block.len() == 1 && keeps == 1;
                let as_edit = changes >= 1 && keeps <= max_unchanged;
                let opts: Vec<Option<usize>> = match (as_keep, as_edit) {
                    (true, _) => vec![None],
                    (false, true) => vec![Some(keeps)],
                    (false, false) => {
                        ok = false;
                        break;
                    }
                };
                edit_choices = edit_choices
                    .into_iter()
                    .flat_map(|prefix| {
                        opts.iter().map(move |o| {
                            let mut p = prefix.clone();
                            p.push(*o);
                            p
                        })
                    })
                    .collect();
            }
            if !ok {
                continue;
            }
            for choice in edit_choices {
                let mut list = Vec::new();
                let mut absorbed = 0;
                for (&(a, b), c) in blocks.iter().zip(&choice) {
                    if let Some(k) = c {
                        let (i0, j0) = pos[a];
                        let (i1, j1) = pos[b];
                        list.push((i0, i1, hyp[j0..j1].to_vec()));
                        absorbed += k;
                    }
                }
                let e = candidates.entry(list).or_insert(absorbed);
                *e = (*e).min(absorbed);
            }
        }
    }
    let matched_of = |list: &Vec<(usize, usize, Vec<String>)>| {
        let mut used = vec![false; gold_set.len()];
        let mut m = 0;
        for e in list {
            if let Some(k) = gold_set.iter().position(|g| g == e) {
                if !used[k] {
                    used[k] = true;
                    m += 1;
                }
            }
        }
        m
    };
    let (edits, _) = candidates
        .into_iter()
        .min_by(|(la, aa), (lb, ab)| {
            let ka = (std::cmp::Reverse(matched_of(la)), la.len(), *aa);
            let kb = (std::cmp::Reverse(matched_of(lb)), lb.len(), *ab);
            ka.cmp(&kb).then_with(|| edit_list_cmp(src, la, lb))
        })
        .expect("at least one segmentation");
    let matched = matched_of(&edits);
    OracleChoice { edits, matched }
}

/// Lexicographic order of edit lists, with edits ordered by start, end,
/// replaced tokens, then replacement.
fn edit_list_cmp(
    src: &[String],
    a: &[(usize, usize, Vec<String>)],
    b: &[(usize, usize, Vec<String>)],
) -> std::cmp::Ordering {
    let key = |e: &(usize, usize, Vec<String>)| (e.0, e.1, src[e.0..e.1].to_vec(), e.2.clone());
    a.iter().map(key).cmp(b.iter().map(key))
}

pub fn edit_triples(edits: &[Edit]) -> Vec<(usize, usize, Vec<String>)> {
    edits.iter().map(|e| (e.start, e.end, e.target.clone())).collect()
}

/// An ARPA file parsed into plain maps, and the textbook backoff
/// recursion over them.
pub struct ArpaOracle {
    order: usize,
    entries: HashMap<Vec<String>, (f64, f64)>,
}

impl ArpaOracle {
    pub fn parse(text: &str) -> Self {
        let mut entries = HashMap::new();
        let mut order = 0;
        let mut current = 0usize;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line == "\\data\\" || line == "\\end\\" || line.starts_with("ngram ") {
                if let Some(rest) = line.strip_prefix("ngram ") {
                    let n: usize = rest.split('=').next().unwrap().trim().parse().unwrap();
                    order = order.max(n);
                }
                continue;
            }
            if let Some(h) = line.strip_prefix('\\') {
                current = h.split('-').next().unwrap().parse().unwrap();
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let lp: f64 = fields[0].parse().unwrap();
            let gram: Vec<String> = fields[1].split(' ').map(str::to_string).collect();
            assert_eq!(gram.len(), current, "{line}");
            let bo = fields.get(2).map(|b| b.parse().unwrap()).unwrap_or(0.0);
            entries.insert(gram, (lp, bo));
        }
        ArpaOracle { order, entries }
    }

    fn known(&self, w: &str) -> String {
        if self.entries.contains_key(&vec![w.to_string()]) {
            w.to_string()
        } else {
            "<unk>".to_string()
        }
    }

    /// log10 P(word | context) by the backoff recursion.
    pub fn logprob(&self, word: &str, context: &[&str]) -> f64 {
        let w = self.known(word);
        let mut ctx: Vec<String> = context.iter().map(|c| self.known(c)).collect();
        let keep = self.order - 1;
        if ctx.len() > keep {
            ctx.drain(..ctx.len() - keep);
        }
        self.recurse(&w, &ctx)
    }

    fn recurse(&self, w: &str, ctx: &[String]) -> f64 {
        let mut gram = ctx.to_vec();
        gram.push(w.to_string());
        if let Some(&(lp, _)) = self.entries.get(&gram) {
            return lp;
        }
        if ctx.is_empty() {
            panic!("unigram {w} missing");
        }
        let bo = self.entries.get(ctx).map(|e| e.1).unwrap_or(0.0);
        bo + self.recurse(w, &ctx[1..])
    }

    pub fn counts(&self) -> BTreeMap<usize, usize> {
        let mut c = BTreeMap::new();
        for g in self.entries.keys() {
            *c.entry(g.len()).or_insert(0) += 1;
        }
        c
    }
}
