//! Brute-force reference implementations used only by tests. Each one takes
//! a different route from the library code it checks.
#![allow(dead_code)]

use std::collections::BTreeMap;

/// ROUGE-N recall by explicit greedy matching of reference n-gram
/// occurrences to unused candidate occurrences.
pub fn rouge_n(cand: &[String], reference: &[String], n: usize) -> f64 {
    if reference.len() < n {
        return 0.0;
    }
    let grams = |t: &[String]| -> Vec<Vec<String>> {
        (0..=t.len() - n.min(t.len()))
            .filter(|&i| i + n <= t.len())
            .map(|i| t[i..i + n].to_vec())
            .collect()
    };
    let rg = grams(reference);
    let cg = grams(cand);
    let mut used = vec![false; cg.len()];
    let mut matched = 0;
    for g in &rg {
        if let Some(k) = (0..cg.len()).find(|&k| !used[k] && &cg[k] == g) {
            used[k] = true;
            matched += 1;
        }
    }
    matched as f64 / rg.len() as f64
}

fn is_subsequence(needle: &[&String], hay: &[String]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|x| it.any(|y| y == *x))
}

/// All position subsets of `a` that form a common subsequence with `b`,
/// restricted to maximum size. Exponential; inputs stay ≤ 12 tokens.
fn max_common_subsets(a: &[String], b: &[String]) -> (usize, Vec<Vec<usize>>) {
    assert!(a.len() <= 16, "oracle input too long");
    let mut best = 0;
    let mut sets = Vec::new();
    for mask in 0u32..(1u32 << a.len()) {
        let pos: Vec<usize> = (0..a.len()).filter(|i| mask & (1 << i) != 0).collect();
        let toks: Vec<&String> = pos.iter().map(|&i| &a[i]).collect();
        if !is_subsequence(&toks, b) {
            continue;
        }
        if pos.len() > best {
            best = pos.len();
            sets.clear();
        }
        if pos.len() == best {
            sets.push(pos);
        }
    }
    (best, sets)
}

pub fn lcs(a: &[String], b: &[String]) -> usize {
    max_common_subsets(a, b).0
}

pub fn rouge_l(cand: &[String], reference: &[String]) -> f64 {
    if reference.is_empty() {
        return 0.0;
    }
    lcs(reference, cand) as f64 / reference.len() as f64
}

/// Union-LCS with the lexicographically smallest maximal alignment per
/// sentence pair.
pub fn union_lcs(cand: &[Vec<String>], reference: &[Vec<String>]) -> usize {
    reference
        .iter()
        .map(|r| {
            let mut hit = vec![false; r.len()];
            for c in cand {
                let (_, mut sets) = max_common_subsets(r, c);
                sets.sort();
                if let Some(first) = sets.first() {
                    for &p in first {
                        hit[p] = true;
                    }
                }
            }
            hit.into_iter().filter(|h| *h).count()
        })
        .sum()
}

pub fn rouge_lsum(cand: &[Vec<String>], reference: &[Vec<String>]) -> f64 {
    let total: usize = reference.iter().map(Vec::len).sum();
    if total == 0 {
        return 0.0;
    }
    union_lcs(cand, reference) as f64 / total as f64
}

fn ngram_table(t: &[String], n: usize) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    if t.len() >= n {
        for i in 0..=t.len() - n {
            *m.entry(t[i..i + n].join("\u{1}")).or_insert(0) += 1;
        }
    }
    m
}

/// Textbook corpus BLEU: pooled modified precisions, geometric mean as a
/// product root, brevity penalty from total lengths.
pub fn bleu(pairs: &[(Vec<String>, Vec<String>)]) -> f64 {
    let c: usize = pairs.iter().map(|p| p.0.len()).sum();
    let r: usize = pairs.iter().map(|p| p.1.len()).sum();
    if c == 0 {
        return 0.0;
    }
    let mut product = 1.0f64;
    for n in 1..=4 {
        let mut num = 0usize;
        let mut den = 0usize;
        for (cand, reference) in pairs {
            let ct = ngram_table(cand, n);
            let rt = ngram_table(reference, n);
            for (g, &k) in &ct {
                num += k.min(*rt.get(g).unwrap_or(&0));
                den += k;
            }
        }
        if den == 0 || num == 0 {
            return 0.0;
        }
        product *= num as f64 / den as f64;
    }
    let bp = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    bp * product.powf(0.25)
}

/// Fleiss' kappa via pairwise rater agreement counts.
pub fn fleiss_kappa(rows: &[Vec<usize>]) -> f64 {
    let n_items = rows.len() as f64;
    let raters: usize = rows[0].iter().sum();
    let k = rows[0].len();
    let pairs_per_item = (raters * (raters - 1) / 2) as f64;
    let mut agree_sum = 0.0;
    for row in rows {
        let agreeing: usize = row.iter().map(|&c| c * c.saturating_sub(1) / 2).sum();
        agree_sum += agreeing as f64 / pairs_per_item;
    }
    let p_bar = agree_sum / n_items;
    let mut pe = 0.0;
    for j in 0..k {
        let col: usize = rows.iter().map(|r| r[j]).sum();
        let p = col as f64 / (n_items * raters as f64);
        pe += p * p;
    }
    (p_bar - pe) / (1.0 - pe)
}

/// Small deterministic generator so fixtures do not depend on the
/// library's RNG choices.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 33
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }

    pub fn tokens(&mut self, max_len: u64, vocab: u64) -> Vec<String> {
        let len = self.below(max_len + 1);
        (0..len)
            .map(|_| format!("w{}", self.below(vocab)))
            .collect()
    }
}
