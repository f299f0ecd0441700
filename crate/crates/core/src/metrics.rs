//! BLEU and ROUGE-1/2/L/Lsum over a fixed tokenizer.
//!
//! ROUGE scores are recall against the reference by default: matched
//! reference units over total reference units. An F1 mode exists for
//! comparison with toolkits that report F-measure. BLEU is corpus-level
//! with n-gram counts pooled across pairs, uniform weights up to 4-grams,
//! and the usual brevity penalty; no smoothing unless the smoothed
//! sentence-level mode is selected.

use std::collections::HashMap;

use once_cell::sync::Lazy;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::javadoc::content_lines;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub lowercase: bool,
    /// Strip `/**`, `*/` and `*` gutters before tokenizing.
    pub strip_javadoc: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            lowercase: true,
            strip_javadoc: true,
        }
    }
}

static TOKEN_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"@[\p{L}\p{N}]+|[\p{L}\p{N}]+|[^\s\p{L}\p{N}]").unwrap());

/// Alphanumeric runs, `@tag` words, and single punctuation marks.
pub fn tokenize(text: &str, cfg: &TokenizerConfig) -> Vec<String> {
    let text = if cfg.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    TOKEN_RE
        .find_iter(&text)
        .map(|m| m.as_str().to_string())
        .collect()
}

/// Lines of `text` with Javadoc framing removed when configured and the
/// text is framed.
fn lines(text: &str, cfg: &TokenizerConfig) -> Vec<String> {
    if cfg.strip_javadoc && text.trim_start().starts_with("/**") {
        content_lines(text)
    } else {
        text.lines().map(str::to_string).collect()
    }
}

/// Newline-delimited sentences, tokenized; empty lines dropped.
pub fn sentences(text: &str, cfg: &TokenizerConfig) -> Vec<Vec<String>> {
    lines(text, cfg)
        .iter()
        .map(|l| tokenize(l, cfg))
        .filter(|t| !t.is_empty())
        .collect()
}

pub fn tokens(text: &str, cfg: &TokenizerConfig) -> Vec<String> {
    sentences(text, cfg).concat()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScorePair {
    pub candidate: String,
    pub reference: String,
}

impl ScorePair {
    pub fn new(candidate: impl Into<String>, reference: impl Into<String>) -> Self {
        ScorePair {
            candidate: candidate.into(),
            reference: reference.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RougeMode {
    #[default]
    Recall,
    /// Non-default; F-measure of recall and precision.
    F1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BleuMode {
    #[default]
    Corpus,
    /// Mean of per-pair BLEU with add-one smoothing for n ≥ 2.
    SentenceSmoothed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub value: f64,
    /// Set when the reference is too short for the metric; `value` is 0.
    pub degenerate: bool,
}

impl PairScore {
    fn degenerate() -> Self {
        PairScore {
            value: 0.0,
            degenerate: true,
        }
    }

    fn of(matched: usize, ref_total: usize, cand_total: usize, mode: RougeMode) -> Self {
        if ref_total == 0 {
            return Self::degenerate();
        }
        let recall = matched as f64 / ref_total as f64;
        let value = match mode {
            RougeMode::Recall => recall,
            RougeMode::F1 => {
                if cand_total == 0 || matched == 0 {
                    0.0
                } else {
                    let precision = matched as f64 / cand_total as f64;
                    2.0 * precision * recall / (precision + recall)
                }
            }
        };
        PairScore {
            value,
            degenerate: false,
        }
    }
}

fn ngram_counts<T: AsRef<str>>(toks: &[T], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if n == 0 || toks.len() < n {
        return counts;
    }
    for w in toks.windows(n) {
        *counts
            .entry(w.iter().map(AsRef::as_ref).collect())
            .or_insert(0) += 1;
    }
    counts
}

/// Sum over reference n-grams of min(reference count, candidate count).
pub fn clipped_matches<T: AsRef<str>>(cand: &[T], reference: &[T], n: usize) -> usize {
    let c = ngram_counts(cand, n);
    ngram_counts(reference, n)
        .iter()
        .map(|(g, &rc)| rc.min(c.get(g).copied().unwrap_or(0)))
        .sum()
}

fn ngram_total(len: usize, n: usize) -> usize {
    (len + 1).saturating_sub(n)
}

pub fn rouge_n_tokens<T: AsRef<str>>(
    cand: &[T],
    reference: &[T],
    n: usize,
    mode: RougeMode,
) -> PairScore {
    if reference.len() < n {
        return PairScore::degenerate();
    }
    PairScore::of(
        clipped_matches(cand, reference, n),
        ngram_total(reference.len(), n),
        ngram_total(cand.len(), n),
        mode,
    )
}

pub fn lcs_len<T: AsRef<str>>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l_tokens<T: AsRef<str>>(cand: &[T], reference: &[T], mode: RougeMode) -> PairScore {
    PairScore::of(lcs_len(cand, reference), reference.len(), cand.len(), mode)
}

/// Reference positions of one longest common subsequence: among all
/// maximum-length alignments, the lexicographically smallest sorted
/// position list.
pub fn lcs_positions<T: AsRef<str>>(reference: &[T], cand: &[T]) -> Vec<usize> {
    let (m, n) = (reference.len(), cand.len());
    // suffix[i][j] = LCS(reference[i..], cand[j..])
    let mut suffix = vec![vec![0usize; n + 1]; m + 1];
    for i in (0..m).rev() {
        for j in (0..n).rev() {
            suffix[i][j] = if reference[i].as_ref() == cand[j].as_ref() {
                suffix[i + 1][j + 1] + 1
            } else {
                suffix[i + 1][j].max(suffix[i][j + 1])
            };
        }
    }
    let mut out = Vec::with_capacity(suffix[0][0]);
    let (mut i, mut j, mut k) = (0, 0, suffix[0][0]);
    while k > 0 {
        let (ii, jj) = (i..m)
            .flat_map(|ii| (j..n).map(move |jj| (ii, jj)))
            .find(|&(ii, jj)| {
                reference[ii].as_ref() == cand[jj].as_ref() && suffix[ii + 1][jj + 1] == k - 1
            })
            .expect("suffix table guarantees a continuation");
        out.push(ii);
        (i, j, k) = (ii + 1, jj + 1, k - 1);
    }
    out
}

/// Summary-level LCS hits: for each reference sentence, the size of the
/// union of its LCS positions against every candidate sentence.
pub fn union_lcs_hits<T: AsRef<str>>(cand: &[Vec<T>], reference: &[Vec<T>]) -> usize {
    reference
        .iter()
        .map(|r| {
            let mut hit = vec![false; r.len()];
            for c in cand {
                for p in lcs_positions(r, c) {
                    hit[p] = true;
                }
            }
            hit.iter().filter(|h| **h).count()
        })
        .sum()
}

pub fn rouge_lsum_sentences<T: AsRef<str>>(
    cand: &[Vec<T>],
    reference: &[Vec<T>],
    mode: RougeMode,
) -> PairScore {
    let ref_total: usize = reference.iter().map(Vec::len).sum();
    let cand_total: usize = cand.iter().map(Vec::len).sum();
    PairScore::of(union_lcs_hits(cand, reference), ref_total, cand_total, mode)
}

pub fn rouge_n(pair: &ScorePair, n: usize, cfg: &TokenizerConfig) -> PairScore {
    rouge_n_tokens(
        &tokens(&pair.candidate, cfg),
        &tokens(&pair.reference, cfg),
        n,
        RougeMode::Recall,
    )
}

pub fn rouge_l(pair: &ScorePair, cfg: &TokenizerConfig) -> PairScore {
    rouge_l_tokens(
        &tokens(&pair.candidate, cfg),
        &tokens(&pair.reference, cfg),
        RougeMode::Recall,
    )
}

pub fn rouge_lsum(pair: &ScorePair, cfg: &TokenizerConfig) -> PairScore {
    rouge_lsum_sentences(
        &sentences(&pair.candidate, cfg),
        &sentences(&pair.reference, cfg),
        RougeMode::Recall,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuDetail {
    pub score: f64,
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub candidate_len: usize,
    pub reference_len: usize,
}

/// Corpus BLEU over pre-tokenized (candidate, reference) pairs.
pub fn bleu_corpus_tokens<T: AsRef<str>>(pairs: &[(Vec<T>, Vec<T>)], max_n: usize) -> BleuDetail {
    let c: usize = pairs.iter().map(|(c, _)| c.len()).sum();
    let r: usize = pairs.iter().map(|(_, r)| r.len()).sum();
    let precisions: Vec<f64> = (1..=max_n)
        .map(|n| {
            let matched: usize = pairs.iter().map(|(c, r)| clipped_matches(c, r, n)).sum();
            let total: usize = pairs.iter().map(|(c, _)| ngram_total(c.len(), n)).sum();
            if total == 0 {
                0.0
            } else {
                matched as f64 / total as f64
            }
        })
        .collect();
    let brevity_penalty = if c == 0 {
        0.0
    } else if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    let score = if c == 0 || max_n == 0 || precisions.contains(&0.0) {
        0.0
    } else {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / max_n as f64;
        brevity_penalty * log_mean.exp()
    };
    BleuDetail {
        score,
        precisions,
        brevity_penalty,
        candidate_len: c,
        reference_len: r,
    }
}

/// Per-pair BLEU with add-one smoothing on orders ≥ 2.
pub fn sentence_bleu_smoothed<T: AsRef<str>>(cand: &[T], reference: &[T], max_n: usize) -> f64 {
    let (c, r) = (cand.len(), reference.len());
    if c == 0 || max_n == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let mut matched = clipped_matches(cand, reference, n) as f64;
        let mut total = ngram_total(c, n) as f64;
        if n > 1 {
            matched += 1.0;
            total += 1.0;
        }
        if matched == 0.0 || total == 0.0 {
            return 0.0;
        }
        log_sum += (matched / total).ln();
    }
    let bp = if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    };
    bp * (log_sum / max_n as f64).exp()
}

pub fn bleu_corpus(pairs: &[ScorePair], cfg: &TokenizerConfig) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Validation("BLEU needs at least one pair".into()));
    }
    let toks: Vec<_> = pairs
        .iter()
        .map(|p| (tokens(&p.candidate, cfg), tokens(&p.reference, cfg)))
        .collect();
    Ok(bleu_corpus_tokens(&toks, 4).score)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub tokenizer: TokenizerConfig,
    pub rouge_mode: RougeMode,
    pub bleu_mode: BleuMode,
    pub max_n: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            tokenizer: TokenizerConfig::default(),
            rouge_mode: RougeMode::Recall,
            bleu_mode: BleuMode::Corpus,
            max_n: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu: f64,
    pub r1: f64,
    pub r2: f64,
    pub rl: f64,
    pub rlsum: f64,
    pub n_pairs: usize,
    /// Pairs whose reference was too short for at least one ROUGE variant.
    #[serde(default)]
    pub degenerate_pairs: usize,
}

/// Scores every pair in order. ROUGE values are means of per-pair scores;
/// BLEU follows `cfg.bleu_mode`.
pub fn score_pairs(pairs: &[ScorePair], cfg: &MetricConfig) -> Result<MetricReport> {
    if pairs.is_empty() {
        return Err(Error::Validation("no pairs to score".into()));
    }
    let tk = &cfg.tokenizer;
    let mut sums = [0.0f64; 4];
    let mut degenerate = 0;
    let mut token_pairs = Vec::with_capacity(pairs.len());
    for p in pairs {
        let cs = sentences(&p.candidate, tk);
        let rs = sentences(&p.reference, tk);
        let c = cs.concat();
        let r = rs.concat();
        let scores = [
            rouge_n_tokens(&c, &r, 1, cfg.rouge_mode),
            rouge_n_tokens(&c, &r, 2, cfg.rouge_mode),
            rouge_l_tokens(&c, &r, cfg.rouge_mode),
            rouge_lsum_sentences(&cs, &rs, cfg.rouge_mode),
        ];
        if scores.iter().any(|s| s.degenerate) {
            degenerate += 1;
        }
        for (sum, s) in sums.iter_mut().zip(scores) {
            *sum += s.value;
        }
        token_pairs.push((c, r));
    }
    let n = pairs.len() as f64;
    let bleu = match cfg.bleu_mode {
        BleuMode::Corpus => bleu_corpus_tokens(&token_pairs, cfg.max_n).score,
        BleuMode::SentenceSmoothed => {
            token_pairs
                .iter()
                .map(|(c, r)| sentence_bleu_smoothed(c, r, cfg.max_n))
                .sum::<f64>()
                / n
        }
    };
    Ok(MetricReport {
        bleu,
        r1: sums[0] / n,
        r2: sums[1] / n,
        rl: sums[2] / n,
        rlsum: sums[3] / n,
        n_pairs: pairs.len(),
        degenerate_pairs: degenerate,
    })
}
