//! Surface-overlap similarities between sampled responses. Both metrics
//! tokenize on whitespace.

use std::collections::HashMap;

use super::{Estimate, EstimateError};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexicalMetric {
    RougeL,
    Bleu,
}

fn lcs_len(a: &[&str], b: &[&str]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F1 from the longest common token subsequence.
pub fn rouge_l(a: &str, b: &str) -> f64 {
    let ta: Vec<&str> = a.split_whitespace().collect();
    let tb: Vec<&str> = b.split_whitespace().collect();
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let l = lcs_len(&ta, &tb) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let p = l / ta.len() as f64;
    let r = l / tb.len() as f64;
    2.0 * p * r / (p + r)
}

fn ngram_counts<'a, 'b>(tokens: &'b [&'a str], n: usize) -> HashMap<&'b [&'a str], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Sentence BLEU of `candidate` against one `reference`: uniform 1..4-gram
/// weights, brevity penalty, add-one smoothing for n >= 2.
fn bleu_directed(candidate: &[&str], reference: &[&str]) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut log_p = 0.0;
    for n in 1..=4 {
        let cand = ngram_counts(candidate, n);
        let refc = ngram_counts(reference, n);
        let total: usize = cand.values().sum();
        let matched: usize = cand.iter().map(|(g, &c)| c.min(refc.get(g).copied().unwrap_or(0))).sum();
        let p = if n == 1 { matched as f64 / total as f64 } else { (matched as f64 + 1.0) / (total as f64 + 1.0) };
        if p == 0.0 {
            return 0.0;
        }
        log_p += 0.25 * p.ln();
    }
    let (c, r) = (candidate.len() as f64, reference.len() as f64);
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    bp * log_p.exp()
}

/// Symmetrized BLEU, the mean of both directions.
pub fn bleu(a: &str, b: &str) -> f64 {
    let ta: Vec<&str> = a.split_whitespace().collect();
    let tb: Vec<&str> = b.split_whitespace().collect();
    0.5 * (bleu_directed(&ta, &tb) + bleu_directed(&tb, &ta))
}

/// Negated mean pairwise similarity over all unordered sample pairs.
pub fn lexical_similarity<F: Real, S: AsRef<str>>(texts: &[S], metric: LexicalMetric) -> Estimate<F> {
    let s = texts.len();
    if s < 2 {
        return Err(EstimateError::missing("lexical similarity needs at least two samples"));
    }
    let f = match metric {
        LexicalMetric::RougeL => rouge_l,
        LexicalMetric::Bleu => bleu,
    };
    let mut total = 0.0;
    for i in 0..s {
        for j in i + 1..s {
            total += f(texts[i].as_ref(), texts[j].as_ref());
        }
    }
    Ok(F::lit(-total * 2.0 / (s * (s - 1)) as f64))
}
