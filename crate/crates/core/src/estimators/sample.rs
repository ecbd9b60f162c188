//! Sample-dispersion estimators over the shared pool of `S` sampled responses.

use super::{Estimate, EstimateError};
use crate::scalar::{floored_ln, log_sum_exp};
use crate::trace::SampleRecord;
use crate::Real;

fn nonempty<T>(samples: &[T]) -> Result<(), EstimateError> {
    if samples.is_empty() {
        Err(EstimateError::missing("samples"))
    } else {
        Ok(())
    }
}

/// Monte-Carlo sequence entropy, optionally length-normalized per sample.
pub fn mc_entropy<F: Real>(samples: &[SampleRecord<F>], normalized: bool) -> Estimate<F> {
    nonempty(samples)?;
    let mut total = F::zero();
    for (i, s) in samples.iter().enumerate() {
        if s.token_logprobs.is_empty() {
            return Err(EstimateError::invalid(format!("sample {i} has no tokens")));
        }
        let lp = s.log_probability();
        total += if normalized { lp / F::from_count(s.token_logprobs.len()) } else { lp };
    }
    Ok(-total / F::from_count(samples.len()))
}

/// Semantic equivalence classes over sample indices, each sorted ascending
/// and ordered by their smallest member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticPartition {
    pub classes: Vec<Vec<usize>>,
}

impl SemanticPartition {
    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_samples(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }
}

/// Connected components of the mutual-entailment graph.
pub fn cluster_semantic(bidir: &[Vec<bool>]) -> Result<SemanticPartition, EstimateError> {
    let s = bidir.len();
    if s == 0 {
        return Err(EstimateError::missing("bidir_entail_label"));
    }
    for (i, row) in bidir.iter().enumerate() {
        if row.len() != s {
            return Err(EstimateError::invalid("bidir_entail_label is not square"));
        }
        for j in 0..i {
            if row[j] != bidir[j][i] {
                return Err(EstimateError::invalid(format!("bidir_entail_label asymmetric at ({i}, {j})")));
            }
        }
    }
    let mut label = vec![usize::MAX; s];
    let mut classes = Vec::new();
    for start in 0..s {
        if label[start] != usize::MAX {
            continue;
        }
        let id = classes.len();
        let mut members = vec![start];
        let mut stack = vec![start];
        label[start] = id;
        while let Some(u) = stack.pop() {
            for v in 0..s {
                if bidir[u][v] && label[v] == usize::MAX {
                    label[v] = id;
                    members.push(v);
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        classes.push(members);
    }
    Ok(SemanticPartition { classes })
}

/// Entropy of the class distribution, with class masses accumulated in
/// log space from the sample log-probabilities.
pub fn semantic_entropy<F: Real>(partition: &SemanticPartition, sample_logprobs: &[F]) -> Estimate<F> {
    if partition.num_samples() != sample_logprobs.len() {
        return Err(EstimateError::invalid("partition does not cover the sample pool"));
    }
    if partition.num_classes() <= 1 {
        return Ok(F::zero());
    }
    let class_log: Vec<F> =
        partition.classes.iter().map(|c| log_sum_exp(c.iter().map(|&i| sample_logprobs[i]))).collect();
    let total = log_sum_exp(class_log.iter().copied());
    if !total.is_finite() {
        return Err(EstimateError::invalid("sample pool has zero probability"));
    }
    let mut h = F::zero();
    for &lc in &class_log {
        let lp = lc - total;
        if lp.is_finite() {
            h -= lp.exp() * lp;
        }
    }
    Ok(h)
}

/// Negated probability-weighted kernel density around the greedy response.
///
/// `probs` are length-normalized sample probabilities, `kernels` the
/// recorder's per-sample kernel scores and `greedy_prob` the length-normalized
/// probability of the greedy response.
pub fn semantic_density<F: Real>(probs: &[F], kernels: &[F], greedy_prob: F) -> Estimate<F> {
    if probs.len() != kernels.len() {
        return Err(EstimateError::invalid("kernel scores do not match samples"));
    }
    let num: F = probs.iter().zip(kernels).map(|(&p, &k)| p * k).sum::<F>() + greedy_prob;
    let den: F = probs.iter().copied().sum::<F>() + greedy_prob;
    if den <= F::zero() {
        return Err(EstimateError::missing("semantic density weights sum to zero"));
    }
    Ok(-num / den)
}

/// Similarity-supported sample probabilities, `-mean_s ln(P_s + R_s)` with
/// `R_s = (1/tau) Σ_{j≠s} P_j sim_sj`.
pub fn sentence_sar<F: Real>(probs: &[F], sim: &[Vec<F>], tau: F, floor: F) -> Estimate<F> {
    nonempty(probs)?;
    let s = probs.len();
    if sim.len() != s || sim.iter().any(|r| r.len() != s) {
        return Err(EstimateError::invalid("similarity matrix does not match samples"));
    }
    let mut total = F::zero();
    for i in 0..s {
        let support: F = (0..s).filter(|&j| j != i).map(|j| probs[j] * sim[i][j]).sum::<F>() / tau;
        total -= floored_ln(probs[i] + support, floor);
    }
    Ok(total / F::from_count(s))
}

/// SentenceSAR on relevance-adjusted sample probabilities.
pub fn sar<F: Real>(samples: &[SampleRecord<F>], sim: &[Vec<F>], tau: F, floor: F) -> Estimate<F> {
    let mut probs = Vec::with_capacity(samples.len());
    for s in samples {
        let adj = s.tokensar_logprobs.as_ref().ok_or_else(|| EstimateError::missing("tokensar_logprobs"))?;
        probs.push(adj.iter().copied().sum::<F>().exp());
    }
    sentence_sar(&probs, sim, tau, floor)
}

/// Base score scaled by the mean dissimilarity over the full `K x K` matrix,
/// diagonal included.
pub fn cocoa<F: Real>(base: F, sent_sim: &[Vec<F>]) -> Estimate<F> {
    let k = sent_sim.len();
    if k == 0 {
        return Err(EstimateError::missing("sent_sim"));
    }
    if sent_sim.iter().any(|r| r.len() != k) {
        return Err(EstimateError::invalid("sent_sim is not square"));
    }
    let dis: F = sent_sim.iter().flatten().map(|&x| F::one() - x).sum();
    Ok(base * dis / F::from_count(k * k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(lps: &[f64]) -> SampleRecord<f64> {
        SampleRecord {
            text: String::new(),
            tokens: vec![0; lps.len()],
            token_logprobs: lps.to_vec(),
            tokensar_logprobs: None,
            kernel_score: None,
            embedding: None,
        }
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn mc_entropy_examples() {
        assert_eq!(mc_entropy(&[sample(&[0.0]), sample(&[0.0, 0.0])], false).unwrap(), 0.0);
        let pool = [sample(&[-1.0, -1.0]), sample(&[-1.0; 4])];
        assert_eq!(mc_entropy(&pool, false).unwrap(), 3.0);
        assert_eq!(mc_entropy(&pool, true).unwrap(), 1.0);
        assert!(mc_entropy(&[sample(&[])], false).is_err());
    }

    #[test]
    fn clustering_examples() {
        let all = vec![vec![true; 4]; 4];
        assert_eq!(cluster_semantic(&all).unwrap().classes, vec![vec![0, 1, 2, 3]]);
        let ident: Vec<Vec<bool>> = (0..3).map(|i| (0..3).map(|j| i == j).collect()).collect();
        assert_eq!(cluster_semantic(&ident).unwrap().num_classes(), 3);
        let mut m = ident.clone();
        m[0][1] = true;
        m[1][0] = true;
        assert_eq!(cluster_semantic(&m).unwrap().classes, vec![vec![0, 1], vec![2]]);
        m[1][0] = false;
        assert!(matches!(cluster_semantic(&m), Err(EstimateError::Invalid(_))));
    }

    #[test]
    fn clustering_is_transitive() {
        // 0~1 and 1~2 but not 0~2: still one class.
        let m = vec![vec![true, true, false], vec![true, true, true], vec![false, true, true]];
        assert_eq!(cluster_semantic(&m).unwrap().num_classes(), 1);
    }

    #[test]
    fn semantic_entropy_examples() {
        let one = SemanticPartition { classes: vec![vec![0, 1]] };
        assert_eq!(semantic_entropy(&one, &[-1.0, -3.0]).unwrap(), 0.0);
        let two = SemanticPartition { classes: vec![vec![0], vec![1]] };
        close(semantic_entropy(&two, &[-2.0, -2.0]).unwrap(), 2f64.ln(), 1e-15);
        close(semantic_entropy(&two, &[0.8f64.ln(), 0.2f64.ln()]).unwrap(), 0.5004, 1e-4);
    }

    #[test]
    fn semantic_entropy_survives_underflow() {
        let two = SemanticPartition { classes: vec![vec![0], vec![1]] };
        close(semantic_entropy(&two, &[-5000.0, -5000.0]).unwrap(), 2f64.ln(), 1e-12);
    }

    #[test]
    fn semantic_density_examples() {
        assert_eq!(semantic_density(&[0.3, 0.4], &[1.0, 1.0], 0.2).unwrap(), -1.0);
        close(semantic_density(&[0.5, 0.5], &[1.0, 0.0], 0.5).unwrap(), -1.0 / 1.5, 1e-15);
        let v = semantic_density(&[0.5, 0.5], &[0.0, 0.0], 1e-9).unwrap();
        assert!(v <= 0.0 && v > -1e-8);
        assert!(semantic_density::<f64>(&[0.0], &[1.0], 0.0).unwrap_err().is_missing());
    }

    #[test]
    fn sentence_sar_examples() {
        let ones = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        close(sentence_sar(&[0.5, 0.5], &ones, 1.0, 1e-12).unwrap(), 0.0, 1e-15);
        let ident = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        close(sentence_sar(&[0.5, 0.5], &ident, 1.0, 1e-12).unwrap(), 2f64.ln(), 1e-15);
        close(sentence_sar(&[0.25], &[vec![1.0]], 1.0, 1e-12).unwrap(), -(0.25f64.ln()), 1e-15);
    }

    #[test]
    fn sar_examples() {
        let mut a = sample(&[-0.5]);
        let mut b = sample(&[-0.7]);
        a.tokensar_logprobs = Some(vec![0.0]);
        b.tokensar_logprobs = Some(vec![0.0]);
        let half = vec![vec![1.0, 0.5], vec![0.5, 1.0]];
        close(sar(&[a.clone(), b.clone()], &half, 1.0, 1e-12).unwrap(), -(1.5f64.ln()), 1e-15);
        a.tokensar_logprobs = Some(vec![-0.5]);
        b.tokensar_logprobs = Some(vec![-0.7]);
        let probs = [(-0.5f64).exp(), (-0.7f64).exp()];
        assert_eq!(
            sar(&[a.clone(), b.clone()], &half, 1.0, 1e-12).unwrap(),
            sentence_sar(&probs, &half, 1.0, 1e-12).unwrap()
        );
        let far = sar(&[a, b], &half, 1e12, 1e-12).unwrap();
        close(far, 0.6, 1e-9);
    }

    #[test]
    fn cocoa_examples() {
        assert_eq!(cocoa(5.0, &[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap(), 0.0);
        assert_eq!(cocoa(2.0, &[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap(), 0.5);
        assert_eq!(cocoa(0.0, &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(), 0.0);
    }
}
