//! Discrimination, selective-prediction and rank-calibration metrics.
//!
//! All functions take uncertainty scores (larger = less trustworthy) that
//! are already free of missing values; callers drop missing instances
//! pairwise before calling. Every metric depends on the scores only through
//! their order, so strictly increasing transforms leave the output unchanged.

use std::cmp::Ordering;

use thiserror::Error;
use uqtrace_core::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("rank calibration needs at least {bins} instances, got {n}")]
    TooFewForBins { n: usize, bins: usize },
    #[error("rank calibration needs at least two bins, got {0}")]
    Bins(usize),
    #[error("scores and labels differ in length ({0} vs {1})")]
    Length(usize, usize),
}

pub(crate) fn cmp<F: Real>(a: &F, b: &F) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// 1-based ranks in ascending order; tied values share their mean rank.
pub fn average_ranks<F: Real>(x: &[F]) -> Vec<F> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| cmp(&x[a], &x[b]).then(a.cmp(&b)));
    let mut ranks = vec![F::zero(); x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let r = F::from_count(start + 1 + end) / F::two();
        for &i in &order[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

/// Hallucination label for a quality value: `q < 0.5`.
pub fn binarize_quality<F: Real>(q: F) -> bool {
    q < F::half()
}

/// Mann–Whitney AUROC with hallucinated responses as the positive class.
/// `None` when only one class is present.
pub fn auroc<F: Real>(scores: &[F], hallucinated: &[bool]) -> Option<F> {
    assert_eq!(scores.len(), hallucinated.len());
    let pos = hallucinated.iter().filter(|&&h| h).count();
    let neg = scores.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let ranks = average_ranks(scores);
    let rank_sum: F = ranks.iter().zip(hallucinated).filter(|(_, &h)| h).map(|(&r, _)| r).sum();
    let u = rank_sum - F::from_count(pos * (pos + 1)) / F::two();
    Some(u / (F::from_count(pos) * F::from_count(neg)))
}

/// Area under the expected quality–retention curve for a rejection order
/// given as consecutive tie groups of quality values. The curve is sampled
/// at every rejection count `k = 0..n-1` (retention rate `r = k/n`); inside a
/// tie group the rejected mass is the group mean times the number rejected.
fn retention_auc<F: Real>(groups: &[Vec<F>], n: usize, total: F) -> F {
    let mut curve = Vec::with_capacity(n);
    let mut rejected = F::zero();
    for g in groups {
        let sum: F = g.iter().copied().sum();
        let size = F::from_count(g.len());
        for j in 0..g.len() {
            if curve.len() == n {
                break;
            }
            let partial = rejected + F::from_count(j) * sum / size;
            curve.push((total - partial) / F::from_count(n - curve.len()));
        }
        rejected += sum;
    }
    let inner: F = curve.iter().copied().sum();
    (inner - (curve[0] + curve[n - 1]) / F::two()) / F::from_count(n)
}

/// Consecutive runs of equal keys, in the order of `order`.
fn tie_groups<F: Real>(order: &[usize], key: &[F], quality: &[F]) -> Vec<Vec<F>> {
    let mut groups: Vec<Vec<F>> = Vec::new();
    let mut last: Option<F> = None;
    for &i in order {
        if last != Some(key[i]) {
            groups.push(Vec::new());
            last = Some(key[i]);
        }
        groups.last_mut().expect("pushed").push(quality[i]);
    }
    groups
}

/// Prediction–rejection ratio `(AUC_u - AUC_random) / (AUC_oracle - AUC_random)`.
/// `None` for fewer than two instances or constant quality.
pub fn prr<F: Real>(scores: &[F], quality: &[F]) -> Option<F> {
    assert_eq!(scores.len(), quality.len());
    let n = scores.len();
    if n < 2 || quality.iter().all(|&q| q == quality[0]) {
        return None;
    }
    let total: F = quality.iter().copied().sum();
    let idx: Vec<usize> = (0..n).collect();

    let mut by_uncertainty = idx.clone();
    by_uncertainty.sort_by(|&a, &b| cmp(&scores[b], &scores[a]).then(a.cmp(&b)));
    let ours = retention_auc(&tie_groups(&by_uncertainty, scores, quality), n, total);

    let mut by_quality = idx.clone();
    by_quality.sort_by(|&a, &b| cmp(&quality[a], &quality[b]).then(a.cmp(&b)));
    let oracle = retention_auc(&tie_groups(&by_quality, quality, quality), n, total);

    let random = retention_auc(&[quality.to_vec()], n, total);
    let denom = oracle - random;
    if denom == F::zero() {
        return None;
    }
    Some((ours - random) / denom)
}

/// Binned rank-calibration error with `bins` equal-mass bins.
///
/// Instances are ordered by ascending uncertainty (index breaks ties) and
/// bin `b` takes positions `[floor(b n / B), floor((b+1) n / B))`. Within a
/// bin, `c_b` is the mean relative uncertainty rank `(p + 0.5) / n` and
/// `q_b` the mean relative quality rank `(avg_rank - 0.5) / n`. The result
/// is the mean of `|q_b - (1 - c_b)|` over bins.
pub fn rce<F: Real>(scores: &[F], quality: &[F], bins: usize) -> Result<F, MetricError> {
    if scores.len() != quality.len() {
        return Err(MetricError::Length(scores.len(), quality.len()));
    }
    if bins < 2 {
        return Err(MetricError::Bins(bins));
    }
    let n = scores.len();
    if n < bins {
        return Err(MetricError::TooFewForBins { n, bins });
    }
    let nf = F::from_count(n);
    let q_rank: Vec<F> = average_ranks(quality).into_iter().map(|r| (r - F::half()) / nf).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp(&scores[a], &scores[b]).then(a.cmp(&b)));
    let mut total = F::zero();
    for b in 0..bins {
        let (lo, hi) = (b * n / bins, (b + 1) * n / bins);
        let size = F::from_count(hi - lo);
        let c: F = (lo..hi).map(|p| (F::from_count(p) + F::half()) / nf).sum::<F>() / size;
        let q: F = order[lo..hi].iter().map(|&i| q_rank[i]).sum::<F>() / size;
        total += (q - (F::one() - c)).abs();
    }
    Ok(total / F::from_count(bins))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(average_ranks::<f64>(&[]), Vec::<f64>::new());
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]), Some(1.0));
        assert_eq!(auroc(&[1.0; 4], &[true, false, true, false]), Some(0.5));
        assert_eq!(auroc(&[3.0, 1.0, 2.0, 0.0], &[true, false, true, false]), Some(1.0));
        assert_eq!(auroc(&[1.0, 2.0], &[true, true]), None);
        assert_eq!(auroc(&[0.1, 0.2, 0.3], &[true, false, false]), Some(0.0));
    }

    #[test]
    fn binarize_boundary() {
        assert!(binarize_quality(0.0));
        assert!(!binarize_quality(1.0));
        assert!(!binarize_quality(0.5));
        assert!(binarize_quality(0.4999));
    }

    #[test]
    fn prr_examples() {
        assert_eq!(prr(&[0.1, 0.2, 0.9, 0.8], &[1.0, 1.0, 0.0, 0.0]), Some(1.0));
        assert_eq!(prr(&[0.5; 4], &[1.0, 0.0, 1.0, 0.0]), Some(0.0));
        assert_eq!(prr(&[0.1, 0.2], &[1.0, 1.0]), None);
        assert_eq!(prr(&[0.1], &[1.0]), None);
        let q = [0.9, 0.7, 0.4, 0.1, 0.3];
        let oracle: Vec<f64> = q.iter().map(|&x| -x).collect();
        assert_eq!(prr(&oracle, &q), Some(1.0));
        assert!(prr(&q, &q).unwrap() < 0.0);
    }

    #[test]
    fn prr_hand_curve() {
        // q = (1, 0, 1), u = (0, 1, 2): rejection order 2, 1, 0.
        // ours: Q = (2/3, 1/2, 1), oracle: Q = (2/3, 1, 1), random: 2/3.
        let auc = |c: [f64; 3]| (c[0] / 2.0 + c[1] + c[2] / 2.0) / 3.0;
        let (o, r, u) = (auc([2.0 / 3.0, 1.0, 1.0]), auc([2.0 / 3.0; 3]), auc([2.0 / 3.0, 0.5, 1.0]));
        let got = prr(&[0.0, 1.0, 2.0], &[1.0, 0.0, 1.0]).unwrap();
        assert!((got - (u - r) / (o - r)).abs() < 1e-15);
    }

    #[test]
    fn rce_anti_aligned_is_near_zero() {
        let n = 100;
        let u: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let q: Vec<f64> = (0..n).map(|i| (n - i) as f64).collect();
        assert!(rce(&u, &q, 10).unwrap() <= 1.0 / (2.0 * n as f64));
        assert!(rce(&u, &q, n).unwrap() < 0.01);
        let aligned = rce(&u, &u, 10).unwrap();
        assert!(aligned > 0.4);
    }

    #[test]
    fn rce_errors() {
        assert_eq!(rce(&[1.0; 5], &[1.0; 5], 10), Err(MetricError::TooFewForBins { n: 5, bins: 10 }));
        assert_eq!(rce(&[1.0; 5], &[1.0; 5], 1), Err(MetricError::Bins(1)));
    }
}
