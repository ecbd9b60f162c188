//! Average-linkage agglomerative clustering on `1 - ρ` distances.

use serde::Serialize;
use uqtrace_core::Real;

use crate::correlation::CorrelationMatrix;

/// One agglomeration step. Leaves are `0..n`; the cluster formed at step `k`
/// gets id `n + k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Merge<F> {
    pub left: usize,
    pub right: usize,
    pub distance: F,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dendrogram<F> {
    pub labels: Vec<String>,
    pub merges: Vec<Merge<F>>,
    /// Cluster pairs that shared no defined leaf distance and were placed at distance 1.
    pub undefined_pairs: usize,
}

/// Mean defined leaf distance between two clusters.
fn linkage<F: Real>(a: &[usize], b: &[usize], corr: &CorrelationMatrix<F>) -> Option<F> {
    let mut total = F::zero();
    let mut count = 0usize;
    for &i in a {
        for &j in b {
            if let Some(r) = corr.get(i, j) {
                total += F::one() - r;
                count += 1;
            }
        }
    }
    (count > 0).then(|| total / F::from_count(count))
}

/// Clusters the rows of a correlation matrix. Missing cells are skipped when
/// averaging; the closest pair is merged first, ties going to the pair with
/// the lowest `(left, right)` ids.
pub fn hcluster<F: Real>(corr: &CorrelationMatrix<F>) -> Dendrogram<F> {
    let n = corr.labels.len();
    let mut active: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    let mut undefined_pairs = 0;
    while active.len() > 1 {
        let mut best: Option<(F, usize, usize, bool)> = None;
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let (d, defined) = match linkage(&active[x].1, &active[y].1, corr) {
                    Some(d) => (d, true),
                    None => (F::one(), false),
                };
                let key = (active[x].0.min(active[y].0), active[x].0.max(active[y].0));
                let better = match &best {
                    None => true,
                    Some((bd, bx, by, _)) => {
                        let bkey = (active[*bx].0.min(active[*by].0), active[*bx].0.max(active[*by].0));
                        d < *bd || (d == *bd && key < bkey)
                    }
                };
                if better {
                    best = Some((d, x, y, defined));
                }
            }
        }
        let (distance, x, y, defined) = best.expect("at least two clusters");
        if !defined {
            undefined_pairs += 1;
            log::warn!(
                "clusters {} and {} share no defined correlation; merged at distance 1",
                active[x].0,
                active[y].0
            );
        }
        let (left, right) = (active[x].0.min(active[y].0), active[x].0.max(active[y].0));
        let (_, leaves_y) = active.remove(y);
        let (_, mut leaves) = active.remove(x);
        leaves.extend(leaves_y);
        leaves.sort_unstable();
        merges.push(Merge { left, right, distance, size: leaves.len() });
        active.push((n + merges.len() - 1, leaves));
    }
    Dendrogram { labels: corr.labels.clone(), merges, undefined_pairs }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(values: Vec<Vec<Option<f64>>>) -> CorrelationMatrix<f64> {
        let labels = (0..values.len()).map(|i| format!("e{i}")).collect();
        CorrelationMatrix { labels, values }
    }

    fn full(rows: &[&[f64]]) -> CorrelationMatrix<f64> {
        matrix(rows.iter().map(|r| r.iter().copied().map(Some).collect()).collect())
    }

    #[test]
    fn perfectly_correlated_pair_merges_first_at_zero() {
        let d = hcluster(&full(&[&[1.0, 0.2, 1.0], &[0.2, 1.0, 0.2], &[1.0, 0.2, 1.0]]));
        assert_eq!(d.merges[0], Merge { left: 0, right: 2, distance: 0.0, size: 2 });
        assert_eq!(d.merges[1].left, 1);
        assert_eq!(d.merges[1].right, 3);
        assert!((d.merges[1].distance - 0.8).abs() < 1e-15);
    }

    #[test]
    fn strongest_pair_merges_first() {
        let d = hcluster(&full(&[&[1.0, 0.9, 0.1], &[0.9, 1.0, 0.1], &[0.1, 0.1, 1.0]]));
        assert_eq!((d.merges[0].left, d.merges[0].right), (0, 1));
        assert!((d.merges[0].distance - 0.1).abs() < 1e-15);
        assert_eq!((d.merges[1].left, d.merges[1].right), (2, 3));
    }

    #[test]
    fn identity_matrix_merges_in_index_order() {
        let eye = full(&[&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]);
        let d = hcluster(&eye);
        let pairs: Vec<_> = d.merges.iter().map(|m| (m.left, m.right, m.distance)).collect();
        assert_eq!(pairs, vec![(0, 1, 1.0), (2, 3, 1.0), (4, 5, 1.0)]);
    }

    #[test]
    fn missing_cells_average_pairwise_complete() {
        let m = matrix(vec![
            vec![Some(1.0), Some(0.8), None],
            vec![Some(0.8), Some(1.0), Some(0.4)],
            vec![None, Some(0.4), Some(1.0)],
        ]);
        let d = hcluster(&m);
        assert_eq!((d.merges[0].left, d.merges[0].right), (0, 1));
        // Only the (1, 2) cell is defined between {0, 1} and {2}.
        assert!((d.merges[1].distance - 0.6).abs() < 1e-15);
        assert_eq!(d.undefined_pairs, 0);
        let none = matrix(vec![vec![Some(1.0), None], vec![None, Some(1.0)]]);
        let d = hcluster(&none);
        assert_eq!(d.merges[0].distance, 1.0);
        assert_eq!(d.undefined_pairs, 1);
    }
}
