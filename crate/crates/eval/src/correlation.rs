//! Rank correlations between estimators.

use serde::Serialize;
use uqtrace_core::Real;

use crate::metrics::average_ranks;

/// Labelled symmetric matrix with missing cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix<F> {
    pub labels: Vec<String>,
    pub values: Vec<Vec<Option<F>>>,
}

impl<F: Real> CorrelationMatrix<F> {
    pub fn get(&self, i: usize, j: usize) -> Option<F> {
        self.values[i][j]
    }

    #[allow(clippy::needless_range_loop)]
    fn build(labels: Vec<String>, mut cell: impl FnMut(usize, usize) -> Option<F>) -> Self {
        let k = labels.len();
        let mut values = vec![vec![None; k]; k];
        for i in 0..k {
            for j in 0..=i {
                let v = cell(i, j);
                values[i][j] = v;
                values[j][i] = v;
            }
        }
        Self { labels, values }
    }
}

/// Entries defined in both columns, as aligned vectors.
fn complete_pairs<F: Real>(a: &[Option<F>], b: &[Option<F>]) -> (Vec<F>, Vec<F>) {
    a.iter().zip(b).filter_map(|(x, y)| Some(((*x)?, (*y)?))).unzip()
}

fn pearson<F: Real>(x: &[F], y: &[F]) -> Option<F> {
    let n = F::from_count(x.len());
    let mx = x.iter().copied().sum::<F>() / n;
    let my = y.iter().copied().sum::<F>() / n;
    let (mut sxy, mut sxx, mut syy) = (F::zero(), F::zero(), F::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == F::zero() || syy == F::zero() {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).max(-F::one()).min(F::one()))
}

/// Spearman's ρ with average ranks over the instances both columns define.
/// `None` with fewer than three common instances or a constant column.
pub fn spearman<F: Real>(a: &[Option<F>], b: &[Option<F>]) -> Option<F> {
    let (x, y) = complete_pairs(a, b);
    if x.len() < 3 {
        return None;
    }
    pearson(&average_ranks(&x), &average_ranks(&y))
}

/// Pairwise Spearman matrix over named score columns.
pub fn spearman_matrix<F: Real>(labels: Vec<String>, columns: &[Vec<Option<F>>]) -> CorrelationMatrix<F> {
    assert_eq!(labels.len(), columns.len());
    CorrelationMatrix::build(labels, |i, j| {
        spearman(&columns[i], &columns[j]).map(|r| if i == j { F::one() } else { r })
    })
}

/// Kendall's τ-b over the entries both sequences define. `None` with fewer
/// than two common entries or when either side is constant.
pub fn kendall_tau_b<F: Real>(a: &[Option<F>], b: &[Option<F>]) -> Option<F> {
    let (x, y) = complete_pairs(a, b);
    let n = x.len();
    if n < 2 {
        return None;
    }
    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i].partial_cmp(&x[j]).expect("finite");
            let dy = y[i].partial_cmp(&y[j]).expect("finite");
            use std::cmp::Ordering::Equal;
            match (dx, dy) {
                (Equal, Equal) => {
                    tied_x += 1;
                    tied_y += 1;
                }
                (Equal, _) => tied_x += 1,
                (_, Equal) => tied_y += 1,
                _ if dx == dy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let pairs = n * (n - 1) / 2;
    let denom = (F::from_count(pairs - tied_x) * F::from_count(pairs - tied_y)).sqrt();
    if denom == F::zero() {
        return None;
    }
    Some((F::from_count(concordant) - F::from_count(discordant)) / denom)
}

/// Kendall τ-b between named profiles (e.g. one estimator's AUROC per panel).
pub fn kendall_profiles<F: Real>(labels: Vec<String>, profiles: &[Vec<Option<F>>]) -> CorrelationMatrix<F> {
    assert_eq!(labels.len(), profiles.len());
    CorrelationMatrix::build(labels, |i, j| {
        kendall_tau_b(&profiles[i], &profiles[j]).map(|t| if i == j { F::one() } else { t })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn some(x: &[f64]) -> Vec<Option<f64>> {
        x.iter().copied().map(Some).collect()
    }

    #[test]
    fn spearman_examples() {
        let a = some(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(spearman(&a, &a), Some(1.0));
        assert_eq!(spearman(&a, &some(&[4.0, 3.0, 2.0, 1.0])), Some(-1.0));
        assert_eq!(spearman(&some(&[1.0, 2.0, 3.0]), &some(&[3.0, 1.0, 2.0])), Some(-0.5));
        assert_eq!(spearman(&some(&[1.0, 2.0]), &some(&[1.0, 2.0])), None);
        assert_eq!(spearman(&a, &some(&[1.0; 4])), None);
    }

    #[test]
    fn spearman_skips_missing_pairwise() {
        let a = vec![Some(1.0), None, Some(2.0), Some(3.0), Some(4.0)];
        let b = vec![Some(1.0), Some(9.0), Some(2.0), None, Some(4.0)];
        assert_eq!(spearman(&a, &b), Some(1.0));
        let m = spearman_matrix(vec!["a".into(), "b".into()], &[a, b]);
        assert_eq!(m.get(0, 1), m.get(1, 0));
        assert_eq!(m.get(0, 0), Some(1.0));
    }

    #[test]
    fn kendall_examples() {
        let a = some(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(kendall_tau_b(&a, &a), Some(1.0));
        assert_eq!(kendall_tau_b(&a, &some(&[4.0, 3.0, 2.0, 1.0])), Some(-1.0));
        let t = kendall_tau_b(&a, &some(&[1.0, 3.0, 2.0, 4.0])).unwrap();
        assert!((t - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(kendall_tau_b(&a, &some(&[2.0; 4])), None);
        assert_eq!(kendall_tau_b(&some(&[1.0]), &some(&[1.0])), None);
    }

    #[test]
    fn kendall_tau_b_tie_correction() {
        // x = (1,1,2), y = (1,2,3): pairs (0,1) tie in x, others concordant.
        let t = kendall_tau_b(&some(&[1.0, 1.0, 2.0]), &some(&[1.0, 2.0, 3.0])).unwrap();
        assert!((t - 2.0 / (2.0f64 * 3.0).sqrt()).abs() < 1e-15);
    }
}
