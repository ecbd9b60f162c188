//! Stability of estimator rankings across panels.

use serde::Serialize;
use uqtrace_core::Real;

use crate::metrics::average_ranks;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankVariability<F> {
    pub estimator: String,
    /// Panels in which the estimator had a defined metric.
    pub panels: usize,
    pub mean_metric: Option<F>,
    pub mean_rank: Option<F>,
    /// Population standard deviation of the within-panel rank.
    pub rank_std: Option<F>,
}

/// `metric[p][e]` is estimator `e`'s metric on panel `p` (larger = better).
/// Within each panel, estimators with a defined value are ranked from 1
/// (best) with ties sharing the mean rank; panels where an estimator is
/// missing are excluded from its summary.
pub fn rank_variability<F: Real>(estimators: &[String], metric: &[Vec<Option<F>>]) -> Vec<RankVariability<F>> {
    let k = estimators.len();
    let mut ranks: Vec<Vec<F>> = vec![Vec::new(); k];
    let mut values: Vec<Vec<F>> = vec![Vec::new(); k];
    for panel in metric {
        assert_eq!(panel.len(), k, "panel width differs from the estimator list");
        let present: Vec<usize> = (0..k).filter(|&e| panel[e].is_some()).collect();
        let negated: Vec<F> = present.iter().map(|&e| -panel[e].expect("present")).collect();
        for (&e, r) in present.iter().zip(average_ranks(&negated)) {
            ranks[e].push(r);
            values[e].push(panel[e].expect("present"));
        }
    }
    let mean = |xs: &[F]| (!xs.is_empty()).then(|| xs.iter().copied().sum::<F>() / F::from_count(xs.len()));
    estimators
        .iter()
        .enumerate()
        .map(|(e, id)| {
            let mean_rank = mean(&ranks[e]);
            let rank_std = mean_rank.map(|m| {
                (ranks[e].iter().map(|&r| (r - m) * (r - m)).sum::<F>() / F::from_count(ranks[e].len())).sqrt()
            });
            RankVariability {
                estimator: id.clone(),
                panels: ranks[e].len(),
                mean_metric: mean(&values[e]),
                mean_rank,
                rank_std,
            }
        })
        .collect()
}
