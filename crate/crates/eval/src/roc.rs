//! Per-family ROC curves on a fixed false-positive-rate grid.

use serde::Serialize;
use uqtrace_core::{Family, Real};

use crate::metrics::cmp;
use crate::table::ScoreTable;

/// Empirical ROC vertices from `(0, 0)` to `(1, 1)`, one per distinct score
/// threshold, with hallucinated responses as positives.
#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve<F> {
    pub fpr: Vec<F>,
    pub tpr: Vec<F>,
}

pub fn roc_curve<F: Real>(scores: &[F], hallucinated: &[bool]) -> Option<RocCurve<F>> {
    let pos = hallucinated.iter().filter(|&&h| h).count();
    let neg = hallucinated.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| cmp(&scores[b], &scores[a]).then(a.cmp(&b)));
    let (mut fpr, mut tpr) = (vec![F::zero()], vec![F::zero()]);
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let threshold = scores[order[k]];
        while k < order.len() && scores[order[k]] == threshold {
            if hallucinated[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        fpr.push(F::from_count(fp) / F::from_count(neg));
        tpr.push(F::from_count(tp) / F::from_count(pos));
    }
    Some(RocCurve { fpr, tpr })
}

/// The grid `0, 0.01, ..., 1`.
pub fn fpr_grid<F: Real>() -> Vec<F> {
    (0..=100).map(|i| F::from_count(i) / F::lit(100.0)).collect()
}

impl<F: Real> RocCurve<F> {
    /// TPR at `x`: the largest TPR among vertices at exactly `x`, otherwise
    /// linear interpolation from the top vertex left of `x` to the bottom
    /// vertex right of it.
    pub fn tpr_at(&self, x: F) -> F {
        let exact = self.fpr.iter().zip(&self.tpr).filter(|(&f, _)| f == x).map(|(_, &t)| t);
        if let Some(t) = exact.reduce(F::max) {
            return t;
        }
        let right = self.fpr.iter().position(|&f| f > x).expect("curve ends at fpr 1");
        let (x1, y1) = (self.fpr[right], self.tpr[right]);
        let left = right - 1;
        let (x0, y0) = (self.fpr[left], self.tpr[left]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    pub fn on_grid(&self, grid: &[F]) -> Vec<F> {
        grid.iter().map(|&x| self.tpr_at(x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyRoc<F> {
    pub family: Family,
    /// Estimators (or panels, after [`mean_over_panels`]) averaged.
    pub members: Vec<String>,
    pub fpr: Vec<F>,
    pub mean_tpr: Vec<F>,
    /// Population standard deviation across members.
    pub std_tpr: Vec<F>,
}

fn mean_std<F: Real>(curves: &[Vec<F>], points: usize) -> (Vec<F>, Vec<F>) {
    let m = F::from_count(curves.len());
    let mean: Vec<F> = (0..points).map(|g| curves.iter().map(|c| c[g]).sum::<F>() / m).collect();
    let std = (0..points)
        .map(|g| (curves.iter().map(|c| (c[g] - mean[g]) * (c[g] - mean[g])).sum::<F>() / m).sqrt())
        .collect();
    (mean, std)
}

/// Mean and spread of the gridded ROC curves of each family's estimators.
/// Estimators without a defined ROC are left out and empty families omitted.
pub fn family_roc_aggregate<F: Real>(table: &ScoreTable<F>) -> Vec<FamilyRoc<F>> {
    let grid = fpr_grid::<F>();
    let labels: Vec<bool> = table.quality.iter().map(|&q| crate::binarize_quality(q)).collect();
    let mut out = Vec::new();
    for family in Family::ALL {
        let mut members = Vec::new();
        let mut curves = Vec::new();
        for (col, row) in table.estimators.iter().zip(&table.values) {
            if col.family != family {
                continue;
            }
            let (s, l): (Vec<F>, Vec<bool>) = row.iter().zip(&labels).filter_map(|(v, &h)| Some(((*v)?, h))).unzip();
            if let Some(curve) = roc_curve(&s, &l) {
                members.push(col.id.clone());
                curves.push(curve.on_grid(&grid));
            }
        }
        if curves.is_empty() {
            continue;
        }
        let (mean_tpr, std_tpr) = mean_std(&curves, grid.len());
        out.push(FamilyRoc { family, members, fpr: grid.clone(), mean_tpr, std_tpr });
    }
    out
}

/// Second-level aggregation: per family, the mean (and spread) of the
/// panel-level mean curves over the panels where the family is present.
pub fn mean_over_panels<F: Real>(panels: &[(String, Vec<FamilyRoc<F>>)]) -> Vec<FamilyRoc<F>> {
    let grid = fpr_grid::<F>();
    let mut out = Vec::new();
    for family in Family::ALL {
        let (members, curves): (Vec<String>, Vec<Vec<F>>) = panels
            .iter()
            .filter_map(|(name, fams)| {
                fams.iter().find(|f| f.family == family).map(|f| (name.clone(), f.mean_tpr.clone()))
            })
            .unzip();
        if curves.is_empty() {
            continue;
        }
        let (mean_tpr, std_tpr) = mean_std(&curves, grid.len());
        out.push(FamilyRoc { family, members, fpr: grid.clone(), mean_tpr, std_tpr });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::EstimatorColumn;

    #[test]
    fn curve_vertices_group_ties() {
        let c = roc_curve(&[0.9, 0.5, 0.5, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(c.fpr, vec![0.0, 0.0, 0.5, 1.0]);
        assert_eq!(c.tpr, vec![0.0, 0.5, 1.0, 1.0]);
        assert_eq!(c.tpr_at(0.0), 0.5);
        assert_eq!(c.tpr_at(0.25), 0.75);
        assert!(roc_curve(&[1.0, 2.0], &[true, true]).is_none());
    }

    fn table(rows: Vec<(&str, Family, Vec<f64>)>, quality: Vec<f64>) -> ScoreTable<f64> {
        let n = quality.len();
        ScoreTable {
            instances: (0..n).map(|i| i.to_string()).collect(),
            estimators: rows.iter().map(|(id, f, _)| EstimatorColumn { id: id.to_string(), family: *f }).collect(),
            values: rows.into_iter().map(|(_, _, v)| v.into_iter().map(Some).collect()).collect(),
            quality,
            groups: (0..n).map(|i| i.to_string()).collect(),
        }
    }

    #[test]
    fn perfect_plus_random_family() {
        let q = vec![0.0, 0.0, 1.0, 1.0];
        let t = table(
            vec![("perfect", Family::Sample, vec![4.0, 3.0, 2.0, 1.0]), ("random", Family::Sample, vec![1.0; 4])],
            q,
        );
        let fams = family_roc_aggregate(&t);
        assert_eq!(fams.len(), 1);
        assert_eq!(fams[0].fpr.len(), 101);
        assert_eq!(fams[0].mean_tpr[50], 0.75);
        assert_eq!(fams[0].std_tpr[50], 0.25);
        assert_eq!(fams[0].mean_tpr[0], 0.5);
    }

    #[test]
    fn single_and_identical_members_have_zero_spread() {
        let q = vec![0.0, 1.0, 0.0, 1.0, 1.0];
        let s = vec![0.3, 0.1, 0.2, 0.25, 0.05];
        let single = family_roc_aggregate(&table(vec![("a", Family::Blackbox, s.clone())], q.clone()));
        let own = roc_curve(&s, &[true, false, true, false, false]).unwrap().on_grid(&fpr_grid());
        assert_eq!(single[0].mean_tpr, own);
        assert!(single[0].std_tpr.iter().all(|&x| x == 0.0));
        let twins =
            family_roc_aggregate(&table(vec![("a", Family::Blackbox, s.clone()), ("b", Family::Blackbox, s)], q));
        assert_eq!(twins[0].mean_tpr, own);
        assert!(twins[0].std_tpr.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn panel_mean_averages_family_curves() {
        let grid = fpr_grid::<f64>();
        let fam = |v: f64| FamilyRoc {
            family: Family::Internal,
            members: vec![],
            fpr: grid.clone(),
            mean_tpr: vec![v; 101],
            std_tpr: vec![0.0; 101],
        };
        let out =
            mean_over_panels(&[("p1".into(), vec![fam(0.2)]), ("p2".into(), vec![fam(0.6)]), ("p3".into(), vec![])]);
        assert_eq!(out[0].members, vec!["p1", "p2"]);
        assert!((out[0].mean_tpr[3] - 0.4).abs() < 1e-15);
        assert!((out[0].std_tpr[3] - 0.2).abs() < 1e-15);
    }
}
