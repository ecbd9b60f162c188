//! Panel evaluation and cross-panel summaries, with their file formats.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use uqtrace_core::{Family, Real};

use crate::bootstrap::{bootstrap, BootstrapConfig, BootstrapSummary, Units};
use crate::cluster::{hcluster, Dendrogram};
use crate::correlation::{kendall_profiles, spearman_matrix, CorrelationMatrix};
use crate::metrics::{auroc, binarize_quality, prr, rce};
use crate::rank::{rank_variability, RankVariability};
use crate::roc::{family_roc_aggregate, mean_over_panels, FamilyRoc};
use crate::table::{ScoreTable, TableError, MISSING};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalConfig {
    pub bins: usize,
    pub bootstrap: BootstrapConfig,
    /// Resample whole queries instead of single responses.
    pub group_by_query: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { bins: 20, bootstrap: BootstrapConfig::default(), group_by_query: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow<F> {
    pub estimator: String,
    pub family: Family,
    /// Instances with a defined score.
    pub scored: usize,
    pub auroc: BootstrapSummary<F>,
    pub prr: BootstrapSummary<F>,
    pub rce: BootstrapSummary<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport<F> {
    pub panel: String,
    pub rows: Vec<MetricRow<F>>,
    pub spearman: CorrelationMatrix<F>,
    pub clusters: Dendrogram<F>,
    pub family_roc: Vec<FamilyRoc<F>>,
}

/// Defined `(score, quality)` pairs of one estimator over `idx`.
fn pairs<F: Real>(row: &[Option<F>], quality: &[F], idx: &[usize]) -> (Vec<F>, Vec<F>) {
    idx.iter().filter_map(|&i| row[i].map(|s| (s, quality[i]))).unzip()
}

fn evaluate_row<F: Real>(table: &ScoreTable<F>, e: usize, units: &Units, cfg: &EvalConfig) -> MetricRow<F> {
    let row = &table.values[e];
    let q = &table.quality;
    let b = &cfg.bootstrap;
    let auroc = bootstrap(units, b, |idx| {
        let (s, q) = pairs(row, q, idx);
        let labels: Vec<bool> = q.iter().map(|&x| binarize_quality(x)).collect();
        auroc(&s, &labels)
    });
    let prr = bootstrap(units, b, |idx| {
        let (s, q) = pairs(row, q, idx);
        prr(&s, &q)
    });
    let rce = bootstrap(units, b, |idx| {
        let (s, q) = pairs(row, q, idx);
        rce(&s, &q, cfg.bins).ok()
    });
    MetricRow {
        estimator: table.estimators[e].id.clone(),
        family: table.estimators[e].family,
        scored: row.iter().filter(|v| v.is_some()).count(),
        auroc,
        prr,
        rce,
    }
}

/// Metrics with bootstrap spread, score redundancy and family ROC curves for
/// one panel. The table must carry quality labels.
pub fn evaluate<F: Real>(panel: &str, table: &ScoreTable<F>, cfg: &EvalConfig) -> MetricReport<F> {
    assert!(table.quality.len() == table.num_instances(), "score table has no quality labels");
    let units =
        if cfg.group_by_query { Units::grouped(&table.groups) } else { Units::Instances(table.num_instances()) };
    let rows: Vec<MetricRow<F>> =
        (0..table.estimators.len()).into_par_iter().map(|e| evaluate_row(table, e, &units, cfg)).collect();
    for r in &rows {
        if r.prr.point.is_none() && r.scored > 0 {
            log::warn!("{}: PRR undefined on panel {panel} (constant quality or too few instances)", r.estimator);
        }
    }
    let labels: Vec<String> = table.estimators.iter().map(|c| c.id.clone()).collect();
    let spearman = spearman_matrix(labels, &table.values);
    let clusters = hcluster(&spearman);
    MetricReport { panel: panel.to_string(), rows, spearman, clusters, family_roc: family_roc_aggregate(table) }
}

/// Summaries over several panels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossPanel<F> {
    pub panels: Vec<String>,
    pub estimators: Vec<String>,
    /// Kendall τ-b between estimators' per-panel AUROC profiles.
    pub kendall_auroc: CorrelationMatrix<F>,
    /// Kendall τ-b between estimators' per-panel PRR profiles.
    pub kendall_prr: CorrelationMatrix<F>,
    /// Within-panel AUROC rank stability.
    pub rank_variability: Vec<RankVariability<F>>,
    pub family_roc: Vec<FamilyRoc<F>>,
}

pub fn cross_panel<F: Real>(reports: &[MetricReport<F>]) -> CrossPanel<F> {
    let mut estimators: Vec<String> = Vec::new();
    for r in reports {
        for row in &r.rows {
            if !estimators.contains(&row.estimator) {
                estimators.push(row.estimator.clone());
            }
        }
    }
    let lookup = |r: &MetricReport<F>, id: &str, pick: fn(&MetricRow<F>) -> Option<F>| {
        r.rows.iter().find(|row| row.estimator == id).and_then(pick)
    };
    let profiles = |pick: fn(&MetricRow<F>) -> Option<F>| -> Vec<Vec<Option<F>>> {
        estimators.iter().map(|id| reports.iter().map(|r| lookup(r, id, pick)).collect()).collect()
    };
    let auroc_of: fn(&MetricRow<F>) -> Option<F> = |row| row.auroc.point;
    let prr_of: fn(&MetricRow<F>) -> Option<F> = |row| row.prr.point;
    let by_panel: Vec<Vec<Option<F>>> =
        reports.iter().map(|r| estimators.iter().map(|id| lookup(r, id, auroc_of)).collect()).collect();
    let panels: Vec<(String, Vec<FamilyRoc<F>>)> =
        reports.iter().map(|r| (r.panel.clone(), r.family_roc.clone())).collect();
    CrossPanel {
        panels: reports.iter().map(|r| r.panel.clone()).collect(),
        kendall_auroc: kendall_profiles(estimators.clone(), &profiles(auroc_of)),
        kendall_prr: kendall_profiles(estimators.clone(), &profiles(prr_of)),
        rank_variability: rank_variability(&estimators, &by_panel),
        family_roc: mean_over_panels(&panels),
        estimators,
    }
}

fn cell<F: Real>(v: Option<F>) -> String {
    v.map_or_else(|| MISSING.to_string(), |x| x.to_string())
}

pub const METRICS_HEADER: [&str; 13] = [
    "panel",
    "estimator",
    "family",
    "scored",
    "auroc",
    "auroc_std",
    "prr",
    "prr_std",
    "rce",
    "rce_std",
    "auroc_discarded",
    "prr_discarded",
    "rce_discarded",
];

/// One row per panel and estimator: point values, bootstrap std, and the
/// number of replicates on which each metric was undefined.
pub fn write_metrics_csv<F: Real, W: Write>(w: W, reports: &[MetricReport<F>]) -> Result<(), TableError> {
    let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    out.write_record(METRICS_HEADER)?;
    for r in reports {
        for row in &r.rows {
            out.write_record([
                r.panel.clone(),
                row.estimator.clone(),
                row.family.to_string(),
                row.scored.to_string(),
                cell(row.auroc.point),
                cell(row.auroc.std),
                cell(row.prr.point),
                cell(row.prr.std),
                cell(row.rce.point),
                cell(row.rce.std),
                row.auroc.discarded.to_string(),
                row.prr.discarded.to_string(),
                row.rce.discarded.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
