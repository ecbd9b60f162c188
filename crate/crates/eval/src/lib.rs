//! Evaluation of uncertainty scores against quality labels.
//!
//! A [`ScoreTable`] holds uncertainty-oriented scores for one panel (one
//! dataset and model). [`evaluate`] computes AUROC, PRR and RCE with
//! bootstrap spread, a Spearman redundancy matrix with its average-linkage
//! dendrogram, and family-level ROC curves; [`cross_panel`] compares
//! estimators across panels.

pub mod bootstrap;
pub mod cluster;
pub mod correlation;
pub mod metrics;
pub mod rank;
pub mod report;
pub mod roc;
pub mod table;

pub use bootstrap::{bootstrap, BootstrapConfig, BootstrapSummary, Units};
pub use cluster::{hcluster, Dendrogram, Merge};
pub use correlation::{kendall_profiles, kendall_tau_b, spearman, spearman_matrix, CorrelationMatrix};
pub use metrics::{auroc, average_ranks, binarize_quality, prr, rce, MetricError};
pub use rank::{rank_variability, RankVariability};
pub use report::{cross_panel, evaluate, write_metrics_csv, CrossPanel, EvalConfig, MetricReport, MetricRow};
pub use roc::{family_roc_aggregate, fpr_grid, mean_over_panels, roc_curve, FamilyRoc, RocCurve};
pub use table::{snap, EstimatorColumn, ScoreTable, ScoringStats, TableError};
