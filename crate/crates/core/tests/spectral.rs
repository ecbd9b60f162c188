//! Graph-spectral estimators against counting oracles.

use proptest::prelude::*;
use uqtrace_core::estimators::blackbox::{
    degmat, eccentricity, eig_val_laplacian, kle, label_prob, num_set, EigenSelection, GraphMode, RelationGraph,
};
use uqtrace_core::estimators::sample::cluster_semantic;
use uqtrace_core::Matrix;

/// Block labels for `s` nodes, at most `s` distinct classes.
fn partition() -> impl Strategy<Value = Vec<usize>> {
    (1usize..=8).prop_flat_map(|s| prop::collection::vec(0..s, s))
}

fn block_graph(labels: &[usize]) -> RelationGraph<f64> {
    let s = labels.len();
    let w = Matrix::from_fn(s, s, |i, j| if labels[i] == labels[j] { 1.0 } else { 0.0 });
    RelationGraph::from_raw(&w, GraphMode::NliEntail).unwrap()
}

fn distinct(labels: &[usize]) -> usize {
    let mut l = labels.to_vec();
    l.sort_unstable();
    l.dedup();
    l.len()
}

fn permute(w: &Matrix, perm: &[usize]) -> Matrix {
    Matrix::from_fn(w.rows(), w.cols(), |i, j| w[(perm[i], perm[j])])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn eig_val_laplacian_counts_components(labels in partition()) {
        let v = eig_val_laplacian(&block_graph(&labels)).unwrap();
        prop_assert!((v - distinct(&labels) as f64).abs() <= 1e-9, "{v} vs {}", distinct(&labels));
    }

    #[test]
    fn partition_scores_match_counting(labels in partition()) {
        let s = labels.len();
        let bidir: Vec<Vec<bool>> = (0..s).map(|i| (0..s).map(|j| labels[i] == labels[j]).collect()).collect();
        let part = cluster_semantic(&bidir).unwrap();
        prop_assert_eq!(num_set::<f64>(&part), distinct(&labels) as f64);

        let largest = (0..s).map(|c| labels.iter().filter(|&&l| l == c).count()).max().unwrap();
        prop_assert_eq!(label_prob::<f64>(&part).unwrap(), 1.0 - largest as f64 / s as f64);

        let ones: usize = labels.iter().map(|&a| labels.iter().filter(|&&b| b == a).count()).sum();
        let s2 = (s * s) as f64;
        prop_assert_eq!(degmat(&block_graph(&labels)).unwrap(), (s2 - ones as f64) / s2);
    }

    #[test]
    fn spectral_scores_are_permutation_invariant(
        raw in (2usize..=8).prop_flat_map(|s| prop::collection::vec(0.0f64..1.0, s * s)),
        seed in any::<u64>(),
    ) {
        let s = (raw.len() as f64).sqrt() as usize;
        let w = Matrix::from_fn(s, s, |i, j| raw[i * s + j]);
        let mut perm: Vec<usize> = (0..s).collect();
        let mut x = seed;
        for i in (1..s).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (x >> 33) as usize % (i + 1));
        }
        let a = RelationGraph::from_raw(&w, GraphMode::NliEntail).unwrap();
        let b = RelationGraph::from_raw(&permute(&w, &perm), GraphMode::NliEntail).unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-9;
        prop_assert!(close(eig_val_laplacian(&a).unwrap(), eig_val_laplacian(&b).unwrap()));
        prop_assert!(close(kle(&a, 0.3).unwrap(), kle(&b, 0.3).unwrap()));
        prop_assert!(close(degmat(&a).unwrap(), degmat(&b).unwrap()));
        let sel = EigenSelection::Threshold(0.9);
        prop_assert!(close(eccentricity(&a, sel).unwrap(), eccentricity(&b, sel).unwrap()));
    }
}

#[test]
fn kle_on_three_identical_samples() {
    // Laplacian 3I - J has spectrum (0, 3, 3); with t = 0.3 the normalized
    // heat kernel has weights 1 and e^-0.9 twice.
    let g = block_graph(&[0, 0, 0]);
    let h = kle(&g, 0.3).unwrap();
    let e = (-0.9f64).exp();
    let z = 1.0 + 2.0 * e;
    let oracle = -(1.0 / z) * (1.0 / z).ln() - 2.0 * (e / z) * (e / z).ln();
    assert!((h - oracle).abs() < 1e-12);
    assert!((h - 0.9986).abs() < 1e-3, "{h}");
}
