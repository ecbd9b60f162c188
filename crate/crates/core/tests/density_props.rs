use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use uqtrace_core::estimators::density::{
    fit_gaussian, huq, rde_fit, rde_score, DensityConfig, EcdfTable, KernelKind, Ridge,
};

fn refs(rows: &[Vec<f64>]) -> Vec<&[f64]> {
    rows.iter().map(Vec::as_slice).collect()
}

/// Rows with `n > d + 2` plus a query point; the generator keeps the sample
/// covariance comfortably non-singular.
fn cloud() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..=4).prop_flat_map(|d| {
        (
            prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), d + 4..d + 16),
            prop::collection::vec(-4.0f64..4.0, d),
        )
    })
}

fn oracle_md(rows: &[Vec<f64>], x: &[f64]) -> f64 {
    let n = rows.len();
    let d = x.len();
    let data = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    let mean = data.row_mean().transpose();
    let centered = DMatrix::from_fn(n, d, |i, j| data[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let diff = DVector::from_column_slice(x) - mean;
    let inv = cov.try_inverse().expect("invertible");
    (diff.transpose() * inv * diff)[(0, 0)].sqrt()
}

fn well_conditioned(c: f64) -> bool {
    c.is_finite() && c < 1e6
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mahalanobis_matches_matrix_inverse((rows, x) in cloud()) {
        let m = fit_gaussian(&refs(&rows), Ridge::None).unwrap();
        let cond = {
            let e = nalgebra::SymmetricEigen::new(DMatrix::from_fn(x.len(), x.len(), |i, j| m.covariance()[(i, j)]));
            e.eigenvalues.max() / e.eigenvalues.min()
        };
        prop_assume!(well_conditioned(cond));
        let ours = m.distance(&x).unwrap();
        let oracle = oracle_md(&rows, &x);
        prop_assert!((ours - oracle).abs() <= 1e-8 * oracle.max(1.0), "{ours} vs {oracle}");
    }

    #[test]
    fn mahalanobis_is_affine_invariant(
        (rows, x) in cloud(),
        mix in prop::collection::vec(-0.4f64..0.4, 16),
        scale in prop::collection::vec(0.5f64..3.0, 4),
        shift in prop::collection::vec(-10.0f64..10.0, 4),
    ) {
        let d = x.len();
        // A = diag(scale) + off-diagonal mixing, strictly diagonally dominant when d <= 4.
        let a = |i: usize, j: usize| if i == j { scale[i] + 1.5 } else { mix[i * 4 + j] };
        let map = |v: &[f64]| -> Vec<f64> { (0..d).map(|i| (0..d).map(|j| a(i, j) * v[j]).sum::<f64>() + shift[i]).collect() };
        let mapped: Vec<Vec<f64>> = rows.iter().map(|r| map(r)).collect();
        let before = fit_gaussian(&refs(&rows), Ridge::None).unwrap().distance(&x).unwrap();
        let after = fit_gaussian(&refs(&mapped), Ridge::None).unwrap().distance(&map(&x)).unwrap();
        prop_assert!((before - after).abs() <= 1e-8 * before.max(1.0), "{before} vs {after}");
    }

    #[test]
    fn linear_rde_with_full_support_is_mahalanobis((rows, x) in cloud()) {
        let d = x.len();
        let cfg = DensityConfig {
            ridge: Ridge::None,
            kernel: KernelKind::Linear,
            components: Some(d),
            support_fraction: Some(1.0),
            ..DensityConfig::default()
        };
        let md = fit_gaussian(&refs(&rows), Ridge::None).unwrap();
        let cond = {
            let e = nalgebra::SymmetricEigen::new(DMatrix::from_fn(d, d, |i, j| md.covariance()[(i, j)]));
            e.eigenvalues.max() / e.eigenvalues.min()
        };
        prop_assume!(well_conditioned(cond));
        let rde = rde_fit(&refs(&rows), &cfg).unwrap();
        let (a, b) = (rde_score(&x, &rde).unwrap(), md.distance(&x).unwrap());
        prop_assert!((a - b).abs() <= 1e-8 * b.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn huq_is_the_mean_of_exact_ecdf_ranks(
        ppl in prop::collection::vec(0.0f64..5.0, 10),
        dens in prop::collection::vec(0.0f64..5.0, 10),
        u in -1.0f64..6.0,
        v in -1.0f64..6.0,
    ) {
        let pt = EcdfTable::new(ppl.clone()).unwrap();
        let dt = EcdfTable::new(dens.clone()).unwrap();
        let count = |xs: &[f64], at: f64| xs.iter().filter(|&&x| x <= at).count() as f64 / 10.0;
        prop_assert_eq!(pt.cdf(u), count(&ppl, u));
        let h = huq(u, v, &pt, &dt);
        prop_assert!((0.0..=1.0).contains(&h));
        let ranks = |xs: &[f64], at: f64| xs.iter().filter(|&&x| x <= at).count() as f64;
        prop_assert_eq!(h, (ranks(&ppl, u) + ranks(&dens, v)) / 20.0);
    }
}

#[test]
fn ecdf_counts_ties_at_the_query() {
    let t = EcdfTable::new(vec![1.0, 2.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]).unwrap();
    assert_eq!(t.cdf(2.0), 0.3);
    assert_eq!(t.cdf(0.5), 0.0);
    assert_eq!(t.cdf(9.0), 1.0);
}
