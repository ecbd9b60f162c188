//! Nonparametric bootstrap with per-replicate RNG streams.
//!
//! Replicate `r` draws from a ChaCha8 generator seeded with the master seed
//! on stream `r`, so the resample of every replicate is fixed regardless of
//! how replicates are scheduled across threads. Results are collected in
//! replicate order before any reduction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use uqtrace_core::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { replicates: 1000, seed: 42 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapSummary<F> {
    /// Metric on the full sample.
    pub point: Option<F>,
    /// Sample standard deviation (`n - 1` denominator) over defined replicates.
    pub std: Option<F>,
    /// Replicates on which the metric was defined.
    pub used: usize,
    /// Replicates discarded because the metric was undefined.
    pub discarded: usize,
}

/// Resampling units: single instances, or whole groups (e.g. every response
/// to one query) drawn together.
#[derive(Debug, Clone, PartialEq)]
pub enum Units {
    Instances(usize),
    Groups(Vec<Vec<usize>>),
}

impl Units {
    /// Groups instances sharing a key, in order of first appearance.
    pub fn grouped<K: PartialEq>(keys: &[K]) -> Self {
        let mut seen: Vec<&K> = Vec::new();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, k) in keys.iter().enumerate() {
            match seen.iter().position(|s| *s == k) {
                Some(g) => groups[g].push(i),
                None => {
                    seen.push(k);
                    groups.push(vec![i]);
                }
            }
        }
        Units::Groups(groups)
    }

    fn count(&self) -> usize {
        match self {
            Units::Instances(n) => *n,
            Units::Groups(g) => g.len(),
        }
    }

    fn all(&self) -> Vec<usize> {
        match self {
            Units::Instances(n) => (0..*n).collect(),
            Units::Groups(g) => g.iter().flatten().copied().collect(),
        }
    }

    /// The resample of replicate `r`.
    pub fn resample(&self, seed: u64, r: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let m = self.count();
        match self {
            Units::Instances(n) => (0..*n).map(|_| rng.random_range(0..m)).collect(),
            Units::Groups(g) => (0..m).flat_map(|_| g[rng.random_range(0..m)].iter().copied()).collect(),
        }
    }
}

fn sample_std<F: Real>(xs: &[F]) -> Option<F> {
    if xs.len() < 2 {
        return None;
    }
    let n = F::from_count(xs.len());
    let mean = xs.iter().copied().sum::<F>() / n;
    let ss: F = xs.iter().map(|&x| (x - mean) * (x - mean)).sum();
    Some((ss / (n - F::one())).sqrt())
}

/// Point value and bootstrap spread of `metric`, which receives the
/// instance indices of a (re)sample and returns `None` when undefined.
pub fn bootstrap<F, M>(units: &Units, cfg: &BootstrapConfig, metric: M) -> BootstrapSummary<F>
where
    F: Real,
    M: Fn(&[usize]) -> Option<F> + Sync,
{
    let point = if units.count() == 0 { None } else { metric(&units.all()) };
    if units.count() == 0 {
        return BootstrapSummary { point, std: None, used: 0, discarded: cfg.replicates };
    }
    let values: Vec<Option<F>> =
        (0..cfg.replicates).into_par_iter().map(|r| metric(&units.resample(cfg.seed, r))).collect();
    let defined: Vec<F> = values.iter().flatten().copied().collect();
    BootstrapSummary { point, std: sample_std(&defined), used: defined.len(), discarded: values.len() - defined.len() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_metric_has_zero_spread() {
        let s = bootstrap(&Units::Instances(10), &BootstrapConfig::default(), |_| Some(0.25f64));
        assert_eq!(s, BootstrapSummary { point: Some(0.25), std: Some(0.0), used: 1000, discarded: 0 });
    }

    #[test]
    fn same_seed_same_output() {
        let data: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64).collect();
        let mean = |idx: &[usize]| Some(idx.iter().map(|&i| data[i]).sum::<f64>() / idx.len() as f64);
        let cfg = BootstrapConfig { replicates: 200, seed: 9 };
        let a = bootstrap(&Units::Instances(30), &cfg, mean);
        let b = bootstrap(&Units::Instances(30), &cfg, mean);
        assert_eq!(a, b);
        let c = bootstrap(&Units::Instances(30), &BootstrapConfig { seed: 10, ..cfg }, mean);
        assert_ne!(a.std, c.std);
    }

    #[test]
    fn undefined_replicates_are_counted() {
        // Defined only when index 0 is drawn.
        let s = bootstrap(&Units::Instances(5), &BootstrapConfig { replicates: 300, seed: 1 }, |idx: &[usize]| {
            idx.contains(&0).then_some(1.0f64)
        });
        assert_eq!(s.used + s.discarded, 300);
        assert!(s.discarded > 0 && s.used > 0);
    }

    #[test]
    fn groups_resample_whole_queries() {
        let units = Units::grouped(&["a", "a", "b", "c", "c", "c"]);
        assert_eq!(units, Units::Groups(vec![vec![0, 1], vec![2], vec![3, 4, 5]]));
        for r in 0..50 {
            let s = units.resample(3, r);
            assert!(s.windows(2).all(|w| !(w[0] == 0 && w[1] != 1)));
            assert_eq!(s.iter().filter(|&&i| i == 3).count(), s.iter().filter(|&&i| i == 5).count());
        }
    }

    #[test]
    fn replicate_streams_are_independent_of_order() {
        let u = Units::Instances(8);
        let forward: Vec<_> = (0..5).map(|r| u.resample(4, r)).collect();
        let backward: Vec<_> = (0..5).rev().map(|r| u.resample(4, r)).collect();
        assert_eq!(forward, backward.into_iter().rev().collect::<Vec<_>>());
    }
}
