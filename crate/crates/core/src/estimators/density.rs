//! Training-based density estimators: Mahalanobis distance against the task
//! training split, its background-relative form, a robust kernel-PCA variant
//! and ECDF rank fusion with perplexity.
//!
//! Models are fitted once from train-split traces (and an optional
//! background corpus) and are immutable afterwards; scoring is a pure
//! function of one embedding.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::logit::nll_scores;
use crate::linalg::{mean_vector, sample_covariance, symmetric_eigen, Cholesky, LinalgError, Matrix};
use crate::trace::GenerationTrace;
use crate::Real;

#[derive(Debug, Error)]
pub enum DensityError {
    #[error("need at least {needed} training vectors, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite value in input")]
    NonFinite,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("model file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Diagonal regularization added to fitted covariances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum Ridge {
    /// `r * trace / d`; falls back to an absolute `r` when the trace is zero.
    Relative(f64),
    Absolute(f64),
    None,
}

impl Ridge {
    pub fn amount<F: Real>(&self, cov: &Matrix<F>) -> F {
        match *self {
            Ridge::None => F::zero(),
            Ridge::Absolute(r) => F::lit(r),
            Ridge::Relative(r) => {
                let d = cov.rows().max(1);
                let scale = cov.trace() / F::from_count(d);
                if scale > F::zero() {
                    F::lit(r) * scale
                } else {
                    F::lit(r)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// Gaussian kernel with the median pairwise distance as bandwidth.
    Rbf,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityConfig {
    pub ridge: Ridge,
    pub kernel: KernelKind,
    /// Projected dimension; defaults to `min(100, n - 1)`.
    pub components: Option<usize>,
    /// MCD support as a fraction of `n`; defaults to `⌈(n + d' + 1)/2⌉` points.
    pub support_fraction: Option<f64>,
    pub restarts: usize,
    pub seed: u64,
    /// Largest `n` for which MCD enumerates every support subset.
    pub exact_max_n: usize,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self {
            ridge: Ridge::Relative(1e-6),
            kernel: KernelKind::Rbf,
            components: None,
            support_fraction: None,
            restarts: 50,
            seed: 0,
            exact_max_n: 12,
        }
    }
}

fn check_rows<F: Real>(rows: &[&[F]], needed: usize) -> Result<usize, DensityError> {
    if rows.len() < needed {
        return Err(DensityError::TooFew { needed, got: rows.len() });
    }
    let d = rows[0].len();
    for r in rows {
        if r.len() != d {
            return Err(DensityError::Dimension { expected: d, got: r.len() });
        }
        if r.iter().any(|x| !x.is_finite()) {
            return Err(DensityError::NonFinite);
        }
    }
    Ok(d)
}

/// Serializable parameters of a [`GaussianModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParts<F> {
    pub mean: Vec<F>,
    /// Covariance before the ridge is added.
    pub covariance: Vec<Vec<F>>,
    pub ridge: F,
}

/// Mean and covariance with a cached Cholesky factor of `covariance + ridge I`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel<F> {
    mean: Vec<F>,
    covariance: Matrix<F>,
    ridge: F,
    factor: Cholesky<F>,
}

impl<F: Real> GaussianModel<F> {
    pub fn new(mean: Vec<F>, covariance: Matrix<F>, ridge: F) -> Result<Self, DensityError> {
        if covariance.rows() != mean.len() || !covariance.is_square() {
            return Err(DensityError::Dimension { expected: mean.len(), got: covariance.rows() });
        }
        let mut reg = covariance.symmetrized();
        reg.add_diagonal(ridge);
        let factor = Cholesky::new(&reg)?;
        Ok(Self { mean, covariance, ridge, factor })
    }

    pub fn from_parts(parts: GaussianParts<F>) -> Result<Self, DensityError> {
        let cov = Matrix::from_rows(&parts.covariance)?;
        Self::new(parts.mean, cov, parts.ridge)
    }

    pub fn to_parts(&self) -> GaussianParts<F> {
        GaussianParts { mean: self.mean.clone(), covariance: self.covariance.to_rows(), ridge: self.ridge }
    }

    pub fn mean(&self) -> &[F] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix<F> {
        &self.covariance
    }

    pub fn ridge(&self) -> F {
        self.ridge
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn regularized_covariance(&self) -> Matrix<F> {
        let mut c = self.covariance.clone();
        c.add_diagonal(self.ridge);
        c
    }

    /// Mahalanobis distance of `x` from the mean.
    pub fn distance(&self, x: &[F]) -> Result<F, DensityError> {
        if x.len() != self.dim() {
            return Err(DensityError::Dimension { expected: self.dim(), got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(DensityError::NonFinite);
        }
        let diff: Vec<F> = x.iter().zip(&self.mean).map(|(&a, &b)| a - b).collect();
        Ok(self.factor.inverse_quadratic_form(&diff)?.max(F::zero()).sqrt())
    }
}

/// Sample mean and `n - 1` covariance with the configured ridge.
pub fn fit_gaussian<F: Real>(rows: &[&[F]], ridge: Ridge) -> Result<GaussianModel<F>, DensityError> {
    check_rows(rows, 2)?;
    let mean = mean_vector(rows);
    let cov = sample_covariance(rows, &mean);
    let r = ridge.amount(&cov);
    GaussianModel::new(mean, cov, r)
}

pub fn mahalanobis<F: Real>(x: &[F], model: &GaussianModel<F>) -> Result<F, DensityError> {
    model.distance(x)
}

pub fn relative_md<F: Real>(
    x: &[F],
    task: &GaussianModel<F>,
    background: &GaussianModel<F>,
) -> Result<F, DensityError> {
    Ok(task.distance(x)? - background.distance(x)?)
}

fn squared_distance<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Kernel PCA fitted on training vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kpca<F> {
    pub kernel: KernelKind,
    /// `1 / (2 sigma^2)` for the RBF kernel, unused for the linear kernel.
    pub gamma: F,
    pub landmarks: Vec<Vec<F>>,
    /// `alphas[k][i]`: coefficient of landmark `i` in component `k`.
    pub alphas: Vec<Vec<F>>,
    pub column_means: Vec<F>,
    pub grand_mean: F,
}

impl<F: Real> Kpca<F> {
    fn kernel(&self, a: &[F], b: &[F]) -> F {
        match self.kernel {
            KernelKind::Linear => crate::linalg::dot(a, b),
            KernelKind::Rbf => (-self.gamma * squared_distance(a, b)).exp(),
        }
    }

    pub fn components(&self) -> usize {
        self.alphas.len()
    }

    /// Fits on `rows` and returns the model with the projected training set.
    pub fn fit(
        rows: &[&[F]],
        kernel: KernelKind,
        components: Option<usize>,
    ) -> Result<(Self, Vec<Vec<F>>), DensityError> {
        check_rows(rows, 2)?;
        let n = rows.len();
        let gamma = match kernel {
            KernelKind::Linear => F::zero(),
            KernelKind::Rbf => {
                let mut d: Vec<F> = (0..n)
                    .flat_map(|i| (0..i).map(move |j| (i, j)))
                    .map(|(i, j)| squared_distance(rows[i], rows[j]).sqrt())
                    .collect();
                d.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
                let m = d.len();
                let median = if m % 2 == 1 { d[m / 2] } else { (d[m / 2 - 1] + d[m / 2]) / F::two() };
                let sigma = if median > F::zero() { median } else { F::one() };
                F::one() / (F::two() * sigma * sigma)
            }
        };
        let mut model = Self {
            kernel,
            gamma,
            landmarks: rows.iter().map(|r| r.to_vec()).collect(),
            alphas: Vec::new(),
            column_means: Vec::new(),
            grand_mean: F::zero(),
        };
        let k = Matrix::from_fn(n, n, |i, j| model.kernel(rows[i], rows[j]));
        let nf = F::from_count(n);
        let col: Vec<F> = (0..n).map(|j| (0..n).map(|i| k[(i, j)]).sum::<F>() / nf).collect();
        let grand = col.iter().copied().sum::<F>() / nf;
        let centered = Matrix::from_fn(n, n, |i, j| k[(i, j)] - col[i] - col[j] + grand);
        let eig = symmetric_eigen(&centered)?;
        let top = eig.values.iter().copied().fold(F::zero(), F::max);
        let cutoff = top * F::lit(1e-10);
        let wanted = components.unwrap_or(100).min(n - 1);
        let mut alphas = Vec::new();
        let mut train = vec![Vec::new(); n];
        for idx in (0..n).rev() {
            if alphas.len() == wanted {
                break;
            }
            let lambda = eig.values[idx];
            if lambda <= cutoff || lambda <= F::zero() {
                break;
            }
            let mut v = eig.vector(idx);
            canonical_sign(&mut v);
            let s = lambda.sqrt();
            for (i, row) in train.iter_mut().enumerate() {
                row.push(v[i] * s);
            }
            alphas.push(v.into_iter().map(|x| x / s).collect());
        }
        if alphas.is_empty() {
            return Err(DensityError::Linalg(LinalgError::Dimension("kernel matrix has no positive spectrum".into())));
        }
        model.alphas = alphas;
        model.column_means = col;
        model.grand_mean = grand;
        Ok((model, train))
    }

    pub fn project(&self, x: &[F]) -> Result<Vec<F>, DensityError> {
        let d = self.landmarks.first().map_or(0, Vec::len);
        if x.len() != d {
            return Err(DensityError::Dimension { expected: d, got: x.len() });
        }
        let n = self.landmarks.len();
        let kx: Vec<F> = self.landmarks.iter().map(|l| self.kernel(x, l)).collect();
        let row_mean = kx.iter().copied().sum::<F>() / F::from_count(n);
        let centered: Vec<F> = (0..n).map(|i| kx[i] - row_mean - self.column_means[i] + self.grand_mean).collect();
        Ok(self.alphas.iter().map(|a| crate::linalg::dot(a, &centered)).collect())
    }
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
pub(crate) fn canonical_sign<F: Real>(v: &mut [F]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < F::zero()) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Minimum covariance determinant estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct McdFit<F> {
    pub mean: Vec<F>,
    pub covariance: Matrix<F>,
    /// Sorted indices of the support subset.
    pub support: Vec<usize>,
    /// Whether the full-sample fallback was used.
    pub fallback: bool,
}

struct Candidate<F> {
    support: Vec<usize>,
    mean: Vec<F>,
    cov: Matrix<F>,
    log_det: F,
}

fn subset_fit<F: Real>(points: &[&[F]], support: Vec<usize>) -> Option<Candidate<F>> {
    let rows: Vec<&[F]> = support.iter().map(|&i| points[i]).collect();
    let mean = mean_vector(&rows);
    let cov = sample_covariance(&rows, &mean);
    let chol = Cholesky::new(&cov).ok()?;
    Some(Candidate { support, mean, cov, log_det: chol.log_determinant() })
}

/// Indices of the `h` points closest to the candidate, ties by index.
fn concentration<F: Real>(points: &[&[F]], c: &Candidate<F>, h: usize) -> Option<Vec<usize>> {
    let chol = Cholesky::new(&c.cov).ok()?;
    let mut d: Vec<(F, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let diff: Vec<F> = p.iter().zip(&c.mean).map(|(&a, &b)| a - b).collect();
            (chol.inverse_quadratic_form(&diff).unwrap_or(F::infinity()), i)
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let mut s: Vec<usize> = d[..h].iter().map(|&(_, i)| i).collect();
    s.sort_unstable();
    Some(s)
}

fn c_steps<F: Real>(points: &[&[F]], mut c: Candidate<F>, h: usize, max_steps: usize) -> Candidate<F> {
    for _ in 0..max_steps {
        let Some(support) = concentration(points, &c, h) else {
            break;
        };
        if support == c.support {
            break;
        }
        match subset_fit(points, support) {
            // A start subset smaller than h is always replaced by its first concentration.
            Some(next) if c.support.len() != h || next.log_det < c.log_det => c = next,
            _ => break,
        }
    }
    c
}

fn better<F: Real>(a: &Candidate<F>, b: &Candidate<F>) -> bool {
    a.log_det < b.log_det || (a.log_det == b.log_det && a.support < b.support)
}

fn for_each_combination(n: usize, h: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..h).collect();
    loop {
        f(&idx);
        let mut i = h;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - h {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..h {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// MCD over `points` with support size `h`. Exhaustive for
/// `n <= cfg.exact_max_n`, FAST-MCD otherwise.
pub fn mcd<F: Real>(points: &[&[F]], h: usize, cfg: &DensityConfig) -> Result<McdFit<F>, DensityError> {
    let p = check_rows(points, 2)?;
    let n = points.len();
    let h = h.clamp((p + 1).min(n), n);
    let mut best: Option<Candidate<F>> = None;
    let consider = |c: Candidate<F>, best: &mut Option<Candidate<F>>| {
        if best.as_ref().is_none_or(|b| better(&c, b)) {
            *best = Some(c);
        }
    };
    if n <= cfg.exact_max_n {
        for_each_combination(n, h, |s| {
            if let Some(c) = subset_fit(points, s.to_vec()) {
                consider(c, &mut best);
            }
        });
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut starts = Vec::new();
        for _ in 0..cfg.restarts.max(1) {
            let mut perm = index::sample(&mut rng, n, n).into_vec();
            let mut size = (p + 1).min(n);
            let start = loop {
                let mut s = perm[..size].to_vec();
                s.sort_unstable();
                if let Some(c) = subset_fit(points, s) {
                    break Some(c);
                }
                if size >= n {
                    break None;
                }
                size += 1;
            };
            perm.clear();
            if let Some(c) = start {
                let c = c_steps(points, c, h, 2);
                if c.support.len() == h {
                    starts.push(c);
                }
            }
        }
        starts.sort_by(|a, b| {
            a.log_det.partial_cmp(&b.log_det).unwrap_or(std::cmp::Ordering::Equal).then(a.support.cmp(&b.support))
        });
        for c in starts.into_iter().take(10) {
            consider(c_steps(points, c, h, 100), &mut best);
        }
    }
    match best {
        Some(c) => Ok(McdFit { mean: c.mean, covariance: c.cov, support: c.support, fallback: false }),
        None => {
            log::warn!("MCD found no non-singular support of size {h}; using the full-sample covariance");
            let mean = mean_vector(points);
            let covariance = sample_covariance(points, &mean);
            Ok(McdFit { mean, covariance, support: (0..n).collect(), fallback: true })
        }
    }
}

/// Kernel-PCA projection followed by an MCD Gaussian in the projected space.
#[derive(Debug, Clone, PartialEq)]
pub struct RdeModel<F> {
    pub kpca: Kpca<F>,
    pub gaussian: GaussianModel<F>,
    pub support: Vec<usize>,
}

pub fn rde_fit<F: Real>(rows: &[&[F]], cfg: &DensityConfig) -> Result<RdeModel<F>, DensityError> {
    let (kpca, projected) = Kpca::fit(rows, cfg.kernel, cfg.components)?;
    let n = rows.len();
    let dp = kpca.components();
    if n < dp + 1 {
        return Err(DensityError::TooFew { needed: dp + 1, got: n });
    }
    let h = match cfg.support_fraction {
        Some(f) => (f * n as f64).ceil() as usize,
        None => (n + dp + 1).div_ceil(2),
    };
    let refs: Vec<&[F]> = projected.iter().map(Vec::as_slice).collect();
    let fit = mcd(&refs, h, cfg)?;
    let ridge = cfg.ridge.amount(&fit.covariance);
    let gaussian = GaussianModel::new(fit.mean, fit.covariance, ridge)?;
    Ok(RdeModel { kpca, gaussian, support: fit.support })
}

pub fn rde_score<F: Real>(x: &[F], model: &RdeModel<F>) -> Result<F, DensityError> {
    model.gaussian.distance(&model.kpca.project(x)?)
}

/// Sorted training scores for right-continuous ECDF lookups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfTable<F> {
    sorted: Vec<F>,
}

impl<F: Real> EcdfTable<F> {
    pub fn new(mut values: Vec<F>) -> Result<Self, DensityError> {
        if values.is_empty() {
            return Err(DensityError::TooFew { needed: 1, got: 0 });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DensityError::NonFinite);
        }
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(Self { sorted: values })
    }

    /// Number of training scores `<= u`.
    pub fn count(&self, u: F) -> usize {
        self.sorted.partition_point(|&v| v <= u)
    }

    /// Fraction of training scores `<= u`.
    pub fn cdf(&self, u: F) -> F {
        F::from_count(self.count(u)) / F::from_count(self.sorted.len())
    }

    pub fn values(&self) -> &[F] {
        &self.sorted
    }
}

/// Mean of the two training percentile ranks, evaluated as one exact
/// integer ratio so equal ranks always give bit-identical scores.
pub fn huq<F: Real>(ppl: F, density: F, ppl_table: &EcdfTable<F>, density_table: &EcdfTable<F>) -> F {
    let (np, nd) = (ppl_table.sorted.len(), density_table.sorted.len());
    let numerator = ppl_table.count(ppl) * nd + density_table.count(density) * np;
    F::from_count(numerator) / F::from_count(2 * np * nd)
}

/// Every density model a scoring run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityModels<F> {
    pub task: GaussianModel<F>,
    pub background: Option<GaussianModel<F>>,
    pub rde: Option<RdeModel<F>>,
    pub ppl_ecdf: EcdfTable<F>,
    pub md_ecdf: EcdfTable<F>,
    pub rmd_ecdf: Option<EcdfTable<F>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "F: Real", deserialize = "F: Real"))]
enum ModelRecord<F> {
    Gaussian {
        role: String,
        #[serde(flatten)]
        parts: GaussianParts<F>,
    },
    Rde {
        kpca: Kpca<F>,
        #[serde(flatten)]
        parts: GaussianParts<F>,
        support: Vec<usize>,
    },
    Ecdf {
        name: String,
        values: Vec<F>,
    },
}

fn embeddings<F: Real>(traces: &[GenerationTrace<F>]) -> Vec<&[F]> {
    traces.iter().filter_map(|t| t.greedy_embedding.as_deref()).collect()
}

impl<F: Real> DensityModels<F> {
    /// Fits on the train-split traces; `background` may be empty, which
    /// disables the background-relative estimators.
    pub fn fit(
        train: &[GenerationTrace<F>],
        background: &[GenerationTrace<F>],
        cfg: &DensityConfig,
    ) -> Result<Self, DensityError> {
        let rows = embeddings(train);
        let task = fit_gaussian(&rows, cfg.ridge)?;
        let bg_rows = embeddings(background);
        let background = if bg_rows.len() >= 2 {
            Some(fit_gaussian(&bg_rows, cfg.ridge)?)
        } else {
            if !background.is_empty() {
                log::warn!("background corpus has fewer than two embeddings; relative estimators disabled");
            }
            None
        };
        let rde = match rde_fit(&rows, cfg) {
            Ok(m) => Some(m),
            Err(e) => {
                log::warn!("robust density model not fitted: {e}");
                None
            }
        };
        let ppl: Vec<F> = train.iter().filter_map(|t| nll_scores(&t.response).ok().map(|(_, p)| p)).collect();
        let md: Vec<F> = rows.iter().map(|r| task.distance(r)).collect::<Result<_, _>>()?;
        let rmd_ecdf = match &background {
            Some(bg) => {
                let v: Vec<F> = rows.iter().map(|r| relative_md(r, &task, bg)).collect::<Result<_, _>>()?;
                Some(EcdfTable::new(v)?)
            }
            None => None,
        };
        Ok(Self { task, background, rde, ppl_ecdf: EcdfTable::new(ppl)?, md_ecdf: EcdfTable::new(md)?, rmd_ecdf })
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), DensityError> {
        let mut records = vec![ModelRecord::Gaussian { role: "task".into(), parts: self.task.to_parts() }];
        if let Some(bg) = &self.background {
            records.push(ModelRecord::Gaussian { role: "background".into(), parts: bg.to_parts() });
        }
        if let Some(r) = &self.rde {
            records.push(ModelRecord::Rde {
                kpca: r.kpca.clone(),
                parts: r.gaussian.to_parts(),
                support: r.support.clone(),
            });
        }
        records.push(ModelRecord::Ecdf { name: "ppl".into(), values: self.ppl_ecdf.sorted.clone() });
        records.push(ModelRecord::Ecdf { name: "md".into(), values: self.md_ecdf.sorted.clone() });
        if let Some(t) = &self.rmd_ecdf {
            records.push(ModelRecord::Ecdf { name: "rmd".into(), values: t.sorted.clone() });
        }
        for r in &records {
            serde_json::to_writer(&mut w, r).map_err(io::Error::from)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, DensityError> {
        let (mut task, mut background, mut rde) = (None, None, None);
        let (mut ppl, mut md, mut rmd) = (None, None, None);
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fmt = |message: String| DensityError::Format { line: line_no, message };
            let record: ModelRecord<F> = serde_json::from_str(&line).map_err(|e| fmt(e.to_string()))?;
            match record {
                ModelRecord::Gaussian { role, parts } => {
                    let m = GaussianModel::from_parts(parts)?;
                    match role.as_str() {
                        "task" => task = Some(m),
                        "background" => background = Some(m),
                        other => return Err(fmt(format!("unknown gaussian role {other:?}"))),
                    }
                }
                ModelRecord::Rde { kpca, parts, support } => {
                    rde = Some(RdeModel { kpca, gaussian: GaussianModel::from_parts(parts)?, support })
                }
                ModelRecord::Ecdf { name, values } => {
                    let t = EcdfTable::new(values)?;
                    match name.as_str() {
                        "ppl" => ppl = Some(t),
                        "md" => md = Some(t),
                        "rmd" => rmd = Some(t),
                        other => return Err(fmt(format!("unknown ecdf table {other:?}"))),
                    }
                }
            }
        }
        let need = |what: &str| DensityError::Format { line: 0, message: format!("missing {what} record") };
        Ok(Self {
            task: task.ok_or_else(|| need("task gaussian"))?,
            background,
            rde,
            ppl_ecdf: ppl.ok_or_else(|| need("ppl ecdf"))?,
            md_ecdf: md.ok_or_else(|| need("md ecdf"))?,
            rmd_ecdf: rmd,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), DensityError> {
        self.write(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self, DensityError> {
        Self::read(BufReader::new(File::open(path)?))
    }
}
