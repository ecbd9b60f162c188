//! Black-box estimators over the sample pool: semantic-class summaries,
//! spectral and degree statistics of a pairwise relation graph, and the
//! empirical self-evaluation frequency.

use std::collections::HashSet;

use super::sample::SemanticPartition;
use super::{Estimate, EstimateError};
use crate::linalg::{symmetric_eigen, symmetric_eigenvalues, Matrix};
use crate::trace::{GenerationTrace, ReflexiveRecord};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphMode {
    /// `W_ij = E_ij`.
    NliEntail,
    /// `W_ij = 1 - C_ij`.
    NliContra,
    /// Jaccard overlap of whitespace-token sets.
    Jaccard,
}

/// Symmetric relation graph with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct RelationGraph<F> {
    pub w: Matrix<F>,
    pub mode: GraphMode,
}

impl<F: Real> RelationGraph<F> {
    /// Symmetrizes `(W + Wᵀ)/2` and sets the diagonal to one.
    pub fn from_raw(raw: &Matrix<F>, mode: GraphMode) -> Result<Self, EstimateError> {
        if !raw.is_square() || raw.rows() == 0 {
            return Err(EstimateError::invalid("relation matrix must be square and non-empty"));
        }
        if !raw.is_finite() {
            return Err(EstimateError::invalid("relation matrix has non-finite entries"));
        }
        let mut w = raw.symmetrized();
        for i in 0..w.rows() {
            w[(i, i)] = F::one();
        }
        Ok(Self { w, mode })
    }

    pub fn size(&self) -> usize {
        self.w.rows()
    }
}

pub fn jaccard(a: &str, b: &str) -> f64 {
    let sa: HashSet<&str> = a.split_whitespace().collect();
    let sb: HashSet<&str> = b.split_whitespace().collect();
    let union = sa.union(&sb).count();
    if union == 0 {
        return 1.0;
    }
    sa.intersection(&sb).count() as f64 / union as f64
}

pub fn build_graph<F: Real>(trace: &GenerationTrace<F>, mode: GraphMode) -> Result<RelationGraph<F>, EstimateError> {
    let raw = match mode {
        GraphMode::NliEntail | GraphMode::NliContra => {
            let rel = trace.relations.as_ref().ok_or_else(|| EstimateError::missing("relations"))?;
            let src = if mode == GraphMode::NliEntail { &rel.entail } else { &rel.contra };
            let m = Matrix::from_rows(src).map_err(|e| EstimateError::invalid(e.to_string()))?;
            if mode == GraphMode::NliEntail {
                m
            } else {
                Matrix::from_fn(m.rows(), m.cols(), |i, j| F::one() - m[(i, j)])
            }
        }
        GraphMode::Jaccard => {
            let s = &trace.samples;
            if s.is_empty() {
                return Err(EstimateError::missing("samples"));
            }
            Matrix::from_fn(s.len(), s.len(), |i, j| F::lit(jaccard(&s[i].text, &s[j].text)))
        }
    };
    RelationGraph::from_raw(&raw, mode)
}

pub fn num_set<F: Real>(partition: &SemanticPartition) -> F {
    F::from_count(partition.num_classes())
}

pub fn label_prob<F: Real>(partition: &SemanticPartition) -> Estimate<F> {
    let s = partition.num_samples();
    let largest = partition.classes.iter().map(Vec::len).max().unwrap_or(0);
    if s == 0 {
        return Err(EstimateError::missing("empty partition"));
    }
    Ok(F::one() - F::from_count(largest) / F::from_count(s))
}

fn degrees<F: Real>(w: &Matrix<F>) -> Vec<F> {
    (0..w.rows()).map(|i| w.row(i).iter().copied().sum()).collect()
}

fn eig_err(e: crate::linalg::LinalgError) -> EstimateError {
    EstimateError::invalid(e.to_string())
}

/// Von Neumann entropy of the trace-normalized heat kernel `exp(-tL)`.
pub fn kle<F: Real>(graph: &RelationGraph<F>, t: F) -> Estimate<F> {
    let w = &graph.w;
    let d = degrees(w);
    let lap = Matrix::from_fn(w.rows(), w.cols(), |i, j| if i == j { d[i] - w[(i, j)] } else { -w[(i, j)] });
    let mu = symmetric_eigenvalues(&lap).map_err(eig_err)?;
    let kernel: Vec<F> = mu.iter().map(|&m| (-t * m).exp()).collect();
    let z: F = kernel.iter().copied().sum();
    let clamp = F::lit(1e-15);
    let mut h = F::zero();
    for &k in &kernel {
        let p = k / z;
        if p >= clamp {
            h -= p * p.ln();
        }
    }
    Ok(h)
}

fn normalized_laplacian<F: Real>(w: &Matrix<F>) -> Result<Matrix<F>, EstimateError> {
    let d = degrees(w);
    if d.iter().any(|&x| x <= F::zero()) {
        return Err(EstimateError::invalid("graph has a node with zero degree"));
    }
    let inv: Vec<F> = d.iter().map(|&x| F::one() / x.sqrt()).collect();
    Ok(Matrix::from_fn(w.rows(), w.cols(), |i, j| {
        let off = w[(i, j)] * inv[i] * inv[j];
        if i == j {
            F::one() - off
        } else {
            -off
        }
    }))
}

/// `Σ_k max(0, 1 - λ_k)` over the normalized Laplacian spectrum.
pub fn eig_val_laplacian<F: Real>(graph: &RelationGraph<F>) -> Estimate<F> {
    let l = normalized_laplacian(&graph.w)?;
    let values = symmetric_eigenvalues(&l).map_err(eig_err)?;
    Ok(values.iter().map(|&v| (F::one() - v).max(F::zero())).sum())
}

/// Which normalized-Laplacian eigenvectors form the spectral embedding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EigenSelection {
    /// Every eigenvector whose eigenvalue lies below the threshold.
    Threshold(f64),
    /// The eigenvectors of the `k` smallest eigenvalues.
    Smallest(usize),
}

/// Frobenius norm of the centered spectral embedding.
///
/// Eigenvectors are sign-fixed so the largest-magnitude entry is positive,
/// and eigenvectors sharing an eigenvalue (within 1e-10) are ordered
/// lexicographically, so a fixed `k` cutting through a degenerate eigenspace
/// still gives a deterministic result.
pub fn eccentricity<F: Real>(graph: &RelationGraph<F>, selection: EigenSelection) -> Estimate<F> {
    let s = graph.size();
    let l = normalized_laplacian(&graph.w)?;
    let eig = symmetric_eigen(&l).map_err(eig_err)?;
    let mut vecs: Vec<(F, Vec<F>)> = (0..s)
        .map(|k| {
            let mut v = eig.vector(k);
            super::density::canonical_sign(&mut v);
            (eig.values[k], v)
        })
        .collect();
    let tie = F::lit(1e-10);
    let mut start = 0;
    while start < s {
        let mut end = start + 1;
        while end < s && vecs[end].0 - vecs[start].0 <= tie {
            end += 1;
        }
        vecs[start..end].sort_by(|a, b| {
            a.1.iter()
                .zip(&b.1)
                .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .reverse()
        });
        start = end;
    }
    let chosen: Vec<&Vec<F>> = match selection {
        EigenSelection::Threshold(th) => {
            let th = F::lit(th);
            vecs.iter().filter(|(v, _)| *v < th).map(|(_, u)| u).collect()
        }
        EigenSelection::Smallest(k) => {
            if k > s {
                return Err(EstimateError::missing(format!("eccentricity needs k <= S, got k = {k}, S = {s}")));
            }
            vecs.iter().take(k).map(|(_, u)| u).collect()
        }
    };
    let mut total = F::zero();
    for u in chosen {
        let m = u.iter().copied().sum::<F>() / F::from_count(s);
        total += u.iter().map(|&x| (x - m) * (x - m)).sum::<F>();
    }
    Ok(total.sqrt())
}

/// Mean missing pairwise similarity `(S² - ΣW)/S²`.
pub fn degmat<F: Real>(graph: &RelationGraph<F>) -> Estimate<F> {
    let s2 = F::from_count(graph.size() * graph.size());
    Ok((s2 - graph.w.sum()) / s2)
}

/// One minus the mean off-diagonal soft entailment.
pub fn luq<F: Real>(soft_entail: &[Vec<F>]) -> Estimate<F> {
    let s = soft_entail.len();
    if s < 2 {
        return Err(EstimateError::missing("luq needs at least two samples"));
    }
    if soft_entail.iter().any(|r| r.len() != s) {
        return Err(EstimateError::invalid("soft_entail is not square"));
    }
    let mut total = F::zero();
    for (i, row) in soft_entail.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if i != j {
                total += x;
            }
        }
    }
    Ok(F::one() - total / F::from_count(s * (s - 1)))
}

pub fn ptrue_empirical<F: Real>(record: Option<&ReflexiveRecord<F>>) -> Estimate<F> {
    let flags = record
        .and_then(|r| r.empirical_true_flags.as_ref())
        .filter(|f| !f.is_empty())
        .ok_or_else(|| EstimateError::missing("empirical_true_flags"))?;
    let hits = flags.iter().filter(|&&b| b).count();
    Ok(F::one() - F::from_count(hits) / F::from_count(flags.len()))
}
