//! Attention- and hidden-state-based estimators.

use std::ops::RangeInclusive;

use super::{Estimate, EstimateError};
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::scalar::floored_ln;
use crate::trace::TokenStep;
use crate::Real;

/// Attention extracts gathered from the response steps.
///
/// `diag[t][l][h]` is the self-attention weight at position `t`,
/// `prev[t - 1][l][h]` the weight on the previous position (defined for
/// `t >= 1`) and `from_last[t]` the saliency received from the final step.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionExtract<'a, F> {
    pub layers: usize,
    pub heads: usize,
    diag: Vec<&'a [Vec<F>]>,
    prev: Vec<&'a [Vec<F>]>,
    pub from_last: Vec<F>,
}

/// Middle-third layer indices `⌊L/3⌋ ..= ⌈2L/3⌉`, clamped to the last layer.
pub fn middle_third(layers: usize) -> RangeInclusive<usize> {
    let lo = layers / 3;
    let hi = (2 * layers).div_ceil(3).min(layers.saturating_sub(1));
    lo..=hi
}

impl<'a, F: Real> AttentionExtract<'a, F> {
    pub fn from_steps(steps: &'a [TokenStep<F>]) -> Result<Self, EstimateError> {
        if steps.is_empty() {
            return Err(EstimateError::invalid("empty response"));
        }
        let missing = || EstimateError::missing("attention");
        let mut diag = Vec::with_capacity(steps.len());
        let mut prev = Vec::with_capacity(steps.len());
        let mut from_last = Vec::with_capacity(steps.len());
        for (t, s) in steps.iter().enumerate() {
            diag.push(s.attn_diag.as_deref().ok_or_else(missing)?);
            let p = s.attn_prev.as_deref().ok_or_else(missing)?;
            if t > 0 {
                prev.push(p);
            }
            from_last.push(s.attn_from_last.ok_or_else(missing)?);
        }
        let layers = diag[0].len();
        let heads = diag[0].first().map_or(0, Vec::len);
        if layers == 0 || heads == 0 {
            return Err(missing());
        }
        let shaped = |m: &[Vec<F>]| m.len() == layers && m.iter().all(|r| r.len() == heads);
        if !diag.iter().all(|m| shaped(m)) || !prev.iter().all(|m| shaped(m)) {
            return Err(EstimateError::invalid("attention shapes differ across positions"));
        }
        Ok(Self { layers, heads, diag, prev, from_last })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn diag(&self, t: usize, layer: usize, head: usize) -> F {
        self.diag[t][layer][head]
    }

    /// Attention from position `t` (>= 1) to `t - 1`.
    pub fn prev(&self, t: usize, layer: usize, head: usize) -> F {
        self.prev[t - 1][layer][head]
    }
}

/// Negated head-averaged log self-attention at the middle layer `⌊L/2⌋`.
pub fn attention_score<F: Real>(extract: &AttentionExtract<'_, F>, eps: F) -> Estimate<F> {
    let layer = extract.layers / 2;
    let mut total = F::zero();
    for h in 0..extract.heads {
        for t in 0..extract.len() {
            total += (extract.diag(t, layer, h) + eps).ln();
        }
    }
    Ok(-total / F::from_count(extract.heads))
}

/// RAUQ with the confidence recurrence `C_t = αp_t + (1-α)a_t C_{t-1}`,
/// maximized over the middle-third layers. Position 1 enters the log-mean.
pub fn rauq<F: Real>(steps: &[TokenStep<F>], extract: &AttentionExtract<'_, F>, alpha: F, floor: F) -> Estimate<F> {
    let n = steps.len();
    if n != extract.len() {
        return Err(EstimateError::invalid("attention length differs from response"));
    }
    let probs: Vec<F> = steps.iter().map(|s| s.logprob_cond.exp()).collect();
    let tf = F::from_count(n);
    let mut best = F::neg_infinity();
    for layer in middle_third(extract.layers) {
        let head = if n < 2 {
            0
        } else {
            let mut best_head = 0;
            let mut best_mean = F::neg_infinity();
            for h in 0..extract.heads {
                let m = (1..n).map(|t| extract.prev(t, layer, h)).sum::<F>() / F::from_count(n - 1);
                if m > best_mean {
                    best_mean = m;
                    best_head = h;
                }
            }
            best_head
        };
        let mut c = probs[0];
        let mut log_sum = floored_ln(c, floor);
        for (t, &p) in probs.iter().enumerate().take(n).skip(1) {
            c = alpha * p + (F::one() - alpha) * extract.prev(t, layer, head) * c;
            log_sum += floored_ln(c, floor);
        }
        let score = F::one() - log_sum / tf;
        if score > best {
            best = score;
        }
    }
    Ok(best)
}

/// Saliency-weighted NLL with weights proportional to `attn_from_last`.
pub fn csl<F: Real>(steps: &[TokenStep<F>], extract: &AttentionExtract<'_, F>) -> Estimate<F> {
    if steps.len() != extract.len() {
        return Err(EstimateError::invalid("attention length differs from response"));
    }
    let z: F = extract.from_last.iter().copied().sum();
    if z <= F::zero() {
        return Err(EstimateError::missing("saliency is zero everywhere"));
    }
    Ok(steps.iter().zip(&extract.from_last).map(|(s, &w)| -s.logprob_cond * w).sum::<F>() / z)
}

/// Mean log-eigenvalue of `EᵀJ_dE + reg·I` over the `S` sample embeddings.
pub fn eigenscore<F: Real>(embeddings: &[&[F]], reg: F) -> Estimate<F> {
    let s = embeddings.len();
    if s < 2 {
        return Err(EstimateError::missing("eigenscore needs at least two sample embeddings"));
    }
    let d = embeddings[0].len();
    if d == 0 || embeddings.iter().any(|e| e.len() != d) {
        return Err(EstimateError::invalid("sample embeddings differ in dimension"));
    }
    if embeddings.iter().any(|e| e.iter().any(|x| !x.is_finite())) {
        return Err(EstimateError::invalid("non-finite embedding"));
    }
    let centered: Vec<Vec<F>> = embeddings
        .iter()
        .map(|e| {
            let m = e.iter().copied().sum::<F>() / F::from_count(d);
            e.iter().map(|&x| x - m).collect()
        })
        .collect();
    let mut c = Matrix::from_fn(s, s, |i, j| crate::linalg::dot(&centered[i], &centered[j]));
    c.add_diagonal(reg);
    let values = symmetric_eigenvalues(&c).map_err(|e| EstimateError::invalid(e.to_string()))?;
    let clamp = F::lit(1e-12);
    Ok(values.iter().map(|&l| l.max(clamp).ln()).sum::<F>() / F::from_count(s))
}
