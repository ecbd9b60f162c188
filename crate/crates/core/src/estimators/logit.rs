//! Single-pass estimators over the token-level predictive distributions of
//! the scored response, plus the two white-box reflexive scores.

use super::{Estimate, EstimateError};
use crate::scalar::floored_ln;
use crate::trace::{NliLabel, ReflexiveRecord, TokenStep};
use crate::Real;

fn nonempty<F>(steps: &[TokenStep<F>]) -> Result<(), EstimateError> {
    if steps.is_empty() {
        Err(EstimateError::invalid("empty response"))
    } else {
        Ok(())
    }
}

/// Sequence negative log-likelihood and its length-normalized form.
pub fn nll_scores<F: Real>(steps: &[TokenStep<F>]) -> Estimate<(F, F)> {
    nonempty(steps)?;
    let msp = -steps.iter().map(|s| s.logprob_cond).sum::<F>();
    Ok((msp, msp / F::from_count(steps.len())))
}

pub fn mean_token_entropy<F: Real>(steps: &[TokenStep<F>]) -> Estimate<F> {
    nonempty(steps)?;
    let mut total = F::zero();
    for s in steps {
        total += s.entropy.ok_or_else(|| EstimateError::missing("entropy"))?;
    }
    Ok(total / F::from_count(steps.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceMode {
    SelfCertainty,
    Renyi,
    FisherRao,
}

/// Temperature-rescaled distribution over the recorded support.
/// Zero-probability entries stay at zero.
fn tempered<F: Real>(dist: &[(u32, F)], tau: F) -> Vec<F> {
    let logs: Vec<F> =
        dist.iter().map(|&(_, p)| if p > F::zero() { p.ln() / tau } else { F::neg_infinity() }).collect();
    let z = crate::log_sum_exp(logs.iter().copied());
    logs.iter().map(|&l| (l - z).exp()).collect()
}

/// Rényi divergence `D_alpha(q || U)` over a vocabulary of size `vocab`.
pub(crate) fn renyi_from_uniform<F: Real>(q: &[F], vocab: F, alpha: F) -> F {
    let s: F = q.iter().filter(|&&x| x > F::zero()).map(|&x| x.powf(alpha)).sum();
    vocab.ln() + s.ln() / (alpha - F::one())
}

/// Fisher-Rao geodesic distance to the uniform distribution, scaled to [0, 1].
pub(crate) fn fisher_rao_from_uniform<F: Real>(q: &[F], vocab: F) -> F {
    let bc: F = q.iter().map(|&x| (x / vocab).sqrt()).sum();
    F::two() / F::PI() * bc.min(F::one()).acos()
}

/// Mean token-level divergence from uniform, oriented as uncertainty
/// (the negated mean divergence).
///
/// `SelfCertainty` uses the recorded entries as its vocabulary and ignores
/// `tau`; the other two modes rescale by `tau` and take the vocabulary size
/// from `support_size` when recorded.
pub fn uniform_divergence<F: Real>(
    steps: &[TokenStep<F>],
    mode: DivergenceMode,
    alpha: F,
    tau: F,
    floor: F,
) -> Estimate<F> {
    Ok(-mean_divergence(steps, mode, alpha, tau, floor)?)
}

/// Mean divergence from uniform with its natural (confidence) orientation.
pub(crate) fn mean_divergence<F: Real>(
    steps: &[TokenStep<F>],
    mode: DivergenceMode,
    alpha: F,
    tau: F,
    floor: F,
) -> Estimate<F> {
    nonempty(steps)?;
    let mut total = F::zero();
    for s in steps {
        let dist = match &s.dist {
            Some(d) if !d.is_empty() => d,
            _ => return Err(EstimateError::missing("dist")),
        };
        if !dist.iter().any(|&(_, p)| p > F::zero()) {
            return Err(EstimateError::invalid("dist has no positive mass"));
        }
        let entries = F::from_count(dist.len());
        let token = match mode {
            DivergenceMode::SelfCertainty => {
                let mean_log: F = dist.iter().map(|&(_, p)| floored_ln(p, floor)).sum::<F>() / entries;
                -entries.ln() - mean_log
            }
            DivergenceMode::Renyi | DivergenceMode::FisherRao => {
                let vocab = s.support_size.map_or(entries, |v| F::lit(v as f64));
                let q = tempered(dist, tau);
                if mode == DivergenceMode::Renyi {
                    renyi_from_uniform(&q, vocab, alpha)
                } else {
                    fisher_rao_from_uniform(&q, vocab)
                }
            }
        };
        total += token;
    }
    Ok(total / F::from_count(steps.len()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PmiMode<F> {
    Pmi,
    Cpmi { tau_gate: F, lambda: F },
}

pub fn pmi_scores<F: Real>(steps: &[TokenStep<F>], mode: PmiMode<F>) -> Estimate<F> {
    nonempty(steps)?;
    let mut total = F::zero();
    for s in steps {
        let uncond = s.logprob_uncond.ok_or_else(|| EstimateError::missing("logprob_uncond"))?;
        total += match mode {
            PmiMode::Pmi => s.logprob_cond - uncond,
            PmiMode::Cpmi { tau_gate, lambda } => {
                let h = s.entropy.ok_or_else(|| EstimateError::missing("entropy"))?;
                if h >= tau_gate {
                    s.logprob_cond - lambda * uncond
                } else {
                    s.logprob_cond
                }
            }
        };
    }
    Ok(-total / F::from_count(steps.len()))
}

/// Relevance-weighted NLL with weights `R_t ∝ 1 - sim_t`.
pub fn token_sar<F: Real>(steps: &[TokenStep<F>]) -> Estimate<F> {
    nonempty(steps)?;
    let mut rel = Vec::with_capacity(steps.len());
    for s in steps {
        let sim = s.loo_similarity.ok_or_else(|| EstimateError::missing("loo_similarity"))?;
        rel.push(F::one() - sim);
    }
    let z: F = rel.iter().copied().sum();
    if z <= F::zero() {
        return Err(EstimateError::missing("token relevance weights are all zero"));
    }
    Ok(steps.iter().zip(&rel).map(|(s, &r)| -s.logprob_cond * r).sum::<F>() / z)
}

/// Claim-conditioned probability over the first `k` alternatives, returned
/// as the negated product across positions.
pub fn ccp<F: Real>(steps: &[TokenStep<F>], k: usize) -> Estimate<F> {
    nonempty(steps)?;
    let mut product = F::one();
    for (t, s) in steps.iter().enumerate() {
        let alts = match &s.alternatives {
            Some(a) if !a.is_empty() => a,
            _ => return Err(EstimateError::missing("alternatives")),
        };
        let (mut entail, mut contra) = (F::zero(), F::zero());
        for a in alts.iter().take(k) {
            match a.nli_label {
                NliLabel::Entail => entail += a.probability,
                NliLabel::Contra => contra += a.probability,
                NliLabel::Neutral => {}
            }
        }
        let denom = entail + contra;
        if denom <= F::zero() {
            return Err(EstimateError::invalid(format!("position {t}: no entailing or contradicting mass")));
        }
        product *= entail / denom;
    }
    Ok(-product)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PTrueVariant {
    PTrue,
    PTrueSampling,
}

pub fn ptrue_nll<F: Real>(record: Option<&ReflexiveRecord<F>>, variant: PTrueVariant, floor: F) -> Estimate<F> {
    let p = record.and_then(|r| match variant {
        PTrueVariant::PTrue => r.p_true,
        PTrueVariant::PTrueSampling => r.p_true_sampling,
    });
    let p = p.ok_or_else(|| EstimateError::missing("p_true"))?;
    Ok(-floored_ln(p, floor))
}
