use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{GenerationTrace, TraceError};
use crate::Real;

/// Input groups an estimator may depend on.
///
/// Each optional trace field belongs to exactly one group; `restrict` strips
/// everything outside a given set, which is how the capability audit checks
/// that estimators read only what they declare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    /// Conditional log-probabilities of the scored response (always recorded).
    Logits,
    /// Prompt-free log-probabilities.
    UncondLogits,
    /// Full-distribution summaries: entropy, truncated distribution, support size.
    Dists,
    /// Top-k alternatives with NLI labels.
    Alternatives,
    /// The sampled response pool (text, tokens, log-probabilities, kernel scores).
    Samples,
    /// Pairwise NLI and cross-encoder matrices over the sample pool.
    Relations,
    /// Attention extracts.
    Attention,
    /// Greedy mean-pooled and sample last-token hidden states.
    Embeddings,
    /// Self-evaluation probabilities and flags.
    Reflexive,
    /// Leave-one-out token similarities.
    LooSim,
}

impl Capability {
    pub const ALL: [Capability; 10] = [
        Capability::Logits,
        Capability::UncondLogits,
        Capability::Dists,
        Capability::Alternatives,
        Capability::Samples,
        Capability::Relations,
        Capability::Attention,
        Capability::Embeddings,
        Capability::Reflexive,
        Capability::LooSim,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Capability::Logits => "logits",
            Capability::UncondLogits => "uncond_logits",
            Capability::Dists => "dists",
            Capability::Alternatives => "alternatives",
            Capability::Samples => "samples",
            Capability::Relations => "relations",
            Capability::Attention => "attention",
            Capability::Embeddings => "embeddings",
            Capability::Reflexive => "reflexive",
            Capability::LooSim => "loo_sim",
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Capability {
    type Err = TraceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Capability::ALL.into_iter().find(|c| c.tag() == s).ok_or_else(|| TraceError::UnknownCapability(s.to_string()))
    }
}

/// Whether every field of the given capability is present on `trace`.
pub fn require<F: Real>(trace: &GenerationTrace<F>, capability: Capability) -> bool {
    let steps = &trace.response;
    let all_steps = |pred: &dyn Fn(&super::TokenStep<F>) -> bool| !steps.is_empty() && steps.iter().all(pred);
    match capability {
        Capability::Logits => !steps.is_empty(),
        Capability::UncondLogits => all_steps(&|s| s.logprob_uncond.is_some()),
        Capability::Dists => all_steps(&|s| s.entropy.is_some() && s.dist.as_ref().is_some_and(|d| !d.is_empty())),
        Capability::Alternatives => all_steps(&|s| s.alternatives.as_ref().is_some_and(|a| !a.is_empty())),
        Capability::Samples => !trace.samples.is_empty() && trace.samples.iter().all(|s| !s.tokens.is_empty()),
        Capability::Relations => trace.relations.is_some(),
        Capability::Attention => {
            all_steps(&|s| s.attn_diag.is_some() && s.attn_prev.is_some() && s.attn_from_last.is_some())
        }
        Capability::Embeddings => {
            trace.greedy_embedding.is_some() && trace.samples.iter().all(|s| s.embedding.is_some())
        }
        Capability::Reflexive => trace
            .reflexive
            .as_ref()
            .is_some_and(|r| r.p_true.is_some() && r.p_true_sampling.is_some() && r.empirical_true_flags.is_some()),
        Capability::LooSim => all_steps(&|s| s.loo_similarity.is_some()),
    }
}

/// `require` keyed by the textual tag.
pub fn require_tag<F: Real>(trace: &GenerationTrace<F>, tag: &str) -> Result<bool, TraceError> {
    Ok(require(trace, tag.parse()?))
}

/// Copy of `trace` with every field outside `keep` removed.
///
/// Sample records survive when only `Embeddings` is kept, but with their
/// text, tokens and log-probabilities blanked.
pub fn restrict<F: Real>(trace: &GenerationTrace<F>, keep: &[Capability]) -> GenerationTrace<F> {
    let has = |c: Capability| keep.contains(&c);
    let mut out = trace.clone();
    for step in &mut out.response {
        if !has(Capability::UncondLogits) {
            step.logprob_uncond = None;
        }
        if !has(Capability::Dists) {
            step.entropy = None;
            step.dist = None;
            step.support_size = None;
        }
        if !has(Capability::Alternatives) {
            step.alternatives = None;
        }
        if !has(Capability::LooSim) {
            step.loo_similarity = None;
        }
        if !has(Capability::Attention) {
            step.attn_diag = None;
            step.attn_prev = None;
            step.attn_from_last = None;
        }
    }
    match (has(Capability::Samples), has(Capability::Embeddings)) {
        (true, true) => {}
        (true, false) => out.samples.iter_mut().for_each(|s| s.embedding = None),
        (false, true) => out.samples.iter_mut().for_each(|s| {
            s.text.clear();
            s.tokens.clear();
            s.token_logprobs.clear();
            s.tokensar_logprobs = None;
            s.kernel_score = None;
        }),
        (false, false) => out.samples.clear(),
    }
    if !has(Capability::Embeddings) {
        out.greedy_embedding = None;
    }
    if !has(Capability::Relations) {
        out.relations = None;
    }
    if !has(Capability::Reflexive) {
        out.reflexive = None;
    }
    if !has(Capability::Logits) {
        // Conditional log-probabilities are mandatory; poison them so any read shows up.
        out.response.iter_mut().for_each(|s| s.logprob_cond = F::nan());
    }
    out
}
