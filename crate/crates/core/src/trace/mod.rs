//! Recorded generation traces.
//!
//! A trace is everything an estimator may look at for one evaluation
//! instance: per-token log-probabilities of the scored response, the sampled
//! response pool, pairwise relation matrices over that pool, attention and
//! hidden-state extracts, and the reflexive self-evaluation record. Traces are
//! produced offline by a recorder and are immutable once loaded.
//!
//! All log-probabilities and entropies are natural-log (nats).

mod capability;
mod io;
mod validate;

pub use capability::{require, require_tag, restrict, Capability};
pub use io::{load_traces, read_traces, save_traces, write_traces, SplitCounts, TraceSet};
pub use validate::{check_split_integrity, validate_trace, FieldError};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version string written into every record.
pub const SCHEMA_VERSION: &str = "1.0";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: schema version {found:?} does not match expected {expected:?}")]
    Version { line: usize, found: String, expected: String },
    #[error("line {line} (instance {instance_id:?}): invalid field `{field}`: {reason}")]
    Invalid { line: usize, instance_id: String, field: String, reason: String },
    #[error("instance {instance_id:?} appears more than once ({detail})")]
    Duplicate { instance_id: String, detail: String },
    #[error("unknown capability tag {0:?}")]
    UnknownCapability(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityKind {
    Binary,
    Continuous,
}

/// Response-level quality target; 1 means fully supported, 0 hallucinated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualityLabel<F> {
    pub value: F,
    pub kind: QualityKind,
}

/// Combined bidirectional NLI label of a substituted-token response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NliLabel {
    Entail,
    Contra,
    Neutral,
}

/// One of the top-k token alternatives at a response position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlternativeToken<F> {
    pub token_id: u32,
    pub probability: F,
    pub nli_label: NliLabel,
}

/// Per-position record of the scored response.
///
/// `attn_diag` and `attn_prev` are indexed `[layer][head]` over all `L`
/// layers of the model; `attn_prev` is empty at the first position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenStep<F> {
    pub logprob_cond: F,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprob_uncond: Option<F>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<F>,
    /// Finite-support entries `(token id, probability)` of the predictive
    /// distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<Vec<(u32, F)>>,
    /// Vocabulary size the uniform reference is taken over; defaults to
    /// the number of `dist` entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support_size: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternatives: Option<Vec<AlternativeToken<F>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loo_similarity: Option<F>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attn_diag: Option<Vec<Vec<F>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attn_prev: Option<Vec<Vec<F>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attn_from_last: Option<F>,
}

impl<F> TokenStep<F> {
    /// A step carrying only the conditional log-probability.
    pub fn bare(logprob_cond: F) -> Self {
        Self {
            logprob_cond,
            logprob_uncond: None,
            entropy: None,
            dist: None,
            support_size: None,
            alternatives: None,
            loo_similarity: None,
            attn_diag: None,
            attn_prev: None,
            attn_from_last: None,
        }
    }
}

/// One stochastic sample from the shared sample pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord<F> {
    pub text: String,
    pub tokens: Vec<u32>,
    pub token_logprobs: Vec<F>,
    /// Relevance-weighted per-token log-probabilities `R_t * log p_t`; their
    /// negated sum is the token-relevance NLL of the sample.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokensar_logprobs: Option<Vec<F>>,
    /// Recorder-computed NLI kernel score of this sample against the pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_score: Option<F>,
    /// Last-token decoder hidden state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<F>>,
}

impl<F: crate::Real> SampleRecord<F> {
    pub fn log_probability(&self) -> F {
        self.token_logprobs.iter().copied().sum()
    }
}

/// Pairwise relations over the sample pool (`S x S` unless noted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationMatrices<F> {
    /// `E[i][j] = p(entailment | y_i, y_j)`.
    pub entail: Vec<Vec<F>>,
    /// `C[i][j] = p(contradiction | y_i, y_j)`.
    pub contra: Vec<Vec<F>>,
    /// Two-way softmax of entailment vs contradiction logits.
    pub soft_entail: Vec<Vec<F>>,
    /// Cross-encoder similarity over sentence units, `K x K`.
    pub sent_sim: Vec<Vec<F>>,
    /// Whether the greedy response is unit 0 of `sent_sim` (then `K = S + 1`).
    #[serde(default)]
    pub sent_sim_includes_greedy: bool,
    /// Cross-encoder similarity between samples.
    pub sample_sim: Vec<Vec<F>>,
    pub bidir_entail_label: Vec<Vec<bool>>,
}

/// Self-evaluation probes of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReflexiveRecord<F> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_true: Option<F>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_true_sampling: Option<F>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub empirical_true_flags: Option<Vec<bool>>,
}

/// One evaluation (or training) instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationTrace<F> {
    pub schema_version: String,
    pub instance_id: String,
    /// Query the response belongs to; several responses may share one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_id: Option<String>,
    pub split: Split,
    /// Required on eval instances; background-corpus records may omit it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityLabel<F>>,
    pub response_text: String,
    pub response: Vec<TokenStep<F>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<SampleRecord<F>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<RelationMatrices<F>>,
    /// Decoder hidden state averaged over the generated tokens.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greedy_embedding: Option<Vec<F>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflexive: Option<ReflexiveRecord<F>>,
}

impl<F: crate::Real> GenerationTrace<F> {
    /// Minimal trace with only conditional log-probabilities.
    pub fn from_logprobs(instance_id: impl Into<String>, split: Split, logprobs: &[F]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            instance_id: instance_id.into(),
            query_id: None,
            split,
            quality: None,
            response_text: String::new(),
            response: logprobs.iter().map(|&lp| TokenStep::bare(lp)).collect(),
            samples: Vec::new(),
            relations: None,
            greedy_embedding: None,
            reflexive: None,
        }
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }

    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }
}
