//! Seeded generator of synthetic traces with every capability populated.
//!
//! Each instance draws a latent difficulty that drives every recorded
//! quantity (token probabilities, sample diversity, attention, embeddings,
//! self-evaluation). The planted uncertainty is the perplexity score of the
//! greedy response, and quality labels are derived from it: an instance is
//! hallucinated when `signal * rank(ppl) + (1 - signal) * noise` falls in the
//! top `hallucination_rate` fraction. With `signal = 1` the perplexity score
//! separates the classes perfectly; with `signal = 0` it carries no
//! information about quality.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::logit::nll_scores;
use crate::trace::{
    AlternativeToken, GenerationTrace, NliLabel, QualityKind, QualityLabel, ReflexiveRecord, RelationMatrices,
    SampleRecord, Split, TokenStep, SCHEMA_VERSION,
};

const VOCAB: u32 = 1000;
const WORDS: [&str; 40] = [
    "paris", "london", "river", "mountain", "born", "in", "the", "capital", "of", "france", "was", "is", "a", "city",
    "north", "south", "king", "queen", "year", "century", "painter", "novel", "wrote", "founded", "empire", "island",
    "coast", "famous", "largest", "oldest", "bridge", "tower", "museum", "war", "treaty", "signed", "lake", "desert",
    "forest", "village",
];

#[derive(Debug, Error, PartialEq)]
#[error("invalid synthetic parameter `{field}`: {reason}")]
pub struct SynthError {
    pub field: &'static str,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    /// Number of eval-split instances.
    pub n: usize,
    /// Number of train-split instances (density model fitting).
    pub n_train: usize,
    /// Number of background instances.
    pub n_background: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Samples per instance.
    pub samples: usize,
    pub hallucination_rate: f64,
    pub signal: f64,
    pub layers: usize,
    pub heads: usize,
    pub embed_dim: usize,
    /// Recorded distribution entries (and alternatives) per step.
    pub top_k: usize,
    /// Stochastic self-evaluations per instance.
    pub self_evals: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n: 100,
            n_train: 60,
            n_background: 40,
            min_len: 3,
            max_len: 12,
            samples: 6,
            hallucination_rate: 0.3,
            signal: 1.0,
            layers: 6,
            heads: 2,
            embed_dim: 4,
            top_k: 5,
            self_evals: 10,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |field, reason: &str| Err(SynthError { field, reason: reason.to_string() });
        if self.min_len == 0 {
            return err("min_len", "must be at least 1");
        }
        if self.max_len < self.min_len {
            return err("max_len", "must be >= min_len");
        }
        if self.samples == 0 {
            return err("samples", "must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.hallucination_rate) {
            return err("hallucination_rate", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.signal) {
            return err("signal", "must lie in [0, 1]");
        }
        if self.layers == 0 || self.heads == 0 {
            return err("layers", "layers and heads must be at least 1");
        }
        if self.embed_dim == 0 {
            return err("embed_dim", "must be at least 1");
        }
        if self.top_k < 2 || self.top_k as u32 >= VOCAB {
            return err("top_k", "must lie in [2, 999]");
        }
        if self.self_evals == 0 {
            return err("self_evals", "must be at least 1");
        }
        Ok(())
    }
}

/// The three corpora a run consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub eval: Vec<GenerationTrace<f64>>,
    pub train: Vec<GenerationTrace<f64>>,
    pub background: Vec<GenerationTrace<f64>>,
}

pub fn generate(params: &SynthParams, seed: u64) -> Result<SynthCorpus, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let direction: Vec<f64> = (0..params.embed_dim).map(|_| normal(&mut rng)).collect();
    let mut make = |prefix: &str, count: usize, split: Split, shift: f64| -> Vec<GenerationTrace<f64>> {
        (0..count).map(|i| instance(params, &mut rng, format!("{prefix}-{i:04}"), split, &direction, shift)).collect()
    };
    let mut eval = make("eval", params.n, Split::Eval, 0.0);
    let train = make("train", params.n_train, Split::Train, 0.0);
    let background = make("bg", params.n_background, Split::Train, 1.5);
    label_quality(&mut eval, params, &mut rng);
    Ok(SynthCorpus { eval, train, background })
}

/// Perplexity of the greedy response, the planted uncertainty.
pub fn planted_uncertainty(trace: &GenerationTrace<f64>) -> f64 {
    nll_scores(&trace.response).map(|(_, ppl)| ppl).unwrap_or(f64::NAN)
}

fn label_quality(eval: &mut [GenerationTrace<f64>], params: &SynthParams, rng: &mut ChaCha8Rng) {
    let n = eval.len();
    if n == 0 {
        return;
    }
    let u: Vec<f64> = eval.iter().map(planted_uncertainty).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| u[a].total_cmp(&u[b]).then(a.cmp(&b)));
    let mut rank = vec![0.0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = (r as f64 + 0.5) / n as f64;
    }
    let z: Vec<f64> = rank.iter().map(|&r| params.signal * r + (1.0 - params.signal) * rng.random::<f64>()).collect();
    let mut by_z: Vec<usize> = (0..n).collect();
    by_z.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
    let m = (params.hallucination_rate * n as f64).round() as usize;
    let mut quality = vec![1.0; n];
    for &i in &by_z[..m] {
        quality[i] = 0.0;
    }
    for (t, q) in eval.iter_mut().zip(quality) {
        t.quality = Some(QualityLabel { value: q, kind: QualityKind::Binary });
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn instance(
    p: &SynthParams,
    rng: &mut ChaCha8Rng,
    id: String,
    split: Split,
    direction: &[f64],
    shift: f64,
) -> GenerationTrace<f64> {
    let difficulty = uniform(rng, 0.1, 2.5);
    let len = rng.random_range(p.min_len..=p.max_len);
    let response: Vec<TokenStep<f64>> = (0..len).map(|t| step(p, rng, t, difficulty)).collect();

    let clusters = cluster_assignment(p.samples, difficulty, rng);
    let templates: Vec<Vec<usize>> = (0..p.samples)
        .map(|_| {
            let words = rng.random_range(3..=8);
            (0..words).map(|_| rng.random_range(0..WORDS.len())).collect()
        })
        .collect();
    let centroids: Vec<Vec<f64>> = (0..p.samples).map(|_| (0..p.embed_dim).map(|_| normal(rng)).collect()).collect();
    let samples: Vec<SampleRecord<f64>> =
        clusters.iter().map(|&c| sample(rng, &templates[c], &centroids[c], difficulty, c == 0)).collect();
    let relations = relations(&clusters, rng);

    let greedy_embedding: Vec<f64> =
        direction.iter().map(|&d| d * (difficulty + shift) + 0.5 * normal(rng) + shift).collect();

    let sigmoid = |x: f64| 1.0 / (1.0 + (-x).exp());
    let p_true = sigmoid(2.0 - 1.5 * difficulty + 0.3 * normal(rng)).max(1e-6);
    let p_true_sampling = sigmoid(1.5 - 1.2 * difficulty + 0.3 * normal(rng)).max(1e-6);
    let flags = (0..p.self_evals).map(|_| rng.random::<f64>() < p_true).collect();

    GenerationTrace {
        schema_version: SCHEMA_VERSION.to_string(),
        query_id: Some(id.clone()),
        instance_id: id,
        split,
        quality: None,
        response_text: response.iter().enumerate().map(|(t, _)| WORDS[t % WORDS.len()]).collect::<Vec<_>>().join(" "),
        response,
        samples,
        relations: Some(relations),
        greedy_embedding: Some(greedy_embedding),
        reflexive: Some(ReflexiveRecord {
            p_true: Some(p_true),
            p_true_sampling: Some(p_true_sampling),
            empirical_true_flags: Some(flags),
        }),
    }
}

fn step(p: &SynthParams, rng: &mut ChaCha8Rng, t: usize, difficulty: f64) -> TokenStep<f64> {
    let lp = -difficulty * uniform(rng, 0.5, 1.5);
    let prob = lp.exp();
    let k = p.top_k;

    let mut ids: Vec<u32> = rand::seq::index::sample(rng, VOCAB as usize, k).into_iter().map(|i| i as u32).collect();
    ids.sort_unstable();
    let realized = ids[0];
    let rest_mass = (1.0 - prob) * uniform(rng, 0.5, 0.95);
    let weights: Vec<f64> = (1..k).map(|_| uniform(rng, 0.05, 1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut dist: Vec<(u32, f64)> = vec![(realized, prob)];
    dist.extend(ids[1..].iter().zip(&weights).map(|(&id, &w)| (id, rest_mass * w / total)));

    let residual = (1.0 - prob - rest_mass).max(0.0);
    let tail = f64::from(VOCAB) - k as f64;
    let mut entropy: f64 = dist.iter().map(|&(_, q)| if q > 0.0 { -q * q.ln() } else { 0.0 }).sum();
    if residual > 0.0 {
        entropy -= residual * (residual / tail).ln();
    }

    let mut others: Vec<(u32, f64)> = dist[1..].to_vec();
    others.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let labels = [NliLabel::Entail, NliLabel::Contra, NliLabel::Neutral];
    let mut alternatives =
        vec![AlternativeToken { token_id: realized, probability: prob, nli_label: NliLabel::Entail }];
    alternatives.extend(others.iter().map(|&(id, q)| AlternativeToken {
        token_id: id,
        probability: q,
        nli_label: labels[rng.random_range(0..labels.len())],
    }));

    let grid = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> Vec<Vec<f64>> {
        (0..p.layers).map(|_| (0..p.heads).map(|_| uniform(rng, lo, hi)).collect()).collect()
    };
    let attn_diag = grid(rng, 0.05, 0.6);
    let attn_prev = if t == 0 { Vec::new() } else { grid(rng, 0.05, 0.9) };

    TokenStep {
        logprob_cond: lp,
        logprob_uncond: Some(lp + uniform(rng, 0.05, 1.0).ln()),
        entropy: Some(entropy),
        dist: Some(dist),
        support_size: Some(u64::from(VOCAB)),
        alternatives: Some(alternatives),
        loo_similarity: Some(uniform(rng, 0.0, 1.0)),
        attn_diag: Some(attn_diag),
        attn_prev: Some(attn_prev),
        attn_from_last: Some(uniform(rng, 0.0, 1.0)),
    }
}

/// Cluster index of each sample; harder instances spread over more clusters.
fn cluster_assignment(s: usize, difficulty: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let spread = difficulty / 2.5 * (s as f64 - 1.0) * uniform(rng, 0.5, 1.0);
    let count = (1 + spread.round() as usize).clamp(1, s);
    let mut out: Vec<usize> = (0..count).collect();
    out.extend((count..s).map(|_| rng.random_range(0..count)));
    out.shuffle(rng);
    out
}

fn sample(
    rng: &mut ChaCha8Rng,
    template: &[usize],
    centroid: &[f64],
    difficulty: f64,
    agrees_with_greedy: bool,
) -> SampleRecord<f64> {
    let mut words = template.to_vec();
    if rng.random::<f64>() < 0.3 {
        let at = rng.random_range(0..words.len());
        words[at] = rng.random_range(0..WORDS.len());
    }
    let text = words.iter().map(|&w| WORDS[w]).collect::<Vec<_>>().join(" ");
    let token_logprobs: Vec<f64> = words.iter().map(|_| -difficulty * uniform(rng, 0.3, 1.5)).collect();
    let tokensar_logprobs = token_logprobs.iter().map(|&lp| lp * uniform(rng, 0.5, 1.0)).collect();
    let kernel_score = if agrees_with_greedy { uniform(rng, 0.8, 1.0) } else { uniform(rng, 0.0, 0.3) };
    let embedding = centroid.iter().map(|&c| c + 0.1 * normal(rng)).collect();
    SampleRecord {
        text,
        tokens: words.iter().map(|&w| w as u32).collect(),
        token_logprobs,
        tokensar_logprobs: Some(tokensar_logprobs),
        kernel_score: Some(kernel_score),
        embedding: Some(embedding),
    }
}

#[allow(clippy::needless_range_loop)]
fn symmetric(
    k: usize,
    rng: &mut ChaCha8Rng,
    diag: f64,
    same: impl Fn(usize, usize) -> bool,
    hi: (f64, f64),
    lo: (f64, f64),
) -> Vec<Vec<f64>> {
    let mut m = vec![vec![diag; k]; k];
    for i in 0..k {
        for j in 0..i {
            let (a, b) = if same(i, j) { hi } else { lo };
            let v = uniform(rng, a, b);
            (m[i][j], m[j][i]) = (v, v);
        }
    }
    m
}

fn relations(clusters: &[usize], rng: &mut ChaCha8Rng) -> RelationMatrices<f64> {
    let s = clusters.len();
    let same = |i: usize, j: usize| clusters[i] == clusters[j];
    let directed = |rng: &mut ChaCha8Rng, hi: (f64, f64), lo: (f64, f64), diag: f64| -> Vec<Vec<f64>> {
        (0..s)
            .map(|i| {
                (0..s)
                    .map(|j| {
                        if i == j {
                            diag
                        } else {
                            let (a, b) = if same(i, j) { hi } else { lo };
                            uniform(rng, a, b)
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let entail = directed(rng, (0.8, 1.0), (0.0, 0.2), 1.0);
    let contra = directed(rng, (0.0, 0.05), (0.3, 0.9), 0.0);
    let soft_entail = directed(rng, (0.7, 1.0), (0.0, 0.3), 1.0);
    // Index 0 of sent_sim is the greedy response, which sits in cluster 0.
    let with_greedy = |i: usize| if i == 0 { 0 } else { clusters[i - 1] };
    let sent_sim = symmetric(s + 1, rng, 1.0, |i, j| with_greedy(i) == with_greedy(j), (0.7, 1.0), (0.0, 0.4));
    let sample_sim = symmetric(s, rng, 1.0, same, (0.7, 1.0), (0.0, 0.4));
    let bidir_entail_label = (0..s).map(|i| (0..s).map(|j| same(i, j)).collect()).collect();
    RelationMatrices {
        entail,
        contra,
        soft_entail,
        sent_sim,
        sent_sim_includes_greedy: true,
        sample_sim,
        bidir_entail_label,
    }
}
