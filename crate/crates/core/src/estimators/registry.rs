//! Stable estimator identifiers and dispatch.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::blackbox::{self, EigenSelection, GraphMode};
use super::density::{huq, rde_score, relative_md, DensityModels};
use super::internal::{self, AttentionExtract};
use super::lexical::{lexical_similarity, LexicalMetric};
use super::logit::{self, DivergenceMode, PTrueVariant, PmiMode};
use super::sample;
use super::{Estimate, EstimateError, EstimatorParams};
use crate::trace::{require, Capability, GenerationTrace};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Information,
    Sample,
    Internal,
    Training,
    Reflexive,
    Blackbox,
}

impl Family {
    pub const ALL: [Family; 6] =
        [Family::Information, Family::Sample, Family::Internal, Family::Training, Family::Reflexive, Family::Blackbox];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Information => "information",
            Family::Sample => "sample",
            Family::Internal => "internal",
            Family::Training => "training",
            Family::Reflexive => "reflexive",
            Family::Blackbox => "blackbox",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL.into_iter().find(|f| f.as_str() == s).ok_or_else(|| format!("unknown family {s:?}"))
    }
}

/// Direction of a raw kernel output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Larger means more uncertain.
    Uncertainty,
    /// Larger means more confident; negated before analysis.
    Confidence,
}

impl Orientation {
    pub fn to_uncertainty<F: Real>(self, raw: F) -> F {
        match self {
            Orientation::Uncertainty => raw,
            Orientation::Confidence => -raw,
        }
    }
}

macro_rules! estimators {
    ($( $variant:ident => $id:literal, $name:literal, $family:ident, $orient:ident, [$($cap:ident),*]; )*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum EstimatorId { $($variant),* }

        impl EstimatorId {
            pub const ALL: &'static [EstimatorId] = &[$(EstimatorId::$variant),*];

            /// Short stable identifier used in files and on the command line.
            pub fn id(self) -> &'static str {
                match self { $(EstimatorId::$variant => $id),* }
            }

            /// Published display name.
            pub fn display_name(self) -> &'static str {
                match self { $(EstimatorId::$variant => $name),* }
            }

            pub fn family(self) -> Family {
                match self { $(EstimatorId::$variant => Family::$family),* }
            }

            pub fn orientation(self) -> Orientation {
                match self { $(EstimatorId::$variant => Orientation::$orient),* }
            }

            /// Trace inputs the estimator reads; it abstains unless all are present.
            pub fn capabilities(self) -> &'static [Capability] {
                match self { $(EstimatorId::$variant => &[$(Capability::$cap),*]),* }
            }
        }
    };
}

estimators! {
    Msp => "msp", "Maximum Seq. Probability (MSP)", Information, Uncertainty, [Logits];
    Ppl => "ppl", "Perplexity (PPL)", Information, Uncertainty, [Logits];
    Mte => "mte", "Mean Token Entropy (MTE)", Information, Uncertainty, [Dists];
    SelfCertainty => "self_certainty", "Self Certainty", Information, Uncertainty, [Dists];
    Renyi => "renyi", "Rényi Divergence", Information, Confidence, [Dists];
    FisherRao => "fisher_rao", "Fisher-Rao Distance", Information, Confidence, [Dists];
    Pmi => "pmi", "Pointwise Mutual Info. (PMI)", Information, Uncertainty, [Logits, UncondLogits];
    Cpmi => "cpmi", "Conditional PMI", Information, Uncertainty, [Logits, UncondLogits, Dists];
    TokenSar => "token_sar", "Token SAR", Information, Uncertainty, [Logits, LooSim];
    Ccp => "ccp", "Claim-Conditioned Probability (CCP)", Information, Uncertainty, [Alternatives];
    McSe => "mc_se", "Monte-Carlo Seq. Entropy", Sample, Uncertainty, [Samples];
    McNse => "mc_nse", "Monte-Carlo Norm. Seq. Entropy", Sample, Uncertainty, [Samples];
    SemanticEntropy => "semantic_entropy", "Semantic Entropy", Sample, Uncertainty, [Samples, Relations];
    SemanticDensity => "semantic_density", "Semantic Density", Sample, Uncertainty, [Logits, Samples];
    SentenceSar => "sentence_sar", "Sentence SAR", Sample, Uncertainty, [Samples, Relations];
    Sar => "sar", "SAR", Sample, Uncertainty, [Samples, Relations];
    CocoaMsp => "cocoa_msp", "Cocoa MSP", Sample, Uncertainty, [Logits, Relations];
    CocoaPpl => "cocoa_ppl", "Cocoa PPL", Sample, Uncertainty, [Logits, Relations];
    CocoaMte => "cocoa_mte", "Cocoa MTE", Sample, Uncertainty, [Dists, Relations];
    AttentionScore => "attention_score", "Attention Score", Internal, Uncertainty, [Attention];
    Rauq => "rauq", "RAUQ", Internal, Uncertainty, [Logits, Attention];
    Csl => "csl", "CSL", Internal, Uncertainty, [Logits, Attention];
    EigenScore => "eigenscore", "EigenScore", Internal, Uncertainty, [Embeddings];
    Md => "md", "Mahalanobis Distance (MD)", Training, Uncertainty, [Embeddings];
    Rmd => "rmd", "Relative MD (RMD)", Training, Uncertainty, [Embeddings];
    Rde => "rde", "Robust Density Estimation (RDE)", Training, Uncertainty, [Embeddings];
    HuqMd => "huq_md", "HUQ-MD", Training, Uncertainty, [Logits, Embeddings];
    HuqRmd => "huq_rmd", "HUQ-RMD", Training, Uncertainty, [Logits, Embeddings];
    PTrue => "ptrue", "P(True)", Reflexive, Uncertainty, [Reflexive];
    PTrueSampling => "ptrue_sampling", "P(True) Sampling", Reflexive, Uncertainty, [Reflexive];
    PTrueEmpirical => "ptrue_empirical", "P(True) Empirical", Reflexive, Uncertainty, [Reflexive];
    NumSet => "num_set", "NumSet", Blackbox, Uncertainty, [Relations];
    LabelProb => "label_prob", "LabelProb", Blackbox, Uncertainty, [Relations];
    Kle => "kle", "Kernel Language Entropy (KLE)", Blackbox, Uncertainty, [Relations];
    EigValLapEntail => "eigvallap_nli_entail", "EigValLap NLI (entail)", Blackbox, Uncertainty, [Relations];
    EigValLapContra => "eigvallap_nli_contra", "EigValLap NLI (contra)", Blackbox, Uncertainty, [Relations];
    EigValLapJaccard => "eigvallap_jaccard", "EigValLap Jaccard", Blackbox, Uncertainty, [Samples];
    EccentricityEntail => "eccentricity_nli_entail", "Eccentricity NLI (entail)", Blackbox, Uncertainty, [Relations];
    EccentricityContra => "eccentricity_nli_contra", "Eccentricity NLI (contra)", Blackbox, Uncertainty, [Relations];
    EccentricityJaccard => "eccentricity_jaccard", "Eccentricity Jaccard", Blackbox, Uncertainty, [Samples];
    DegMatEntail => "degmat_nli_entail", "DegMat NLI (entail)", Blackbox, Uncertainty, [Relations];
    DegMatContra => "degmat_nli_contra", "DegMat NLI (contra)", Blackbox, Uncertainty, [Relations];
    DegMatJaccard => "degmat_jaccard", "DegMat Jaccard", Blackbox, Uncertainty, [Samples];
    Luq => "luq", "LUQ", Blackbox, Uncertainty, [Relations];
    LexSimRougeL => "lexsim_rougel", "Lexical Sim. (ROUGE-L)", Blackbox, Uncertainty, [Samples];
    LexSimBleu => "lexsim_bleu", "Lexical Sim. (BLEU)", Blackbox, Uncertainty, [Samples];
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown estimator {given:?}; valid ids: {valid}")]
pub struct UnknownEstimator {
    pub given: String,
    pub valid: String,
}

impl FromStr for EstimatorId {
    type Err = UnknownEstimator;

    /// Accepts the short id or the display name, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        EstimatorId::ALL
            .iter()
            .copied()
            .find(|e| e.id().eq_ignore_ascii_case(t) || e.display_name().eq_ignore_ascii_case(t))
            .ok_or_else(|| UnknownEstimator {
                given: s.to_string(),
                valid: EstimatorId::ALL.iter().map(|e| e.id()).collect::<Vec<_>>().join(", "),
            })
    }
}

/// Parses a comma-separated selection of ids, display names, family names
/// or `all`. Order follows the registry, duplicates collapse.
pub fn parse_selection(spec: &str) -> Result<Vec<EstimatorId>, UnknownEstimator> {
    let mut chosen = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part.eq_ignore_ascii_case("all") {
            chosen.extend_from_slice(EstimatorId::ALL);
        } else if let Ok(f) = part.to_ascii_lowercase().parse::<Family>() {
            chosen.extend(EstimatorId::ALL.iter().filter(|e| e.family() == f));
        } else {
            chosen.push(part.parse()?);
        }
    }
    chosen.sort();
    chosen.dedup();
    Ok(chosen)
}

/// Shared, read-only inputs of a scoring run.
#[derive(Debug, Clone, Copy)]
pub struct ScoringContext<'a, F> {
    pub params: &'a EstimatorParams,
    pub models: Option<&'a DensityModels<F>>,
}

impl<'a, F: Real> ScoringContext<'a, F> {
    pub fn new(params: &'a EstimatorParams, models: Option<&'a DensityModels<F>>) -> Self {
        Self { params, models }
    }

    fn models(&self) -> Result<&'a DensityModels<F>, EstimateError> {
        self.models.ok_or_else(|| EstimateError::missing("density models"))
    }
}

fn relations<F>(t: &GenerationTrace<F>) -> Result<&crate::trace::RelationMatrices<F>, EstimateError> {
    t.relations.as_ref().ok_or_else(|| EstimateError::missing("relations"))
}

fn greedy<F>(t: &GenerationTrace<F>) -> Result<&[F], EstimateError> {
    t.greedy_embedding.as_deref().ok_or_else(|| EstimateError::missing("greedy_embedding"))
}

fn density<F: Real>(r: Result<F, super::density::DensityError>) -> Estimate<F> {
    r.map_err(|e| EstimateError::invalid(e.to_string()))
}

impl EstimatorId {
    /// Kernel output in its natural orientation, `None` when the estimator
    /// abstains on this trace.
    pub fn raw_score<F: Real>(
        self,
        trace: &GenerationTrace<F>,
        ctx: &ScoringContext<'_, F>,
    ) -> Result<Option<F>, EstimateError> {
        if !self.capabilities().iter().all(|&c| require(trace, c)) {
            return Ok(None);
        }
        match self.compute(trace, ctx) {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            Ok(v) => Err(EstimateError::invalid(format!("{} produced non-finite value {v}", self.id()))),
            Err(EstimateError::Missing(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Uncertainty-oriented score (confidence kernels negated).
    pub fn score<F: Real>(
        self,
        trace: &GenerationTrace<F>,
        ctx: &ScoringContext<'_, F>,
    ) -> Result<Option<F>, EstimateError> {
        Ok(self.raw_score(trace, ctx)?.map(|v| self.orientation().to_uncertainty(v)))
    }

    fn compute<F: Real>(self, t: &GenerationTrace<F>, ctx: &ScoringContext<'_, F>) -> Estimate<F> {
        use EstimatorId::*;
        let p = ctx.params;
        let lit = F::lit;
        let floor = lit(p.probability_floor);
        let steps = &t.response;
        match self {
            Msp => Ok(logit::nll_scores(steps)?.0),
            Ppl => Ok(logit::nll_scores(steps)?.1),
            Mte => logit::mean_token_entropy(steps),
            SelfCertainty => {
                logit::uniform_divergence(steps, DivergenceMode::SelfCertainty, lit(p.renyi_alpha), F::one(), floor)
            }
            Renyi => logit::mean_divergence(steps, DivergenceMode::Renyi, lit(p.renyi_alpha), lit(p.renyi_tau), floor),
            FisherRao => logit::mean_divergence(
                steps,
                DivergenceMode::FisherRao,
                lit(p.renyi_alpha),
                lit(p.fisher_rao_tau),
                floor,
            ),
            Pmi => logit::pmi_scores(steps, PmiMode::Pmi),
            Cpmi => {
                logit::pmi_scores(steps, PmiMode::Cpmi { tau_gate: lit(p.cpmi_tau_gate), lambda: lit(p.cpmi_lambda) })
            }
            TokenSar => logit::token_sar(steps),
            Ccp => logit::ccp(steps, p.ccp_k),
            McSe => sample::mc_entropy(&t.samples, false),
            McNse => sample::mc_entropy(&t.samples, true),
            SemanticEntropy => {
                let part = sample::cluster_semantic(&relations(t)?.bidir_entail_label)?;
                let lps: Vec<F> = t.samples.iter().map(|s| s.log_probability()).collect();
                sample::semantic_entropy(&part, &lps)
            }
            SemanticDensity => {
                let mut probs = Vec::with_capacity(t.samples.len());
                let mut kernels = Vec::with_capacity(t.samples.len());
                for (i, s) in t.samples.iter().enumerate() {
                    if s.token_logprobs.is_empty() {
                        return Err(EstimateError::invalid(format!("sample {i} has no tokens")));
                    }
                    probs.push((s.log_probability() / F::from_count(s.token_logprobs.len())).exp());
                    kernels.push(s.kernel_score.ok_or_else(|| EstimateError::missing("kernel_score"))?);
                }
                let greedy = (-logit::nll_scores(steps)?.1).exp();
                sample::semantic_density(&probs, &kernels, greedy)
            }
            SentenceSar => {
                let probs: Vec<F> = t.samples.iter().map(|s| s.log_probability().exp()).collect();
                sample::sentence_sar(&probs, &relations(t)?.sample_sim, lit(p.sentence_sar_tau), floor)
            }
            Sar => sample::sar(&t.samples, &relations(t)?.sample_sim, lit(p.sar_tau), floor),
            CocoaMsp => sample::cocoa(logit::nll_scores(steps)?.0, &relations(t)?.sent_sim),
            CocoaPpl => sample::cocoa(logit::nll_scores(steps)?.1, &relations(t)?.sent_sim),
            CocoaMte => sample::cocoa(logit::mean_token_entropy(steps)?, &relations(t)?.sent_sim),
            AttentionScore => internal::attention_score(&AttentionExtract::from_steps(steps)?, lit(p.attention_eps)),
            Rauq => internal::rauq(steps, &AttentionExtract::from_steps(steps)?, lit(p.rauq_alpha), floor),
            Csl => internal::csl(steps, &AttentionExtract::from_steps(steps)?),
            EigenScore => {
                let e: Vec<&[F]> = t
                    .samples
                    .iter()
                    .map(|s| s.embedding.as_deref().ok_or_else(|| EstimateError::missing("sample embedding")))
                    .collect::<Result<_, _>>()?;
                internal::eigenscore(&e, lit(p.eigenscore_reg))
            }
            Md => density(ctx.models()?.task.distance(greedy(t)?)),
            Rmd => {
                let m = ctx.models()?;
                let bg = m.background.as_ref().ok_or_else(|| EstimateError::missing("background model"))?;
                density(relative_md(greedy(t)?, &m.task, bg))
            }
            Rde => {
                let m = ctx.models()?.rde.as_ref().ok_or_else(|| EstimateError::missing("robust density model"))?;
                density(rde_score(greedy(t)?, m))
            }
            HuqMd => {
                let m = ctx.models()?;
                let md = density(m.task.distance(greedy(t)?))?;
                Ok(huq(logit::nll_scores(steps)?.1, md, &m.ppl_ecdf, &m.md_ecdf))
            }
            HuqRmd => {
                let m = ctx.models()?;
                let (bg, table) = match (&m.background, &m.rmd_ecdf) {
                    (Some(b), Some(tb)) => (b, tb),
                    _ => return Err(EstimateError::missing("background model")),
                };
                let rmd = density(relative_md(greedy(t)?, &m.task, bg))?;
                Ok(huq(logit::nll_scores(steps)?.1, rmd, &m.ppl_ecdf, table))
            }
            PTrue => logit::ptrue_nll(t.reflexive.as_ref(), PTrueVariant::PTrue, floor),
            PTrueSampling => logit::ptrue_nll(t.reflexive.as_ref(), PTrueVariant::PTrueSampling, floor),
            PTrueEmpirical => blackbox::ptrue_empirical(t.reflexive.as_ref()),
            NumSet => Ok(blackbox::num_set(&sample::cluster_semantic(&relations(t)?.bidir_entail_label)?)),
            LabelProb => blackbox::label_prob(&sample::cluster_semantic(&relations(t)?.bidir_entail_label)?),
            Kle => blackbox::kle(&blackbox::build_graph(t, GraphMode::NliEntail)?, lit(p.kle_t)),
            EigValLapEntail | EigValLapContra | EigValLapJaccard => {
                blackbox::eig_val_laplacian(&blackbox::build_graph(t, self.graph_mode())?)
            }
            EccentricityEntail | EccentricityContra | EccentricityJaccard => {
                let sel = match p.eccentricity_k {
                    Some(k) => EigenSelection::Smallest(k),
                    None => EigenSelection::Threshold(p.eccentricity_threshold),
                };
                blackbox::eccentricity(&blackbox::build_graph(t, self.graph_mode())?, sel)
            }
            DegMatEntail | DegMatContra | DegMatJaccard => {
                blackbox::degmat(&blackbox::build_graph(t, self.graph_mode())?)
            }
            Luq => blackbox::luq(&relations(t)?.soft_entail),
            LexSimRougeL | LexSimBleu => {
                let metric = if self == LexSimRougeL { LexicalMetric::RougeL } else { LexicalMetric::Bleu };
                let texts: Vec<&str> = t.samples.iter().map(|s| s.text.as_str()).collect();
                lexical_similarity(&texts, metric)
            }
        }
    }

    fn graph_mode(self) -> GraphMode {
        use EstimatorId::*;
        match self {
            EigValLapContra | EccentricityContra | DegMatContra => GraphMode::NliContra,
            EigValLapJaccard | EccentricityJaccard | DegMatJaccard => GraphMode::Jaccard,
            _ => GraphMode::NliEntail,
        }
    }
}
