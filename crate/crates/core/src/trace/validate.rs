use std::collections::HashMap;

use super::{GenerationTrace, NliLabel, QualityKind, Split, TraceError};
use crate::Real;

/// Invariant violation on a named field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub reason: String,
}

impl FieldError {
    fn new(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { field: field.into(), reason: reason.into() }
    }
}

type Check = Result<(), FieldError>;

const LOGPROB_SLACK: f64 = 1e-9;
const PROB_SLACK: f64 = 1e-9;
const DIST_MASS_SLACK: f64 = 1e-6;
const ALT_MATCH_TOL: f64 = 1e-6;
const DIAG_TOL: f64 = 1e-9;

fn logprob<F: Real>(field: impl FnOnce() -> String, x: F) -> Check {
    if !x.is_finite() {
        return Err(FieldError::new(field(), format!("non-finite log-probability {x}")));
    }
    if x > F::lit(LOGPROB_SLACK) {
        return Err(FieldError::new(field(), format!("log-probability {x} is positive")));
    }
    Ok(())
}

fn probability<F: Real>(field: impl FnOnce() -> String, x: F) -> Check {
    let slack = F::lit(PROB_SLACK);
    if x.is_nan() || x < -slack || x > F::one() + slack {
        return Err(FieldError::new(field(), format!("probability {x} outside [0, 1]")));
    }
    Ok(())
}

fn unit_matrix<F: Real>(name: &str, m: &[Vec<F>], size: usize, unit_diagonal: bool) -> Check {
    if m.len() != size || m.iter().any(|r| r.len() != size) {
        return Err(FieldError::new(name, format!("expected a {size}x{size} matrix")));
    }
    for (i, row) in m.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            probability(|| format!("{name}[{i}][{j}]"), x)?;
        }
        if unit_diagonal && (row[i] - F::one()).abs() > F::lit(DIAG_TOL) {
            return Err(FieldError::new(format!("{name}[{i}][{i}]"), "similarity diagonal must equal 1"));
        }
    }
    Ok(())
}

/// Checks every type invariant of a single trace.
#[allow(clippy::needless_range_loop)]
pub fn validate_trace<F: Real>(trace: &GenerationTrace<F>) -> Result<(), FieldError> {
    if trace.instance_id.is_empty() {
        return Err(FieldError::new("instance_id", "empty identifier"));
    }
    if trace.response.is_empty() {
        return Err(FieldError::new("response", "response must contain at least one token"));
    }
    match (&trace.quality, trace.split) {
        (None, Split::Eval) => return Err(FieldError::new("quality", "eval instances need a quality label")),
        (Some(q), _) => {
            if !(q.value >= F::zero() && q.value <= F::one()) {
                return Err(FieldError::new("quality.value", format!("{} outside [0, 1]", q.value)));
            }
            if q.kind == QualityKind::Binary && q.value != F::zero() && q.value != F::one() {
                return Err(FieldError::new("quality.value", "binary quality must be 0 or 1"));
            }
        }
        (None, Split::Train) => {}
    }

    let mut layer_shape: Option<(usize, usize)> = None;
    for (t, step) in trace.response.iter().enumerate() {
        let at = |f: &str| format!("response[{t}].{f}");
        logprob(|| at("logprob_cond"), step.logprob_cond)?;
        if let Some(lp) = step.logprob_uncond {
            logprob(|| at("logprob_uncond"), lp)?;
        }
        if let Some(h) = step.entropy {
            if !h.is_finite() || h < -F::lit(PROB_SLACK) {
                return Err(FieldError::new(at("entropy"), format!("entropy {h} must be finite and >= 0")));
            }
        }
        if let Some(dist) = &step.dist {
            let mut mass = F::zero();
            for (k, &(_, p)) in dist.iter().enumerate() {
                probability(|| format!("response[{t}].dist[{k}]"), p)?;
                mass += p;
            }
            if mass > F::one() + F::lit(DIST_MASS_SLACK) {
                return Err(FieldError::new(at("dist"), format!("probabilities sum to {mass} > 1")));
            }
            if let Some(size) = step.support_size {
                if (size as usize) < dist.len() {
                    return Err(FieldError::new(at("support_size"), "smaller than the number of dist entries"));
                }
            }
        } else if step.support_size.is_some() {
            return Err(FieldError::new(at("support_size"), "given without dist"));
        }
        if let Some(alts) = &step.alternatives {
            for (k, a) in alts.iter().enumerate() {
                probability(|| format!("response[{t}].alternatives[{k}].probability"), a.probability)?;
            }
            if let Some(first) = alts.first() {
                if first.nli_label != NliLabel::Entail {
                    return Err(FieldError::new(
                        at("alternatives[0].nli_label"),
                        "realized token must be labeled entail",
                    ));
                }
                if (first.probability - step.logprob_cond.exp()).abs() > F::lit(ALT_MATCH_TOL) {
                    return Err(FieldError::new(
                        at("alternatives[0].probability"),
                        "first alternative must be the realized token",
                    ));
                }
            }
            if alts.len() > 1 && alts[1..].windows(2).any(|w| w[0].probability < w[1].probability) {
                return Err(FieldError::new(at("alternatives"), "alternatives not sorted by descending probability"));
            }
        }
        if let Some(s) = step.loo_similarity {
            probability(|| at("loo_similarity"), s)?;
        }
        if let Some(a) = step.attn_from_last {
            probability(|| at("attn_from_last"), a)?;
        }
        if let Some(diag) = &step.attn_diag {
            let heads = diag.first().map_or(0, Vec::len);
            if diag.is_empty() || heads == 0 || diag.iter().any(|l| l.len() != heads) {
                return Err(FieldError::new(at("attn_diag"), "expected a non-empty [layer][head] array"));
            }
            match layer_shape {
                None => layer_shape = Some((diag.len(), heads)),
                Some(shape) if shape != (diag.len(), heads) => {
                    return Err(FieldError::new(at("attn_diag"), "layer/head shape changes across positions"))
                }
                _ => {}
            }
            for (l, row) in diag.iter().enumerate() {
                for (h, &x) in row.iter().enumerate() {
                    probability(|| format!("response[{t}].attn_diag[{l}][{h}]"), x)?;
                }
            }
        }
        if let Some(prev) = &step.attn_prev {
            if t == 0 && !prev.is_empty() {
                return Err(FieldError::new(at("attn_prev"), "first position has no previous token"));
            }
            if t > 0 {
                let shape = (prev.len(), prev.first().map_or(0, Vec::len));
                if prev.is_empty() || prev.iter().any(|l| l.len() != shape.1) || shape.1 == 0 {
                    return Err(FieldError::new(at("attn_prev"), "expected a non-empty [layer][head] array"));
                }
                match layer_shape {
                    None => layer_shape = Some(shape),
                    Some(s) if s != shape => {
                        return Err(FieldError::new(at("attn_prev"), "layer/head shape changes across positions"))
                    }
                    _ => {}
                }
                for (l, row) in prev.iter().enumerate() {
                    for (h, &x) in row.iter().enumerate() {
                        probability(|| format!("response[{t}].attn_prev[{l}][{h}]"), x)?;
                    }
                }
            }
        }
    }

    let mut emb_dim: Option<usize> = None;
    for (s, sample) in trace.samples.iter().enumerate() {
        let at = |f: &str| format!("samples[{s}].{f}");
        if sample.token_logprobs.len() != sample.tokens.len() {
            return Err(FieldError::new(at("token_logprobs"), "length differs from tokens"));
        }
        for (k, &lp) in sample.token_logprobs.iter().enumerate() {
            logprob(|| format!("samples[{s}].token_logprobs[{k}]"), lp)?;
        }
        if let Some(ts) = &sample.tokensar_logprobs {
            if ts.len() != sample.tokens.len() {
                return Err(FieldError::new(at("tokensar_logprobs"), "length differs from tokens"));
            }
            for (k, &lp) in ts.iter().enumerate() {
                logprob(|| format!("samples[{s}].tokensar_logprobs[{k}]"), lp)?;
            }
        }
        if let Some(k) = sample.kernel_score {
            probability(|| at("kernel_score"), k)?;
        }
        if let Some(e) = &sample.embedding {
            if e.iter().any(|x| !x.is_finite()) {
                return Err(FieldError::new(at("embedding"), "non-finite entry"));
            }
            match emb_dim {
                None => emb_dim = Some(e.len()),
                Some(d) if d != e.len() => {
                    return Err(FieldError::new(at("embedding"), format!("dimension {} differs from {d}", e.len())))
                }
                _ => {}
            }
        }
    }
    if let Some(e) = &trace.greedy_embedding {
        if e.is_empty() || e.iter().any(|x| !x.is_finite()) {
            return Err(FieldError::new("greedy_embedding", "empty or non-finite"));
        }
    }

    if let Some(rel) = &trace.relations {
        let s = trace.samples.len();
        if s == 0 {
            return Err(FieldError::new("relations", "relations given without samples"));
        }
        unit_matrix("relations.entail", &rel.entail, s, false)?;
        unit_matrix("relations.contra", &rel.contra, s, false)?;
        unit_matrix("relations.soft_entail", &rel.soft_entail, s, false)?;
        unit_matrix("relations.sample_sim", &rel.sample_sim, s, true)?;
        let k = s + usize::from(rel.sent_sim_includes_greedy);
        unit_matrix("relations.sent_sim", &rel.sent_sim, k, true)?;
        let lab = &rel.bidir_entail_label;
        if lab.len() != s || lab.iter().any(|r| r.len() != s) {
            return Err(FieldError::new("relations.bidir_entail_label", format!("expected a {s}x{s} matrix")));
        }
        for i in 0..s {
            if !lab[i][i] {
                return Err(FieldError::new(
                    format!("relations.bidir_entail_label[{i}][{i}]"),
                    "diagonal must be true",
                ));
            }
            for j in 0..i {
                if lab[i][j] != lab[j][i] {
                    return Err(FieldError::new(
                        format!("relations.bidir_entail_label[{i}][{j}]"),
                        "mutual entailment must be symmetric",
                    ));
                }
            }
        }
    }

    if let Some(r) = &trace.reflexive {
        for (name, p) in [("reflexive.p_true", r.p_true), ("reflexive.p_true_sampling", r.p_true_sampling)] {
            if let Some(p) = p {
                if !(p > F::zero() && p <= F::one()) {
                    return Err(FieldError::new(name, format!("probability {p} outside (0, 1]")));
                }
            }
        }
        if let Some(flags) = &r.empirical_true_flags {
            if flags.is_empty() {
                return Err(FieldError::new("reflexive.empirical_true_flags", "needs at least one flag"));
            }
        }
    }
    Ok(())
}

/// Rejects duplicate instance ids and queries whose responses straddle
/// both splits.
pub fn check_split_integrity<'a, F: Real + 'a>(
    traces: impl IntoIterator<Item = &'a GenerationTrace<F>>,
) -> Result<(), TraceError> {
    let mut seen: HashMap<&str, Split> = HashMap::new();
    let mut queries: HashMap<&str, Split> = HashMap::new();
    for t in traces {
        if let Some(prev) = seen.insert(&t.instance_id, t.split) {
            let detail = if prev == t.split { "within one split" } else { "in both train and eval" };
            return Err(TraceError::Duplicate { instance_id: t.instance_id.clone(), detail: detail.into() });
        }
        if let Some(q) = &t.query_id {
            if let Some(&prev) = queries.get(q.as_str()) {
                if prev != t.split {
                    return Err(TraceError::Duplicate {
                        instance_id: t.instance_id.clone(),
                        detail: format!("query {q:?} has responses in both splits"),
                    });
                }
            } else {
                queries.insert(q, t.split);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{AlternativeToken, QualityLabel, SampleRecord};

    fn base() -> GenerationTrace<f64> {
        let mut t = GenerationTrace::from_logprobs("a", Split::Eval, &[-0.5, -1.0]);
        t.quality = Some(QualityLabel { value: 1.0, kind: QualityKind::Binary });
        t
    }

    #[test]
    fn accepts_minimal_trace() {
        assert_eq!(validate_trace(&base()), Ok(()));
    }

    #[test]
    fn rejects_positive_logprob() {
        let mut t = base();
        t.response[1].logprob_cond = 0.1;
        let err = validate_trace(&t).unwrap_err();
        assert_eq!(err.field, "response[1].logprob_cond");
    }

    #[test]
    fn rejects_non_binary_binary_quality() {
        let mut t = base();
        t.quality = Some(QualityLabel { value: 0.5, kind: QualityKind::Binary });
        assert_eq!(validate_trace(&t).unwrap_err().field, "quality.value");
    }

    #[test]
    fn rejects_unsorted_alternatives() {
        let mut t = base();
        let p0 = (-0.5f64).exp();
        t.response[0].alternatives = Some(vec![
            AlternativeToken { token_id: 1, probability: p0, nli_label: NliLabel::Entail },
            AlternativeToken { token_id: 2, probability: 0.1, nli_label: NliLabel::Contra },
            AlternativeToken { token_id: 3, probability: 0.2, nli_label: NliLabel::Neutral },
        ]);
        assert_eq!(validate_trace(&t).unwrap_err().field, "response[0].alternatives");
    }

    #[test]
    fn rejects_overfull_dist() {
        let mut t = base();
        t.response[0].dist = Some(vec![(0, 0.7), (1, 0.4)]);
        assert_eq!(validate_trace(&t).unwrap_err().field, "response[0].dist");
    }

    #[test]
    fn rejects_mismatched_sample_lengths() {
        let mut t = base();
        t.samples.push(SampleRecord {
            text: "x".into(),
            tokens: vec![1, 2],
            token_logprobs: vec![-1.0],
            tokensar_logprobs: None,
            kernel_score: None,
            embedding: None,
        });
        assert_eq!(validate_trace(&t).unwrap_err().field, "samples[0].token_logprobs");
    }

    #[test]
    fn split_integrity_flags_cross_split_ids() {
        let a = base();
        let mut b = base();
        b.split = Split::Train;
        let err = check_split_integrity([&a, &b]).unwrap_err();
        assert!(err.to_string().contains("both train and eval"));
    }

    #[test]
    fn split_integrity_flags_straddling_queries() {
        let mut a = base();
        a.query_id = Some("q".into());
        let mut b = base();
        b.instance_id = "b".into();
        b.split = Split::Train;
        b.query_id = Some("q".into());
        assert!(check_split_integrity([&a, &b]).is_err());
    }
}
