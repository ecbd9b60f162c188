use uqtrace_core::estimators::registry::ScoringContext;
use uqtrace_core::synth::{generate, SynthParams};
use uqtrace_core::trace::{restrict, Capability};
use uqtrace_core::{EstimatorId, EstimatorParams, Models};

fn fixture() -> (uqtrace_core::synth::SynthCorpus, Models, EstimatorParams) {
    let corpus = generate(&SynthParams { n: 25, n_train: 40, n_background: 20, ..Default::default() }, 11).unwrap();
    let params = EstimatorParams::default();
    let models = Models::fit(&corpus.train, &corpus.background, &params.density).unwrap();
    (corpus, models, params)
}

#[test]
fn every_estimator_scores_full_synthetic_traces() {
    let (corpus, models, params) = fixture();
    let ctx = ScoringContext::new(&params, Some(&models));
    for &e in EstimatorId::ALL {
        for t in &corpus.eval {
            let s = e.score(t, &ctx).unwrap_or_else(|err| panic!("{e} on {}: {err}", t.instance_id));
            assert!(s.is_some_and(f64::is_finite), "{e} abstained on {}", t.instance_id);
        }
    }
}

#[test]
fn estimators_read_only_declared_capabilities() {
    let (corpus, models, params) = fixture();
    let ctx = ScoringContext::new(&params, Some(&models));
    for &e in EstimatorId::ALL {
        for t in &corpus.eval {
            let full = e.score(t, &ctx).unwrap();
            let narrow = e.score(&restrict(t, e.capabilities()), &ctx).unwrap();
            assert_eq!(full.map(f64::to_bits), narrow.map(f64::to_bits), "{e} on {}", t.instance_id);
        }
    }
}

#[test]
fn dropping_any_declared_capability_abstains() {
    let (corpus, models, params) = fixture();
    let ctx = ScoringContext::new(&params, Some(&models));
    let t = &corpus.eval[0];
    for &e in EstimatorId::ALL {
        for &drop in e.capabilities() {
            // Conditional log-probabilities are mandatory, so they cannot be absent.
            if drop == Capability::Logits {
                continue;
            }
            let keep: Vec<Capability> = Capability::ALL.into_iter().filter(|&c| c != drop).collect();
            assert_eq!(e.score(&restrict(t, &keep), &ctx).unwrap(), None, "{e} without {drop}");
        }
    }
}

#[test]
fn training_estimators_abstain_without_models() {
    let (corpus, _, params) = fixture();
    let ctx = ScoringContext::new(&params, None);
    for &e in EstimatorId::ALL {
        let s = e.score(&corpus.eval[0], &ctx).unwrap();
        assert_eq!(s.is_none(), e.family() == uqtrace_core::Family::Training, "{e}");
    }
}
