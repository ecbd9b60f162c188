use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::density::{DensityConfig, KernelKind, Ridge};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParamError {
    #[error("unknown parameter `{0}`")]
    UnknownKey(String),
    #[error("parameter `{key}`: {reason}")]
    BadValue { key: String, reason: String },
}

/// Hyperparameters of every estimator, addressed by flat dotted keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub probability_floor: f64,
    pub renyi_alpha: f64,
    pub renyi_tau: f64,
    pub fisher_rao_tau: f64,
    pub cpmi_tau_gate: f64,
    pub cpmi_lambda: f64,
    pub ccp_k: usize,
    pub sentence_sar_tau: f64,
    pub sar_tau: f64,
    pub attention_eps: f64,
    pub rauq_alpha: f64,
    pub eigenscore_reg: f64,
    pub kle_t: f64,
    /// Eigenvalue cutoff on the normalized Laplacian for Eccentricity.
    pub eccentricity_threshold: f64,
    /// Fixed eigenvector count; overrides the threshold when set.
    pub eccentricity_k: Option<usize>,
    pub density: DensityConfig,
}

impl Default for EstimatorParams {
    fn default() -> Self {
        Self {
            probability_floor: 1e-12,
            renyi_alpha: 0.5,
            renyi_tau: 2.0,
            fisher_rao_tau: 2.0,
            cpmi_tau_gate: 0.0656,
            cpmi_lambda: 3.599,
            ccp_k: 10,
            sentence_sar_tau: 1.0,
            sar_tau: 1.0,
            attention_eps: 1e-12,
            rauq_alpha: 0.5,
            eigenscore_reg: 1e-3,
            kle_t: 0.3,
            eccentricity_threshold: 0.9,
            eccentricity_k: None,
            density: DensityConfig::default(),
        }
    }
}

fn num(key: &str, value: &str) -> Result<f64, ParamError> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| ParamError::BadValue { key: key.into(), reason: format!("expected a number, got {value:?}") })
}

fn positive(key: &str, value: &str) -> Result<f64, ParamError> {
    let v = num(key, value)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(ParamError::BadValue { key: key.into(), reason: "must be positive".into() })
    }
}

fn unit(key: &str, value: &str) -> Result<f64, ParamError> {
    let v = num(key, value)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(ParamError::BadValue { key: key.into(), reason: "must lie in [0, 1]".into() })
    }
}

fn count(key: &str, value: &str) -> Result<usize, ParamError> {
    value
        .trim()
        .parse::<usize>()
        .map_err(|_| ParamError::BadValue { key: key.into(), reason: format!("expected a count, got {value:?}") })
}

impl EstimatorParams {
    pub const KEYS: &'static [&'static str] = &[
        "probability_floor",
        "renyi.alpha",
        "renyi.tau",
        "fisher_rao.tau",
        "cpmi.tau_gate",
        "cpmi.lambda",
        "ccp.k",
        "sentence_sar.tau",
        "sar.tau",
        "attention_score.eps",
        "rauq.alpha",
        "eigenscore.reg",
        "kle.t",
        "eccentricity.threshold",
        "eccentricity.k",
        "density.ridge",
        "density.ridge_mode",
        "rde.kernel",
        "rde.components",
        "rde.support_fraction",
        "rde.restarts",
        "rde.seed",
    ];

    /// Sets one parameter from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ParamError> {
        match key {
            "probability_floor" => self.probability_floor = positive(key, value)?,
            "renyi.alpha" => {
                let a = positive(key, value)?;
                if a == 1.0 {
                    return Err(ParamError::BadValue {
                        key: key.into(),
                        reason: "alpha = 1 is not a Renyi order".into(),
                    });
                }
                self.renyi_alpha = a;
            }
            "renyi.tau" => self.renyi_tau = positive(key, value)?,
            "fisher_rao.tau" => self.fisher_rao_tau = positive(key, value)?,
            "cpmi.tau_gate" => self.cpmi_tau_gate = num(key, value)?,
            "cpmi.lambda" => self.cpmi_lambda = num(key, value)?,
            "ccp.k" => {
                self.ccp_k = count(key, value)?;
                if self.ccp_k == 0 {
                    return Err(ParamError::BadValue { key: key.into(), reason: "must be at least 1".into() });
                }
            }
            "sentence_sar.tau" => self.sentence_sar_tau = positive(key, value)?,
            "sar.tau" => self.sar_tau = positive(key, value)?,
            "attention_score.eps" => self.attention_eps = positive(key, value)?,
            "rauq.alpha" => self.rauq_alpha = unit(key, value)?,
            "eigenscore.reg" => self.eigenscore_reg = positive(key, value)?,
            "kle.t" => self.kle_t = positive(key, value)?,
            "eccentricity.threshold" => self.eccentricity_threshold = num(key, value)?,
            "eccentricity.k" => {
                let k = count(key, value)?;
                self.eccentricity_k = (k > 0).then_some(k);
            }
            "density.ridge" => {
                let r = num(key, value)?;
                if r < 0.0 {
                    return Err(ParamError::BadValue { key: key.into(), reason: "must be non-negative".into() });
                }
                self.density.ridge = match self.density.ridge {
                    Ridge::Absolute(_) => Ridge::Absolute(r),
                    _ => Ridge::Relative(r),
                };
            }
            "density.ridge_mode" => {
                let r = match self.density.ridge {
                    Ridge::Relative(r) | Ridge::Absolute(r) => r,
                    Ridge::None => 1e-6,
                };
                self.density.ridge = match value.trim() {
                    "relative" => Ridge::Relative(r),
                    "absolute" => Ridge::Absolute(r),
                    "none" => Ridge::None,
                    other => {
                        return Err(ParamError::BadValue {
                            key: key.into(),
                            reason: format!("expected relative, absolute or none, got {other:?}"),
                        })
                    }
                };
            }
            "rde.kernel" => {
                self.density.kernel = match value.trim() {
                    "rbf" => KernelKind::Rbf,
                    "linear" => KernelKind::Linear,
                    other => {
                        return Err(ParamError::BadValue {
                            key: key.into(),
                            reason: format!("unknown kernel {other:?}"),
                        })
                    }
                }
            }
            "rde.components" => {
                let c = count(key, value)?;
                self.density.components = (c > 0).then_some(c);
            }
            "rde.support_fraction" => {
                let f = unit(key, value)?;
                if f <= 0.5 {
                    return Err(ParamError::BadValue { key: key.into(), reason: "must exceed 0.5".into() });
                }
                self.density.support_fraction = Some(f);
            }
            "rde.restarts" => self.density.restarts = count(key, value)?.max(1),
            "rde.seed" => {
                self.density.seed = value.trim().parse().map_err(|_| ParamError::BadValue {
                    key: key.into(),
                    reason: format!("expected an unsigned integer, got {value:?}"),
                })?
            }
            _ => return Err(ParamError::UnknownKey(key.into())),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_published_settings() {
        let p = EstimatorParams::default();
        assert_eq!((p.renyi_alpha, p.renyi_tau, p.fisher_rao_tau), (0.5, 2.0, 2.0));
        assert_eq!((p.cpmi_tau_gate, p.cpmi_lambda), (0.0656, 3.599));
        assert_eq!(p.ccp_k, 10);
        assert_eq!(p.kle_t, 0.3);
    }

    #[test]
    fn every_listed_key_is_settable() {
        let sample = |k: &str| match k {
            "density.ridge_mode" => "absolute",
            "rde.kernel" => "linear",
            "rde.support_fraction" | "rauq.alpha" => "0.75",
            "ccp.k" | "eccentricity.k" | "rde.components" | "rde.restarts" | "rde.seed" => "3",
            _ => "0.25",
        };
        for key in EstimatorParams::KEYS {
            let mut p = EstimatorParams::default();
            p.set(key, sample(key)).unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }

    #[test]
    fn rejects_unknown_and_bad_values() {
        let mut p = EstimatorParams::default();
        assert_eq!(p.set("renyi.beta", "1"), Err(ParamError::UnknownKey("renyi.beta".into())));
        assert!(p.set("renyi.alpha", "1").is_err());
        assert!(p.set("kle.t", "-1").is_err());
        assert!(p.set("rde.kernel", "poly").is_err());
    }
}
