//! Run-wide settings shared by every command.

use crate::error::{Error, Result};
use crate::trace::{PreprocessConfig, DEFAULT_CUTOFF_HZ, DEFAULT_DESPIKE_Z};
use crate::turns::{DEFAULT_DELTA_BUMP, DEFAULT_EPSILON, DEFAULT_TURN_LEN};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Priors {
    Uniform,
    /// One weight per class in sorted label order; normalized before use.
    Weights(Vec<f64>),
}

/// Parsed from TOML; every key is optional.
///
/// ```toml
/// delta_bump = 0.15
/// epsilon = 0.02
/// cutoff_hz = 2.0
/// turn_len = 100
/// seed = 7
/// folds = 10
/// gmm_components = 2
/// gate_threshold = 0.0
/// priors = "uniform"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub delta_bump: f64,
    pub epsilon: f64,
    pub cutoff_hz: f64,
    pub despike_z: f64,
    pub turn_len: usize,
    pub seed: u64,
    pub folds: usize,
    pub trees: usize,
    pub gmm_components: usize,
    pub gate_threshold: f64,
    pub priors: Priors,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            delta_bump: DEFAULT_DELTA_BUMP,
            epsilon: DEFAULT_EPSILON,
            cutoff_hz: DEFAULT_CUTOFF_HZ,
            despike_z: DEFAULT_DESPIKE_Z,
            turn_len: DEFAULT_TURN_LEN,
            seed: 0,
            folds: 10,
            trees: crate::classify::DEFAULT_TREES,
            gmm_components: crate::enroll::DEFAULT_COMPONENTS,
            gate_threshold: crate::enroll::DEFAULT_GATE_THRESHOLD,
            priors: Priors::Uniform,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.epsilon > 0.0 && self.epsilon < self.delta_bump && self.delta_bump < 3.0) {
            return bad(format!("need 0 < epsilon < delta_bump < 3, got {} and {}", self.epsilon, self.delta_bump));
        }
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz.is_finite()) {
            return bad(format!("cutoff_hz must be positive, got {}", self.cutoff_hz));
        }
        if !(self.despike_z > 0.0) {
            return bad(format!("despike_z must be positive, got {}", self.despike_z));
        }
        if self.turn_len < 60 || !self.turn_len.is_multiple_of(5) {
            return bad(format!("turn_len must be >= 60 and divisible by 5, got {}", self.turn_len));
        }
        if self.folds < 2 {
            return bad(format!("folds must be >= 2, got {}", self.folds));
        }
        if self.trees == 0 || self.gmm_components == 0 {
            return bad("trees and gmm_components must be >= 1".into());
        }
        if !self.gate_threshold.is_finite() {
            return bad("gate_threshold must be finite".into());
        }
        if let Priors::Weights(w) = &self.priors {
            if w.is_empty() || w.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                return bad("prior weights must be positive".into());
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig { despike_z: self.despike_z, cutoff_hz: self.cutoff_hz }
    }

    /// Log priors for `n_classes`, or `None` for uniform.
    pub fn log_priors(&self, n_classes: usize) -> Result<Option<Vec<f64>>> {
        match &self.priors {
            Priors::Uniform => Ok(None),
            Priors::Weights(w) if w.len() == n_classes => {
                let total: f64 = w.iter().sum();
                Ok(Some(w.iter().map(|x| (x / total).ln()).collect()))
            }
            Priors::Weights(w) => Err(Error::DimensionMismatch { expected: n_classes, got: w.len() }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let config = RunConfig::default();
        config.validate().unwrap();
        assert_eq!(RunConfig::from_toml_str(&config.to_toml_string()).unwrap(), config);
        assert_eq!(RunConfig::from_toml_str("").unwrap(), config);
    }

    #[test]
    fn partial_and_invalid_files() {
        let c = RunConfig::from_toml_str("seed = 9\npriors = { weights = [1.0, 3.0] }").unwrap();
        assert_eq!(c.seed, 9);
        let lp = c.log_priors(2).unwrap().unwrap();
        assert!((lp[1] - 0.75f64.ln()).abs() < 1e-12);
        assert!(c.log_priors(3).is_err());
        assert!(RunConfig::from_toml_str("epsilon = 0.5").is_err());
        assert!(RunConfig::from_toml_str("turn_len = 99").is_err());
        assert!(RunConfig::from_toml_str("unknown = 1").is_err());
        assert!(RunConfig::from_toml_str("folds = 1").is_err());
    }
}
