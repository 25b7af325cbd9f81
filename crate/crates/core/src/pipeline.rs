//! Glue from raw traces to feature vectors, and the noise-injection countermeasure.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::{build_feature_vector, build_feature_vector_native, FeatureVector};
use crate::seed;
use crate::trace::{align_to_geo_frame, preprocess, ImuSample, RawTrace};
use crate::turns::{extract_turns, interpolate_turn, Extraction, TurnSegment};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Pre-process a trace and pull out its left and right turns.
pub fn extract(trace: &RawTrace, config: &RunConfig) -> Result<Extraction> {
    let aligned = preprocess(trace, &config.preprocess())?;
    extract_turns(&aligned, config.delta_bump, config.epsilon)
}

/// Feature vectors of `turns`, resampled to `config.turn_len` points unless
/// `interpolate` is false.
pub fn featurize(turns: &[TurnSegment], config: &RunConfig, interpolate: bool) -> Result<Vec<FeatureVector>> {
    turns
        .iter()
        .map(|turn| {
            if interpolate {
                build_feature_vector(&interpolate_turn(turn, config.turn_len)?)
            } else {
                build_feature_vector_native(turn)
            }
        })
        .collect()
}

pub fn trace_features(trace: &RawTrace, config: &RunConfig) -> Result<Vec<FeatureVector>> {
    featurize(&extract(trace, config)?.turns, config, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Always,
    /// Only while the unsmoothed yaw rate exceeds the bump threshold.
    OnBump,
}

impl FromStr for Trigger {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "always" => Ok(Trigger::Always),
            "on_bump" | "on-bump" => Ok(Trigger::OnBump),
            other => Err(Error::Parse(format!("unknown trigger {other:?}, expected always or on_bump"))),
        }
    }
}

/// Add seeded Gaussian noise to every gyroscope and accelerometer channel.
/// Untriggered samples are returned bit for bit.
pub fn perturb(trace: &RawTrace, noise_sd: f64, trigger: Trigger, delta_bump: f64, root_seed: u64) -> Result<RawTrace> {
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidParameter(format!("noise_sd must be >= 0, got {noise_sd}")));
    }
    if noise_sd == 0.0 {
        return Ok(trace.clone());
    }
    let active: Vec<bool> = match trigger {
        Trigger::Always => vec![true; trace.len()],
        Trigger::OnBump => align_to_geo_frame(trace)?.yaw.iter().map(|y| y.abs() > delta_bump).collect(),
    };
    let noise = Normal::new(0.0, noise_sd).expect("sd checked");
    let mut rng = seed::rng(seed::derive(root_seed, "perturb"));
    let samples: Vec<ImuSample> = trace
        .samples()
        .iter()
        .zip(&active)
        .map(|(s, &on)| {
            if !on {
                return *s;
            }
            let mut out = *s;
            for c in out.gyro.iter_mut().chain(out.accel.iter_mut()) {
                *c += noise.sample(&mut rng);
            }
            out
        })
        .collect();
    RawTrace::new(samples, trace.sample_period(), trace.already_aligned())
}
