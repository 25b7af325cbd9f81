//! Per-turn classification and trip-level fusion.
//!
//! Two model kinds are supported: Gaussian naive Bayes and a random forest.
//! Both answer single-turn queries; naive Bayes also fuses a trip's turns by
//! maximizing `log p(D_k) + sum_i log p(T_i | D_k)`.

pub mod forest;
mod kfold;
pub mod naive_bayes;

pub use forest::{RandomForest, DEFAULT_TREES};
pub use kfold::{kfold_eval, kfold_eval_with, stratified_folds, KFoldReport};
pub use naive_bayes::GaussianNb;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, VECTOR_LEN};
use crate::label::DriverLabel;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[serde(rename = "nb")]
    NaiveBayes,
    #[serde(rename = "rf")]
    RandomForest,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::NaiveBayes => "nb",
            ModelKind::RandomForest => "rf",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nb" => Ok(ModelKind::NaiveBayes),
            "rf" => Ok(ModelKind::RandomForest),
            other => Err(Error::Parse(format!("unknown model kind '{other}' (want nb or rf)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters")]
pub enum ModelParams {
    #[serde(rename = "nb")]
    NaiveBayes(GaussianNb),
    #[serde(rename = "rf")]
    RandomForest(RandomForest),
}

/// A fitted classifier. Classes are kept sorted, so score index `k`
/// belongs to `classes[k]` and ties resolve to the smaller label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub seed: u64,
    pub dim: usize,
    pub classes: Vec<DriverLabel>,
    #[serde(flatten)]
    pub params: ModelParams,
}

/// Rows, class indices and the sorted class list of a labeled set.
pub(crate) struct Encoded {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub classes: Vec<DriverLabel>,
}

pub(crate) fn encode(data: &[FeatureVector]) -> Result<Encoded> {
    let mut classes: Vec<DriverLabel> = Vec::new();
    for v in data {
        let label = v.label.as_ref().ok_or_else(|| Error::InsufficientData("training vector without label".into()))?;
        classes.push(label.clone());
    }
    classes.sort();
    classes.dedup();
    let dim = data.first().map_or(0, FeatureVector::dim);
    let mut x = Vec::with_capacity(data.len());
    let mut y = Vec::with_capacity(data.len());
    for v in data {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: v.dim() });
        }
        let label = v.label.as_ref().expect("checked above");
        y.push(classes.binary_search(label).expect("label is in class list"));
        x.push(v.values.clone());
    }
    Ok(Encoded { x, y, classes })
}

pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Train a classifier. Needs at least two classes, each with a sample.
pub fn train(data: &[FeatureVector], kind: ModelKind, seed: u64) -> Result<TrainedModel> {
    train_with_trees(data, kind, seed, forest::DEFAULT_TREES)
}

pub fn train_with_trees(data: &[FeatureVector], kind: ModelKind, seed: u64, n_trees: usize) -> Result<TrainedModel> {
    let enc = encode(data)?;
    if enc.classes.len() < 2 {
        return Err(Error::InsufficientData(format!("need at least 2 classes, got {}", enc.classes.len())));
    }
    let dim = enc.x[0].len();
    if dim == 0 {
        return Err(Error::InsufficientData("feature vectors are empty".into()));
    }
    let params = match kind {
        ModelKind::NaiveBayes => ModelParams::NaiveBayes(GaussianNb::fit(&enc.x, &enc.y, enc.classes.len())?),
        ModelKind::RandomForest => {
            if n_trees == 0 {
                return Err(Error::InvalidParameter("forest needs at least one tree".into()));
            }
            ModelParams::RandomForest(RandomForest::fit(&enc.x, &enc.y, enc.classes.len(), n_trees, seed))
        }
    };
    Ok(TrainedModel { version: MODEL_FORMAT_VERSION, seed, dim, classes: enc.classes, params })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnPrediction {
    pub label: DriverLabel,
    /// Log posterior up to a constant (naive Bayes) or vote fraction (forest).
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripPrediction {
    pub predicted: DriverLabel,
    pub log_scores: BTreeMap<DriverLabel, f64>,
    pub n_turns_used: usize,
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::NaiveBayes(_) => ModelKind::NaiveBayes,
            ModelParams::RandomForest(_) => ModelKind::RandomForest,
        }
    }

    fn check_dim(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Parse(format!("unsupported model version {}", model.version)));
        }
        Ok(model)
    }

    /// Maneuver-based prediction from a single turn.
    pub fn predict_turn(&self, v: &FeatureVector) -> Result<TurnPrediction> {
        self.check_dim(&v.values)?;
        let scores = match &self.params {
            ModelParams::NaiveBayes(nb) => nb.joint_log_scores(&v.values),
            ModelParams::RandomForest(rf) => rf.vote_fractions(&v.values),
        };
        Ok(TurnPrediction { label: self.classes[argmax(&scores)].clone(), scores })
    }

    /// Per-turn class-conditional log likelihoods (naive Bayes only).
    pub fn turn_log_likelihoods(&self, v: &FeatureVector) -> Result<Vec<f64>> {
        self.check_dim(&v.values)?;
        match &self.params {
            ModelParams::NaiveBayes(nb) => Ok(nb.log_likelihood(&v.values)),
            ModelParams::RandomForest(_) => Err(Error::UnsupportedModel("rf")),
        }
    }

    /// Trip-based MAP estimate. `priors` follow `classes`; `None` is uniform.
    pub fn predict_trip_map(&self, turns: &[FeatureVector], priors: Option<&[f64]>) -> Result<TripPrediction> {
        if turns.is_empty() {
            return Err(Error::EmptyTrip);
        }
        let n = self.classes.len();
        let log_priors: Vec<f64> = match priors {
            None => vec![-(n as f64).ln(); n],
            Some(p) => {
                if p.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, got: p.len() });
                }
                let sum: f64 = p.iter().sum();
                if p.iter().any(|v| !(v.is_finite() && *v > 0.0)) || (sum - 1.0).abs() > 1e-6 {
                    return Err(Error::InvalidParameter("priors must be positive and sum to 1".into()));
                }
                p.iter().map(|v| v.ln()).collect()
            }
        };
        let per_turn = turns.iter().map(|t| self.turn_log_likelihoods(t)).collect::<Result<Vec<_>>>()?;
        let scores = fuse_log_scores(&log_priors, &per_turn);
        let best = argmax(&scores);
        Ok(TripPrediction {
            predicted: self.classes[best].clone(),
            log_scores: self.classes.iter().cloned().zip(scores).collect(),
            n_turns_used: turns.len(),
        })
    }
}

/// `log p(D_k) + sum_i log p(T_i | D_k)` for every class k.
pub fn fuse_log_scores(log_priors: &[f64], per_turn: &[Vec<f64>]) -> Vec<f64> {
    let mut scores = log_priors.to_vec();
    for turn in per_turn {
        for (s, l) in scores.iter_mut().zip(turn) {
            *s += l;
        }
    }
    scores
}

/// Deterministic feature-vector dimension check used by readers.
pub fn check_vector_dim(v: &FeatureVector) -> Result<()> {
    if v.dim() != VECTOR_LEN {
        return Err(Error::DimensionMismatch { expected: VECTOR_LEN, got: v.dim() });
    }
    Ok(())
}
