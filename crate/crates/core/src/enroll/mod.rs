//! Building the driver profile table without labels.
//!
//! Each enrolled driver keeps its turn vectors and a GMM fitted on them. A
//! new trip is scored against every entry by mean per-turn log density; the
//! best entry above the gate threshold absorbs the trip, otherwise a new
//! driver is created.

mod gmm;

pub use gmm::{fit_gmm, trip_loglikelihood, GmmModel, GMM_MAX_ITER, GMM_TOLERANCE, GMM_VARIANCE_FLOOR};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::label::DriverLabel;
use crate::seed;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};

pub const DEFAULT_COMPONENTS: usize = 2;
pub const DEFAULT_GATE_THRESHOLD: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub label: DriverLabel,
    pub vectors: Vec<FeatureVector>,
    pub gmm: GmmModel,
    pub seed: u64,
}

impl ProfileEntry {
    /// Fit the entry's GMM on `vectors`; uses `min(k, vectors)` components.
    pub fn fit(label: DriverLabel, vectors: Vec<FeatureVector>, k: usize, seed: u64) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyTrip);
        }
        let rows: Vec<Vec<f64>> = vectors.iter().map(|v| v.values.clone()).collect();
        let gmm = fit_gmm(&rows, k.min(rows.len()), seed)?;
        Ok(Self { label, vectors, gmm, seed })
    }

    pub fn score(&self, trip: &[FeatureVector]) -> Result<f64> {
        let rows: Vec<Vec<f64>> = trip.iter().map(|v| v.values.clone()).collect();
        trip_loglikelihood(&self.gmm, &rows)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileTable {
    entries: BTreeMap<DriverLabel, ProfileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    pub label: DriverLabel,
    pub created: bool,
    /// Gate statistic of the trip against every entry that existed before it.
    pub scores: BTreeMap<DriverLabel, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnrollConfig {
    pub components: usize,
    pub threshold: f64,
    pub seed: u64,
}

impl Default for EnrollConfig {
    fn default() -> Self {
        Self { components: DEFAULT_COMPONENTS, threshold: DEFAULT_GATE_THRESHOLD, seed: 0 }
    }
}

impl ProfileTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, label: &DriverLabel) -> Option<&ProfileEntry> {
        self.entries.get(label)
    }

    pub fn entries(&self) -> impl Iterator<Item = &ProfileEntry> {
        self.entries.values()
    }

    pub fn insert(&mut self, entry: ProfileEntry) -> Result<()> {
        if self.entries.contains_key(&entry.label) {
            return Err(Error::InvalidParameter(format!("label {} already enrolled", entry.label)));
        }
        self.entries.insert(entry.label.clone(), entry);
        Ok(())
    }

    fn next_label(&self) -> DriverLabel {
        (self.entries.len() + 1..)
            .map(DriverLabel::numbered)
            .find(|l| !self.entries.contains_key(l))
            .expect("unbounded label space")
    }

    fn entry_seed(config: &EnrollConfig, label: &DriverLabel) -> u64 {
        seed::derive(config.seed, &format!("gmm/{label}"))
    }

    /// Gate one trip: join the best-scoring entry if its score reaches the
    /// threshold (refitting only that entry), else enroll a new driver.
    pub fn assign_or_new_driver(&mut self, trip: &[FeatureVector], config: &EnrollConfig) -> Result<Assignment> {
        if trip.is_empty() {
            return Err(Error::EmptyTrip);
        }
        let mut scores = BTreeMap::new();
        for entry in self.entries.values() {
            scores.insert(entry.label.clone(), entry.score(trip)?);
        }
        let best = scores
            .iter()
            .filter(|(_, s)| **s >= config.threshold)
            .max_by(|a, b| a.1.total_cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(l, _)| l.clone());
        let strip = |v: &FeatureVector| FeatureVector { label: None, ..v.clone() };
        match best {
            Some(label) => {
                let entry = self.entries.get(&label).expect("scored entry exists");
                let mut vectors = entry.vectors.clone();
                vectors.extend(trip.iter().map(strip));
                let refit =
                    ProfileEntry::fit(label.clone(), vectors, config.components, Self::entry_seed(config, &label))?;
                self.entries.insert(label.clone(), refit);
                Ok(Assignment { label, created: false, scores })
            }
            None => {
                let label = self.next_label();
                let vectors = trip.iter().map(strip).collect();
                let entry =
                    ProfileEntry::fit(label.clone(), vectors, config.components, Self::entry_seed(config, &label))?;
                self.entries.insert(label.clone(), entry);
                Ok(Assignment { label, created: true, scores })
            }
        }
    }

    /// One JSON object per entry and line.
    pub fn write_jsonl<W: Write>(&self, mut writer: W) -> Result<()> {
        for entry in self.entries.values() {
            serde_json::to_writer(&mut writer, entry)?;
            writeln!(writer)?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut table = Self::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            table.insert(serde_json::from_str(&line)?)?;
        }
        Ok(table)
    }

    /// Training set for the classifiers: every stored vector labeled with its entry.
    pub fn labeled_vectors(&self) -> Vec<FeatureVector> {
        self.entries
            .values()
            .flat_map(|e| e.vectors.iter().map(move |v| FeatureVector { label: Some(e.label.clone()), ..v.clone() }))
            .collect()
    }
}

/// Indices chosen for relabeling: a seeded uniform subset of size
/// `ceil(p_err / 100 * n)`.
pub fn select_for_relabel(n: usize, p_err: f64, seed: u64) -> Result<Vec<usize>> {
    if !(0.0..=100.0).contains(&p_err) {
        return Err(Error::InvalidParameter(format!("p_err {p_err} outside [0, 100]")));
    }
    let count = ((p_err * n as f64 / 100.0) - 1e-9).ceil().max(0.0) as usize;
    let mut rng = seed::rng(seed::derive(seed, "relabel-select"));
    let mut picked = sample(&mut rng, n, count.min(n)).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Redraw the labels of a `p_err` percent subset uniformly from all labels
/// present. A redrawn label may coincide with the original one.
pub fn corrupt_labels(data: &[FeatureVector], p_err: f64, seed: u64) -> Result<Vec<FeatureVector>> {
    let picked = select_for_relabel(data.len(), p_err, seed)?;
    let mut labels: Vec<DriverLabel> = data.iter().filter_map(|v| v.label.clone()).collect();
    labels.sort();
    labels.dedup();
    let mut out = data.to_vec();
    if labels.is_empty() {
        return Ok(out);
    }
    let mut rng = seed::rng(seed::derive(seed, "relabel-draw"));
    for i in picked {
        out[i].label = Some(labels[rng.random_range(0..labels.len())].clone());
    }
    Ok(out)
}
