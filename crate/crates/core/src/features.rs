//! Turn features and the 225-value feature vector.
//!
//! Three per-sample features are computed on an interpolated turn:
//!
//! * F1, `A_eot[n] = A[n] * sin(theta[n])`, where `A[n]` is the acceleration
//!   along the current heading;
//! * F2, successive differences of F1;
//! * F3, successive differences of the raw (unsmoothed) yaw rate.
//!
//! The turn is cut into five equal stages. For every (feature, stage) pair
//! the vector holds the 10/25/50/75/90th percentiles followed by the
//! autocorrelations at lags 1..=10. Entries are ordered feature-major, then
//! stage, then statistic: index = `(f * 5 + s) * 15 + j`. F2 and F3 are
//! differenced inside each stage.

use crate::error::{Error, Result};
use crate::label::DriverLabel;
use crate::turns::{rotate_cw, Direction, TurnSegment};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

pub const N_FEATURES: usize = 3;
pub const N_STAGES: usize = 5;
pub const PERCENTILES: [f64; 5] = [10.0, 25.0, 50.0, 75.0, 90.0];
pub const MAX_LAG: usize = 10;
pub const STATS_PER_BLOCK: usize = PERCENTILES.len() + MAX_LAG;
pub const VECTOR_LEN: usize = N_FEATURES * N_STAGES * STATS_PER_BLOCK;
/// Autocorrelation denominators below this count as a flat series.
const DEGENERATE_VARIANCE: f64 = 1e-12;
/// Shortest stage that still supports lag 10 on its differences.
const MIN_STAGE_LEN: usize = MAX_LAG + 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub direction: Direction,
    pub label: Option<DriverLabel>,
}

impl FeatureVector {
    pub fn with_label(mut self, label: DriverLabel) -> Self {
        self.label = Some(label);
        self
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Column names in vector order: `f{1..3}_s{1..5}_{p10|..|p90|ac1..ac10}`.
pub fn feature_names() -> Vec<String> {
    let stats: Vec<String> =
        PERCENTILES.iter().map(|p| format!("p{p}")).chain((1..=MAX_LAG).map(|k| format!("ac{k}"))).collect();
    let mut names = Vec::with_capacity(VECTOR_LEN);
    for f in 1..=N_FEATURES {
        for s in 1..=N_STAGES {
            for stat in &stats {
                names.push(format!("f{f}_s{s}_{stat}"));
            }
        }
    }
    names
}

/// Acceleration along the instantaneous heading: the SOT axis rotated
/// clockwise by `theta[n]`, dotted with the horizontal acceleration.
pub fn heading_accel(turn: &TurnSegment) -> Vec<f64> {
    turn.accel_en
        .iter()
        .zip(&turn.heading)
        .map(|(a, theta)| {
            let h = rotate_cw(turn.sot_axis, *theta);
            a[0] * h[0] + a[1] * h[1]
        })
        .collect()
}

/// F1: `A[n] * sin(theta[n])`.
pub fn a_eot(turn: &TurnSegment) -> Vec<f64> {
    heading_accel(turn).iter().zip(&turn.heading).map(|(a, theta)| a * theta.sin()).collect()
}

pub fn deltas(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::SeriesTooShort { need: 2, got: x.len() });
    }
    Ok(x.windows(2).map(|w| w[1] - w[0]).collect())
}

fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = p / 100.0 * (n - 1) as f64;
    let lo = rank.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Percentile by linear interpolation between order statistics at rank
/// `p / 100 * (n - 1)`.
pub fn percentile(x: &[f64], p: f64) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::SeriesTooShort { need: 1, got: 0 });
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("percentile {p} outside [0, 100]")));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, p))
}

/// Biased autocorrelation at lag `k`; flat series give 0.
pub fn autocorr(x: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter("lag must be at least 1".into()));
    }
    if k >= x.len() {
        return Err(Error::SeriesTooShort { need: k + 1, got: x.len() });
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let denom: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    if denom < DEGENERATE_VARIANCE {
        return Ok(0.0);
    }
    let num: f64 = x.iter().zip(&x[k..]).map(|(a, b)| (a - mean) * (b - mean)).sum();
    Ok(num / denom)
}

fn push_block(out: &mut Vec<f64>, series: &[f64]) -> Result<()> {
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    out.extend(PERCENTILES.iter().map(|p| percentile_sorted(&sorted, *p)));
    for k in 1..=MAX_LAG {
        out.push(autocorr(series, k)?);
    }
    Ok(())
}

/// Stage boundaries `floor(i * n / 5)` for `i = 0..=5`.
pub fn stage_bounds(n: usize) -> [usize; N_STAGES + 1] {
    std::array::from_fn(|i| i * n / N_STAGES)
}

fn build(turn: &TurnSegment) -> Result<FeatureVector> {
    let n = turn.len();
    if turn.heading.len() != n || turn.accel_en.len() != n || turn.yaw_raw.len() != n {
        return Err(Error::InvalidParameter("turn series lengths disagree".into()));
    }
    if n < N_STAGES * MIN_STAGE_LEN {
        return Err(Error::SeriesTooShort { need: N_STAGES * MIN_STAGE_LEN, got: n });
    }
    let f1 = a_eot(turn);
    let bounds = stage_bounds(n);
    let mut values = Vec::with_capacity(VECTOR_LEN);
    for s in 0..N_STAGES {
        push_block(&mut values, &f1[bounds[s]..bounds[s + 1]])?;
    }
    for s in 0..N_STAGES {
        push_block(&mut values, &deltas(&f1[bounds[s]..bounds[s + 1]])?)?;
    }
    for s in 0..N_STAGES {
        push_block(&mut values, &deltas(&turn.yaw_raw[bounds[s]..bounds[s + 1]])?)?;
    }
    debug_assert_eq!(values.len(), VECTOR_LEN);
    Ok(FeatureVector { values, direction: turn.direction, label: None })
}

/// Feature vector of an interpolated turn; its length must split into five
/// equal stages of at least 12 samples.
pub fn build_feature_vector(turn: &TurnSegment) -> Result<FeatureVector> {
    if !turn.len().is_multiple_of(N_STAGES) {
        return Err(Error::InvalidParameter(format!(
            "turn length {} is not divisible into {N_STAGES} stages",
            turn.len()
        )));
    }
    build(turn)
}

/// Feature vector of a turn at its native length, stages cut at
/// `floor(i * n / 5)`. Only used to measure what interpolation buys.
pub fn build_feature_vector_native(turn: &TurnSegment) -> Result<FeatureVector> {
    build(turn)
}

fn format_value(v: f64) -> String {
    format!("{v}")
}

/// Write vectors as CSV: 225 named feature columns, then `direction,label`.
pub fn write_feature_csv<W: Write>(writer: W, vectors: &[FeatureVector]) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    let mut header = feature_names();
    header.push("direction".into());
    header.push("label".into());
    csv.write_record(&header)?;
    for v in vectors {
        if v.dim() != VECTOR_LEN {
            return Err(Error::DimensionMismatch { expected: VECTOR_LEN, got: v.dim() });
        }
        let mut row: Vec<String> = v.values.iter().map(|x| format_value(*x)).collect();
        row.push(v.direction.to_string());
        row.push(v.label.as_ref().map(|l| l.to_string()).unwrap_or_default());
        csv.write_record(&row)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: Read>(reader: R) -> Result<Vec<FeatureVector>> {
    let mut csv = csv::Reader::from_reader(reader);
    let headers = csv.headers()?.clone();
    let mut expected = feature_names();
    expected.push("direction".into());
    expected.push("label".into());
    if headers.len() != expected.len() || headers.iter().zip(&expected).any(|(a, b)| a != b) {
        return Err(Error::Parse("feature CSV header does not match the documented column order".into()));
    }
    let mut out = Vec::new();
    for (row, record) in csv.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .take(VECTOR_LEN)
            .map(|v| v.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: '{v}': {e}", row + 1))))
            .collect::<Result<Vec<_>>>()?;
        let direction = record[VECTOR_LEN].parse()?;
        let label = match &record[VECTOR_LEN + 1] {
            "" => None,
            s => Some(DriverLabel::new(s)?),
        };
        out.push(FeatureVector { values, direction, label });
    }
    Ok(out)
}
