//! Evaluation harness: cross-validated accuracy, accuracy against trip
//! length, the interpolation ablation, the erroneous-label sweep and the
//! driver/car/route factor analysis.

use crate::classify::{kfold_eval_with, train, KFoldReport, ModelKind};
use crate::config::RunConfig;
use crate::enroll::corrupt_labels;
use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::label::DriverLabel;
use crate::pipeline::{extract, featurize};
use crate::seed;
use crate::simgen::{generate_trip_with, random_route, DriverProfile, RouteMix, SensorNoise, TripOptions};
use crate::turns::{Direction, TurnSegment};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledTrip {
    pub driver: DriverLabel,
    pub turns: Vec<TurnSegment>,
}

/// Extracted turns of labeled trips.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub trips: Vec<LabeledTrip>,
}

impl Corpus {
    pub fn turn_count(&self) -> usize {
        self.trips.iter().map(|t| t.turns.len()).sum()
    }

    pub fn drivers(&self) -> Vec<DriverLabel> {
        let mut labels: Vec<DriverLabel> = self.trips.iter().map(|t| t.driver.clone()).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    pub fn restricted_to(&self, drivers: &[DriverLabel]) -> Corpus {
        Corpus { trips: self.trips.iter().filter(|t| drivers.contains(&t.driver)).cloned().collect() }
    }

    /// Labeled feature vectors in trip order.
    pub fn vectors(&self, config: &RunConfig, interpolate: bool) -> Result<Vec<FeatureVector>> {
        let per_trip: Vec<Vec<FeatureVector>> = self
            .trips
            .par_iter()
            .map(|trip| {
                Ok(featurize(&trip.turns, config, interpolate)?
                    .into_iter()
                    .map(|v| v.with_label(trip.driver.clone()))
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(per_trip.into_iter().flatten().collect())
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.trips.iter().flat_map(|t| t.turns.iter().map(|s| s.direction)).collect()
    }
}

/// A synthetic corpus: every driver drives `trips_per_driver` random routes.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub drivers: Vec<DriverProfile>,
    pub trips_per_driver: usize,
    pub route: RouteMix,
    /// Template for every trip; its seed is replaced per trip.
    pub trip: TripOptions,
    /// Give trip `j` of every driver the same route.
    pub shared_routes: bool,
}

/// Simulate and extract; driver `i` is labeled `D{i+1}`.
pub fn simulate_corpus(spec: &CorpusSpec, config: &RunConfig, root_seed: u64) -> Result<Corpus> {
    let per = spec.trips_per_driver;
    let jobs: Vec<(usize, usize)> = (0..spec.drivers.len()).flat_map(|d| (0..per).map(move |j| (d, j))).collect();
    let trips = jobs
        .par_iter()
        .map(|&(d, j)| {
            let flat = (d * per + j) as u64;
            let route_index = if spec.shared_routes { j as u64 } else { flat };
            let route = random_route(&spec.route, seed::derive_indexed(root_seed, "corpus-route", route_index));
            let options = TripOptions { seed: seed::derive_indexed(root_seed, "corpus-trip", flat), ..spec.trip };
            let (trace, _) = generate_trip_with(&spec.drivers[d], &route, &options)?;
            Ok(LabeledTrip { driver: DriverLabel::numbered(d + 1), turns: extract(&trace, config)?.turns })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus { trips })
}

/// Cross-validated one-turn accuracy.
pub fn maneuver_report(data: &[FeatureVector], kind: ModelKind, config: &RunConfig) -> Result<KFoldReport> {
    kfold_eval_with(data, kind, config.folds, config.trees, seed::derive(config.seed, "maneuver"), |_, rows| Ok(rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub turns: usize,
    pub accuracy: f64,
    pub trials: usize,
}

/// Share of every driver's turns held out per trip-curve iteration.
pub const CURVE_TEST_SHARE: f64 = 0.25;

/// Trip-based accuracy against the number of turns fused.
///
/// Each iteration holds out a random share of every driver's turns, fits
/// Gaussian NB on the rest, then for each trip length draws a driver and
/// that many of its held-out turns and checks the MAP decision.
pub fn trip_curve(
    data: &[FeatureVector],
    config: &RunConfig,
    iterations: usize,
    max_turns: usize,
) -> Result<Vec<CurvePoint>> {
    if max_turns == 0 || iterations == 0 {
        return Err(Error::InvalidParameter("trip curve needs iterations and turns >= 1".into()));
    }
    let mut by_driver: BTreeMap<DriverLabel, Vec<&FeatureVector>> = BTreeMap::new();
    for v in data {
        let label = v.label.clone().ok_or_else(|| Error::InsufficientData("unlabeled feature vector".into()))?;
        by_driver.entry(label).or_default().push(v);
    }
    if by_driver.len() < 2 {
        return Err(Error::InsufficientData("trip curve needs at least two drivers".into()));
    }
    let held_out = |n: usize| ((n as f64 * CURVE_TEST_SHARE).ceil() as usize).max(max_turns);
    for (label, rows) in &by_driver {
        if rows.len() < held_out(rows.len()) + 2 {
            return Err(Error::InsufficientData(format!(
                "driver {label} has {} turns, too few for {max_turns}-turn trips",
                rows.len()
            )));
        }
    }
    let drivers: Vec<&DriverLabel> = by_driver.keys().collect();
    let log_priors = config.log_priors(drivers.len())?;
    let hits: Vec<Vec<bool>> = (0..iterations)
        .into_par_iter()
        .map(|i| -> Result<Vec<bool>> {
            let mut rng = seed::rng(seed::derive_indexed(config.seed, "trip-curve", i as u64));
            let mut train_rows = Vec::new();
            let mut test_rows: Vec<Vec<FeatureVector>> = Vec::new();
            for rows in by_driver.values() {
                let mut shuffled = rows.clone();
                shuffled.shuffle(&mut rng);
                let cut = held_out(rows.len());
                test_rows.push(shuffled[..cut].iter().map(|v| (*v).clone()).collect());
                train_rows.extend(shuffled[cut..].iter().map(|v| (*v).clone()));
            }
            let model = train(&train_rows, ModelKind::NaiveBayes, 0)?;
            (1..=max_turns)
                .map(|k| {
                    let d = rng.random_range(0..drivers.len());
                    let mut pool = test_rows[d].clone();
                    pool.shuffle(&mut rng);
                    pool.truncate(k);
                    let pred = model.predict_trip_map(&pool, log_priors.as_deref())?;
                    Ok(&pred.predicted == drivers[d])
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok((1..=max_turns)
        .map(|k| {
            let correct = hits.iter().filter(|h| h[k - 1]).count();
            CurvePoint { turns: k, accuracy: correct as f64 / iterations as f64, trials: iterations }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalAccuracy {
    pub overall: f64,
    pub left: f64,
    pub right: f64,
}

fn directional(report: &KFoldReport, data: &[FeatureVector]) -> DirectionalAccuracy {
    let mut tally = [[0usize; 2]; 2];
    for (v, &pred) in data.iter().zip(&report.predictions) {
        let truth = v.label.as_ref().and_then(|l| report.classes.binary_search(l).ok());
        let d = usize::from(v.direction == Direction::Right);
        tally[d][0] += usize::from(truth == Some(pred));
        tally[d][1] += 1;
    }
    let share = |c: usize, n: usize| if n == 0 { 0.0 } else { c as f64 / n as f64 };
    DirectionalAccuracy {
        overall: report.accuracy,
        left: share(tally[0][0], tally[0][1]),
        right: share(tally[1][0], tally[1][1]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub interpolated: DirectionalAccuracy,
    pub native: DirectionalAccuracy,
}

impl AblationReport {
    pub fn left_gap(&self) -> f64 {
        self.interpolated.left - self.native.left
    }

    pub fn right_gap(&self) -> f64 {
        self.interpolated.right - self.native.right
    }
}

/// Random Forest accuracy with turns resampled to a fixed length versus
/// features taken from the native-rate samples.
pub fn interpolation_ablation(corpus: &Corpus, config: &RunConfig) -> Result<AblationReport> {
    let with = corpus.vectors(config, true)?;
    let without = corpus.vectors(config, false)?;
    let a = maneuver_report(&with, ModelKind::RandomForest, config)?;
    let b = maneuver_report(&without, ModelKind::RandomForest, config)?;
    Ok(AblationReport { interpolated: directional(&a, &with), native: directional(&b, &without) })
}

pub const P_ERR_LEVELS: [f64; 5] = [0.0, 5.0, 10.0, 15.0, 20.0];

/// Cross-validated accuracy when a share of every training fold is relabeled
/// at random; held-out rows keep their true labels.
pub fn label_noise_sweep(
    data: &[FeatureVector],
    kind: ModelKind,
    levels: &[f64],
    config: &RunConfig,
) -> Result<Vec<(f64, f64)>> {
    levels
        .iter()
        .map(|&p| {
            let report = kfold_eval_with(
                data,
                kind,
                config.folds,
                config.trees,
                seed::derive(config.seed, "maneuver"),
                |fold, rows| {
                    corrupt_labels(&rows, p, seed::derive_indexed(config.seed, &format!("p_err/{p}"), fold as u64))
                },
            )?;
            Ok((p, report.accuracy))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorCase {
    pub name: String,
    pub differentiated: String,
    pub constant: String,
    pub accuracy: f64,
    pub turns: usize,
}

/// Settings for the two-trip factor analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorSetup {
    pub drivers: [DriverProfile; 2],
    pub cars: [SensorNoise; 2],
    pub route: RouteMix,
    pub trips_per_side: usize,
    pub sample_period: f64,
}

/// Binary Random Forest accuracy between two sides that differ only in the
/// named factors. A side's routes are its own random draws when the route
/// differs, and identical scripts otherwise.
pub fn factor_analysis(setup: &FactorSetup, config: &RunConfig, root_seed: u64) -> Result<Vec<FactorCase>> {
    let cases: [(&str, bool, bool, bool); 6] = [
        ("T1", false, true, false),
        ("T2", false, false, true),
        ("T3", false, true, true),
        ("T4", true, false, false),
        ("T5", true, true, false),
        ("T6", true, false, true),
    ];
    cases
        .iter()
        .enumerate()
        .map(|(ci, &(name, driver, car, route))| {
            let case_seed = seed::derive_indexed(root_seed, "factor-case", ci as u64);
            let mut data = Vec::new();
            for side in 0..2usize {
                let profile = setup.drivers[if driver { side } else { 0 }];
                let sensor = setup.cars[if car { side } else { 0 }];
                let label = DriverLabel::new(if side == 0 { "A" } else { "B" })?;
                let trips: Vec<Vec<FeatureVector>> = (0..setup.trips_per_side)
                    .into_par_iter()
                    .map(|j| {
                        let route_family = if route { side as u64 } else { 0 };
                        let route_seed = seed::derive_indexed(case_seed, &format!("route/{route_family}"), j as u64);
                        let trip_seed = seed::derive_indexed(case_seed, &format!("trip/{side}"), j as u64);
                        let options = TripOptions { sensor, ..TripOptions::new(setup.sample_period, trip_seed) };
                        let (trace, _) =
                            generate_trip_with(&profile, &random_route(&setup.route, route_seed), &options)?;
                        let turns = extract(&trace, config)?.turns;
                        Ok(featurize(&turns, config, true)?.into_iter().map(|v| v.with_label(label.clone())).collect())
                    })
                    .collect::<Result<_>>()?;
                data.extend(trips.into_iter().flatten());
            }
            let report = maneuver_report(&data, ModelKind::RandomForest, config)?;
            let factors = |d: bool| {
                let names: Vec<&str> = [("driver", driver), ("car", car), ("route", route)]
                    .iter()
                    .filter(|(_, on)| *on == d)
                    .map(|(n, _)| *n)
                    .collect();
                names.join("+")
            };
            Ok(FactorCase {
                name: name.to_string(),
                differentiated: factors(true),
                constant: factors(false),
                accuracy: report.accuracy,
                turns: data.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub curve_iterations: usize,
    pub max_turns: usize,
    pub p_err_levels: Vec<f64>,
    pub ablation: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { curve_iterations: 500, max_turns: 10, p_err_levels: P_ERR_LEVELS.to_vec(), ablation: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub config: RunConfig,
    pub drivers: usize,
    pub turns: usize,
    pub random_forest: KFoldReport,
    pub naive_bayes: KFoldReport,
    pub trip_curve: Vec<CurvePoint>,
    pub ablation: Option<AblationReport>,
    pub p_err: Vec<(f64, f64)>,
    pub factors: Vec<FactorCase>,
}

pub fn run_eval_suite(config: &RunConfig, corpus: &Corpus, options: &EvalOptions) -> Result<EvalReport> {
    config.validate()?;
    let drivers = corpus.drivers();
    if drivers.len() < 2 {
        return Err(Error::InsufficientData("corpus needs at least two drivers".into()));
    }
    let data = corpus.vectors(config, true)?;
    let random_forest = maneuver_report(&data, ModelKind::RandomForest, config)?;
    let naive_bayes = maneuver_report(&data, ModelKind::NaiveBayes, config)?;
    let trip_curve = trip_curve(&data, config, options.curve_iterations, options.max_turns)?;
    let ablation = if options.ablation { Some(interpolation_ablation(corpus, config)?) } else { None };
    let p_err = label_noise_sweep(&data, ModelKind::RandomForest, &options.p_err_levels, config)?;
    Ok(EvalReport {
        config: config.clone(),
        drivers: drivers.len(),
        turns: data.len(),
        random_forest,
        naive_bayes,
        trip_curve,
        ablation,
        p_err,
        factors: Vec::new(),
    })
}

impl EvalReport {
    /// Write `maneuver.csv`, `trip_curve.csv`, `p_err.csv`, and when present
    /// `interpolation.csv` and `factors.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("maneuver.csv"))?;
        w.write_record(["classifier", "accuracy", "mean_fold_accuracy"])?;
        for (name, r) in [("rf", &self.random_forest), ("nb", &self.naive_bayes)] {
            w.write_record([name.to_string(), r.accuracy.to_string(), r.mean_fold_accuracy.to_string()])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("trip_curve.csv"))?;
        w.write_record(["turns", "accuracy", "trials"])?;
        for p in &self.trip_curve {
            w.write_record([p.turns.to_string(), p.accuracy.to_string(), p.trials.to_string()])?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("p_err.csv"))?;
        w.write_record(["p_err", "accuracy"])?;
        for (p, a) in &self.p_err {
            w.write_record([p.to_string(), a.to_string()])?;
        }
        w.flush()?;
        if let Some(ab) = &self.ablation {
            let mut w = csv::Writer::from_path(dir.join("interpolation.csv"))?;
            w.write_record(["variant", "overall", "left", "right"])?;
            for (name, d) in [("interpolated", ab.interpolated), ("native", ab.native)] {
                w.write_record([name.to_string(), d.overall.to_string(), d.left.to_string(), d.right.to_string()])?;
            }
            w.flush()?;
        }
        if !self.factors.is_empty() {
            let mut w = csv::Writer::from_path(dir.join("factors.csv"))?;
            w.write_record(["case", "differentiated", "constant", "accuracy", "turns"])?;
            for f in &self.factors {
                w.write_record([
                    f.name.clone(),
                    f.differentiated.clone(),
                    f.constant.clone(),
                    f.accuracy.to_string(),
                    f.turns.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Ok(())
    }

    /// Human-readable summary, ending with the effective configuration.
    pub fn summary(&self) -> String {
        let pct = |x: f64| format!("{:.1}%", 100.0 * x);
        let mut s = String::new();
        let _ = writeln!(s, "drivers: {}  turns: {}", self.drivers, self.turns);
        let _ = writeln!(
            s,
            "one-turn accuracy ({}-fold): random forest {}, naive bayes {}",
            self.config.folds,
            pct(self.random_forest.accuracy),
            pct(self.naive_bayes.accuracy)
        );
        let _ = writeln!(s, "trip accuracy by turns fused:");
        for p in &self.trip_curve {
            let _ = writeln!(s, "  {:>2} turns: {}", p.turns, pct(p.accuracy));
        }
        if let Some(ab) = &self.ablation {
            let _ = writeln!(
                s,
                "interpolation: with {} (left {}, right {}), without {} (left {}, right {})",
                pct(ab.interpolated.overall),
                pct(ab.interpolated.left),
                pct(ab.interpolated.right),
                pct(ab.native.overall),
                pct(ab.native.left),
                pct(ab.native.right)
            );
        }
        let _ = writeln!(s, "erroneous labels:");
        for (p, a) in &self.p_err {
            let _ = writeln!(s, "  p_err {p:>4}%: {}", pct(*a));
        }
        if !self.factors.is_empty() {
            let _ = writeln!(s, "factor analysis:");
            for f in &self.factors {
                let _ = writeln!(
                    s,
                    "  {} differ: {:<18} same: {:<18} {}",
                    f.name,
                    f.differentiated,
                    f.constant,
                    pct(f.accuracy)
                );
            }
        }
        let _ = writeln!(s, "\n[config]\n{}", self.config.to_toml_string());
        s
    }
}
